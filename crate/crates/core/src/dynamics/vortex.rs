//! Time-dependent velocity fields on `R^3`: Arnold's vortex identity,
//! the curl parametrization of divergence-free fields and pressure
//! recovery from a curl-free acceleration.
//!
//! Fields are written in `z1, z2, z3, t`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::expr::ExprMap;
use crate::poly::{bump, random_polynomial, var_names};
use crate::quadrature::{gauss_legendre, TensorRule};
use crate::sampling::SampleBox;
use crate::taylor::{Scalar, Series};

use super::field_bracket;

const VARS: [&str; 4] = ["z1", "z2", "z3", "t"];

#[derive(Debug, Clone)]
pub enum VelocityField {
    /// `v` given componentwise.
    Direct(ExprMap),
    /// `v = curl theta`, divergence-free by construction.
    CurlOf(ExprMap),
}

fn parse3(text: &str, vars: &[&str]) -> Result<ExprMap> {
    let m = ExprMap::parse_with_vars(vars, text)?;
    if m.n_outputs() != 3 {
        return Err(Error::DimensionMismatch(format!("expected 3 components, got {}", m.n_outputs())));
    }
    Ok(m)
}

pub fn curl(v: &[Series]) -> Vec<Series> {
    vec![
        &v[2].partial(1) - &v[1].partial(2),
        &v[0].partial(2) - &v[2].partial(0),
        &v[1].partial(0) - &v[0].partial(1),
    ]
}

pub fn divergence(v: &[Series]) -> Series {
    &(&v[0].partial(0) + &v[1].partial(1)) + &v[2].partial(2)
}

/// `gamma = d_t v + (v . grad) v`.
pub fn acceleration(v: &[Series]) -> Vec<Series> {
    (0..3)
        .map(|k| {
            let mut g = v[k].partial(3);
            for l in 0..3 {
                g = &g + &(&v[l] * &v[k].partial(l));
            }
            g
        })
        .collect()
}

impl VelocityField {
    pub fn direct(text: &str) -> Result<Self> {
        Ok(VelocityField::Direct(parse3(text, &VARS)?))
    }

    pub fn curl_of(theta: &str) -> Result<Self> {
        Ok(VelocityField::CurlOf(parse3(theta, &VARS)?))
    }

    /// `v` as series of order `order` in `(z1, z2, z3, t)` at `p`.
    pub fn series(&self, p: &[f64], order: usize) -> Result<Vec<Series>> {
        match self {
            VelocityField::Direct(m) => Ok(m.taylor_lift(p, order)?.components().to_vec()),
            VelocityField::CurlOf(m) => Ok(curl(m.taylor_lift(p, order + 1)?.components())),
        }
    }

    /// `gamma` at `p`.
    pub fn acceleration_at(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok(acceleration(&self.series(p, 1)?).iter().map(Series::value).collect())
    }
}

/// `(|div v|, max |1/2 curl gamma - (d_t omega + [v, omega])|)` at `p`, with
/// `omega = 1/2 curl v`.
pub fn vortex_terms(field: &VelocityField, p: &[f64]) -> Result<(f64, f64)> {
    let v = field.series(p, 2)?;
    let omega: Vec<Series> = curl(&v).iter().map(|s| s.scale(0.5)).collect();
    let gamma = acceleration(&v);
    let lhs: Vec<Series> = curl(&gamma).iter().map(|s| s.scale(0.5)).collect();
    let br = field_bracket(&v, &omega);
    let mut worst = 0.0f64;
    for k in 0..3 {
        let rhs = omega[k].partial(3).value() + br[k].value();
        worst = worst.max((lhs[k].value() - rhs).abs());
    }
    Ok((divergence(&v).value().abs(), worst))
}

/// Max of `(|div v|, vortex identity residual)` over `points`, with no
/// incompressibility requirement.
pub fn vortex_residual_unchecked(field: &VelocityField, points: &[Vec<f64>]) -> Result<(f64, f64)> {
    let mut out = (0.0f64, 0.0f64);
    for p in points {
        let (d, r) = vortex_terms(field, p)?;
        out = (out.0.max(d), out.1.max(r));
    }
    Ok(out)
}

/// Vortex identity residual over `points`; fails with `DivergenceNotZero`
/// when `|div v|` exceeds `div_tol` somewhere.
pub fn vortex_residual(field: &VelocityField, points: &[Vec<f64>], div_tol: f64) -> Result<f64> {
    let (d, r) = vortex_residual_unchecked(field, points)?;
    if d > div_tol {
        return Err(Error::DivergenceNotZero { max: d });
    }
    Ok(r)
}

/// `v = (z1 - z2, z1, 0)`: `omega = (0, 0, 1)`, `div v = 1`, and the
/// identity is off by `omega div v`.
pub fn compressible_counterexample() -> VelocityField {
    VelocityField::direct("z1 - z2, z1, 0").expect("fixed field parses")
}

/// Steady rigid rotation about the `z3` axis with angular speed `omega`.
pub fn rigid_rotation(omega: f64) -> VelocityField {
    VelocityField::direct(&format!("-{omega}*z2, {omega}*z1, 0")).expect("fixed field parses")
}

/// Time-dependent divergence-free test field: the curl of a random
/// polynomial potential, alternating with decaying ABC flows.
pub fn random_divergence_free<R: Rng>(index: usize, rng: &mut R) -> Result<VelocityField> {
    if index.is_multiple_of(2) {
        let theta: Vec<String> = (0..3)
            .map(|_| random_polynomial(&VARS, 3, 1.0, rng).to_string())
            .collect();
        VelocityField::curl_of(&theta.join(", "))
    } else {
        let (a, b, c, s) = (
            rng.gen_range(0.5..1.5),
            rng.gen_range(0.5..1.5),
            rng.gen_range(0.5..1.5),
            rng.gen_range(0.1..1.0),
        );
        VelocityField::direct(&format!(
            "exp(-{s}*t)*({a}*sin(z3) + {c}*cos(z2)), exp(-{s}*t)*({b}*sin(z1) + {a}*cos(z3)), exp(-{s}*t)*({c}*sin(z2) + {b}*cos(z1))"
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurlReport {
    /// Max `|div curl theta|` over the sample points.
    pub max_divergence: f64,
    /// `<curl a, b>` over the box for bump-weighted random polynomials.
    pub lhs: f64,
    /// `<a, curl b>`.
    pub rhs: f64,
}

impl CurlReport {
    pub fn pairing_gap(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

/// `div (curl theta) = 0` at `points` for `theta` in `z1, z2, z3`, and
/// self-adjointness of `curl` on compactly supported polynomial fields.
pub fn curl_parametrization_check<R: Rng>(
    theta: &ExprMap,
    points: &[Vec<f64>],
    bounds: &SampleBox,
    rng: &mut R,
) -> Result<CurlReport> {
    let theta = theta.rebind(&VARS[..3])?;
    if theta.n_outputs() != 3 {
        return Err(Error::DimensionMismatch("theta needs 3 components".into()));
    }
    let mut max_divergence = 0.0f64;
    for p in points {
        let s = theta.taylor_lift(&p[..3], 2)?;
        max_divergence = max_divergence.max(divergence(&curl(s.components())).value().abs());
    }
    const DEGREE: usize = 2;
    let vars = var_names("z", 3);
    let w = bump(&vars, &bounds.lo, &bounds.hi);
    let mut field = || -> Result<ExprMap> {
        let comps = (0..3)
            .map(|_| random_polynomial(&vars, DEGREE, 1.0, rng) * w.clone())
            .collect();
        ExprMap::new(&vars, comps)
    };
    let (a, b) = (field()?, field()?);
    // per-axis degree of each integrand: 2 * (DEGREE + 4)
    let rule = TensorRule::exact_for(bounds, DEGREE + 5, 2 * (DEGREE + 4))?;
    let pair = |f: &ExprMap, g: &ExprMap| {
        rule.integrate(|p| {
            let cf = curl(f.taylor_lift(p, 1)?.components());
            let gv = g.eval(p)?;
            Ok(cf.iter().zip(&gv).map(|(c, v)| c.value() * v).sum())
        })
    };
    Ok(CurlReport {
        max_divergence,
        lhs: pair(&a, &b)?,
        rhs: pair(&b, &a)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PressureReport {
    pub max_curl: f64,
    /// `lambda(target) - lambda(base)` along the first path.
    pub values: Vec<f64>,
    /// Max disagreement between the two integration paths.
    pub path_gap: f64,
}

/// `-int gamma . dl` from `from` to `to` along the coordinate axes in
/// `axes` order, at time `t`.
fn line_integral(field: &VelocityField, t: f64, from: &[f64], to: &[f64], axes: [usize; 3]) -> Result<f64> {
    let (nodes, weights) = gauss_legendre(16);
    let mut cur = from.to_vec();
    let mut total = 0.0;
    for &ax in &axes {
        let (a, b) = (cur[ax], to[ax]);
        if a != b {
            let half = 0.5 * (b - a);
            for (x, w) in nodes.iter().zip(&weights) {
                let mut p = cur.clone();
                p[ax] = a + half * (x + 1.0);
                p.push(t);
                total -= half * w * field.acceleration_at(&p)?[ax];
            }
        }
        cur[ax] = b;
    }
    Ok(total)
}

/// Pressure `lambda` with `grad lambda = -gamma` at time `t`, relative to
/// `base`, by line integration along two axis orders.
pub fn pressure_recovery(
    field: &VelocityField,
    t: f64,
    base: &[f64],
    targets: &[Vec<f64>],
    curl_tol: f64,
) -> Result<PressureReport> {
    let mut max_curl = 0.0f64;
    for p in targets.iter().chain(std::iter::once(&base.to_vec())) {
        let mut q = p[..3].to_vec();
        q.push(t);
        let gamma = acceleration(&field.series(&q, 2)?);
        for c in curl(&gamma) {
            max_curl = max_curl.max(c.value().abs());
        }
    }
    if max_curl > curl_tol {
        return Err(Error::CurlNotZero { max: max_curl });
    }
    let mut values = Vec::with_capacity(targets.len());
    let mut path_gap = 0.0f64;
    for p in targets {
        let a = line_integral(field, t, base, &p[..3], [0, 1, 2])?;
        let b = line_integral(field, t, base, &p[..3], [2, 1, 0])?;
        path_gap = path_gap.max((a - b).abs());
        values.push(a);
    }
    Ok(PressureReport {
        max_curl,
        values,
        path_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::rng;

    fn pts() -> Vec<Vec<f64>> {
        SampleBox::cube(4, -1.0, 1.0).points(10, 3)
    }

    #[test]
    fn rigid_rotation_terms() {
        let v = rigid_rotation(1.5);
        let p = [0.3, -0.4, 0.2, 0.0];
        let s = v.series(&p, 2).unwrap();
        let omega: Vec<f64> = curl(&s).iter().map(|c| 0.5 * c.value()).collect();
        assert_eq!(omega, vec![0.0, 0.0, 1.5]);
        let g = v.acceleration_at(&p).unwrap();
        assert!((g[0] + 2.25 * 0.3).abs() < 1e-15 && (g[1] - 2.25 * 0.4).abs() < 1e-15);
        assert_eq!(vortex_residual(&v, &pts(), 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn shear_has_zero_acceleration() {
        let v = VelocityField::direct("z2, 0, 0").unwrap();
        assert_eq!(v.acceleration_at(&[0.1, 0.2, 0.3, 0.0]).unwrap(), vec![0.0; 3]);
        assert_eq!(vortex_residual(&v, &pts(), 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn divergence_free_fields_satisfy_identity() {
        let mut r = rng(4);
        for i in 0..4 {
            let v = random_divergence_free(i, &mut r).unwrap();
            let res = vortex_residual(&v, &pts(), 1e-10).unwrap();
            assert!(res < 1e-8, "field {i}: {res}");
        }
    }

    #[test]
    fn abc_identity_against_finite_differences() {
        let v = VelocityField::direct("exp(-t)*sin(z3) + cos(z2), sin(z1) + cos(z3), sin(z2) + exp(-t)*cos(z1)").unwrap();
        let p = [0.2, 0.5, -0.3, 0.4];
        // 1/2 curl gamma by central differences of the exact gamma
        let h = 1e-5;
        let dg = |ax: usize, k: usize| {
            let mut a = p.to_vec();
            let mut b = p.to_vec();
            a[ax] += h;
            b[ax] -= h;
            (v.acceleration_at(&a).unwrap()[k] - v.acceleration_at(&b).unwrap()[k]) / (2.0 * h)
        };
        let fd_curl3 = 0.5 * (dg(0, 1) - dg(1, 0));
        let s = v.series(&p, 2).unwrap();
        let gamma = acceleration(&s);
        let exact = 0.5 * curl(&gamma)[2].value();
        assert!((fd_curl3 - exact).abs() < 1e-8);
    }

    #[test]
    fn compressible_counterexample_fails() {
        let v = compressible_counterexample();
        let (d, r) = vortex_residual_unchecked(&v, &pts()).unwrap();
        assert_eq!(d, 1.0);
        assert!((r - 1.0).abs() < 1e-14);
        assert!(matches!(vortex_residual(&v, &pts(), 1e-10), Err(Error::DivergenceNotZero { .. })));
    }

    #[test]
    fn curl_parametrization() {
        let b = SampleBox::cube(3, -1.0, 1.0);
        let theta = ExprMap::parse_with_vars(&["z1", "z2", "z3"], "z2*z3^2, sin(z1*z3), 0.5*(z1^2 + z2^2)").unwrap();
        let rep = curl_parametrization_check(&theta, &b.points(8, 1), &b, &mut rng(6)).unwrap();
        assert!(rep.max_divergence < 1e-12);
        assert!(rep.pairing_gap() < 1e-10 * (1.0 + rep.lhs.abs()), "{rep:?}");
        assert!(rep.lhs.abs() > 1e-6);
        let c = ExprMap::parse_with_vars(&["z1", "z2", "z3"], "1, 2, 3").unwrap();
        let s = c.taylor_lift(&[0.0; 3], 1).unwrap();
        assert!(curl(s.components()).iter().all(|x| x.value() == 0.0));
    }

    #[test]
    fn pressure_of_rigid_rotation() {
        let v = rigid_rotation(2.0);
        let targets = SampleBox::cube(3, -1.0, 1.0).points(6, 2);
        let rep = pressure_recovery(&v, 0.0, &[0.0; 3], &targets, 1e-8).unwrap();
        assert!(rep.path_gap < 1e-12);
        for (p, l) in targets.iter().zip(&rep.values) {
            let want = 0.5 * 4.0 * (p[0] * p[0] + p[1] * p[1]);
            assert!((l - want).abs() < 1e-12);
        }
        let uniform = VelocityField::direct("1, 2, 0").unwrap();
        let rep = pressure_recovery(&uniform, 0.3, &[0.0; 3], &targets, 1e-8).unwrap();
        assert!(rep.values.iter().all(|v| v.abs() < 1e-15));
        let shear = VelocityField::direct("t*z2, 0, 0").unwrap();
        assert!(matches!(
            pressure_recovery(&shear, 1.0, &[0.0; 3], &targets, 1e-8),
            Err(Error::CurlNotZero { .. })
        ));
    }
}
