//! Planar couple-stress elasticity: the Killing operator, its Riemann
//! compatibility condition, the first Spencer operator of the rigid-motion
//! system and its formal adjoint (stress and couple-stress equations).
//!
//! Index placement follows the lowered convention `xi_i = omega_ir xi^r`
//! and `xi_{i,j}` is the jet paired with `d_i xi_j`, so the Spencer
//! components are `d_i xi_j - xi_{i,j}` and `d_r xi_{1,2}`. A holonomic
//! rigid section `xi = c + Theta x` therefore carries `xi_{i,j} = Theta_ji`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::expr::{Expr, ExprMap};
use crate::linalg::null_space;
use crate::poly::{bump, random_polynomial};
use crate::quadrature::{gauss_legendre, pairwise_sum, TensorRule};
use crate::sampling::SampleBox;
use crate::taylor::{MonomialBasis, Series};

pub const PLANE_VARS: [&str; 2] = ["x1", "x2"];

/// Number of stress and couple-stress equations in dimension `n`.
pub fn adjoint_equation_count(n: usize) -> usize {
    n * (n + 1) / 2
}

fn lift(m: &ExprMap, x: &[f64], order: usize) -> Result<Vec<Series>> {
    Ok(m.taylor_lift(x, order)?.components().to_vec())
}

fn check_outputs(m: &ExprMap, inputs: usize, outputs: usize, what: &str) -> Result<()> {
    if m.n_inputs() != inputs || m.n_outputs() != outputs {
        return Err(Error::DimensionMismatch(format!(
            "{what}: expected {inputs} inputs and {outputs} outputs, got {} and {}",
            m.n_inputs(),
            m.n_outputs()
        )));
    }
    Ok(())
}

fn check_metric(metric: [[f64; 2]; 2]) -> Result<()> {
    let [[a, b], [c, d]] = metric;
    if (b - c).abs() > 1e-14 * (1.0 + b.abs()) || a <= 0.0 || a * d - b * c <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "metric {metric:?} is not symmetric positive definite"
        )));
    }
    Ok(())
}

/// A displacement `xi^k(x)` together with the rotation jet `xi_{1,2}(x)`
/// (`xi_{2,1} = -xi_{1,2}`, diagonal jets zero).
#[derive(Debug, Clone)]
pub struct Displacement {
    xi: ExprMap,
    rotation: ExprMap,
    metric: [[f64; 2]; 2],
}

impl Displacement {
    pub fn new(xi: ExprMap, rotation: ExprMap) -> Result<Self> {
        Self::with_metric(xi, rotation, [[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn with_metric(xi: ExprMap, rotation: ExprMap, metric: [[f64; 2]; 2]) -> Result<Self> {
        check_outputs(&xi, 2, 2, "displacement")?;
        check_outputs(&rotation, 2, 1, "rotation jet")?;
        check_metric(metric)?;
        Ok(Displacement {
            xi: xi.rebind(&PLANE_VARS)?,
            rotation: rotation.rebind(&PLANE_VARS)?,
            metric,
        })
    }

    /// Parses `"xi1, xi2"` and `"xi12"` over `x1, x2`.
    pub fn parse(xi: &str, rotation: &str) -> Result<Self> {
        Self::new(
            ExprMap::parse_with_vars(&PLANE_VARS, xi)?,
            ExprMap::parse_with_vars(&PLANE_VARS, rotation)?,
        )
    }

    /// Bare displacement with a vanishing rotation jet.
    pub fn from_displacement(xi: ExprMap) -> Result<Self> {
        let xi = xi.rebind(&PLANE_VARS)?;
        check_outputs(&xi, 2, 2, "displacement")?;
        let rotation = ExprMap::new(&PLANE_VARS, vec![Expr::num(0.0)])?;
        Ok(Displacement {
            xi,
            rotation,
            metric: [[1.0, 0.0], [0.0, 1.0]],
        })
    }

    pub fn metric(&self) -> [[f64; 2]; 2] {
        self.metric
    }

    pub fn displacement(&self) -> &ExprMap {
        &self.xi
    }

    pub fn rotation(&self) -> &ExprMap {
        &self.rotation
    }

    /// Multiplies every component by the bump of `bounds`.
    pub fn localized(&self, bounds: &SampleBox) -> Result<Self> {
        let b = bump(&PLANE_VARS, &bounds.lo, &bounds.hi);
        let xi = self.xi.outputs().iter().map(|e| e.clone() * b.clone()).collect();
        let rot = self.rotation.outputs()[0].clone() * b;
        Ok(Displacement {
            xi: ExprMap::new(&PLANE_VARS, xi)?,
            rotation: ExprMap::new(&PLANE_VARS, vec![rot])?,
            metric: self.metric,
        })
    }

    fn polynomial_degree(&self) -> Option<usize> {
        Some(self.xi.polynomial_degree()?.max(self.rotation.polynomial_degree()?))
    }

    /// Lowered displacement `xi_i` and rotation jet as series.
    fn lowered(&self, x: &[f64], order: usize) -> Result<([Series; 2], Series)> {
        let up = lift(&self.xi, x, order)?;
        let w = self.metric;
        let lower = |i: usize| {
            let mut s = Series::zero(2, order);
            s.axpy(w[i][0], &up[0]);
            s.axpy(w[i][1], &up[1]);
            s
        };
        let rot = lift(&self.rotation, x, order)?.remove(0);
        Ok(([lower(0), lower(1)], rot))
    }
}

/// Stress `sigma^{ij}` (no symmetry) and couple stress `mu^{r,12}`.
#[derive(Debug, Clone)]
pub struct StressState {
    sigma: ExprMap,
    couple: ExprMap,
}

/// Right-hand sides of the stress and couple-stress equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loads {
    pub f: [f64; 2],
    pub m12: f64,
}

impl StressState {
    /// `sigma` lists `sigma11, sigma12, sigma21, sigma22`; `couple` lists
    /// `mu^{1,12}, mu^{2,12}`.
    pub fn new(sigma: ExprMap, couple: ExprMap) -> Result<Self> {
        check_outputs(&sigma, 2, 4, "stress")?;
        check_outputs(&couple, 2, 2, "couple stress")?;
        Ok(StressState {
            sigma: sigma.rebind(&PLANE_VARS)?,
            couple: couple.rebind(&PLANE_VARS)?,
        })
    }

    pub fn parse(sigma: &str, couple: &str) -> Result<Self> {
        Self::new(
            ExprMap::parse_with_vars(&PLANE_VARS, sigma)?,
            ExprMap::parse_with_vars(&PLANE_VARS, couple)?,
        )
    }

    pub fn random<R: Rng>(degree: usize, rng: &mut R) -> Result<Self> {
        let sigma = (0..4).map(|_| random_polynomial(&PLANE_VARS, degree, 1.0, rng)).collect();
        let couple = (0..2).map(|_| random_polynomial(&PLANE_VARS, degree, 1.0, rng)).collect();
        Self::new(ExprMap::new(&PLANE_VARS, sigma)?, ExprMap::new(&PLANE_VARS, couple)?)
    }

    pub fn stress_map(&self) -> &ExprMap {
        &self.sigma
    }

    pub fn couple_map(&self) -> &ExprMap {
        &self.couple
    }

    pub fn sigma(&self, x: &[f64]) -> Result<[[f64; 2]; 2]> {
        let s = self.sigma.eval(x)?;
        Ok([[s[0], s[1]], [s[2], s[3]]])
    }

    pub fn couple(&self, x: &[f64]) -> Result<[f64; 2]> {
        let c = self.couple.eval(x)?;
        Ok([c[0], c[1]])
    }

    fn polynomial_degree(&self) -> Option<usize> {
        Some(self.sigma.polynomial_degree()?.max(self.couple.polynomial_degree()?))
    }
}

impl Displacement {
    pub fn random<R: Rng>(degree: usize, rng: &mut R) -> Result<Self> {
        let xi = (0..2).map(|_| random_polynomial(&PLANE_VARS, degree, 1.0, rng)).collect();
        let rot = random_polynomial(&PLANE_VARS, degree, 1.0, rng);
        Self::new(ExprMap::new(&PLANE_VARS, xi)?, ExprMap::new(&PLANE_VARS, vec![rot])?)
    }
}

/// `eps_ij = 1/2 (omega_rj d_i xi^r + omega_ir d_j xi^r)` for a constant metric.
pub fn killing(xi: &Displacement, x: &[f64]) -> Result<[[f64; 2]; 2]> {
    let s = strain_series(xi, x, 1)?;
    Ok([[s[0].value(), s[1].value()], [s[1].value(), s[2].value()]])
}

/// `(eps11, eps12, eps22)` as series of the given order at `x`.
pub fn strain_series(xi: &Displacement, x: &[f64], order: usize) -> Result<[Series; 3]> {
    let up = lift(&xi.xi, x, order + 1)?;
    let w = xi.metric;
    let grad = |r: usize, i: usize| up[r].partial(i);
    let entry = |i: usize, j: usize| {
        let mut e = Series::zero(2, order);
        for r in 0..2 {
            e.axpy(0.5 * w[r][j], &grad(r, i));
            e.axpy(0.5 * w[i][r], &grad(r, j));
        }
        e
    };
    Ok([entry(0, 0), entry(0, 1), entry(1, 1)])
}

/// `d11 eps22 + d22 eps11 - 2 d12 eps12` for series of order at least 2.
pub fn riemann_of(eps: &[Series; 3]) -> f64 {
    eps[2].derivative(&[2, 0]) + eps[0].derivative(&[0, 2]) - 2.0 * eps[1].derivative(&[1, 1])
}

/// Linearized Riemann compatibility of a strain field `"eps11, eps12, eps22"`.
pub fn riemann_residual(eps: &ExprMap, x: &[f64]) -> Result<f64> {
    check_outputs(eps, 2, 3, "strain")?;
    let s = lift(&eps.rebind(&PLANE_VARS)?, x, 2)?;
    Ok(riemann_of(&[s[0].clone(), s[1].clone(), s[2].clone()]))
}

/// Compatibility residual of `killing(xi)`.
pub fn killing_compatibility(xi: &Displacement, x: &[f64]) -> Result<f64> {
    Ok(riemann_of(&strain_series(xi, x, 2)?))
}

/// First Spencer operator of the rigid-motion system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpencerComponents {
    /// `d_i xi_j - xi_{i,j}`.
    pub strain: [[f64; 2]; 2],
    /// `d_r xi_{1,2}`.
    pub curvature: [f64; 2],
}

impl SpencerComponents {
    pub fn max_abs(&self) -> f64 {
        self.strain
            .iter()
            .flatten()
            .chain(&self.curvature)
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

pub fn spencer_elastic(xi: &Displacement, x: &[f64]) -> Result<SpencerComponents> {
    let (low, rot) = xi.lowered(x, 1)?;
    let r = rot.value();
    let jet = [[0.0, r], [-r, 0.0]];
    let mut strain = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            strain[i][j] = low[j].partial(i).value() - jet[i][j];
        }
    }
    let g = rot.gradient();
    Ok(SpencerComponents {
        strain,
        curvature: [g[0], g[1]],
    })
}

/// `f^j = d_i sigma^{ij}`, `m^{12} = d_r mu^{r,12} + sigma^{12} - sigma^{21}`.
pub fn adjoint_spencer(state: &StressState, x: &[f64]) -> Result<Loads> {
    let s = lift(&state.sigma, x, 1)?;
    let c = lift(&state.couple, x, 1)?;
    let d = |k: usize, i: usize| s[k].gradient()[i];
    Ok(Loads {
        f: [d(0, 0) + d(2, 1), d(1, 0) + d(3, 1)],
        m12: c[0].gradient()[0] + c[1].gradient()[1] + s[1].value() - s[2].value(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairingReport {
    /// `int <(sigma, mu), D xi>`.
    pub lhs: f64,
    /// `-int (f . xi + m12 xi_{1,2})`.
    pub rhs: f64,
    pub gap: f64,
}

fn pairing(
    state: &StressState,
    xi: &Displacement,
    bounds: &SampleBox,
    per_axis: usize,
    keep_antisymmetric: bool,
) -> Result<PairingReport> {
    if bounds.dim() != 2 {
        return Err(Error::DimensionMismatch("pairing needs a planar box".into()));
    }
    let xi = xi.localized(bounds)?;
    let degree = match (state.polynomial_degree(), xi.polynomial_degree()) {
        (Some(a), Some(b)) => a + b,
        _ => return Err(Error::NonPolynomial("pairing identity needs polynomial fields".into())),
    };
    let rule = TensorRule::exact_for(bounds, per_axis, degree)?;
    let lhs = rule.integrate(|x| {
        let d = spencer_elastic(&xi, x)?;
        let s = state.sigma(x)?;
        let c = state.couple(x)?;
        let mut sum = c[0] * d.curvature[0] + c[1] * d.curvature[1];
        for i in 0..2 {
            for j in 0..2 {
                sum += s[i][j] * d.strain[i][j];
            }
        }
        Ok(sum)
    })?;
    let rhs = rule.integrate(|x| {
        let mut loads = adjoint_spencer(state, x)?;
        if !keep_antisymmetric {
            let s = state.sigma(x)?;
            loads.m12 -= s[0][1] - s[1][0];
        }
        let (low, rot) = xi.lowered(x, 0)?;
        Ok(-(loads.f[0] * low[0].value() + loads.f[1] * low[1].value() + loads.m12 * rot.value()))
    })?;
    Ok(PairingReport {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}

/// Integration by parts of the Spencer pairing against a bump-localized
/// section; exact for polynomial data.
pub fn pairing_identity_check(
    state: &StressState,
    xi: &Displacement,
    bounds: &SampleBox,
    per_axis: usize,
) -> Result<PairingReport> {
    pairing(state, xi, bounds, per_axis, true)
}

/// Same pairing with `sigma^{12} - sigma^{21}` removed from the
/// couple-stress equation; nonzero gap for generic data.
pub fn pairing_without_antisymmetric_stress(
    state: &StressState,
    xi: &Displacement,
    bounds: &SampleBox,
    per_axis: usize,
) -> Result<PairingReport> {
    pairing(state, xi, bounds, per_axis, false)
}

/// Surface-minus-volume balances of the torsor `(sigma, mu)` against the
/// loads `(f, m) = ad(D)(sigma, mu)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorsorReport {
    pub surface_force: [f64; 2],
    pub volume_force: [f64; 2],
    pub surface_moment: f64,
    pub volume_moment: f64,
}

impl TorsorReport {
    pub fn force_gap(&self) -> f64 {
        (self.surface_force[0] - self.volume_force[0])
            .abs()
            .max((self.surface_force[1] - self.volume_force[1]).abs())
    }

    pub fn moment_gap(&self) -> f64 {
        (self.surface_moment - self.volume_moment).abs()
    }

    pub fn max_gap(&self) -> f64 {
        self.force_gap().max(self.moment_gap())
    }
}

pub fn torsor_equilibrium_check(state: &StressState, bounds: &SampleBox, per_axis: usize) -> Result<TorsorReport> {
    if bounds.dim() != 2 {
        return Err(Error::DimensionMismatch("torsor balance needs a planar box".into()));
    }
    let degree = state
        .polynomial_degree()
        .ok_or_else(|| Error::NonPolynomial("torsor balance needs polynomial fields".into()))?
        + 1;
    let rule = TensorRule::exact_for(bounds, per_axis, degree)?;
    let (t, w) = gauss_legendre(per_axis);

    // integrand (force1, force2, moment) of the outward flux at x with normal n
    let flux = |x: &[f64], n: [f64; 2]| -> Result<[f64; 3]> {
        let s = state.sigma(x)?;
        let c = state.couple(x)?;
        let mut out = [0.0; 3];
        for r in 0..2 {
            out[0] += s[r][0] * n[r];
            out[1] += s[r][1] * n[r];
            out[2] += (c[r] + x[0] * s[r][1] - x[1] * s[r][0]) * n[r];
        }
        Ok(out)
    };
    let mut surface = [vec![], vec![], vec![]];
    for axis in 0..2 {
        let other = 1 - axis;
        let half = 0.5 * (bounds.hi[other] - bounds.lo[other]);
        for (side, sign) in [(bounds.lo[axis], -1.0), (bounds.hi[axis], 1.0)] {
            let mut n = [0.0; 2];
            n[axis] = sign;
            for (ti, wi) in t.iter().zip(&w) {
                let mut x = [0.0; 2];
                x[axis] = side;
                x[other] = bounds.lo[other] + half * (ti + 1.0);
                let v = flux(&x, n)?;
                for k in 0..3 {
                    surface[k].push(half * wi * v[k]);
                }
            }
        }
    }
    let volume = |k: usize| {
        rule.integrate(|x| {
            let l = adjoint_spencer(state, x)?;
            Ok(match k {
                0 => l.f[0],
                1 => l.f[1],
                _ => l.m12 + x[0] * l.f[1] - x[1] * l.f[0],
            })
        })
    };
    Ok(TorsorReport {
        surface_force: [pairwise_sum(&surface[0]), pairwise_sum(&surface[1])],
        volume_force: [volume(0)?, volume(1)?],
        surface_moment: pairwise_sum(&surface[2]),
        volume_moment: volume(2)?,
    })
}

/// Basis of the kernel of `spencer_elastic` (identity metric) among
/// polynomial sections of the given degree, as coefficient vectors of
/// `(xi1, xi2, xi12)` in graded-lex order.
pub fn rigid_kernel(degree: usize) -> Vec<Vec<f64>> {
    let basis = MonomialBasis::get(2, degree);
    let n = basis.len();
    let cols = 3 * n;
    // rows: 6 components times every monomial of degree <= degree
    let mut a = vec![vec![0.0; cols]; 6 * n];
    let mut put = |row_block: usize, target: &[u8], col: usize, v: f64| {
        if let Some(i) = basis.index_of(target) {
            a[row_block * n + i][col] += v;
        }
    };
    for (m, mu) in basis.exponents().iter().enumerate() {
        for i in 0..2 {
            if mu[i] == 0 {
                continue;
            }
            let mut lower = mu.to_vec();
            lower[i] -= 1;
            let c = mu[i] as f64;
            // d_i xi_j enters strain block (i, j)
            for j in 0..2 {
                put(2 * i + j, &lower, j * n + m, c);
            }
            // d_i xi12 enters curvature block i
            put(4 + i, &lower, 2 * n + m, c);
        }
        // -xi_{1,2} in block (1,2), +xi_{1,2} in block (2,1)
        put(1, mu, 2 * n + m, -1.0);
        put(2, mu, 2 * n + m, 1.0);
    }
    null_space(&a, cols, 1e-10)
}

/// One-dimensional affine case: `f = d sigma`, `m = d mu + sigma`.
pub fn affine_1d_adjoint(sigma: &ExprMap, mu: &ExprMap, x: f64) -> Result<(f64, f64)> {
    check_outputs(sigma, 1, 1, "stress")?;
    check_outputs(mu, 1, 1, "couple stress")?;
    let s = lift(sigma, &[x], 1)?.remove(0);
    let m = lift(mu, &[x], 1)?.remove(0);
    Ok((s.gradient()[0], m.gradient()[0] + s.value()))
}

/// Spencer components `x d lambda1 + d lambda2` and `d lambda1` of the
/// section `xi = x lambda1 + lambda2`, `xi_x = lambda1`.
pub fn affine_1d_spencer(lambda1: &ExprMap, lambda2: &ExprMap, x: f64) -> Result<(f64, f64)> {
    let l1 = lift(lambda1, &[x], 1)?.remove(0);
    let l2 = lift(lambda2, &[x], 1)?.remove(0);
    let d1 = l1.gradient()[0];
    Ok((x * d1 + l2.gradient()[0], d1))
}

/// `int (sigma s1 + mu s2)` against `-int (f xi + m xi_x)` on `[lo, hi]`
/// with both gauge parameters multiplied by the interval bump.
pub fn affine_1d_pairing_check(
    sigma: &ExprMap,
    mu: &ExprMap,
    lambda1: &ExprMap,
    lambda2: &ExprMap,
    lo: f64,
    hi: f64,
    per_axis: usize,
) -> Result<PairingReport> {
    let var = sigma.vars()[0].clone();
    let b = bump(&[var.as_str()], &[lo], &[hi]);
    let localize = |m: &ExprMap| -> Result<ExprMap> {
        check_outputs(m, 1, 1, "gauge parameter")?;
        let m = m.renamed(&[var.as_str()])?;
        ExprMap::new(&[var.as_str()], vec![m.outputs()[0].clone() * b.clone()])
    };
    let l1 = localize(lambda1)?;
    let l2 = localize(lambda2)?;
    let mu = mu.renamed(&[var.as_str()])?;
    let degree = [sigma, &mu, &l1, &l2]
        .iter()
        .map(|m| m.polynomial_degree())
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::NonPolynomial("pairing identity needs polynomial fields".into()))?;
    let total = degree[0].max(degree[1]) + degree[2].max(degree[3]) + 1;
    let rule = TensorRule::exact_for(&SampleBox::new(vec![lo], vec![hi])?, per_axis, total)?;
    let lhs = rule.integrate(|p| {
        let (s1, s2) = affine_1d_spencer(&l1, &l2, p[0])?;
        Ok(sigma.eval(p)?[0] * s1 + mu.eval(p)?[0] * s2)
    })?;
    let rhs = rule.integrate(|p| {
        let (f, m) = affine_1d_adjoint(sigma, &mu, p[0])?;
        let a = l1.eval(p)?[0];
        let xi = p[0] * a + l2.eval(p)?[0];
        Ok(-(f * xi + m * a))
    })?;
    Ok(PairingReport {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::rng;

    const PTS: [[f64; 2]; 3] = [[0.3, -0.7], [1.2, 0.4], [-0.5, 0.9]];

    fn plane(text: &str) -> ExprMap {
        ExprMap::parse_with_vars(&PLANE_VARS, text).unwrap()
    }

    #[test]
    fn killing_examples() {
        let rot = Displacement::from_displacement(plane("x2, -x1")).unwrap();
        let trans = Displacement::from_displacement(plane("3, -2")).unwrap();
        let sq = Displacement::from_displacement(plane("x1^2, 0")).unwrap();
        for x in PTS {
            assert_eq!(killing(&rot, &x).unwrap(), [[0.0; 2]; 2]);
            assert_eq!(killing(&trans, &x).unwrap(), [[0.0; 2]; 2]);
            let e = killing(&sq, &x).unwrap();
            assert!((e[0][0] - 2.0 * x[0]).abs() < 1e-14);
            assert_eq!((e[0][1], e[1][1]), (0.0, 0.0));
        }
    }

    #[test]
    fn killing_respects_metric() {
        let w = [[2.0, 0.5], [0.5, 1.0]];
        let xi = Displacement::with_metric(plane("x1*x2, x1^2 - x2"), plane("0"), w).unwrap();
        let x = [0.4, -1.1];
        let e = killing(&xi, &x).unwrap();
        // grad[r][i] = d_i xi^r
        let grad = [[x[1], x[0]], [2.0 * x[0], -1.0]];
        for i in 0..2 {
            for j in 0..2 {
                let mut want = 0.0;
                for r in 0..2 {
                    want += 0.5 * (w[r][j] * grad[r][i] + w[i][r] * grad[r][j]);
                }
                assert!((e[i][j] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn riemann_examples() {
        let eps = plane("x2^2, 0, 0");
        let c = plane("1, 2, 3");
        for x in PTS {
            assert!((riemann_residual(&eps, &x).unwrap() - 2.0).abs() < 1e-13);
            assert_eq!(riemann_residual(&c, &x).unwrap(), 0.0);
        }
    }

    #[test]
    fn killing_then_riemann_vanishes() {
        let mut r = rng(5);
        for _ in 0..10 {
            let xi = Displacement::random(4, &mut r).unwrap();
            for x in PTS {
                assert!(killing_compatibility(&xi, &x).unwrap().abs() < 1e-9);
            }
        }
        let xi = Displacement::from_displacement(plane("sin(x1*x2), exp(x1)*cos(x2)")).unwrap();
        assert!(killing_compatibility(&xi, &[0.3, 0.2]).unwrap().abs() < 1e-9);
    }

    #[test]
    fn spencer_examples() {
        // xi = c + Theta x with Theta = [[0, t], [-t, 0]] has xi_{1,2} = Theta_21 = -t
        let rigid = Displacement::parse("1 + 0.5*x2, -2 - 0.5*x1", "-0.5").unwrap();
        let shear = Displacement::parse("x2, 0", "0").unwrap();
        let pure = Displacement::parse("0, 0", "x1").unwrap();
        for x in PTS {
            assert!(spencer_elastic(&rigid, &x).unwrap().max_abs() < 1e-15);
            let s = spencer_elastic(&shear, &x).unwrap();
            assert_eq!(s.strain, [[0.0, 0.0], [1.0, 0.0]]);
            assert_eq!(s.curvature, [0.0, 0.0]);
            let p = spencer_elastic(&pure, &x).unwrap();
            assert_eq!(p.strain, [[0.0, -x[0]], [x[0], 0.0]]);
            assert_eq!(p.curvature, [1.0, 0.0]);
        }
    }

    #[test]
    fn adjoint_examples() {
        let sym = StressState::parse("2, 1, 1, -3", "0, 0").unwrap();
        let skew = StressState::parse("0, 1, -1, 0", "0, 0").unwrap();
        let couple = StressState::parse("0, 0, 0, 0", "x1, 0").unwrap();
        for x in PTS {
            assert_eq!(adjoint_spencer(&sym, &x).unwrap(), Loads { f: [0.0, 0.0], m12: 0.0 });
            assert_eq!(adjoint_spencer(&skew, &x).unwrap(), Loads { f: [0.0, 0.0], m12: 2.0 });
            assert_eq!(adjoint_spencer(&couple, &x).unwrap(), Loads { f: [0.0, 0.0], m12: 1.0 });
        }
        assert_eq!(adjoint_equation_count(2), 3);
    }

    #[test]
    fn zero_couple_stress_forces_symmetry() {
        let mut r = rng(8);
        for _ in 0..5 {
            let mut st = StressState::random(3, &mut r).unwrap();
            st.couple = plane("0, 0");
            for x in PTS {
                let s = st.sigma(&x).unwrap();
                assert_eq!(adjoint_spencer(&st, &x).unwrap().m12, s[0][1] - s[1][0]);
            }
        }
    }

    #[test]
    fn pairing_identity_holds() {
        let bounds = SampleBox::new(vec![-1.0, 0.0], vec![0.5, 1.5]).unwrap();
        let mut r = rng(13);
        for _ in 0..5 {
            let st = StressState::random(4, &mut r).unwrap();
            let xi = Displacement::random(4, &mut r).unwrap();
            let rep = pairing_identity_check(&st, &xi, &bounds, 9).unwrap();
            assert!(rep.gap < 1e-10, "{rep:?}");
            assert!(rep.lhs.abs() > 1e-6);
            let bad = pairing_without_antisymmetric_stress(&st, &xi, &bounds, 9).unwrap();
            assert!(bad.gap > 1e-6, "{bad:?}");
        }
        let zero = StressState::parse("0, 0, 0, 0", "0, 0").unwrap();
        let xi = Displacement::random(2, &mut r).unwrap();
        let rep = pairing_identity_check(&zero, &xi, &bounds, 6).unwrap();
        assert_eq!((rep.lhs, rep.rhs), (0.0, 0.0));
        assert!(matches!(
            pairing_identity_check(&zero, &xi, &bounds, 2),
            Err(Error::QuadratureOrderTooLow { .. })
        ));
    }

    #[test]
    fn torsor_balances() {
        let bounds = SampleBox::new(vec![-1.0, -0.5], vec![2.0, 1.0]).unwrap();
        let lin = StressState::parse("x1, 0, 0, x2", "0, 0").unwrap();
        let rep = torsor_equilibrium_check(&lin, &bounds, 3).unwrap();
        assert!((rep.volume_force[0] - bounds.volume()).abs() < 1e-12);
        assert!((rep.volume_force[1] - bounds.volume()).abs() < 1e-12);
        assert!(rep.max_gap() < 1e-10, "{rep:?}");

        // sigma = curl-type Airy stress, divergence free and symmetric
        let airy = StressState::parse("2*x1, -2*x2, -2*x2, 0", "0, 0").unwrap();
        let rep = torsor_equilibrium_check(&airy, &bounds, 3).unwrap();
        assert!(rep.surface_force[0].abs() < 1e-12 && rep.surface_force[1].abs() < 1e-12);
        assert!(rep.surface_moment.abs() < 1e-12);

        let mut r = rng(21);
        for _ in 0..5 {
            let st = StressState::random(4, &mut r).unwrap();
            assert!(torsor_equilibrium_check(&st, &bounds, 4).unwrap().max_gap() < 1e-10);
        }
    }

    #[test]
    fn rigid_kernel_is_three_dimensional() {
        for d in 1..=4 {
            let k = rigid_kernel(d);
            assert_eq!(k.len(), 3, "degree {d}");
        }
        assert_eq!(rigid_kernel(0).len(), 2);
    }

    #[test]
    fn affine_1d_examples() {
        let p = |s: &str| ExprMap::parse_with_vars(&["x"], s).unwrap();
        for x in [-0.4, 0.0, 1.3] {
            assert_eq!(affine_1d_adjoint(&p("2.5"), &p("0"), x).unwrap(), (0.0, 2.5));
            assert_eq!(affine_1d_adjoint(&p("x"), &p("0"), x).unwrap(), (1.0, x));
            let (f, m) = affine_1d_adjoint(&p("0"), &p("x^2"), x).unwrap();
            assert_eq!(f, 0.0);
            assert!((m - 2.0 * x).abs() < 1e-15);
        }
        let mut r = rng(3);
        for _ in 0..5 {
            let polys: Vec<ExprMap> = (0..4)
                .map(|_| ExprMap::new(&["x"], vec![random_polynomial(&["x"], 4, 1.0, &mut r)]).unwrap())
                .collect();
            let rep = affine_1d_pairing_check(&polys[0], &polys[1], &polys[2], &polys[3], -0.5, 1.0, 8).unwrap();
            assert!(rep.gap < 1e-10, "{rep:?}");
        }
    }
}
