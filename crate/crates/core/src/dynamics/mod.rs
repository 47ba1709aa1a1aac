//! Parameter-dependent families `z = f(y, x)` of transformations of `Y`:
//! generalized speed, its compatibility conditions, variations, density
//! transport and Euler-Lagrange residuals.
//!
//! Variable names: `f` and `variation` are written in `y1..ym, x1..xn`
//! (plus `eps` for the variation), an explicit inverse `g` in
//! `z1..zm, x1..xn`. Everything is differentiated exactly through Taylor
//! series of the map `(y, x) -> (f(y, x), x)` and its inverse jet.

pub mod swell;
pub mod vortex;

use rand::Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expr::ExprMap;
use crate::jet::Jet;
use crate::linalg::{self, determinant_generic};
use crate::poly::var_names;
use crate::sampling::SampleBox;
use crate::taylor::{Dual, Scalar, Series};

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 50;

#[derive(Debug, Clone)]
pub struct MotionFamily {
    pub label: String,
    m: usize,
    n: usize,
    f: ExprMap,
    g: Option<ExprMap>,
    variation: Option<ExprMap>,
    /// Sample box over `(z, x)`.
    bounds: SampleBox,
}

#[derive(Deserialize)]
struct FamilyDoc {
    #[serde(default)]
    label: Option<String>,
    m: usize,
    n: usize,
    f: String,
    #[serde(default)]
    g: Option<String>,
    #[serde(default)]
    variation: Option<String>,
    #[serde(rename = "box")]
    bounds: SampleBox,
}

/// `v` and `u` as `m x n` matrices (`[k][i]`), with `Delta` and `rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct Speed {
    pub v: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub delta: f64,
    pub rho: f64,
}

fn names_then(prefix: &str, m: usize, n: usize, extra: &[&str]) -> Vec<String> {
    let mut v = var_names(prefix, m);
    v.extend(var_names("x", n));
    v.extend(extra.iter().map(|s| s.to_string()));
    v
}

/// `outer o inner` with `inner` truncated to the order of `outer`.
fn pull(outer: &Series, inner: &[Series]) -> Series {
    let t: Vec<Series> = inner.iter().map(|s| s.truncate(outer.order())).collect();
    outer.compose(&t)
}

/// Vector-field bracket `[a, b]^k = a^l d_l b^k - b^l d_l a^k` over the
/// first `a.len()` variables, as series one order lower.
fn field_bracket(a: &[Series], b: &[Series]) -> Vec<Series> {
    let m = a.len();
    (0..m)
        .map(|k| {
            let mut acc = &(&a[0] * &b[k].partial(0)) - &(&b[0] * &a[k].partial(0));
            for l in 1..m {
                acc = &acc + &(&(&a[l] * &b[k].partial(l)) - &(&b[l] * &a[k].partial(l)));
            }
            acc
        })
        .collect()
}

/// Series of a family around one source point.
struct Local {
    m: usize,
    n: usize,
    /// `(f, x[, eps])` over `(y, x[, eps])`.
    forward: Vec<Series>,
    /// Inverse of `forward` over `(z, x[, eps])`.
    inverse: Vec<Series>,
}

impl Local {
    /// `F^k_l = d f^k / d y^l` over source variables.
    fn jacobian(&self) -> Vec<Vec<Series>> {
        (0..self.m)
            .map(|k| (0..self.m).map(|l| self.forward[k].partial(l)).collect())
            .collect()
    }

    fn to_target(&self, s: &Series) -> Series {
        pull(s, &self.inverse)
    }

    /// `v^k_i` over target variables, index `[k][i]`.
    fn v(&self) -> Vec<Vec<Series>> {
        (0..self.m)
            .map(|k| (0..self.n).map(|i| self.to_target(&self.forward[k].partial(self.m + i))).collect())
            .collect()
    }

    /// `u^k_i` over source variables: `F u_i = d f / d x^i`.
    fn u(&self) -> Result<Vec<Vec<Series>>> {
        let jac = self.jacobian();
        let mut out = vec![Vec::with_capacity(self.n); self.m];
        for i in 0..self.n {
            let rhs: Vec<Series> = (0..self.m).map(|k| self.forward[k].partial(self.m + i)).collect();
            for (k, s) in linalg::solve(&jac, &rhs)?.into_iter().enumerate() {
                out[k].push(s);
            }
        }
        Ok(out)
    }

    fn delta_source(&self) -> Series {
        determinant_generic(&self.jacobian())
    }

    fn rho(&self) -> Result<Series> {
        self.to_target(&self.delta_source()).recip()
    }

    /// `eta^k = (d f^k / d eps) o g` over target variables.
    fn eta(&self) -> Vec<Series> {
        let e = self.m + self.n;
        (0..self.m).map(|k| self.to_target(&self.forward[k].partial(e))).collect()
    }

    /// `xi = F^{-1} d f / d eps` over source variables.
    fn xi(&self) -> Result<Vec<Series>> {
        let e = self.m + self.n;
        let rhs: Vec<Series> = (0..self.m).map(|k| self.forward[k].partial(e)).collect();
        linalg::solve(&self.jacobian(), &rhs)
    }
}

impl MotionFamily {
    pub fn new(
        label: &str,
        m: usize,
        n: usize,
        f: &str,
        g: Option<&str>,
        variation: Option<&str>,
        bounds: SampleBox,
    ) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidParameter("families need m >= 1 and n >= 1".into()));
        }
        if bounds.dim() != m + n {
            return Err(Error::DimensionMismatch(format!(
                "sample box of dimension {} for (z, x) in R^{}",
                bounds.dim(),
                m + n
            )));
        }
        let check = |map: &ExprMap, what: &str| -> Result<()> {
            if map.n_outputs() != m {
                return Err(Error::DimensionMismatch(format!("{what} has {} components, expected {m}", map.n_outputs())));
            }
            Ok(())
        };
        let f = ExprMap::parse_with_vars(&names_then("y", m, n, &[]), f)?;
        check(&f, "f")?;
        let g = match g {
            Some(t) => {
                let g = ExprMap::parse_with_vars(&names_then("z", m, n, &[]), t)?;
                check(&g, "g")?;
                Some(g)
            }
            None => None,
        };
        let variation = match variation {
            Some(t) => {
                let v = ExprMap::parse_with_vars(&names_then("y", m, n, &["eps"]), t)?;
                check(&v, "variation")?;
                Some(v)
            }
            None => None,
        };
        let fam = MotionFamily {
            label: label.to_string(),
            m,
            n,
            f,
            g,
            variation,
            bounds,
        };
        if fam.g.is_some() {
            let gap = fam.inverse_gap(16, 0)?;
            if gap > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "explicit inverse misses f(g(z, x), x) = z by {gap:e}"
                )));
            }
        }
        Ok(fam)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let d: FamilyDoc = serde_json::from_str(text)?;
        MotionFamily::new(
            d.label.as_deref().unwrap_or("family"),
            d.m,
            d.n,
            &d.f,
            d.g.as_deref(),
            d.variation.as_deref(),
            d.bounds,
        )
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bounds(&self) -> &SampleBox {
        &self.bounds
    }

    pub fn has_variation(&self) -> bool {
        self.variation.is_some()
    }

    /// The family with `f` and `g` exchanged (requires an explicit `g`).
    pub fn inverse_family(&self) -> Result<MotionFamily> {
        let g = self
            .g
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("swapping f and g needs an explicit inverse".into()))?;
        let fy = g.renamed(&names_then("y", self.m, self.n, &[]))?;
        let gz = self.f.renamed(&names_then("z", self.m, self.n, &[]))?;
        Ok(MotionFamily {
            label: format!("{}^-1", self.label),
            m: self.m,
            n: self.n,
            f: fy,
            g: Some(gz),
            variation: None,
            bounds: self.bounds.clone(),
        })
    }

    fn f_values(&self, y: &[f64], x: &[f64], eps: Option<f64>) -> Result<Vec<f64>> {
        let mut p = y.to_vec();
        p.extend_from_slice(x);
        match eps {
            None => self.f.eval(&p),
            Some(e) => {
                p.push(e);
                self.variation_map()?.eval(&p)
            }
        }
    }

    fn variation_map(&self) -> Result<&ExprMap> {
        self.variation
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter(format!("family `{}` has no variation", self.label)))
    }

    /// `f(., x)` and `d f / d y` at `y`.
    fn f_with_jacobian(&self, y: &[f64], x: &[f64], eps: Option<f64>) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let s = self.forward_series(y, x, eps, false, 1)?;
        let vals = s[..self.m].iter().map(Series::value).collect();
        let jac = s[..self.m]
            .iter()
            .map(|c| c.gradient()[..self.m].to_vec())
            .collect();
        Ok((vals, jac))
    }

    /// `(f, x[, eps])` as series over `(y, x[, eps])` at order `order`; with
    /// `eps_var` the variation parameter is a variable expanded at `eps = 0`.
    fn forward_series(&self, y: &[f64], x: &[f64], eps: Option<f64>, eps_var: bool, order: usize) -> Result<Vec<Series>> {
        let (m, n) = (self.m, self.n);
        let mut base = y.to_vec();
        base.extend_from_slice(x);
        let mut out: Vec<Series> = if eps_var {
            base.push(0.0);
            self.variation_map()?.taylor_lift(&base, order)?.components().to_vec()
        } else {
            match eps {
                None => self.f.taylor_lift(&base, order)?.components().to_vec(),
                Some(e) => {
                    let nv = m + n;
                    let mut inputs: Vec<Series> = (0..nv).map(|i| Series::variable(nv, order, i, base[i])).collect();
                    inputs.push(Series::constant(nv, order, e));
                    self.variation_map()?.eval_generic(&inputs, &Series::zero(nv, order))?
                }
            }
        };
        let nv = base.len();
        for i in m..nv {
            out.push(Series::variable(nv, order, i, base[i]));
        }
        Ok(out)
    }

    /// Newton solve of `f(y, x) = z` from `seed`.
    pub fn newton(&self, z: &[f64], x: &[f64], seed: &[f64], eps: Option<f64>) -> Result<Vec<f64>> {
        let mut y = seed.to_vec();
        for _ in 0..NEWTON_MAX_ITER {
            let (fy, jac) = self.f_with_jacobian(&y, x, eps)?;
            let r: Vec<f64> = fy.iter().zip(z).map(|(a, b)| a - b).collect();
            let scale = 1.0 + z.iter().fold(0.0f64, |s, v| s.max(v.abs()));
            if r.iter().all(|v| v.abs() <= NEWTON_TOL * scale) {
                return Ok(y);
            }
            let step = linalg::solve(&jac, &r).map_err(|e| Error::NewtonFailed(format!("at z = {z:?}: {e}")))?;
            for (yi, s) in y.iter_mut().zip(step) {
                *yi -= s;
            }
            if y.iter().any(|v| !v.is_finite()) {
                break;
            }
        }
        Err(Error::NewtonFailed(format!(
            "no convergence for z = {z:?}, x = {x:?} within {NEWTON_MAX_ITER} iterations"
        )))
    }

    /// Source point `y = g(z, x)`: explicit inverse when available,
    /// otherwise Newton from `seed`.
    pub fn source_point(&self, z: &[f64], x: &[f64], seed: Option<&[f64]>) -> Result<Vec<f64>> {
        if let Some(g) = &self.g {
            let mut p = z.to_vec();
            p.extend_from_slice(x);
            return g.eval(&p);
        }
        let fallback: Vec<f64> = self.bounds.center()[..self.m].to_vec();
        let seed = seed.unwrap_or(&fallback);
        self.newton(z, x, seed, None).or_else(|_| self.newton(z, x, z, None))
    }

    /// `count` seeded samples `(z, x)` from the box.
    pub fn samples(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        self.bounds.points(count, seed)
    }

    /// Source points for target samples, each Newton solve seeded from the
    /// nearest already solved sample.
    pub fn sources(&self, samples: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(samples.len());
        for (i, s) in samples.iter().enumerate() {
            let (z, x) = s.split_at(self.m);
            let seed = (0..i)
                .min_by(|&a, &b| dist2(&samples[a], s).total_cmp(&dist2(&samples[b], s)))
                .map(|j| out[j].as_slice());
            out.push(self.source_point(z, x, seed)?);
        }
        Ok(out)
    }

    /// Max `|f(g(z, x), x) - z|` for the explicit inverse.
    pub fn inverse_gap(&self, count: usize, seed: u64) -> Result<f64> {
        let mut worst = 0.0f64;
        for s in self.samples(count, seed) {
            let (z, x) = s.split_at(self.m);
            let y = self.source_point(z, x, None)?;
            for (a, b) in self.f_values(&y, x, None)?.iter().zip(z) {
                worst = worst.max((a - b).abs());
            }
        }
        Ok(worst)
    }

    fn local(&self, y: &[f64], x: &[f64], eps: Option<f64>, eps_var: bool, order: usize) -> Result<Local> {
        let forward = self.forward_series(y, x, eps, eps_var, order)?;
        let mut base = y.to_vec();
        base.extend_from_slice(x);
        if eps_var {
            base.push(0.0);
        }
        let inverse = match (&self.g, eps, eps_var) {
            (Some(g), None, false) => {
                let mut p: Vec<f64> = forward.iter().map(Series::value).collect();
                let mut comps = g.taylor_lift(&p, order)?.components().to_vec();
                let nv = p.len();
                for i in self.m..nv {
                    comps.push(Series::variable(nv, order, i, p[i]));
                }
                p.clear();
                comps
            }
            _ => Jet::from_series(base, forward.clone())?.invert()?.components().to_vec(),
        };
        Ok(Local {
            m: self.m,
            n: self.n,
            forward,
            inverse,
        })
    }

    /// `(v, u, Delta, rho)` at a target sample `(z, x)`.
    pub fn generalized_speed(&self, z: &[f64], x: &[f64]) -> Result<Speed> {
        let y = self.source_point(z, x, None)?;
        self.speed_at_source(&y, x)
    }

    fn speed_at_source(&self, y: &[f64], x: &[f64]) -> Result<Speed> {
        let loc = self.local(y, x, None, false, 1)?;
        let v = loc.v().iter().map(|r| r.iter().map(Series::value).collect()).collect();
        let u = loc.u()?.iter().map(|r| r.iter().map(Series::value).collect()).collect();
        let delta = loc.delta_source().value();
        if delta <= 0.0 {
            return Err(Error::SingularJet(format!("Jacobian determinant {delta:e} is not positive")));
        }
        Ok(Speed {
            v,
            u,
            delta,
            rho: 1.0 / delta,
        })
    }

    fn per_sample<T, F>(&self, samples: &[Vec<f64>], work: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&[f64], &[f64]) -> Result<T> + Sync,
    {
        let sources = self.sources(samples)?;
        sources
            .par_iter()
            .zip(samples.par_iter())
            .map(|(y, s)| work(y, &s[self.m..]))
            .collect()
    }

    /// Max over samples of `|d_i v_j - d_j v_i + [v_i, v_j]|` and
    /// `|d_i u_j - d_j u_i - [u_i, u_j]|`; `None` when `n = 1`.
    pub fn compatibility_residual(&self, samples: &[Vec<f64>]) -> Result<Option<(f64, f64)>> {
        if self.n < 2 {
            return Ok(None);
        }
        let per = self.per_sample(samples, |y, x| {
            let loc = self.local(y, x, None, false, 2)?;
            Ok(compatibility_at(&loc.v(), &loc.u()?, self.m, self.n))
        })?;
        Ok(Some(per.iter().fold((0.0f64, 0.0f64), |(a, b), (p, q)| (a.max(*p), b.max(*q)))))
    }

    /// Max over samples of `|d rho / d x^i + d (rho v^k_i) / d z^k|`.
    pub fn mass_conservation_residual(&self, samples: &[Vec<f64>]) -> Result<f64> {
        let per = self.per_sample(samples, |y, x| {
            let loc = self.local(y, x, None, false, 2)?;
            mass_residual(&loc.rho()?, &loc.v(), self.m, self.n)
        })?;
        Ok(per.into_iter().fold(0.0, f64::max))
    }

    /// Max over samples of `|delta rho + d (rho eta^k) / d z^k|` with both
    /// sides exact in `eps`.
    pub fn density_variation_residual(&self, samples: &[Vec<f64>]) -> Result<f64> {
        self.variation_map()?;
        let e = self.m + self.n;
        let per = self.per_sample(samples, |y, x| {
            let loc = self.local(y, x, None, true, 2)?;
            let rho = loc.rho()?;
            let eta = loc.eta();
            let mut div = 0.0;
            for k in 0..self.m {
                div += (&rho * &eta[k]).partial(k).value();
            }
            Ok((rho.partial(e).value() + div).abs())
        })?;
        Ok(per.into_iter().fold(0.0, f64::max))
    }

    /// Theorem 3 at the given samples and finite-difference steps.
    pub fn theorem3_check(&self, samples: &[Vec<f64>], steps: &[f64]) -> Result<Theorem3Report> {
        self.variation_map()?;
        let e = self.m + self.n;
        let per = self.per_sample(samples, |y, x| {
            let loc = self.local(y, x, None, true, 2)?;
            let v = loc.v();
            let eta = loc.eta();
            let xi = loc.xi()?;
            let jac = loc.jacobian();
            let z: Vec<f64> = loc.forward[..self.m].iter().map(Series::value).collect();
            let v0: Vec<Vec<f64>> = v.iter().map(|r| r.iter().map(Series::value).collect()).collect();
            let mut exact = vec![vec![0.0; self.n]; self.m];
            let mut bracket_form = exact.clone();
            let mut pulled_form = exact.clone();
            for i in 0..self.n {
                let vi: Vec<Series> = (0..self.m).map(|k| v[k][i].clone()).collect();
                let br = field_bracket(&vi, &eta);
                for k in 0..self.m {
                    exact[k][i] = v[k][i].partial(e).value();
                    bracket_form[k][i] = eta[k].partial(self.m + i).value() + br[k].value();
                    pulled_form[k][i] = (0..self.m)
                        .map(|l| jac[k][l].value() * xi[l].partial(self.m + i).value())
                        .sum();
                }
            }
            let mut fd = Vec::with_capacity(steps.len());
            for &h in steps {
                let ye = self.newton(&z, x, y, Some(h))?;
                let le = self.local(&ye, x, Some(h), false, 1)?;
                let ve = le.v();
                let mut gap = 0.0f64;
                for k in 0..self.m {
                    for i in 0..self.n {
                        let d = (ve[k][i].value() - v0[k][i]) / h;
                        gap = gap.max((d - bracket_form[k][i]).abs());
                    }
                }
                fd.push(gap);
            }
            Ok((max_gap(&exact, &bracket_form), max_gap(&bracket_form, &pulled_form), fd))
        })?;
        let mut rep = Theorem3Report {
            steps: steps.to_vec(),
            exact_gap: 0.0,
            formula_gap: 0.0,
            fd_gaps: vec![0.0; steps.len()],
        };
        for (a, b, fd) in per {
            rep.exact_gap = rep.exact_gap.max(a);
            rep.formula_gap = rep.formula_gap.max(b);
            for (r, g) in rep.fd_gaps.iter_mut().zip(fd) {
                *r = r.max(g);
            }
        }
        Ok(rep)
    }

    /// Euler-Lagrange residuals for the action density `rho w(v)` where `w`
    /// is written in `v{k}_{i}` (component `k`, parameter `i`).
    pub fn el_residual<R: Rng>(&self, w: &ExprMap, samples: &[Vec<f64>], rng: &mut R) -> Result<ElReport> {
        let names: Vec<String> = (1..=self.m)
            .flat_map(|k| (1..=self.n).map(move |i| format!("v{k}_{i}")))
            .collect();
        let w = w.rebind(&names)?;
        let probes: Vec<Vec<f64>> = samples
            .iter()
            .map(|_| (0..self.m).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let (m, n) = (self.m, self.n);
        let sources = self.sources(samples)?;
        let per: Vec<(Vec<f64>, Vec<f64>, f64)> = sources
            .par_iter()
            .zip(samples.par_iter())
            .zip(probes.par_iter())
            .map(|((y, s), eta)| {
                let x = &s[m..];
                let loc = self.local(y, x, None, false, 2)?;
                let v = loc.v();
                let rho = loc.rho()?;
                let nv = m + n;
                let slots = m * n;
                let inputs: Vec<Dual<Series>> = (0..slots).map(|c| Dual::seed(v[c / n][c % n].clone(), c, slots)).collect();
                let out = w.eval_generic(&inputs, &Dual::constant(Series::zero(nv, 1), slots))?;
                // cal_v[k][i] = dw / dv^k_i
                let cal_v: Vec<Vec<Series>> = (0..m)
                    .map(|k| (0..n).map(|i| out[0].tangent[k * n + i].clone()).collect())
                    .collect();
                let mut res_z = vec![0.0; m];
                for k in 0..m {
                    let mut acc = 0.0;
                    for i in 0..n {
                        acc += cal_v[k][i].partial(m + i).value();
                        for l in 0..m {
                            acc += v[l][i].value() * cal_v[k][i].partial(l).value();
                        }
                    }
                    res_z[k] = rho.value() * acc;
                }
                let jac = loc.jacobian();
                let mut div_u = vec![0.0; m];
                for k in 0..m {
                    for i in 0..n {
                        div_u[k] += pull(&cal_v[k][i], &loc.forward).partial(m + i).value();
                    }
                }
                let res_y: Vec<f64> = (0..m)
                    .map(|l| (0..m).map(|k| div_u[k] * jac[k][l].value()).sum())
                    .collect();
                let f0: Vec<Vec<f64>> = jac.iter().map(|r| r.iter().map(Series::value).collect()).collect();
                let xi = linalg::solve(&f0, eta)?;
                let delta = 1.0 / rho.value();
                let lhs: f64 = res_y.iter().zip(&xi).map(|(a, b)| a * b).sum();
                let rhs: f64 = delta * res_z.iter().zip(eta).map(|(a, b)| a * b).sum::<f64>();
                Ok((res_z, res_y, (lhs - rhs).abs()))
            })
            .collect::<Result<_>>()?;
        let mut rep = ElReport::default();
        for (z, y, g) in per {
            rep.max_pairing_gap = rep.max_pairing_gap.max(g);
            rep.residual_z.push(z);
            rep.residual_y.push(y);
        }
        Ok(rep)
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn max_gap(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn compatibility_at(v: &[Vec<Series>], u: &[Vec<Series>], m: usize, n: usize) -> (f64, f64) {
    let col = |w: &[Vec<Series>], i: usize| -> Vec<Series> { (0..m).map(|k| w[k][i].clone()).collect() };
    let (mut rv, mut ru) = (0.0f64, 0.0f64);
    for i in 0..n {
        for j in i + 1..n {
            let bv = field_bracket(&col(v, i), &col(v, j));
            let bu = field_bracket(&col(u, i), &col(u, j));
            for k in 0..m {
                let dv = v[k][j].partial(m + i).value() - v[k][i].partial(m + j).value();
                let du = u[k][j].partial(m + i).value() - u[k][i].partial(m + j).value();
                rv = rv.max((dv + bv[k].value()).abs());
                ru = ru.max((du - bu[k].value()).abs());
            }
        }
    }
    (rv, ru)
}

fn mass_residual(rho: &Series, v: &[Vec<Series>], m: usize, n: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for i in 0..n {
        let mut r = rho.partial(m + i).value();
        for k in 0..m {
            r += (rho * &v[k][i]).partial(k).value();
        }
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem3Report {
    pub steps: Vec<f64>,
    /// `|delta v - (d eta/dx + [v, eta])|` with `delta v` exact in `eps`.
    pub exact_gap: f64,
    /// `|d eta/dx + [v, eta] - (df/dy)(d xi/dx)|`.
    pub formula_gap: f64,
    /// Finite-difference `delta v` against the formula, one per step.
    pub fd_gaps: Vec<f64>,
}

impl Theorem3Report {
    /// Ratio of consecutive finite-difference gaps (2 for O(eps) halving).
    pub fn convergence_ratio(&self) -> Option<f64> {
        match self.fd_gaps.as_slice() {
            [a, b, ..] if *b > 0.0 => Some(a / b),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ElReport {
    /// `rho (d_i V^i_k + v^l_i d_l V^i_k)` per sample.
    pub residual_z: Vec<Vec<f64>>,
    /// `(d_i U^i_k) F^k_l` per sample, `U^i_k(y, x) = V^i_k(f(y, x), x)`.
    pub residual_y: Vec<Vec<f64>>,
    /// Max `|<residual_y, xi> - Delta <residual_z, eta>|` for random `eta`.
    pub max_pairing_gap: f64,
}

/// Random two-parameter family on `R^2`: shear, parameter-dependent
/// scaling and rotation, second shear. Invertible for every parameter value.
pub fn random_family<R: Rng>(label: &str, rng: &mut R) -> Result<MotionFamily> {
    let mut p = || format!("{:.6}", rng.gen_range(-0.5..0.5));
    let s1 = format!("(y1 + {}*sin(x1)*y2^2 + {}*x2*y2)", p(), p());
    let w1 = format!("exp({}*x1 + {}*x2)*{s1}", p(), p());
    let w2 = format!("exp({}*x1 + {}*x2)*y2", p(), p());
    let th = format!("({}*x1 + {}*x2)", p(), p());
    let r1 = format!("(cos{th}*{w1} - sin{th}*{w2})");
    let r2 = format!("(sin{th}*{w1} + cos{th}*{w2})");
    let f = format!("{r1} + {}*x1, {r2} + {}*x2*{r1}^2 + {}*x1*x2", p(), p(), p());
    let bounds = SampleBox::new(vec![-1.0, -1.0, 0.0, 0.0], vec![1.0, 1.0, 0.5, 0.5])?;
    MotionFamily::new(label, 2, 2, &f, None, None, bounds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::rng;

    fn fam(m: usize, n: usize, f: &str, g: Option<&str>, var: Option<&str>, lo: Vec<f64>, hi: Vec<f64>) -> MotionFamily {
        MotionFamily::new("t", m, n, f, g, var, SampleBox::new(lo, hi).unwrap()).unwrap()
    }

    #[test]
    fn speed_examples() {
        let tr = fam(1, 1, "y1 + 2*x1", Some("z1 - 2*x1"), None, vec![-1.0, 0.0], vec![1.0, 1.0]);
        let s = tr.generalized_speed(&[0.3], &[0.2]).unwrap();
        assert_eq!((s.v[0][0], s.u[0][0], s.delta), (2.0, 2.0, 1.0));

        let ex = fam(1, 1, "exp(x1)*y1", None, None, vec![-1.0, 0.0], vec![1.0, 1.0]);
        let (z, t) = (0.7, 0.4);
        let s = ex.generalized_speed(&[z], &[t]).unwrap();
        let y = z * (-t).exp();
        assert!((s.v[0][0] - z).abs() < 1e-12);
        assert!((s.u[0][0] - y).abs() < 1e-12);
        assert!((s.delta - t.exp()).abs() < 1e-12);
        assert!((s.rho - (-t).exp()).abs() < 1e-12);

        let rot = fam(
            2,
            1,
            "cos(3*x1)*y1 - sin(3*x1)*y2, sin(3*x1)*y1 + cos(3*x1)*y2",
            None,
            None,
            vec![-1.0, -1.0, 0.0],
            vec![1.0, 1.0, 1.0],
        );
        let s = rot.generalized_speed(&[0.4, -0.9], &[0.3]).unwrap();
        assert!((s.v[0][0] - 3.0 * 0.9).abs() < 1e-12 && (s.v[1][0] - 3.0 * 0.4).abs() < 1e-12);
    }

    #[test]
    fn newton_matches_explicit_inverse() {
        let with_g = fam(1, 2, "exp(x1)*(y1 + x2)", Some("exp(-x1)*z1 - x2"), None, vec![-1.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]);
        let without = fam(1, 2, "exp(x1)*(y1 + x2)", None, None, vec![-1.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]);
        for s in with_g.samples(10, 4) {
            let a = with_g.generalized_speed(&s[..1], &s[1..]).unwrap();
            let b = without.generalized_speed(&s[..1], &s[1..]).unwrap();
            assert!((a.v[0][1] - b.v[0][1]).abs() < 1e-12 && (a.u[0][0] - b.u[0][0]).abs() < 1e-12);
        }
        assert!(matches!(
            MotionFamily::new("bad", 1, 1, "y1 + x1", Some("z1 + x1"), None, SampleBox::cube(2, 0.0, 1.0)),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn compatibility_by_hand_and_by_finite_differences() {
        let f = fam(1, 2, "exp(x1)*(y1 + x2)", None, None, vec![-1.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]);
        let pts = f.samples(12, 3);
        let (rv, ru) = f.compatibility_residual(&pts).unwrap().unwrap();
        assert!(rv < 1e-12 && ru < 1e-12);
        // v_1 = z, v_2 = e^{x1}: independent difference quotients
        let h = 1e-5;
        let v = |z: f64, x1: f64, x2: f64| {
            let s = f.generalized_speed(&[z], &[x1, x2]).unwrap();
            (s.v[0][0], s.v[0][1])
        };
        let (z, x1, x2) = (0.3, 0.2, 0.6);
        let d1v2 = (v(z, x1 + h, x2).1 - v(z, x1 - h, x2).1) / (2.0 * h);
        let d2v1 = (v(z, x1, x2 + h).0 - v(z, x1, x2 - h).0) / (2.0 * h);
        let (v1, v2) = v(z, x1, x2);
        let dz_v1 = (v(z + h, x1, x2).0 - v(z - h, x1, x2).0) / (2.0 * h);
        let dz_v2 = (v(z + h, x1, x2).1 - v(z - h, x1, x2).1) / (2.0 * h);
        let r = d1v2 - d2v1 + v1 * dz_v2 - v2 * dz_v1;
        assert!(r.abs() < 1e-8, "{r}");

        let single = fam(1, 1, "y1 + x1", None, None, vec![0.0, 0.0], vec![1.0, 1.0]);
        assert_eq!(single.compatibility_residual(&pts).unwrap(), None);
    }

    #[test]
    fn corrupted_speed_is_detected() {
        // v_1 = z + 0.1 x2 is not the speed of any family with v_2 = 1
        let v: Vec<Vec<Series>> = vec![vec![
            &Series::variable(3, 1, 0, 0.3) + &Series::variable(3, 1, 2, 0.5).scale(0.1),
            Series::constant(3, 1, 1.0),
        ]];
        let (rv, _) = compatibility_at(&v, &v, 1, 2);
        assert!(rv > 0.05);
    }

    #[test]
    fn random_families_satisfy_compatibility() {
        let mut r = rng(21);
        for i in 0..3 {
            let f = random_family(&format!("r{i}"), &mut r).unwrap();
            let pts = f.samples(8, i);
            let (rv, ru) = f.compatibility_residual(&pts).unwrap().unwrap();
            assert!(rv < 1e-8 && ru < 1e-8, "{rv} {ru}");
            assert!(f.mass_conservation_residual(&pts).unwrap() < 1e-8);
        }
    }

    #[test]
    fn mass_conservation() {
        let ex = fam(1, 1, "exp(x1)*y1", None, None, vec![-1.0, 0.0], vec![1.0, 1.0]);
        assert!(ex.mass_conservation_residual(&ex.samples(10, 1)).unwrap() < 1e-14);
        let sl = fam(2, 1, "y1 + x1*y2^2, y2", None, None, vec![-1.0, -1.0, 0.0], vec![1.0, 1.0, 1.0]);
        let pts = sl.samples(5, 2);
        let s = sl.generalized_speed(&pts[0][..2], &pts[0][2..]).unwrap();
        assert_eq!(s.rho, 1.0);
        assert!(sl.mass_conservation_residual(&pts).unwrap() < 1e-14);
        // rho = e^{-t} with the wrong sign of the transport term
        let rho = Series::variable(2, 1, 1, 0.2).scale(-1.0).exp();
        let v = vec![vec![Series::variable(2, 1, 0, 0.5).scale(-1.0)]];
        assert!(mass_residual(&rho, &v, 1, 1).unwrap() > 0.1);
    }

    #[test]
    fn theorem3() {
        let f = fam(
            1,
            1,
            "exp(x1)*y1",
            None,
            Some("exp(x1)*(y1 + eps*y1^2)"),
            vec![0.2, 0.0],
            vec![1.0, 1.0],
        );
        let pts = f.samples(6, 9);
        // here v = z for every eps, so delta v vanishes identically
        let rep = f.theorem3_check(&pts, &[1e-3, 5e-4]).unwrap();
        assert!(rep.exact_gap < 1e-12 && rep.formula_gap < 1e-12, "{rep:?}");
        assert!(rep.fd_gaps.iter().all(|g| *g < 1e-6 * 1e-3));
        assert!(f.density_variation_residual(&pts).unwrap() < 1e-12);

        let g = fam(
            1,
            1,
            "exp(x1)*y1",
            None,
            Some("exp(x1)*y1 + eps*x1*y1^2"),
            vec![0.2, 0.0],
            vec![1.0, 1.0],
        );
        let rep = g.theorem3_check(&pts, &[1e-3, 5e-4]).unwrap();
        assert!(rep.exact_gap < 1e-12 && rep.formula_gap < 1e-12, "{rep:?}");
        let ratio = rep.convergence_ratio().unwrap();
        assert!((ratio - 2.0).abs() < 0.2, "{rep:?}");
        assert!(g.density_variation_residual(&pts).unwrap() < 1e-12);

        let shift = fam(1, 1, "y1 + x1", None, Some("y1 + x1 + eps"), vec![0.0, 0.0], vec![1.0, 1.0]);
        let rep = shift.theorem3_check(&pts, &[1e-3]).unwrap();
        assert!(rep.fd_gaps[0] < 1e-12 && rep.exact_gap == 0.0);

        // v = 0 and eta = eps * x: delta v = d eta / dx exactly
        let still = fam(1, 1, "y1", None, Some("y1 + eps*x1"), vec![0.0, 0.0], vec![1.0, 1.0]);
        let rep = still.theorem3_check(&pts, &[1e-3]).unwrap();
        assert!(rep.fd_gaps[0] < 1e-12);
    }

    #[test]
    fn theorem3_on_random_two_parameter_family() {
        let f = fam(
            2,
            2,
            "exp(0.3*x1)*(y1 + x2*y2^2), y2 + sin(x1)*y1",
            None,
            Some("exp(0.3*x1)*(y1 + x2*y2^2) + eps*y2*x1, y2 + sin(x1)*y1 + eps*cos(y1 + x2)"),
            vec![-0.5, -0.5, 0.0, 0.0],
            vec![0.5, 0.5, 0.5, 0.5],
        );
        let rep = f.theorem3_check(&f.samples(5, 2), &[1e-3, 5e-4]).unwrap();
        assert!(rep.exact_gap < 1e-11 && rep.formula_gap < 1e-11, "{rep:?}");
        assert!((rep.convergence_ratio().unwrap() - 2.0).abs() < 0.2);
    }

    #[test]
    fn inverse_family_swaps_speeds() {
        let f = fam(1, 2, "exp(x1)*(y1 + x2)", Some("exp(-x1)*z1 - x2"), None, vec![-1.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]);
        let inv = f.inverse_family().unwrap();
        for s in f.samples(6, 8) {
            let (y, x) = s.split_at(1);
            let z = f.f_values(y, x, None).unwrap();
            let a = f.generalized_speed(&z, x).unwrap();
            let b = inv.generalized_speed(y, x).unwrap();
            for i in 0..2 {
                assert!((b.v[0][i] + a.u[0][i]).abs() < 1e-9);
                assert!((b.u[0][i] + a.v[0][i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn kinetic_energy_el() {
        let w = ExprMap::parse("0.5*(v1_1^2 + v2_1^2 + v3_1^2)").unwrap();
        let rot = fam(
            3,
            1,
            "cos(2*x1)*y1 - sin(2*x1)*y2, sin(2*x1)*y1 + cos(2*x1)*y2, y3",
            None,
            None,
            vec![-1.0, -1.0, -1.0, 0.0],
            vec![1.0, 1.0, 1.0, 1.0],
        );
        let pts = rot.samples(6, 5);
        let rep = rot.el_residual(&w, &pts, &mut rng(1)).unwrap();
        for (p, r) in pts.iter().zip(&rep.residual_z) {
            // rho gamma = -Omega^2 (z1, z2, 0)
            assert!((r[0] + 4.0 * p[0]).abs() < 1e-12 && (r[1] + 4.0 * p[1]).abs() < 1e-12 && r[2].abs() < 1e-12);
        }
        assert!(rep.max_pairing_gap < 1e-12);

        let tr = fam(3, 1, "y1 + x1, y2 - 2*x1, y3", None, None, vec![-1.0; 4], vec![1.0; 4]);
        let rep = tr.el_residual(&w, &pts, &mut rng(1)).unwrap();
        assert!(rep.residual_z.iter().flatten().all(|v| v.abs() < 1e-14));

        // compressible 1D: rho (v_t + v v_z) for z = e^t y
        let w1 = ExprMap::parse("0.5*v1_1^2").unwrap();
        let ex = fam(1, 1, "exp(x1)*y1^3 + y1", None, None, vec![0.5, 0.0], vec![1.5, 1.0]);
        let pts = ex.samples(6, 3);
        let rep = ex.el_residual(&w1, &pts, &mut rng(2)).unwrap();
        assert!(rep.max_pairing_gap < 1e-10);
        for (p, r) in pts.iter().zip(&rep.residual_z) {
            let s = ex.generalized_speed(&p[..1], &p[1..]).unwrap();
            // acceleration of the particle through z: d^2 f / dt^2 at the source
            let y = ex.source_point(&p[..1], &p[1..], None).unwrap()[0];
            let gamma = p[1].exp() * y.powi(3);
            assert!((r[0] - s.rho * gamma).abs() < 1e-10, "{} vs {}", r[0], s.rho * gamma);
        }
    }
}
