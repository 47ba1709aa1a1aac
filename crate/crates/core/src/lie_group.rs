//! Lie groups given by a chart composition law: structure constants,
//! Maurer-Cartan pull-backs, curvature, variations, Euler-Lagrange residuals,
//! the adjoint map and the linear gauge sequence.
//!
//! Algebra elements and gauge fields use the chart basis at the identity.
//! A gauge field is stored with index `tau * n + i` for `A^tau_i`; the
//! structure constants with index `(tau * p + rho) * p + sigma`.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expr::ExprMap;
use crate::linalg::{self, Matrix};
use crate::poly::var_names;
use crate::sampling::{rng, Grid};
use crate::taylor::{multi_indices_up_to, Dual, Scalar, Series};
use rand::Rng;

/// Infinitesimal action on `R^n`: one vector field per algebra basis
/// element.
#[derive(Debug, Clone)]
pub struct GroupAction {
    pub n: usize,
    /// `generators[tau]` has inputs `x1..xn` and `n` outputs.
    pub generators: Vec<ExprMap>,
}

#[derive(Debug, Clone)]
pub struct LieGroupSpec {
    pub name: String,
    dim: usize,
    identity: Vec<f64>,
    compose: ExprMap,
    inverse: ExprMap,
    structure: Vec<f64>,
    action: Option<GroupAction>,
}

#[derive(Deserialize)]
struct GroupDoc {
    #[serde(default)]
    name: Option<String>,
    dim: usize,
    identity: Vec<f64>,
    compose: String,
    inverse: String,
    #[serde(default)]
    action: Option<ActionDoc>,
}

#[derive(Deserialize)]
struct ActionDoc {
    n: usize,
    generators: Vec<String>,
}

const LAW_TOL: f64 = 1e-10;
const JACOBI_TOL: f64 = 1e-8;

impl LieGroupSpec {
    /// `compose` is written in `a1..ap, b1..bp`, `inverse` in `a1..ap`,
    /// each generator in `x1..xn`.
    pub fn new(
        name: &str,
        identity: Vec<f64>,
        compose: &str,
        inverse: &str,
        action: Option<(usize, Vec<String>)>,
    ) -> Result<Self> {
        let p = identity.len();
        if p == 0 {
            return Err(Error::InvalidParameter("group dimension must be positive".into()));
        }
        let a = var_names("a", p);
        let mut ab = a.clone();
        ab.extend(var_names("b", p));
        let compose = ExprMap::parse_with_vars(&ab, compose)?;
        let inverse = ExprMap::parse_with_vars(&a, inverse)?;
        if compose.n_outputs() != p || inverse.n_outputs() != p {
            return Err(Error::DimensionMismatch(format!(
                "group of dimension {p} needs {p} composition and inverse components"
            )));
        }
        let action = match action {
            None => None,
            Some((n, gens)) => {
                if gens.len() != p {
                    return Err(Error::DimensionMismatch(format!(
                        "{} generators given for a group of dimension {p}",
                        gens.len()
                    )));
                }
                let x = var_names("x", n);
                let generators = gens
                    .iter()
                    .map(|g| {
                        let m = ExprMap::parse_with_vars(&x, g)?;
                        if m.n_outputs() != n {
                            return Err(Error::DimensionMismatch(format!(
                                "generator `{g}` has {} components, expected {n}",
                                m.n_outputs()
                            )));
                        }
                        Ok(m)
                    })
                    .collect::<Result<_>>()?;
                Some(GroupAction { n, generators })
            }
        };
        let mut spec = LieGroupSpec {
            name: name.to_string(),
            dim: p,
            identity,
            compose,
            inverse,
            structure: Vec::new(),
            action,
        };
        spec.structure = structure_constants(&spec.compose, &spec.identity)?;
        let jac = spec.jacobi_residual();
        if jac > JACOBI_TOL {
            return Err(Error::InconsistentGroupLaw(format!("Jacobi residual {jac:e}")));
        }
        Ok(spec)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GroupDoc = serde_json::from_str(text)?;
        if doc.identity.len() != doc.dim {
            return Err(Error::Fixture(format!(
                "identity has {} entries, dim is {}",
                doc.identity.len(),
                doc.dim
            )));
        }
        LieGroupSpec::new(
            doc.name.as_deref().unwrap_or("group"),
            doc.identity,
            &doc.compose,
            &doc.inverse,
            doc.action.map(|a| (a.n, a.generators)),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn identity(&self) -> &[f64] {
        &self.identity
    }

    pub fn action(&self) -> Option<&GroupAction> {
        self.action.as_ref()
    }

    pub fn compose_map(&self) -> &ExprMap {
        &self.compose
    }

    pub fn inverse_map(&self) -> &ExprMap {
        &self.inverse
    }

    /// `c^tau_{rho sigma}`.
    pub fn c(&self, tau: usize, rho: usize, sigma: usize) -> f64 {
        let p = self.dim;
        self.structure[(tau * p + rho) * p + sigma]
    }

    pub fn structure_constants(&self) -> &[f64] {
        &self.structure
    }

    /// `[l, m]^tau = c^tau_{rho sigma} l^rho m^sigma`.
    pub fn bracket(&self, l: &[f64], m: &[f64]) -> Vec<f64> {
        let p = self.dim;
        (0..p)
            .map(|t| {
                let mut s = 0.0;
                for r in 0..p {
                    for q in 0..p {
                        s += self.c(t, r, q) * l[r] * m[q];
                    }
                }
                s
            })
            .collect()
    }

    pub fn jacobi_residual(&self) -> f64 {
        let p = self.dim;
        let e = |i: usize| -> Vec<f64> { (0..p).map(|j| if i == j { 1.0 } else { 0.0 }).collect() };
        let mut worst = 0.0f64;
        for i in 0..p {
            for j in 0..p {
                for k in 0..p {
                    let (x, y, z) = (e(i), e(j), e(k));
                    let a = self.bracket(&self.bracket(&x, &y), &z);
                    let b = self.bracket(&self.bracket(&y, &z), &x);
                    let c = self.bracket(&self.bracket(&z, &x), &y);
                    for t in 0..p {
                        worst = worst.max((a[t] + b[t] + c[t]).abs());
                    }
                }
            }
        }
        worst
    }

    pub fn compose_at<T: Scalar>(&self, a: &[T], b: &[T]) -> Result<Vec<T>> {
        let mut v = a.to_vec();
        v.extend_from_slice(b);
        let proto = a[0].constant_like(0.0);
        self.compose.eval_generic(&v, &proto)
    }

    pub fn inverse_at<T: Scalar>(&self, a: &[T]) -> Result<Vec<T>> {
        let proto = a[0].constant_like(0.0);
        self.inverse.eval_generic(a, &proto)
    }

    fn jacobian_in_slot<T: Scalar>(&self, a: &[T], left: bool) -> Result<Vec<Vec<T>>> {
        let p = self.dim;
        let av: Vec<Dual<T>> = a.iter().map(|x| Dual::constant(x.clone(), p)).collect();
        let ev: Vec<Dual<T>> = (0..p)
            .map(|s| Dual::seed(a[0].constant_like(self.identity[s]), s, p))
            .collect();
        let out = if left {
            self.compose_at(&av, &ev)?
        } else {
            self.compose_at(&ev, &av)?
        };
        Ok(out.into_iter().map(|d| d.tangent).collect())
    }

    /// `L(a)^tau_sigma = d m^tau(a, b) / d b^sigma` at `b = e`: the left
    /// translation of algebra elements to `a`.
    pub fn left_jacobian<T: Scalar>(&self, a: &[T]) -> Result<Vec<Vec<T>>> {
        self.jacobian_in_slot(a, true)
    }

    /// `R(a)^tau_sigma = d m^tau(b, a) / d b^sigma` at `b = e`.
    pub fn right_jacobian<T: Scalar>(&self, a: &[T]) -> Result<Vec<Vec<T>>> {
        self.jacobian_in_slot(a, false)
    }

    /// `Ad(a) = d/db (a b a^-1)` at `b = e`.
    pub fn adjoint_generic<T: Scalar>(&self, a: &[T]) -> Result<Vec<Vec<T>>> {
        let p = self.dim;
        let ainv = self.inverse_at(a)?;
        let av: Vec<Dual<T>> = a.iter().map(|x| Dual::constant(x.clone(), p)).collect();
        let aiv: Vec<Dual<T>> = ainv.iter().map(|x| Dual::constant(x.clone(), p)).collect();
        let ev: Vec<Dual<T>> = (0..p)
            .map(|s| Dual::seed(a[0].constant_like(self.identity[s]), s, p))
            .collect();
        let ab = self.compose_at(&av, &ev)?;
        let out = self.compose_at(&ab, &aiv)?;
        Ok(out.into_iter().map(|d| d.tangent).collect())
    }

    pub fn adjoint_matrix(&self, a: &[f64]) -> Result<Matrix> {
        let m = self.adjoint_generic(a)?;
        if linalg::checked_inverse(&m).is_none() {
            return Err(Error::ChartBreakdown(format!("adjoint matrix singular at {a:?}")));
        }
        Ok(m)
    }

    /// `exp(eps * lambda)` by one classical Runge-Kutta step of the
    /// left-invariant flow `b' = L(b) lambda` from the identity.
    pub fn exp_flow<T: Scalar>(&self, lambda: &[T], eps: f64) -> Result<Vec<T>> {
        let p = self.dim;
        let y0: Vec<T> = self.identity.iter().map(|&e| lambda[0].constant_like(e)).collect();
        let rhs = |y: &[T]| -> Result<Vec<T>> {
            let l = self.left_jacobian(y)?;
            Ok((0..p)
                .map(|t| {
                    l[t].iter()
                        .zip(lambda)
                        .fold(lambda[0].constant_like(0.0), |s, (a, b)| s.add(&a.mul(b)))
                })
                .collect())
        };
        let shift = |y: &[T], k: &[T], h: f64| -> Vec<T> {
            y.iter().zip(k).map(|(a, b)| a.add(&b.scale(h))).collect()
        };
        let k1 = rhs(&y0)?;
        let k2 = rhs(&shift(&y0, &k1, 0.5 * eps))?;
        let k3 = rhs(&shift(&y0, &k2, 0.5 * eps))?;
        let k4 = rhs(&shift(&y0, &k3, eps))?;
        Ok((0..p)
            .map(|t| {
                let inc = k1[t]
                    .add(&k2[t].scale(2.0))
                    .add(&k3[t].scale(2.0))
                    .add(&k4[t]);
                y0[t].add(&inc.scale(eps / 6.0))
            })
            .collect())
    }

    /// Max violation of `m(a,e)=a`, `m(e,a)=a`, `m(a,inv a)=e`,
    /// `m(inv a,a)=e` and associativity at random points within `radius`
    /// of the identity.
    pub fn group_law_residual(&self, samples: usize, radius: f64, seed: u64) -> Result<f64> {
        let mut r = rng(seed);
        let mut worst = 0.0f64;
        let rand_point = |r: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
            self.identity
                .iter()
                .map(|e| e + r.gen_range(-radius..=radius))
                .collect()
        };
        let diff = |u: &[f64], v: &[f64]| u.iter().zip(v).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        for _ in 0..samples {
            let a = rand_point(&mut r);
            let b = rand_point(&mut r);
            let c = rand_point(&mut r);
            let e = &self.identity;
            let ai = self.inverse_at(&a)?;
            worst = worst
                .max(diff(&self.compose_at(&a, e)?, &a))
                .max(diff(&self.compose_at(e, &a)?, &a))
                .max(diff(&self.compose_at(&a, &ai)?, e))
                .max(diff(&self.compose_at(&ai, &a)?, e));
            let left = self.compose_at(&self.compose_at(&a, &b)?, &c)?;
            let right = self.compose_at(&a, &self.compose_at(&b, &c)?)?;
            worst = worst.max(diff(&left, &right));
        }
        Ok(worst)
    }

    /// Validate the group law to `1e-10`.
    pub fn check_group_law(&self, seed: u64) -> Result<()> {
        let r = self.group_law_residual(32, 0.4, seed)?;
        if r > LAW_TOL {
            return Err(Error::InconsistentGroupLaw(format!("group axioms violated by {r:e}")));
        }
        Ok(())
    }

    /// Max of `|[xi_rho, xi_sigma] - c^tau_{rho sigma} xi_tau|` over
    /// `points`, for the vector-field bracket
    /// `[X, Y]^k = X^r d_r Y^k - Y^r d_r X^k`.
    pub fn generator_bracket_residual(&self, points: &[Vec<f64>]) -> Result<f64> {
        let act = self
            .action
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter(format!("group `{}` has no action", self.name)))?;
        let p = self.dim;
        let n = act.n;
        let mut worst = 0.0f64;
        for x in points {
            let jets: Vec<_> = act
                .generators
                .iter()
                .map(|g| g.taylor_lift(x, 1))
                .collect::<Result<_>>()?;
            for rho in 0..p {
                for sigma in 0..p {
                    for k in 0..n {
                        let mut br = 0.0;
                        for r in 0..n {
                            br += jets[rho].components()[r].value() * jets[sigma].components()[k].gradient()[r]
                                - jets[sigma].components()[r].value() * jets[rho].components()[k].gradient()[r];
                        }
                        let expected: f64 = (0..p)
                            .map(|t| self.c(t, rho, sigma) * jets[t].components()[k].value())
                            .sum();
                        worst = worst.max((br - expected).abs());
                    }
                }
            }
        }
        Ok(worst)
    }
}

/// Structure constants of a composition law at the identity:
/// `c^tau_{rho sigma} = B^tau_{sigma rho} - B^tau_{rho sigma}` with
/// `B^tau_{rho sigma} = d^2 m^tau / da^rho db^sigma (e, e)`.
///
/// With this sign the bracket of the generators of a left action obeys
/// `[xi_rho, xi_sigma] = c^tau_{rho sigma} xi_tau`.
pub fn structure_constants(compose: &ExprMap, identity: &[f64]) -> Result<Vec<f64>> {
    let p = identity.len();
    let mut ee = identity.to_vec();
    ee.extend_from_slice(identity);
    let jet = compose.taylor_lift(&ee, 2)?;
    let mut mu = vec![0u8; 2 * p];
    let mut bmat = vec![0.0; p * p * p];
    for t in 0..p {
        for r in 0..p {
            for s in 0..p {
                mu.iter_mut().for_each(|e| *e = 0);
                mu[r] += 1;
                mu[p + s] += 1;
                bmat[(t * p + r) * p + s] = jet.components()[t].coeff(&mu);
            }
        }
    }
    let mut c = vec![0.0; p * p * p];
    for t in 0..p {
        for r in 0..p {
            for s in 0..p {
                c[(t * p + r) * p + s] = bmat[(t * p + s) * p + r] - bmat[(t * p + r) * p + s];
            }
        }
    }
    Ok(c)
}

/// Which Maurer-Cartan form is pulled back.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `A = a^-1 da`.
    Left,
    /// `B = da a^-1`.
    Right,
}

/// Maurer-Cartan pull-back from series of a gauging: returns `p * n`
/// series (index `tau * n + i`) one order below the input.
pub fn mc_from_series(spec: &LieGroupSpec, a: &[Series], side: Side) -> Result<Vec<Series>> {
    let p = spec.dim();
    let n = a[0].nvars();
    let jac = match side {
        Side::Left => spec.left_jacobian(a)?,
        Side::Right => spec.right_jacobian(a)?,
    };
    let order = a[0].order() - 1;
    let jac: Vec<Vec<Series>> = jac
        .into_iter()
        .map(|row| row.into_iter().map(|s| s.truncate(order)).collect())
        .collect();
    let mut out = vec![Series::zero(n, order); p * n];
    for i in 0..n {
        let da: Vec<Series> = a.iter().map(|s| s.partial(i)).collect();
        let col = linalg::solve(&jac, &da).map_err(|_| {
            Error::ChartBreakdown("translation Jacobian is singular along the gauging".into())
        })?;
        for (t, s) in col.into_iter().enumerate() {
            out[t * n + i] = s;
        }
    }
    Ok(out)
}

/// Pull-back of the Maurer-Cartan form at `x`, Taylor-expanded to `order`.
pub fn mc_series(spec: &LieGroupSpec, gauging: &ExprMap, x: &[f64], order: usize, side: Side) -> Result<Vec<Series>> {
    check_gauging(spec, gauging, x)?;
    let a = gauging.taylor_lift(x, order + 1)?;
    mc_from_series(spec, a.components(), side)
}

fn check_gauging(spec: &LieGroupSpec, gauging: &ExprMap, x: &[f64]) -> Result<()> {
    if gauging.n_outputs() != spec.dim() || gauging.n_inputs() != x.len() {
        return Err(Error::DimensionMismatch(format!(
            "gauging with {} inputs and {} outputs for a {}-dimensional group at a point of dimension {}",
            gauging.n_inputs(),
            gauging.n_outputs(),
            spec.dim(),
            x.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub enum GaugeSource {
    /// Values only; derivatives by finite differences on the grid.
    Sampled,
    /// Pulled back from a gauging `a(x)`.
    PulledBack { gauging: ExprMap, side: Side },
    /// Closed-form field with outputs `A^tau_i` at index `tau * n + i`.
    Analytic { field: ExprMap },
}

/// A field in `T* (x) g` sampled on a grid.
#[derive(Debug, Clone)]
pub struct GaugeField {
    grid: Grid,
    p: usize,
    values: Vec<Vec<f64>>,
    source: GaugeSource,
}

impl GaugeField {
    pub fn sampled(p: usize, grid: Grid, values: Vec<Vec<f64>>) -> Result<Self> {
        let n = grid.dim();
        if values.len() != grid.len() || values.iter().any(|v| v.len() != p * n) {
            return Err(Error::DimensionMismatch(format!(
                "sampled gauge field needs {} nodes with {} values each",
                grid.len(),
                p * n
            )));
        }
        Ok(GaugeField {
            grid,
            p,
            values,
            source: GaugeSource::Sampled,
        })
    }

    pub fn analytic(spec: &LieGroupSpec, field: ExprMap, grid: Grid) -> Result<Self> {
        let (p, n) = (spec.dim(), grid.dim());
        if field.n_outputs() != p * n || field.n_inputs() != n {
            return Err(Error::DimensionMismatch(format!(
                "analytic gauge field needs {n} inputs and {} outputs",
                p * n
            )));
        }
        let values = grid
            .points()
            .iter()
            .map(|x| field.eval(x))
            .collect::<Result<_>>()?;
        Ok(GaugeField {
            grid,
            p,
            values,
            source: GaugeSource::Analytic { field },
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.grid.dim()
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// `A^tau_i` at grid node `node`.
    pub fn at(&self, node: usize, tau: usize, i: usize) -> f64 {
        self.values[node][tau * self.n() + i]
    }

    pub fn source(&self) -> &GaugeSource {
        &self.source
    }

    pub fn is_pulled_back(&self) -> bool {
        matches!(self.source, GaugeSource::PulledBack { .. })
    }

    fn series_at(&self, spec: &LieGroupSpec, x: &[f64], order: usize) -> Result<Option<Vec<Series>>> {
        Ok(match &self.source {
            GaugeSource::Sampled => None,
            GaugeSource::PulledBack { gauging, side } => Some(mc_series(spec, gauging, x, order, *side)?),
            GaugeSource::Analytic { field } => Some(field.taylor_lift(x, order)?.components().to_vec()),
        })
    }

    fn side(&self) -> Side {
        match self.source {
            GaugeSource::PulledBack { side, .. } => side,
            _ => Side::Left,
        }
    }
}

/// `A = a^-1 da` on every grid node.
pub fn maurer_cartan_pullback(spec: &LieGroupSpec, gauging: &ExprMap, grid: &Grid) -> Result<GaugeField> {
    pullback(spec, gauging, grid, Side::Left)
}

/// `B = da a^-1` on every grid node.
pub fn right_pullback(spec: &LieGroupSpec, gauging: &ExprMap, grid: &Grid) -> Result<GaugeField> {
    pullback(spec, gauging, grid, Side::Right)
}

fn pullback(spec: &LieGroupSpec, gauging: &ExprMap, grid: &Grid, side: Side) -> Result<GaugeField> {
    let values = grid
        .points()
        .iter()
        .map(|x| Ok(mc_series(spec, gauging, x, 0, side)?.iter().map(Series::value).collect()))
        .collect::<Result<_>>()?;
    Ok(GaugeField {
        grid: grid.clone(),
        p: spec.dim(),
        values,
        source: GaugeSource::PulledBack {
            gauging: gauging.clone(),
            side,
        },
    })
}

/// Pairs `(i, j)` with `i < j` in lexicographic order.
pub fn index_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

/// `F^tau_{ij}` for `i < j` at each grid node (index `tau * npairs + pair`).
#[derive(Debug, Clone)]
pub struct CurvatureField {
    grid: Grid,
    p: usize,
    values: Vec<Vec<f64>>,
}

impl CurvatureField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// `F^tau_{ij}`, antisymmetric in `(i, j)`.
    pub fn get(&self, node: usize, tau: usize, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let n = self.grid.dim();
        let (lo, hi, sign) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
        let pairs = index_pairs(n);
        let k = pairs.iter().position(|&pr| pr == (lo, hi)).expect("pair in range");
        sign * self.values[node][tau * pairs.len() + k]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn p(&self) -> usize {
        self.p
    }
}

/// Weights of the first-derivative stencil on integer `offsets`.
fn fd_weights(offsets: &[i64]) -> Vec<f64> {
    let m = offsets.len();
    let a: Vec<Vec<f64>> = (0..m)
        .map(|k| offsets.iter().map(|&o| (o as f64).powi(k as i32)).collect())
        .collect();
    let b: Vec<f64> = (0..m).map(|k| if k == 1 { 1.0 } else { 0.0 }).collect();
    linalg::solve(&a, &b).expect("Vandermonde system is regular")
}

/// Fourth-order finite-difference derivative of component `comp` along
/// `axis` at `node` (five-point stencils, one-sided near the boundary).
fn grid_derivative(field: &GaugeField, node: usize, comp: usize, axis: usize) -> f64 {
    let grid = &field.grid;
    let idx = grid.multi_index(node);
    let count = grid.counts[axis] as i64;
    let pos = idx[axis] as i64;
    let start = (pos - 2).clamp(0, count - 5);
    let offsets: Vec<i64> = (start..start + 5).map(|j| j - pos).collect();
    let w = fd_weights(&offsets);
    let mut s = 0.0;
    let mut probe = idx.clone();
    for (o, wk) in offsets.iter().zip(w) {
        probe[axis] = (pos + o) as usize;
        s += wk * field.values[grid.node_index(&probe)][comp];
    }
    s / grid.spacing(axis)
}

/// Curvature `F^tau_{ij} = d_i A_j - d_j A_i - c^tau_{rho sigma} A^rho_i A^sigma_j`.
/// For a right pull-back the bracket sign flips (`dB + [B, B] = 0`).
pub fn curvature(spec: &LieGroupSpec, field: &GaugeField) -> Result<CurvatureField> {
    let (p, n) = (spec.dim(), field.n());
    if field.p != p {
        return Err(Error::DimensionMismatch(format!(
            "gauge field has {} algebra components, group has {p}",
            field.p
        )));
    }
    if matches!(field.source, GaugeSource::Sampled) {
        if let Some(&small) = field.grid.counts.iter().filter(|&&c| c < 5).min() {
            return Err(Error::GridTooSmall {
                required: 5,
                actual: small,
            });
        }
    }
    let sign = match field.side() {
        Side::Left => -1.0,
        Side::Right => 1.0,
    };
    let pairs = index_pairs(n);
    let points = field.grid.points();
    let mut values = Vec::with_capacity(points.len());
    for (node, x) in points.iter().enumerate() {
        let series = field.series_at(spec, x, 1)?;
        let (a, da): (Vec<f64>, Box<dyn Fn(usize, usize) -> f64>) = match &series {
            Some(s) => {
                let s = s.clone();
                (s.iter().map(Series::value).collect(), Box::new(move |comp, axis| s[comp].gradient()[axis]))
            }
            None => {
                let f = field.clone();
                (
                    field.values[node].clone(),
                    Box::new(move |comp, axis| grid_derivative(&f, node, comp, axis)),
                )
            }
        };
        let mut out = vec![0.0; p * pairs.len()];
        for t in 0..p {
            for (k, &(i, j)) in pairs.iter().enumerate() {
                let mut f = da(t * n + j, i) - da(t * n + i, j);
                for r in 0..p {
                    for s in 0..p {
                        f += sign * spec.c(t, r, s) * a[r * n + i] * a[s * n + j];
                    }
                }
                out[t * pairs.len() + k] = f;
            }
        }
        values.push(out);
    }
    Ok(CurvatureField {
        grid: field.grid.clone(),
        p,
        values,
    })
}

fn algebra_field(lambda: &ExprMap, p: usize, x: &[f64]) -> Result<Vec<Series>> {
    if lambda.n_outputs() != p || lambda.n_inputs() != x.len() {
        return Err(Error::DimensionMismatch(format!(
            "algebra-valued field needs {} inputs and {p} outputs",
            x.len()
        )));
    }
    Ok(lambda.taylor_lift(x, 1)?.components().to_vec())
}

fn variation(spec: &LieGroupSpec, field: &GaugeField, lambda: &ExprMap, sign: f64) -> Result<Vec<Vec<f64>>> {
    let (p, n) = (spec.dim(), field.n());
    field
        .grid
        .points()
        .iter()
        .enumerate()
        .map(|(node, x)| {
            let l = algebra_field(lambda, p, x)?;
            let lv: Vec<f64> = l.iter().map(Series::value).collect();
            let mut out = vec![0.0; p * n];
            for t in 0..p {
                for i in 0..n {
                    let mut v = l[t].gradient()[i];
                    for r in 0..p {
                        for s in 0..p {
                            v += sign * spec.c(t, r, s) * field.at(node, r, i) * lv[s];
                        }
                    }
                    out[t * n + i] = v;
                }
            }
            Ok(out)
        })
        .collect()
}

/// `(delta A)^tau_i = d_i lambda^tau - c^tau_{rho sigma} A^rho_i lambda^sigma`.
pub fn variation_body(spec: &LieGroupSpec, a: &GaugeField, lambda: &ExprMap) -> Result<Vec<Vec<f64>>> {
    variation(spec, a, lambda, -1.0)
}

/// `(delta B)^tau_i = d_i mu^tau + c^tau_{rho sigma} B^rho_i mu^sigma`.
pub fn variation_space(spec: &LieGroupSpec, b: &GaugeField, mu: &ExprMap) -> Result<Vec<Vec<f64>>> {
    variation(spec, b, mu, 1.0)
}

/// Forward difference `(A[a_eps] - A[a]) / eps` at `x`, where
/// `a_eps = a exp(eps lambda)` for [`Side::Left`] and
/// `a_eps = exp(eps lambda) a` for [`Side::Right`] (then `B` is varied).
pub fn finite_variation(
    spec: &LieGroupSpec,
    gauging: &ExprMap,
    lambda: &ExprMap,
    x: &[f64],
    eps: f64,
    side: Side,
) -> Result<Vec<f64>> {
    check_gauging(spec, gauging, x)?;
    let p = spec.dim();
    let a = gauging.taylor_lift(x, 1)?.components().to_vec();
    let l = algebra_field(lambda, p, x)?;
    let g = spec.exp_flow(&l, eps)?;
    let a_eps = match side {
        Side::Left => spec.compose_at(&a, &g)?,
        Side::Right => spec.compose_at(&g, &a)?,
    };
    let base = mc_from_series(spec, &a, side)?;
    let moved = mc_from_series(spec, &a_eps, side)?;
    Ok(base
        .iter()
        .zip(&moved)
        .map(|(u, v)| (v.value() - u.value()) / eps)
        .collect())
}

/// `d_i cal_A^i_tau + c^sigma_{rho tau} A^rho_i cal_A^i_sigma` at every grid
/// node of `a`; `cal_a` has outputs `cal_A^i_tau` at index `tau * n + i`.
pub fn el_body_residual(spec: &LieGroupSpec, a: &GaugeField, cal_a: &ExprMap) -> Result<Vec<Vec<f64>>> {
    let (p, n) = (spec.dim(), a.n());
    if cal_a.n_outputs() != p * n {
        return Err(Error::DimensionMismatch(format!("dual field needs {} outputs", p * n)));
    }
    a.grid
        .points()
        .iter()
        .enumerate()
        .map(|(node, x)| {
            let s = cal_a.taylor_lift(x, 1)?;
            let s = s.components();
            Ok((0..p)
                .map(|t| {
                    let mut v: f64 = (0..n).map(|i| s[t * n + i].gradient()[i]).sum();
                    for sg in 0..p {
                        for r in 0..p {
                            for i in 0..n {
                                v += spec.c(sg, r, t) * a.at(node, r, i) * s[sg * n + i].value();
                            }
                        }
                    }
                    v
                })
                .collect())
        })
        .collect()
}

/// Divergence `d_i cal_B^i_sigma` of a closed-form dual field at `points`.
pub fn el_space_residual(p: usize, cal_b: &ExprMap, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    points
        .iter()
        .map(|x| {
            let n = x.len();
            if cal_b.n_outputs() != p * n {
                return Err(Error::DimensionMismatch(format!("dual field needs {} outputs", p * n)));
            }
            let s = cal_b.taylor_lift(x, 1)?;
            let s = s.components();
            Ok((0..p).map(|t| (0..n).map(|i| s[t * n + i].gradient()[i]).sum()).collect())
        })
        .collect()
}

/// The space-side density `cal_B = Ad(a^-1)^T cal_A` (so that
/// `cal_B mu = cal_A lambda` for `mu = Ad(a) lambda`), expanded at `x` to
/// `order`.
pub fn space_density(
    spec: &LieGroupSpec,
    gauging: &ExprMap,
    cal_a: &ExprMap,
    x: &[f64],
    order: usize,
) -> Result<Vec<Series>> {
    check_gauging(spec, gauging, x)?;
    let (p, n) = (spec.dim(), x.len());
    let a = gauging.taylor_lift(x, order)?.components().to_vec();
    let ainv = spec.inverse_at(&a)?;
    let ad = spec.adjoint_generic(&ainv)?;
    let ca = cal_a.taylor_lift(x, order)?.components().to_vec();
    let mut out = vec![Series::zero(n, order); p * n];
    for s in 0..p {
        for i in 0..n {
            let mut acc = Series::zero(n, order);
            for t in 0..p {
                acc = &acc + &(&ad[t][s] * &ca[t * n + i]);
            }
            out[s * n + i] = acc;
        }
    }
    Ok(out)
}

/// Sorted `r`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, r: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, r, &mut Vec::new(), &mut out);
    out
}

/// Exterior derivative of an `r`-form with components on [`subsets`]`(n, r)`.
pub fn exterior_derivative(form: &[Series], n: usize, r: usize) -> Vec<Series> {
    let src = subsets(n, r);
    assert_eq!(form.len(), src.len());
    subsets(n, r + 1)
        .iter()
        .map(|j| {
            let mut acc: Option<Series> = None;
            for (k, &axis) in j.iter().enumerate() {
                let mut rest = j.clone();
                rest.remove(k);
                let pos = src.iter().position(|s| *s == rest).expect("face in basis");
                let mut term = form[pos].partial(axis);
                if k % 2 == 1 {
                    term = -&term;
                }
                acc = Some(match acc {
                    None => term,
                    Some(a) => &a + &term,
                });
            }
            acc.expect("non-empty subset")
        })
        .collect()
}

fn gauge_form_series(p: usize, omega: &ExprMap, r: usize, x: &[f64], order: usize) -> Result<Vec<Vec<Series>>> {
    let n = x.len();
    let per = subsets(n, r).len();
    if r > n.max(1) || omega.n_outputs() != p * per {
        return Err(Error::DimensionMismatch(format!(
            "a g-valued {r}-form on R^{n} needs {} components",
            p * per
        )));
    }
    let s = omega.taylor_lift(x, order)?.components().to_vec();
    Ok(s.chunks(per).map(|c| c.to_vec()).collect())
}

/// `d` of a `g`-valued `r`-form (components `tau * C(n, r) + subset`) at `x`.
pub fn linear_gauge_d(p: usize, omega: &ExprMap, r: usize, x: &[f64]) -> Result<Vec<f64>> {
    if r >= x.len() {
        return Err(Error::InvalidParameter(format!("form degree {r} must be below {}", x.len())));
    }
    let forms = gauge_form_series(p, omega, r, x, 1)?;
    Ok(forms
        .iter()
        .flat_map(|f| exterior_derivative(f, x.len(), r).into_iter().map(|s| s.value()))
        .collect())
}

/// `d(d omega)` at `x` (empty when `r + 2 > n`).
pub fn linear_gauge_dd(p: usize, omega: &ExprMap, r: usize, x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if r + 2 > n {
        return Ok(Vec::new());
    }
    let forms = gauge_form_series(p, omega, r, x, 2)?;
    Ok(forms
        .iter()
        .flat_map(|f| {
            let d1 = exterior_derivative(f, n, r);
            exterior_derivative(&d1, n, r + 1).into_iter().map(|s| s.value())
        })
        .collect())
}

/// Section of `R_q` induced by an algebra-valued field through the action,
/// with its Spencer image.
#[derive(Debug, Clone)]
pub struct ActionSection {
    pub order: usize,
    /// `xi^k_mu = lambda^tau d_mu xi^k_tau` for `|mu| <= q`, layout
    /// `(k, mu)` as in [`crate::jet::coordinate_layout`].
    pub section: Vec<f64>,
    /// `d_i xi^k_mu - xi^k_{mu + 1_i}` for `|mu| <= q - 1`, index
    /// `i * (n * len) + (k, mu)`.
    pub spencer: Vec<f64>,
    /// `d_i lambda^tau d_mu xi^k_tau`, same layout as `spencer`.
    pub contracted: Vec<f64>,
}

/// `(d_mu xi^k_tau)` as rows `(k, mu)`, columns `tau`, each entry a series
/// in `x` of order `extra`.
fn generator_jets(act: &GroupAction, x: &[f64], q: usize, extra: usize) -> Result<Vec<Vec<Series>>> {
    let idx = multi_indices_up_to(act.n, q);
    let lifted: Vec<_> = act
        .generators
        .iter()
        .map(|g| g.taylor_lift(x, q + extra))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(act.n * idx.len());
    for k in 0..act.n {
        for mu in &idx {
            rows.push(
                lifted
                    .iter()
                    .map(|j| {
                        let mut d = j.components()[k].clone();
                        for (v, &e) in mu.iter().enumerate() {
                            for _ in 0..e {
                                d = d.partial(v);
                            }
                        }
                        d.truncate(extra)
                    })
                    .collect(),
            );
        }
    }
    Ok(rows)
}

/// Rank of `lambda -> (lambda^tau d_mu xi^k_tau)_{|mu| <= q}` at `x`.
pub fn action_rank(spec: &LieGroupSpec, x: &[f64], q: usize) -> Result<usize> {
    let act = spec
        .action()
        .ok_or_else(|| Error::InvalidParameter(format!("group `{}` has no action", spec.name)))?;
    let rows = generator_jets(act, x, q, 0)?;
    let m: Matrix = rows.iter().map(|r| r.iter().map(Series::value).collect()).collect();
    Ok(linalg::rank(&m, 1e-10))
}

pub fn spencer_from_action(spec: &LieGroupSpec, lambda: &ExprMap, q: usize, points: &[Vec<f64>]) -> Result<Vec<ActionSection>> {
    let act = spec
        .action()
        .ok_or_else(|| Error::InvalidParameter(format!("group `{}` has no action", spec.name)))?;
    let (p, n) = (spec.dim(), act.n);
    let idx = multi_indices_up_to(n, q);
    let lower = if q == 0 { 0 } else { multi_indices_up_to(n, q - 1).len() };
    points
        .iter()
        .map(|x| {
            if action_rank(spec, x, q)? < p {
                return Err(Error::NotInjectiveYet(q));
            }
            let rows = generator_jets(act, x, q, 1)?;
            let l = algebra_field(lambda, p, x)?;
            let sec: Vec<Series> = rows
                .iter()
                .map(|row| {
                    row.iter()
                        .zip(&l)
                        .fold(Series::zero(n, 1), |acc, (g, lt)| &acc + &(g * lt))
                })
                .collect();
            let mut spencer = vec![0.0; n * n * lower];
            let mut contracted = vec![0.0; n * n * lower];
            for i in 0..n {
                for k in 0..n {
                    for (mpos, mu) in idx[..lower].iter().enumerate() {
                        let row = k * idx.len() + mpos;
                        let mut up = mu.clone();
                        up[i] += 1;
                        let upos = idx.iter().position(|m| *m == up).expect("raised index within order");
                        let slot = i * n * lower + k * lower + mpos;
                        spencer[slot] = sec[row].gradient()[i] - sec[k * idx.len() + upos].value();
                        contracted[slot] = (0..p).map(|t| l[t].gradient()[i] * rows[row][t].value()).sum();
                    }
                }
            }
            Ok(ActionSection {
                order: q,
                section: sec.iter().map(Series::value).collect(),
                spencer,
                contracted,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::sampling::SampleBox;

    pub(crate) fn affine() -> LieGroupSpec {
        LieGroupSpec::new(
            "affine",
            vec![1.0, 0.0],
            "a1*b1, a1*b2 + a2",
            "1/a1, -a2/a1",
            Some((1, vec!["x1".into(), "1".into()])),
        )
        .unwrap()
    }

    fn euclidean() -> LieGroupSpec {
        LieGroupSpec::new(
            "e2",
            vec![0.0; 3],
            "a1 + b1, a2 + cos(a1)*b2 - sin(a1)*b3, a3 + sin(a1)*b2 + cos(a1)*b3",
            "-a1, -cos(a1)*a2 - sin(a1)*a3, sin(a1)*a2 - cos(a1)*a3",
            Some((2, vec!["-x2, x1".into(), "1, 0".into(), "0, 1".into()])),
        )
        .unwrap()
    }

    fn grid2(per: usize) -> Grid {
        Grid::uniform(SampleBox::new(vec![0.1, -0.5], vec![0.9, 0.5]).unwrap(), per).unwrap()
    }

    #[test]
    fn affine_structure_constants() {
        let g = affine();
        for t in 0..2 {
            for r in 0..2 {
                for s in 0..2 {
                    let expected = match (t, r, s) {
                        (1, 0, 1) => -1.0,
                        (1, 1, 0) => 1.0,
                        _ => 0.0,
                    };
                    assert_eq!(g.c(t, r, s), expected, "c^{t}_{r}{s}");
                }
            }
        }
        assert_eq!(g.generator_bracket_residual(&[vec![0.3], vec![-1.2]]).unwrap(), 0.0);
        g.check_group_law(1).unwrap();
    }

    #[test]
    fn abelian_constants_vanish() {
        let g = LieGroupSpec::new("r2", vec![0.0, 0.0], "a1 + b1, a2 + b2", "-a1, -a2", None).unwrap();
        assert!(g.structure_constants().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn euclidean_constants_match_generators() {
        let g = euclidean();
        assert_eq!(g.c(2, 0, 1), -1.0);
        assert_eq!(g.c(1, 0, 2), 1.0);
        let pts = SampleBox::cube(2, -1.0, 1.0).points(8, 3);
        assert!(g.generator_bracket_residual(&pts).unwrap() < 1e-14);
        g.check_group_law(2).unwrap();
        assert!(g.jacobi_residual() < 1e-14);
    }

    #[test]
    fn broken_group_law_is_reported() {
        let g = LieGroupSpec::new("bad", vec![1.0, 0.0], "a1*b1, a1*b2 + a2*b1", "1/a1, -a2/a1", None).unwrap();
        assert!(matches!(g.check_group_law(1), Err(Error::InconsistentGroupLaw(_))));
    }

    #[test]
    fn affine_maurer_cartan_form() {
        let g = affine();
        let a = ExprMap::parse_with_vars(&["x1", "x2"], "exp(x1), x2").unwrap();
        let field = maurer_cartan_pullback(&g, &a, &grid2(3)).unwrap();
        for (node, x) in field.grid().points().iter().enumerate() {
            assert!((field.at(node, 0, 0) - 1.0).abs() < 1e-15);
            assert_eq!(field.at(node, 0, 1), 0.0);
            assert_eq!(field.at(node, 1, 0), 0.0);
            assert!((field.at(node, 1, 1) - (-x[0]).exp()).abs() < 1e-15);
        }
        let c = ExprMap::parse_with_vars(&["x1", "x2"], "2, -1").unwrap();
        let field = maurer_cartan_pullback(&g, &c, &grid2(3)).unwrap();
        assert!(field.values().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn pulled_back_curvature_vanishes() {
        let g = euclidean();
        let a = ExprMap::parse_with_vars(&["x1", "x2"], "x1*x2 + sin(x2), x1^2 - x2, exp(x1)*x2").unwrap();
        let f = curvature(&g, &maurer_cartan_pullback(&g, &a, &grid2(4)).unwrap()).unwrap();
        assert!(f.max_abs() < 1e-13);
        let f = curvature(&g, &right_pullback(&g, &a, &grid2(4)).unwrap()).unwrap();
        assert!(f.max_abs() < 1e-13);
    }

    #[test]
    fn free_field_curvature() {
        // A^1 = x2 dx1, A^2 = 0: F^1_12 = -1, F^2_12 = 0.
        let g = affine();
        let field = ExprMap::parse_with_vars(&["x1", "x2"], "x2, 0, 0, 0").unwrap();
        let a = GaugeField::analytic(&g, field, grid2(3)).unwrap();
        let f = curvature(&g, &a).unwrap();
        for node in 0..a.grid().len() {
            assert_eq!(f.get(node, 0, 0, 1), -1.0);
            assert_eq!(f.get(node, 0, 1, 0), 1.0);
            assert_eq!(f.get(node, 1, 0, 1), 0.0);
        }
    }

    #[test]
    fn sampled_curvature_uses_finite_differences() {
        let g = affine();
        let a = ExprMap::parse_with_vars(&["x1", "x2"], "exp(x1*x2), x2 + x1^2").unwrap();
        let pulled = maurer_cartan_pullback(&g, &a, &grid2(9)).unwrap();
        let sampled = GaugeField::sampled(2, grid2(9), pulled.values().to_vec()).unwrap();
        assert!(curvature(&g, &sampled).unwrap().max_abs() < 1e-3);
        let small = GaugeField::sampled(2, grid2(4), vec![vec![0.0; 4]; 16]).unwrap();
        assert!(matches!(curvature(&g, &small), Err(Error::GridTooSmall { required: 5, actual: 4 })));
    }

    #[test]
    fn adjoint_is_a_homomorphism() {
        let g = euclidean();
        assert!(linalg::max_abs_diff(&g.adjoint_matrix(&[0.0; 3]).unwrap(), &linalg::identity(3)) < 1e-15);
        let a = [0.4, -1.0, 0.3];
        let b = [-1.1, 0.2, 0.7];
        let ab = g.compose_at(&a, &b).unwrap();
        let lhs = g.adjoint_matrix(&ab).unwrap();
        let rhs = linalg::mat_mul(&g.adjoint_matrix(&a).unwrap(), &g.adjoint_matrix(&b).unwrap());
        assert!(linalg::max_abs_diff(&lhs, &rhs) < 1e-14);
    }

    #[test]
    fn exp_flow_of_translation_is_exact() {
        let g = euclidean();
        let e = g.exp_flow(&[0.0, 2.0, -1.0], 0.1).unwrap();
        assert!((e[1] - 0.2).abs() < 1e-16 && (e[2] + 0.1).abs() < 1e-16);
    }

    #[test]
    fn gauge_sequence_d_squared() {
        let omega = parse("x1*x2^2, sin(x1)*x3, x2*x3").unwrap();
        let omega = omega.rebind(&["x1", "x2", "x3"]).unwrap();
        let dd = linear_gauge_dd(1, &omega, 1, &[0.3, 0.5, -0.2]).unwrap();
        assert_eq!(dd.len(), 1);
        assert!(dd[0].abs() < 1e-14);
        // d(x2 dx1) = -dx1 ^ dx2
        let f = ExprMap::parse_with_vars(&["x1", "x2"], "x2, 0").unwrap();
        assert_eq!(linear_gauge_d(1, &f, 1, &[0.2, 0.7]).unwrap(), vec![-1.0]);
    }

    #[test]
    fn affine_action_is_injective_from_order_one() {
        let g = affine();
        let lambda = ExprMap::parse_with_vars(&["x1"], "x1^2, sin(x1)").unwrap();
        assert!(matches!(
            spencer_from_action(&g, &lambda, 0, &[vec![0.5]]),
            Err(Error::NotInjectiveYet(0))
        ));
        let s = &spencer_from_action(&g, &lambda, 2, &[vec![0.5]]).unwrap()[0];
        let x: f64 = 0.5;
        assert!((s.section[0] - (x * x * x + x.sin())).abs() < 1e-15);
        assert!((s.section[1] - x * x).abs() < 1e-15);
        assert_eq!(s.section[2], 0.0);
        assert!((s.spencer[0] - (x * 2.0 * x + x.cos())).abs() < 1e-15);
        assert!((s.spencer[1] - 2.0 * x).abs() < 1e-15);
        assert_eq!(s.spencer, s.contracted);
    }

    fn variation_errors(g: &LieGroupSpec, a: &ExprMap, l: &ExprMap, side: Side) -> Vec<f64> {
        let grid = grid2(3);
        let field = match side {
            Side::Left => maurer_cartan_pullback(g, a, &grid).unwrap(),
            Side::Right => right_pullback(g, a, &grid).unwrap(),
        };
        let formula = match side {
            Side::Left => variation_body(g, &field, l).unwrap(),
            Side::Right => variation_space(g, &field, l).unwrap(),
        };
        [1e-3, 5e-4]
            .iter()
            .map(|&eps| {
                grid.points()
                    .iter()
                    .zip(&formula)
                    .map(|(x, f)| {
                        let fd = finite_variation(g, a, l, x, eps, side).unwrap();
                        fd.iter().zip(f).fold(0.0f64, |m, (u, v)| m.max((u - v).abs()))
                    })
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    #[test]
    fn variation_formulas_match_finite_differences() {
        for g in [affine(), euclidean()] {
            let p = g.dim();
            let (a, l) = if p == 2 {
                (
                    ExprMap::parse_with_vars(&["x1", "x2"], "exp(x1*x2), x2 - x1^2").unwrap(),
                    ExprMap::parse_with_vars(&["x1", "x2"], "x1 + x2^2, cos(x1)").unwrap(),
                )
            } else {
                (
                    ExprMap::parse_with_vars(&["x1", "x2"], "x1*x2, x1^2 - x2, sin(x2)").unwrap(),
                    ExprMap::parse_with_vars(&["x1", "x2"], "x2, 1 + x1, x1*x2").unwrap(),
                )
            };
            for side in [Side::Left, Side::Right] {
                let e = variation_errors(&g, &a, &l, side);
                let ratio = e[0] / e[1];
                assert!(e[0] < 1e-2 && (ratio - 2.0).abs() < 0.2, "{} {side:?}: {e:?}", g.name);
            }
        }
    }

    #[test]
    fn body_and_space_residuals_are_dual() {
        let g = euclidean();
        let a = ExprMap::parse_with_vars(&["x1", "x2"], "x1*x2, x1^2 - x2, sin(x2)").unwrap();
        let cal_a = ExprMap::parse_with_vars(&["x1", "x2"], "x1, x2^2, x1*x2, 1, sin(x1), x2").unwrap();
        let grid = grid2(3);
        let field = maurer_cartan_pullback(&g, &a, &grid).unwrap();
        let body = el_body_residual(&g, &field, &cal_a).unwrap();
        for (x, res) in grid.points().iter().zip(&body) {
            let cb = space_density(&g, &a, &cal_a, x, 1).unwrap();
            let div: Vec<f64> = (0..3).map(|s| cb[s * 2].gradient()[0] + cb[s * 2 + 1].gradient()[1]).collect();
            let av = a.eval(x).unwrap();
            let ad = g.adjoint_matrix(&av).unwrap();
            for t in 0..3 {
                let v: f64 = (0..3).map(|s| ad[s][t] * div[s]).sum();
                assert!((v - res[t]).abs() < 1e-12, "{v} vs {}", res[t]);
            }
        }
    }
}
