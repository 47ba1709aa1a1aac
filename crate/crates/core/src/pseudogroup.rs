//! Systems of finite and infinitesimal Lie equations, the Spencer operator
//! and the Lie algebroid bracket on jet sections.
//!
//! Jet coordinates follow [`coordinate_name`]: `y1`, `y1_2`, `y2_11`, ...
//! for finite equations and `xi1`, `xi1_2`, ... for infinitesimal ones,
//! always preceded by the base variables `x1..xn`.

use rand::Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expr::{Expr, ExprMap};
use crate::jet::{coordinate_layout, coordinate_name, Jet, JetSectionSpec};
use crate::linalg;
use crate::poly::{polynomial, random_polynomial, var_names};
use crate::taylor::{multi_binomial, multi_indices_up_to, Dual, MonomialBasis, Series, MAX_SERIES_ORDER};

#[derive(Debug, Clone)]
pub struct LieEquationSystem {
    pub label: String,
    n: usize,
    q: usize,
    phi: ExprMap,
    linear: Option<ExprMap>,
}

#[derive(Deserialize)]
struct SystemDoc {
    n: usize,
    q: usize,
    phi: Vec<String>,
    #[serde(default)]
    linear: Option<Vec<String>>,
    #[serde(default)]
    label: Option<String>,
}

/// Base variables followed by jet coordinate names with `prefix`.
pub fn jet_variables(prefix: &str, n: usize, q: usize) -> Vec<String> {
    let mut v = var_names("x", n);
    v.extend(coordinate_layout(n, n, q).iter().map(|(k, mu)| coordinate_name(prefix, *k, mu)));
    v
}

/// Coordinates of the identity jet `y = x` at `x`.
pub fn identity_jet(x: &[f64], q: usize) -> Vec<f64> {
    let n = x.len();
    coordinate_layout(n, n, q)
        .iter()
        .map(|(k, mu)| {
            let d: usize = mu.iter().map(|&e| e as usize).sum();
            match d {
                0 => x[*k],
                1 if mu[*k] == 1 => 1.0,
                _ => 0.0,
            }
        })
        .collect()
}

/// `det(y^k_i)` as an expression in the first-order jet coordinates.
pub fn jacobian_determinant(prefix: &str, n: usize) -> Expr {
    // Lexicographic permutations with their signs.
    fn perms(rest: &[usize]) -> Vec<(Vec<usize>, f64)> {
        if rest.is_empty() {
            return vec![(Vec::new(), 1.0)];
        }
        let mut out = Vec::new();
        for (pos, &first) in rest.iter().enumerate() {
            let mut tail = rest.to_vec();
            tail.remove(pos);
            let sign = if pos % 2 == 1 { -1.0 } else { 1.0 };
            for (mut p, s) in perms(&tail) {
                p.insert(0, first);
                out.push((p, sign * s));
            }
        }
        out
    }
    let entry = |k: usize, i: usize| {
        let mut mu = vec![0u8; n];
        mu[i] = 1;
        Expr::var(coordinate_name(prefix, k, &mu))
    };
    let all: Vec<usize> = (0..n).collect();
    let mut acc: Option<Expr> = None;
    for (p, s) in perms(&all) {
        let prod = Expr::product((0..n).map(|k| entry(k, p[k])));
        acc = Some(match (acc, s > 0.0) {
            (None, true) => prod,
            (None, false) => -prod,
            (Some(a), true) => a + prod,
            (Some(a), false) => a - prod,
        });
    }
    acc.unwrap_or_else(|| Expr::num(1.0))
}

impl LieEquationSystem {
    /// Build from expression lists over [`jet_variables`]`("y")` and
    /// [`jet_variables`]`("xi")`; without `linear` the linearization is taken
    /// from `phi` by forward-mode differentiation at the identity jet.
    pub fn new(label: &str, n: usize, q: usize, phi: &[String], linear: Option<&[String]>) -> Result<Self> {
        if q > crate::jet::MAX_JET_ORDER {
            return Err(Error::OrderTooHigh {
                requested: q,
                cap: crate::jet::MAX_JET_ORDER,
            });
        }
        let phi = ExprMap::parse_with_vars(&jet_variables("y", n, q), &phi.join(", "))?;
        let linear = match linear {
            None => None,
            Some(l) => {
                let m = ExprMap::parse_with_vars(&jet_variables("xi", n, q), &l.join(", "))?;
                if m.n_outputs() != phi.n_outputs() {
                    return Err(Error::DimensionMismatch(format!(
                        "{} finite equations but {} linearized ones",
                        phi.n_outputs(),
                        m.n_outputs()
                    )));
                }
                Some(m)
            }
        };
        Ok(LieEquationSystem {
            label: label.to_string(),
            n,
            q,
            phi,
            linear,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SystemDoc = serde_json::from_str(text)?;
        LieEquationSystem::new(
            doc.label.as_deref().unwrap_or("system"),
            doc.n,
            doc.q,
            &doc.phi,
            doc.linear.as_deref(),
        )
    }

    fn from_strs(label: &str, n: usize, q: usize, phi: &[&str], linear: &[&str]) -> Self {
        let phi: Vec<String> = phi.iter().map(|s| s.to_string()).collect();
        let linear: Vec<String> = linear.iter().map(|s| s.to_string()).collect();
        LieEquationSystem::new(label, n, q, &phi, Some(&linear)).expect("built-in system is well formed")
    }

    /// `y_xx = 0`.
    pub fn affine() -> Self {
        Self::from_strs("affine", 1, 2, &["y1_11"], &["xi1_11"])
    }

    /// Schwarzian `y_xxx / y_x - 3/2 (y_xx / y_x)^2 = 0`.
    pub fn projective() -> Self {
        Self::from_strs(
            "projective",
            1,
            3,
            &["y1_111/y1_1 - 1.5*(y1_11/y1_1)^2"],
            &["xi1_111"],
        )
    }

    /// `det(y^k_i) = 1`.
    pub fn volume(n: usize) -> Self {
        let det = format!("{} - 1", jacobian_determinant("y", n));
        let trace = Expr::sum((0..n).map(|k| {
            let mut mu = vec![0u8; n];
            mu[k] = 1;
            Expr::var(coordinate_name("xi", k, &mu))
        }));
        Self::from_strs(&format!("volume{n}"), n, 1, &[det.as_str()], &[trace.to_string().as_str()])
    }

    /// `y1_2 = 0, y2 y1_1 = x2` together with the implied `det = 1`.
    pub fn example4() -> Self {
        Self::from_strs(
            "example4",
            2,
            1,
            &["y1_2", "y2*y1_1 - x2", "y1_1*y2_2 - y1_2*y2_1 - 1"],
            &["xi1_2", "x2*xi1_1 + xi2", "xi1_1 + xi2_2"],
        )
    }

    /// `y1 y2_2 - y2 y1_2 = x1, y1 y2_1 - y2 y1_1 = -x2` with the implied
    /// `det = 1`: the pseudogroup preserving `(x1 dx2 - x2 dx1, dx1 ^ dx2)`.
    pub fn example4_prime() -> Self {
        Self::from_strs(
            "example4_prime",
            2,
            1,
            &[
                "y1*y2_2 - y2*y1_2 - x1",
                "y1*y2_1 - y2*y1_1 + x2",
                "y1_1*y2_2 - y1_2*y2_1 - 1",
            ],
            &["xi1 + x1*xi2_2 - x2*xi1_2", "x1*xi2_1 - xi2 - x2*xi1_1", "xi1_1 + xi2_2"],
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn equations(&self) -> usize {
        self.phi.n_outputs()
    }

    pub fn phi(&self) -> &ExprMap {
        &self.phi
    }

    pub fn linear(&self) -> Option<&ExprMap> {
        self.linear.as_ref()
    }

    fn check_point(&self, x: &[f64], coords: &[f64]) -> Result<()> {
        let expected = coordinate_layout(self.n, self.n, self.q).len();
        if x.len() != self.n || coords.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "system `{}` needs a point in R^{} and {expected} jet coordinates",
                self.label, self.n
            )));
        }
        Ok(())
    }

    /// `Phi^tau(x, y_q)`.
    pub fn finite_residual(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x, y)?;
        let mut v = x.to_vec();
        v.extend_from_slice(y);
        self.phi.eval(&v)
    }

    /// `L^tau(x, xi_q)`.
    pub fn linear_residual(&self, x: &[f64], xi: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x, xi)?;
        match &self.linear {
            Some(l) => {
                let mut v = x.to_vec();
                v.extend_from_slice(xi);
                l.eval(&v)
            }
            None => {
                let coeffs = self.linear_coefficients(x)?;
                Ok(coeffs
                    .iter()
                    .map(|row| row.iter().zip(xi).map(|(a, b)| a * b).sum())
                    .collect())
            }
        }
    }

    /// `dPhi^tau / dy_c` at the identity jet over `x`.
    pub fn linear_coefficients(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let s = self.linear_coefficient_series(x, 0)?;
        Ok(s.iter().map(|r| r.iter().map(Series::value).collect()).collect())
    }

    /// Coefficients `a^tau_c(x)` of the linearized equations
    /// `L^tau = a^tau_c(x) xi_c`, expanded at `x` to `order`: taken from the
    /// declared linear equations when present, otherwise from `Phi`.
    pub fn linear_coefficient_series(&self, x: &[f64], order: usize) -> Result<Vec<Vec<Series>>> {
        let n = self.n;
        let layout = coordinate_layout(n, n, self.q);
        let c = layout.len();
        let xs: Vec<Dual<Series>> = (0..n)
            .map(|i| Dual::constant(Series::variable(n, order, i, x[i]), c))
            .collect();
        let (map, centre) = match &self.linear {
            Some(l) => (l, vec![0.0; c]),
            None => (&self.phi, identity_jet(x, self.q)),
        };
        let mut inputs = xs;
        for (slot, (k, mu)) in layout.iter().enumerate() {
            let mut v = Series::constant(n, order, centre[slot]);
            // The identity jet depends on x through its order-0 part.
            if self.linear.is_none() && mu.iter().all(|&e| e == 0) && order >= 1 {
                v = Series::variable(n, order, *k, x[*k]);
            }
            inputs.push(Dual::seed(v, slot, c));
        }
        let proto = Dual::constant(Series::zero(n, order), c);
        let out = map.eval_generic(&inputs, &proto)?;
        Ok(out.into_iter().map(|d| d.tangent).collect())
    }

    /// Max over `points` of `|L - (Phi(id + eps xi) - Phi(id - eps xi)) / 2 eps|`
    /// for random `xi`: the declared linearization against central
    /// differences of the finite equations.
    pub fn linearization_gap<R: Rng>(&self, points: &[Vec<f64>], eps: f64, rng: &mut R) -> Result<f64> {
        let mut worst = 0.0f64;
        for x in points {
            let id = identity_jet(x, self.q);
            let xi: Vec<f64> = id.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
            let plus: Vec<f64> = id.iter().zip(&xi).map(|(a, b)| a + eps * b).collect();
            let minus: Vec<f64> = id.iter().zip(&xi).map(|(a, b)| a - eps * b).collect();
            let fp = self.finite_residual(x, &plus)?;
            let fm = self.finite_residual(x, &minus)?;
            let l = self.linear_residual(x, &xi)?;
            for t in 0..l.len() {
                worst = worst.max((l[t] - (fp[t] - fm[t]) / (2.0 * eps)).abs());
            }
        }
        Ok(worst)
    }
}

/// Max over `points` of `|Phi^tau(x, f_q(x))|`.
pub fn check_finite_section(sys: &LieEquationSystem, f: &JetSectionSpec, points: &[Vec<f64>]) -> Result<f64> {
    if f.order() != sys.q() || f.base_dim() != sys.n() || f.target_dim() != sys.n() {
        return Err(Error::OrderMismatch(format!(
            "section of order {} over R^{} for an order-{} system over R^{}",
            f.order(),
            f.base_dim(),
            sys.q(),
            sys.n()
        )));
    }
    let mut worst = 0.0f64;
    for x in points {
        let y = f.coordinates_at(x)?;
        for r in sys.finite_residual(x, &y)? {
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}

/// A section `xi_q` of `J_q(T)`, optionally with a lift `xi_{q+1}`; only the
/// top-order coordinates of the lift are used.
#[derive(Debug, Clone)]
pub struct AlgebroidSection {
    pub section: JetSectionSpec,
    pub lift: Option<JetSectionSpec>,
}

impl AlgebroidSection {
    pub fn new(section: JetSectionSpec) -> Self {
        AlgebroidSection { section, lift: None }
    }

    pub fn with_lift(mut self, lift: JetSectionSpec) -> Result<Self> {
        if lift.order() != self.section.order() + 1 || lift.base_dim() != self.section.base_dim() {
            return Err(Error::OrderMismatch(format!(
                "lift of order {} for a section of order {}",
                lift.order(),
                self.section.order()
            )));
        }
        self.lift = Some(lift);
        Ok(self)
    }

    /// Holonomic section `j_q(field)` with lift `j_{q+1}(field)`.
    pub fn holonomic(field: ExprMap, q: usize) -> Result<Self> {
        AlgebroidSection::new(JetSectionSpec::holonomic(q, field.clone())?)
            .with_lift(JetSectionSpec::holonomic(q + 1, field)?)
    }

    pub fn order(&self) -> usize {
        self.section.order()
    }

    pub fn n(&self) -> usize {
        self.section.base_dim()
    }

    /// All coordinates through order `q + 1` as series in `x` of order `s`,
    /// laid out per component in the order-`q+1` basis; top-order entries
    /// are zero without a lift.
    fn gather(&self, x: &[f64], s: usize, need_lift: bool) -> Result<Vec<Series>> {
        let (n, q) = (self.n(), self.order());
        if self.section.target_dim() != n {
            return Err(Error::DimensionMismatch("sections must be vector-field jets".into()));
        }
        if need_lift && self.lift.is_none() {
            return Err(Error::MissingLift(q + 1));
        }
        let low = self.section.coordinate_series(x, s)?;
        let top = match &self.lift {
            Some(l) => Some(l.coordinate_series(x, s)?),
            None => None,
        };
        let len_q = multi_indices_up_to(n, q).len();
        let len_full = multi_indices_up_to(n, q + 1).len();
        let mut out = Vec::with_capacity(n * len_full);
        for k in 0..n {
            for j in 0..len_full {
                out.push(if j < len_q {
                    low[k * len_q + j].clone()
                } else {
                    match &top {
                        Some(t) => t[k * len_full + j].clone(),
                        None => Series::zero(n, s),
                    }
                });
            }
        }
        Ok(out)
    }
}

/// `D xi_{q+1}` components `d_i xi^k_mu - xi^k_{mu + 1_i}` for `|mu| <= q`,
/// as series of order `s - 1`; index `i * (n * len_q) + k * len_q + mu`.
fn spencer_core(n: usize, q: usize, xi: &[Series]) -> Vec<Series> {
    let basis = MonomialBasis::get(n, q + 1);
    let len_q = basis.len_up_to(q);
    let len_full = basis.len();
    let mut out = Vec::with_capacity(n * n * len_q);
    for i in 0..n {
        for k in 0..n {
            for m in 0..len_q {
                let mut up = basis.exponent(m).to_vec();
                up[i] += 1;
                let j = basis.index_of(&up).expect("raised index within order q+1");
                out.push(&xi[k * len_full + m].partial(i) - &xi[k * len_full + j]);
            }
        }
    }
    out
}

/// `[xi_q, eta_q] = {xi_{q+1}, eta_{q+1}} + i(xi) D eta_{q+1} - i(eta) D xi_{q+1}`
/// on series inputs in the full order-`q+1` layout.
fn bracket_core(n: usize, q: usize, xi: &[Series], eta: &[Series]) -> Vec<Series> {
    let basis = MonomialBasis::get(n, q + 1);
    let len_q = basis.len_up_to(q);
    let len_full = basis.len();
    let d_xi = spencer_core(n, q, xi);
    let d_eta = spencer_core(n, q, eta);
    let at = |v: &[Series], k: usize, mu: &[u8]| -> Series {
        v[k * len_full + basis.index_of(mu).expect("index within order q+1")].clone()
    };
    let s = xi[0].order().min(eta[0].order());
    let lambdas = multi_indices_up_to(n, q);
    let mut out = Vec::with_capacity(n * len_q);
    for k in 0..n {
        for m in 0..len_q {
            let mu = basis.exponent(m);
            let mut acc = Series::zero(n, s);
            for lam in lambdas.iter().filter(|l| l.iter().zip(mu).all(|(a, b)| a <= b)) {
                let c = multi_binomial(mu, lam);
                let nu: Vec<u8> = mu.iter().zip(lam).map(|(a, b)| a - b).collect();
                for r in 0..n {
                    let mut up = nu.clone();
                    up[r] += 1;
                    let t1 = &at(xi, r, lam) * &at(eta, k, &up);
                    let t2 = &at(eta, r, lam) * &at(xi, k, &up);
                    acc.axpy(c, &t1);
                    acc.axpy(-c, &t2);
                }
            }
            let mut acc = acc.truncate(s.saturating_sub(1));
            for r in 0..n {
                let slot = r * n * len_q + k * len_q + m;
                let zero = vec![0u8; n];
                let t1 = &at(xi, r, &zero) * &d_eta[slot];
                let t2 = &at(eta, r, &zero) * &d_xi[slot];
                acc = &(&acc + &t1) - &t2;
            }
            out.push(acc);
        }
    }
    out
}

/// Spencer operator of a section with lift at `x`; layout as in
/// [`spencer_core`].
pub fn spencer(sec: &AlgebroidSection, x: &[f64]) -> Result<Vec<f64>> {
    let xi = sec.gather(x, 1, true)?;
    Ok(spencer_core(sec.n(), sec.order(), &xi).iter().map(Series::value).collect())
}

fn check_pair(a: &AlgebroidSection, b: &AlgebroidSection) -> Result<()> {
    if a.order() != b.order() || a.n() != b.n() {
        return Err(Error::OrderMismatch(format!(
            "bracket of sections of orders {} and {}",
            a.order(),
            b.order()
        )));
    }
    Ok(())
}

/// Jet coordinates of `[xi_q, eta_q]` at `x` (layout as [`coordinate_layout`]).
pub fn algebroid_bracket(a: &AlgebroidSection, b: &AlgebroidSection, x: &[f64]) -> Result<Vec<f64>> {
    check_pair(a, b)?;
    let xi = a.gather(x, 1, true)?;
    let eta = b.gather(x, 1, true)?;
    Ok(bracket_core(a.n(), a.order(), &xi, &eta).iter().map(Series::value).collect())
}

/// The bracket computed with zero lifts, as series of order `s` at `x`.
pub fn bracket_series(a: &AlgebroidSection, b: &AlgebroidSection, x: &[f64], s: usize) -> Result<Vec<Series>> {
    check_pair(a, b)?;
    let xi = a.gather(x, s + 1, false)?;
    let eta = b.gather(x, s + 1, false)?;
    Ok(bracket_core(a.n(), a.order(), &xi, &eta))
}

fn pad_top(n: usize, q: usize, coords: &[Series]) -> Vec<Series> {
    let len_q = multi_indices_up_to(n, q).len();
    let len_full = multi_indices_up_to(n, q + 1).len();
    let (nv, s) = (coords[0].nvars(), coords[0].order());
    let mut out = Vec::with_capacity(n * len_full);
    for k in 0..n {
        for j in 0..len_full {
            out.push(if j < len_q {
                coords[k * len_q + j].clone()
            } else {
                Series::zero(nv, s)
            });
        }
    }
    out
}

/// `[[a, b], c] + [[b, c], a] + [[c, a], b]` at `x` (max abs component).
pub fn jacobi_residual(a: &AlgebroidSection, b: &AlgebroidSection, c: &AlgebroidSection, x: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    check_pair(b, c)?;
    let (n, q) = (a.n(), a.order());
    let ga = a.gather(x, 2, false)?;
    let gb = b.gather(x, 2, false)?;
    let gc = c.gather(x, 2, false)?;
    let ab = pad_top(n, q, &bracket_core(n, q, &ga, &gb));
    let bc = pad_top(n, q, &bracket_core(n, q, &gb, &gc));
    let ca = pad_top(n, q, &bracket_core(n, q, &gc, &ga));
    let t1 = bracket_core(n, q, &ab, &gc);
    let t2 = bracket_core(n, q, &bc, &ga);
    let t3 = bracket_core(n, q, &ca, &gb);
    Ok(t1
        .iter()
        .zip(&t2)
        .zip(&t3)
        .fold(0.0f64, |m, ((u, v), w)| m.max((u.value() + v.value() + w.value()).abs())))
}

/// Random polynomial section of `R_q`: coefficients of degree `degree`
/// around the origin, constrained by matching the Taylor coefficients of
/// the linearized equations at the origin (exact for polynomial
/// coefficients of degree `< 2`, i.e. every built-in system).
pub fn random_section<R: Rng>(sys: &LieEquationSystem, degree: usize, rng: &mut R) -> Result<JetSectionSpec> {
    let n = sys.n();
    let q = sys.q();
    let layout = coordinate_layout(n, n, q);
    let monos = multi_indices_up_to(n, degree);
    let order = (degree + 2).min(MAX_SERIES_ORDER);
    let origin = vec![0.0; n];
    let coeffs = sys.linear_coefficient_series(&origin, order)?;
    let basis = MonomialBasis::get(n, order);
    let unknowns = layout.len() * monos.len();
    let mut rows = vec![vec![0.0; unknowns]; coeffs.len() * basis.len()];
    for (c, _) in layout.iter().enumerate() {
        for (b, beta) in monos.iter().enumerate() {
            let mut mono = Series::zero(n, order);
            mono.coeffs_mut()[basis.index_of(beta).expect("monomial within order")] = 1.0;
            for (t, row) in coeffs.iter().enumerate() {
                let contrib = &row[c] * &mono;
                for (j, v) in contrib.coeffs().iter().enumerate() {
                    rows[t * basis.len() + j][c * monos.len() + b] = *v;
                }
            }
        }
    }
    let kernel = linalg::null_space(&rows, unknowns, 1e-11);
    if kernel.is_empty() {
        return Err(Error::InvalidParameter(format!("system `{}` admits no polynomial sections", sys.label)));
    }
    let weights: Vec<f64> = kernel.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut sol = vec![0.0; unknowns];
    for (w, v) in weights.iter().zip(&kernel) {
        for (s, x) in sol.iter_mut().zip(v) {
            *s += w * x;
        }
    }
    let scale = sol.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    let x = var_names("x", n);
    let exprs: Vec<Expr> = sol
        .chunks(monos.len())
        .map(|cs| {
            let cs: Vec<f64> = cs
                .iter()
                .map(|c| {
                    let v = c / scale;
                    if v.abs() < 1e-14 {
                        0.0
                    } else {
                        v
                    }
                })
                .collect();
            polynomial(&x, degree, &cs)
        })
        .collect();
    JetSectionSpec::explicit(q, n, ExprMap::new(&x, exprs)?)
}

/// Random lift of an explicit section: same lower-order coordinates, random
/// polynomial top-order coordinates.
pub fn random_lift<R: Rng>(section: &JetSectionSpec, degree: usize, rng: &mut R) -> Result<JetSectionSpec> {
    let (n, q) = (section.base_dim(), section.order());
    let x = var_names("x", n);
    let low: Vec<Expr> = match section {
        JetSectionSpec::Explicit { coords, .. } => coords.outputs().to_vec(),
        JetSectionSpec::Holonomic { .. } => {
            return Err(Error::InvalidParameter("random lifts are built for explicit sections".into()))
        }
    };
    let len_q = multi_indices_up_to(n, q).len();
    let len_full = multi_indices_up_to(n, q + 1).len();
    let mut exprs = Vec::with_capacity(n * len_full);
    for k in 0..n {
        for j in 0..len_full {
            exprs.push(if j < len_q {
                low[k * len_q + j].clone()
            } else {
                random_polynomial(&x, degree, 1.0, rng)
            });
        }
    }
    JetSectionSpec::explicit(q + 1, n, ExprMap::new(&x, exprs)?)
}

/// Outcome of [`closure_check`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClosureReport {
    pub trials: usize,
    pub evaluations: usize,
    /// Max `|L(x, xi(x))|` over the generated sections.
    pub max_section_residual: f64,
    /// Max `|L(x, [xi, eta](x))|`.
    pub max_violation: f64,
    /// Max change of the bracket under a second choice of lifts.
    pub max_lift_gap: f64,
    /// Max `|[xi, eta] + [eta, xi]|`.
    pub max_antisymmetry: f64,
    /// Max Jacobi residual over section triples.
    pub max_jacobi: f64,
}

/// Bracket closure `[R_q, R_q] in R_q` on random section pairs.
pub fn closure_check<R: Rng>(
    sys: &LieEquationSystem,
    trials: usize,
    points: &[Vec<f64>],
    rng: &mut R,
) -> Result<ClosureReport> {
    const DEGREE: usize = 2;
    let mut rep = ClosureReport {
        trials,
        ..Default::default()
    };
    for _ in 0..trials {
        let mut secs = Vec::new();
        for _ in 0..3 {
            let s = random_section(sys, DEGREE, rng)?;
            let lift = random_lift(&s, DEGREE, rng)?;
            secs.push((s, lift));
        }
        let alt_lift = random_lift(&secs[0].0, DEGREE, rng)?;
        let with = |i: usize| AlgebroidSection::new(secs[i].0.clone()).with_lift(secs[i].1.clone());
        let (a, b, c) = (with(0)?, with(1)?, with(2)?);
        let a_alt = AlgebroidSection::new(secs[0].0.clone()).with_lift(alt_lift)?;
        for x in points {
            for (s, _) in &secs {
                for r in sys.linear_residual(x, &s.coordinates_at(x)?)? {
                    rep.max_section_residual = rep.max_section_residual.max(r.abs());
                }
            }
            let ab = algebroid_bracket(&a, &b, x)?;
            let ab_alt = algebroid_bracket(&a_alt, &b, x)?;
            let ba = algebroid_bracket(&b, &a, x)?;
            for r in sys.linear_residual(x, &ab)? {
                rep.max_violation = rep.max_violation.max(r.abs());
            }
            for ((u, v), w) in ab.iter().zip(&ab_alt).zip(&ba) {
                rep.max_lift_gap = rep.max_lift_gap.max((u - v).abs());
                rep.max_antisymmetry = rep.max_antisymmetry.max((u + w).abs());
            }
            rep.max_jacobi = rep.max_jacobi.max(jacobi_residual(&a, &b, &c, x)?);
            rep.evaluations += 1;
        }
    }
    Ok(rep)
}

/// Schwarzian `z'''/z' - 3/2 (z''/z')^2` of a one-dimensional jet of order
/// at least 3.
pub fn schwarzian(z: &Jet) -> Result<f64> {
    if z.source_dim() != 1 || z.target_dim() != 1 || z.order() < 3 {
        return Err(Error::DimensionMismatch("the Schwarzian needs a 1D jet of order >= 3".into()));
    }
    let d1 = z.derivative(0, &[1]);
    let d2 = z.derivative(0, &[2]);
    let d3 = z.derivative(0, &[3]);
    let scale = d1.abs().max(d2.abs()).max(d3.abs());
    if d1.abs() <= 1e-12 * scale.max(1.0) {
        return Err(Error::SingularJet(format!("z' = {d1:e}")));
    }
    Ok(d3 / d1 - 1.5 * (d2 / d1).powi(2))
}

/// `((S(z_eps) - S(z)) / eps, z'^2 eta'''(z))` at `y0` for the family
/// `z_eps = z + eps eta(z)`.
pub fn schwarzian_variation_check(z: &ExprMap, eta: &ExprMap, y0: f64, eps: f64) -> Result<(f64, f64)> {
    let zj = z.taylor_lift(&[y0], 3)?;
    let z0 = zj.value()[0];
    let ej = eta.taylor_lift(&[z0], 3)?;
    let mut outer = Series::variable(1, 3, 0, z0);
    outer.axpy(eps, &ej.components()[0]);
    let moved = Jet::from_series(vec![z0], vec![outer])?.compose(&zj)?;
    let lhs = (schwarzian(&moved)? - schwarzian(&zj)?) / eps;
    let rhs = zj.derivative(0, &[1]).powi(2) * ej.derivative(0, &[3]);
    Ok((lhs, rhs))
}

/// `d alpha - 2 beta` at `x` for `alpha = x1 dx2 - x2 dx1`,
/// `beta = dx1 ^ dx2`: the integrability condition of the geometric object
/// preserved by [`LieEquationSystem::example4_prime`].
pub fn example4_object_gap(x: &[f64]) -> Result<f64> {
    let alpha = ExprMap::parse_with_vars(&["x1", "x2"], "-x2, x1")?;
    let s = alpha.taylor_lift(x, 1)?;
    let d = crate::lie_group::exterior_derivative(s.components(), 2, 1);
    Ok((d[0].value() - 2.0).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::sampling::{rng, SampleBox};

    fn explicit(n: usize, q: usize, text: &str) -> JetSectionSpec {
        JetSectionSpec::explicit(q, n, ExprMap::parse_with_vars(&var_names("x", n), text).unwrap()).unwrap()
    }

    #[test]
    fn determinant_expression() {
        let d = jacobian_determinant("y", 2).to_string();
        assert_eq!(d, "y1_1*y2_2 - y1_2*y2_1");
        let m = ExprMap::parse_with_vars(&jet_variables("y", 3, 1)[3..].iter().filter(|v| v.contains('_')).cloned().collect::<Vec<_>>(), &jacobian_determinant("y", 3).to_string()).unwrap();
        // rows (y1_1, y1_2, y1_3), ...
        let v = m.eval(&[2.0, 0.0, 1.0, 1.0, 3.0, 0.0, 0.0, 1.0, 4.0]).unwrap()[0];
        assert_eq!(v, 2.0 * 12.0 - 0.0 + 1.0 * 1.0);
    }

    #[test]
    fn identity_satisfies_every_builtin() {
        for sys in [
            LieEquationSystem::affine(),
            LieEquationSystem::projective(),
            LieEquationSystem::volume(2),
            LieEquationSystem::volume(3),
            LieEquationSystem::example4(),
            LieEquationSystem::example4_prime(),
        ] {
            let pts = SampleBox::cube(sys.n(), -1.0, 1.0).points(5, 1);
            for x in &pts {
                let r = sys.finite_residual(x, &identity_jet(x, sys.q())).unwrap();
                assert!(r.iter().all(|v| v.abs() < 1e-15), "{}", sys.label);
            }
            assert!(sys.linearization_gap(&pts, 1e-5, &mut rng(3)).unwrap() < 1e-8, "{}", sys.label);
        }
    }

    #[test]
    fn finite_sections() {
        let pts = SampleBox::cube(2, 0.5, 1.5).points(6, 2);
        let shear = JetSectionSpec::holonomic(1, ExprMap::parse_with_vars(&["x1", "x2"], "x1 + x2, x2").unwrap()).unwrap();
        assert_eq!(check_finite_section(&LieEquationSystem::volume(2), &shear, &pts).unwrap(), 0.0);
        let gauged = JetSectionSpec::holonomic(1, ExprMap::parse_with_vars(&["x1", "x2"], "2*x1, x2/2").unwrap()).unwrap();
        assert_eq!(check_finite_section(&LieEquationSystem::example4(), &gauged, &pts).unwrap(), 0.0);
        let pts1 = SampleBox::cube(1, 0.0, 2.0).points(6, 2);
        let mobius = JetSectionSpec::holonomic(3, ExprMap::parse_with_vars(&["x1"], "(2*x1 + 1)/(x1 + 1)").unwrap()).unwrap();
        assert!(check_finite_section(&LieEquationSystem::projective(), &mobius, &pts1).unwrap() < 1e-13);
    }

    #[test]
    fn spencer_examples() {
        let s = AlgebroidSection::holonomic(parse("x1^3 - x1").unwrap(), 2).unwrap();
        assert!(spencer(&s, &[0.7]).unwrap().iter().all(|v| v.abs() < 1e-14));
        let s = AlgebroidSection::new(explicit(1, 0, "0")).with_lift(explicit(1, 1, "0, 1")).unwrap();
        assert_eq!(spencer(&s, &[0.3]).unwrap(), vec![-1.0]);
        assert!(matches!(spencer(&AlgebroidSection::new(explicit(1, 0, "0")), &[0.3]), Err(Error::MissingLift(1))));
    }

    #[test]
    fn affine_generators_bracket() {
        let xi = AlgebroidSection::new(explicit(1, 2, "x1, 1, 0")).with_lift(explicit(1, 3, "x1, 1, 0, 0")).unwrap();
        let eta = AlgebroidSection::new(explicit(1, 2, "1, 0, 0")).with_lift(explicit(1, 3, "1, 0, 0, 0")).unwrap();
        assert_eq!(algebroid_bracket(&xi, &eta, &[0.4]).unwrap(), vec![-1.0, 0.0, 0.0]);
        assert_eq!(algebroid_bracket(&xi, &xi, &[0.4]).unwrap(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn holonomic_bracket_is_vector_field_bracket() {
        // [x1^2 d1 + x2 d2, sin(x2) d1 + x1 x2 d2]
        let a = AlgebroidSection::holonomic(ExprMap::parse_with_vars(&["x1", "x2"], "x1^2, x2").unwrap(), 2).unwrap();
        let b = AlgebroidSection::holonomic(ExprMap::parse_with_vars(&["x1", "x2"], "sin(x2), x1*x2").unwrap(), 2).unwrap();
        let field = ExprMap::parse_with_vars(
            &["x1", "x2"],
            "x2*cos(x2) - sin(x2)*2*x1, x1^2*x2 + x2*x1 - x1*x2",
        )
        .unwrap();
        let x = [0.3, -0.8];
        let got = algebroid_bracket(&a, &b, &x).unwrap();
        let want = field.taylor_lift(&x, 2).unwrap().coordinates();
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-14, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn example3_trace_formula() {
        let mut r = rng(11);
        let sys = LieEquationSystem::volume(2);
        let a = random_section(&sys, 2, &mut r).unwrap();
        let b = random_section(&sys, 2, &mut r).unwrap();
        let la = random_lift(&a, 2, &mut r).unwrap();
        let lb = random_lift(&b, 2, &mut r).unwrap();
        let x = [0.2, 0.6];
        let br = algebroid_bracket(
            &AlgebroidSection::new(a.clone()).with_lift(la).unwrap(),
            &AlgebroidSection::new(b.clone()).with_lift(lb).unwrap(),
            &x,
        )
        .unwrap();
        // ([xi, eta])^k_i = xi^r_i eta^k_r - eta^r_i xi^k_r + xi^r d_r eta^k_i - eta^r d_r xi^k_i
        let sa = a.coordinate_series(&x, 1).unwrap();
        let sb = b.coordinate_series(&x, 1).unwrap();
        let at = |s: &[Series], k: usize, j: usize| s[k * 3 + j].clone();
        let mut trace = 0.0;
        for k in 0..2 {
            for i in 0..2 {
                let mut v = 0.0;
                for r in 0..2 {
                    v += at(&sa, r, 1 + i).value() * at(&sb, k, 1 + r).value()
                        - at(&sb, r, 1 + i).value() * at(&sa, k, 1 + r).value()
                        + at(&sa, r, 0).value() * at(&sb, k, 1 + i).gradient()[r]
                        - at(&sb, r, 0).value() * at(&sa, k, 1 + i).gradient()[r];
                }
                assert!((v - br[k * 3 + 1 + i]).abs() < 1e-13);
                if k == i {
                    trace += v;
                }
            }
        }
        assert!(trace.abs() < 1e-12);
    }

    #[test]
    fn closure_on_builtin_systems() {
        for sys in [
            LieEquationSystem::affine(),
            LieEquationSystem::projective(),
            LieEquationSystem::volume(2),
            LieEquationSystem::example4(),
            LieEquationSystem::example4_prime(),
        ] {
            let pts = SampleBox::cube(sys.n(), -1.0, 1.0).points(4, 5);
            let rep = closure_check(&sys, 3, &pts, &mut rng(9)).unwrap();
            assert!(rep.max_section_residual < 1e-12, "{} {rep:?}", sys.label);
            assert!(rep.max_violation < 1e-9, "{} {rep:?}", sys.label);
            assert!(rep.max_lift_gap < 1e-10, "{} {rep:?}", sys.label);
            assert!(rep.max_antisymmetry < 1e-12, "{} {rep:?}", sys.label);
            assert!(rep.max_jacobi < 1e-8, "{} {rep:?}", sys.label);
        }
    }

    #[test]
    fn derived_linearization_matches_declared() {
        let declared = LieEquationSystem::example4_prime();
        let phi: Vec<String> = declared.phi().outputs().iter().map(|e| e.to_string()).collect();
        let derived = LieEquationSystem::new("derived", 2, 1, &phi, None).unwrap();
        let x = [0.3, -0.9];
        let xi = [0.1, 0.5, -0.2, 0.7, 0.4, 1.1];
        let a = declared.linear_residual(&x, &xi).unwrap();
        let b = derived.linear_residual(&x, &xi).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-15);
        }
    }

    #[test]
    fn schwarzian_values() {
        let exp = parse("exp(y)").unwrap().taylor_lift(&[0.0], 3).unwrap();
        assert!((schwarzian(&exp).unwrap() + 0.5).abs() < 1e-15);
        let id = parse("y").unwrap().taylor_lift(&[0.3], 3).unwrap();
        assert_eq!(schwarzian(&id).unwrap(), 0.0);
        let mob = parse("(2*y + 1)/(y + 1)").unwrap().taylor_lift(&[0.5], 3).unwrap();
        assert!(schwarzian(&mob).unwrap().abs() < 1e-14);
        let flat = parse("y^3").unwrap().taylor_lift(&[0.0], 3).unwrap();
        assert!(matches!(schwarzian(&flat), Err(Error::SingularJet(_))));
    }

    #[test]
    fn schwarzian_variation() {
        let z = parse("exp(y)").unwrap();
        let eta = parse("z^3").unwrap();
        let (l1, r) = schwarzian_variation_check(&z, &eta, 0.2, 1e-3).unwrap();
        let (l2, _) = schwarzian_variation_check(&z, &eta, 0.2, 5e-4).unwrap();
        let zp = 0.2f64.exp();
        assert!((r - 6.0 * zp * zp).abs() < 1e-13);
        let ratio = (l1 - r).abs() / (l2 - r).abs();
        assert!((ratio - 2.0).abs() < 0.2, "{l1} {l2} {r}");
        for gen in ["1", "z", "z^2"] {
            let (l, r) = schwarzian_variation_check(&z, &parse(gen).unwrap().rebind(&["z"]).unwrap(), 0.2, 1e-3).unwrap();
            assert_eq!(r, 0.0);
            // first-order invariance: the difference quotient is O(eps)
            assert!(l.abs() < 1e-2, "{gen}: {l}");
        }
    }

    #[test]
    fn geometric_object_integrability() {
        assert!(example4_object_gap(&[0.3, 0.8]).unwrap() < 1e-15);
    }
}
