//! Jets of maps `R^n -> R^m`: truncated Taylor data at a base point.
//!
//! Public coordinates are raw derivatives `d^mu f^k(x)`, listed component by
//! component and, within a component, in the graded order of
//! [`MonomialBasis`](crate::taylor::MonomialBasis).

use crate::error::{Error, Result};
use crate::expr::ExprMap;
use crate::linalg;
use crate::taylor::{multi_factorial, multi_indices_up_to, MultiIndex, Series};

/// Largest jet order accepted by the public API.
pub const MAX_JET_ORDER: usize = 6;

fn check_order(q: usize) -> Result<()> {
    if q > MAX_JET_ORDER {
        return Err(Error::OrderTooHigh {
            requested: q,
            cap: MAX_JET_ORDER,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    base: Vec<f64>,
    components: Vec<Series>,
}

impl Jet {
    /// Assemble from per-component series expanded at `base`.
    pub fn from_series(base: Vec<f64>, components: Vec<Series>) -> Result<Jet> {
        let order = components.first().map_or(0, Series::order);
        check_order(order)?;
        for s in &components {
            if s.nvars() != base.len() {
                return Err(Error::DimensionMismatch(format!(
                    "series in {} variables at a base point of dimension {}",
                    s.nvars(),
                    base.len()
                )));
            }
            if s.order() != order {
                return Err(Error::OrderMismatch(format!(
                    "components of orders {order} and {}",
                    s.order()
                )));
            }
        }
        Ok(Jet { base, components })
    }

    /// Build from raw derivative coordinates laid out as in [`Jet::coordinates`].
    pub fn from_coordinates(base: Vec<f64>, target_dim: usize, order: usize, coords: &[f64]) -> Result<Jet> {
        check_order(order)?;
        let n = base.len();
        let idx = multi_indices_up_to(n, order);
        if coords.len() != target_dim * idx.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} jet coordinates, got {}",
                target_dim * idx.len(),
                coords.len()
            )));
        }
        let components = coords
            .chunks(idx.len())
            .map(|chunk| {
                let c = chunk
                    .iter()
                    .zip(&idx)
                    .map(|(v, mu)| v / multi_factorial(mu))
                    .collect();
                Series::from_coeffs(n, order, c)
            })
            .collect();
        Ok(Jet { base, components })
    }

    pub fn identity(base: &[f64], order: usize) -> Result<Jet> {
        check_order(order)?;
        let n = base.len();
        let components = (0..n)
            .map(|i| Series::variable(n, order, i, base[i]))
            .collect();
        Ok(Jet {
            base: base.to_vec(),
            components,
        })
    }

    pub fn source_dim(&self) -> usize {
        self.base.len()
    }

    pub fn target_dim(&self) -> usize {
        self.components.len()
    }

    pub fn order(&self) -> usize {
        self.components.first().map_or(0, Series::order)
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    /// Order-0 coordinates, i.e. the image of the base point.
    pub fn value(&self) -> Vec<f64> {
        self.components.iter().map(Series::value).collect()
    }

    /// Internal Taylor-coefficient representation.
    pub fn components(&self) -> &[Series] {
        &self.components
    }

    /// Raw derivative `d^mu f^k` at the base point.
    pub fn derivative(&self, k: usize, mu: &[u8]) -> f64 {
        self.components[k].derivative(mu)
    }

    /// All raw derivative coordinates, component-major.
    pub fn coordinates(&self) -> Vec<f64> {
        let idx = multi_indices_up_to(self.source_dim(), self.order());
        self.components
            .iter()
            .flat_map(|s| idx.iter().map(move |mu| s.derivative(mu)))
            .collect()
    }

    pub fn truncate(&self, order: usize) -> Jet {
        Jet {
            base: self.base.clone(),
            components: self.components.iter().map(|s| s.truncate(order)).collect(),
        }
    }

    /// First-order block `[k][i] = d_i f^k`.
    pub fn first_order(&self) -> Vec<Vec<f64>> {
        self.components.iter().map(Series::gradient).collect()
    }

    pub fn compose(&self, inner: &Jet) -> Result<Jet> {
        jet_compose(self, inner)
    }

    pub fn invert(&self) -> Result<Jet> {
        jet_invert(self)
    }

    /// Max coefficient-wise difference of raw coordinates.
    pub fn max_abs_diff(&self, other: &Jet) -> f64 {
        self.coordinates()
            .iter()
            .zip(other.coordinates())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x - y).abs() <= 1e-10 * (1.0 + x.abs().max(y.abs())))
}

/// `j_q(g o f)` from `j_q(g)` and `j_q(f)`.
pub fn jet_compose(g: &Jet, f: &Jet) -> Result<Jet> {
    if g.source_dim() != f.target_dim() {
        return Err(Error::DimensionMismatch(format!(
            "outer jet has source dimension {}, inner jet has target dimension {}",
            g.source_dim(),
            f.target_dim()
        )));
    }
    if g.order() != f.order() {
        return Err(Error::OrderMismatch(format!(
            "cannot compose jets of orders {} and {}",
            g.order(),
            f.order()
        )));
    }
    let fv = f.value();
    if !close(g.base(), &fv) {
        return Err(Error::BasePointMismatch {
            expected: fv,
            actual: g.base.clone(),
        });
    }
    let components = g
        .components
        .iter()
        .map(|s| s.compose(&f.components))
        .collect();
    Ok(Jet {
        base: f.base.clone(),
        components,
    })
}

/// Inverse jet: `jet_compose(jet_invert(f), f)` is the identity jet.
pub fn jet_invert(f: &Jet) -> Result<Jet> {
    let n = f.source_dim();
    if f.target_dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "cannot invert a jet from dimension {n} to {}",
            f.target_dim()
        )));
    }
    let q = f.order();
    if q == 0 {
        return Err(Error::SingularJet("an order-0 jet carries no derivative".into()));
    }
    let l = f.first_order();
    let linv = linalg::checked_inverse(&l)
        .ok_or_else(|| Error::SingularJet(format!("first-order block {l:?} is singular")))?;
    let y0 = f.value();
    // k(h) solves f(x0 + k(h)) = y0 + h; start from the linear solution and
    // apply q quasi-Newton corrections, each fixing one more order.
    let h: Vec<Series> = (0..n).map(|i| Series::variable(n, q, i, 0.0)).collect();
    let apply = |v: &[Series]| -> Vec<Series> {
        (0..n)
            .map(|r| {
                let mut s = Series::zero(n, q);
                for (c, vs) in linv[r].iter().zip(v) {
                    s.axpy(*c, vs);
                }
                s
            })
            .collect()
    };
    let mut k = apply(&h);
    for _ in 1..q {
        let resid: Vec<Series> = (0..n)
            .map(|i| {
                let mut r = f.components[i].compose(&k);
                r.set_value(0.0);
                &r - &h[i]
            })
            .collect();
        let corr = apply(&resid);
        for (ki, ci) in k.iter_mut().zip(&corr) {
            ki.axpy(-1.0, ci);
        }
    }
    for (ki, &x) in k.iter_mut().zip(&f.base) {
        ki.set_value(x);
    }
    Ok(Jet {
        base: y0,
        components: k,
    })
}

/// `j_q(m)(x)` in raw-derivative coordinates.
pub fn holonomic_section(m: &ExprMap, x: &[f64], order: usize) -> Result<Jet> {
    check_order(order)?;
    m.taylor_lift(x, order)
}

/// Jet coordinate layout `(k, mu)` for target dimension `m`, `n` base
/// variables and order `q`.
pub fn coordinate_layout(n: usize, m: usize, q: usize) -> Vec<(usize, MultiIndex)> {
    let idx = multi_indices_up_to(n, q);
    (0..m)
        .flat_map(|k| idx.iter().map(move |mu| (k, mu.clone())))
        .collect()
}

/// Name of jet coordinate `(k, mu)`: `y1`, `y1_2`, `y2_11`, ... with
/// 1-based component and sorted 1-based derivative indices.
pub fn coordinate_name(prefix: &str, k: usize, mu: &[u8]) -> String {
    let mut s = format!("{prefix}{}", k + 1);
    if mu.iter().any(|&e| e > 0) {
        s.push('_');
        for (i, &e) in mu.iter().enumerate() {
            for _ in 0..e {
                s.push_str(&(i + 1).to_string());
            }
        }
    }
    s
}

/// A section `x -> (x, xi^k(x), xi^k_i(x), ...)` of a jet bundle.
#[derive(Debug, Clone)]
pub enum JetSectionSpec {
    /// One expression per jet coordinate, in [`coordinate_layout`] order.
    Explicit {
        order: usize,
        target_dim: usize,
        coords: ExprMap,
    },
    /// `j_q(map)`.
    Holonomic { order: usize, map: ExprMap },
}

impl JetSectionSpec {
    pub fn explicit(order: usize, target_dim: usize, coords: ExprMap) -> Result<Self> {
        check_order(order)?;
        let expected = target_dim * multi_indices_up_to(coords.n_inputs(), order).len();
        if coords.n_outputs() != expected {
            return Err(Error::DimensionMismatch(format!(
                "an order-{order} section with {target_dim} components needs {expected} coordinates, got {}",
                coords.n_outputs()
            )));
        }
        Ok(JetSectionSpec::Explicit {
            order,
            target_dim,
            coords,
        })
    }

    pub fn holonomic(order: usize, map: ExprMap) -> Result<Self> {
        check_order(order)?;
        Ok(JetSectionSpec::Holonomic { order, map })
    }

    pub fn order(&self) -> usize {
        match self {
            JetSectionSpec::Explicit { order, .. } | JetSectionSpec::Holonomic { order, .. } => *order,
        }
    }

    pub fn base_dim(&self) -> usize {
        match self {
            JetSectionSpec::Explicit { coords, .. } => coords.n_inputs(),
            JetSectionSpec::Holonomic { map, .. } => map.n_inputs(),
        }
    }

    pub fn target_dim(&self) -> usize {
        match self {
            JetSectionSpec::Explicit { target_dim, .. } => *target_dim,
            JetSectionSpec::Holonomic { map, .. } => map.n_outputs(),
        }
    }

    pub fn base_vars(&self) -> &[String] {
        match self {
            JetSectionSpec::Explicit { coords, .. } => coords.vars(),
            JetSectionSpec::Holonomic { map, .. } => map.vars(),
        }
    }

    /// Jet coordinate values at `x`, in [`coordinate_layout`] order.
    pub fn coordinates_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            JetSectionSpec::Explicit { coords, .. } => coords.eval(x),
            JetSectionSpec::Holonomic { order, map } => Ok(map.taylor_lift(x, *order)?.coordinates()),
        }
    }

    /// Each jet coordinate as a function of `x`, Taylor-expanded at `x` to
    /// order `extra`.
    pub fn coordinate_series(&self, x: &[f64], extra: usize) -> Result<Vec<Series>> {
        match self {
            JetSectionSpec::Explicit { coords, .. } => Ok(coords.taylor_lift(x, extra)?.components().to_vec()),
            JetSectionSpec::Holonomic { order, map } => {
                let lifted = map.taylor_lift(x, order + extra)?;
                let n = x.len();
                let idx = multi_indices_up_to(n, *order);
                let mut out = Vec::with_capacity(lifted.target_dim() * idx.len());
                for s in lifted.components() {
                    for mu in &idx {
                        let mut d = s.clone();
                        for (v, &e) in mu.iter().enumerate() {
                            for _ in 0..e {
                                d = d.partial(v);
                            }
                        }
                        out.push(d.truncate(extra));
                    }
                }
                Ok(out)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn lift(text: &str, base: &[f64], q: usize) -> Jet {
        parse(text).unwrap().taylor_lift(base, q).unwrap()
    }

    #[test]
    fn compose_powers() {
        // (1 + h)^6 = 1 + 6h + 15h^2 + ...
        let f = lift("x^2", &[1.0], 2);
        let g = lift("y^3", &[1.0], 2);
        let c = jet_compose(&g, &f).unwrap();
        let expected = [1.0, 6.0, 15.0];
        for (a, b) in c.components()[0].coeffs().iter().zip(expected) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn compose_with_identity_is_noop() {
        let f = lift("sin(x)*y, x+y^2", &[0.3, -0.4], 3);
        let id_src = Jet::identity(&[0.3, -0.4], 3).unwrap();
        let id_tgt = Jet::identity(&f.value(), 3).unwrap();
        assert!(jet_compose(&f, &id_src).unwrap().max_abs_diff(&f) < 1e-15);
        assert!(jet_compose(&id_tgt, &f).unwrap().max_abs_diff(&f) < 1e-15);
    }

    #[test]
    fn compose_affine_maps() {
        let (a1, b1, a2, b2) = (2.0, 3.0, -0.5, 1.5);
        let x0 = 0.7;
        let f = lift(&format!("{a2}*x + {b2}"), &[x0], 3);
        let g = lift(&format!("{a1}*y + {b1}"), &f.value(), 3);
        let c = jet_compose(&g, &f).unwrap();
        let coords = c.coordinates();
        assert!((coords[0] - (a1 * a2 * x0 + a1 * b2 + b1)).abs() < 1e-14);
        assert!((coords[1] - a1 * a2).abs() < 1e-14);
        assert_eq!(&coords[2..], &[0.0, 0.0]);
    }

    #[test]
    fn compose_checks_base_point() {
        let f = lift("x^2", &[1.0], 2);
        let g = lift("y^3", &[2.0], 2);
        assert!(matches!(jet_compose(&g, &f), Err(Error::BasePointMismatch { .. })));
        let g = lift("y^3", &[1.0], 3);
        assert!(matches!(jet_compose(&g, &f), Err(Error::OrderMismatch(_))));
    }

    #[test]
    fn invert_quadratic() {
        // Reversion of y = x + x^2 by coefficient matching:
        // x = y - y^2 + 2 y^3 - ...
        let f = lift("x + x^2", &[0.0], 3);
        let g = jet_invert(&f).unwrap();
        let expected = [0.0, 1.0, -1.0, 2.0];
        for (a, b) in g.components()[0].coeffs().iter().zip(expected) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn invert_rotation() {
        let th = 0.6;
        let f = lift(
            &format!("cos({th})*x - sin({th})*y, sin({th})*x + cos({th})*y"),
            &[0.2, 0.5],
            2,
        );
        let g = jet_invert(&f).unwrap();
        let r = lift(
            &format!("cos({th})*x + sin({th})*y, -sin({th})*x + cos({th})*y"),
            &f.value(),
            2,
        );
        assert!(g.max_abs_diff(&r) < 1e-14);
        assert_eq!(g.base(), f.value().as_slice());
    }

    #[test]
    fn invert_singular() {
        let f = lift("x^2", &[0.0], 2);
        assert!(matches!(jet_invert(&f), Err(Error::SingularJet(_))));
    }

    #[test]
    fn holonomic_examples() {
        let j = holonomic_section(&parse("x^2").unwrap(), &[2.0], 2).unwrap();
        assert_eq!(j.coordinates(), vec![4.0, 4.0, 2.0]);
        let j = holonomic_section(&parse("exp(x)").unwrap(), &[0.0], 3).unwrap();
        for c in j.coordinates() {
            assert!((c - 1.0).abs() < 1e-15);
        }
        let j = holonomic_section(&parse("2*x - 3*y, x + 4").unwrap(), &[0.1, 0.9], 2).unwrap();
        for k in 0..2 {
            for mu in [[2u8, 0], [1, 1], [0, 2]] {
                assert_eq!(j.derivative(k, &mu), 0.0);
            }
        }
        assert!(matches!(
            holonomic_section(&parse("x").unwrap(), &[0.0], 7),
            Err(Error::OrderTooHigh { .. })
        ));
    }

    #[test]
    fn coordinate_names() {
        assert_eq!(coordinate_name("y", 0, &[0, 0]), "y1");
        assert_eq!(coordinate_name("y", 1, &[1, 0]), "y2_1");
        assert_eq!(coordinate_name("xi", 0, &[1, 1]), "xi1_12");
        assert_eq!(coordinate_name("y", 0, &[2, 0]), "y1_11");
    }

    #[test]
    fn section_series_of_holonomic_spec() {
        let spec = JetSectionSpec::holonomic(1, parse("x^3").unwrap()).unwrap();
        let s = spec.coordinate_series(&[2.0], 1).unwrap();
        // xi = x^3 -> (8, 12), xi_x = 3x^2 -> (12, 12)
        assert_eq!(s[0].coeffs(), &[8.0, 12.0]);
        assert_eq!(s[1].coeffs(), &[12.0, 12.0]);
        assert_eq!(spec.coordinates_at(&[2.0]).unwrap(), vec![8.0, 12.0]);
    }

    #[test]
    fn coordinates_round_trip() {
        let j = lift("x*y^2, exp(x-y)", &[0.5, 0.25], 3);
        let back = Jet::from_coordinates(j.base().to_vec(), 2, 3, &j.coordinates()).unwrap();
        assert!(back.max_abs_diff(&j) < 1e-15);
    }
}
