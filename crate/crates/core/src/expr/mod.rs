//! Closed-form expressions: parsing, printing, evaluation and Taylor lifting.

mod ast;
mod parser;

use std::fmt;

pub use ast::{Expr, Func};

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::taylor::{Scalar, Series};

/// An ordered list of expressions over an ordered list of input variables,
/// i.e. a map `R^inputs -> R^outputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprMap {
    vars: Vec<String>,
    outputs: Vec<Expr>,
}

impl ExprMap {
    pub fn new<S: AsRef<str>>(vars: &[S], outputs: Vec<Expr>) -> Result<Self> {
        let vars: Vec<String> = vars.iter().map(|v| v.as_ref().to_string()).collect();
        for (i, v) in vars.iter().enumerate() {
            if vars[..i].contains(v) {
                return Err(Error::DuplicateVariable(v.clone()));
            }
        }
        if outputs.is_empty() {
            return Err(Error::DimensionMismatch(
                "an expression map needs at least one output".into(),
            ));
        }
        let mut outputs = outputs;
        for e in &mut outputs {
            e.bind(&vars)?;
        }
        Ok(ExprMap { vars, outputs })
    }

    /// Parse a comma-separated list; variables are ordered by first
    /// appearance.
    pub fn parse(text: &str) -> Result<Self> {
        let outputs = parser::parse_list(text)?;
        let mut vars: Vec<String> = Vec::new();
        for e in &outputs {
            for v in e.variables() {
                if !vars.contains(&v) {
                    vars.push(v);
                }
            }
        }
        ExprMap::new(&vars, outputs)
    }

    /// Parse a comma-separated list against a declared variable order.
    pub fn parse_with_vars<S: AsRef<str>>(vars: &[S], text: &str) -> Result<Self> {
        ExprMap::new(vars, parser::parse_list(text)?)
    }

    pub fn identity<S: AsRef<str>>(vars: &[S]) -> Self {
        let outputs = vars.iter().map(|v| Expr::var(v.as_ref())).collect();
        ExprMap::new(vars, outputs).expect("identity map is well formed")
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn outputs(&self) -> &[Expr] {
        &self.outputs
    }

    pub fn n_inputs(&self) -> usize {
        self.vars.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    /// Single-output map for component `k`.
    pub fn component(&self, k: usize) -> ExprMap {
        ExprMap {
            vars: self.vars.clone(),
            outputs: vec![self.outputs[k].clone()],
        }
    }

    /// Same outputs over a different (superset) variable list.
    pub fn rebind<S: AsRef<str>>(&self, vars: &[S]) -> Result<ExprMap> {
        ExprMap::new(vars, self.outputs.clone())
    }

    /// Same map with its input variables renamed positionally.
    pub fn renamed<S: AsRef<str>>(&self, names: &[S]) -> Result<ExprMap> {
        if names.len() != self.vars.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} new names for {} variables",
                names.len(),
                self.vars.len()
            )));
        }
        let names: Vec<String> = names.iter().map(|s| s.as_ref().to_string()).collect();
        let outputs = self
            .outputs
            .iter()
            .map(|e| {
                let mut e = e.clone();
                e.rename_slots(&names);
                e
            })
            .collect();
        ExprMap::new(&names, outputs)
    }

    fn check_arity(&self, len: usize) -> Result<()> {
        if len != self.vars.len() {
            return Err(Error::DimensionMismatch(format!(
                "map over {:?} evaluated with {len} inputs",
                self.vars
            )));
        }
        Ok(())
    }

    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>> {
        self.eval_generic(point, &0.0)
    }

    /// Evaluate over any scalar type; `proto` fixes the shape of constants.
    pub fn eval_generic<T: Scalar>(&self, inputs: &[T], proto: &T) -> Result<Vec<T>> {
        self.check_arity(inputs.len())?;
        self.outputs
            .iter()
            .map(|e| e.eval_with(inputs, proto))
            .collect()
    }

    /// Exact Taylor coefficients of every output at `base` through total
    /// degree `order`.
    pub fn taylor_lift(&self, base: &[f64], order: usize) -> Result<Jet> {
        self.check_arity(base.len())?;
        let n = base.len();
        let inputs: Vec<Series> = base
            .iter()
            .enumerate()
            .map(|(i, &b)| Series::variable(n, order, i, b))
            .collect();
        let proto = Series::zero(n, order);
        let comps = self.eval_generic(&inputs, &proto)?;
        Jet::from_series(base.to_vec(), comps)
    }

    /// Maximum polynomial degree over the outputs, `None` if any output is
    /// not polynomial.
    pub fn polynomial_degree(&self) -> Option<usize> {
        self.outputs
            .iter()
            .map(Expr::polynomial_degree)
            .try_fold(0, |acc, d| d.map(|d| acc.max(d)))
    }
}

impl fmt::Display for ExprMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.outputs.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

pub fn parse(text: &str) -> Result<ExprMap> {
    ExprMap::parse(text)
}

pub fn eval(m: &ExprMap, point: &[f64]) -> Result<Vec<f64>> {
    m.eval(point)
}

pub fn taylor_lift(m: &ExprMap, base: &[f64], order: usize) -> Result<Jet> {
    m.taylor_lift(base, order)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renaming_keeps_slots() {
        let m = ExprMap::parse_with_vars(&["a", "b"], "a - 2*b").unwrap();
        let r = m.renamed(&["b", "c"]).unwrap();
        assert_eq!(r.vars(), &["b".to_string(), "c".to_string()]);
        assert_eq!(r.eval(&[1.0, 3.0]).unwrap(), m.eval(&[1.0, 3.0]).unwrap());
        assert!(m.renamed(&["x"]).is_err());
    }

    #[test]
    fn variables_in_first_appearance_order() {
        let m = parse("x1*cos(t) - x2").unwrap();
        assert_eq!(m.vars(), &["x1", "t", "x2"]);
    }

    #[test]
    fn division_by_zero_is_deferred_to_evaluation() {
        let m = parse("1/0").unwrap();
        assert!(matches!(m.eval(&[]), Err(Error::Domain(_))));
    }

    #[test]
    fn pythagorean_identity() {
        let m = parse("sin(x)^2 + cos(x)^2").unwrap();
        let v = m.eval(&[0.7]).unwrap()[0];
        assert!((v - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn affine_group_law() {
        let m = ExprMap::parse_with_vars(&["a1", "a2", "b1", "b2"], "a1*b1, a1*b2+a2").unwrap();
        assert_eq!(m.eval(&[2.0, 3.0, 5.0, 7.0]).unwrap(), vec![10.0, 17.0]);
    }

    #[test]
    fn identity_and_exp() {
        let id = ExprMap::identity(&["p", "q", "r"]);
        assert_eq!(id.eval(&[1.5, -2.0, 0.25]).unwrap(), vec![1.5, -2.0, 0.25]);
        let e = parse("exp(x)").unwrap().eval(&[1.0]).unwrap()[0];
        assert_eq!(e, std::f64::consts::E);
    }

    #[test]
    fn log_domain_error() {
        let m = parse("log(x)").unwrap();
        assert!(m.eval(&[0.0]).is_err());
        assert!(m.eval(&[-1.0]).is_err());
        assert!(m.eval(&[1.0]).is_ok());
    }

    #[test]
    fn undeclared_variable_is_rejected() {
        assert!(matches!(
            ExprMap::parse_with_vars(&["x"], "x + y"),
            Err(Error::UnknownVariable(v)) if v == "y"
        ));
        assert!(matches!(
            ExprMap::parse_with_vars(&["x", "x"], "x"),
            Err(Error::DuplicateVariable(_))
        ));
    }

    #[test]
    fn taylor_lift_cubic() {
        let j = parse("x^3").unwrap().taylor_lift(&[1.0], 3).unwrap();
        assert_eq!(j.components()[0].coeffs(), &[1.0, 3.0, 3.0, 1.0]);
    }

    #[test]
    fn taylor_lift_sine_maclaurin() {
        let j = parse("sin(x)").unwrap().taylor_lift(&[0.0], 3).unwrap();
        let c = j.components()[0].coeffs();
        let expected = [0.0, 1.0, 0.0, -1.0 / 6.0];
        for (a, b) in c.iter().zip(expected) {
            assert!((a - b).abs() < 1e-16);
        }
    }

    #[test]
    fn taylor_lift_bilinear() {
        let j = parse("x1*x2").unwrap().taylor_lift(&[2.0, 3.0], 2).unwrap();
        let s = &j.components()[0];
        assert_eq!(s.value(), 6.0);
        assert_eq!(s.gradient(), vec![3.0, 2.0]);
        assert_eq!(s.coeff(&[1, 1]), 1.0);
        assert_eq!(s.coeff(&[2, 0]), 0.0);
    }

    #[test]
    fn polynomial_degree_detection() {
        assert_eq!(parse("x^3*y + 2").unwrap().polynomial_degree(), Some(4));
        assert_eq!(parse("x/2 - y").unwrap().polynomial_degree(), Some(1));
        assert_eq!(parse("sin(x)").unwrap().polynomial_degree(), None);
        assert_eq!(parse("1/x").unwrap().polynomial_degree(), None);
        assert_eq!(parse("x^0.5").unwrap().polynomial_degree(), None);
    }
}
