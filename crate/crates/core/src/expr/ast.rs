use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::taylor::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Neg,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "neg" => Func::Neg,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Neg => "neg",
        }
    }
}

/// Closed-form scalar expression.
///
/// Variables carry their name and a slot into the input vector of the
/// enclosing [`ExprMap`](super::ExprMap); slots are (re)assigned when an
/// expression is placed in a map.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Var { name: String, slot: usize },
    Const(f64),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Power with a constant exponent.
    Pow(Box<Expr>, f64),
    /// Unary minus, written `-e`.
    Neg(Box<Expr>),
    Func(Func, Box<Expr>),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var {
            name: name.into(),
            slot: 0,
        }
    }

    /// Numeric literal; negative values become `Neg(Const(|c|))` so that the
    /// printed form re-parses to the same tree.
    pub fn num(c: f64) -> Expr {
        if c < 0.0 || (c == 0.0 && c.is_sign_negative()) {
            Expr::Neg(Box::new(Expr::Const(-c)))
        } else {
            Expr::Const(c)
        }
    }

    pub fn pow(self, e: f64) -> Expr {
        Expr::Pow(Box::new(self), e)
    }

    pub fn apply(self, f: Func) -> Expr {
        Expr::Func(f, Box::new(self))
    }

    pub fn sin(self) -> Expr {
        self.apply(Func::Sin)
    }

    pub fn cos(self) -> Expr {
        self.apply(Func::Cos)
    }

    pub fn exp(self) -> Expr {
        self.apply(Func::Exp)
    }

    pub fn log(self) -> Expr {
        self.apply(Func::Log)
    }

    pub fn sqrt(self) -> Expr {
        self.apply(Func::Sqrt)
    }

    /// Sum of terms, `0` when empty.
    pub fn sum(terms: impl IntoIterator<Item = Expr>) -> Expr {
        terms
            .into_iter()
            .reduce(|a, b| a + b)
            .unwrap_or(Expr::Const(0.0))
    }

    /// Product of factors, `1` when empty.
    pub fn product(factors: impl IntoIterator<Item = Expr>) -> Expr {
        factors
            .into_iter()
            .reduce(|a, b| a * b)
            .unwrap_or(Expr::Const(1.0))
    }

    /// Variable names in order of first appearance.
    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Var { name, .. } => {
                if !out.iter().any(|n| n == name) {
                    out.push(name.clone());
                }
            }
            Expr::Const(_) => {}
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Pow(a, _) | Expr::Neg(a) | Expr::Func(_, a) => a.collect_vars(out),
        }
    }

    /// Rename variables by slot: slot `i` gets `names[i]`.
    pub(crate) fn rename_slots(&mut self, names: &[String]) {
        match self {
            Expr::Var { name, slot } => *name = names[*slot].clone(),
            Expr::Const(_) => {}
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.rename_slots(names);
                b.rename_slots(names);
            }
            Expr::Pow(a, _) | Expr::Neg(a) | Expr::Func(_, a) => a.rename_slots(names),
        }
    }

    /// Resolve variable slots against `vars`.
    pub(crate) fn bind(&mut self, vars: &[String]) -> Result<()> {
        match self {
            Expr::Var { name, slot } => {
                *slot = vars
                    .iter()
                    .position(|v| v == name)
                    .ok_or_else(|| Error::UnknownVariable(name.clone()))?;
                Ok(())
            }
            Expr::Const(_) => Ok(()),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.bind(vars)?;
                b.bind(vars)
            }
            Expr::Pow(a, _) | Expr::Neg(a) | Expr::Func(_, a) => a.bind(vars),
        }
    }

    /// Evaluate over any scalar type. `proto` fixes the shape of constants.
    pub fn eval_with<T: Scalar>(&self, inputs: &[T], proto: &T) -> Result<T> {
        Ok(match self {
            Expr::Var { slot, name } => inputs
                .get(*slot)
                .cloned()
                .ok_or_else(|| Error::UnknownVariable(name.clone()))?,
            Expr::Const(c) => proto.constant_like(*c),
            Expr::Add(a, b) => a.eval_with(inputs, proto)?.add(&b.eval_with(inputs, proto)?),
            Expr::Sub(a, b) => a.eval_with(inputs, proto)?.sub(&b.eval_with(inputs, proto)?),
            Expr::Mul(a, b) => a.eval_with(inputs, proto)?.mul(&b.eval_with(inputs, proto)?),
            Expr::Div(a, b) => a.eval_with(inputs, proto)?.div(&b.eval_with(inputs, proto)?)?,
            Expr::Pow(a, e) => a.eval_with(inputs, proto)?.powf(*e)?,
            Expr::Neg(a) => a.eval_with(inputs, proto)?.neg(),
            Expr::Func(f, a) => {
                let x = a.eval_with(inputs, proto)?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Log => x.ln()?,
                    Func::Sqrt => x.sqrt()?,
                    Func::Neg => x.neg(),
                }
            }
        })
    }

    /// Total polynomial degree, or `None` when the expression is not a
    /// polynomial (transcendental functions, division by non-constants,
    /// non-natural exponents).
    pub fn polynomial_degree(&self) -> Option<usize> {
        match self {
            Expr::Var { .. } => Some(1),
            Expr::Const(_) => Some(0),
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                Some(a.polynomial_degree()?.max(b.polynomial_degree()?))
            }
            Expr::Mul(a, b) => Some(a.polynomial_degree()? + b.polynomial_degree()?),
            Expr::Div(a, b) => match b.polynomial_degree()? {
                0 => a.polynomial_degree(),
                _ => None,
            },
            Expr::Pow(a, e) => {
                if e.fract() == 0.0 && *e >= 0.0 {
                    Some(a.polynomial_degree()? * (*e as usize))
                } else {
                    None
                }
            }
            Expr::Neg(a) | Expr::Func(Func::Neg, a) => a.polynomial_degree(),
            Expr::Func(_, a) => match a.polynomial_degree()? {
                0 => Some(0),
                _ => None,
            },
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::Pow(..) => 4,
            Expr::Var { .. } | Expr::Const(_) | Expr::Func(..) => 5,
        }
    }

    fn write_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let wrap = self.precedence() < min;
        if wrap {
            f.write_str("(")?;
        }
        match self {
            Expr::Var { name, .. } => f.write_str(name)?,
            Expr::Const(c) => {
                if *c < 0.0 {
                    write!(f, "({c:?})")?
                } else {
                    write!(f, "{c:?}")?
                }
            }
            Expr::Add(a, b) => {
                a.write_prec(f, 1)?;
                f.write_str(" + ")?;
                b.write_prec(f, 2)?;
            }
            Expr::Sub(a, b) => {
                a.write_prec(f, 1)?;
                f.write_str(" - ")?;
                b.write_prec(f, 2)?;
            }
            Expr::Mul(a, b) => {
                a.write_prec(f, 2)?;
                f.write_str("*")?;
                b.write_prec(f, 3)?;
            }
            Expr::Div(a, b) => {
                a.write_prec(f, 2)?;
                f.write_str("/")?;
                b.write_prec(f, 3)?;
            }
            Expr::Neg(a) => {
                f.write_str("-")?;
                a.write_prec(f, 3)?;
            }
            Expr::Pow(a, e) => {
                a.write_prec(f, 5)?;
                write!(f, "^{e:?}")?;
            }
            Expr::Func(func, a) => {
                write!(f, "{}(", func.name())?;
                a.write_prec(f, 0)?;
                f.write_str(")")?;
            }
        }
        if wrap {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_prec(f, 0)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $variant:ident) => {
        impl $trait for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(self), Box::new(rhs))
            }
        }
    };
}

binop!(Add, add, Add);
binop!(Sub, sub, Sub);
binop!(Mul, mul, Mul);
binop!(Div, div, Div);

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}
