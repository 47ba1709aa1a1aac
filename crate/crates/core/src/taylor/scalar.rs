use crate::error::{Error, Result};

/// Number-like values the expression evaluator can run on: plain `f64`,
/// truncated Taylor series, and forward-mode duals over either.
///
/// Fallible operations report domain errors (division by zero, log of a
/// non-positive value, ...) based on the constant term.
pub trait Scalar: Clone + std::fmt::Debug + Send + Sync {
    /// A constant with the same shape (variable count, order, tangent size).
    fn constant_like(&self, c: f64) -> Self;
    /// The plain value (constant term).
    fn value(&self) -> f64;
    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;
    fn scale(&self, c: f64) -> Self;
    fn recip(&self) -> Result<Self>;
    fn div(&self, rhs: &Self) -> Result<Self> {
        Ok(self.mul(&rhs.recip()?))
    }
    fn powi(&self, n: i32) -> Result<Self>;
    /// Real power with a non-integral exponent; requires a positive base.
    fn powf_real(&self, e: f64) -> Result<Self>;
    fn exp(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn ln(&self) -> Result<Self>;
    fn sqrt(&self) -> Result<Self>;

    /// Constant exponent power. Integral exponents go through repeated
    /// multiplication so negative bases stay valid.
    fn powf(&self, e: f64) -> Result<Self> {
        if e.fract() == 0.0 && e.abs() <= 1024.0 {
            self.powi(e as i32)
        } else {
            self.powf_real(e)
        }
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

impl Scalar for f64 {
    fn constant_like(&self, c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn neg(&self) -> Self {
        -self
    }
    fn scale(&self, c: f64) -> Self {
        self * c
    }
    fn recip(&self) -> Result<Self> {
        if *self == 0.0 {
            return Err(domain("division by zero"));
        }
        Ok(1.0 / self)
    }
    fn div(&self, rhs: &Self) -> Result<Self> {
        if *rhs == 0.0 {
            return Err(domain("division by zero"));
        }
        Ok(self / rhs)
    }
    fn powi(&self, n: i32) -> Result<Self> {
        if n < 0 && *self == 0.0 {
            return Err(domain("zero raised to a negative power"));
        }
        Ok(f64::powi(*self, n))
    }
    fn powf_real(&self, e: f64) -> Result<Self> {
        if *self < 0.0 || (*self == 0.0 && e < 0.0) {
            return Err(domain(format!("{self} raised to non-integer power {e}")));
        }
        Ok(f64::powf(*self, e))
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn ln(&self) -> Result<Self> {
        if *self <= 0.0 {
            return Err(domain(format!("log of non-positive value {self}")));
        }
        Ok(f64::ln(*self))
    }
    fn sqrt(&self) -> Result<Self> {
        if *self < 0.0 {
            return Err(domain(format!("sqrt of negative value {self}")));
        }
        Ok(f64::sqrt(*self))
    }
}
