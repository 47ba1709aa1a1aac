use super::scalar::Scalar;
use crate::error::Result;

/// First-order forward-mode dual number over any [`Scalar`]: a value plus a
/// tangent vector. `Dual<Series>` gives exact Taylor expansions of first
/// partial derivatives without losing series order.
#[derive(Clone, Debug)]
pub struct Dual<T: Scalar> {
    pub value: T,
    pub tangent: Vec<T>,
}

impl<T: Scalar> Dual<T> {
    pub fn constant(value: T, ntangent: usize) -> Self {
        let zero = value.constant_like(0.0);
        Dual {
            value,
            tangent: vec![zero; ntangent],
        }
    }

    /// A seeded input: tangent direction `slot` set to one.
    pub fn seed(value: T, slot: usize, ntangent: usize) -> Self {
        let mut d = Dual::constant(value, ntangent);
        d.tangent[slot] = d.value.constant_like(1.0);
        d
    }

    fn chain(&self, value: T, factor: &T) -> Self {
        Dual {
            value,
            tangent: self.tangent.iter().map(|t| t.mul(factor)).collect(),
        }
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    fn constant_like(&self, c: f64) -> Self {
        Dual::constant(self.value.constant_like(c), self.tangent.len())
    }
    fn value(&self) -> f64 {
        self.value.value()
    }
    fn add(&self, rhs: &Self) -> Self {
        Dual {
            value: self.value.add(&rhs.value),
            tangent: self
                .tangent
                .iter()
                .zip(&rhs.tangent)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }
    fn sub(&self, rhs: &Self) -> Self {
        Dual {
            value: self.value.sub(&rhs.value),
            tangent: self
                .tangent
                .iter()
                .zip(&rhs.tangent)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }
    fn mul(&self, rhs: &Self) -> Self {
        Dual {
            value: self.value.mul(&rhs.value),
            tangent: self
                .tangent
                .iter()
                .zip(&rhs.tangent)
                .map(|(a, b)| a.mul(&rhs.value).add(&self.value.mul(b)))
                .collect(),
        }
    }
    fn neg(&self) -> Self {
        Dual {
            value: self.value.neg(),
            tangent: self.tangent.iter().map(Scalar::neg).collect(),
        }
    }
    fn scale(&self, c: f64) -> Self {
        Dual {
            value: self.value.scale(c),
            tangent: self.tangent.iter().map(|t| t.scale(c)).collect(),
        }
    }
    fn recip(&self) -> Result<Self> {
        let r = self.value.recip()?;
        let factor = r.mul(&r).neg();
        Ok(self.chain(r, &factor))
    }
    fn div(&self, rhs: &Self) -> Result<Self> {
        let r = rhs.value.recip()?;
        let value = self.value.mul(&r);
        Ok(Dual {
            tangent: self
                .tangent
                .iter()
                .zip(&rhs.tangent)
                .map(|(a, b)| a.sub(&value.mul(b)).mul(&r))
                .collect(),
            value,
        })
    }
    fn powi(&self, n: i32) -> Result<Self> {
        if n == 0 {
            return Ok(self.constant_like(1.0));
        }
        let value = self.value.powi(n)?;
        let factor = self.value.powi(n - 1)?.scale(n as f64);
        Ok(self.chain(value, &factor))
    }
    fn powf_real(&self, e: f64) -> Result<Self> {
        let value = self.value.powf_real(e)?;
        let factor = self.value.powf_real(e - 1.0)?.scale(e);
        Ok(self.chain(value, &factor))
    }
    fn exp(&self) -> Self {
        let v = self.value.exp();
        self.chain(v.clone(), &v)
    }
    fn sin(&self) -> Self {
        self.chain(self.value.sin(), &self.value.cos())
    }
    fn cos(&self) -> Self {
        self.chain(self.value.cos(), &self.value.sin().neg())
    }
    fn ln(&self) -> Result<Self> {
        let v = self.value.ln()?;
        let factor = self.value.recip()?;
        Ok(self.chain(v, &factor))
    }
    fn sqrt(&self) -> Result<Self> {
        let v = self.value.sqrt()?;
        let factor = v.scale(2.0).recip()?;
        Ok(self.chain(v, &factor))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taylor::Series;

    #[test]
    fn dual_of_f64_gives_gradient() {
        // f(x, y) = x * sin(y) at (2, 0.5)
        let x = Dual::seed(2.0, 0, 2);
        let y = Dual::seed(0.5, 1, 2);
        let f = x.mul(&y.sin());
        assert!((f.tangent[0] - 0.5f64.sin()).abs() < 1e-15);
        assert!((f.tangent[1] - 2.0 * 0.5f64.cos()).abs() < 1e-15);
    }

    #[test]
    fn dual_over_series_keeps_order() {
        // d/dy of exp(x y) = x exp(x y), as a series in x around 1 (y = 0)
        let x = Dual::constant(Series::variable(1, 4, 0, 1.0), 1);
        let y = Dual::seed(Series::constant(1, 4, 0.0), 0, 1);
        let f = x.mul(&y).exp();
        // x exp(0) = x = 1 + h
        assert_eq!(f.tangent[0].coeffs(), &[1.0, 1.0, 0.0, 0.0, 0.0]);
    }
}
