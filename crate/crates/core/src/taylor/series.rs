use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use super::basis::{degree, multi_factorial, MonomialBasis};
use super::scalar::{domain, Scalar};
use crate::error::Result;

/// Truncated multivariate Taylor series `f(base + h) = sum_mu c_mu h^mu`
/// over `|mu| <= order`. Coefficients are Taylor coefficients (derivative
/// divided by `mu!`), stored in the order of [`MonomialBasis`].
///
/// The expansion point is not stored; a series only knows the displacement
/// variables `h`. Binary operations between series of different orders
/// truncate to the lower order.
#[derive(Clone)]
pub struct Series {
    basis: Arc<MonomialBasis>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Series")
            .field("nvars", &self.nvars())
            .field("order", &self.order())
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl PartialEq for Series {
    fn eq(&self, other: &Self) -> bool {
        self.nvars() == other.nvars() && self.order() == other.order() && self.coeffs == other.coeffs
    }
}

impl Series {
    pub fn zero(nvars: usize, order: usize) -> Self {
        let basis = MonomialBasis::get(nvars, order);
        let coeffs = vec![0.0; basis.len()];
        Series { basis, coeffs }
    }

    pub fn constant(nvars: usize, order: usize, c: f64) -> Self {
        let mut s = Series::zero(nvars, order);
        s.coeffs[0] = c;
        s
    }

    /// The coordinate function `x_var` expanded at `x_var = value`.
    pub fn variable(nvars: usize, order: usize, var: usize, value: f64) -> Self {
        assert!(var < nvars, "variable index {var} out of range for {nvars} variables");
        let mut s = Series::constant(nvars, order, value);
        if order >= 1 {
            s.coeffs[1 + var] = 1.0;
        }
        s
    }

    /// Build from Taylor coefficients in basis order.
    pub fn from_coeffs(nvars: usize, order: usize, coeffs: Vec<f64>) -> Self {
        let basis = MonomialBasis::get(nvars, order);
        assert_eq!(coeffs.len(), basis.len(), "coefficient count does not match basis");
        Series { basis, coeffs }
    }

    pub fn nvars(&self) -> usize {
        self.basis.nvars()
    }

    pub fn order(&self) -> usize {
        self.basis.order()
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn set_value(&mut self, c: f64) {
        self.coeffs[0] = c;
    }

    /// Taylor coefficient of `h^mu`; zero beyond the stored order.
    pub fn coeff(&self, mu: &[u8]) -> f64 {
        self.basis.index_of(mu).map_or(0.0, |i| self.coeffs[i])
    }

    /// Raw partial derivative `d^mu f(base)`.
    pub fn derivative(&self, mu: &[u8]) -> f64 {
        self.coeff(mu) * multi_factorial(mu)
    }

    /// First partial derivatives at the base point.
    pub fn gradient(&self) -> Vec<f64> {
        (0..self.nvars())
            .map(|v| if self.order() >= 1 { self.coeffs[1 + v] } else { 0.0 })
            .collect()
    }

    pub fn truncate(&self, order: usize) -> Series {
        if order >= self.order() {
            return self.clone();
        }
        let basis = MonomialBasis::get(self.nvars(), order);
        let coeffs = self.coeffs[..basis.len()].to_vec();
        Series { basis, coeffs }
    }

    /// Partial derivative series `d f / d h_var`, one order lower.
    ///
    /// Panics on an order-0 series, which carries no derivative information.
    pub fn partial(&self, var: usize) -> Series {
        assert!(self.order() >= 1, "cannot differentiate an order-0 series");
        let out_order = self.order() - 1;
        let mut out = Series::zero(self.nvars(), out_order);
        let mut shifted = vec![0u8; self.nvars()];
        for (i, mu) in out.basis.exponents().iter().enumerate() {
            shifted.copy_from_slice(mu);
            shifted[var] += 1;
            let idx = self.basis.index_of(&shifted).expect("shifted index in basis");
            out.coeffs[i] = (mu[var] as f64 + 1.0) * self.coeffs[idx];
        }
        out
    }

    /// Restrict to the first `keep` variables (the others set to zero).
    pub fn restrict(&self, keep: usize) -> Series {
        assert!(keep <= self.nvars());
        let mut out = Series::zero(keep, self.order());
        for (i, mu) in self.basis.exponents().iter().enumerate() {
            if mu[keep..].iter().all(|&e| e == 0) {
                let j = out.basis.index_of(&mu[..keep]).expect("restricted index");
                out.coeffs[j] = self.coeffs[i];
            }
        }
        out
    }

    /// Re-express in a larger variable set: variable `v` of `self` becomes
    /// variable `map[v]` of the result.
    pub fn embed(&self, nvars: usize, map: &[usize]) -> Series {
        assert_eq!(map.len(), self.nvars());
        let mut out = Series::zero(nvars, self.order());
        let mut mu_out = vec![0u8; nvars];
        for (i, mu) in self.basis.exponents().iter().enumerate() {
            mu_out.iter_mut().for_each(|e| *e = 0);
            for (v, &e) in mu.iter().enumerate() {
                mu_out[map[v]] += e;
            }
            let j = out.basis.index_of(&mu_out).expect("embedded index");
            out.coeffs[j] += self.coeffs[i];
        }
        out
    }

    /// Value of the truncated polynomial at displacement `h`.
    pub fn eval_at(&self, h: &[f64]) -> f64 {
        assert_eq!(h.len(), self.nvars());
        self.basis
            .exponents()
            .iter()
            .zip(&self.coeffs)
            .map(|(mu, c)| {
                c * mu
                    .iter()
                    .zip(h)
                    .map(|(&e, x)| f64::powi(*x, e as i32))
                    .product::<f64>()
            })
            .sum()
    }

    /// Substitute series for the displacement variables: returns
    /// `sum_mu c_mu (inner - inner(0))^mu`. The constant terms of `inner` are
    /// ignored, i.e. `inner` is re-centred to describe displacements.
    pub fn compose(&self, inner: &[Series]) -> Series {
        assert_eq!(inner.len(), self.nvars(), "composition arity mismatch");
        let (nv, order) = match inner.first() {
            Some(s) => (
                s.nvars(),
                inner.iter().map(Series::order).min().unwrap_or(0),
            ),
            None => return Series::constant(0, self.order(), self.value()),
        };
        let shifts: Vec<Series> = inner
            .iter()
            .map(|s| {
                let mut d = s.truncate(order);
                d.coeffs[0] = 0.0;
                d
            })
            .collect();
        // Powers h^mu built incrementally in basis order (degree ascending).
        let usable = self.basis.len_up_to(order);
        let mut powers: Vec<Series> = Vec::with_capacity(usable);
        let mut out = Series::constant(nv, order, self.coeffs[0]);
        powers.push(Series::constant(nv, order, 1.0));
        let mut pred = vec![0u8; self.nvars()];
        for i in 1..usable {
            let mu = self.basis.exponent(i);
            let var = mu.iter().position(|&e| e > 0).expect("non-constant monomial");
            pred.copy_from_slice(mu);
            pred[var] -= 1;
            let j = self.basis.index_of(&pred).expect("predecessor");
            let p = &powers[j] * &shifts[var];
            if self.coeffs[i] != 0.0 {
                out.axpy(self.coeffs[i], &p);
            }
            powers.push(p);
        }
        out
    }

    /// `self += a * other` (orders must agree).
    pub fn axpy(&mut self, a: f64, other: &Series) {
        let n = self.coeffs.len().min(other.coeffs.len());
        for (x, y) in self.coeffs[..n].iter_mut().zip(&other.coeffs[..n]) {
            *x += a * y;
        }
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    fn common_order(&self, other: &Series) -> usize {
        assert_eq!(
            self.nvars(),
            other.nvars(),
            "series with different variable counts"
        );
        self.order().min(other.order())
    }

    fn homogeneous_product(
        out: &mut [f64],
        basis: &MonomialBasis,
        a: &[f64],
        da: usize,
        b: &[f64],
        db: usize,
        scale: f64,
    ) {
        for &(i, j, k) in basis.products(da, db) {
            out[k as usize] += scale * a[i as usize] * b[j as usize];
        }
    }

    fn product(&self, other: &Series) -> Series {
        let order = self.common_order(other);
        let mut out = Series::zero(self.nvars(), order);
        let basis = out.basis.clone();
        for da in 0..=order {
            for db in 0..=(order - da) {
                Series::homogeneous_product(
                    &mut out.coeffs,
                    &basis,
                    &self.coeffs,
                    da,
                    &other.coeffs,
                    db,
                    1.0,
                );
            }
        }
        out
    }

    fn quotient(&self, den: &Series) -> Result<Series> {
        let b0 = den.coeffs[0];
        if b0 == 0.0 {
            return Err(domain("division by a series with zero constant term"));
        }
        let order = self.common_order(den);
        let mut h = Series::zero(self.nvars(), order);
        let basis = h.basis.clone();
        for k in 0..=order {
            let range = basis.degree_range(k);
            let mut acc = vec![0.0; basis.len()];
            for j in 1..=k {
                Series::homogeneous_product(&mut acc, &basis, &den.coeffs, j, &h.coeffs, k - j, 1.0);
            }
            for idx in range {
                h.coeffs[idx] = (self.coeffs[idx] - acc[idx]) / b0;
            }
        }
        Ok(h)
    }

    fn exp_series(&self) -> Series {
        let order = self.order();
        let basis = self.basis.clone();
        let mut f = Series::zero(self.nvars(), order);
        f.coeffs[0] = self.coeffs[0].exp();
        for k in 1..=order {
            let mut acc = vec![0.0; basis.len()];
            for j in 1..=k {
                Series::homogeneous_product(&mut acc, &basis, &self.coeffs, j, &f.coeffs, k - j, j as f64);
            }
            for idx in basis.degree_range(k) {
                f.coeffs[idx] = acc[idx] / k as f64;
            }
        }
        f
    }

    fn ln_series(&self) -> Result<Series> {
        let g0 = self.coeffs[0];
        if g0 <= 0.0 {
            return Err(domain(format!("log of non-positive value {g0}")));
        }
        let order = self.order();
        let basis = self.basis.clone();
        let mut f = Series::zero(self.nvars(), order);
        f.coeffs[0] = g0.ln();
        for k in 1..=order {
            let mut acc = vec![0.0; basis.len()];
            for j in 1..k {
                Series::homogeneous_product(&mut acc, &basis, &f.coeffs, j, &self.coeffs, k - j, j as f64);
            }
            for idx in basis.degree_range(k) {
                f.coeffs[idx] = (self.coeffs[idx] - acc[idx] / k as f64) / g0;
            }
        }
        Ok(f)
    }

    /// `g^c` for real `c` with positive constant term.
    fn pow_series(&self, c: f64) -> Result<Series> {
        let g0 = self.coeffs[0];
        if g0 <= 0.0 {
            if g0 == 0.0 && self.order() == 0 && c > 0.0 {
                return Ok(Series::constant(self.nvars(), 0, 0.0));
            }
            return Err(domain(format!("{g0} raised to non-integer power {c}")));
        }
        let order = self.order();
        let basis = self.basis.clone();
        let mut f = Series::zero(self.nvars(), order);
        f.coeffs[0] = g0.powf(c);
        for k in 1..=order {
            let mut acc = vec![0.0; basis.len()];
            for j in 1..=k {
                let w = c * j as f64 - (k - j) as f64;
                Series::homogeneous_product(&mut acc, &basis, &self.coeffs, j, &f.coeffs, k - j, w);
            }
            for idx in basis.degree_range(k) {
                f.coeffs[idx] = acc[idx] / (k as f64 * g0);
            }
        }
        Ok(f)
    }

    fn sin_cos_series(&self) -> (Series, Series) {
        let order = self.order();
        let basis = self.basis.clone();
        let mut s = Series::zero(self.nvars(), order);
        let mut c = Series::zero(self.nvars(), order);
        s.coeffs[0] = self.coeffs[0].sin();
        c.coeffs[0] = self.coeffs[0].cos();
        for k in 1..=order {
            let mut acc_s = vec![0.0; basis.len()];
            let mut acc_c = vec![0.0; basis.len()];
            for j in 1..=k {
                Series::homogeneous_product(&mut acc_s, &basis, &self.coeffs, j, &c.coeffs, k - j, j as f64);
                Series::homogeneous_product(&mut acc_c, &basis, &self.coeffs, j, &s.coeffs, k - j, j as f64);
            }
            for idx in basis.degree_range(k) {
                s.coeffs[idx] = acc_s[idx] / k as f64;
                c.coeffs[idx] = -acc_c[idx] / k as f64;
            }
        }
        (s, c)
    }

    fn map_coeffs(&self, f: impl Fn(f64) -> f64) -> Series {
        Series {
            basis: self.basis.clone(),
            coeffs: self.coeffs.iter().map(|&c| f(c)).collect(),
        }
    }

    fn zip_coeffs(&self, other: &Series, f: impl Fn(f64, f64) -> f64) -> Series {
        let order = self.common_order(other);
        let basis = MonomialBasis::get(self.nvars(), order);
        let coeffs = self.coeffs[..basis.len()]
            .iter()
            .zip(&other.coeffs[..basis.len()])
            .map(|(&a, &b)| f(a, b))
            .collect();
        Series { basis, coeffs }
    }

    /// Total degree of the highest nonzero coefficient.
    pub fn effective_degree(&self) -> usize {
        self.coeffs
            .iter()
            .enumerate()
            .rev()
            .find(|(_, c)| **c != 0.0)
            .map_or(0, |(i, _)| degree(self.basis.exponent(i)))
    }
}

impl Add for &Series {
    type Output = Series;
    fn add(self, rhs: &Series) -> Series {
        self.zip_coeffs(rhs, |a, b| a + b)
    }
}

impl Sub for &Series {
    type Output = Series;
    fn sub(self, rhs: &Series) -> Series {
        self.zip_coeffs(rhs, |a, b| a - b)
    }
}

impl Mul for &Series {
    type Output = Series;
    fn mul(self, rhs: &Series) -> Series {
        self.product(rhs)
    }
}

impl Neg for &Series {
    type Output = Series;
    fn neg(self) -> Series {
        self.map_coeffs(|c| -c)
    }
}

impl Scalar for Series {
    fn constant_like(&self, c: f64) -> Self {
        Series::constant(self.nvars(), self.order(), c)
    }
    fn value(&self) -> f64 {
        self.coeffs[0]
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
        self.map_coeffs(|x| x * c)
    }
    fn recip(&self) -> Result<Self> {
        self.constant_like(1.0).quotient(self)
    }
    fn div(&self, rhs: &Self) -> Result<Self> {
        self.quotient(rhs)
    }
    fn powi(&self, n: i32) -> Result<Self> {
        if n < 0 {
            return self.powi(-n)?.recip();
        }
        let mut result = self.constant_like(1.0);
        let mut base = self.clone();
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        Ok(result)
    }
    fn powf_real(&self, e: f64) -> Result<Self> {
        self.pow_series(e)
    }
    fn exp(&self) -> Self {
        self.exp_series()
    }
    fn sin(&self) -> Self {
        self.sin_cos_series().0
    }
    fn cos(&self) -> Self {
        self.sin_cos_series().1
    }
    fn ln(&self) -> Result<Self> {
        self.ln_series()
    }
    fn sqrt(&self) -> Result<Self> {
        if self.coeffs[0] < 0.0 {
            return Err(domain(format!("sqrt of negative value {}", self.coeffs[0])));
        }
        self.pow_series(0.5)
    }
}
