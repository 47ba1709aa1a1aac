//! Gauss-Legendre quadrature on boxes, exact for polynomials of per-axis
//! degree `2 * points - 1`.

use crate::error::{Error, Result};
use crate::sampling::SampleBox;

/// Nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(points: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(points >= 1);
    let n = points;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Smallest point count integrating total degree `degree` exactly.
pub fn points_for_degree(degree: usize) -> usize {
    degree / 2 + 1
}

/// Tensor-product rule on a box.
#[derive(Debug, Clone)]
pub struct TensorRule {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl TensorRule {
    pub fn new(bounds: &SampleBox, per_axis: usize) -> Self {
        let (x, w) = gauss_legendre(per_axis);
        let dim = bounds.dim();
        let total = per_axis.pow(dim as u32);
        let mut points = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        for node in 0..total {
            let mut rest = node;
            let mut p = vec![0.0; dim];
            let mut weight = 1.0;
            for d in (0..dim).rev() {
                let i = rest % per_axis;
                rest /= per_axis;
                let half = 0.5 * (bounds.hi[d] - bounds.lo[d]);
                p[d] = bounds.lo[d] + half * (x[i] + 1.0);
                weight *= half * w[i];
            }
            points.push(p);
            weights.push(weight);
        }
        TensorRule { points, weights }
    }

    /// Rule exact for polynomials of total degree `degree`; errors if
    /// `per_axis` is too small.
    pub fn exact_for(bounds: &SampleBox, per_axis: usize, degree: usize) -> Result<Self> {
        if 2 * per_axis < degree + 1 {
            return Err(Error::QuadratureOrderTooLow {
                points: per_axis,
                degree,
            });
        }
        Ok(TensorRule::new(bounds, per_axis))
    }

    pub fn integrate<F>(&self, mut f: F) -> Result<f64>
    where
        F: FnMut(&[f64]) -> Result<f64>,
    {
        let terms: Vec<f64> = self
            .points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| Ok(w * f(p)?))
            .collect::<Result<_>>()?;
        Ok(pairwise_sum(&terms))
    }
}

/// Pairwise (cascade) summation in a fixed order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}
