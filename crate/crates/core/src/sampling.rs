//! Deterministic sample sets: scrambled Halton points in a box and
//! rectangular grids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % b) as f64;
        i /= b;
        f *= inv;
    }
    r
}

/// `count` points of the Halton sequence in `[0,1)^dim` with a seeded
/// Cranley-Patterson rotation.
pub fn halton(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "Halton sequence supports at most {} dimensions", PRIMES.len());
    let mut r = rng(seed);
    let shift: Vec<f64> = (0..dim).map(|_| r.gen::<f64>()).collect();
    (1..=count as u64)
        .map(|i| {
            (0..dim)
                .map(|d| (radical_inverse(i, PRIMES[d]) + shift[d]).fract())
                .collect()
        })
        .collect()
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SampleBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidParameter(format!("degenerate box {lo:?} .. {hi:?}")));
        }
        Ok(SampleBox { lo, hi })
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        SampleBox {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    /// Map a unit-cube point into the box.
    pub fn map_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(t, (a, b))| a + t * (b - a))
            .collect()
    }

    /// Low-discrepancy points inside the box.
    pub fn points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        halton(self.dim(), count, seed)
            .iter()
            .map(|u| self.map_unit(u))
            .collect()
    }
}

/// Rectangular grid with `counts[d]` equispaced nodes per axis (endpoints
/// included), nodes enumerated row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub bounds: SampleBox,
    pub counts: Vec<usize>,
}

impl Grid {
    pub fn new(bounds: SampleBox, counts: Vec<usize>) -> Result<Self> {
        if counts.len() != bounds.dim() || counts.iter().any(|&c| c < 2) {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 2 nodes on each of {} axes, got {counts:?}",
                bounds.dim()
            )));
        }
        Ok(Grid { bounds, counts })
    }

    pub fn uniform(bounds: SampleBox, per_axis: usize) -> Result<Self> {
        let counts = vec![per_axis; bounds.dim()];
        Grid::new(bounds, counts)
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.bounds.hi[axis] - self.bounds.lo[axis]) / (self.counts[axis] - 1) as f64
    }

    pub fn multi_index(&self, mut node: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for d in (0..self.dim()).rev() {
            idx[d] = node % self.counts[d];
            node /= self.counts[d];
        }
        idx
    }

    pub fn node_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.counts).fold(0, |acc, (i, c)| acc * c + i)
    }

    pub fn point(&self, node: usize) -> Vec<f64> {
        self.multi_index(node)
            .iter()
            .enumerate()
            .map(|(d, &i)| self.bounds.lo[d] + i as f64 * self.spacing(d))
            .collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }
}
