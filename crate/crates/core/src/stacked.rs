//! Block vectors in (R^d)^V and the consensus projector.
//!
//! A [`StackedVector`] stores one d-dimensional block per node. The projector
//! onto the zero-mean subspace is applied implicitly via mean subtraction and
//! is never materialized.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ShapeError {
    #[error("shape mismatch: ({n_a}, {d_a}) vs ({n_b}, {d_b})")]
    Mismatch {
        n_a: usize,
        d_a: usize,
        n_b: usize,
        d_b: usize,
    },
}

/// An element of (R^d)^V: `n` per-node blocks of dimension `d`, stored
/// contiguously. Block `i` occupies `data[i*d .. (i+1)*d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedVector {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl StackedVector {
    pub fn zeros(n: usize, d: usize) -> Self {
        assert!(n >= 1 && d >= 1, "n and d must be positive");
        Self {
            n,
            d,
            data: vec![0.0; n * d],
        }
    }

    pub fn from_blocks(blocks: &[Vec<f64>]) -> Self {
        assert!(!blocks.is_empty(), "need at least one block");
        let d = blocks[0].len();
        assert!(d >= 1, "blocks must be non-empty");
        let mut data = Vec::with_capacity(blocks.len() * d);
        for b in blocks {
            assert_eq!(b.len(), d, "all blocks must share dimension d");
            data.extend_from_slice(b);
        }
        Self {
            n: blocks.len(),
            d,
            data,
        }
    }

    pub fn from_flat(n: usize, d: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * d);
        assert!(n >= 1 && d >= 1);
        Self { n, d, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n == other.n && self.d == other.d
    }

    pub fn check_shape(&self, other: &Self) -> Result<(), ShapeError> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(ShapeError::Mismatch {
                n_a: self.n,
                d_a: self.d,
                n_b: other.n,
                d_b: other.d,
            })
        }
    }

    fn assert_shape(&self, other: &Self) {
        assert!(
            self.same_shape(other),
            "shape mismatch: ({}, {}) vs ({}, {})",
            self.n,
            self.d,
            other.n,
            other.d
        );
    }

    pub fn add(&self, other: &Self) -> Self {
        self.assert_shape(other);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Self { data, ..*self }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.assert_shape(other);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Self { data, ..*self }
    }

    pub fn scale(&self, s: f64) -> Self {
        let data = self.data.iter().map(|a| a * s).collect();
        Self { data, ..*self }
    }

    /// self + s * other
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        self.assert_shape(other);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + s * b)
            .collect();
        Self { data, ..*self }
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.assert_shape(other);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|a| a.is_finite())
    }

    /// Across-node mean of each coordinate: the block that `v - project(v)`
    /// replicates on every node.
    pub fn block_mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.d];
        for i in 0..self.n {
            for (m, x) in mean.iter_mut().zip(self.block(i)) {
                *m += x;
            }
        }
        let inv = 1.0 / self.n as f64;
        for m in &mut mean {
            *m *= inv;
        }
        mean
    }

    /// Replicates a single d-vector on every node (an element of the
    /// consensus space).
    pub fn replicate(n: usize, block: &[f64]) -> Self {
        assert!(!block.is_empty());
        let mut data = Vec::with_capacity(n * block.len());
        for _ in 0..n {
            data.extend_from_slice(block);
        }
        Self {
            n,
            d: block.len(),
            data,
        }
    }
}

/// Orthogonal projection onto the zero-mean subspace: subtracts the
/// across-node mean of each coordinate from every block.
pub fn project(v: &StackedVector) -> StackedVector {
    let mean = v.block_mean();
    let mut out = v.clone();
    for i in 0..v.n() {
        for (x, m) in out.block_mut(i).iter_mut().zip(&mean) {
            *x -= m;
        }
    }
    out
}

/// Squared seminorm <v, Pv> = ||Pv||^2; zero exactly on consensus vectors.
pub fn p_seminorm_sq(v: &StackedVector) -> f64 {
    project(v).norm_sq()
}
