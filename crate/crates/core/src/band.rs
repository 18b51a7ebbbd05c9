//! Symmetric band matrices in packed lower-triangle storage.

use crate::error::{GcmError, Result};

/// Symmetric matrix with `M[i][j] = 0` for `|i - j| > half_bandwidth`.
///
/// Storage is diagonal-major: `data[d * dim + j] = M[j + d][j]` for
/// `d = 0..=half_bandwidth`; slots past the end of a diagonal stay zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSymmetricMatrix {
    dim: usize,
    half_bandwidth: usize,
    data: Vec<f64>,
}

impl BandedSymmetricMatrix {
    pub fn zeros(dim: usize, half_bandwidth: usize) -> Self {
        let kd = half_bandwidth.min(dim.saturating_sub(1));
        Self { dim, half_bandwidth: kd, data: vec![0.0; (kd + 1) * dim] }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), 0);
        m.data.copy_from_slice(diag);
        m
    }

    /// Builds from raw diagonal-major data, validating its shape.
    pub fn from_raw(dim: usize, half_bandwidth: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != (half_bandwidth + 1) * dim || (half_bandwidth > 0 && half_bandwidth >= dim) {
            return Err(GcmError::InvalidParameter(format!(
                "band payload of {} values does not fit dim {dim}, half-bandwidth {half_bandwidth}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(GcmError::InvalidParameter("non-finite band entry".into()));
        }
        Ok(Self { dim, half_bandwidth, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_bandwidth(&self) -> usize {
        self.half_bandwidth
    }

    pub fn raw(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let d = r - c;
        if d > self.half_bandwidth {
            0.0
        } else {
            self.data[d * self.dim + c]
        }
    }

    /// Sets `M[i][j]` and `M[j][i]`. Panics outside the band.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let d = r - c;
        assert!(d <= self.half_bandwidth, "entry ({i},{j}) outside band {}", self.half_bandwidth);
        self.data[d * self.dim + c] = value;
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let v = self.get(i, j);
        self.set(i, j, v + value);
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.data[..self.dim]
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    /// `y = M x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        let n = self.dim;
        let mut y: Vec<f64> = (0..n).map(|i| self.data[i] * x[i]).collect();
        for d in 1..=self.half_bandwidth {
            let diag = &self.data[d * n..d * n + n - d];
            for (j, &a) in diag.iter().enumerate() {
                y[j + d] += a * x[j];
                y[j] += a * x[j + d];
            }
        }
        y
    }

    /// Maximum absolute row sum, an upper bound on the spectral norm.
    pub fn norm_inf(&self) -> f64 {
        let n = self.dim;
        let mut rows = vec![0.0; n];
        for i in 0..n {
            rows[i] += self.data[i].abs();
        }
        for d in 1..=self.half_bandwidth {
            for j in 0..n - d {
                let a = self.data[d * n + j].abs();
                rows[j] += a;
                rows[j + d] += a;
            }
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    /// Dense row-major copy.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim;
        let mut out = vec![vec![0.0; n]; n];
        for (i, row) in out.iter_mut().enumerate() {
            let lo = i.saturating_sub(self.half_bandwidth);
            let hi = (i + self.half_bandwidth).min(n.saturating_sub(1));
            for (j, v) in row.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *v = self.get(i, j);
            }
        }
        out
    }

    /// Largest `|i - j|` with a nonzero entry.
    pub fn occupied_bandwidth(&self) -> usize {
        let n = self.dim;
        (1..=self.half_bandwidth)
            .rev()
            .find(|&d| self.data[d * n..d * n + n - d].iter().any(|&v| v != 0.0))
            .unwrap_or(0)
    }
}
