//! Per-slice standardization.
//!
//! Each second-of-day slice gets its own mean and sample standard deviation
//! per variable. A variable whose spread across training days is below
//! [`EPSILON`] (a channel that is constant at night, say) is *inactive* at
//! that slice: it standardizes to exactly zero and is left out of the
//! slice's PCA.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Absolute standard-deviation threshold below which a variable is inactive.
pub const EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SliceStats {
    pub k: usize,
    pub mean: Vec<f64>,
    /// Sample std (I - 1 denominator); stored as 1 for inactive variables.
    pub std: Vec<f64>,
    pub active: Vec<bool>,
}

impl SliceStats {
    pub fn n_vars(&self) -> usize {
        self.mean.len()
    }

    pub fn n_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.n_vars()).filter(|&j| self.active[j]).collect()
    }
}

/// Mean, sample std and activity mask of every column of `x_k` (`I × J`).
pub fn slice_stats(k: usize, x_k: &Matrix, epsilon: f64) -> Result<SliceStats> {
    let n = x_k.rows();
    if n < 2 {
        return Err(Error::InsufficientDays {
            found: n,
            required: 2,
        });
    }
    let j = x_k.cols();
    let mut mean = vec![0.0; j];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(x_k.row(i)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut ss = vec![0.0; j];
    for i in 0..n {
        for ((s, v), m) in ss.iter_mut().zip(x_k.row(i)).zip(&mean) {
            let d = v - m;
            *s += d * d;
        }
    }
    let mut std = Vec::with_capacity(j);
    let mut active = Vec::with_capacity(j);
    for s in ss {
        let sd = (s / (n - 1) as f64).sqrt();
        if sd >= epsilon {
            std.push(sd);
            active.push(true);
        } else {
            std.push(1.0);
            active.push(false);
        }
    }
    if !active.iter().any(|&a| a) {
        return Err(Error::DegenerateSlice { k });
    }
    Ok(SliceStats {
        k,
        mean,
        std,
        active,
    })
}

/// `(x - mean) / std` on active variables, exactly 0 on inactive ones.
pub fn standardize(x: &[f64], stats: &SliceStats) -> Vec<f64> {
    x.iter()
        .enumerate()
        .map(|(j, &v)| {
            if stats.active[j] {
                (v - stats.mean[j]) / stats.std[j]
            } else {
                0.0
            }
        })
        .collect()
}

/// Standardizes every row of `x_k`.
pub fn standardize_rows(x_k: &Matrix, stats: &SliceStats) -> Matrix {
    let mut out = Matrix::zeros(x_k.rows(), x_k.cols());
    for i in 0..x_k.rows() {
        out.row_mut(i).copy_from_slice(&standardize(x_k.row(i), stats));
    }
    out
}
