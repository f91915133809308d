#![allow(dead_code)]

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use tmspc::ingest::{DayGrid, TrainingTensor};
use tmspc::linalg::Matrix;
use tmspc::preprocess::{slice_stats, EPSILON};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// `rows × cols` Gaussian data with random column scales, offsets and a
/// random mixing so columns are correlated.
pub fn random_slice(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let z = Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| gaussian(rng)).collect());
    let mix = Matrix::from_vec(cols, cols, (0..cols * cols).map(|_| gaussian(rng)).collect());
    let mut x = z.matmul(&mix);
    for j in 0..cols {
        let scale = 10f64.powf(rng.random_range(-2.0..3.0));
        let offset = rng.random_range(-100.0..100.0);
        for i in 0..rows {
            x[(i, j)] = offset + scale * x[(i, j)];
        }
    }
    x
}

pub fn date(day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Duration::days(day as i64)
}

pub fn names(j: usize) -> Vec<String> {
    (0..j).map(|i| format!("v{i}")).collect()
}

/// Assembles a tensor from per-slice `I × J` matrices.
pub fn tensor_from_slices(slices: &[Matrix]) -> TrainingTensor {
    let k_len = slices.len();
    let (i_len, j_len) = (slices[0].rows(), slices[0].cols());
    let days = (0..i_len)
        .map(|i| {
            let mut values = Vec::with_capacity(k_len * j_len);
            for s in slices {
                values.extend_from_slice(s.row(i));
            }
            DayGrid::from_values(date(i as u32), k_len, j_len, values)
        })
        .collect();
    TrainingTensor::new(days, names(j_len)).unwrap()
}

/// Per-slice NOC std of variable `j`, as fault injection expects.
pub fn noc_std(tensor: &TrainingTensor, j: usize) -> Vec<f64> {
    (0..tensor.n_slices())
        .map(|k| slice_stats(k, &tensor.slice(k), EPSILON).unwrap().std[j])
        .collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
