//! Time-varying PCA training: one PCA per second-of-day slice, a single
//! retained rank shared by every slice, and one control limit.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::TrainingTensor;
use crate::linalg::{correlation_matrix, symmetric_eigen, Matrix};
use crate::monitor::ucl_formula;
use crate::preprocess::{slice_stats, standardize_rows, SliceStats, EPSILON};

/// A retained eigenvalue must exceed this fraction of the slice's total
/// variance (its active-variable count).
pub const MIN_RELATIVE_EIGENVALUE: f64 = 1e-10;

/// Number of slices spot-checked for loading orthonormality by
/// [`TpcaModel::validate`].
pub const VALIDATION_SAMPLE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// Control-limit confidence level in (0, 1).
    pub confidence: f64,
    /// Minimum cumulative explained variance every slice must reach.
    pub threshold: f64,
    pub epsilon: f64,
    /// Fixed rank; skips explained-variance selection when set.
    pub rank: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            confidence: 0.95,
            threshold: 0.75,
            epsilon: EPSILON,
            rank: None,
        }
    }
}

/// Full-rank PCA of one slice, before truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceDecomposition {
    pub k: usize,
    pub stats: SliceStats,
    /// Descending, one per active variable.
    pub eigenvalues: Vec<f64>,
    /// `J × J_active`; rows of inactive variables are zero.
    pub vectors: Matrix,
    /// Cumulative explained-variance fraction for ranks `1..=J_active`.
    pub explained: Vec<f64>,
}

/// Trained PCA model of one slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceModel {
    pub k: usize,
    pub stats: SliceStats,
    /// `J × R`, orthonormal columns, zero rows for inactive variables.
    pub loadings: Matrix,
    /// Variances of the retained scores, descending and positive.
    pub eigenvalues: Vec<f64>,
    /// Cumulative explained-variance fraction for ranks `1..=J_active`.
    pub explained: Vec<f64>,
}

impl SliceModel {
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n_active(&self) -> usize {
        self.stats.n_active()
    }

    /// `max |PᵀP - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let ptp = self.loadings.transpose().matmul(&self.loadings);
        ptp.max_abs_diff(&Matrix::identity(ptp.rows()))
    }
}

/// Eigen-decomposes the correlation matrix of one slice at full active rank.
pub fn decompose_slice(k: usize, x_k: &Matrix, epsilon: f64) -> Result<SliceDecomposition> {
    let stats = slice_stats(k, x_k, epsilon)?;
    let xhat = standardize_rows(x_k, &stats);
    let corr = correlation_matrix(&xhat);
    let active = stats.active_indices();
    let na = active.len();

    let mut sub = Matrix::zeros(na, na);
    for (a, &ja) in active.iter().enumerate() {
        for (b, &jb) in active.iter().enumerate() {
            sub[(a, b)] = corr[(ja, jb)];
        }
    }
    let mut eig = symmetric_eigen(&sub).map_err(|e| e.at_slice(k))?;
    eig.clamp_nonnegative();

    let mut vectors = Matrix::zeros(x_k.cols(), na);
    for (a, &ja) in active.iter().enumerate() {
        for c in 0..na {
            vectors[(ja, c)] = eig.vectors[(a, c)];
        }
    }

    let total: f64 = eig.eigenvalues.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Numerical("correlation matrix has zero trace".into()).at_slice(k));
    }
    let mut acc = 0.0;
    let explained = eig
        .eigenvalues
        .iter()
        .map(|l| {
            acc += l;
            acc / total
        })
        .collect();

    let dec = SliceDecomposition {
        k,
        stats,
        eigenvalues: eig.eigenvalues,
        vectors,
        explained,
    };
    dec.check_score_variance(&xhat)?;
    Ok(dec)
}

impl SliceDecomposition {
    pub fn n_active(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Training scores must have sample variance equal to the eigenvalues.
    fn check_score_variance(&self, xhat: &Matrix) -> Result<()> {
        let scores = xhat.matmul(&self.vectors);
        let denom = (xhat.rows() - 1) as f64;
        let scale = 1.0 + self.eigenvalues.first().copied().unwrap_or(0.0);
        for (r, &l) in self.eigenvalues.iter().enumerate() {
            let var = scores.column(r).iter().map(|t| t * t).sum::<f64>() / denom;
            if (var - l).abs() > 1e-6 * scale {
                return Err(Error::Numerical(format!(
                    "score variance {var} of component {} disagrees with eigenvalue {l}",
                    r + 1
                ))
                .at_slice(self.k));
            }
        }
        Ok(())
    }

    /// Keeps the leading `rank` components.
    pub fn truncate(&self, rank: usize) -> Result<SliceModel> {
        let na = self.n_active();
        if rank == 0 || rank > na {
            return Err(Error::Domain(format!(
                "rank {rank} outside 1..={na} active variables"
            ))
            .at_slice(self.k));
        }
        let floor = MIN_RELATIVE_EIGENVALUE * na as f64;
        if let Some(r) = self.eigenvalues[..rank].iter().position(|&l| l <= floor) {
            return Err(Error::Numerical(format!(
                "retained component {} has zero variance",
                r + 1
            ))
            .at_slice(self.k));
        }
        let j = self.vectors.rows();
        let mut loadings = Matrix::zeros(j, rank);
        for row in 0..j {
            loadings
                .row_mut(row)
                .copy_from_slice(&self.vectors.row(row)[..rank]);
        }
        Ok(SliceModel {
            k: self.k,
            stats: self.stats.clone(),
            loadings,
            eigenvalues: self.eigenvalues[..rank].to_vec(),
            explained: self.explained.clone(),
        })
    }
}

/// PCA of one slice truncated to `rank` components.
pub fn train_slice(k: usize, x_k: &Matrix, rank: usize, epsilon: f64) -> Result<SliceModel> {
    if rank >= x_k.rows() {
        return Err(Error::DegreesOfFreedom {
            days: x_k.rows(),
            rank,
        });
    }
    decompose_slice(k, x_k, epsilon)?.truncate(rank)
}

/// Smallest rank whose cumulative explained variance reaches `threshold` on
/// every slice (the worst slice decides).
///
/// Ranks are limited to the smallest active-variable count across slices.
pub fn select_global_r<E: AsRef<[f64]>>(per_slice_explained: &[E], threshold: f64) -> Result<usize> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Domain(format!(
            "explained-variance threshold must lie in (0, 1], got {threshold}"
        )));
    }
    let max_rank = per_slice_explained
        .iter()
        .map(|e| e.as_ref().len())
        .min()
        .unwrap_or(0);
    let worst_at = |r: usize| {
        per_slice_explained
            .iter()
            .map(|e| e.as_ref()[r - 1])
            .fold(f64::INFINITY, f64::min)
    };
    for r in 1..=max_rank {
        if worst_at(r) >= threshold {
            return Ok(r);
        }
    }
    let mut worst: Vec<(usize, f64)> = if max_rank == 0 {
        Vec::new()
    } else {
        per_slice_explained
            .iter()
            .enumerate()
            .map(|(k, e)| (k, e.as_ref()[max_rank - 1]))
            .collect()
    };
    worst.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    worst.truncate(5);
    Err(Error::UnreachableThreshold {
        threshold,
        max_rank,
        worst,
    })
}

/// Time-varying PCA model: one [`SliceModel`] per second-of-day plus the
/// shared rank and control limit.
#[derive(Debug, Clone, PartialEq)]
pub struct TpcaModel {
    /// R
    pub rank: usize,
    /// I
    pub n_days: usize,
    /// J
    pub n_vars: usize,
    /// K
    pub n_slices: usize,
    pub variable_names: Vec<String>,
    pub confidence: f64,
    pub threshold: f64,
    pub epsilon: f64,
    pub ucl: f64,
    /// Whole-dataset sample std per variable, used to flag deviations on
    /// inactive variables.
    pub global_std: Vec<f64>,
    pub slices: Vec<SliceModel>,
}

impl TpcaModel {
    pub fn slice(&self, k: usize) -> Result<&SliceModel> {
        self.slices.get(k).ok_or(Error::SliceOutOfRange {
            k,
            len: self.n_slices,
        })
    }

    /// Per rank `1..=min active count`, the minimum explained-variance
    /// fraction across slices.
    pub fn min_explained(&self) -> Vec<f64> {
        min_explained(self.slices.iter().map(|s| s.explained.as_slice()))
    }

    /// Checks the structural invariants, recomputes the control limit, and
    /// spot-checks loading orthonormality on an evenly spaced sample of
    /// slices.
    pub fn validate(&self) -> Result<()> {
        let corrupt = |m: String| Err(Error::CorruptModel(m));
        if self.slices.len() != self.n_slices {
            return corrupt(format!(
                "{} slices stored, header says {}",
                self.slices.len(),
                self.n_slices
            ));
        }
        if self.variable_names.len() != self.n_vars || self.global_std.len() != self.n_vars {
            return corrupt("variable table does not match J".into());
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return corrupt(format!("confidence {} outside (0, 1)", self.confidence));
        }
        let expected = ucl_formula(self.n_days, self.rank, self.confidence)
            .map_err(|e| Error::CorruptModel(e.to_string()))?;
        if (expected - self.ucl).abs() > 1e-12 * expected.abs().max(1.0) {
            return corrupt(format!(
                "stored UCL {} disagrees with recomputed {expected}",
                self.ucl
            ));
        }
        for (k, s) in self.slices.iter().enumerate() {
            let na = s.n_active();
            let shape_ok = s.k == k
                && s.stats.n_vars() == self.n_vars
                && s.stats.std.len() == self.n_vars
                && s.stats.active.len() == self.n_vars
                && s.loadings.rows() == self.n_vars
                && s.loadings.cols() == self.rank
                && s.eigenvalues.len() == self.rank
                && s.explained.len() == na;
            if !shape_ok {
                return corrupt(format!("slice {k} has inconsistent dimensions"));
            }
            if na < self.rank {
                return corrupt(format!("slice {k} has {na} active variables < R"));
            }
            if s.eigenvalues.iter().any(|&l| !(l > 0.0))
                || s.eigenvalues.windows(2).any(|w| w[0] < w[1])
            {
                return corrupt(format!("slice {k} eigenvalues not positive and descending"));
            }
            for j in (0..self.n_vars).filter(|&j| !s.stats.active[j]) {
                if s.loadings.row(j).iter().any(|&v| v != 0.0) {
                    return corrupt(format!("slice {k}: inactive variable {j} has loadings"));
                }
            }
        }
        let n = self.n_slices;
        let step = (n / VALIDATION_SAMPLE).max(1);
        for k in (0..n).step_by(step).take(VALIDATION_SAMPLE) {
            let err = self.slices[k].orthonormality_error();
            if !(err < 1e-9) {
                return corrupt(format!("slice {k} loadings not orthonormal (error {err:e})"));
            }
        }
        Ok(())
    }
}

pub(crate) fn min_explained<'a>(slices: impl Iterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut out: Option<Vec<f64>> = None;
    for e in slices {
        out = Some(match out {
            None => e.to_vec(),
            Some(m) => m.iter().zip(e).map(|(a, b)| a.min(*b)).collect(),
        });
    }
    out.unwrap_or_default()
}

/// Sample std of each variable over every day and second.
fn global_std(tensor: &TrainingTensor) -> Vec<f64> {
    let j = tensor.n_vars();
    let n = (tensor.n_days() * tensor.n_slices()) as f64;
    let mut mean = vec![0.0; j];
    for g in tensor.days() {
        for k in 0..g.n_slices() {
            for (m, v) in mean.iter_mut().zip(g.row(k)) {
                *m += v;
            }
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut ss = vec![0.0; j];
    for g in tensor.days() {
        for k in 0..g.n_slices() {
            for ((s, v), m) in ss.iter_mut().zip(g.row(k)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
    }
    ss.iter().map(|s| (s / (n - 1.0).max(1.0)).sqrt()).collect()
}

/// Trains every slice, selects the global rank, and computes the UCL.
pub fn train(tensor: &TrainingTensor, config: &TrainConfig) -> Result<TpcaModel> {
    let n_days = tensor.n_days();
    if n_days < 3 {
        return Err(Error::InsufficientDays {
            found: n_days,
            required: 3,
        });
    }
    if !(config.confidence > 0.0 && config.confidence < 1.0) {
        return Err(Error::Domain(format!(
            "confidence must lie in (0, 1), got {}",
            config.confidence
        )));
    }
    let k_len = tensor.n_slices();
    let decompositions: Vec<SliceDecomposition> = (0..k_len)
        .into_par_iter()
        .map(|k| decompose_slice(k, &tensor.slice(k), config.epsilon))
        .collect::<Result<_>>()?;

    let rank = match config.rank {
        Some(r) => r,
        None => {
            let explained: Vec<&[f64]> =
                decompositions.iter().map(|d| d.explained.as_slice()).collect();
            select_global_r(&explained, config.threshold)?
        }
    };
    let ucl = ucl_formula(n_days, rank, config.confidence)?;
    let slices: Vec<SliceModel> = decompositions
        .par_iter()
        .map(|d| d.truncate(rank))
        .collect::<Result<_>>()?;

    Ok(TpcaModel {
        rank,
        n_days,
        n_vars: tensor.n_vars(),
        n_slices: k_len,
        variable_names: tensor.variable_names().to_vec(),
        confidence: config.confidence,
        threshold: config.threshold,
        epsilon: config.epsilon,
        ucl,
        global_std: global_std(tensor),
        slices,
    })
}
