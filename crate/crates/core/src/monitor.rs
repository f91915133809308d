//! Scoring new observations: projection onto the slice loadings, Hotelling's
//! T², and the F-based upper control limit.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::DayGrid;
use crate::preprocess::standardize;
use crate::statfun::{f_quantile, FParams};
use crate::train::{SliceModel, TpcaModel};

/// Multiple of a variable's whole-day standard deviation beyond which a
/// reading on an inactive (constant-at-this-slice) variable is flagged.
pub const INACTIVE_DEVIATION_SIGMAS: f64 = 3.0;

/// Raw readings at one second of the day.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub k: usize,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorPoint {
    pub k: usize,
    pub scores: Vec<f64>,
    pub t2: f64,
    pub ucl: f64,
    /// `t2 > ucl`
    pub fault: bool,
    /// Per variable: inactive at this slice and moved at least
    /// [`INACTIVE_DEVIATION_SIGMAS`] whole-day std away from its constant.
    /// Such deviations cannot show up in T².
    pub inactive_deviation: Vec<bool>,
}

impl MonitorPoint {
    pub fn any_inactive_deviation(&self) -> bool {
        self.inactive_deviation.iter().any(|&f| f)
    }
}

/// Scores `t = xhatᵀ P` of a standardized observation.
pub fn project(xhat: &[f64], slice: &SliceModel) -> Vec<f64> {
    let p = &slice.loadings;
    let mut t = vec![0.0; p.cols()];
    for (j, &x) in xhat.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (tr, &pjr) in t.iter_mut().zip(p.row(j)) {
            *tr += x * pjr;
        }
    }
    t
}

/// `Σ_r t_r² / λ_r`, with each score variance taken to be its training
/// eigenvalue.
pub fn hotelling_t2(scores: &[f64], eigenvalues: &[f64]) -> f64 {
    scores
        .iter()
        .zip(eigenvalues)
        .map(|(t, l)| t * t / l)
        .sum()
}

/// Upper control limit for T² of a new observation:
/// `(I-1)(I+1)R / (I(I-R)) · F⁻¹(confidence; R, I-R)`.
pub fn ucl_formula(days: usize, rank: usize, confidence: f64) -> Result<f64> {
    if rank < 1 || days <= rank {
        return Err(Error::DegreesOfFreedom { days, rank });
    }
    let i = days as f64;
    let r = rank as f64;
    let params = FParams::new(rank as u32, (days - rank) as u32)?;
    let prefactor = (i - 1.0) * (i + 1.0) * r / (i * (i - r));
    Ok(prefactor * f_quantile(confidence, params)?)
}

fn check_observation(model: &TpcaModel, obs: &Observation) -> Result<()> {
    if obs.k >= model.n_slices {
        return Err(Error::SliceOutOfRange {
            k: obs.k,
            len: model.n_slices,
        });
    }
    if obs.x.len() != model.n_vars {
        return Err(Error::DimensionMismatch {
            what: "observation variables",
            expected: model.n_vars,
            found: obs.x.len(),
        });
    }
    if obs.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!(
            "observation at k = {} has non-finite values",
            obs.k
        )));
    }
    Ok(())
}

/// Standardized observation and its slice, after validation.
pub(crate) fn prepare<'m>(
    model: &'m TpcaModel,
    obs: &Observation,
) -> Result<(&'m SliceModel, Vec<f64>)> {
    check_observation(model, obs)?;
    let slice = &model.slices[obs.k];
    Ok((slice, standardize(&obs.x, &slice.stats)))
}

pub fn monitor_point(model: &TpcaModel, obs: &Observation) -> Result<MonitorPoint> {
    let (slice, xhat) = prepare(model, obs)?;
    let scores = project(&xhat, slice);
    let t2 = hotelling_t2(&scores, &slice.eigenvalues);
    let inactive_deviation = (0..model.n_vars)
        .map(|j| {
            if slice.stats.active[j] {
                return false;
            }
            let dev = (obs.x[j] - slice.stats.mean[j]).abs();
            dev > 0.0 && dev >= INACTIVE_DEVIATION_SIGMAS * model.global_std[j]
        })
        .collect();
    Ok(MonitorPoint {
        k: obs.k,
        scores,
        t2,
        ucl: model.ucl,
        fault: t2 > model.ucl,
        inactive_deviation,
    })
}

/// [`monitor_point`] over a sequence, order preserved.
pub fn monitor_series(model: &TpcaModel, observations: &[Observation]) -> Result<Vec<MonitorPoint>> {
    observations
        .par_iter()
        .map(|o| monitor_point(model, o))
        .collect()
}

/// One observation per fully observed second of `grid`; seconds with any
/// missing variable are skipped.
pub fn observations_from_grid(grid: &DayGrid) -> Vec<Observation> {
    (0..grid.n_slices())
        .filter(|&k| grid.row_complete(k))
        .map(|k| Observation {
            k,
            x: grid.row(k).to_vec(),
        })
        .collect()
}
