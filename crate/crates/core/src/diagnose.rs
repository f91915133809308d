//! Fault diagnosis by contribution decomposition.
//!
//! T² splits exactly over variables:
//!
//! ```text
//! C_j = Σ_r (t_r / λ_r) · p_jr · xhat_j,      Σ_j C_j = T²
//! ```
//!
//! since `Σ_j p_jr · xhat_j = t_r`. Contributions are signed; a negative
//! `C_j` pulls T² down and ranks last. The per-variable, per-component
//! projections `xhat_j · p_jr` are kept too for bar-chart output.

use crate::error::Result;
use crate::linalg::Matrix;
use crate::monitor::{hotelling_t2, prepare, project, MonitorPoint, Observation};
use crate::train::TpcaModel;

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnosis {
    pub k: usize,
    pub t2: f64,
    pub ucl: f64,
    /// Signed `C_j`, one per variable.
    pub contributions: Vec<f64>,
    /// `J × R` matrix of `xhat_j · p_jr`.
    pub variable_scores: Matrix,
    /// Variable indices by descending contribution, ties by index.
    pub ranking: Vec<usize>,
    pub root_cause: usize,
}

pub fn contributions(model: &TpcaModel, obs: &Observation) -> Result<Diagnosis> {
    let (slice, xhat) = prepare(model, obs)?;
    let scores = project(&xhat, slice);
    let t2 = hotelling_t2(&scores, &slice.eigenvalues);
    let rank = slice.rank();

    let weights: Vec<f64> = scores
        .iter()
        .zip(&slice.eigenvalues)
        .map(|(t, l)| t / l)
        .collect();
    let mut variable_scores = Matrix::zeros(model.n_vars, rank);
    let mut contrib = vec![0.0; model.n_vars];
    for (j, c) in contrib.iter_mut().enumerate() {
        let p = slice.loadings.row(j);
        for r in 0..rank {
            let s = xhat[j] * p[r];
            variable_scores[(j, r)] = s;
            *c += weights[r] * s;
        }
    }

    let mut ranking: Vec<usize> = (0..model.n_vars).collect();
    ranking.sort_by(|&a, &b| contrib[b].total_cmp(&contrib[a]).then(a.cmp(&b)));
    let root_cause = ranking[0];
    Ok(Diagnosis {
        k: obs.k,
        t2,
        ucl: model.ucl,
        contributions: contrib,
        variable_scores,
        ranking,
        root_cause,
    })
}

/// A run of consecutive out-of-control seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultEvent {
    pub start_k: usize,
    pub end_k: usize,
    pub peak_t2: f64,
    pub peak_k: usize,
    /// Majority vote over the event's fault seconds; ties go to the lowest
    /// variable index.
    pub root_cause: usize,
    /// Fraction of the event's fault seconds whose root cause is
    /// `root_cause`.
    pub root_cause_share: f64,
    /// Number of fault seconds in the event.
    pub fault_seconds: usize,
}

/// Groups fault points into events.
///
/// Two fault seconds belong to the same event when at most `gap` seconds
/// separate them. `diagnoses[i]` must describe `points[i]`; points are
/// expected in ascending `k`.
///
/// # Panics
///
/// Panics if the two slices differ in length.
pub fn detect_events(points: &[MonitorPoint], diagnoses: &[Diagnosis], gap: usize) -> Vec<FaultEvent> {
    assert_eq!(points.len(), diagnoses.len(), "one diagnosis per point");
    let n_vars = diagnoses.first().map_or(0, |d| d.contributions.len());

    let mut events = Vec::new();
    let mut current: Option<(FaultEvent, Vec<usize>)> = None;
    for (p, d) in points.iter().zip(diagnoses).filter(|(p, _)| p.fault) {
        if let Some((ev, votes)) = current.as_mut() {
            if p.k - ev.end_k <= gap + 1 {
                ev.end_k = p.k;
                ev.fault_seconds += 1;
                if p.t2 > ev.peak_t2 {
                    ev.peak_t2 = p.t2;
                    ev.peak_k = p.k;
                }
                votes[d.root_cause] += 1;
                continue;
            }
            events.push(finish(current.take().expect("checked above")));
        }
        let mut votes = vec![0; n_vars.max(d.root_cause + 1)];
        votes[d.root_cause] += 1;
        current = Some((
            FaultEvent {
                start_k: p.k,
                end_k: p.k,
                peak_t2: p.t2,
                peak_k: p.k,
                root_cause: d.root_cause,
                root_cause_share: 1.0,
                fault_seconds: 1,
            },
            votes,
        ));
    }
    if let Some(c) = current {
        events.push(finish(c));
    }
    events
}

fn finish((mut ev, votes): (FaultEvent, Vec<usize>)) -> FaultEvent {
    let (best, count) = votes
        .iter()
        .enumerate()
        .fold((0, 0), |(bi, bc), (i, &c)| if c > bc { (i, c) } else { (bi, bc) });
    ev.root_cause = best;
    ev.root_cause_share = count as f64 / ev.fault_seconds as f64;
    ev
}
