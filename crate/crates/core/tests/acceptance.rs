//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line each and exits non-zero if any fails.
//!
//! Run with `cargo test -p tmspc --test acceptance`.

mod common;

use std::io::Cursor;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::Rng;

use common::*;
use tmspc::diagnose::contributions;
use tmspc::ingest::TrainingTensor;
use tmspc::linalg::Matrix;
use tmspc::monitor::{monitor_point, monitor_series, observations_from_grid, ucl_formula, Observation};
use tmspc::persist::{load_model, save_model, ModelReader};
use tmspc::preprocess::{standardize_rows, EPSILON};
use tmspc::statfun::{f_quantile, FParams};
use tmspc::synthgen::{
    generate_noc, generate_verification, inject_fault, FaultKind, FaultSpec, ScenarioSpec,
};
use tmspc::train::{decompose_slice, train, TpcaModel, TrainConfig};
use tmspc::SECONDS_PER_DAY;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(elapsed: Duration, budget: Duration, what: &str) -> Result<(), String> {
    check(elapsed < budget, || {
        format!("{what} took {:.2} s, budget {:.0} s", elapsed.as_secs_f64(), budget.as_secs_f64())
    })
}

// ---------------------------------------------------------------- 1

fn ucl_reproduction() -> Outcome {
    let ucl = ucl_formula(12, 1, 0.95).map_err(|e| e.to_string())?;
    check((5.22..=5.27).contains(&ucl), || format!("UCL = {ucl}"))?;
    Ok(format!("UCL(I=12, R=1, 0.95) = {ucl:.4}"))
}

// ---------------------------------------------------------------- 2

/// Γ(n/2) by exact recursion from Γ(1/2) = √π and Γ(1) = 1.
fn gamma_half(n: u32) -> f64 {
    let (mut g, mut x) = if n.is_multiple_of(2) { (1.0, 1.0) } else { (std::f64::consts::PI.sqrt(), 0.5) };
    while x < n as f64 / 2.0 {
        g *= x;
        x += 1.0;
    }
    g
}

/// F CDF by Simpson integration of the density in `u = √x`, which removes
/// the singularity at zero for `d1 = 1`.
fn f_cdf_by_integration(q: f64, d1: u32, d2: u32) -> f64 {
    let beta = gamma_half(d1) * gamma_half(d2) / gamma_half(d1 + d2);
    let (a, b) = (d1 as f64, d2 as f64);
    let g = |u: f64| {
        2.0 * (a / b).powf(a / 2.0) * u.powf(a - 1.0) * (1.0 + a * u * u / b).powf(-(a + b) / 2.0)
            / beta
    };
    let n = 20_000;
    let h = q.sqrt() / n as f64;
    let mut s = g(0.0) + g(q.sqrt());
    for i in 1..n {
        s += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn quantile_by_integration(p: f64, d1: u32, d2: u32) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while f_cdf_by_integration(hi, d1, d2) < p {
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f_cdf_by_integration(mid, d1, d2) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn f_quantile_oracle() -> Outcome {
    let q = |p, d1, d2| f_quantile(p, FParams::new(d1, d2).unwrap()).map_err(|e| e.to_string());
    let first = q(0.95, 1, 11)?;
    check((first - 4.844).abs() <= 0.002, || format!("F⁻¹(0.95; 1, 11) = {first}"))?;

    // Published table values.
    let table: [(f64, u32, u32, f64); 9] = [
        (0.95, 2, 18, 3.55456),
        (0.95, 5, 10, 3.32583),
        (0.99, 3, 20, 4.93819),
        (0.95, 4, 8, 3.83785),
        (0.90, 1, 10, 3.28502),
        (0.99, 1, 11, 9.64603),
        (0.975, 2, 12, 5.09587),
        (0.95, 6, 6, 4.28387),
        (0.95, 10, 20, 2.34788),
    ];
    let mut worst: f64 = 0.0;
    for &(p, d1, d2, tabulated) in &table {
        let got = q(p, d1, d2)?;
        let integrated = quantile_by_integration(p, d1, d2);
        let e = rel_err(got, tabulated).max(rel_err(got, integrated));
        check(e <= 1e-3, || {
            format!("F⁻¹({p}; {d1}, {d2}) = {got}, table {tabulated}, integration {integrated}")
        })?;
        worst = worst.max(e);
    }
    Ok(format!("F⁻¹(0.95; 1, 11) = {first:.5}; 9 points, worst relative error {worst:.1e}"))
}

// ---------------------------------------------------------------- 3

fn pca_suite() -> Outcome {
    let mut rng = rng(3);
    let (i_len, j_len) = (12, 7);
    let dof = (i_len - 1) as f64;
    let mut worst = [0.0f64; 5];
    for trial in 0..1000 {
        let x = random_slice(&mut rng, i_len, j_len);
        let dec = decompose_slice(0, &x, EPSILON).map_err(|e| e.to_string())?;
        let xhat = standardize_rows(&x, &dec.stats);

        // Trace of the correlation matrix computed from scratch.
        let mut trace = 0.0;
        for j in 0..j_len {
            let col = x.column(j);
            let mean = col.iter().sum::<f64>() / i_len as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / dof;
            trace += col.iter().map(|v| (v - mean).powi(2) / var).sum::<f64>() / dof;
        }
        let trace_err = (dec.eigenvalues.iter().sum::<f64>() - trace).abs();

        let v = &dec.vectors;
        let ortho_err = v.transpose().matmul(v).max_abs_diff(&Matrix::identity(v.cols()));
        let scores = xhat.matmul(v);
        let recon_err = scores.matmul(&v.transpose()).max_abs_diff(&xhat);

        let mut var_err: f64 = 0.0;
        for r in 0..v.cols() {
            let s: f64 = scores.column(r).iter().map(|t| t * t).sum::<f64>() / dof;
            var_err = var_err.max((s - dec.eigenvalues[r]).abs());
        }

        let mut resid_err: f64 = 0.0;
        for rank in 1..v.cols() {
            let mut energy = 0.0;
            for i in 0..i_len {
                for j in 0..j_len {
                    let fit: f64 = (0..rank).map(|r| scores[(i, r)] * v[(j, r)]).sum();
                    energy += (xhat[(i, j)] - fit).powi(2);
                }
            }
            let expected = dof * dec.eigenvalues[rank..].iter().sum::<f64>();
            resid_err = resid_err.max(rel_err(energy, expected));
        }

        let errs = [trace_err, ortho_err, recon_err, var_err, resid_err];
        let limits = [1e-10, 1e-10, 1e-8, 1e-8, 1e-6];
        for (n, ((e, l), w)) in errs.iter().zip(limits).zip(worst.iter_mut()).enumerate() {
            check(*e < l, || format!("slice {trial}: check {n} error {e:e} >= {l:e}"))?;
            *w = w.max(*e);
        }
    }
    Ok(format!(
        "1000 slices; worst trace {:.1e}, orthonormality {:.1e}, reconstruction {:.1e}, \
         score variance {:.1e}, residual energy {:.1e}",
        worst[0], worst[1], worst[2], worst[3], worst[4]
    ))
}

// ---------------------------------------------------------------- 4

fn training_rows(tensor: &TrainingTensor, k: usize) -> Vec<Observation> {
    let x = tensor.slice(k);
    (0..x.rows()).map(|i| Observation { k, x: x.row(i).to_vec() }).collect()
}

fn training_t2_identity() -> Outcome {
    let k_len = 300;
    let spec = ScenarioSpec { seed: 4, ..ScenarioSpec::solar_pv() };
    let tensor = generate_noc(&spec, k_len).map_err(|e| e.to_string())?;
    let i_len = tensor.n_days() as f64;
    let mut worst: f64 = 0.0;
    for rank in 1..=6 {
        let config = TrainConfig { rank: Some(rank), ..TrainConfig::default() };
        let model = train(&tensor, &config).map_err(|e| e.to_string())?;
        let expected = rank as f64 * (i_len - 1.0) / i_len;
        for k in 0..k_len {
            let obs = training_rows(&tensor, k);
            let mean = obs.iter().map(|o| monitor_point(&model, o).unwrap().t2).sum::<f64>()
                / obs.len() as f64;
            let err = (mean - expected).abs();
            check(err < 1e-8, || format!("R = {rank}, k = {k}: mean T² {mean}, expected {expected}"))?;
            worst = worst.max(err);
        }
    }

    let model = train(&tensor, &TrainConfig::default()).map_err(|e| e.to_string())?;
    let (mut below, mut total) = (0usize, 0usize);
    for k in 0..k_len {
        for o in training_rows(&tensor, k) {
            total += 1;
            below += usize::from(monitor_point(&model, &o).unwrap().t2 <= model.ucl);
        }
    }
    let frac = below as f64 / total as f64;
    check(frac >= 0.90, || format!("only {:.1}% of training points below UCL", 100.0 * frac))?;
    Ok(format!(
        "R = 1..6 worst |mean T² - R(I-1)/I| = {worst:.1e}; {:.2}% of training points below UCL (R = {})",
        100.0 * frac,
        model.rank
    ))
}

// ---------------------------------------------------------------- 5

fn contribution_completeness() -> Outcome {
    let spec = ScenarioSpec { seed: 5, ..ScenarioSpec::solar_pv() };
    let k_len = 200;
    let tensor = generate_noc(&spec, k_len).map_err(|e| e.to_string())?;
    let model = train(&tensor, &TrainConfig::default()).map_err(|e| e.to_string())?;
    let mut rng = rng(5);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let k = rng.random_range(0..k_len);
        let stats = &model.slices[k].stats;
        let scale = 10f64.powf(rng.random_range(-1.0..1.5));
        let x: Vec<f64> = (0..model.n_vars)
            .map(|j| stats.mean[j] + scale * stats.std[j] * gaussian(&mut rng))
            .collect();
        let d = contributions(&model, &Observation { k, x }).map_err(|e| e.to_string())?;
        let err = rel_err(d.contributions.iter().sum(), d.t2);
        check(err <= 1e-8, || format!("k = {k}: Σ C_j vs T² relative error {err:e}"))?;
        worst = worst.max(err);
    }

    let full = TrainConfig { rank: Some(model.n_vars), ..TrainConfig::default() };
    let model = train(&tensor, &full).map_err(|e| e.to_string())?;
    let mut worst_single: f64 = 0.0;
    for n in 0..1000 {
        let k = rng.random_range(0..k_len);
        let j_star = n % model.n_vars;
        let stats = &model.slices[k].stats;
        let mut x = stats.mean.clone();
        x[j_star] += rng.random_range(1.0..20.0) * stats.std[j_star];
        let d = contributions(&model, &Observation { k, x }).map_err(|e| e.to_string())?;
        let err = rel_err(d.contributions[j_star], d.t2);
        let others = (0..model.n_vars)
            .filter(|&j| j != j_star)
            .map(|j| d.contributions[j].abs())
            .fold(0.0, f64::max);
        check(err <= 1e-10 && others <= 1e-10, || {
            format!("k = {k}, j = {j_star}: C_j* error {err:e}, largest other {others:e}")
        })?;
        worst_single = worst_single.max(err.max(others));
    }
    Ok(format!(
        "10000 observations, worst Σ C_j relative error {worst:.1e}; \
         single-variable worst error {worst_single:.1e}"
    ))
}

// ---------------------------------------------------------------- 6

fn end_to_end() -> Outcome {
    let k_len = 3600;
    // 13:13 local time, mid-afternoon production.
    let fault = FaultSpec {
        kind: FaultKind::Spike,
        variable: 0,
        start_k: 1984,
        duration: 120,
        magnitude: 8.0,
    };
    let (mut window, mut detected, mut correct, mut clean, mut alarms) = (0, 0, 0, 0, 0);
    for seed in 0..100 {
        let spec = ScenarioSpec { seed, ..ScenarioSpec::solar_pv() };
        let tensor = generate_noc(&spec, k_len).map_err(|e| e.to_string())?;
        let model = train(&tensor, &TrainConfig::default()).map_err(|e| e.to_string())?;
        let verification = generate_verification(&spec, k_len);
        let faulty = inject_fault(&verification[0], &fault, &noc_std(&tensor, 0))
            .map_err(|e| e.to_string())?;
        for obs in observations_from_grid(&faulty) {
            if !fault.window().contains(&obs.k) {
                continue;
            }
            window += 1;
            if monitor_point(&model, &obs).unwrap().fault {
                detected += 1;
                correct += usize::from(contributions(&model, &obs).unwrap().root_cause == 0);
            }
        }
        for day in &verification[1..] {
            let points = monitor_series(&model, &observations_from_grid(day)).unwrap();
            clean += points.len();
            alarms += points.iter().filter(|p| p.fault).count();
        }
    }
    let detection = detected as f64 / window as f64;
    let false_alarm = alarms as f64 / clean as f64;
    let root = correct as f64 / detected.max(1) as f64;
    let summary = format!(
        "detection {:.2}%, false alarms {:.2}%, root cause correct {:.2}%",
        100.0 * detection,
        100.0 * false_alarm,
        100.0 * root
    );
    check(detection >= 0.95 && false_alarm <= 0.08 && root >= 0.95, || summary.clone())?;
    Ok(summary)
}

// ---------------------------------------------------------------- 7

fn cholesky(a: &Matrix) -> Matrix {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|m| l[(i, m)] * l[(j, m)]).sum();
            l[(i, j)] = if i == j { (a[(i, i)] - s).sqrt() } else { (a[(i, j)] - s) / l[(j, j)] };
        }
    }
    l
}

fn solve_lower_transpose(x: &Matrix, l: &Matrix) -> Matrix {
    // Y = X L⁻ᵀ, row by row: L yᵀ = xᵀ.
    let n = l.rows();
    let mut y = Matrix::zeros(x.rows(), n);
    for i in 0..x.rows() {
        for j in 0..n {
            let s: f64 = (0..j).map(|m| l[(j, m)] * y[(i, m)]).sum();
            y[(i, j)] = (x[(i, j)] - s) / l[(j, j)];
        }
    }
    y
}

/// `rows × J` data whose sample correlation is exactly equicorrelated with
/// coefficient `rho`, so the first component explains `(1 + (J-1)ρ)/J`.
fn equicorrelated_slice(rng: &mut rand_chacha::ChaCha8Rng, rows: usize, j_len: usize, rho: f64) -> Matrix {
    let mut z = Matrix::from_vec(rows, j_len, (0..rows * j_len).map(|_| gaussian(rng)).collect());
    for j in 0..j_len {
        let mean = z.column(j).iter().sum::<f64>() / rows as f64;
        for i in 0..rows {
            z[(i, j)] -= mean;
        }
    }
    let cov = Matrix::from_vec(
        j_len,
        j_len,
        z.transpose().matmul(&z).as_slice().iter().map(|v| v / (rows - 1) as f64).collect(),
    );
    let white = solve_lower_transpose(&z, &cholesky(&cov));
    let mut target = Matrix::identity(j_len);
    for a in 0..j_len {
        for b in 0..j_len {
            if a != b {
                target[(a, b)] = rho;
            }
        }
    }
    white.matmul(&cholesky(&target).transpose())
}

fn r_selection() -> Outcome {
    let (j_len, min_explained) = (7, 0.7727);
    let rho_for = |e: f64| (e * j_len as f64 - 1.0) / (j_len as f64 - 1.0);
    let mut rng = rng(7);
    let slices: Vec<Matrix> = [0.85, min_explained, 0.90, 0.80, 0.95]
        .iter()
        .map(|&e| equicorrelated_slice(&mut rng, 12, j_len, rho_for(e)))
        .collect();
    let tensor = tensor_from_slices(&slices);
    let fit = |threshold| {
        train(&tensor, &TrainConfig { threshold, ..TrainConfig::default() }).map_err(|e| e.to_string())
    };
    let at_75 = fit(0.75)?;
    let at_80 = fit(0.80)?;
    let min1 = at_75.min_explained()[0];
    check((min1 - min_explained).abs() < 1e-9, || format!("minimum explained {min1}"))?;
    check(at_75.rank == 1 && at_80.rank >= 2, || {
        format!("R = {} at 0.75, R = {} at 0.80", at_75.rank, at_80.rank)
    })?;
    Ok(format!(
        "min first-component explained {min1:.4}: R = {} at 0.75, R = {} at 0.80",
        at_75.rank, at_80.rank
    ))
}

// ---------------------------------------------------------------- 8, 9

fn full_day_tensor() -> &'static TrainingTensor {
    static TENSOR: OnceLock<TrainingTensor> = OnceLock::new();
    TENSOR.get_or_init(|| generate_noc(&ScenarioSpec::solar_pv(), SECONDS_PER_DAY).unwrap())
}

fn persistence() -> Outcome {
    let config = TrainConfig { rank: Some(1), ..TrainConfig::default() };
    let model = train(full_day_tensor(), &config).map_err(|e| e.to_string())?;
    check(model.n_slices == SECONDS_PER_DAY && model.n_vars == 7 && model.rank == 1, || {
        "unexpected model shape".into()
    })?;

    let start = Instant::now();
    let mut bytes = Vec::new();
    save_model(&model, &mut bytes).map_err(|e| e.to_string())?;
    let loaded: TpcaModel = load_model(bytes.as_slice()).map_err(|e| e.to_string())?;
    let mut again = Vec::new();
    save_model(&loaded, &mut again).map_err(|e| e.to_string())?;
    check(loaded == model && again == bytes, || "round trip is not bit-exact".into())?;

    let mut reader = ModelReader::new(Cursor::new(&bytes)).map_err(|e| e.to_string())?;
    let mut rng = rng(8);
    let mut picks = vec![0, 1, SECONDS_PER_DAY / 2, SECONDS_PER_DAY - 1];
    picks.extend((0..96).map(|_| rng.random_range(0..SECONDS_PER_DAY)));
    for &k in &picks {
        let s = reader.slice(k).map_err(|e| e.to_string())?;
        check(s == model.slices[k], || format!("seek-loaded slice {k} differs"))?;
    }
    let elapsed = start.elapsed();
    within_budget(elapsed, Duration::from_secs(5), "save + load")?;
    Ok(format!(
        "{} bytes, bit-exact round trip and {} seek loads in {:.2} s",
        bytes.len(),
        picks.len(),
        elapsed.as_secs_f64()
    ))
}

fn scale() -> Outcome {
    let tensor = full_day_tensor();
    let start = Instant::now();
    let model = train(tensor, &TrainConfig::default()).map_err(|e| e.to_string())?;
    let train_time = start.elapsed();
    within_budget(train_time, Duration::from_secs(60), "training")?;

    let day = &generate_verification(&ScenarioSpec::solar_pv(), SECONDS_PER_DAY)[0];
    let observations = observations_from_grid(day);
    check(observations.len() == SECONDS_PER_DAY, || "incomplete verification day".into())?;
    let start = Instant::now();
    let points = monitor_series(&model, &observations).map_err(|e| e.to_string())?;
    let monitor_time = start.elapsed();
    within_budget(monitor_time, Duration::from_secs(5), "monitoring")?;
    Ok(format!(
        "trained 12×7×86400 (R = {}) in {:.2} s; monitored {} observations in {:.2} s",
        model.rank,
        train_time.as_secs_f64(),
        points.len(),
        monitor_time.as_secs_f64()
    ))
}

// ----------------------------------------------------------------

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("UCL reproduction", Duration::from_secs(1), ucl_reproduction),
        ("F-quantile oracle", Duration::from_secs(1), f_quantile_oracle),
        ("PCA correctness suite", Duration::from_secs(10), pca_suite),
        ("Training-T² identity", Duration::from_secs(10), training_t2_identity),
        ("Contribution completeness", Duration::from_secs(5), contribution_completeness),
        ("End-to-end detection and diagnosis", Duration::from_secs(120), end_to_end),
        ("R selection", Duration::from_secs(1), r_selection),
        ("Persistence", Duration::from_secs(60), persistence),
        ("Scale", Duration::from_secs(120), scale),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|detail| {
            within_budget(elapsed, *budget, "criterion").map(|_| detail)
        });
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] {}. {name}: {detail} ({:.2} s)", n + 1, elapsed.as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
