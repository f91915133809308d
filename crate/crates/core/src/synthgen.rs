//! Synthetic multi-day telemetry with injectable faults.
//!
//! Each variable follows a smooth diurnal profile whose amplitude jitters
//! from day to day (a cloudiness factor shared by all variables of a day),
//! plus additive Gaussian noise mixed across variables by a coupling matrix:
//!
//! ```text
//! x_j(day, k) = offset_j + amplitude_j · shape_j(u_k) · (1 + jitter_j · a_day)
//!             + noise_j · (C z_{day,k})_j
//! ```
//!
//! with `u_k = (k + ½)/K`, `a_day ~ N(0, 1)` and `z ~ N(0, I)`. Every day
//! draws from its own ChaCha stream derived from the scenario seed, so days
//! can be generated independently and in any order.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::{Duration, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{DayGrid, TrainingTensor};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileShape {
    /// Gaussian bump centred at midday, zero at night.
    Bell,
    /// Constant 1 all day.
    Flat,
}

impl ProfileShape {
    fn eval(self, u: f64, width: f64) -> f64 {
        match self {
            ProfileShape::Bell => {
                let z = (u - 0.5) / width;
                (-0.5 * z * z).exp()
            }
            ProfileShape::Flat => 1.0,
        }
    }
}

impl FromStr for ProfileShape {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "bell" => Ok(ProfileShape::Bell),
            "flat" => Ok(ProfileShape::Flat),
            other => Err(format!("unknown profile shape {other:?} (bell|flat)")),
        }
    }
}

impl fmt::Display for ProfileShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileShape::Bell => "bell",
            ProfileShape::Flat => "flat",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableSpec {
    pub name: String,
    pub shape: ProfileShape,
    pub offset: f64,
    pub amplitude: f64,
    /// Day-to-day amplitude jitter as a fraction of the amplitude.
    pub jitter: f64,
    /// Additive noise std (before coupling).
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    /// I
    pub train_days: usize,
    pub verify_days: usize,
    pub start_date: NaiveDate,
    pub seed: u64,
    /// Width of the bell profile as a fraction of the day.
    pub bell_width: f64,
    pub variables: Vec<VariableSpec>,
    /// `J × J` mixing of the latent noise.
    pub coupling: Matrix,
}

impl ScenarioSpec {
    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn variable_names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    pub fn total_days(&self) -> usize {
        self.train_days + self.verify_days
    }

    pub fn date_of(&self, day_index: usize) -> NaiveDate {
        self.start_date + Duration::days(day_index as i64)
    }

    /// Seven-channel solar PV plant: DC and AC voltage/current, humidity,
    /// temperature and grid (PEA) voltage.
    pub fn solar_pv() -> Self {
        let var = |name: &str, shape, offset, amplitude, jitter, noise| VariableSpec {
            name: name.to_string(),
            shape,
            offset,
            amplitude,
            jitter,
            noise,
        };
        use ProfileShape::*;
        let variables = vec![
            // Array voltage barely depends on irradiance; current scales with it.
            var("dc_voltage", Bell, 20.0, 280.0, 0.005, 6.0),
            var("dc_current", Bell, 0.1, 8.0, 0.15, 0.25),
            var("ac_voltage", Flat, 229.0, 0.0, 0.0, 1.2),
            var("ac_current", Bell, 0.3, 7.0, 0.15, 0.25),
            var("humidity", Bell, 85.0, -30.0, 0.08, 2.0),
            var("temperature", Bell, 25.0, 9.0, 0.1, 0.5),
            var("pea_voltage", Flat, 229.0, 0.0, 0.0, 1.2),
        ];
        let mut coupling = Matrix::identity(variables.len());
        // Inverter output tracks the grid it is tied to.
        coupling[(2, 6)] = 0.6;
        // Warmer air holds more moisture: temperature noise leaks into humidity.
        coupling[(4, 5)] = -0.5;
        ScenarioSpec {
            train_days: 12,
            verify_days: 5,
            start_date: NaiveDate::from_ymd_opt(2019, 6, 1).expect("valid date"),
            seed: 42,
            bell_width: 0.12,
            variables,
            coupling,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let j = self.n_vars();
        let bad = |reason: String| Err(Error::Scenario { line: 0, reason });
        if j == 0 {
            return bad("no variables".into());
        }
        if self.coupling.rows() != j || self.coupling.cols() != j {
            return bad(format!("coupling matrix must be {j}×{j}"));
        }
        if self.coupling.as_slice().iter().any(|v| !v.is_finite()) {
            return bad("coupling matrix has non-finite entries".into());
        }
        for v in &self.variables {
            let finite = v.offset.is_finite() && v.amplitude.is_finite();
            if !finite || !(v.noise >= 0.0) || !(v.jitter >= 0.0 && v.jitter.is_finite()) {
                return bad(format!(
                    "variable {} needs finite values with jitter >= 0 and noise >= 0",
                    v.name
                ));
            }
        }
        if !(self.bell_width > 0.0) {
            return bad("bell_width must be > 0".into());
        }
        Ok(())
    }

    /// Parses the key-value scenario format (see [`ScenarioSpec::to_text`]).
    ///
    /// Keys override the [`ScenarioSpec::solar_pv`] defaults; any `variable`
    /// line replaces the default variable list (and resets the coupling to
    /// identity).
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = ScenarioSpec::solar_pv();
        let mut vars: Vec<VariableSpec> = Vec::new();
        let mut couplings: Vec<(usize, String, String, f64)> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |reason: String| Error::Scenario {
                line: line_no,
                reason,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            let key = key.trim();
            let value = value.trim();
            fn num<T: FromStr>(v: &str, what: &str) -> std::result::Result<T, String> {
                v.parse().map_err(|_| format!("invalid {what} {v:?}"))
            }
            match key {
                "train_days" => spec.train_days = num(value, "day count").map_err(err)?,
                "verify_days" => spec.verify_days = num(value, "day count").map_err(err)?,
                "seed" => spec.seed = num(value, "seed").map_err(err)?,
                "bell_width" => spec.bell_width = num(value, "bell width").map_err(err)?,
                "start_date" => {
                    spec.start_date = NaiveDate::parse_from_str(value, "%Y-%m-%d")
                        .map_err(|_| err(format!("invalid date {value:?}")))?
                }
                "variable" => {
                    let f: Vec<&str> = value.split_whitespace().collect();
                    if f.len() != 6 {
                        return Err(err(
                            "variable needs `name shape offset amplitude jitter noise`".into(),
                        ));
                    }
                    vars.push(VariableSpec {
                        name: f[0].to_string(),
                        shape: f[1].parse().map_err(err)?,
                        offset: num(f[2], "offset").map_err(err)?,
                        amplitude: num(f[3], "amplitude").map_err(err)?,
                        jitter: num(f[4], "jitter").map_err(err)?,
                        noise: num(f[5], "noise").map_err(err)?,
                    });
                }
                "coupling" => {
                    let f: Vec<&str> = value.split_whitespace().collect();
                    if f.len() != 3 {
                        return Err(err("coupling needs `row_var col_var weight`".into()));
                    }
                    couplings.push((
                        line_no,
                        f[0].to_string(),
                        f[1].to_string(),
                        num(f[2], "weight").map_err(err)?,
                    ));
                }
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }

        if !vars.is_empty() {
            spec.coupling = Matrix::identity(vars.len());
            spec.variables = vars;
        }
        let names = spec.variable_names();
        for (line, row, col, w) in couplings {
            let find = |n: &str| {
                names.iter().position(|x| x == n).ok_or_else(|| Error::Scenario {
                    line,
                    reason: format!("unknown variable {n:?}"),
                })
            };
            let (r, c) = (find(&row)?, find(&col)?);
            spec.coupling[(r, c)] = w;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Serializes to the format read by [`ScenarioSpec::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("train_days = {}\n", self.train_days));
        s.push_str(&format!("verify_days = {}\n", self.verify_days));
        s.push_str(&format!("start_date = {}\n", self.start_date.format("%Y-%m-%d")));
        s.push_str(&format!("seed = {}\n", self.seed));
        s.push_str(&format!("bell_width = {}\n", self.bell_width));
        s.push_str("# variable = name shape offset amplitude jitter noise\n");
        for v in &self.variables {
            s.push_str(&format!(
                "variable = {} {} {} {} {} {}\n",
                v.name, v.shape, v.offset, v.amplitude, v.jitter, v.noise
            ));
        }
        s.push_str("# coupling = row_var col_var weight (diagonal defaults to 1)\n");
        let j = self.n_vars();
        for r in 0..j {
            for c in 0..j {
                let w = self.coupling[(r, c)];
                let default = if r == c { 1.0 } else { 0.0 };
                if w != default {
                    s.push_str(&format!(
                        "coupling = {} {} {}\n",
                        self.variables[r].name, self.variables[c].name, w
                    ));
                }
            }
        }
        s
    }
}

/// Generates one day (`day_index` counts from the scenario's first day).
pub fn generate_day(spec: &ScenarioSpec, day_index: usize, n_slices: usize) -> DayGrid {
    let j = spec.n_vars();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(day_index as u64);
    let a: f64 = StandardNormal.sample(&mut rng);

    let mut values = Vec::with_capacity(n_slices * j);
    let mut z = vec![0.0; j];
    for k in 0..n_slices {
        let u = (k as f64 + 0.5) / n_slices as f64;
        for zi in &mut z {
            *zi = StandardNormal.sample(&mut rng);
        }
        for (jj, v) in spec.variables.iter().enumerate() {
            let mixed: f64 = spec
                .coupling
                .row(jj)
                .iter()
                .zip(&z)
                .map(|(c, zi)| c * zi)
                .sum();
            let scale = 1.0 + v.jitter * a;
            let base = v.offset + v.amplitude * v.shape.eval(u, spec.bell_width) * scale;
            values.push(base + v.noise * mixed);
        }
    }
    DayGrid::from_values(spec.date_of(day_index), n_slices, j, values)
}

/// Days `range` of the scenario, generated in parallel.
pub fn generate_days(spec: &ScenarioSpec, range: std::ops::Range<usize>, n_slices: usize) -> Vec<DayGrid> {
    range
        .into_par_iter()
        .map(|d| generate_day(spec, d, n_slices))
        .collect()
}

/// The normal-operation training tensor (the first `train_days` days).
pub fn generate_noc(spec: &ScenarioSpec, n_slices: usize) -> Result<TrainingTensor> {
    spec.validate()?;
    TrainingTensor::new(
        generate_days(spec, 0..spec.train_days, n_slices),
        spec.variable_names(),
    )
}

/// Clean verification days following the training days.
pub fn generate_verification(spec: &ScenarioSpec, n_slices: usize) -> Vec<DayGrid> {
    generate_days(spec, spec.train_days..spec.total_days(), n_slices)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FaultKind {
    /// Alternating ±magnitude·std at every window second.
    Spike,
    /// Linear ramp reaching +magnitude·std at the window's last second.
    Drift,
    /// Variable frozen at its window-start value.
    Stuck,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaultSpec {
    pub kind: FaultKind,
    pub variable: usize,
    pub start_k: usize,
    pub duration: usize,
    /// In units of the variable's NOC std.
    pub magnitude: f64,
}

impl FaultSpec {
    pub fn window(&self) -> std::ops::Range<usize> {
        self.start_k..self.start_k + self.duration
    }
}

impl FromStr for FaultSpec {
    type Err = Error;

    /// `kind:var:start:dur:mag`, e.g. `spike:0:43200:60:8`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::Fault(format!("{s:?}: {why}"));
        let f: Vec<&str> = s.split(':').collect();
        if f.len() != 5 {
            return Err(bad("expected kind:var:start:dur:mag"));
        }
        let kind = match f[0] {
            "spike" => FaultKind::Spike,
            "drift" => FaultKind::Drift,
            "stuck" => FaultKind::Stuck,
            _ => return Err(bad("kind must be spike, drift or stuck")),
        };
        let fault = FaultSpec {
            kind,
            variable: f[1].parse().map_err(|_| bad("bad variable index"))?,
            start_k: f[2].parse().map_err(|_| bad("bad start"))?,
            duration: f[3].parse().map_err(|_| bad("bad duration"))?,
            magnitude: f[4].parse().map_err(|_| bad("bad magnitude"))?,
        };
        if !fault.magnitude.is_finite() {
            return Err(bad("magnitude must be finite"));
        }
        Ok(fault)
    }
}

/// Returns a copy of `day` with `fault` applied. `noc_std[k]` is the
/// variable's normal-operation std at slice `k`.
pub fn inject_fault(day: &DayGrid, fault: &FaultSpec, noc_std: &[f64]) -> Result<DayGrid> {
    let k_len = day.n_slices();
    if fault.variable >= day.n_vars() {
        return Err(Error::Fault(format!(
            "variable {} out of range (J = {})",
            fault.variable,
            day.n_vars()
        )));
    }
    if fault.duration == 0 || fault.start_k + fault.duration > k_len {
        return Err(Error::Fault(format!(
            "window [{}, {}) outside [0, {k_len})",
            fault.start_k,
            fault.start_k + fault.duration
        )));
    }
    if noc_std.len() != k_len {
        return Err(Error::DimensionMismatch {
            what: "NOC std per slice",
            expected: k_len,
            found: noc_std.len(),
        });
    }
    if !fault.magnitude.is_finite() {
        return Err(Error::Fault("magnitude must be finite".into()));
    }

    let j = fault.variable;
    let mut out = day.clone();
    let start_value = day.get(fault.start_k, j);
    for (i, k) in fault.window().enumerate() {
        let Some(v) = day.get(k, j) else { continue };
        let new = match fault.kind {
            FaultKind::Spike => {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                v + sign * fault.magnitude * noc_std[k]
            }
            FaultKind::Drift => {
                let frac = (i + 1) as f64 / fault.duration as f64;
                v + frac * fault.magnitude * noc_std[fault.start_k]
            }
            FaultKind::Stuck => match start_value {
                Some(s) => s,
                None => v,
            },
        };
        out.set(k, j, Some(new));
    }
    Ok(out)
}

/// Writes a day in the ingest CSV profile (UTC timestamps, `NaN` for
/// missing cells).
pub fn write_day_csv<W: Write>(day: &DayGrid, names: &[String], mut w: W) -> std::io::Result<()> {
    write!(w, "timestamp")?;
    for n in names {
        write!(w, ",{n}")?;
    }
    writeln!(w)?;
    let midnight = day.day.and_hms_opt(0, 0, 0).expect("valid time");
    for k in 0..day.n_slices() {
        let ts = midnight + Duration::seconds(k as i64);
        write!(w, "{}", ts.format("%Y-%m-%dT%H:%M:%SZ"))?;
        for j in 0..day.n_vars() {
            match day.get(k, j) {
                Some(v) => write!(w, ",{v}")?,
                None => write!(w, ",NaN")?,
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::{slice_stats, EPSILON};
    use crate::train::{train, TrainConfig};

    fn small_spec() -> ScenarioSpec {
        ScenarioSpec {
            train_days: 6,
            ..ScenarioSpec::solar_pv()
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = small_spec();
        let a = generate_noc(&spec, 50).unwrap();
        let b = generate_noc(&spec, 50).unwrap();
        assert_eq!(a, b);
        let other = ScenarioSpec { seed: 7, ..spec };
        assert_ne!(a, generate_noc(&other, 50).unwrap());
    }

    #[test]
    fn day_streams_are_independent_of_range() {
        let spec = small_spec();
        let all = generate_days(&spec, 0..6, 20);
        let one = generate_day(&spec, 4, 20);
        assert_eq!(all[4], one);
    }

    #[test]
    fn noiseless_days_are_identical_and_degenerate() {
        let mut spec = small_spec();
        spec.variables.iter_mut().for_each(|v| {
            v.noise = 0.0;
            v.jitter = 0.0;
        });
        let t = generate_noc(&spec, 30).unwrap();
        for d in &t.days()[1..] {
            for k in 0..30 {
                assert_eq!(d.row(k), t.days()[0].row(k));
            }
        }
        assert!(slice_stats(0, &t.slice(0), EPSILON).is_err());
        assert!(train(&t, &TrainConfig::default()).is_err());
    }

    fn std_profile(t: &TrainingTensor, j: usize) -> Vec<f64> {
        (0..t.n_slices())
            .map(|k| slice_stats(k, &t.slice(k), EPSILON).unwrap().std[j])
            .collect()
    }

    #[test]
    fn zero_magnitude_is_identity() {
        let t = generate_noc(&small_spec(), 40).unwrap();
        let std = std_profile(&t, 1);
        for kind in ["spike", "drift", "stuck"] {
            if kind == "stuck" {
                continue;
            }
            let f: FaultSpec = format!("{kind}:1:5:10:0").parse().unwrap();
            assert_eq!(inject_fault(&t.days()[0], &f, &std).unwrap(), t.days()[0]);
        }
    }

    #[test]
    fn stuck_on_constant_is_identity() {
        let day = DayGrid::from_values(NaiveDate::from_ymd_opt(2019, 6, 1).unwrap(), 10, 2, {
            let mut v = vec![3.0; 20];
            for k in 0..10 {
                v[2 * k + 1] = k as f64;
            }
            v
        });
        let f: FaultSpec = "stuck:0:2:5:1".parse().unwrap();
        assert_eq!(inject_fault(&day, &f, &[1.0; 10]).unwrap(), day);
        let f: FaultSpec = "stuck:1:2:5:1".parse().unwrap();
        let out = inject_fault(&day, &f, &[1.0; 10]).unwrap();
        assert!((2..7).all(|k| out.get(k, 1) == Some(2.0)));
        assert_eq!(out.get(7, 1), Some(7.0));
    }

    #[test]
    fn spike_offsets_are_exact() {
        let t = generate_noc(&small_spec(), 60).unwrap();
        let std = std_profile(&t, 0);
        let f: FaultSpec = "spike:0:20:10:8".parse().unwrap();
        let day = &t.days()[2];
        let out = inject_fault(day, &f, &std).unwrap();
        for k in 0..60 {
            for j in 0..day.n_vars() {
                let d = out.get(k, j).unwrap() - day.get(k, j).unwrap();
                if j == 0 && (20..30).contains(&k) {
                    let sign = if (k - 20) % 2 == 0 { 1.0 } else { -1.0 };
                    assert!((d - sign * 8.0 * std[k]).abs() < 1e-9 * (1.0 + 8.0 * std[k]));
                } else {
                    assert_eq!(d, 0.0);
                }
            }
        }
    }

    #[test]
    fn drift_ramps_to_magnitude() {
        let t = generate_noc(&small_spec(), 30).unwrap();
        let std = vec![2.0; 30];
        let f: FaultSpec = "drift:3:10:4:5".parse().unwrap();
        let day = &t.days()[0];
        let out = inject_fault(day, &f, &std).unwrap();
        let last = out.get(13, 3).unwrap() - day.get(13, 3).unwrap();
        assert!((last - 10.0).abs() < 1e-9);
        let first = out.get(10, 3).unwrap() - day.get(10, 3).unwrap();
        assert!((first - 2.5).abs() < 1e-9);
    }

    #[test]
    fn bad_faults() {
        assert!("spike:0:1".parse::<FaultSpec>().is_err());
        assert!("zap:0:1:2:3".parse::<FaultSpec>().is_err());
        assert!("spike:0:1:2:inf".parse::<FaultSpec>().is_err());
        let t = generate_noc(&small_spec(), 10).unwrap();
        let f: FaultSpec = "spike:0:8:5:1".parse().unwrap();
        assert!(inject_fault(&t.days()[0], &f, &[1.0; 10]).is_err());
        let f: FaultSpec = "spike:9:0:5:1".parse().unwrap();
        assert!(inject_fault(&t.days()[0], &f, &[1.0; 10]).is_err());
    }

    #[test]
    fn scenario_text_round_trip() {
        let spec = ScenarioSpec::solar_pv();
        let parsed = ScenarioSpec::parse(&spec.to_text()).unwrap();
        assert_eq!(parsed, spec);
    }

    #[test]
    fn scenario_parse_errors_carry_line() {
        let err = ScenarioSpec::parse("seed = 1\nbogus = 2\n").unwrap_err();
        assert!(matches!(err, Error::Scenario { line: 2, .. }));
        let err = ScenarioSpec::parse("variable = a bell 1 2 0.1\n").unwrap_err();
        assert!(matches!(err, Error::Scenario { line: 1, .. }));
        let err = ScenarioSpec::parse("variable = a bell 1 2 0 3\ncoupling = a b 0.5\n").unwrap_err();
        assert!(matches!(err, Error::Scenario { line: 2, .. }));
        let err = ScenarioSpec::parse("variable = a bell 1 2 0 -3\n").unwrap_err();
        assert!(matches!(err, Error::Scenario { .. }));
    }

    #[test]
    fn custom_variables_reset_coupling() {
        let spec = ScenarioSpec::parse(
            "train_days = 4\nvariable = a flat 1 0 0 1\nvariable = b bell 0 5 0.1 0.5\ncoupling = b a 0.3\n",
        )
        .unwrap();
        assert_eq!(spec.n_vars(), 2);
        assert_eq!(spec.coupling, Matrix::from_rows(&[[1.0, 0.0], [0.3, 1.0]]));
    }

    #[test]
    fn csv_output_has_profile_header() {
        let spec = small_spec();
        let day = generate_day(&spec, 0, 3);
        let mut buf = Vec::new();
        write_day_csv(&day, &spec.variable_names(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("timestamp,dc_voltage,"));
        assert!(lines[1].starts_with("2019-06-01T00:00:00Z,"));
    }
}
