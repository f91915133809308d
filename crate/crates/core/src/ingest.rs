//! Sensor log ingestion: CSV parsing, per-day second grids, gap filling and
//! assembly of the `days × variables × seconds` training tensor.
//!
//! Log profile: the first line is `timestamp,<var1>,...,<varJ>`. Timestamps
//! are ISO-8601; values are decimals, with `NaN` or an empty cell marking a
//! missing reading. Timestamps carrying an offset (`Z`, `+07:00`) are
//! absolute; naive timestamps are read as wall-clock time in the configured
//! fixed offset. Slices are indexed by wall-clock second-of-day in that
//! offset, with no DST handling.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, FixedOffset, NaiveDate, NaiveDateTime};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::SECONDS_PER_DAY;

/// One row of a sensor log.
#[derive(Debug, Clone, PartialEq)]
pub struct RawLogRecord {
    /// UTC epoch seconds.
    pub timestamp: i64,
    /// One entry per variable; `None` is a missing reading.
    pub values: Vec<Option<f64>>,
}

/// Expected column layout of a log file.
#[derive(Debug, Clone, PartialEq)]
pub struct LogSchema {
    pub names: Vec<String>,
    /// When false, header names are replaced by `names` and only the
    /// column count is checked.
    pub strict_names: bool,
    pub tz_offset: FixedOffset,
}

impl LogSchema {
    pub fn new(names: Vec<String>) -> Self {
        LogSchema {
            names,
            strict_names: true,
            tz_offset: utc(),
        }
    }

    /// Schema whose names override whatever the file headers say.
    pub fn overriding(names: Vec<String>) -> Self {
        LogSchema {
            strict_names: false,
            ..LogSchema::new(names)
        }
    }

    pub fn with_offset(mut self, offset: FixedOffset) -> Self {
        self.tz_offset = offset;
        self
    }

    pub fn n_vars(&self) -> usize {
        self.names.len()
    }
}

fn utc() -> FixedOffset {
    FixedOffset::east_opt(0).expect("zero offset is valid")
}

/// Parses `+HH:MM` / `-HH:MM` / `Z` into a fixed offset.
pub fn parse_offset(s: &str) -> Result<FixedOffset> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("z") {
        return Ok(utc());
    }
    let bad = || Error::Domain(format!("invalid UTC offset {s:?} (expected +HH:MM)"));
    let (sign, rest) = match s.as_bytes().first() {
        Some(b'+') => (1, &s[1..]),
        Some(b'-') => (-1, &s[1..]),
        _ => return Err(bad()),
    };
    let (h, m) = rest.split_once(':').ok_or_else(bad)?;
    let h: i32 = h.parse().map_err(|_| bad())?;
    let m: i32 = m.parse().map_err(|_| bad())?;
    if !(0..=23).contains(&h) || !(0..=59).contains(&m) {
        return Err(bad());
    }
    FixedOffset::east_opt(sign * (h * 3600 + m * 60)).ok_or_else(bad)
}

/// Reads only the header line and returns the variable names after
/// `timestamp`.
pub fn read_header(content: &[u8]) -> Result<Vec<String>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(content);
    let header = rdr
        .headers()
        .map_err(|e| Error::Schema(format!("unreadable header: {e}")))?;
    let mut fields = header.iter();
    match fields.next() {
        Some(first) if first.eq_ignore_ascii_case("timestamp") => {}
        _ => {
            return Err(Error::Schema(
                "first header column must be `timestamp`".into(),
            ))
        }
    }
    Ok(fields.map(str::to_string).collect())
}

fn parse_timestamp(s: &str, offset: FixedOffset) -> Option<i64> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(naive.and_utc().timestamp() - offset.local_minus_utc() as i64);
        }
    }
    None
}

fn parse_value(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses one CSV log file.
///
/// Unparseable or non-finite numeric cells become missing values. A header
/// that disagrees with `schema`, a row of the wrong width, a bad timestamp,
/// or a timestamp that does not strictly increase are errors.
pub fn parse_log(content: &[u8], schema: &LogSchema) -> Result<Vec<RawLogRecord>> {
    let names = read_header(content)?;
    if names.len() != schema.n_vars() {
        return Err(Error::Schema(format!(
            "header has {} variables, expected {}",
            names.len(),
            schema.n_vars()
        )));
    }
    if schema.strict_names && names != schema.names {
        return Err(Error::Schema(format!(
            "header {:?} does not match expected variables {:?}",
            names, schema.names
        )));
    }

    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(content);
    let mut out = Vec::new();
    let mut prev: Option<i64> = None;
    for (idx, row) in rdr.records().enumerate() {
        let line = idx + 2;
        let row = row.map_err(|e| Error::Schema(format!("line {line}: {e}")))?;
        if row.len() == 1 && row[0].is_empty() {
            continue;
        }
        if row.len() != schema.n_vars() + 1 {
            return Err(Error::Schema(format!(
                "line {line}: {} fields, expected {}",
                row.len(),
                schema.n_vars() + 1
            )));
        }
        let ts = parse_timestamp(&row[0], schema.tz_offset).ok_or_else(|| Error::BadTimestamp {
            line,
            value: row[0].to_string(),
        })?;
        if let Some(p) = prev {
            if ts <= p {
                return Err(Error::NonIncreasingTimestamp {
                    line,
                    previous: p,
                    timestamp: ts,
                });
            }
        }
        prev = Some(ts);
        let values = row.iter().skip(1).map(parse_value).collect();
        out.push(RawLogRecord {
            timestamp: ts,
            values,
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(out)
}

/// Calendar day and second-of-day of an epoch timestamp in `offset`.
pub fn local_day_second(timestamp: i64, offset: FixedOffset) -> (NaiveDate, usize) {
    let local = timestamp + offset.local_minus_utc() as i64;
    let day_index = local.div_euclid(SECONDS_PER_DAY as i64);
    let second = local.rem_euclid(SECONDS_PER_DAY as i64) as usize;
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date");
    let day = epoch + chrono::Duration::days(day_index);
    (day, second)
}

/// Groups records by local calendar day, preserving their relative order.
pub fn split_by_day(
    records: Vec<RawLogRecord>,
    offset: FixedOffset,
) -> BTreeMap<NaiveDate, Vec<RawLogRecord>> {
    let mut days: BTreeMap<NaiveDate, Vec<RawLogRecord>> = BTreeMap::new();
    for rec in records {
        let (day, _) = local_day_second(rec.timestamp, offset);
        days.entry(day).or_default().push(rec);
    }
    days
}

/// A `K × J` grid of readings for one day, missing cells masked.
#[derive(Debug, Clone, PartialEq)]
pub struct DayGrid {
    pub day: NaiveDate,
    n_slices: usize,
    n_vars: usize,
    /// Row-major `K × J`; missing cells hold NaN.
    values: Vec<f64>,
    missing: Vec<bool>,
}

impl DayGrid {
    /// Grid with every cell missing.
    pub fn empty(day: NaiveDate, n_slices: usize, n_vars: usize) -> Self {
        DayGrid {
            day,
            n_slices,
            n_vars,
            values: vec![f64::NAN; n_slices * n_vars],
            missing: vec![true; n_slices * n_vars],
        }
    }

    /// Grid from a row-major `K × J` buffer; non-finite cells are missing.
    ///
    /// # Panics
    ///
    /// Panics if the buffer length is not `n_slices * n_vars`.
    pub fn from_values(day: NaiveDate, n_slices: usize, n_vars: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), n_slices * n_vars, "buffer does not match shape");
        let missing = values.iter().map(|v| !v.is_finite()).collect();
        let values = values
            .into_iter()
            .map(|v| if v.is_finite() { v } else { f64::NAN })
            .collect();
        DayGrid {
            day,
            n_slices,
            n_vars,
            values,
            missing,
        }
    }

    pub fn n_slices(&self) -> usize {
        self.n_slices
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn get(&self, k: usize, j: usize) -> Option<f64> {
        let idx = k * self.n_vars + j;
        (!self.missing[idx]).then(|| self.values[idx])
    }

    /// Raw row at second `k` (NaN where missing).
    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.n_vars..(k + 1) * self.n_vars]
    }

    pub fn is_missing(&self, k: usize, j: usize) -> bool {
        self.missing[k * self.n_vars + j]
    }

    /// True when every cell of row `k` is observed.
    pub fn row_complete(&self, k: usize) -> bool {
        !self.missing[k * self.n_vars..(k + 1) * self.n_vars]
            .iter()
            .any(|&m| m)
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    pub fn set(&mut self, k: usize, j: usize, value: Option<f64>) {
        let idx = k * self.n_vars + j;
        match value.filter(|v| v.is_finite()) {
            Some(v) => {
                self.values[idx] = v;
                self.missing[idx] = false;
            }
            None => {
                self.values[idx] = f64::NAN;
                self.missing[idx] = true;
            }
        }
    }

    /// Forward-fills then back-fills every variable in place.
    fn fill(&mut self, names: &[String]) -> Result<()> {
        for j in 0..self.n_vars {
            let first = (0..self.n_slices).find(|&k| !self.is_missing(k, j));
            let Some(first) = first else {
                return Err(Error::Unfillable {
                    day: self.day,
                    variable: names.get(j).cloned().unwrap_or_else(|| format!("#{j}")),
                });
            };
            let lead = self.values[first * self.n_vars + j];
            for k in 0..first {
                self.set(k, j, Some(lead));
            }
            let mut last = lead;
            for k in first + 1..self.n_slices {
                match self.get(k, j) {
                    Some(v) => last = v,
                    None => self.set(k, j, Some(last)),
                }
            }
        }
        Ok(())
    }
}

/// Places records of one day on the 86,400-second grid.
///
/// Records whose local date is not `day` are ignored. When two records
/// share a second the later one in `records` wins; seconds without a record
/// stay missing.
pub fn grid_day(records: &[RawLogRecord], day: NaiveDate, offset: FixedOffset) -> DayGrid {
    let n_vars = records.first().map_or(0, |r| r.values.len());
    let mut grid = DayGrid::empty(day, SECONDS_PER_DAY, n_vars);
    for rec in records {
        let (d, k) = local_day_second(rec.timestamp, offset);
        if d != day || rec.values.len() != n_vars {
            continue;
        }
        for (j, v) in rec.values.iter().enumerate() {
            grid.set(k, j, *v);
        }
    }
    grid
}

/// The `I × J × K` training dataset: complete day grids sharing one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTensor {
    days: Vec<DayGrid>,
    variable_names: Vec<String>,
}

impl TrainingTensor {
    /// Wraps complete grids without filling. Fails if any cell is missing or
    /// shapes disagree.
    pub fn new(days: Vec<DayGrid>, variable_names: Vec<String>) -> Result<Self> {
        check_shapes(&days, &variable_names)?;
        if let Some(g) = days.iter().find(|g| g.missing_count() > 0) {
            return Err(Error::Domain(format!("day {} has missing cells", g.day)));
        }
        let mut days = days;
        days.sort_by_key(|g| g.day);
        Ok(TrainingTensor {
            days,
            variable_names,
        })
    }

    pub fn days(&self) -> &[DayGrid] {
        &self.days
    }

    pub fn variable_names(&self) -> &[String] {
        &self.variable_names
    }

    /// I
    pub fn n_days(&self) -> usize {
        self.days.len()
    }

    /// J
    pub fn n_vars(&self) -> usize {
        self.variable_names.len()
    }

    /// K
    pub fn n_slices(&self) -> usize {
        self.days.first().map_or(0, DayGrid::n_slices)
    }

    /// `X_k`: the `I × J` matrix of all days at second `k`.
    pub fn slice(&self, k: usize) -> Matrix {
        let j = self.n_vars();
        let mut data = Vec::with_capacity(self.n_days() * j);
        for g in &self.days {
            data.extend_from_slice(g.row(k));
        }
        Matrix::from_vec(self.n_days(), j, data)
    }
}

fn check_shapes(grids: &[DayGrid], names: &[String]) -> Result<()> {
    if grids.len() < 2 {
        return Err(Error::InsufficientDays {
            found: grids.len(),
            required: 2,
        });
    }
    let k = grids[0].n_slices();
    for g in grids {
        if g.n_vars() != names.len() {
            return Err(Error::DimensionMismatch {
                what: "day grid variables",
                expected: names.len(),
                found: g.n_vars(),
            });
        }
        if g.n_slices() != k {
            return Err(Error::DimensionMismatch {
                what: "day grid slices",
                expected: k,
                found: g.n_slices(),
            });
        }
    }
    let mut dates: Vec<NaiveDate> = grids.iter().map(|g| g.day).collect();
    dates.sort();
    if let Some(w) = dates.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Domain(format!("day {} appears twice", w[0])));
    }
    Ok(())
}

/// Fills gaps in every grid and assembles the training tensor, ordered by
/// date.
///
/// Per variable and day, missing seconds take the previous observed value;
/// seconds before the first observation take that first value. A variable
/// with no observation at all on some day is an [`Error::Unfillable`].
pub fn fill_and_assemble(grids: Vec<DayGrid>, variable_names: Vec<String>) -> Result<TrainingTensor> {
    check_shapes(&grids, &variable_names)?;
    let mut grids = grids;
    grids
        .par_iter_mut()
        .try_for_each(|g| g.fill(&variable_names))?;
    TrainingTensor::new(grids, variable_names)
}

/// CSV files in `dir`, sorted by file name.
pub fn list_logs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Parses every CSV log in `dir` and groups records by local day.
///
/// Files are concatenated in file-name order, so for duplicated seconds
/// across files the file sorting last wins. If `schema` is `None` the
/// header of the first file defines it and all other files must match.
pub fn read_log_dir(
    dir: &Path,
    schema: Option<LogSchema>,
    offset: FixedOffset,
) -> Result<(LogSchema, BTreeMap<NaiveDate, Vec<RawLogRecord>>)> {
    let files = list_logs(dir)?;
    let schema = match schema {
        Some(s) => s,
        None => {
            let first = files.first().ok_or(Error::EmptyInput)?;
            LogSchema::new(read_header(&std::fs::read(first)?)?)
        }
    }
    .with_offset(offset);

    let parsed: Vec<Result<Vec<RawLogRecord>>> = files
        .par_iter()
        .map(|path| {
            let bytes = std::fs::read(path)?;
            match parse_log(&bytes, &schema) {
                Ok(r) => Ok(r),
                Err(Error::EmptyInput) => Ok(Vec::new()),
                Err(e) => Err(Error::Schema(format!("{}: {e}", path.display()))),
            }
        })
        .collect();

    let mut all = Vec::new();
    for p in parsed {
        all.extend(p?);
    }
    Ok((schema, split_by_day(all, offset)))
}
