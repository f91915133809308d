//! Binary model files (`.tvspc`).
//!
//! Layout, all integers `u32` and all floats `f64`, little-endian:
//!
//! ```text
//! magic      "TVSPC1"
//! header     I, J, K, R
//!            confidence, threshold, epsilon, ucl
//!            global_std[J]
//!            J × (name byte length, UTF-8 name bytes)
//! records    K fixed-size slice records, in slice order:
//!            mean[J], std[J], active bitmap (ceil(J/8) bytes, LSB first),
//!            loadings[J×R] row-major, eigenvalues[R],
//!            explained[J] (ranks beyond the active count padded with 0)
//! ```
//!
//! Records have a fixed size, so [`ModelReader::slice`] can seek straight
//! to slice `k`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::preprocess::SliceStats;
use crate::train::{SliceModel, TpcaModel};

pub const MAGIC: &[u8; 6] = b"TVSPC1";
const MAGIC_FAMILY: &[u8; 5] = b"TVSPC";
pub const EXTENSION: &str = "tvspc";

/// Upper bounds guarding allocations when reading untrusted headers.
const MAX_VARS: usize = 4096;
const MAX_NAME_LEN: usize = 4096;

/// Everything in a model file except the slice records.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelHeader {
    pub n_days: usize,
    pub n_vars: usize,
    pub n_slices: usize,
    pub rank: usize,
    pub confidence: f64,
    pub threshold: f64,
    pub epsilon: f64,
    pub ucl: f64,
    pub global_std: Vec<f64>,
    pub variable_names: Vec<String>,
}

impl ModelHeader {
    fn of(model: &TpcaModel) -> Self {
        ModelHeader {
            n_days: model.n_days,
            n_vars: model.n_vars,
            n_slices: model.n_slices,
            rank: model.rank,
            confidence: model.confidence,
            threshold: model.threshold,
            epsilon: model.epsilon,
            ucl: model.ucl,
            global_std: model.global_std.clone(),
            variable_names: model.variable_names.clone(),
        }
    }

    /// Bytes per slice record.
    pub fn record_len(&self) -> usize {
        let j = self.n_vars;
        let r = self.rank;
        8 * (3 * j + j * r + r) + j.div_ceil(8)
    }

    fn encoded_len(&self) -> usize {
        MAGIC.len()
            + 4 * 4
            + 8 * 4
            + 8 * self.n_vars
            + self
                .variable_names
                .iter()
                .map(|n| 4 + n.len())
                .sum::<usize>()
    }
}

fn put_u32(buf: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v)
        .map_err(|_| Error::Domain(format!("{v} does not fit the u32 model field")))?;
    buf.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn encode_header(h: &ModelHeader) -> Result<Vec<u8>> {
    let mut buf = Vec::with_capacity(h.encoded_len());
    buf.extend_from_slice(MAGIC);
    for v in [h.n_days, h.n_vars, h.n_slices, h.rank] {
        put_u32(&mut buf, v)?;
    }
    for v in [h.confidence, h.threshold, h.epsilon, h.ucl] {
        put_f64(&mut buf, v);
    }
    for &v in &h.global_std {
        put_f64(&mut buf, v);
    }
    for name in &h.variable_names {
        put_u32(&mut buf, name.len())?;
        buf.extend_from_slice(name.as_bytes());
    }
    Ok(buf)
}

fn encode_slice(s: &SliceModel, h: &ModelHeader, buf: &mut Vec<u8>) {
    let j = h.n_vars;
    for &v in s.stats.mean.iter().chain(&s.stats.std) {
        put_f64(buf, v);
    }
    let mut bitmap = vec![0u8; j.div_ceil(8)];
    for (idx, &a) in s.stats.active.iter().enumerate() {
        if a {
            bitmap[idx / 8] |= 1 << (idx % 8);
        }
    }
    buf.extend_from_slice(&bitmap);
    for &v in s.loadings.as_slice().iter().chain(&s.eigenvalues) {
        put_f64(buf, v);
    }
    for r in 0..j {
        put_f64(buf, s.explained.get(r).copied().unwrap_or(0.0));
    }
}

/// Writes `model` and returns the number of bytes written. Equal models
/// produce identical bytes.
pub fn save_model<W: Write>(model: &TpcaModel, mut sink: W) -> Result<u64> {
    let header = ModelHeader::of(model);
    let head = encode_header(&header)?;
    sink.write_all(&head)?;
    let mut total = head.len() as u64;
    let mut buf = Vec::with_capacity(header.record_len());
    for s in &model.slices {
        buf.clear();
        encode_slice(s, &header, &mut buf);
        sink.write_all(&buf)?;
        total += buf.len() as u64;
    }
    sink.flush()?;
    Ok(total)
}

pub fn save_to_path(model: &TpcaModel, path: &Path) -> Result<u64> {
    save_model(model, BufWriter::new(File::create(path)?))
}

/// Reader that reports the byte offset of truncation.
struct Cursor<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Cursor<R> {
    fn bytes(&mut self, n: usize, what: &str) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        self.fill(&mut buf, what)?;
        Ok(buf)
    }

    fn fill(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        let mut read = 0;
        while read < buf.len() {
            match self.inner.read(&mut buf[read..]) {
                Ok(0) => {
                    return Err(Error::Format {
                        offset: self.offset + read as u64,
                        reason: format!("unexpected end of data while reading {what}"),
                    })
                }
                Ok(n) => read += n,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        self.offset += buf.len() as u64;
        Ok(())
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let mut b = [0u8; 4];
        self.fill(&mut b, what)?;
        Ok(u32::from_le_bytes(b) as usize)
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        let mut b = [0u8; 8];
        self.fill(&mut b, what)?;
        Ok(f64::from_le_bytes(b))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64(what)).collect()
    }
}

fn read_header<R: Read>(c: &mut Cursor<R>) -> Result<ModelHeader> {
    let mut magic = [0u8; 6];
    c.fill(&mut magic, "magic")
        .map_err(|_| Error::UnsupportedFormat("file too short for a model header".into()))?;
    if &magic != MAGIC {
        return Err(Error::UnsupportedFormat(if magic.starts_with(MAGIC_FAMILY) {
            format!("format version {:?} (this reader supports 1)", magic[5] as char)
        } else {
            "not a .tvspc model (bad magic bytes)".into()
        }));
    }
    let n_days = c.u32("I")?;
    let n_vars = c.u32("J")?;
    let n_slices = c.u32("K")?;
    let rank = c.u32("R")?;
    if n_vars == 0 || n_vars > MAX_VARS || rank > n_vars {
        return Err(Error::CorruptModel(format!(
            "implausible dimensions J = {n_vars}, R = {rank}"
        )));
    }
    let confidence = c.f64("confidence")?;
    let threshold = c.f64("threshold")?;
    let epsilon = c.f64("epsilon")?;
    let ucl = c.f64("ucl")?;
    let global_std = c.f64s(n_vars, "global std")?;
    let mut variable_names = Vec::with_capacity(n_vars);
    for _ in 0..n_vars {
        let len = c.u32("name length")?;
        if len > MAX_NAME_LEN {
            return Err(Error::CorruptModel(format!("variable name of {len} bytes")));
        }
        let offset = c.offset;
        let bytes = c.bytes(len, "variable name")?;
        let name = String::from_utf8(bytes).map_err(|_| Error::Format {
            offset,
            reason: "variable name is not UTF-8".into(),
        })?;
        variable_names.push(name);
    }
    Ok(ModelHeader {
        n_days,
        n_vars,
        n_slices,
        rank,
        confidence,
        threshold,
        epsilon,
        ucl,
        global_std,
        variable_names,
    })
}

fn read_slice<R: Read>(c: &mut Cursor<R>, h: &ModelHeader, k: usize) -> Result<SliceModel> {
    let j = h.n_vars;
    let r = h.rank;
    let mean = c.f64s(j, "slice mean")?;
    let std = c.f64s(j, "slice std")?;
    let bitmap = c.bytes(j.div_ceil(8), "active bitmap")?;
    let active: Vec<bool> = (0..j).map(|i| bitmap[i / 8] & (1 << (i % 8)) != 0).collect();
    let loadings = Matrix::from_vec(j, r, c.f64s(j * r, "loadings")?);
    let eigenvalues = c.f64s(r, "eigenvalues")?;
    let mut explained = c.f64s(j, "explained variance")?;
    explained.truncate(active.iter().filter(|&&a| a).count());
    Ok(SliceModel {
        k,
        stats: SliceStats {
            k,
            mean,
            std,
            active,
        },
        loadings,
        eigenvalues,
        explained,
    })
}

fn assemble(h: ModelHeader, slices: Vec<SliceModel>) -> TpcaModel {
    TpcaModel {
        rank: h.rank,
        n_days: h.n_days,
        n_vars: h.n_vars,
        n_slices: h.n_slices,
        variable_names: h.variable_names,
        confidence: h.confidence,
        threshold: h.threshold,
        epsilon: h.epsilon,
        ucl: h.ucl,
        global_std: h.global_std,
        slices,
    }
}

/// Reads a model and re-validates it (see [`TpcaModel::validate`]).
pub fn load_model<R: Read>(source: R) -> Result<TpcaModel> {
    let mut c = Cursor {
        inner: source,
        offset: 0,
    };
    let h = read_header(&mut c)?;
    let mut slices = Vec::with_capacity(h.n_slices.min(1 << 20));
    for k in 0..h.n_slices {
        slices.push(read_slice(&mut c, &h, k)?);
    }
    let mut probe = [0u8; 1];
    if c.inner.read(&mut probe)? != 0 {
        return Err(Error::Format {
            offset: c.offset,
            reason: "trailing bytes after the last slice record".into(),
        });
    }
    let model = assemble(h, slices);
    model.validate()?;
    Ok(model)
}

pub fn load_from_path(path: &Path) -> Result<TpcaModel> {
    load_model(BufReader::new(File::open(path)?))
}

/// Random access to the slices of a model file without loading all of them.
pub struct ModelReader<R> {
    header: ModelHeader,
    data_start: u64,
    inner: R,
}

impl<R: Read + Seek> ModelReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        inner.seek(SeekFrom::Start(0))?;
        let mut c = Cursor { inner, offset: 0 };
        let header = read_header(&mut c)?;
        Ok(ModelReader {
            data_start: c.offset,
            header,
            inner: c.inner,
        })
    }

    pub fn header(&self) -> &ModelHeader {
        &self.header
    }

    /// Reads slice `k` only.
    pub fn slice(&mut self, k: usize) -> Result<SliceModel> {
        if k >= self.header.n_slices {
            return Err(Error::SliceOutOfRange {
                k,
                len: self.header.n_slices,
            });
        }
        let offset = self.data_start + (k * self.header.record_len()) as u64;
        self.inner.seek(SeekFrom::Start(offset))?;
        let mut c = Cursor {
            inner: &mut self.inner,
            offset,
        };
        read_slice(&mut c, &self.header, k)
    }
}

impl ModelReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self> {
        ModelReader::new(BufReader::new(File::open(path)?))
    }
}

#[derive(Serialize)]
struct HeaderLine<'a> {
    n_days: usize,
    n_vars: usize,
    n_slices: usize,
    rank: usize,
    confidence: f64,
    threshold: f64,
    epsilon: f64,
    ucl: f64,
    global_std: &'a [f64],
    variable_names: &'a [String],
}

#[derive(Serialize)]
struct SliceLine<'a> {
    k: usize,
    mean: &'a [f64],
    std: &'a [f64],
    active: &'a [bool],
    loadings: Vec<Vec<f64>>,
    eigenvalues: &'a [f64],
    explained: &'a [f64],
}

/// Human-readable JSON-lines dump: one header line, then one line per slice.
/// For inspection and diffing only; it is not read back.
pub fn export_jsonl<W: Write>(model: &TpcaModel, mut sink: W) -> Result<()> {
    let header = HeaderLine {
        n_days: model.n_days,
        n_vars: model.n_vars,
        n_slices: model.n_slices,
        rank: model.rank,
        confidence: model.confidence,
        threshold: model.threshold,
        epsilon: model.epsilon,
        ucl: model.ucl,
        global_std: &model.global_std,
        variable_names: &model.variable_names,
    };
    serde_json::to_writer(&mut sink, &header).map_err(std::io::Error::from)?;
    writeln!(sink)?;
    for s in &model.slices {
        let line = SliceLine {
            k: s.k,
            mean: &s.stats.mean,
            std: &s.stats.std,
            active: &s.stats.active,
            loadings: (0..s.loadings.rows()).map(|j| s.loadings.row(j).to_vec()).collect(),
            eigenvalues: &s.eigenvalues,
            explained: &s.explained,
        };
        serde_json::to_writer(&mut sink, &line).map_err(std::io::Error::from)?;
        writeln!(sink)?;
    }
    sink.flush()?;
    Ok(())
}
