//! Instance and trace files.
//!
//! An instance is one JSON document: a readable header (format, version,
//! problem kind, generator spec, seed) followed by named arrays whose payload
//! is base64 over little-endian 8-byte words. Loading and re-serializing a
//! file reproduces it byte for byte.
//!
//! Traces are CSV with the header `k,f,G,H,step_kind,alpha,active_size` and a
//! JSON footer on `# `-prefixed comment lines, or an equivalent JSON document.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::solver::IterationRecord;
use crate::synth::{MatrixGenSpec, MatrixInstance, TrendGenSpec, TrendInstance};

pub const INSTANCE_FORMAT: &str = "ufw-instance";
pub const INSTANCE_VERSION: u32 = 1;
pub const TRACE_HEADER: &str = "k,f,G,H,step_kind,alpha,active_size";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Trend,
    Matrix,
}

impl std::fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProblemKind::Trend => "trend",
            ProblemKind::Matrix => "matrix",
        })
    }
}

#[derive(Clone, Debug)]
pub enum Instance {
    Trend(TrendInstance),
    Matrix(MatrixInstance),
}

impl Instance {
    pub fn problem(&self) -> ProblemKind {
        match self {
            Instance::Trend(_) => ProblemKind::Trend,
            Instance::Matrix(_) => ProblemKind::Matrix,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Instance::Trend(t) => t.spec.seed,
            Instance::Matrix(m) => m.spec.seed,
        }
    }

    /// Short size description, e.g. `N=1000 n=500 r=1`.
    pub fn sizes(&self) -> String {
        match self {
            Instance::Trend(t) => format!("N={} n={} r={}", t.spec.big_n, t.spec.n, t.spec.r),
            Instance::Matrix(m) => format!(
                "m={} n={} r={} r1={} nnzr={}",
                m.spec.m, m.spec.n, m.spec.r, m.spec.r1, m.spec.nnzr
            ),
        }
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(&self.to_document())?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: Document = serde_json::from_str(text)?;
        Self::from_document(doc)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// SHA-256 of the serialized document, hex encoded.
    pub fn content_hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_json_string()?.as_bytes());
        Ok(digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        }))
    }

    fn to_document(&self) -> Document {
        let mut arrays = BTreeMap::new();
        let (spec, scalars) = match self {
            Instance::Trend(t) => {
                arrays.insert("A".into(), Array::f64(&[t.a.nrows(), t.a.ncols()], t.a.as_slice()));
                arrays.insert("b".into(), Array::f64(&[t.b.len()], t.b.as_slice()));
                arrays.insert("x_star".into(), Array::f64(&[t.x_star.len()], &t.x_star));
                (
                    serde_json::to_value(&t.spec).expect("spec serializes"),
                    BTreeMap::from([("delta".to_string(), t.delta)]),
                )
            }
            Instance::Matrix(m) => {
                let flat: Vec<u64> = m.omega.iter().flat_map(|&(i, j)| [i as u64, j as u64]).collect();
                arrays.insert("omega".into(), Array::u64(&[m.omega.len(), 2], &flat));
                arrays.insert("observed".into(), Array::f64(&[m.observed.len()], &m.observed));
                arrays.insert("P1".into(), Array::f64(&[m.p1.nrows(), m.p1.ncols()], m.p1.as_slice()));
                arrays.insert(
                    "ground_truth".into(),
                    Array::f64(
                        &[m.ground_truth.nrows(), m.ground_truth.ncols()],
                        m.ground_truth.as_slice(),
                    ),
                );
                (
                    serde_json::to_value(&m.spec).expect("spec serializes"),
                    BTreeMap::from([("delta".to_string(), m.delta)]),
                )
            }
        };
        Document {
            format: INSTANCE_FORMAT.into(),
            version: INSTANCE_VERSION,
            problem: self.problem(),
            seed: self.seed(),
            spec,
            scalars,
            arrays,
        }
    }

    fn from_document(doc: Document) -> Result<Self> {
        if doc.format != INSTANCE_FORMAT {
            return Err(Error::Format(format!("not an instance file (format {:?})", doc.format)));
        }
        if doc.version != INSTANCE_VERSION {
            return Err(Error::Format(format!("unsupported instance version {}", doc.version)));
        }
        let delta = *doc
            .scalars
            .get("delta")
            .ok_or_else(|| Error::Format("missing scalar delta".into()))?;
        let array = |name: &str| {
            doc.arrays
                .get(name)
                .ok_or_else(|| Error::Format(format!("missing array {name}")))
        };
        match doc.problem {
            ProblemKind::Trend => {
                let spec: TrendGenSpec = serde_json::from_value(doc.spec.clone())?;
                let a = array("A")?.matrix()?;
                let b = DVector::from_vec(array("b")?.f64_vec(1)?);
                let x_star = array("x_star")?.f64_vec(1)?;
                if a.shape() != (spec.big_n, spec.n) || b.len() != spec.big_n || x_star.len() != spec.n {
                    return Err(Error::Format("trend arrays disagree with the spec sizes".into()));
                }
                Ok(Instance::Trend(TrendInstance {
                    spec,
                    a,
                    b,
                    x_star,
                    delta,
                }))
            }
            ProblemKind::Matrix => {
                let spec: MatrixGenSpec = serde_json::from_value(doc.spec.clone())?;
                let flat = array("omega")?.u64_vec()?;
                let omega: Vec<(usize, usize)> =
                    flat.chunks_exact(2).map(|p| (p[0] as usize, p[1] as usize)).collect();
                let observed = array("observed")?.f64_vec(1)?;
                let p1 = array("P1")?.matrix()?;
                let ground_truth = array("ground_truth")?.matrix()?;
                if omega.len() != observed.len()
                    || p1.nrows() != spec.m
                    || ground_truth.shape() != (spec.m, spec.n)
                    || omega.iter().any(|&(i, j)| i >= spec.m || j >= spec.n)
                {
                    return Err(Error::Format("matrix arrays disagree with the spec sizes".into()));
                }
                Ok(Instance::Matrix(MatrixInstance {
                    spec,
                    omega,
                    observed,
                    p1,
                    delta,
                    ground_truth,
                }))
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Document {
    format: String,
    version: u32,
    problem: ProblemKind,
    seed: u64,
    spec: serde_json::Value,
    scalars: BTreeMap<String, f64>,
    arrays: BTreeMap<String, Array>,
}

/// A base64 little-endian array; matrices are column-major.
#[derive(Serialize, Deserialize)]
struct Array {
    dtype: String,
    shape: Vec<usize>,
    data: String,
}

impl Array {
    fn f64(shape: &[usize], values: &[f64]) -> Self {
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        Self {
            dtype: "f64le".into(),
            shape: shape.to_vec(),
            data: STANDARD.encode(bytes),
        }
    }

    fn u64(shape: &[usize], values: &[u64]) -> Self {
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        Self {
            dtype: "u64le".into(),
            shape: shape.to_vec(),
            data: STANDARD.encode(bytes),
        }
    }

    fn words(&self, dtype: &str) -> Result<Vec<[u8; 8]>> {
        if self.dtype != dtype {
            return Err(Error::Format(format!("expected {dtype} array, found {}", self.dtype)));
        }
        let bytes = STANDARD
            .decode(&self.data)
            .map_err(|e| Error::Format(format!("bad base64 payload: {e}")))?;
        let expected: usize = self.shape.iter().product();
        if bytes.len() != 8 * expected {
            return Err(Error::Format(format!(
                "array payload has {} bytes, shape {:?} needs {}",
                bytes.len(),
                self.shape,
                8 * expected
            )));
        }
        Ok(bytes
            .chunks_exact(8)
            .map(|c| c.try_into().expect("chunk of 8"))
            .collect())
    }

    fn f64_vec(&self, rank: usize) -> Result<Vec<f64>> {
        if self.shape.len() != rank {
            return Err(Error::Format(format!("expected rank-{rank} array, shape {:?}", self.shape)));
        }
        Ok(self.words("f64le")?.into_iter().map(f64::from_le_bytes).collect())
    }

    fn u64_vec(&self) -> Result<Vec<u64>> {
        Ok(self.words("u64le")?.into_iter().map(u64::from_le_bytes).collect())
    }

    fn matrix(&self) -> Result<DMatrix<f64>> {
        let data = self.f64_vec(2)?;
        Ok(DMatrix::from_vec(self.shape[0], self.shape[1], data))
    }
}

/// Metadata written after the trace rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceFooter {
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub termination_reason: String,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub rows: Vec<IterationRecord>,
    pub footer: TraceFooter,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceFormat {
    Csv,
    Json,
}

impl TraceFile {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 2));
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{},{:e},{}",
                r.k, r.f_val, r.g_k, r.h_k, r.step_kind, r.alpha, r.active_size
            );
        }
        let footer = serde_json::to_string_pretty(&self.footer).expect("footer serializes");
        for line in footer.lines() {
            let _ = writeln!(out, "# {line}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == TRACE_HEADER => {}
            other => return Err(Error::Format(format!("bad trace header {other:?}"))),
        }
        let mut rows = Vec::new();
        let mut footer = String::new();
        for (no, line) in lines.enumerate() {
            if let Some(rest) = line.strip_prefix('#') {
                footer.push_str(rest.strip_prefix(' ').unwrap_or(rest));
                footer.push('\n');
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| Error::Format(format!("trace line {}: bad {what}", no + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(bad("column count"));
            }
            rows.push(IterationRecord {
                k: f[0].parse().map_err(|_| bad("k"))?,
                f_val: f[1].parse().map_err(|_| bad("f"))?,
                g_k: f[2].parse().map_err(|_| bad("G"))?,
                h_k: f[3].parse().map_err(|_| bad("H"))?,
                step_kind: f[4].parse().map_err(|_| bad("step_kind"))?,
                alpha: f[5].parse().map_err(|_| bad("alpha"))?,
                active_size: f[6].parse().map_err(|_| bad("active_size"))?,
            });
        }
        if rows.windows(2).any(|w| w[1].k <= w[0].k) {
            return Err(Error::Format("trace rows are not increasing in k".into()));
        }
        let footer = serde_json::from_str(&footer)?;
        Ok(Self { rows, footer })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write(&self, path: impl AsRef<Path>, format: TraceFormat) -> Result<()> {
        let text = match format {
            TraceFormat::Csv => self.to_csv(),
            TraceFormat::Json => self.to_json()?,
        };
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Reads either format, by looking at the first byte.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if text.trim_start().starts_with('{') {
            Self::from_json(&text)
        } else {
            Self::from_csv(&text)
        }
    }

    /// Running minimum of the `f` column.
    pub fn best_f(&self) -> Vec<f64> {
        self.rows
            .iter()
            .scan(f64::INFINITY, |best, r| {
                *best = best.min(r.f_val);
                Some(*best)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::StepKind;

    fn footer() -> TraceFooter {
        TraceFooter {
            config: serde_json::json!({"eta": 0.5}),
            seed: Some(7),
            termination_reason: "MaxIters".into(),
            wall_ms: 1.25,
        }
    }

    #[test]
    fn csv_round_trip_keeps_every_bit() {
        let rows = vec![
            IterationRecord {
                k: 0,
                f_val: 0.1 + 0.2,
                g_k: 1e-300,
                h_k: 0.0,
                step_kind: StepKind::FW,
                alpha: 1.0,
                active_size: 1,
            },
            IterationRecord {
                k: 1,
                f_val: -3.5e7,
                g_k: f64::MIN_POSITIVE,
                h_k: 123.456,
                step_kind: StepKind::Drop,
                alpha: 2.0 / 3.0,
                active_size: 4,
            },
        ];
        let trace = TraceFile { rows, footer: footer() };
        let text = trace.to_csv();
        assert!(text.starts_with("k,f,G,H,step_kind,alpha,active_size\n"));
        let back = TraceFile::from_csv(&text).unwrap();
        assert_eq!(back, trace);
        assert_eq!(TraceFile::from_json(&trace.to_json().unwrap()).unwrap(), trace);
    }

    #[test]
    fn rejects_bad_traces() {
        assert!(TraceFile::from_csv("k,f\n").is_err());
        let text = format!("{TRACE_HEADER}\n1,1,1,1,FW,1,0\n0,1,1,1,FW,1,0\n# {{}}\n");
        assert!(TraceFile::from_csv(&text).is_err());
        let text = format!("{TRACE_HEADER}\n0,1,1,1,Sideways,1,0\n");
        assert!(TraceFile::from_csv(&text).is_err());
    }

    #[test]
    fn array_payload_is_little_endian() {
        let a = Array::f64(&[1], &[1.0]);
        let bytes = STANDARD.decode(&a.data).unwrap();
        assert_eq!(bytes, vec![0, 0, 0, 0, 0, 0, 0xf0, 0x3f]);
        let bad = Array {
            dtype: "f64le".into(),
            shape: vec![2],
            data: a.data.clone(),
        };
        assert!(bad.f64_vec(1).is_err());
    }
}
