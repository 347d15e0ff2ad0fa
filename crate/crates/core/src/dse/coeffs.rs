use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::DspMode;

const DEFAULT_TABLE: &str = include_str!("../../data/default_coefficients.json");
pub const TABLE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CoeffFileError {
    #[error("malformed coefficient file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported coefficient table version {0}")]
    Version(u32),
    #[error("coefficient table has non-finite values")]
    NonFinite,
}

/// Normalized latency polynomial `b3 P³ + b2 P² + b1 P + b0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyCoeffs {
    pub mode: DspMode,
    pub b3: f64,
    pub b2: f64,
    pub b1: f64,
    pub b0: f64,
}

impl LatencyCoeffs {
    /// `b` ordered highest power first.
    pub fn new(mode: DspMode, b: [f64; 4]) -> Self {
        Self {
            mode,
            b3: b[0],
            b2: b[1],
            b1: b[2],
            b0: b[3],
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.b3, self.b2, self.b1, self.b0]
    }

    /// Latency per `I·H` at parallelism `p`.
    pub fn normalized(&self, p: f64) -> f64 {
        ((self.b3 * p + self.b2) * p + self.b1) * p + self.b0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LutEntry {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub beta: f64,
}

impl LutEntry {
    pub fn eval(&self, i: f64, h: f64) -> f64 {
        self.c1 * i * h + self.c2 * i + self.c3 * h + self.beta
    }

    fn is_finite(&self) -> bool {
        [self.c1, self.c2, self.c3, self.beta]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// LUT coefficients keyed by parallelism level.
#[derive(Debug, Clone, PartialEq)]
pub struct LutCoeffs {
    pub mode: DspMode,
    entries: BTreeMap<u32, LutEntry>,
}

impl LutCoeffs {
    pub fn new(mode: DspMode) -> Self {
        Self {
            mode,
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, p: u32, entry: LutEntry) {
        self.entries.insert(p, entry);
    }

    pub fn entry(&self, p: u32) -> Option<&LutEntry> {
        self.entries.get(&p)
    }

    pub fn levels(&self) -> impl Iterator<Item = (u32, &LutEntry)> {
        self.entries.iter().map(|(p, e)| (*p, e))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModeMap<T> {
    with_dsp: T,
    no_dsp: T,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct QuadJson {
    b3: f64,
    b2: f64,
    b1: f64,
    b0: f64,
}

impl QuadJson {
    fn from_coeffs(c: &LatencyCoeffs) -> Self {
        Self {
            b3: c.b3,
            b2: c.b2,
            b1: c.b1,
            b0: c.b0,
        }
    }

    fn into_coeffs(self, mode: DspMode) -> LatencyCoeffs {
        LatencyCoeffs::new(mode, [self.b3, self.b2, self.b1, self.b0])
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TableJson {
    version: u32,
    provenance: String,
    latency: ModeMap<QuadJson>,
    lut: ModeMap<BTreeMap<u32, LutEntry>>,
}

/// Latency and LUT coefficients for both resource modes. Immutable once
/// loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    pub provenance: String,
    latency: [LatencyCoeffs; 2],
    lut: [LutCoeffs; 2],
}

fn slot(mode: DspMode) -> usize {
    match mode {
        DspMode::WithDsp => 0,
        DspMode::NoDsp => 1,
    }
}

impl CoefficientTable {
    pub fn new(
        provenance: impl Into<String>,
        latency: [LatencyCoeffs; 2],
        lut: [LutCoeffs; 2],
    ) -> Self {
        debug_assert_eq!(latency[0].mode, DspMode::WithDsp);
        debug_assert_eq!(latency[1].mode, DspMode::NoDsp);
        debug_assert_eq!(lut[0].mode, DspMode::WithDsp);
        debug_assert_eq!(lut[1].mode, DspMode::NoDsp);
        Self {
            provenance: provenance.into(),
            latency,
            lut,
        }
    }

    /// The shipped default table.
    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_TABLE).expect("built-in coefficient table is valid")
    }

    pub fn latency(&self, mode: DspMode) -> &LatencyCoeffs {
        &self.latency[slot(mode)]
    }

    pub fn lut(&self, mode: DspMode) -> &LutCoeffs {
        &self.lut[slot(mode)]
    }

    pub fn from_json(text: &str) -> Result<Self, CoeffFileError> {
        let doc: TableJson = serde_json::from_str(text)?;
        if doc.version != TABLE_VERSION {
            return Err(CoeffFileError::Version(doc.version));
        }
        let lat = [
            doc.latency.with_dsp.into_coeffs(DspMode::WithDsp),
            doc.latency.no_dsp.into_coeffs(DspMode::NoDsp),
        ];
        if lat
            .iter()
            .flat_map(|l| l.as_array())
            .any(|v| !v.is_finite())
            || doc
                .lut
                .with_dsp
                .values()
                .chain(doc.lut.no_dsp.values())
                .any(|e| !e.is_finite())
        {
            return Err(CoeffFileError::NonFinite);
        }
        let lut = [
            LutCoeffs {
                mode: DspMode::WithDsp,
                entries: doc.lut.with_dsp,
            },
            LutCoeffs {
                mode: DspMode::NoDsp,
                entries: doc.lut.no_dsp,
            },
        ];
        Ok(Self::new(doc.provenance, lat, lut))
    }

    pub fn to_json(&self) -> String {
        let doc = TableJson {
            version: TABLE_VERSION,
            provenance: self.provenance.clone(),
            latency: ModeMap {
                with_dsp: QuadJson::from_coeffs(&self.latency[0]),
                no_dsp: QuadJson::from_coeffs(&self.latency[1]),
            },
            lut: ModeMap {
                with_dsp: self.lut[0].entries.clone(),
                no_dsp: self.lut[1].entries.clone(),
            },
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("table serializes");
        s.push('\n');
        s
    }
}
