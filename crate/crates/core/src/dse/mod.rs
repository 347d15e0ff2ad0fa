//! Design-space exploration over the parallelism level `P`.
//!
//! At `P = 0` the core has a single multiplier and a single adder. At
//! `P ≥ 1` it has `2^P · I` of each, where `I` is the input/output width.
//! Latency is estimated as `(I·H)(b3 P³ + b2 P² + b1 P + b0)` and LUT cost as
//! `c1 I H + c2 I + c3 H + β` with per-`P` coefficients.

mod coeffs;
mod fit;
mod pareto;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use coeffs::{CoeffFileError, CoefficientTable, LatencyCoeffs, LutCoeffs, LutEntry};
pub use fit::{
    calibrate_fixed_io, fit_latency, fit_lut, read_measurements, write_measurements, LatencyFit,
    LutFit, MeasurementRecord,
};
pub use pareto::{dominates, pareto_filter};

#[derive(Debug, Error, PartialEq)]
pub enum DseError {
    #[error("P = {p} is outside the estimator domain [0, {p_max}] for H = {h}")]
    OutOfDomain { p: u32, p_max: u32, h: usize },
    #[error("no {mode} LUT coefficients for P = {p}")]
    MissingCoefficients { p: u32, mode: DspMode },
    #[error("hidden width {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("layer widths must be positive (I = {i}, H = {h})")]
    EmptyLayer { i: usize, h: usize },
    #[error("{what}: underdetermined{}", p.map(|p| format!(" for P = {p}")).unwrap_or_default())]
    Underdetermined { what: String, p: Option<u32> },
    #[error("{what}: rank-deficient system{}", p.map(|p| format!(" for P = {p}")).unwrap_or_default())]
    RankDeficient { what: String, p: Option<u32> },
    #[error("measurement data: {0}")]
    BadRecord(String),
}

/// Whether multipliers map onto DSP blocks or onto LUT fabric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DspMode {
    WithDsp,
    NoDsp,
}

impl DspMode {
    pub const ALL: [DspMode; 2] = [DspMode::WithDsp, DspMode::NoDsp];

    pub fn as_str(self) -> &'static str {
        match self {
            DspMode::WithDsp => "with_dsp",
            DspMode::NoDsp => "no_dsp",
        }
    }
}

impl fmt::Display for DspMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DspMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "with_dsp" => Ok(DspMode::WithDsp),
            "no_dsp" => Ok(DspMode::NoDsp),
            other => Err(format!(
                "unknown resource mode `{other}` (expected with_dsp or no_dsp)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    MinLatency,
    MinCost,
    Pareto,
    All,
}

impl FromStr for Selection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "min_latency" => Ok(Selection::MinLatency),
            "min_cost" => Ok(Selection::MinCost),
            "pareto" => Ok(Selection::Pareto),
            "all" => Ok(Selection::All),
            other => Err(format!("unknown selection `{other}`")),
        }
    }
}

/// One point of the design space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateDesign {
    pub p: u32,
    pub mode: DspMode,
    pub multipliers: u64,
    pub adders: u64,
    pub est_latency_cycles: f64,
    pub est_lut: f64,
    pub est_dsp: u64,
}

impl CandidateDesign {
    pub fn use_dsp(&self) -> bool {
        self.mode == DspMode::WithDsp
    }
}

/// Multiplier and adder counts at parallelism `p` for `i` input/output neurons.
pub fn mac_count(p: u32, i: usize) -> (u64, u64) {
    if p == 0 {
        (1, 1)
    } else {
        let n = (1u64 << p) * i as u64;
        (n, n)
    }
}

/// Largest parallelism level for hidden width `h`: `⌊log2 h⌋`.
pub fn p_max(h: usize) -> u32 {
    assert!(h > 0);
    h.ilog2()
}

pub fn estimate_latency(
    i: usize,
    h: usize,
    p: u32,
    coeffs: &LatencyCoeffs,
) -> Result<f64, DseError> {
    if i == 0 || h == 0 {
        return Err(DseError::EmptyLayer { i, h });
    }
    let p_max = p_max(h);
    if p > p_max {
        return Err(DseError::OutOfDomain { p, p_max, h });
    }
    Ok((i * h) as f64 * coeffs.normalized(p as f64))
}

pub fn estimate_lut(i: usize, h: usize, p: u32, coeffs: &LutCoeffs) -> Result<f64, DseError> {
    let e = coeffs.entry(p).ok_or(DseError::MissingCoefficients {
        p,
        mode: coeffs.mode,
    })?;
    Ok(e.eval(i as f64, h as f64))
}

/// Every candidate for an `i-h-i` network, `P ∈ 0..=log2(h)`, filtered by
/// `selection`.
pub fn enumerate(
    i: usize,
    h: usize,
    mode: DspMode,
    table: &CoefficientTable,
    selection: Selection,
) -> Result<Vec<CandidateDesign>, DseError> {
    if i == 0 || h == 0 {
        return Err(DseError::EmptyLayer { i, h });
    }
    if !h.is_power_of_two() {
        return Err(DseError::NotPowerOfTwo(h));
    }
    let lat = table.latency(mode);
    let lut = table.lut(mode);
    let all = (0..=p_max(h))
        .map(|p| {
            let (multipliers, adders) = mac_count(p, i);
            Ok(CandidateDesign {
                p,
                mode,
                multipliers,
                adders,
                est_latency_cycles: estimate_latency(i, h, p, lat)?,
                est_lut: estimate_lut(i, h, p, lut)?,
                est_dsp: if mode == DspMode::WithDsp {
                    multipliers
                } else {
                    0
                },
            })
        })
        .collect::<Result<Vec<_>, DseError>>()?;
    Ok(select(all, selection))
}

pub fn select(all: Vec<CandidateDesign>, selection: Selection) -> Vec<CandidateDesign> {
    let argmin = |key: fn(&CandidateDesign) -> f64| {
        all.iter()
            .min_by(|a, b| key(a).total_cmp(&key(b)))
            .cloned()
            .into_iter()
            .collect()
    };
    match selection {
        Selection::All => all,
        Selection::MinLatency => argmin(|c| c.est_latency_cycles),
        Selection::MinCost => argmin(|c| c.est_lut),
        Selection::Pareto => {
            let pts: Vec<(f64, f64)> = all
                .iter()
                .map(|c| (c.est_lut, c.est_latency_cycles))
                .collect();
            pareto_filter(&pts)
                .into_iter()
                .map(|k| all[k].clone())
                .collect()
        }
    }
}

/// Reference estimator outputs for 3-4-3, 3-8-3 and 3-16-3 networks that the
/// built-in table is calibrated against.
pub const REFERENCE_ESTIMATES: &str = include_str!("../../data/reference_estimates.csv");

/// Fits a full coefficient table. Latency uses [`fit_latency`] per mode. LUT
/// coefficients use [`fit_lut`] when the records vary `I`, otherwise
/// [`calibrate_fixed_io`].
pub fn calibrate_table(
    records: &[MeasurementRecord],
    provenance: &str,
) -> Result<CoefficientTable, DseError> {
    let single_width = records
        .iter()
        .map(|r| r.i)
        .collect::<std::collections::BTreeSet<_>>()
        .len()
        == 1;
    let mut latency = Vec::new();
    let mut lut = Vec::new();
    for mode in DspMode::ALL {
        latency.push(fit_latency(records, mode)?.coeffs);
        let fit = if single_width {
            calibrate_fixed_io(records, mode)?
        } else {
            fit_lut(records, mode)?
        };
        lut.push(fit.coeffs);
    }
    let [l0, l1]: [LatencyCoeffs; 2] = latency.try_into().unwrap();
    let [u0, u1]: [LutCoeffs; 2] = lut.try_into().unwrap();
    Ok(CoefficientTable::new(provenance, [l0, l1], [u0, u1]))
}
