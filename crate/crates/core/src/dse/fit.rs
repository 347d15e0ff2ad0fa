//! Fitting estimator coefficients to measured (or reference) designs.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{DseError, DspMode, LatencyCoeffs, LutCoeffs, LutEntry};
use crate::linalg::{least_squares, LinalgError};

/// One synthesized design point. CSV header: `I,H,P,mode,latency_cycles,luts`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    #[serde(rename = "I")]
    pub i: usize,
    #[serde(rename = "H")]
    pub h: usize,
    #[serde(rename = "P")]
    pub p: u32,
    pub mode: DspMode,
    pub latency_cycles: f64,
    pub luts: f64,
}

impl MeasurementRecord {
    fn check(&self) -> Result<(), DseError> {
        let ok = self.i > 0
            && self.h > 0
            && self.latency_cycles.is_finite()
            && self.latency_cycles > 0.0
            && self.luts.is_finite()
            && self.luts > 0.0;
        if ok {
            Ok(())
        } else {
            Err(DseError::BadRecord(format!(
                "non-positive value in {self:?}"
            )))
        }
    }
}

pub fn read_measurements<R: Read>(r: R) -> Result<Vec<MeasurementRecord>, DseError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    let headers = rdr
        .headers()
        .map_err(|e| DseError::BadRecord(e.to_string()))?
        .clone();
    let expected = ["I", "H", "P", "mode", "latency_cycles", "luts"];
    if headers.iter().ne(expected.iter().copied()) {
        return Err(DseError::BadRecord(format!(
            "expected header {}, got {}",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.deserialize::<MeasurementRecord>().enumerate() {
        let rec = rec.map_err(|e| DseError::BadRecord(format!("row {}: {e}", line + 1)))?;
        rec.check()?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_measurements<W: Write>(w: W, records: &[MeasurementRecord]) -> Result<(), DseError> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in records {
        wtr.serialize(r)
            .map_err(|e| DseError::BadRecord(e.to_string()))?;
    }
    wtr.flush().map_err(|e| DseError::BadRecord(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyFit {
    pub coeffs: LatencyCoeffs,
    /// RMS residual of the normalized per-P averages.
    pub residual_rms: f64,
}

fn linalg_err(e: LinalgError, what: &str, p: Option<u32>) -> DseError {
    match e {
        LinalgError::Singular => DseError::RankDeficient {
            what: what.into(),
            p,
        },
        LinalgError::Underdetermined { .. } => DseError::Underdetermined {
            what: what.into(),
            p,
        },
    }
}

/// Least-squares cubic in `P` through the per-`P` averages of
/// `latency / (I·H)`, using only records of `mode`.
pub fn fit_latency(records: &[MeasurementRecord], mode: DspMode) -> Result<LatencyFit, DseError> {
    let mut per_p: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.mode == mode) {
        r.check()?;
        let e = per_p.entry(r.p).or_default();
        e.0 += r.latency_cycles / (r.i * r.h) as f64;
        e.1 += 1;
    }
    if per_p.len() < 4 {
        return Err(DseError::Underdetermined {
            what: format!(
                "{mode} latency fit needs 4 distinct P values, got {}",
                per_p.len()
            ),
            p: None,
        });
    }
    let (design, y): (Vec<Vec<f64>>, Vec<f64>) = per_p
        .iter()
        .map(|(p, (sum, n))| {
            let p = *p as f64;
            (vec![p * p * p, p * p, p, 1.0], sum / *n as f64)
        })
        .unzip();
    let fit = least_squares(&design, &y).map_err(|e| linalg_err(e, "latency fit", None))?;
    let c = &fit.coeffs;
    Ok(LatencyFit {
        coeffs: LatencyCoeffs::new(mode, [c[0], c[1], c[2], c[3]]),
        residual_rms: fit.residual_rms,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LutFit {
    pub coeffs: LutCoeffs,
    pub residual_rms: BTreeMap<u32, f64>,
}

fn group_by_p(
    records: &[MeasurementRecord],
    mode: DspMode,
) -> Result<BTreeMap<u32, Vec<MeasurementRecord>>, DseError> {
    let mut groups: BTreeMap<u32, Vec<MeasurementRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.mode == mode) {
        r.check()?;
        groups.entry(r.p).or_default().push(*r);
    }
    Ok(groups)
}

/// Per-`P` least squares of `luts ≈ c1 I H + c2 I + c3 H + β`.
pub fn fit_lut(records: &[MeasurementRecord], mode: DspMode) -> Result<LutFit, DseError> {
    let groups = group_by_p(records, mode)?;
    if groups.is_empty() {
        return Err(DseError::Underdetermined {
            what: format!("no {mode} records"),
            p: None,
        });
    }
    let mut coeffs = LutCoeffs::new(mode);
    let mut residual_rms = BTreeMap::new();
    for (p, rows) in groups {
        let is: BTreeSet<usize> = rows.iter().map(|r| r.i).collect();
        let hs: BTreeSet<usize> = rows.iter().map(|r| r.h).collect();
        if rows.len() < 4 || is.len() < 2 || hs.len() < 2 {
            return Err(DseError::Underdetermined {
                what: format!(
                    "LUT fit needs >= 4 records over >= 2 distinct I and H; have {} records, {} I, {} H",
                    rows.len(),
                    is.len(),
                    hs.len()
                ),
                p: Some(p),
            });
        }
        let (design, y): (Vec<Vec<f64>>, Vec<f64>) = rows
            .iter()
            .map(|r| {
                let (i, h) = (r.i as f64, r.h as f64);
                (vec![i * h, i, h, 1.0], r.luts)
            })
            .unzip();
        let fit = least_squares(&design, &y).map_err(|e| linalg_err(e, "LUT fit", Some(p)))?;
        let c = &fit.coeffs;
        coeffs.insert(
            p,
            LutEntry {
                c1: c[0],
                c2: c[1],
                c3: c[2],
                beta: c[3],
            },
        );
        residual_rms.insert(p, fit.residual_rms);
    }
    Ok(LutFit {
        coeffs,
        residual_rms,
    })
}

/// LUT calibration for data sets that all share one input width `I`, where
/// `I` and `I·H` cannot be separated. Each level gets `luts ≈ s H + β`,
/// stored as `c1 = s / I`, `c2 = c3 = 0`. Levels observed at a single `H`
/// reuse the slope of the nearest level that has one (lower level on ties).
pub fn calibrate_fixed_io(
    records: &[MeasurementRecord],
    mode: DspMode,
) -> Result<LutFit, DseError> {
    let groups = group_by_p(records, mode)?;
    let widths: BTreeSet<usize> = groups.values().flatten().map(|r| r.i).collect();
    let i = match widths.len() {
        1 => *widths.first().unwrap() as f64,
        0 => {
            return Err(DseError::Underdetermined {
                what: format!("no {mode} records"),
                p: None,
            })
        }
        _ => {
            return Err(DseError::BadRecord(
                "fixed-I calibration needs a single input width".into(),
            ))
        }
    };

    let mut lines: BTreeMap<u32, (f64, f64, f64)> = BTreeMap::new();
    for (p, rows) in &groups {
        let hs: BTreeSet<usize> = rows.iter().map(|r| r.h).collect();
        if hs.len() < 2 {
            continue;
        }
        let (design, y): (Vec<Vec<f64>>, Vec<f64>) =
            rows.iter().map(|r| (vec![r.h as f64, 1.0], r.luts)).unzip();
        let fit =
            least_squares(&design, &y).map_err(|e| linalg_err(e, "LUT calibration", Some(*p)))?;
        lines.insert(*p, (fit.coeffs[0], fit.coeffs[1], fit.residual_rms));
    }
    if lines.is_empty() {
        return Err(DseError::Underdetermined {
            what: "no level spans two hidden widths".into(),
            p: None,
        });
    }

    let mut coeffs = LutCoeffs::new(mode);
    let mut residual_rms = BTreeMap::new();
    for (p, rows) in &groups {
        let (slope, beta, rms) = match lines.get(p) {
            Some(line) => *line,
            None => {
                let nearest = lines.keys().min_by_key(|q| (q.abs_diff(*p), **q)).unwrap();
                let slope = lines[nearest].0;
                let beta = rows
                    .iter()
                    .map(|r| r.luts - slope * r.h as f64)
                    .sum::<f64>()
                    / rows.len() as f64;
                let rms = (rows
                    .iter()
                    .map(|r| (slope * r.h as f64 + beta - r.luts).powi(2))
                    .sum::<f64>()
                    / rows.len() as f64)
                    .sqrt();
                (slope, beta, rms)
            }
        };
        coeffs.insert(
            *p,
            LutEntry {
                c1: slope / i,
                c2: 0.0,
                c3: 0.0,
                beta,
            },
        );
        residual_rms.insert(*p, rms);
    }
    Ok(LutFit {
        coeffs,
        residual_rms,
    })
}
