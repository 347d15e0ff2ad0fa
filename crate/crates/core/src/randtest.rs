//! Frequency (monobit), block-frequency and runs tests from the NIST
//! SP 800-22 statistical suite.

use serde::Serialize;
use thiserror::Error;

use crate::oscillator::BitStream;
use crate::special::{erfc, gamma_q};

/// Significance level.
pub const ALPHA: f64 = 0.01;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RandTestError {
    #[error("{test}: need at least {min} bits, got {n}")]
    TooShort {
        test: &'static str,
        n: usize,
        min: usize,
    },
    #[error("runs: frequency prerequisite failed (|pi - 1/2| = {deviation:.4} >= {tau:.4})")]
    NotApplicable { deviation: f64, tau: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub test_name: String,
    pub n: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub pass: bool,
}

impl TestReport {
    fn new(name: &str, n: usize, statistic: f64, p_value: f64) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        Self {
            test_name: name.to_string(),
            n,
            statistic,
            p_value,
            pass: p_value >= ALPHA,
        }
    }
}

fn ones(bits: &BitStream) -> usize {
    let full = bits.len() / 8;
    let mut count: usize = bits.as_bytes()[..full]
        .iter()
        .map(|b| b.count_ones() as usize)
        .sum();
    count += (full * 8..bits.len()).filter(|&i| bits.get(i)).count();
    count
}

/// Statistic `S = Σ (2b - 1)`, `p = erfc(|S| / √(2n))`.
pub fn monobit(bits: &BitStream) -> Result<TestReport, RandTestError> {
    let n = bits.len();
    if n < 100 {
        return Err(RandTestError::TooShort {
            test: "monobit",
            n,
            min: 100,
        });
    }
    let s = 2.0 * ones(bits) as f64 - n as f64;
    let p = erfc(s.abs() / (2.0 * n as f64).sqrt());
    Ok(TestReport::new("monobit", n, s, p))
}

/// `χ² = 4M Σ (π_i - 1/2)²` over `⌊n/M⌋` blocks, `p = Q(N/2, χ²/2)`.
pub fn block_frequency(bits: &BitStream, block_size: usize) -> Result<TestReport, RandTestError> {
    let n = bits.len();
    let min = block_size.max(20);
    if n < min || block_size < 20 {
        return Err(RandTestError::TooShort {
            test: "block_frequency",
            n,
            min,
        });
    }
    let blocks = n / block_size;
    let mut bit_iter = bits.iter();
    let mut chi2 = 0.0;
    for _ in 0..blocks {
        let ones = bit_iter.by_ref().take(block_size).filter(|b| *b).count();
        let pi = ones as f64 / block_size as f64;
        chi2 += (pi - 0.5) * (pi - 0.5);
    }
    chi2 *= 4.0 * block_size as f64;
    let p = gamma_q(blocks as f64 / 2.0, chi2 / 2.0);
    Ok(TestReport::new("block_frequency", n, chi2, p))
}

/// Total number of runs `V`, compared against its expectation `2nπ(1-π)`.
pub fn runs_test(bits: &BitStream) -> Result<TestReport, RandTestError> {
    let n = bits.len();
    if n < 100 {
        return Err(RandTestError::TooShort {
            test: "runs",
            n,
            min: 100,
        });
    }
    let pi = ones(bits) as f64 / n as f64;
    let tau = 2.0 / (n as f64).sqrt();
    if (pi - 0.5).abs() >= tau {
        return Err(RandTestError::NotApplicable {
            deviation: (pi - 0.5).abs(),
            tau,
        });
    }
    let mut v = 1usize;
    let mut prev = bits.get(0);
    for b in bits.iter().skip(1) {
        v += (b != prev) as usize;
        prev = b;
    }
    let nf = n as f64;
    let expect = 2.0 * nf * pi * (1.0 - pi);
    let p = erfc((v as f64 - expect).abs() / (2.0 * (2.0 * nf).sqrt() * pi * (1.0 - pi)));
    Ok(TestReport::new("runs", n, v as f64, p))
}

/// Outcome of one test in a battery run: a report or the reason it could not
/// be applied.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryEntry {
    pub name: &'static str,
    pub result: Result<TestReport, RandTestError>,
}

/// Runs all three tests.
pub fn battery(bits: &BitStream, block_size: usize) -> Vec<BatteryEntry> {
    vec![
        BatteryEntry {
            name: "monobit",
            result: monobit(bits),
        },
        BatteryEntry {
            name: "block_frequency",
            result: block_frequency(bits, block_size),
        },
        BatteryEntry {
            name: "runs",
            result: runs_test(bits),
        },
    ]
}
