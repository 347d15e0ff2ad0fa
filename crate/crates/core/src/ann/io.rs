//! JSON model files. Every `f32` is stored as its 8-hex-digit IEEE-754 bit
//! pattern so weights reach the code generator unchanged.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Activation, AnnModel, Arch};
use crate::integrator::NormStats;

const FORMAT: &str = "chaosnet-model/1";

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("malformed model file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported model format `{0}`")]
    Format(String),
    #[error("bad float bit pattern `{0}` (expected 8 hex digits)")]
    BadHex(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Serialize, Deserialize)]
struct ArchJson {
    input: usize,
    hidden: usize,
    output: usize,
}

#[derive(Serialize, Deserialize)]
struct StatsJson {
    min: String,
    max: String,
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    format: String,
    arch: ArchJson,
    activation: String,
    rng_seed: u64,
    norm_stats: Vec<StatsJson>,
    w1: Vec<Vec<String>>,
    b1: Vec<String>,
    w2: Vec<Vec<String>>,
    b2: Vec<String>,
}

pub fn f32_to_hex(v: f32) -> String {
    format!("{:08x}", v.to_bits())
}

pub fn hex_to_f32(s: &str) -> Result<f32, ModelFileError> {
    if s.len() != 8 {
        return Err(ModelFileError::BadHex(s.to_string()));
    }
    u32::from_str_radix(s, 16)
        .map(f32::from_bits)
        .map_err(|_| ModelFileError::BadHex(s.to_string()))
}

fn hex_vec(v: &[f32]) -> Vec<String> {
    v.iter().map(|x| f32_to_hex(*x)).collect()
}

fn hex_rows(v: &[f32], cols: usize) -> Vec<Vec<String>> {
    v.chunks_exact(cols).map(hex_vec).collect()
}

fn parse_vec(v: &[String]) -> Result<Vec<f32>, ModelFileError> {
    v.iter().map(|s| hex_to_f32(s)).collect()
}

fn parse_rows(rows: &[Vec<String>], cols: usize, name: &str) -> Result<Vec<f32>, ModelFileError> {
    let mut out = Vec::with_capacity(rows.len() * cols);
    for row in rows {
        if row.len() != cols {
            return Err(ModelFileError::Invalid(format!(
                "{name} row has {} entries, expected {cols}",
                row.len()
            )));
        }
        out.extend(parse_vec(row)?);
    }
    Ok(out)
}

pub(super) fn to_json(m: &AnnModel) -> String {
    let doc = ModelJson {
        format: FORMAT.into(),
        arch: ArchJson {
            input: m.arch.input,
            hidden: m.arch.hidden,
            output: m.arch.output,
        },
        activation: m.activation.name().into(),
        rng_seed: m.rng_seed,
        norm_stats: m
            .norm_stats
            .iter()
            .map(|s| StatsJson {
                min: f32_to_hex(s.min),
                max: f32_to_hex(s.max),
            })
            .collect(),
        w1: hex_rows(&m.w1, m.arch.input),
        b1: hex_vec(&m.b1),
        w2: hex_rows(&m.w2, m.arch.hidden),
        b2: hex_vec(&m.b2),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("model serializes");
    s.push('\n');
    s
}

pub(super) fn from_json(text: &str) -> Result<AnnModel, ModelFileError> {
    let doc: ModelJson = serde_json::from_str(text)?;
    if doc.format != FORMAT {
        return Err(ModelFileError::Format(doc.format));
    }
    let arch = Arch::new(doc.arch.input, doc.arch.hidden, doc.arch.output);
    let activation: Activation = doc.activation.parse().map_err(ModelFileError::Invalid)?;
    let norm_stats = doc
        .norm_stats
        .iter()
        .map(|s| {
            Ok(NormStats {
                min: hex_to_f32(&s.min)?,
                max: hex_to_f32(&s.max)?,
            })
        })
        .collect::<Result<Vec<_>, ModelFileError>>()?;
    let model = AnnModel {
        arch,
        w1: parse_rows(&doc.w1, arch.input, "w1")?,
        b1: parse_vec(&doc.b1)?,
        w2: parse_rows(&doc.w2, arch.hidden, "w2")?,
        b2: parse_vec(&doc.b2)?,
        activation,
        norm_stats,
        rng_seed: doc.rng_seed,
    };
    model
        .validate()
        .map_err(|e| ModelFileError::Invalid(e.to_string()))?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ann::tests::random_model;
    use proptest::prelude::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut m = random_model(Arch::new(3, 8, 3), Activation::Sigmoid, 4);
        m.w1[0] = -0.0;
        m.b1[1] = f32::MIN_POSITIVE / 8.0;
        m.rng_seed = 12345;
        m.norm_stats[1] = NormStats {
            min: -21.7,
            max: 30.25,
        };
        let text = m.to_json();
        assert!(text.contains("\"80000000\""));
        let back = AnnModel::from_json(&text).unwrap();
        assert_eq!(
            back.parameters().map(f32::to_bits).collect::<Vec<_>>(),
            m.parameters().map(f32::to_bits).collect::<Vec<_>>()
        );
        assert_eq!(back.norm_stats, m.norm_stats);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn rejects_bad_files() {
        let text = random_model(Arch::new(2, 2, 2), Activation::Relu, 1).to_json();
        let bad = text.replacen("chaosnet-model/1", "other/9", 1);
        assert!(matches!(
            AnnModel::from_json(&bad),
            Err(ModelFileError::Format(_))
        ));
        assert!(matches!(hex_to_f32("3f80"), Err(ModelFileError::BadHex(_))));
        assert!(matches!(
            hex_to_f32("zzzzzzzz"),
            Err(ModelFileError::BadHex(_))
        ));
        let nan = text.replacen(
            &text[text.find("\"b2\"").unwrap()..]
                .split('"')
                .nth(3)
                .unwrap()
                .to_string(),
            "7fc00000",
            1,
        );
        assert!(AnnModel::from_json(&nan).is_err());
    }

    proptest! {
        #[test]
        fn hex_round_trip(bits in any::<u32>()) {
            let v = f32::from_bits(bits);
            prop_assert_eq!(hex_to_f32(&f32_to_hex(v)).unwrap().to_bits(), bits);
        }
    }
}
