//! C++ emission for a selected design: an HLS-style oscillator core with the
//! weights baked in, plus a standalone testbench carrying reference vectors.
//!
//! Weights travel as `uint32_t` bit patterns and are reinterpreted with
//! `memcpy`, so the emitted arithmetic sees exactly the model's `f32` values.
//! Both layers go through one templated MAC routine whose accumulation order
//! matches [`AnnModel::forward`](crate::ann::AnnModel::forward).

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ann::{Activation, AnnModel};
use crate::dse::{p_max, CandidateDesign, DspMode};
use crate::oscillator::{self, OscillatorError};
use crate::TOOL_VERSION;

pub const CORE_TEMPLATE: &str = include_str!("../templates/core.cpp.tmpl");
pub const TESTBENCH_TEMPLATE: &str = include_str!("../templates/testbench.cpp.tmpl");

#[derive(Debug, Error)]
pub enum CodegenError {
    #[error("unsupported architecture {0}: the oscillator core needs output width == input width")]
    UnsupportedArch(String),
    #[error("`{0}` is not a usable C++ identifier")]
    BadIdentifier(String),
    #[error("parallelism P={p} exceeds the maximum {max} for hidden width {h}")]
    ParallelismOutOfRange { p: u32, max: u32, h: usize },
    #[error("model is not usable: {0}")]
    Model(String),
    #[error("testbench needs at least one iteration")]
    NoIterations,
    #[error("reference vectors: {0}")]
    Reference(#[from] OscillatorError),
    #[error("template token `{{{{{0}}}}}` has no value")]
    UnresolvedToken(String),
    #[error("unterminated template token at byte {0}")]
    UnterminatedToken(usize),
    #[error("{} already exists (use force to overwrite)", .0.display())]
    Exists(PathBuf),
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Everything that determines a generated bundle.
#[derive(Debug, Clone)]
pub struct CodegenRequest<'m> {
    pub model: &'m AnnModel,
    pub design: CandidateDesign,
    pub core_name: String,
    /// Normalized seed fed to the core on its first call.
    pub seed: Vec<f32>,
    /// Number of reference iterations embedded in the testbench.
    pub iterations: usize,
    pub resource_mode: DspMode,
}

impl<'m> CodegenRequest<'m> {
    pub fn new(
        model: &'m AnnModel,
        design: CandidateDesign,
        core_name: impl Into<String>,
        seed: Vec<f32>,
        iterations: usize,
    ) -> Self {
        let resource_mode = design.mode;
        Self {
            model,
            design,
            core_name: core_name.into(),
            seed,
            iterations,
            resource_mode,
        }
    }

    fn validate(&self) -> Result<(), CodegenError> {
        self.model
            .validate()
            .map_err(|e| CodegenError::Model(e.to_string()))?;
        if self.model.parameters().any(|v| !v.is_finite()) {
            return Err(CodegenError::Model("non-finite parameter".into()));
        }
        let a = self.model.arch;
        if a.input != a.output {
            return Err(CodegenError::UnsupportedArch(a.to_string()));
        }
        if !is_identifier(&self.core_name) {
            return Err(CodegenError::BadIdentifier(self.core_name.clone()));
        }
        let max = p_max(a.hidden);
        if self.design.p > max {
            return Err(CodegenError::ParallelismOutOfRange {
                p: self.design.p,
                max,
                h: a.hidden,
            });
        }
        if self.iterations == 0 {
            return Err(CodegenError::NoIterations);
        }
        Ok(())
    }

    /// SHA-256 over every input that influences the emitted text.
    pub fn input_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.model.to_json().as_bytes());
        h.update(self.design.p.to_le_bytes());
        h.update(self.resource_mode.as_str().as_bytes());
        h.update([0]);
        h.update(self.core_name.as_bytes());
        h.update([0]);
        for v in &self.seed {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update((self.iterations as u64).to_le_bytes());
        h.update(CORE_TEMPLATE.as_bytes());
        h.update(TESTBENCH_TEMPLATE.as_bytes());
        hex::encode(h.finalize())
    }
}

const CPP_KEYWORDS: &[&str] = &[
    "alignas",
    "alignof",
    "and",
    "asm",
    "auto",
    "bool",
    "break",
    "case",
    "catch",
    "char",
    "class",
    "const",
    "constexpr",
    "continue",
    "default",
    "delete",
    "do",
    "double",
    "else",
    "enum",
    "explicit",
    "extern",
    "false",
    "float",
    "for",
    "friend",
    "goto",
    "if",
    "inline",
    "int",
    "long",
    "main",
    "namespace",
    "new",
    "not",
    "operator",
    "or",
    "private",
    "protected",
    "public",
    "register",
    "return",
    "short",
    "signed",
    "sizeof",
    "static",
    "struct",
    "switch",
    "template",
    "this",
    "throw",
    "true",
    "try",
    "typedef",
    "union",
    "unsigned",
    "using",
    "virtual",
    "void",
    "volatile",
    "while",
];

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_') && !CPP_KEYWORDS.contains(&s)
}

/// Replaces `{{KEY}}` tokens. Any token without a value is an error. A line
/// holding nothing but a token whose value is empty is dropped entirely.
pub fn render(template: &str, values: &[(&str, String)]) -> Result<String, CodegenError> {
    let lookup = |key: &str| {
        values
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v.as_str())
    };
    let mut out = String::with_capacity(template.len() * 2);
    let mut offset = 0;
    for line in template.split_inclusive('\n') {
        let trimmed = line.trim();
        if let Some(key) = trimmed
            .strip_prefix("{{")
            .and_then(|t| t.strip_suffix("}}"))
        {
            if !key.contains("{{") && lookup(key) == Some("") {
                offset += line.len();
                continue;
            }
        }
        let mut rest = line;
        let mut pos = offset;
        while let Some(start) = rest.find("{{") {
            out.push_str(&rest[..start]);
            let after = &rest[start + 2..];
            let end = after
                .find("}}")
                .ok_or(CodegenError::UnterminatedToken(pos + start))?;
            let key = &after[..end];
            let value =
                lookup(key).ok_or_else(|| CodegenError::UnresolvedToken(key.to_string()))?;
            out.push_str(value);
            rest = &after[end + 2..];
            pos += start + 4 + end;
        }
        out.push_str(rest);
        offset += line.len();
    }
    Ok(out)
}

fn hex_literal(v: f32) -> String {
    format!("0x{:08x}u", v.to_bits())
}

fn literal_row(values: &[f32]) -> String {
    values
        .iter()
        .map(|v| hex_literal(*v))
        .collect::<Vec<_>>()
        .join(", ")
}

fn matrix_body(values: &[f32], cols: usize) -> String {
    values
        .chunks_exact(cols)
        .map(|row| format!("    {{{}}},", literal_row(row)))
        .collect::<Vec<_>>()
        .join("\n")
}

fn vector_body(values: &[f32]) -> String {
    format!("    {}", literal_row(values))
}

fn activation_body(act: Activation) -> &'static str {
    match act {
        Activation::Relu => "return v > 0.0f ? v : 0.0f;",
        Activation::Tanh => "return std::tanh(v);",
        Activation::Sigmoid => "return 1.0f / (1.0f + std::exp(-v));",
    }
}

fn common_values(req: &CodegenRequest<'_>) -> Vec<(&'static str, String)> {
    let a = req.model.arch;
    vec![
        ("CORE_NAME", req.core_name.clone()),
        ("TOOL_VERSION", TOOL_VERSION.to_string()),
        ("I", a.input.to_string()),
        ("H", a.hidden.to_string()),
        ("O", a.output.to_string()),
    ]
}

/// Emits the synthesizable core.
pub fn generate_core(req: &CodegenRequest<'_>) -> Result<String, CodegenError> {
    req.validate()?;
    let m = req.model;
    let a = m.arch;
    let p = req.design.p;
    let width = 1usize << p;
    let lanes = if p == 0 { 1 } else { width * a.input };
    let impl_kind = match req.resource_mode {
        DspMode::WithDsp => "dsp",
        DspMode::NoDsp => "fabric",
    };

    let (row_pragmas, col_pragmas, partition) = if p == 0 {
        (String::new(), String::new(), String::new())
    } else {
        (
            "        #pragma HLS unroll factor=ROW_LANES".to_string(),
            "            #pragma HLS unroll factor=COL_LANES".to_string(),
            "    #pragma HLS array_partition variable=x complete\n    \
             #pragma HLS array_partition variable=h complete\n    \
             #pragma HLS array_partition variable=y complete"
                .to_string(),
        )
    };
    let top_pragmas = format!(
        "    #pragma HLS allocation operation instances=fmul limit={lanes}\n    \
         #pragma HLS allocation operation instances=fadd limit={lanes}"
    );
    let bind_pragmas = format!(
        "        #pragma HLS bind_op variable=acc op=fmul impl={impl_kind}\n        \
         #pragma HLS bind_op variable=acc op=fadd impl={impl_kind}"
    );
    let (l1, l2) = if p == 0 {
        ((1, 1), (1, 1))
    } else {
        ((width, a.input), (a.output, width))
    };

    let activation_note = if m.activation == Activation::Relu {
        String::new()
    } else {
        log::warn!(
            "{} activation is emitted as a standard library call; its hardware cost is not modelled",
            m.activation
        );
        format!(
            "\n// {} is emitted as a standard library call. Its synthesis cost is not\n\
             // covered by the design-space estimates.",
            m.activation
        )
    };

    let mut values = common_values(req);
    values.extend([
        ("ARCH", a.to_string()),
        ("ACTIVATION", m.activation.to_string()),
        ("ACTIVATION_NOTE", activation_note),
        ("ACTIVATION_BODY", activation_body(m.activation).to_string()),
        ("P", p.to_string()),
        ("LANES", lanes.to_string()),
        ("RESOURCE_MODE", req.resource_mode.as_str().to_string()),
        ("W1", matrix_body(&m.w1, a.input)),
        ("B1", vector_body(&m.b1)),
        ("W2", matrix_body(&m.w2, a.hidden)),
        ("B2", vector_body(&m.b2)),
        ("ROW_PRAGMAS", row_pragmas),
        ("COL_PRAGMAS", col_pragmas),
        ("BIND_PRAGMAS", bind_pragmas),
        ("TOP_PRAGMAS", top_pragmas),
        ("PARTITION_PRAGMAS", partition),
        ("L1_ROW_LANES", l1.0.to_string()),
        ("L1_COL_LANES", l1.1.to_string()),
        ("L2_ROW_LANES", l2.0.to_string()),
        ("L2_COL_LANES", l2.1.to_string()),
    ]);
    render(CORE_TEMPLATE, &values)
}

/// Emits the testbench, computing reference vectors with the simulator.
pub fn generate_testbench(req: &CodegenRequest<'_>) -> Result<String, CodegenError> {
    req.validate()?;
    let expected = oscillator::generate(req.model, &req.seed, req.iterations)?;
    render_testbench(req, &expected)
}

/// Testbench text for explicit expected vectors (row-major, one row per
/// iteration).
pub fn render_testbench(
    req: &CodegenRequest<'_>,
    expected: &[f32],
) -> Result<String, CodegenError> {
    let o = req.model.arch.output;
    let mut values = common_values(req);
    values.extend([
        ("ITERATIONS", (expected.len() / o).to_string()),
        ("SEED", vector_body(&req.seed)),
        ("EXPECTED", matrix_body(expected, o)),
    ]);
    render(TESTBENCH_TEMPLATE, &values)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool_version: String,
    pub input_sha256: String,
    pub model_sha256: String,
    pub core_name: String,
    pub p: u32,
    pub resource_mode: DspMode,
    pub iterations: usize,
    pub files: Vec<ManifestFile>,
    /// Caller-supplied context, e.g. the effective project configuration.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestFile {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedBundle {
    pub core_name: String,
    pub core_source: String,
    pub testbench_source: String,
    pub manifest: Manifest,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl GeneratedBundle {
    pub fn core_file_name(&self) -> String {
        format!("{}.cpp", self.core_name)
    }

    pub fn testbench_file_name(&self) -> String {
        format!("{}_tb.cpp", self.core_name)
    }

    pub fn manifest_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        s.push('\n');
        s
    }

    /// Writes the three files into `dir`, creating it if needed. Without
    /// `force`, an existing file aborts the write before anything is touched.
    pub fn write_to(&self, dir: &Path, force: bool) -> Result<Vec<PathBuf>, CodegenError> {
        let manifest = self.manifest_json();
        let files = [
            (dir.join(self.core_file_name()), self.core_source.as_str()),
            (
                dir.join(self.testbench_file_name()),
                self.testbench_source.as_str(),
            ),
            (dir.join("manifest.json"), manifest.as_str()),
        ];
        if !force {
            if let Some((path, _)) = files.iter().find(|(p, _)| p.exists()) {
                return Err(CodegenError::Exists(path.clone()));
            }
        }
        fs::create_dir_all(dir).map_err(|source| CodegenError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut written = Vec::new();
        for (path, text) in &files {
            let io = |source| CodegenError::Io {
                path: path.clone(),
                source,
            };
            let mut f = fs::File::create(path).map_err(io)?;
            f.write_all(text.as_bytes()).map_err(io)?;
            written.push(path.clone());
        }
        Ok(written)
    }
}

/// Core, testbench and manifest for one request.
pub fn generate_bundle(req: &CodegenRequest<'_>) -> Result<GeneratedBundle, CodegenError> {
    let core_source = generate_core(req)?;
    let testbench_source = generate_testbench(req)?;
    let manifest = Manifest {
        tool_version: TOOL_VERSION.to_string(),
        input_sha256: req.input_hash(),
        model_sha256: sha256_hex(req.model.to_json().as_bytes()),
        core_name: req.core_name.clone(),
        p: req.design.p,
        resource_mode: req.resource_mode,
        iterations: req.iterations,
        files: vec![
            ManifestFile {
                name: format!("{}.cpp", req.core_name),
                sha256: sha256_hex(core_source.as_bytes()),
            },
            ManifestFile {
                name: format!("{}_tb.cpp", req.core_name),
                sha256: sha256_hex(testbench_source.as_bytes()),
            },
        ],
        config: None,
    };
    Ok(GeneratedBundle {
        core_name: req.core_name.clone(),
        core_source,
        testbench_source,
        manifest,
    })
}

/// Pulls every `0x........u` literal out of emitted source, in order.
pub fn scan_literals(source: &str) -> Vec<u32> {
    let bytes = source.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i + 11 <= bytes.len() {
        if &bytes[i..i + 2] == b"0x" && bytes[i + 10] == b'u' {
            if let Ok(v) = u32::from_str_radix(&source[i + 2..i + 10], 16) {
                out.push(v);
                i += 11;
                continue;
            }
        }
        i += 1;
    }
    out
}
