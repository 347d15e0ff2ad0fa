//! Single-hidden-layer feedforward network `y = W2 φ(W1 x + b1) + b2`.
//!
//! Inference runs in single precision with a fixed accumulation order so the
//! generated hardware core can reproduce it bit for bit: every neuron starts
//! from `0.0`, adds `w[j] * x[j]` for ascending `j`, then adds its bias.
//! Training runs in double precision (see [`train`]).

mod io;
mod metrics;
pub mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chaos::OpCount;
use crate::integrator::NormStats;

pub use io::ModelFileError;
pub use metrics::{evaluate, Metrics};
pub use train::{train, Adam, TrainConfig, Trained};

#[derive(Debug, Error, PartialEq)]
pub enum AnnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged { epoch: usize, loss: f64 },
    #[error("targets have zero variance")]
    ZeroVariance,
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("invalid training configuration: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }

    /// Single-precision form used by inference and mirrored by codegen.
    #[inline]
    pub fn apply_f32(self, v: f32) -> f32 {
        match self {
            Activation::Relu => {
                if v > 0.0 {
                    v
                } else {
                    0.0
                }
            }
            Activation::Tanh => v.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-v).exp()),
        }
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => relu(x),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative with respect to the pre-activation `x`.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => relu_prime(x),
            Activation::Tanh => tanh_prime(x),
            Activation::Sigmoid => sigmoid_prime(x),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(format!(
                "unknown activation `{other}` (expected relu, tanh or sigmoid)"
            )),
        }
    }
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Zero at the origin.
pub fn relu_prime(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn sigmoid_prime(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s)
}

pub fn tanh_prime(x: f64) -> f64 {
    let t = x.tanh();
    1.0 - t * t
}

/// Network widths `I-H-O`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Arch {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

impl Arch {
    pub const fn new(input: usize, hidden: usize, output: usize) -> Self {
        Self {
            input,
            hidden,
            output,
        }
    }

    pub fn layer_sizes(&self) -> [usize; 3] {
        [self.input, self.hidden, self.output]
    }

    pub fn param_count(&self) -> usize {
        self.hidden * (self.input + 1) + self.output * (self.hidden + 1)
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}-{}", self.input, self.hidden, self.output)
    }
}

/// A trained network. Weight matrices are row-major, one row per neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnModel {
    pub arch: Arch,
    pub w1: Vec<f32>,
    pub b1: Vec<f32>,
    pub w2: Vec<f32>,
    pub b2: Vec<f32>,
    pub activation: Activation,
    pub norm_stats: Vec<NormStats>,
    pub rng_seed: u64,
}

/// Receives one callback per arithmetic operation in a forward pass.
pub trait OpCounter {
    fn mul(&mut self);
    fn add(&mut self);
}

impl OpCounter for () {
    #[inline(always)]
    fn mul(&mut self) {}
    #[inline(always)]
    fn add(&mut self) {}
}

impl OpCounter for OpCount {
    fn mul(&mut self) {
        self.multiplications += 1;
    }
    fn add(&mut self) {
        self.additions += 1;
    }
}

#[inline(always)]
fn dense<C: OpCounter>(
    weights: &[f32],
    bias: &[f32],
    x: &[f32],
    out: &mut [f32],
    act: Option<Activation>,
    counter: &mut C,
) {
    let cols = x.len();
    for (i, (row, b)) in weights.chunks_exact(cols).zip(bias).enumerate() {
        let mut acc = 0.0f32;
        for (w, v) in row.iter().zip(x) {
            acc += w * v;
            counter.mul();
            counter.add();
        }
        acc += b;
        counter.add();
        out[i] = match act {
            Some(a) => a.apply_f32(acc),
            None => acc,
        };
    }
}

impl AnnModel {
    /// A model with every parameter zero.
    pub fn zeros(arch: Arch, activation: Activation) -> Self {
        Self {
            arch,
            w1: vec![0.0; arch.hidden * arch.input],
            b1: vec![0.0; arch.hidden],
            w2: vec![0.0; arch.output * arch.hidden],
            b2: vec![0.0; arch.output],
            activation,
            norm_stats: vec![NormStats::IDENTITY; arch.input],
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), AnnError> {
        let a = self.arch;
        if a.input == 0 || a.hidden == 0 || a.output == 0 {
            return Err(AnnError::ShapeMismatch(format!("zero-width layer in {a}")));
        }
        let shapes = [
            ("w1", self.w1.len(), a.hidden * a.input),
            ("b1", self.b1.len(), a.hidden),
            ("w2", self.w2.len(), a.output * a.hidden),
            ("b2", self.b2.len(), a.output),
            ("norm_stats", self.norm_stats.len(), a.input),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(AnnError::ShapeMismatch(format!(
                    "{name} has {got} entries, expected {want}"
                )));
            }
        }
        if self.parameters().any(|v| !v.is_finite()) {
            return Err(AnnError::ShapeMismatch("non-finite parameter".into()));
        }
        Ok(())
    }

    /// All parameters in storage order: w1, b1, w2, b2.
    pub fn parameters(&self) -> impl Iterator<Item = f32> + '_ {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(&self.b2)
            .copied()
    }

    pub fn forward(&self, x: &[f32]) -> Vec<f32> {
        let mut out = vec![0.0; self.arch.output];
        let mut hidden = vec![0.0; self.arch.hidden];
        self.forward_into(x, &mut hidden, &mut out, &mut ());
        out
    }

    /// Allocation-free forward pass; `hidden` is scratch of length H.
    pub fn forward_into<C: OpCounter>(
        &self,
        x: &[f32],
        hidden: &mut [f32],
        out: &mut [f32],
        counter: &mut C,
    ) {
        debug_assert_eq!(x.len(), self.arch.input);
        dense(
            &self.w1,
            &self.b1,
            x,
            hidden,
            Some(self.activation),
            counter,
        );
        dense(&self.w2, &self.b2, hidden, out, None, counter);
    }

    /// Forward pass that also tallies the arithmetic it performed.
    pub fn forward_counted(&self, x: &[f32]) -> (Vec<f32>, OpCount) {
        let mut out = vec![0.0; self.arch.output];
        let mut hidden = vec![0.0; self.arch.hidden];
        let mut count = OpCount::default();
        self.forward_into(x, &mut hidden, &mut out, &mut count);
        (out, count)
    }

    pub fn to_json(&self) -> String {
        io::to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self, ModelFileError> {
        io::from_json(text)
    }
}
