//! Project configuration: one JSON document driving every pipeline stage.
//!
//! Every field has a default, so `{}` is a complete config. Unknown keys are
//! rejected. Relative paths under `paths` resolve against `paths.out_dir`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ann::{Activation, Arch, TrainConfig};
use crate::chaos::{ChaoticSystem, VectorField};
use crate::codegen::is_identifier;
use crate::dse::{DspMode, Selection};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub name: String,
    /// Overrides of the system's default parameters.
    pub params: BTreeMap<String, f64>,
    pub x0: Vec<f64>,
    pub dt: f64,
    pub steps: usize,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self {
            name: "chen".into(),
            params: BTreeMap::new(),
            x0: vec![1.0; 3],
            dt: 1e-3,
            steps: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub split_ratio: f64,
    pub normalize: bool,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            split_ratio: 0.8,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub hidden: usize,
    pub activation: Activation,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub target_loss: Option<f64>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            hidden: 8,
            activation: Activation::Relu,
            learning_rate: t.learning_rate,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
            epochs: t.epochs,
            batch_size: t.batch_size,
            seed: t.rng_seed,
            target_loss: t.target_loss,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DseSection {
    pub mode: DspMode,
    /// Coefficient file; the built-in table when absent.
    pub coefficients: Option<PathBuf>,
    pub selection: Selection,
    /// Extra hidden widths to explore alongside `train.hidden`.
    pub sweep_hidden: Vec<usize>,
}

impl Default for DseSection {
    fn default() -> Self {
        Self {
            mode: DspMode::WithDsp,
            coefficients: None,
            selection: Selection::All,
            sweep_hidden: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodegenSection {
    pub core_name: String,
    /// Fixed parallelism level; otherwise chosen by `selection`.
    pub p: Option<u32>,
    pub selection: Selection,
    /// Operator binding; follows `dse.mode` when absent.
    pub resource_mode: Option<DspMode>,
    /// Reference iterations embedded in the testbench.
    pub iterations: usize,
}

impl Default for CodegenSection {
    fn default() -> Self {
        Self {
            core_name: "chaos_osc".into(),
            p: None,
            selection: Selection::MinLatency,
            resource_mode: None,
            iterations: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub iterations: usize,
    pub bits_per_value: u32,
    /// Output dimensions feeding the bit stream; all when absent.
    pub dims: Option<Vec<usize>>,
    /// Seed in system coordinates; `system.x0` when absent.
    pub seed: Option<Vec<f64>>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            bits_per_value: 8,
            dims: None,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandtestSection {
    pub block_size: usize,
}

impl Default for RandtestSection {
    fn default() -> Self {
        Self { block_size: 128 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub out_dir: PathBuf,
    pub dataset: PathBuf,
    pub model: PathBuf,
    pub sequence: PathBuf,
    pub bits: PathBuf,
    pub codegen_dir: PathBuf,
}

impl Default for PathsSection {
    fn default() -> Self {
        Self {
            out_dir: "out".into(),
            dataset: "dataset.bin".into(),
            model: "model.json".into(),
            sequence: "sequence.csv".into(),
            bits: "bits.bin".into(),
            codegen_dir: "hls".into(),
        }
    }
}

impl PathsSection {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.out_dir.join(p)
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectConfig {
    pub system: SystemSection,
    pub dataset: DatasetSection,
    pub train: TrainSection,
    pub dse: DseSection,
    pub codegen: CodegenSection,
    pub run: RunSection,
    pub randtest: RandtestSection,
    pub paths: PathsSection,
}

impl ProjectConfig {
    /// Parses and validates.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn system(&self) -> Result<ChaoticSystem, ConfigError> {
        ChaoticSystem::by_name(
            &self.system.name,
            self.system.params.iter().map(|(k, v)| (k.as_str(), *v)),
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn arch(&self) -> Result<Arch, ConfigError> {
        let n = self.system()?.dimension();
        Ok(Arch::new(n, self.train.hidden, n))
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            learning_rate: t.learning_rate,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
            epochs: t.epochs,
            batch_size: t.batch_size,
            rng_seed: t.seed,
            target_loss: t.target_loss,
        }
    }

    pub fn resource_mode(&self) -> DspMode {
        self.codegen.resource_mode.unwrap_or(self.dse.mode)
    }

    /// Hidden widths explored by the design-space sweep, deduplicated.
    pub fn explore_widths(&self) -> Vec<usize> {
        let mut hs = vec![self.train.hidden];
        hs.extend(&self.dse.sweep_hidden);
        hs.sort_unstable();
        hs.dedup();
        hs
    }

    /// Checks everything that can be checked without touching the file
    /// system.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let sys = self.system()?;
        let n = sys.dimension();
        let s = &self.system;
        if s.x0.len() != n {
            return invalid(format!(
                "system.x0 has {} values, {} expects {n}",
                s.x0.len(),
                s.name
            ));
        }
        if s.x0.iter().any(|v| !v.is_finite()) {
            return invalid("system.x0 must be finite");
        }
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return invalid("system.dt must be positive");
        }
        if s.steps < 2 {
            return invalid("system.steps must be at least 2");
        }
        let r = self.dataset.split_ratio;
        if !(r > 0.0 && r < 1.0) {
            return invalid("dataset.split_ratio must lie in (0, 1)");
        }
        if self.train.hidden == 0 {
            return invalid("train.hidden must be positive");
        }
        self.train_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("train: {e}")))?;
        if self.dse.sweep_hidden.contains(&0) {
            return invalid("dse.sweep_hidden entries must be positive");
        }
        if !is_identifier(&self.codegen.core_name) {
            return invalid(format!(
                "codegen.core_name `{}` is not a C++ identifier",
                self.codegen.core_name
            ));
        }
        if self.codegen.p.is_none()
            && !matches!(
                self.codegen.selection,
                Selection::MinLatency | Selection::MinCost
            )
        {
            return invalid(
                "codegen.selection must be min_latency or min_cost when codegen.p is unset",
            );
        }
        if self.codegen.iterations == 0 {
            return invalid("codegen.iterations must be positive");
        }
        let run = &self.run;
        if run.iterations == 0 {
            return invalid("run.iterations must be positive");
        }
        if !(1..=23).contains(&run.bits_per_value) {
            return invalid("run.bits_per_value must lie in 1..=23");
        }
        if let Some(dims) = &run.dims {
            if dims.is_empty() || dims.iter().any(|&d| d >= n) {
                return invalid(format!("run.dims must be non-empty indices below {n}"));
            }
        }
        if let Some(seed) = &run.seed {
            if seed.len() != n || seed.iter().any(|v| !v.is_finite()) {
                return invalid(format!("run.seed must hold {n} finite values"));
            }
        }
        if self.randtest.block_size < 20 {
            return invalid("randtest.block_size must be at least 20");
        }
        Ok(())
    }

    /// Extra checks for design-space exploration and code generation.
    pub fn validate_for_dse(&self) -> Result<(), ConfigError> {
        self.validate()?;
        for h in self.explore_widths() {
            if !h.is_power_of_two() {
                return invalid(format!("hidden width {h} is not a power of two"));
            }
        }
        if let Some(p) = self.codegen.p {
            let max = self.train.hidden.ilog2();
            if p > max {
                return invalid(format!("codegen.p={p} exceeds log2(hidden)={max}"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default() {
        let cfg = ProjectConfig::from_json("{}").unwrap();
        assert_eq!(cfg, ProjectConfig::default());
        assert_eq!(cfg.system.steps, 100_000);
        assert_eq!(cfg.arch().unwrap(), Arch::new(3, 8, 3));
        cfg.validate_for_dse().unwrap();
    }

    #[test]
    fn round_trips_through_json() {
        let mut cfg = ProjectConfig::default();
        cfg.system.params.insert("a".into(), 36.0);
        cfg.run.dims = Some(vec![0, 2]);
        let back = ProjectConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let cfg = ProjectConfig::from_json(r#"{"train": {"hidden": 16}, "system": {"steps": 10}}"#)
            .unwrap();
        assert_eq!(cfg.train.hidden, 16);
        assert_eq!(cfg.train.epochs, 200);
        assert_eq!(cfg.system.dt, 1e-3);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            r#"{"system": {"name": "duffing"}}"#,
            r#"{"system": {"params": {"q": 1.0}}}"#,
            r#"{"system": {"x0": [1.0, 2.0]}}"#,
            r#"{"system": {"dt": 0.0}}"#,
            r#"{"dataset": {"split_ratio": 1.0}}"#,
            r#"{"train": {"hidden": 0}}"#,
            r#"{"train": {"learning_rate": -1.0}}"#,
            r#"{"codegen": {"core_name": "9x"}}"#,
            r#"{"codegen": {"selection": "pareto"}}"#,
            r#"{"run": {"bits_per_value": 24}}"#,
            r#"{"run": {"dims": [3]}}"#,
            r#"{"randtest": {"block_size": 10}}"#,
        ];
        for text in bad {
            assert!(
                matches!(ProjectConfig::from_json(text), Err(ConfigError::Invalid(_))),
                "{text}"
            );
        }
        assert!(matches!(
            ProjectConfig::from_json(r#"{"sytem": {}}"#),
            Err(ConfigError::Json(_))
        ));
        assert!(matches!(
            ProjectConfig::from_json(r#"{"train": {"activation": "gelu"}}"#),
            Err(ConfigError::Json(_))
        ));
    }

    #[test]
    fn dse_requires_power_of_two_widths() {
        let cfg = ProjectConfig::from_json(r#"{"train": {"hidden": 6}}"#).unwrap();
        assert!(cfg.validate_for_dse().is_err());
        let cfg = ProjectConfig::from_json(r#"{"dse": {"sweep_hidden": [4, 12]}}"#).unwrap();
        assert!(cfg.validate_for_dse().is_err());
        let cfg = ProjectConfig::from_json(r#"{"codegen": {"p": 4}}"#).unwrap();
        assert!(cfg.validate_for_dse().is_err());
    }

    #[test]
    fn paths_resolve_against_out_dir() {
        let p = PathsSection {
            out_dir: "/tmp/run".into(),
            ..Default::default()
        };
        assert_eq!(p.resolve(&p.model), PathBuf::from("/tmp/run/model.json"));
        assert_eq!(
            p.resolve(Path::new("/abs/m.json")),
            PathBuf::from("/abs/m.json")
        );
    }

    #[test]
    fn resource_mode_follows_dse_mode() {
        let cfg = ProjectConfig::from_json(r#"{"dse": {"mode": "no_dsp"}}"#).unwrap();
        assert_eq!(cfg.resource_mode(), DspMode::NoDsp);
        let cfg = ProjectConfig::from_json(
            r#"{"dse": {"mode": "no_dsp"}, "codegen": {"resource_mode": "with_dsp"}}"#,
        )
        .unwrap();
        assert_eq!(cfg.resource_mode(), DspMode::WithDsp);
    }
}
