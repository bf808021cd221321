use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::{CompareOptions, GMap, ModelConfig};
use crate::error::{Error, Result};
use crate::filter::BudgetInput;
use crate::net::{Activation, TrainOptions};

pub const CONFIG_SCHEMA: u32 = 1;

/// Environment variable naming the directory that relative output paths live under.
pub const OUTPUT_ROOT_ENV: &str = "CNO_OUTPUT_ROOT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub budget: Option<BudgetSection>,
    #[serde(default)]
    pub problem: Option<ProblemSection>,
    #[serde(default)]
    pub model: Option<ModelSection>,
    #[serde(default)]
    pub weave_test: Option<WeaveTestSection>,
    #[serde(default)]
    pub sde: Option<SdeSection>,
    #[serde(default)]
    pub compare: Option<CompareSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSection {
    #[serde(default)]
    pub filter: Option<BudgetInput>,
    #[serde(default)]
    pub hyper: Option<HyperBudget>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperBudget {
    /// Parameters per woven filter.
    pub p: usize,
    pub q: usize,
    pub delta: f64,
    /// Number of windows.
    pub t: usize,
}

/// The recursive causal target and its sampled paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub horizon: usize,
    #[serde(default)]
    pub g: GMap,
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MemoryRule {
    Fixed(usize),
    /// `M = max(1, ⌈c_mem · ε_A^{−r}⌉)`
    Rate { c_mem: f64, r: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub eps_d: f64,
    pub eps_a: f64,
    pub q: usize,
    pub delta: f64,
    #[serde(default = "unit")]
    pub radius: f64,
    pub memory: MemoryRule,
    pub hidden: Vec<Vec<usize>>,
    #[serde(default = "prelu")]
    pub activation: Activation,
    #[serde(default)]
    pub train: TrainOptions,
    /// Window trained by `train-filter`; the last window when absent.
    #[serde(default)]
    pub window: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeaveTestSection {
    pub p: usize,
    pub t: usize,
    pub q: usize,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeSection {
    /// Mean reversion rate of `dX = −κX dt + σ dB`.
    pub kappa: f64,
    pub sigma: f64,
    pub steps: usize,
    pub dt: f64,
    pub modes: usize,
    pub n_paths: usize,
    pub steps_per_unit: usize,
    #[serde(default = "yes")]
    pub tamed: bool,
    pub mean_lo: f64,
    pub mean_hi: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub eps_a: f64,
    pub q: usize,
    pub delta: f64,
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub train: TrainOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub horizon: usize,
    #[serde(default)]
    pub g: GMap,
    /// The default ladder when absent.
    #[serde(default)]
    pub ladder: Option<Vec<ModelConfig>>,
    #[serde(default)]
    pub options: CompareOptions,
    /// Random paths replayed through the RNN form of the constructed CNOs.
    #[serde(default = "hundred")]
    pub rnn_trials: usize,
}

fn unit() -> f64 {
    1.0
}

fn prelu() -> Activation {
    Activation::Prelu
}

fn yes() -> bool {
    true
}

fn hundred() -> usize {
    100
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        if cfg.schema_version != CONFIG_SCHEMA {
            return Err(Error::Config {
                path: "schema_version".into(),
                msg: format!("unsupported version {}, expected {CONFIG_SCHEMA}", cfg.schema_version),
            });
        }
        if let Some(o) = &cfg.compare {
            if o.ladder.as_ref().is_some_and(Vec::is_empty) {
                return Err(Error::Config { path: "compare.ladder".into(), msg: "ladder is empty".into() });
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// `section` or a config error naming it.
    pub fn section<'a, T>(&'a self, name: &str, s: &'a Option<T>) -> Result<&'a T> {
        s.as_ref().ok_or_else(|| Error::Config { path: name.into(), msg: "section is required by this command".into() })
    }

    /// Output directory: the flag, then `output`, then `runs/<command>`,
    /// with relative paths placed under `$CNO_OUTPUT_ROOT` when set.
    pub fn output_dir(&self, flag: Option<&Path>, command: &str) -> PathBuf {
        let dir = flag
            .map(Path::to_path_buf)
            .or_else(|| self.output.clone())
            .unwrap_or_else(|| PathBuf::from("runs").join(command));
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if dir.is_relative() => PathBuf::from(root).join(dir),
            _ => dir,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_name_the_path() {
        let err = RunConfig::parse("schema_version = 1\n[model]\nepsd = 1.0\n", Path::new("x.toml")).unwrap_err();
        assert!(err.to_string().contains("epsd"), "{err}");
    }

    #[test]
    fn version_is_checked() {
        assert!(RunConfig::parse("schema_version = 2\n", Path::new("x.toml")).is_err());
    }

    #[test]
    fn memory_rule_forms() {
        let fixed: MemoryRule = toml::from_str::<toml::Table>("m = 3").unwrap()["m"].clone().try_into().unwrap();
        assert_eq!(fixed, MemoryRule::Fixed(3));
        let rate: MemoryRule = toml::from_str::<toml::Table>("m = { c_mem = 2.0, r = 1.0 }").unwrap()["m"].clone().try_into().unwrap();
        assert_eq!(rate, MemoryRule::Rate { c_mem: 2.0, r: 1.0 });
    }
}
