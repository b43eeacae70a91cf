//! Key-value experiment configuration.
//!
//! One `key = value` per line, `#` starts a comment. Every key has a default;
//! unknown keys are rejected so typos fail loudly.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::OperatorPool;
use crate::training::{ChainMode, Schedule, Statistics, TrainConfig, TrainerKind, VisibleBiasUpdate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetKind {
    Bas,
    Gaussian,
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetKind::Bas => "bas",
            DatasetKind::Gaussian => "gaussian",
        })
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bas" => Ok(DatasetKind::Bas),
            "gaussian" => Ok(DatasetKind::Gaussian),
            other => Err(Error::parse("dataset", format!("unknown dataset `{other}`"))),
        }
    }
}

/// Comma-separated list value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct List<T>(pub Vec<T>);

impl<T: fmt::Display> fmt::Display for List<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(T::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

impl<T: FromStr> FromStr for List<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| p.parse().map_err(|_| Error::parse("list", format!("bad element `{p}`"))))
            .collect::<Result<Vec<T>>>()
            .map(List)
    }
}

/// Model family label used in configs and run ids: `rbm` or `sqrbm`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    Rbm,
    Sqrbm,
}

impl ModelKind {
    pub fn pool(self) -> OperatorPool {
        match self {
            ModelKind::Rbm => OperatorPool::classical(),
            ModelKind::Sqrbm => OperatorPool::semi_quantum(),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Rbm => "rbm",
            ModelKind::Sqrbm => "sqrbm",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rbm" => Ok(ModelKind::Rbm),
            "sqrbm" => Ok(ModelKind::Sqrbm),
            other => Err(Error::parse("model", format!("unknown model kind `{other}`"))),
        }
    }
}

macro_rules! config_struct {
    ($(#[$meta:meta])* pub struct $name:ident { $($(#[doc = $doc:literal])* $field:ident : $ty:ty = $default:expr,)+ }) => {
        $(#[$meta])*
        pub struct $name {
            $($(#[doc = $doc])* pub $field: $ty,)+
        }

        impl Default for $name {
            fn default() -> Self {
                $name { $($field: $default,)+ }
            }
        }

        impl $name {
            pub const KEYS: &'static [&'static str] = &[$(stringify!($field)),+];

            /// Set one key from its text form.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $(stringify!($field) => {
                        self.$field = value.trim().parse().map_err(|_| {
                            Error::Config(format!("bad value `{}` for key `{}`", value.trim(), key))
                        })?;
                    })+
                    _ => return Err(Error::Config(format!("unknown key `{key}`"))),
                }
                Ok(())
            }

            /// Every key with its current value, in declaration order.
            pub fn pairs(&self) -> Vec<(&'static str, String)> {
                vec![$((stringify!($field), self.$field.to_string())),+]
            }
        }
    };
}

config_struct! {
    #[derive(Debug, Clone, PartialEq)]
    pub struct ExperimentConfig {
        /// Label only; the CLI verb decides what runs.
        experiment: String = "train".into(),
        dataset: DatasetKind = DatasetKind::Bas,
        bas_rows: usize = 3,
        bas_cols: usize = 3,
        gauss_bins: usize = 512,
        gauss_mu: f64 = 255.5,
        gauss_sigma: f64 = 32.0,
        gauss_draws: usize = 10_000,
        data_seed: u64 = 0,
        /// Bitstrings seen fewer times than this are dropped from the training data.
        min_count: u64 = 1,
        model: ModelKind = ModelKind::Sqrbm,
        hidden: usize = 1,
        models: List<ModelKind> = List(vec![ModelKind::Rbm, ModelKind::Sqrbm]),
        hidden_sizes: List<usize> = List(vec![1, 2, 3, 4, 5]),
        seeds: usize = 10,
        shots_list: List<u64> = List(vec![1, 10, 100, 1000, 10_000]),
        /// Initial couplings have variance `init_variance / (n + m)`.
        init_variance: f64 = 10.0,
        beta: f64 = 1.0,
        iterations: usize = 5000,
        eta0: f64 = 0.01,
        eta_final: f64 = 1e-3,
        eta_min: f64 = 0.0,
        adam_beta1: f64 = 0.9,
        adam_beta2: f64 = 0.99,
        adam_eps: f64 = 1e-8,
        clamp: f64 = 0.05,
        k: usize = 10,
        chains: usize = 10,
        batch_size: usize = 0,
        trainer: TrainerKind = TrainerKind::Cd,
        shots: u64 = 1,
        statistics: Statistics = Statistics::Spin,
        visible_bias_update: VisibleBiasUpdate = VisibleBiasUpdate::Sum,
        chain_mode: ChainMode = ChainMode::Persistent,
        seed: u64 = 0,
        eval_every: usize = 50,
        checkpoint_every: usize = 0,
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse("config", format!("line {}: expected key = value", lineno + 1)))?;
            config.set(key.trim(), value)?;
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Apply `key=value` overrides.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for item in overrides {
            let item = item.as_ref();
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        self.pairs().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        self.pairs().into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            iterations: self.iterations,
            schedule: Schedule::new(self.eta0, self.eta_final, self.eta_min, self.iterations),
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            adam_eps: self.adam_eps,
            clamp: self.clamp,
            k: self.k,
            chains: self.chains,
            batch_size: self.batch_size,
            trainer: self.trainer,
            shots: self.shots,
            statistics: self.statistics,
            visible_bias_update: self.visible_bias_update,
            chain_mode: self.chain_mode,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be ≥ 1".into()));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) || !(self.init_variance >= 0.0) {
            return Err(Error::Config("beta must be positive and init_variance nonnegative".into()));
        }
        if self.hidden == 0 || self.hidden_sizes.0.contains(&0) {
            return Err(Error::Config("hidden sizes must be ≥ 1".into()));
        }
        if self.seeds == 0 || self.models.0.is_empty() || self.shots_list.0.contains(&0) {
            return Err(Error::Config("need ≥ 1 seed, ≥ 1 model kind, and positive shot counts".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_round_trip() {
        let text = "# comment\ndataset = gaussian\nhidden_sizes = 1, 3\nshots_list=1,10\nstatistics = bit # inline\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.dataset, DatasetKind::Gaussian);
        assert_eq!(c.hidden_sizes.0, vec![1, 3]);
        assert_eq!(c.statistics, Statistics::Bit);
        assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
        assert_eq!(c.pairs().len(), ExperimentConfig::KEYS.len());
    }

    #[test]
    fn unknown_keys_and_bad_values_fail() {
        assert!(ExperimentConfig::parse("itterations = 5").is_err());
        assert!(ExperimentConfig::parse("iterations = five").is_err());
        assert!(ExperimentConfig::parse("iterations").is_err());
        let mut c = ExperimentConfig::default();
        assert!(c.apply_overrides(&["k=3"]).is_ok());
        assert_eq!(c.k, 3);
        assert!(c.apply_overrides(&["nope=1"]).is_err());
    }

    #[test]
    fn defaults_validate() {
        assert!(ExperimentConfig::default().validate().is_ok());
        let mut c = ExperimentConfig::default();
        c.eval_every = 0;
        assert!(c.validate().is_err());
    }
}
