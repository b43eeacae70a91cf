use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    adam_step, generalized_cd_update, nll_shot_update, AdamState, CdOptions, ChainSet, TrainConfig, TrainerKind,
};
use crate::error::{Error, Result};
use crate::model::{write_checkpoint, BitString, ModelParams, VisibleDistribution};
use crate::sampling::RngStream;

const BATCH_STREAM: u64 = 1;
const SHOT_STREAM: u64 = 2;
const CHAIN_START_STREAM: u64 = 3;

/// What one optimizer step cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub iteration: usize,
    pub quantum: u64,
    pub classical: u64,
    pub learning_rate: f64,
}

#[derive(Serialize)]
struct OptimizerSidecar<'a> {
    iteration: usize,
    adam: &'a AdamState,
}

/// Owns the model, optimizer and chains of one run and advances them one
/// iteration at a time.
pub struct Trainer {
    params: ModelParams,
    config: TrainConfig,
    samples: Vec<BitString>,
    target: VisibleDistribution,
    adam: AdamState,
    chains: Option<ChainSet>,
    batch_rng: RngStream,
    shot_rng: RngStream,
    iteration: usize,
}

impl Trainer {
    /// `samples` feed the CD positive phase; `target` is the distribution
    /// whose likelihood the shot-based trainer follows.
    pub fn new(
        params: ModelParams,
        config: TrainConfig,
        samples: Vec<BitString>,
        target: VisibleDistribution,
    ) -> Result<Self> {
        config.validate()?;
        if samples.is_empty() {
            return Err(Error::Contract("training needs at least one sample".into()));
        }
        for v in &samples {
            params.check_visible(v)?;
        }
        if target.n() != params.n() {
            return Err(Error::Dimension(format!("target over n={}, model n={}", target.n(), params.n())));
        }
        let chains = match config.trainer {
            TrainerKind::Cd => {
                let mut rng = RngStream::new(config.seed, CHAIN_START_STREAM);
                let starts: Vec<BitString> =
                    (0..config.chains).map(|_| samples[rng.random_range(0..samples.len())]).collect();
                Some(ChainSet::from_data(&params, &starts, config.chains, config.seed)?)
            }
            TrainerKind::Nll => None,
        };
        Ok(Trainer {
            adam: AdamState::new(params.num_params()),
            batch_rng: RngStream::new(config.seed, BATCH_STREAM),
            shot_rng: RngStream::new(config.seed, SHOT_STREAM),
            params,
            config,
            samples,
            target,
            chains,
            iteration: 0,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn is_done(&self) -> bool {
        self.iteration >= self.config.iterations
    }

    pub fn optimizer(&self) -> &AdamState {
        &self.adam
    }

    /// Samples spent on chain initialization before the first step.
    pub fn setup_classical(&self) -> u64 {
        self.chains.as_ref().map_or(0, |c| c.chains().len() as u64)
    }

    fn batch(&mut self) -> Vec<BitString> {
        let size = self.config.batch_size;
        if size == 0 || size >= self.samples.len() {
            return self.samples.clone();
        }
        (0..size)
            .map(|_| self.samples[self.batch_rng.random_range(0..self.samples.len())])
            .collect()
    }

    pub fn step(&mut self) -> Result<StepReport> {
        if self.is_done() {
            return Err(Error::Contract(format!("run already finished {} iterations", self.iteration)));
        }
        let estimate = match self.config.trainer {
            TrainerKind::Cd => {
                let batch = self.batch();
                let options = CdOptions {
                    k: self.config.k,
                    statistics: self.config.statistics,
                    visible_bias_update: self.config.visible_bias_update,
                    chain_mode: self.config.chain_mode,
                };
                let chains = self.chains.as_mut().expect("CD trainer owns chains");
                generalized_cd_update(&self.params, &batch, chains, &mut self.batch_rng, &options)?
            }
            TrainerKind::Nll => nll_shot_update(&self.params, &self.target, self.config.shots, &mut self.shot_rng)?,
        };
        let t = self.iteration + 1;
        let learning_rate = adam_step(&mut self.params, &mut self.adam, &estimate, t, &self.config)?;
        self.iteration = t;
        Ok(StepReport {
            iteration: t,
            quantum: estimate.samples_consumed,
            classical: estimate.classical_consumed,
            learning_rate,
        })
    }

    /// Model checkpoint plus an optimizer-state sidecar next to it.
    pub fn save_checkpoint(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_checkpoint(&self.params, &dir.join("model.txt"))?;
        let sidecar = OptimizerSidecar { iteration: self.iteration, adam: &self.adam };
        let path = dir.join("optimizer.json");
        let text = serde_json::to_string(&sidecar).map_err(|e| Error::parse("optimizer state", e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}
