//! Parameter updates: generalized contrastive divergence, finite-shot
//! likelihood gradients, and the ADAM optimizer.

mod adam;
mod cd;
mod nll;
mod trainer;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

pub use adam::{adam_step, AdamState, Schedule};
pub use cd::{classical_cd_update, contrast, generalized_cd_update, Chain, ChainSet, CdOptions};
pub use nll::{nll_shot_update, nll_samples_per_iteration};
pub use trainer::{StepReport, Trainer};

/// Which sufficient statistics enter the contrastive-divergence differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Statistics {
    /// Spin values `(−1)^bit`: the difference is the likelihood gradient
    /// direction for the Hamiltonian's sign convention.
    Spin,
    /// Raw bits, exactly as the textbook update is written.
    Bit,
}

impl Statistics {
    #[inline]
    pub fn of(self, bit: u64) -> f64 {
        match self {
            Statistics::Spin => 1.0 - 2.0 * bit as f64,
            Statistics::Bit => bit as f64,
        }
    }
}

/// How the visible-bias difference is combined across hidden bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VisibleBiasUpdate {
    /// One contribution per basis pass.
    Sum,
    /// Sum divided by the pool size.
    Mean,
}

/// Whether negative-phase chains carry over between iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChainMode {
    Persistent,
    /// Restart every chain from a data sample each iteration.
    Reset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainerKind {
    Cd,
    Nll,
}

macro_rules! text_enum {
    ($ty:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $text),+ })
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($text => Ok($ty::$variant),)+
                    other => Err(Error::parse(stringify!($ty), format!("unknown value `{other}`"))),
                }
            }
        }
    };
}

text_enum!(Statistics { Spin => "spin", Bit => "bit" });
text_enum!(VisibleBiasUpdate { Sum => "sum", Mean => "mean" });
text_enum!(ChainMode { Persistent => "persistent", Reset => "reset" });
text_enum!(TrainerKind { Cd => "cd", Nll => "nll" });

/// Everything one training run needs besides the model and the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: usize,
    pub schedule: Schedule,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub clamp: f64,
    pub k: usize,
    pub chains: usize,
    /// Positive-phase batch; 0 means every data sample.
    pub batch_size: usize,
    pub trainer: TrainerKind,
    pub shots: u64,
    pub statistics: Statistics,
    pub visible_bias_update: VisibleBiasUpdate,
    pub chain_mode: ChainMode,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 5000,
            schedule: Schedule::new(0.01, 1e-3, 0.0, 5000),
            adam_beta1: 0.9,
            adam_beta2: 0.99,
            adam_eps: 1e-8,
            clamp: 0.05,
            k: 10,
            chains: 10,
            batch_size: 0,
            trainer: TrainerKind::Cd,
            shots: 1,
            statistics: Statistics::Spin,
            visible_bias_update: VisibleBiasUpdate::Sum,
            chain_mode: ChainMode::Persistent,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.iterations == 0 {
            return bad("iterations must be ≥ 1".into());
        }
        if self.schedule.iterations != self.iterations {
            return bad("schedule length must equal iterations".into());
        }
        let s = &self.schedule;
        if !(s.eta0 >= s.eta_final && s.eta_final > 0.0 && s.eta_min >= 0.0) {
            return bad(format!("need eta0 ≥ eta_final > 0, got {} and {}", s.eta0, s.eta_final));
        }
        if !(self.clamp > 0.0) {
            return bad(format!("clamp must be positive, got {}", self.clamp));
        }
        if self.k == 0 || self.chains == 0 {
            return bad("k and chains must be ≥ 1".into());
        }
        if self.trainer == TrainerKind::Nll && self.shots == 0 {
            return bad("shots must be ≥ 1".into());
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || !(self.adam_eps > 0.0) {
            return bad("invalid ADAM constants".into());
        }
        Ok(())
    }
}

/// A gradient estimate in the parameter layout of [`ModelParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimate {
    pub da: Vec<f64>,
    pub db: Vec<f64>,
    pub dw: Vec<f64>,
    /// Quantum samples spent producing this estimate.
    pub samples_consumed: u64,
    /// Classical hidden-layer draws spent producing this estimate.
    pub classical_consumed: u64,
}

impl GradientEstimate {
    pub fn zeros(params: &ModelParams) -> Self {
        GradientEstimate {
            da: vec![0.0; params.n()],
            db: vec![0.0; params.hidden_bias().len()],
            dw: vec![0.0; params.couplings().len()],
            samples_consumed: 0,
            classical_consumed: 0,
        }
    }

    pub fn from_flat(params: &ModelParams, flat: &[f64], samples_consumed: u64) -> Result<Self> {
        let mut g = Self::zeros(params);
        if flat.len() != params.num_params() {
            return Err(Error::Dimension(format!(
                "flat gradient of length {} for {} parameters",
                flat.len(),
                params.num_params()
            )));
        }
        let (a, rest) = flat.split_at(g.da.len());
        let (b, w) = rest.split_at(g.db.len());
        g.da.copy_from_slice(a);
        g.db.copy_from_slice(b);
        g.dw.copy_from_slice(w);
        g.samples_consumed = samples_consumed;
        Ok(g)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.da.len() + self.db.len() + self.dw.len());
        out.extend_from_slice(&self.da);
        out.extend_from_slice(&self.db);
        out.extend_from_slice(&self.dw);
        out
    }

    pub fn check_shape(&self, params: &ModelParams) -> Result<()> {
        if self.da.len() != params.n()
            || self.db.len() != params.hidden_bias().len()
            || self.dw.len() != params.couplings().len()
        {
            return Err(Error::Dimension("gradient shape does not match the model".into()));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.da.iter().chain(&self.db).chain(&self.dw).all(|x| x.is_finite())
    }
}
