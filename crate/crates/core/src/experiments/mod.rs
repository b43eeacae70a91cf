//! Metrics, sample accounting and the two benchmark experiments: a
//! hidden-unit sweep on bars-and-stripes and a sample-budget comparison of CD
//! against shot-based likelihood training on the discretized Gaussian.

mod config;
mod export;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{DatasetKind, ExperimentConfig, List, ModelKind};
pub use export::{
    export_partial, export_results, load_results, read_summary, read_trace, summarize, write_trace, GroupSummary, SCHEMA_VERSION,
};

use crate::datasets::{gen_bas, gen_gaussian, Dataset};
use crate::error::{Error, Result};
use crate::model::{visible_marginal, ModelParams, VisibleDistribution};
use crate::par;
use crate::sampling::RngStream;
use crate::training::{nll_samples_per_iteration, StepReport, Trainer, TrainerKind};

/// `Σ_v q(v) ln(q(v)/p(v))` with `0 ln 0 = 0`. Infinite when `q` has mass
/// where `p` has none.
pub fn kl_divergence(q: &VisibleDistribution, p: &VisibleDistribution) -> Result<f64> {
    if q.n() != p.n() {
        return Err(Error::Dimension(format!("KL between n={} and n={}", q.n(), p.n())));
    }
    let mut kl = 0.0;
    for (&qv, &pv) in q.probs().iter().zip(p.probs()) {
        if qv > 0.0 {
            if pv <= 0.0 {
                return Ok(f64::INFINITY);
            }
            kl += qv * (qv / pv).ln();
        }
    }
    // rounding can leave a tiny negative value when q ≈ p
    Ok(kl.max(0.0))
}

/// `−Σ_v q(v) ln p(v)`.
pub fn cross_entropy(q: &VisibleDistribution, p: &VisibleDistribution) -> f64 {
    -q.probs()
        .iter()
        .zip(p.probs())
        .filter(|(&qv, _)| qv > 0.0)
        .map(|(qv, pv)| qv * pv.ln())
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub iteration: usize,
    pub quantum: u64,
    pub classical: u64,
}

/// Cumulative sample counts with one entry per optimizer step.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleLedger {
    pub quantum: u64,
    pub classical: u64,
    pub log: Vec<LedgerEntry>,
}

impl SampleLedger {
    /// Samples spent before the first step (chain initialization).
    pub fn charge_setup(&mut self, classical: u64) {
        self.classical += classical;
    }

    pub fn record(&mut self, step: &StepReport) {
        self.quantum += step.quantum;
        self.classical += step.classical;
        self.log.push(LedgerEntry { iteration: step.iteration, quantum: self.quantum, classical: self.classical });
    }

    /// Quantum samples spent in each logged step.
    pub fn quantum_increments(&self) -> Vec<u64> {
        let mut prev = 0;
        self.log
            .iter()
            .map(|e| {
                let d = e.quantum - prev;
                prev = e.quantum;
                d
            })
            .collect()
    }

    pub fn is_monotone(&self) -> bool {
        self.log
            .windows(2)
            .all(|w| w[0].iteration < w[1].iteration && w[0].quantum <= w[1].quantum && w[0].classical <= w[1].classical)
    }
}

/// One evaluation row of a training trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub cumulative_quantum_samples: u64,
    pub cumulative_classical_samples: u64,
    pub kl: f64,
    pub nll: f64,
    pub learning_rate: f64,
}

/// Identity and settings of one run inside an experiment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSpec {
    pub run_id: String,
    /// Runs sharing a group are aggregated together.
    pub group: String,
    pub model: ModelKind,
    pub hidden: usize,
    pub trainer: TrainerKind,
    pub shots: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub spec: RunSpec,
    pub experiment: String,
    pub config: BTreeMap<String, String>,
    pub trace: Vec<TracePoint>,
    pub ledger: SampleLedger,
    /// Quantum samples every step must consume.
    pub expected_quantum_per_iteration: u64,
    pub final_params: ModelParams,
    pub wall_time_s: f64,
}

impl RunRecord {
    pub fn final_kl(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |p| p.kl)
    }

    pub fn total_samples(&self) -> u64 {
        self.ledger.quantum
    }

    /// Every step consumed exactly the expected number of quantum samples.
    pub fn ledger_identity_holds(&self) -> bool {
        let steps = self.config.get("iterations").and_then(|s| s.parse::<usize>().ok());
        self.ledger.is_monotone()
            && Some(self.ledger.log.len()) == steps
            && self.ledger.quantum_increments().iter().all(|&d| d == self.expected_quantum_per_iteration)
    }
}

/// Training inputs derived from a config.
#[derive(Debug, Clone)]
pub struct TrainingData {
    /// The generated dataset, before filtering.
    pub dataset: Dataset,
    /// The samples the trainers see.
    pub training: Dataset,
    /// Distribution KL is measured against.
    pub reference: VisibleDistribution,
}

pub fn make_dataset(config: &ExperimentConfig) -> Result<Dataset> {
    match config.dataset {
        DatasetKind::Bas => gen_bas(config.bas_rows, config.bas_cols),
        DatasetKind::Gaussian => gen_gaussian(
            config.gauss_bins,
            config.gauss_mu,
            config.gauss_sigma,
            config.gauss_draws,
            config.data_seed,
        ),
    }
}

pub fn prepare_data(config: &ExperimentConfig) -> Result<TrainingData> {
    let dataset = make_dataset(config)?;
    let training = if config.min_count > 1 { dataset.reliable_subset(config.min_count)? } else { dataset.clone() };
    let reference = dataset.reference().clone();
    Ok(TrainingData { dataset, training, reference })
}

/// Random couplings with variance `init_variance/(n+m)`, zero hidden biases,
/// visible biases matching the data's single-bit means.
pub fn initial_params(
    config: &ExperimentConfig,
    model: ModelKind,
    hidden: usize,
    seed: u64,
    data: &VisibleDistribution,
) -> Result<ModelParams> {
    let n = data.n();
    let std = (config.init_variance / (n + hidden) as f64).sqrt();
    let mut rng = RngStream::new(seed, 0);
    let mut params = ModelParams::random_weights(n, hidden, model.pool(), std, &mut rng)?.with_beta(config.beta)?;
    params.set_visible_bias_from_means(&data.bit_means())?;
    Ok(params)
}

fn evaluate(
    params: &ModelParams,
    data: &TrainingData,
    ledger: &SampleLedger,
    iteration: usize,
    learning_rate: f64,
) -> Result<TracePoint> {
    let p = visible_marginal(params)?;
    let kl = kl_divergence(&data.reference, &p)?;
    let nll = cross_entropy(data.training.empirical(), &p);
    if !kl.is_finite() || !nll.is_finite() {
        return Err(Error::Contract(format!("non-finite metrics at iteration {iteration}")));
    }
    Ok(TracePoint {
        iteration,
        cumulative_quantum_samples: ledger.quantum,
        cumulative_classical_samples: ledger.classical,
        kl,
        nll,
        learning_rate,
    })
}

/// Train one run to completion, evaluating every `eval_every` steps and at
/// the end. Checkpoints go under `checkpoint_dir/iter-<t>/` when enabled.
pub fn run_single(
    config: &ExperimentConfig,
    spec: &RunSpec,
    data: &TrainingData,
    checkpoint_dir: Option<&Path>,
) -> Result<RunRecord> {
    let started = Instant::now();
    let mut cfg = config.clone();
    cfg.model = spec.model;
    cfg.hidden = spec.hidden;
    cfg.trainer = spec.trainer;
    cfg.shots = spec.shots;
    cfg.seed = spec.seed;
    cfg.validate()?;
    let train = cfg.train_config();
    let q = data.training.empirical().clone();
    let params = initial_params(&cfg, spec.model, spec.hidden, spec.seed, &q)?;
    let pool = params.pool().len();
    let expected = match spec.trainer {
        TrainerKind::Cd => (pool * cfg.k * cfg.chains) as u64,
        TrainerKind::Nll => nll_samples_per_iteration(pool, q.support().len(), spec.shots),
    };
    let schedule = train.schedule;
    let mut trainer = Trainer::new(params, train, data.training.samples().to_vec(), q)?;
    let mut ledger = SampleLedger::default();
    ledger.charge_setup(trainer.setup_classical());
    let mut trace = vec![evaluate(trainer.params(), data, &ledger, 0, schedule.rate(0))?];
    while !trainer.is_done() {
        let report = trainer.step()?;
        ledger.record(&report);
        let t = report.iteration;
        if t % cfg.eval_every == 0 || trainer.is_done() {
            trace.push(evaluate(trainer.params(), data, &ledger, t, report.learning_rate)?);
        }
        if let Some(dir) = checkpoint_dir {
            if cfg.checkpoint_every > 0 && t % cfg.checkpoint_every == 0 {
                trainer.save_checkpoint(&dir.join(format!("iter-{t}")))?;
            }
        }
    }
    Ok(RunRecord {
        spec: spec.clone(),
        experiment: cfg.experiment.clone(),
        config: cfg.to_map(),
        trace,
        ledger,
        expected_quantum_per_iteration: expected,
        final_params: trainer.params().clone(),
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

fn run_all(config: &ExperimentConfig, specs: &[RunSpec]) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let data = prepare_data(config)?;
    par::map(specs, |spec| run_single(config, spec, &data, None)).into_iter().collect()
}

pub fn train_spec(config: &ExperimentConfig) -> RunSpec {
    let shots = if config.trainer == TrainerKind::Nll { config.shots } else { 0 };
    RunSpec {
        run_id: format!("{}-m{}-{}-s{}", config.model, config.hidden, config.trainer, config.seed),
        group: format!("{}-m{}-{}", config.model, config.hidden, config.trainer),
        model: config.model,
        hidden: config.hidden,
        trainer: config.trainer,
        shots,
        seed: config.seed,
    }
}

/// Every (model kind, hidden size, seed) combination, trained with CD.
pub fn sweep_specs(config: &ExperimentConfig) -> Vec<RunSpec> {
    let mut specs = Vec::new();
    for &model in &config.models.0 {
        for &m in &config.hidden_sizes.0 {
            for s in 0..config.seeds as u64 {
                let seed = config.seed + s;
                specs.push(RunSpec {
                    run_id: format!("{model}-m{m}-s{seed}"),
                    group: format!("{model}-m{m}"),
                    model,
                    hidden: m,
                    trainer: TrainerKind::Cd,
                    shots: 0,
                    seed,
                });
            }
        }
    }
    specs
}

/// One CD run plus one likelihood run per shot budget, all from the same seed.
pub fn budget_specs(config: &ExperimentConfig) -> Vec<RunSpec> {
    let (model, m, seed) = (config.model, config.hidden, config.seed);
    let mut specs = vec![RunSpec {
        run_id: "cd".into(),
        group: "cd".into(),
        model,
        hidden: m,
        trainer: TrainerKind::Cd,
        shots: 0,
        seed,
    }];
    for &s in &config.shots_list.0 {
        specs.push(RunSpec {
            run_id: format!("nll-S{s}"),
            group: format!("nll-S{s}"),
            model,
            hidden: m,
            trainer: TrainerKind::Nll,
            shots: s,
            seed,
        });
    }
    specs
}

pub fn run_train(config: &ExperimentConfig, checkpoint_dir: Option<&Path>) -> Result<RunRecord> {
    config.validate()?;
    let data = prepare_data(config)?;
    run_single(config, &train_spec(config), &data, checkpoint_dir)
}

pub fn run_hidden_unit_sweep(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    run_all(config, &sweep_specs(config))
}

pub fn run_budget_comparison(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    run_all(config, &budget_specs(config))
}

/// Median of a non-empty slice (mean of the middle pair for even length).
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Sample standard deviation (`n − 1` denominator); 0 for a single value.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kl_examples() {
        let q = VisibleDistribution::new(1, vec![1.0, 0.0]).unwrap();
        let p = VisibleDistribution::uniform(1).unwrap();
        assert!((kl_divergence(&q, &p).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let r = VisibleDistribution::new(3, vec![0.1, 0.2, 0.0, 0.3, 0.1, 0.1, 0.1, 0.1]).unwrap();
        let u = VisibleDistribution::uniform(3).unwrap();
        assert!((kl_divergence(&r, &u).unwrap() - (3.0 * 2f64.ln() - r.entropy())).abs() < 1e-12);
        assert_eq!(kl_divergence(&p, &q).unwrap(), f64::INFINITY);
    }

    #[test]
    fn stats_helpers() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!((std_dev(&[1.0, 2.0, 3.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn visible_bias_init_matches_data_means() {
        let config = ExperimentConfig { init_variance: 0.0, ..ExperimentConfig::default() };
        let data = prepare_data(&config).unwrap();
        let q = data.training.empirical();
        let params = initial_params(&config, ModelKind::Sqrbm, 2, 0, q).unwrap();
        let p = visible_marginal(&params).unwrap();
        for (a, b) in p.bit_means().iter().zip(q.bit_means()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn gaussian_reliable_support_near_reference() {
        let config = ExperimentConfig { dataset: DatasetKind::Gaussian, min_count: 2, ..ExperimentConfig::default() };
        let data = prepare_data(&config).unwrap();
        let support = data.training.empirical().support().len();
        assert!((176..=206).contains(&support), "support {support}");
    }

    #[test]
    fn short_run_records_trace_and_ledger() {
        let config = ExperimentConfig {
            iterations: 7,
            eval_every: 3,
            hidden: 1,
            chains: 2,
            k: 2,
            ..ExperimentConfig::default()
        };
        let record = run_train(&config, None).unwrap();
        let its: Vec<usize> = record.trace.iter().map(|p| p.iteration).collect();
        assert_eq!(its, vec![0, 3, 6, 7]);
        assert_eq!(record.expected_quantum_per_iteration, 3 * 2 * 2);
        assert!(record.ledger_identity_holds());
        assert!(record.trace.iter().all(|p| p.kl >= 0.0 && p.kl.is_finite()));
    }

    #[test]
    fn spec_lists() {
        let c = ExperimentConfig::default();
        assert_eq!(sweep_specs(&c).len(), 2 * 5 * 10);
        let b = budget_specs(&c);
        assert_eq!(b.len(), 6);
        assert_eq!(b[5].shots, 10_000);
    }
}
