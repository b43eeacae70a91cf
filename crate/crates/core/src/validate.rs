//! Numerical self-checks: closed forms against the dense oracle, gradients
//! against finite differences, estimator bias, the classical reduction, and
//! Gibbs-chain convergence.

use std::fmt;
use std::time::Instant;

use crate::error::Result;
use crate::model::{
    hidden_conditional, logistic_hidden_conditional, visible_conditional_weights, visible_marginal, BitString,
    HiddenOutcome, ModelParams, OperatorPool, PauliBasis, VisibleDistribution,
};
use crate::oracle::{
    bayes_conditional, build_hamiltonian, channel_conditional, dense_visible_marginal, exact_nll, exact_nll_gradient,
    gibbs_state, Conditioning,
};
use crate::sampling::{ChainState, ConditionalSampler, LedgerShard, RngStream};
use crate::training::{classical_cd_update, generalized_cd_update, nll_shot_update, CdOptions, ChainSet};
use crate::par;

const SEED: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub id: &'static str,
    pub name: &'static str,
    pub passed: bool,
    /// Largest observed deviation, in the check's own metric.
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<3} {:<4} {:<34} measured={:.3e} threshold={:.1e} time={:.1}s {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.threshold,
            self.seconds,
            self.detail
        )
    }
}

fn report(
    id: &'static str,
    name: &'static str,
    measured: f64,
    threshold: f64,
    detail: String,
    started: Instant,
) -> CheckReport {
    CheckReport {
        id,
        name,
        passed: measured.is_finite() && measured <= threshold,
        measured,
        threshold,
        detail,
        seconds: started.elapsed().as_secs_f64(),
    }
}

/// Random models with `n, m ≤ 3`, alternating pools, `β ∈ {0.5, 1, 2}`.
pub fn oracle_models(count: usize) -> Result<Vec<ModelParams>> {
    (0..count)
        .map(|i| {
            let mut rng = RngStream::new(SEED, i as u64);
            let n = 1 + i % 3;
            let m = 1 + (i / 3) % 3;
            let pool = if i % 2 == 0 { OperatorPool::semi_quantum() } else { OperatorPool::classical() };
            let beta = [0.5, 1.0, 2.0][(i / 9) % 3];
            ModelParams::random_uniform(n, m, pool, 1.0, &mut rng)?.with_beta(beta)
        })
        .collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn all_visible(n: usize) -> impl Iterator<Item = BitString> {
    (0..1u64 << n).map(move |c| BitString::from_index(c, n).expect("in range"))
}

/// Imaginary-time channel against Bayes' rule on the Gibbs state, both
/// conditioning directions.
pub fn channel_equivalence(models: usize) -> Result<CheckReport> {
    let started = Instant::now();
    let set = oracle_models(models)?;
    let errors: Vec<Result<f64>> = par::map(&set, |params| {
        let mut worst: f64 = 0.0;
        for &basis in params.pool().members() {
            for v in all_visible(params.n()) {
                let given = Conditioning::Visible { v, basis };
                worst = worst.max(max_abs_diff(&channel_conditional(params, given)?, &bayes_conditional(params, given)?));
            }
            for h in all_visible(params.m()) {
                let given = Conditioning::Hidden(HiddenOutcome::new(h, basis));
                worst = worst.max(max_abs_diff(&channel_conditional(params, given)?, &bayes_conditional(params, given)?));
            }
        }
        Ok(worst)
    });
    let worst = errors.into_iter().collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    Ok(report("A1", "channel vs Bayes conditionals", worst, 1e-10, format!("models={models}"), started))
}

/// Closed-form marginal and conditionals against the dense Gibbs state.
pub fn closed_form_vs_oracle(models: usize) -> Result<CheckReport> {
    let started = Instant::now();
    let set = oracle_models(models)?;
    let errors: Vec<Result<f64>> = par::map(&set, |params| {
        let rho = gibbs_state(&build_hamiltonian(params)?, params.beta())?;
        let dense = dense_visible_marginal(&rho)?;
        let mut worst = max_abs_diff(visible_marginal(params)?.probs(), dense.probs());
        for &basis in params.pool().members() {
            for h in all_visible(params.m()) {
                let outcome = HiddenOutcome::new(h, basis);
                let w = visible_conditional_weights(params, &outcome)?;
                let total: f64 = w.iter().sum();
                let closed: Vec<f64> = w.iter().map(|x| x / total).collect();
                let oracle = bayes_conditional(params, Conditioning::Hidden(outcome))?;
                worst = worst.max(max_abs_diff(&closed, &oracle));
            }
            for v in all_visible(params.n()) {
                let rows = hidden_conditional(params, &v, basis)?;
                let closed: Vec<f64> = (0..1usize << params.m())
                    .map(|h| (0..params.m()).map(|j| rows[j][(h >> j) & 1]).product())
                    .collect();
                let oracle = bayes_conditional(params, Conditioning::Visible { v, basis })?;
                worst = worst.max(max_abs_diff(&closed, &oracle));
            }
        }
        Ok(worst)
    });
    let worst = errors.into_iter().collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    Ok(report("A2", "closed forms vs dense oracle", worst, 1e-10, format!("models={models}"), started))
}

fn random_target(n: usize, rng: &mut RngStream) -> Result<VisibleDistribution> {
    use rand::Rng;
    let weights: Vec<f64> = (0..1usize << n)
        .map(|_| if rng.random_bool(0.25) { 0.0 } else { rng.random::<f64>() + 0.05 })
        .collect();
    if weights.iter().all(|&w| w == 0.0) {
        return VisibleDistribution::uniform(n);
    }
    VisibleDistribution::from_weights(n, weights)
}

/// Dense likelihood gradient against central finite differences.
pub fn gradient_check(models: usize) -> Result<CheckReport> {
    let started = Instant::now();
    let step = 1e-5;
    let errors: Vec<Result<f64>> = par::map_range(models, |i| {
        let mut rng = RngStream::new(SEED + 1, i as u64);
        let n = 1 + i % 3;
        let m = 1 + (i / 3) % (5 - n).min(3);
        let pool = if i % 2 == 0 { OperatorPool::semi_quantum() } else { OperatorPool::classical() };
        let params = ModelParams::random_uniform(n, m, pool, 0.8, &mut rng)?;
        let q = random_target(n, &mut rng)?;
        let grad = exact_nll_gradient(&params, &q)?;
        let theta = params.to_flat();
        let mut worst: f64 = 0.0;
        for k in 0..theta.len() {
            let mut shifted = params.clone();
            let mut t = theta.clone();
            t[k] = theta[k] + step;
            shifted.set_flat(&t)?;
            let up = exact_nll(&shifted, &q)?;
            t[k] = theta[k] - step;
            shifted.set_flat(&t)?;
            let down = exact_nll(&shifted, &q)?;
            worst = worst.max(((up - down) / (2.0 * step) - grad[k]).abs());
        }
        Ok(worst)
    });
    let worst = errors.into_iter().collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    Ok(report("A3", "likelihood gradient vs finite diff", worst, 1e-6, format!("models={models}"), started))
}

/// Mean of single-shot gradient estimates against the exact gradient, in
/// units of the standard error. Passes when every component is within 3.
pub fn shot_estimator_bias(estimates: usize) -> Result<CheckReport> {
    let started = Instant::now();
    let mut rng = RngStream::new(SEED + 2, 0);
    let params = ModelParams::random_uniform(2, 1, OperatorPool::semi_quantum(), 1.0, &mut rng)?;
    let q = VisibleDistribution::new(2, vec![0.4, 0.1, 0.2, 0.3])?;
    let exact = exact_nll_gradient(&params, &q)?;
    let dim = exact.len();
    let mut sum = vec![0.0; dim];
    let mut sum_sq = vec![0.0; dim];
    let mut shots = RngStream::new(SEED + 2, 1);
    for _ in 0..estimates {
        let g = nll_shot_update(&params, &q, 1, &mut shots)?.to_flat();
        for k in 0..dim {
            sum[k] += g[k];
            sum_sq[k] += g[k] * g[k];
        }
    }
    let count = estimates as f64;
    let mut worst: f64 = 0.0;
    for k in 0..dim {
        let mean = sum[k] / count;
        let var = (sum_sq[k] / count - mean * mean).max(0.0) * count / (count - 1.0);
        let se = (var / count).sqrt();
        let z = if se > 0.0 { (mean - exact[k]).abs() / se } else if (mean - exact[k]).abs() < 1e-12 { 0.0 } else { f64::INFINITY };
        worst = worst.max(z);
    }
    Ok(report("A4", "single-shot estimator bias (z)", worst, 3.0, format!("estimates={estimates}"), started))
}

/// Pool-{Z} hidden conditionals against the logistic form, and classical CD
/// against generalized CD on shared random streams.
pub fn classical_reduction(models: usize) -> Result<CheckReport> {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    let mut identical = true;
    for i in 0..models {
        let mut rng = RngStream::new(SEED + 3, i as u64);
        let n = 1 + i % 4;
        let m = 1 + (i / 4) % 3;
        let params = ModelParams::random_uniform(n, m, OperatorPool::classical(), 2.0, &mut rng)?.with_beta([0.5, 1.0, 2.0][i % 3])?;
        for v in all_visible(n) {
            let rows = hidden_conditional(&params, &v, PauliBasis::Z)?;
            let logistic = logistic_hidden_conditional(&params, &v)?;
            for (row, p1) in rows.iter().zip(&logistic) {
                worst = worst.max((row[1] - p1).abs());
            }
        }
        let batch: Vec<BitString> = all_visible(n).take(3).collect();
        let options = CdOptions { k: 2, ..CdOptions::default() };
        let mut c1 = ChainSet::from_data(&params, &batch, 3, i as u64)?;
        let mut c2 = c1.clone();
        let mut r1 = RngStream::new(SEED + 3, 1000 + i as u64);
        let mut r2 = r1.clone();
        for _ in 0..3 {
            let a = generalized_cd_update(&params, &batch, &mut c1, &mut r1, &options)?;
            let b = classical_cd_update(&params, &batch, &mut c2, &mut r2, &options)?;
            identical &= a.to_flat().iter().zip(b.to_flat()).all(|(x, y)| x.to_bits() == y.to_bits());
        }
    }
    let measured = if identical { worst } else { f64::INFINITY };
    let detail = format!("models={models} cd_bit_identical={identical}");
    Ok(report("A5", "classical reduction", measured, 1e-12, detail, started))
}

/// Total-variation distance between the visible state of `chains` Gibbs
/// chains after `k` steps and the exact marginal, worst over a model set.
pub fn chain_convergence(chains: usize, k: usize) -> Result<CheckReport> {
    let started = Instant::now();
    let shapes = [(2, 1), (2, 3), (3, 1), (3, 2), (3, 3)];
    let mut cases = Vec::new();
    for (idx, &(n, m)) in shapes.iter().enumerate() {
        for pool in [OperatorPool::classical(), OperatorPool::semi_quantum()] {
            cases.push((idx, n, m, pool));
        }
    }
    let results: Vec<Result<f64>> = par::map(&cases, |(idx, n, m, pool)| {
        let stream = (*idx as u64) * 2 + u64::from(!pool.is_classical());
        let mut rng = RngStream::new(SEED + 4, stream);
        let params = ModelParams::random_uniform(*n, *m, pool.clone(), 1.0, &mut rng)?;
        let exact = visible_marginal(&params)?;
        let sampler = ConditionalSampler::new(&params)?;
        let basis = *pool.members().last().expect("non-empty pool");
        let mut counts = vec![0.0; 1 << n];
        let mut ledger = LedgerShard::default();
        for _ in 0..chains {
            let mut state = ChainState::new(BitString::zeros(*n), HiddenOutcome::new(BitString::zeros(*m), basis));
            sampler.run_chain(&mut state, k, &mut rng, &mut ledger)?;
            counts[state.v.index() as usize] += 1.0;
        }
        let empirical = VisibleDistribution::from_weights(*n, counts)?;
        let tv = 0.5 * max_abs_sum(empirical.probs(), exact.probs());
        Ok(tv)
    });
    let worst = results.into_iter().collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    let detail = format!("models={} chains={chains} k={k}", cases.len());
    Ok(report("A8", "Gibbs chain marginal (TV)", worst, 0.02, detail, started))
}

fn max_abs_sum(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// The full validation suite at its standard sizes.
pub fn run_all() -> Result<Vec<CheckReport>> {
    Ok(vec![
        channel_equivalence(108)?,
        closed_form_vs_oracle(108)?,
        gradient_check(60)?,
        shot_estimator_bias(10_000)?,
        classical_reduction(24)?,
        chain_convergence(10_000, 200)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        for r in [
            channel_equivalence(6).unwrap(),
            closed_form_vs_oracle(6).unwrap(),
            gradient_check(4).unwrap(),
            classical_reduction(4).unwrap(),
        ] {
            assert!(r.passed, "{r}");
        }
    }

    #[test]
    fn model_set_covers_grid() {
        let set = oracle_models(108).unwrap();
        assert!(set.iter().all(|p| p.n() <= 3 && p.m() <= 3));
        assert!(set.iter().any(|p| p.beta() == 0.5) && set.iter().any(|p| p.beta() == 2.0));
        assert!(set.iter().any(|p| p.pool().is_classical()) && set.iter().any(|p| !p.pool().is_classical()));
    }
}
