//! Conditional sampling and Gibbs chains.
//!
//! Hidden conditionals factorize over units and are drawn classically.
//! Visible conditionals `p(v | h^P)` are drawn by enumerating all `2^n`
//! weights; each such draw stands in for one execution of the conditional
//! sampling circuit and is charged one quantum sample on the ledger.

pub mod categorical;
mod rng;

use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BitString, FieldTable, HiddenOutcome, ModelParams, PauliBasis};

pub use rng::RngStream;

/// Sample counts owned by one chain or one trainer. Shards merge by addition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerShard {
    /// Simulated circuit executions, one shot each.
    pub quantum: u64,
    /// Classically drawn hidden-layer samples.
    pub classical: u64,
}

impl LedgerShard {
    pub fn merge(&mut self, other: &LedgerShard) {
        self.quantum += other.quantum;
        self.classical += other.classical;
    }

    pub fn take(&mut self) -> LedgerShard {
        std::mem::take(self)
    }
}

/// State of one Gibbs chain in a fixed hidden basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainState {
    pub v: BitString,
    pub h: HiddenOutcome,
    pub age: u64,
}

impl ChainState {
    pub fn new(v: BitString, h: HiddenOutcome) -> Self {
        ChainState { v, h, age: 0 }
    }
}

/// Precomputed conditionals for one parameter setting.
///
/// Visible-given-hidden CDFs are built lazily per `(basis, h)` and cached, so
/// the sampler can be shared by concurrent chains.
pub struct ConditionalSampler {
    table: FieldTable,
    pool: Vec<PauliBasis>,
    cdfs: Option<Vec<OnceLock<Vec<f64>>>>,
}

impl ConditionalSampler {
    /// Cached CDF storage is skipped above this many floats.
    const MAX_CACHED_FLOATS: usize = 1 << 22;

    pub fn new(params: &ModelParams) -> Result<Self> {
        let table = FieldTable::new(params)?;
        let pool = params.pool().members().to_vec();
        let slots = pool.len() << params.m().min(40);
        let cdfs = (params.m() < 40 && slots.saturating_mul(1 << params.n()) <= Self::MAX_CACHED_FLOATS)
            .then(|| (0..slots).map(|_| OnceLock::new()).collect());
        Ok(ConditionalSampler { table, pool, cdfs })
    }

    pub fn table(&self) -> &FieldTable {
        &self.table
    }

    pub fn n(&self) -> usize {
        self.table.n()
    }

    pub fn m(&self) -> usize {
        self.table.m()
    }

    pub fn position(&self, basis: PauliBasis) -> Result<usize> {
        self.pool
            .iter()
            .position(|&b| b == basis)
            .ok_or(Error::InvalidBasis(basis))
    }

    fn build_cdf(&self, p: usize, h: u64) -> Vec<f64> {
        let logs: Vec<f64> = (0..1u64 << self.n())
            .map(|v| self.table.conditional_log_weight(v, p, h))
            .collect();
        categorical::cumulative_from_logs(&logs)
    }

    /// One draw of the hidden layer given `v`, in pool position `p`.
    pub fn draw_hidden<R: Rng + ?Sized>(&self, v: u64, p: usize, rng: &mut R) -> u64 {
        let mut h = 0u64;
        for j in 0..self.m() {
            let u: f64 = rng.random();
            if u < self.table.one_probability(v, j, p) {
                h |= 1 << j;
            }
        }
        h
    }

    /// One draw of the visible layer given `h` in pool position `p`. Charges
    /// one quantum sample.
    pub fn draw_visible<R: Rng + ?Sized>(&self, p: usize, h: u64, rng: &mut R, ledger: &mut LedgerShard) -> u64 {
        ledger.quantum += 1;
        let idx = match &self.cdfs {
            Some(cache) => {
                let cdf = cache[(p << self.m()) | h as usize].get_or_init(|| self.build_cdf(p, h));
                categorical::sample(cdf, rng)
            }
            None => categorical::sample(&self.build_cdf(p, h), rng),
        };
        idx as u64
    }

    /// Advance `state` by `k` alternating visible/hidden updates.
    pub fn run_chain<R: Rng + ?Sized>(
        &self,
        state: &mut ChainState,
        k: usize,
        rng: &mut R,
        ledger: &mut LedgerShard,
    ) -> Result<()> {
        let p = self.position(state.h.basis)?;
        let (n, m) = (self.n(), self.m());
        let mut h = state.h.bits.index();
        let mut v = state.v.index();
        for _ in 0..k {
            v = self.draw_visible(p, h, rng, ledger);
            h = self.draw_hidden(v, p, rng);
            ledger.classical += 1;
        }
        state.v = BitString::from_code(v, n);
        state.h.bits = BitString::from_code(h, m);
        state.age += k as u64;
        Ok(())
    }
}

/// Independent per-unit draws from `p(h^P | v)`.
pub fn sample_hidden<R: Rng + ?Sized>(
    params: &ModelParams,
    v: &BitString,
    basis: PauliBasis,
    rng: &mut R,
) -> Result<BitString> {
    let rows = crate::model::hidden_conditional(params, v, basis)?;
    let mut h = 0u64;
    for (j, row) in rows.iter().enumerate() {
        let u: f64 = rng.random();
        if u < row[1] {
            h |= 1 << j;
        }
    }
    Ok(BitString::from_code(h, params.m()))
}

/// One categorical draw from `p(v | h^P)`; charges one quantum sample.
pub fn sample_visible<R: Rng + ?Sized>(
    params: &ModelParams,
    h: &HiddenOutcome,
    rng: &mut R,
    ledger: &mut LedgerShard,
) -> Result<BitString> {
    let logs = crate::model::visible_conditional_log_weights(params, h)?;
    let cdf = categorical::cumulative_from_logs(&logs);
    ledger.quantum += 1;
    Ok(BitString::from_code(categorical::sample(&cdf, rng) as u64, params.n()))
}

/// `k` steps of `v ~ p(v | h^P)`, `h^P ~ p(h^P | v)` starting from `start`.
pub fn gibbs_chain<R: Rng + ?Sized>(
    params: &ModelParams,
    start: ChainState,
    k: usize,
    rng: &mut R,
    ledger: &mut LedgerShard,
) -> Result<ChainState> {
    if k == 0 {
        return Err(Error::Contract("a Gibbs chain needs k ≥ 1 steps".into()));
    }
    params.check_visible(&start.v)?;
    params.check_hidden(&start.h)?;
    let sampler = ConditionalSampler::new(params)?;
    let mut state = start;
    sampler.run_chain(&mut state, k, rng, ledger)?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{hidden_conditional, visible_conditional_weights, visible_marginal, OperatorPool};
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn chi_square_p_value(counts: &[u64], probs: &[f64]) -> f64 {
        let total: u64 = counts.iter().sum();
        let mut stat = 0.0;
        let mut dof = 0usize;
        for (&c, &p) in counts.iter().zip(probs) {
            let e = p * total as f64;
            if e > 0.0 {
                stat += (c as f64 - e).powi(2) / e;
                dof += 1;
            }
        }
        1.0 - ChiSquared::new((dof - 1) as f64).unwrap().cdf(stat)
    }

    #[test]
    fn zero_model_hidden_bits_are_fair() {
        let params = ModelParams::zeros(2, 4, OperatorPool::semi_quantum()).unwrap();
        let mut rng = RngStream::new(1, 0);
        let v = BitString::zeros(2);
        let draws = 100_000;
        let mut ones = 0u64;
        for _ in 0..draws / 4 {
            let h = sample_hidden(&params, &v, PauliBasis::X, &mut rng).unwrap();
            ones += h.index().count_ones() as u64;
        }
        let mean = ones as f64 / draws as f64;
        assert!((mean - 0.5).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn saturated_hidden_bias() {
        let mut params = ModelParams::zeros(2, 2, OperatorPool::classical()).unwrap();
        params.hidden_bias_mut().copy_from_slice(&[50.0, 50.0]);
        let mut rng = RngStream::new(2, 0);
        for _ in 0..1000 {
            let h = sample_hidden(&params, &BitString::zeros(2), PauliBasis::Z, &mut rng).unwrap();
            assert_eq!(h.index(), 0b11);
        }
    }

    #[test]
    fn hidden_draws_fit_conditional() {
        let mut rng = RngStream::new(3, 0);
        let params = ModelParams::random_uniform(3, 3, OperatorPool::semi_quantum(), 1.0, &mut rng).unwrap();
        let v = BitString::from_bits(&[1, 0, 1]).unwrap();
        let rows = hidden_conditional(&params, &v, PauliBasis::Y).unwrap();
        let probs: Vec<f64> = (0..8usize)
            .map(|h| (0..3).map(|j| rows[j][(h >> j) & 1]).product())
            .collect();
        let mut counts = vec![0u64; 8];
        for _ in 0..100_000 {
            counts[sample_hidden(&params, &v, PauliBasis::Y, &mut rng).unwrap().index() as usize] += 1;
        }
        assert!(chi_square_p_value(&counts, &probs) > 1e-3);
    }

    #[test]
    fn visible_draws_fit_conditional_and_charge_ledger() {
        let mut rng = RngStream::new(4, 0);
        let params = ModelParams::random_uniform(3, 2, OperatorPool::semi_quantum(), 1.0, &mut rng).unwrap();
        let h = HiddenOutcome::new(BitString::from_bits(&[0, 1]).unwrap(), PauliBasis::X);
        let w = visible_conditional_weights(&params, &h).unwrap();
        let total: f64 = w.iter().sum();
        let probs: Vec<f64> = w.iter().map(|x| x / total).collect();
        let mut ledger = LedgerShard::default();
        let mut counts = vec![0u64; 8];
        let draws = 100_000;
        for _ in 0..draws {
            counts[sample_visible(&params, &h, &mut rng, &mut ledger).unwrap().index() as usize] += 1;
        }
        assert_eq!(ledger.quantum, draws);
        assert!(chi_square_p_value(&counts, &probs) > 1e-3);
    }

    #[test]
    fn zero_model_visible_draws_are_uniform() {
        let params = ModelParams::zeros(3, 1, OperatorPool::semi_quantum()).unwrap();
        let mut rng = RngStream::new(5, 0);
        let mut ledger = LedgerShard::default();
        let h = HiddenOutcome::new(BitString::zeros(1), PauliBasis::Z);
        let draws = 100_000u64;
        let mut counts = [0u64; 8];
        for _ in 0..draws {
            counts[sample_visible(&params, &h, &mut rng, &mut ledger).unwrap().index() as usize] += 1;
        }
        let sigma = (0.125f64 * 0.875 / draws as f64).sqrt();
        for c in counts {
            assert!((c as f64 / draws as f64 - 0.125).abs() < 3.0 * sigma + 1e-12);
        }
    }

    #[test]
    fn sampler_path_is_bit_identical_to_direct_path() {
        let mut rng = RngStream::new(6, 0);
        let params = ModelParams::random_uniform(3, 2, OperatorPool::semi_quantum(), 1.2, &mut rng).unwrap();
        let sampler = ConditionalSampler::new(&params).unwrap();
        let mut a = RngStream::new(9, 1);
        let mut b = RngStream::new(9, 1);
        let mut la = LedgerShard::default();
        let mut lb = LedgerShard::default();
        for (p, &basis) in params.pool().members().iter().enumerate() {
            for code in 0..8u64 {
                let v = BitString::from_index(code, 3).unwrap();
                let h1 = sample_hidden(&params, &v, basis, &mut a).unwrap();
                let h2 = sampler.draw_hidden(code, p, &mut b);
                assert_eq!(h1.index(), h2);
                let out = HiddenOutcome::new(h1, basis);
                let v1 = sample_visible(&params, &out, &mut a, &mut la).unwrap();
                let v2 = sampler.draw_visible(p, h2, &mut b, &mut lb);
                assert_eq!(v1.index(), v2);
            }
        }
        assert_eq!(la, lb);
    }

    #[test]
    fn chain_contract_and_ledger() {
        let params = ModelParams::zeros(2, 1, OperatorPool::semi_quantum()).unwrap();
        let start = ChainState::new(BitString::zeros(2), HiddenOutcome::new(BitString::zeros(1), PauliBasis::Y));
        let mut rng = RngStream::new(0, 0);
        let mut ledger = LedgerShard::default();
        assert!(gibbs_chain(&params, start, 0, &mut rng, &mut ledger).is_err());
        ledger.quantum = 17;
        let end = gibbs_chain(&params, start, 5, &mut rng, &mut ledger).unwrap();
        assert_eq!(ledger.quantum, 22);
        assert_eq!(end.age, 5);
        assert_eq!(end.h.basis, PauliBasis::Y);
    }

    #[test]
    fn zero_model_chain_output_is_uniform() {
        let params = ModelParams::zeros(2, 2, OperatorPool::semi_quantum()).unwrap();
        let start = ChainState::new(
            BitString::from_bits(&[1, 1]).unwrap(),
            HiddenOutcome::new(BitString::zeros(2), PauliBasis::X),
        );
        let mut rng = RngStream::new(12, 0);
        let mut ledger = LedgerShard::default();
        let chains = 10_000u64;
        let mut counts = [0u64; 4];
        for _ in 0..chains {
            let end = gibbs_chain(&params, start, 1, &mut rng, &mut ledger).unwrap();
            counts[end.v.index() as usize] += 1;
        }
        let sigma = (0.25f64 * 0.75 / chains as f64).sqrt();
        for c in counts {
            assert!((c as f64 / chains as f64 - 0.25).abs() < 4.0 * sigma);
        }
    }

    #[test]
    fn chain_marginal_approaches_visible_marginal_with_k() {
        let mut rng = RngStream::new(13, 0);
        let params = ModelParams::random_uniform(3, 2, OperatorPool::semi_quantum(), 1.0, &mut rng).unwrap();
        let target = visible_marginal(&params).unwrap();
        let sampler = ConditionalSampler::new(&params).unwrap();
        let chains = 20_000;
        let tv_at = |k: usize, rng: &mut RngStream| {
            let mut counts = vec![0u64; 8];
            let mut ledger = LedgerShard::default();
            for _ in 0..chains {
                let mut s = ChainState::new(BitString::zeros(3), HiddenOutcome::new(BitString::zeros(2), PauliBasis::Z));
                sampler.run_chain(&mut s, k, rng, &mut ledger).unwrap();
                counts[s.v.index() as usize] += 1;
            }
            0.5 * counts
                .iter()
                .zip(target.probs())
                .map(|(&c, p)| (c as f64 / chains as f64 - p).abs())
                .sum::<f64>()
        };
        let early = tv_at(1, &mut rng);
        let late = tv_at(50, &mut rng);
        assert!(late < 0.02, "tv after 50 steps {late}");
        assert!(late <= early + 0.01, "early {early}, late {late}");
    }
}
