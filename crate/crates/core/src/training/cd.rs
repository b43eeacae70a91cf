use rand::Rng;

use super::{ChainMode, GradientEstimate, Statistics, VisibleBiasUpdate};
use crate::error::{Error, Result};
use crate::model::{BitString, HiddenOutcome, ModelParams};
use crate::par;
use crate::sampling::{ChainState, ConditionalSampler, LedgerShard, RngStream};

/// Stream ids below this are reserved for trainer-level randomness.
const CHAIN_STREAM_BASE: u64 = 1 << 16;

/// One negative-phase chain with its own randomness and sample counts.
#[derive(Debug, Clone)]
pub struct Chain {
    pub state: ChainState,
    pub rng: RngStream,
    pub ledger: LedgerShard,
}

/// `count` chains for every basis of the pool, stored basis-major.
#[derive(Debug, Clone)]
pub struct ChainSet {
    count: usize,
    chains: Vec<Chain>,
}

impl ChainSet {
    /// Start chain `c` of every basis at `starts[c % starts.len()]`, with the
    /// hidden layer drawn from its conditional.
    pub fn from_data(params: &ModelParams, starts: &[BitString], count: usize, seed: u64) -> Result<Self> {
        if starts.is_empty() || count == 0 {
            return Err(Error::Contract("chains need at least one start and one chain".into()));
        }
        let sampler = ConditionalSampler::new(params)?;
        let mut chains = Vec::with_capacity(count * params.pool().len());
        for (p, &basis) in params.pool().members().iter().enumerate() {
            for c in 0..count {
                let v = starts[c % starts.len()];
                params.check_visible(&v)?;
                let mut rng = RngStream::new(seed, CHAIN_STREAM_BASE + (p * count + c) as u64);
                let h = sampler.draw_hidden(v.index(), p, &mut rng);
                let state = ChainState::new(v, HiddenOutcome::new(BitString::from_code(h, params.m()), basis));
                let ledger = LedgerShard { quantum: 0, classical: 1 };
                chains.push(Chain { state, rng, ledger });
            }
        }
        Ok(ChainSet { count, chains })
    }

    pub fn per_basis(&self) -> usize {
        self.count
    }

    pub fn chains(&self) -> &[Chain] {
        &self.chains
    }

    /// Ledger shards merged over every chain.
    pub fn ledger(&self) -> LedgerShard {
        let mut total = LedgerShard::default();
        for chain in &self.chains {
            total.merge(&chain.ledger);
        }
        total
    }
}

/// Knobs of the contrastive-divergence update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CdOptions {
    pub k: usize,
    pub statistics: Statistics,
    pub visible_bias_update: VisibleBiasUpdate,
    pub chain_mode: ChainMode,
}

impl Default for CdOptions {
    fn default() -> Self {
        CdOptions {
            k: 10,
            statistics: Statistics::Spin,
            visible_bias_update: VisibleBiasUpdate::Sum,
            chain_mode: ChainMode::Persistent,
        }
    }
}

fn add_phase(
    params: &ModelParams,
    p: usize,
    pairs: &[(u64, u64)],
    stats: Statistics,
    sign: f64,
    out: &mut GradientEstimate,
) {
    let (n, m) = (params.n(), params.m());
    let scale = sign / pairs.len() as f64;
    let mut sv = vec![0.0; n];
    let mut sh = vec![0.0; m];
    for &(v, h) in pairs {
        for (i, x) in sv.iter_mut().enumerate() {
            *x = stats.of((v >> i) & 1);
        }
        for (j, x) in sh.iter_mut().enumerate() {
            *x = stats.of((h >> j) & 1);
        }
        for i in 0..n {
            out.da[i] += scale * sv[i];
        }
        for j in 0..m {
            out.db[p * m + j] += scale * sh[j];
        }
        for i in 0..n {
            let row = (p * n + i) * m;
            for j in 0..m {
                out.dw[row + j] += scale * sv[i] * sh[j];
            }
        }
    }
}

/// Difference of batch-averaged statistics, positive minus negative phase,
/// for pool position `p`. Pairs are `(v, h)`.
pub fn contrast(
    params: &ModelParams,
    p: usize,
    positive: &[(BitString, BitString)],
    negative: &[(BitString, BitString)],
    stats: Statistics,
) -> Result<GradientEstimate> {
    if positive.is_empty() || negative.is_empty() {
        return Err(Error::Contract("both phases need at least one sample".into()));
    }
    if p >= params.pool().len() {
        return Err(Error::Dimension(format!("pool position {p} for |pool|={}", params.pool().len())));
    }
    let codes = |pairs: &[(BitString, BitString)]| -> Result<Vec<(u64, u64)>> {
        pairs
            .iter()
            .map(|(v, h)| {
                params.check_visible(v)?;
                if h.len() != params.m() {
                    return Err(Error::Dimension(format!("hidden length {} for m={}", h.len(), params.m())));
                }
                Ok((v.index(), h.index()))
            })
            .collect()
    };
    let mut out = GradientEstimate::zeros(params);
    add_phase(params, p, &codes(positive)?, stats, 1.0, &mut out);
    add_phase(params, p, &codes(negative)?, stats, -1.0, &mut out);
    Ok(out)
}

/// Generalized CD-k: for each basis of the pool in order, a positive phase
/// from the batch and a negative phase from that basis's chains after `k`
/// steps. The returned estimate is subtracted from the parameters.
pub fn generalized_cd_update<R: Rng + ?Sized>(
    params: &ModelParams,
    batch: &[BitString],
    chains: &mut ChainSet,
    rng: &mut R,
    options: &CdOptions,
) -> Result<GradientEstimate> {
    if batch.is_empty() {
        return Err(Error::Contract("empty batch".into()));
    }
    if options.k == 0 {
        return Err(Error::Contract("a Gibbs chain needs k ≥ 1 steps".into()));
    }
    if chains.chains.len() != chains.count * params.pool().len() {
        return Err(Error::Dimension("chain set does not match the pool".into()));
    }
    for v in batch {
        params.check_visible(v)?;
    }
    let sampler = ConditionalSampler::new(params)?;
    let m = params.m();
    let mut out = GradientEstimate::zeros(params);
    let count = chains.count;
    for (p, &basis) in params.pool().members().iter().enumerate() {
        let positive: Vec<(u64, u64)> = batch
            .iter()
            .map(|v| (v.index(), sampler.draw_hidden(v.index(), p, rng)))
            .collect();
        out.classical_consumed += batch.len() as u64;

        let slice = &mut chains.chains[p * count..(p + 1) * count];
        let results = par::map_mut(slice, |chain| -> Result<(u64, u64, LedgerShard)> {
            let mut spent = LedgerShard::default();
            if chain.state.h.basis != basis {
                return Err(Error::InvalidBasis(chain.state.h.basis));
            }
            if options.chain_mode == ChainMode::Reset {
                // Chain c restarts from batch element c (cyclically).
                let c = (chain.rng.stream() - CHAIN_STREAM_BASE) as usize % count;
                let v = batch[c % batch.len()];
                let h = sampler.draw_hidden(v.index(), p, &mut chain.rng);
                spent.classical += 1;
                chain.state = ChainState::new(v, HiddenOutcome::new(BitString::from_code(h, m), basis));
            }
            sampler.run_chain(&mut chain.state, options.k, &mut chain.rng, &mut spent)?;
            chain.ledger.merge(&spent);
            Ok((chain.state.v.index(), chain.state.h.bits.index(), spent))
        });
        let mut negative = Vec::with_capacity(count);
        for r in results {
            let (v, h, spent) = r?;
            out.samples_consumed += spent.quantum;
            out.classical_consumed += spent.classical;
            negative.push((v, h));
        }
        add_phase(params, p, &positive, options.statistics, 1.0, &mut out);
        add_phase(params, p, &negative, options.statistics, -1.0, &mut out);
    }
    if options.visible_bias_update == VisibleBiasUpdate::Mean {
        let k = params.pool().len() as f64;
        out.da.iter_mut().for_each(|x| *x /= k);
    }
    Ok(out)
}

/// CD-k for an RBM. Requires the pool `{Z}` and shares the generalized code
/// path, so both give identical results for identical random streams.
pub fn classical_cd_update<R: Rng + ?Sized>(
    params: &ModelParams,
    batch: &[BitString],
    chains: &mut ChainSet,
    rng: &mut R,
    options: &CdOptions,
) -> Result<GradientEstimate> {
    if !params.pool().is_classical() {
        return Err(Error::Contract(format!(
            "classical CD needs the pool {{Z}}, model has {:?}",
            params.pool().members()
        )));
    }
    generalized_cd_update(params, batch, chains, rng, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{visible_marginal, OperatorPool};
    use crate::training::{adam_step, AdamState, TrainConfig};

    fn bits(b: &[u8]) -> BitString {
        BitString::from_bits(b).unwrap()
    }

    #[test]
    fn matching_phases_give_zero() {
        let params = ModelParams::zeros(2, 2, OperatorPool::semi_quantum()).unwrap();
        let pairs = [(bits(&[1, 0]), bits(&[0, 1])), (bits(&[1, 1]), bits(&[1, 1]))];
        for stats in [Statistics::Spin, Statistics::Bit] {
            let g = contrast(&params, 1, &pairs, &pairs, stats).unwrap();
            assert!(g.to_flat().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn single_unit_bit_difference() {
        let params = ModelParams::zeros(1, 1, OperatorPool::classical()).unwrap();
        let g = contrast(&params, 0, &[(bits(&[1]), bits(&[1]))], &[(bits(&[0]), bits(&[0]))], Statistics::Bit).unwrap();
        assert_eq!((g.da[0], g.db[0], g.dw[0]), (1.0, 1.0, 1.0));
        // Spin values of the same samples: s_v = s_h = −1 vs +1.
        let g = contrast(&params, 0, &[(bits(&[1]), bits(&[1]))], &[(bits(&[0]), bits(&[0]))], Statistics::Spin).unwrap();
        assert_eq!((g.da[0], g.db[0], g.dw[0]), (-2.0, -2.0, 0.0));
    }

    #[test]
    fn classical_equals_generalized_bitwise() {
        let mut init = RngStream::new(3, 0);
        let params = ModelParams::random_uniform(3, 2, OperatorPool::classical(), 1.0, &mut init).unwrap();
        let batch = [bits(&[1, 0, 1]), bits(&[0, 0, 1]), bits(&[1, 1, 1])];
        let options = CdOptions { k: 3, ..CdOptions::default() };
        let mut c1 = ChainSet::from_data(&params, &batch, 4, 9).unwrap();
        let mut c2 = c1.clone();
        let mut r1 = RngStream::new(5, 1);
        let mut r2 = RngStream::new(5, 1);
        for _ in 0..5 {
            let a = generalized_cd_update(&params, &batch, &mut c1, &mut r1, &options).unwrap();
            let b = classical_cd_update(&params, &batch, &mut c2, &mut r2, &options).unwrap();
            assert_eq!(a, b);
        }
        let sq = ModelParams::zeros(3, 2, OperatorPool::semi_quantum()).unwrap();
        let mut c3 = ChainSet::from_data(&sq, &batch, 1, 0).unwrap();
        assert!(classical_cd_update(&sq, &batch, &mut c3, &mut r1, &options).is_err());
    }

    #[test]
    fn ledger_counts_pool_k_chains() {
        let params = ModelParams::zeros(2, 1, OperatorPool::semi_quantum()).unwrap();
        let batch = [bits(&[0, 1])];
        let mut chains = ChainSet::from_data(&params, &batch, 10, 0).unwrap();
        let mut rng = RngStream::new(0, 1);
        for mode in [ChainMode::Persistent, ChainMode::Reset] {
            let options = CdOptions { k: 10, chain_mode: mode, ..CdOptions::default() };
            let before = chains.ledger().quantum;
            let g = generalized_cd_update(&params, &batch, &mut chains, &mut rng, &options).unwrap();
            assert_eq!(g.samples_consumed, 300);
            assert_eq!(chains.ledger().quantum - before, 300);
        }
    }

    #[test]
    fn mean_mode_divides_visible_bias() {
        let params = ModelParams::zeros(2, 1, OperatorPool::semi_quantum()).unwrap();
        let batch = [bits(&[0, 1]), bits(&[1, 1])];
        let run = |mode| {
            let mut chains = ChainSet::from_data(&params, &batch, 2, 4).unwrap();
            let mut rng = RngStream::new(4, 1);
            let options = CdOptions { k: 2, visible_bias_update: mode, ..CdOptions::default() };
            generalized_cd_update(&params, &batch, &mut chains, &mut rng, &options).unwrap()
        };
        let sum = run(VisibleBiasUpdate::Sum);
        let mean = run(VisibleBiasUpdate::Mean);
        for (s, m) in sum.da.iter().zip(&mean.da) {
            assert!((s / 3.0 - m).abs() < 1e-15);
        }
        assert_eq!(sum.dw, mean.dw);
    }

    fn two_mode_kl_drop(seed: u64) -> f64 {
        // Target: two antipodal modes on four bits.
        let mut probs = vec![0.0; 16];
        probs[0b0011] = 0.5;
        probs[0b1100] = 0.5;
        let q = crate::model::VisibleDistribution::new(4, probs).unwrap();
        let data: Vec<BitString> = [0b0011u64, 0b1100].iter().map(|&c| BitString::from_index(c, 4).unwrap()).collect();
        let mut init = RngStream::new(seed, 0);
        let mut params = ModelParams::random_weights(4, 1, OperatorPool::semi_quantum(), 0.5, &mut init).unwrap();
        params.set_visible_bias_from_means(&q.bit_means()).unwrap();
        let kl = |p: &ModelParams| {
            let model = visible_marginal(p).unwrap();
            q.probs()
                .iter()
                .zip(model.probs())
                .filter(|(a, _)| **a > 0.0)
                .map(|(a, b)| a * (a / b).ln())
                .sum::<f64>()
        };
        let start = kl(&params);
        let iterations = 2000;
        let mut config = TrainConfig::default();
        config.iterations = iterations;
        config.schedule = crate::training::Schedule::new(0.02, 2e-3, 0.0, iterations);
        let options = CdOptions { k: 5, ..CdOptions::default() };
        let mut chains = ChainSet::from_data(&params, &data, 10, seed).unwrap();
        let mut rng = RngStream::new(seed, 1);
        let mut adam = AdamState::new(params.num_params());
        for t in 1..=iterations {
            let g = generalized_cd_update(&params, &data, &mut chains, &mut rng, &options).unwrap();
            adam_step(&mut params, &mut adam, &g, t, &config).unwrap();
        }
        kl(&params) / start
    }

    #[test]
    fn cd_halves_kl_on_two_mode_target() {
        let ratios: Vec<f64> = (0..10).map(two_mode_kl_drop).collect();
        let good = ratios.iter().filter(|&&r| r <= 0.5).count();
        assert!(good >= 8, "KL ratios {ratios:?}");
    }
}
