use rand::Rng;
use rand_distr::{Binomial, Distribution};

use super::GradientEstimate;
use crate::error::{Error, Result};
use crate::model::{FieldTable, ModelParams, VisibleDistribution};

/// Quantum samples charged per likelihood-gradient iteration: every setting
/// measures the Gibbs state and each projected state `S` times.
pub fn nll_samples_per_iteration(pool_size: usize, support: usize, shots: u64) -> u64 {
    pool_size as u64 * (support as u64 + 1) * shots
}

fn binomial<R: Rng + ?Sized>(trials: u64, p: f64, rng: &mut R) -> u64 {
    if trials == 0 {
        return 0;
    }
    let p = p.clamp(0.0, 1.0);
    Binomial::new(trials, p).expect("probability clamped to [0, 1]").sample(rng)
}

/// Outcome counts of `shots` draws from `probs`, by sequential binomials.
fn multinomial<R: Rng + ?Sized>(shots: u64, probs: &[f64], rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0; probs.len()];
    let mut remaining = shots;
    let mut mass = 1.0;
    for (v, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let c = if v + 1 == probs.len() || mass <= p {
            remaining
        } else {
            binomial(remaining, p / mass, rng)
        };
        counts[v] = c;
        remaining -= c;
        mass -= p;
    }
    counts
}

/// Finite-shot estimate of the likelihood gradient
/// `β (Σ_v q(v) ⟨H_i⟩_v − ⟨H_i⟩)`.
///
/// Each pool basis is one measurement setting: visible qubits in `Z`, hidden
/// qubits in that basis. Per setting, `S` shots are taken on the Gibbs state
/// and `S` on each projected state `v ∈ supp(q)`. Shot outcomes are drawn
/// from the exact measurement distributions; for the projected states only
/// the hidden register is random.
pub fn nll_shot_update<R: Rng + ?Sized>(
    params: &ModelParams,
    q: &VisibleDistribution,
    shots: u64,
    rng: &mut R,
) -> Result<GradientEstimate> {
    if shots == 0 {
        return Err(Error::Contract("shots must be ≥ 1".into()));
    }
    if q.n() != params.n() {
        return Err(Error::Dimension(format!("target over n={}, model n={}", q.n(), params.n())));
    }
    let table = FieldTable::new(params)?;
    let model = table.marginal()?;
    let support = q.support();
    let (n, m) = (params.n(), params.m());
    let pool = params.pool().len();
    let spin = |v: u64, i: usize| if (v >> i) & 1 == 0 { 1.0 } else { -1.0 };
    let s = shots as f64;

    // Positive part: Σ_v q(v) ⟨H_i⟩_v
    let mut positive = GradientEstimate::zeros(params);
    // Negative part: ⟨H_i⟩ in the Gibbs state
    let mut negative = GradientEstimate::zeros(params);

    for &v in &support {
        let qv = q.probs()[v as usize];
        for i in 0..n {
            positive.da[i] += qv * spin(v, i);
        }
    }
    for p in 0..pool {
        for &v in &support {
            let qv = q.probs()[v as usize];
            for j in 0..m {
                let ones = binomial(shots, table.one_probability(v, j, p), rng);
                let t = qv * (s - 2.0 * ones as f64) / s;
                positive.db[p * m + j] += t;
                for i in 0..n {
                    positive.dw[(p * n + i) * m + j] += t * spin(v, i);
                }
            }
        }

        let counts = multinomial(shots, model.probs(), rng);
        for (v, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let v = v as u64;
            for i in 0..n {
                negative.da[i] += c as f64 * spin(v, i) / (s * pool as f64);
            }
            for j in 0..m {
                let ones = binomial(c, table.one_probability(v, j, p), rng);
                let t = (c as f64 - 2.0 * ones as f64) / s;
                negative.db[p * m + j] += t;
                for i in 0..n {
                    negative.dw[(p * n + i) * m + j] += t * spin(v, i);
                }
            }
        }
    }

    let beta = params.beta();
    let flat: Vec<f64> = positive
        .to_flat()
        .iter()
        .zip(negative.to_flat())
        .map(|(a, b)| beta * (a - b))
        .collect();
    GradientEstimate::from_flat(params, &flat, nll_samples_per_iteration(pool, support.len(), shots))
}
