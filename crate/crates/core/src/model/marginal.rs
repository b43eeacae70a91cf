use serde::{Deserialize, Serialize};

use super::field::{field_at, ln_two_cosh, log_basis_weight};
use super::{BitString, HiddenOutcome, ModelParams, PauliBasis, MAX_ENUMERATED_VISIBLE};
use crate::error::{Error, Result};
use crate::par;

/// Normalized probability vector over the `2^n` visible bitstrings, indexed by
/// the integer encoding of the bitstring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibleDistribution {
    n: usize,
    probs: Vec<f64>,
}

impl VisibleDistribution {
    /// Accepts any nonnegative vector of length `2^n` that sums to 1 within 1e-9.
    pub fn new(n: usize, probs: Vec<f64>) -> Result<Self> {
        if n > MAX_ENUMERATED_VISIBLE {
            return Err(Error::Capacity(format!("n={n} above enumeration guard")));
        }
        if probs.len() != 1usize << n {
            return Err(Error::Dimension(format!(
                "distribution of length {} over n={n} bits",
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Contract("probabilities must be finite and nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Contract(format!("distribution sums to {total}, expected 1")));
        }
        Ok(VisibleDistribution { n, probs })
    }

    /// Normalize arbitrary nonnegative weights.
    pub fn from_weights(n: usize, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::Contract(format!("weights sum to {total}")));
        }
        Self::new(n, weights.into_iter().map(|w| w / total).collect())
    }

    /// Normalize log-weights with a max shift.
    pub fn from_log_weights(n: usize, log_weights: &[f64]) -> Result<Self> {
        let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Self::from_weights(n, log_weights.iter().map(|l| (l - max).exp()).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        let len = 1usize << n;
        Self::new(n, vec![1.0 / len as f64; len])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, v: &BitString) -> f64 {
        self.probs[v.index() as usize]
    }

    /// Indices with nonzero probability, in increasing order.
    pub fn support(&self) -> Vec<u64> {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, _)| i as u64)
            .collect()
    }

    pub fn entropy(&self) -> f64 {
        -self.probs.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
    }

    /// Marginal `p(v_i = 1)` for each visible unit.
    pub fn bit_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.n];
        for (v, &p) in self.probs.iter().enumerate() {
            for (i, mean) in means.iter_mut().enumerate() {
                if (v >> i) & 1 == 1 {
                    *mean += p;
                }
            }
        }
        means
    }
}

fn check_enumerable(n: usize) -> Result<()> {
    if n > MAX_ENUMERATED_VISIBLE {
        return Err(Error::Capacity(format!(
            "n={n} above the enumeration guard of {MAX_ENUMERATED_VISIBLE}"
        )));
    }
    Ok(())
}

/// `−β Σ_i a_i (−1)^{v_i}`.
fn visible_log_factor(params: &ModelParams, v: u64) -> f64 {
    let mut e = 0.0;
    for (i, a) in params.visible_bias().iter().enumerate() {
        if (v >> i) & 1 == 0 {
            e += a;
        } else {
            e -= a;
        }
    }
    -params.beta() * e
}

/// `ln p̃(v)` where `p̃(v) = e^{−βΣ a_i s_i} ∏_j 2 cosh(β‖Φ_j(v, 0)‖)`.
fn log_marginal_weight(params: &ModelParams, v: u64) -> f64 {
    let beta = params.beta();
    let mut lw = visible_log_factor(params, v);
    for j in 0..params.m() {
        lw += ln_two_cosh(beta * field_at(params, v, j).norm());
    }
    lw
}

/// `p(h_j^P = s | v)` for every hidden unit, as an `m × 2` table.
pub fn hidden_conditional(params: &ModelParams, v: &BitString, basis: PauliBasis) -> Result<Vec<[f64; 2]>> {
    params.check_visible(v)?;
    params.pool_position(basis)?;
    let beta = params.beta();
    Ok((0..params.m())
        .map(|j| {
            let field = field_at(params, v.index(), j).scaled(beta);
            let p1 = one_probability(
                log_basis_weight(&field, basis),
                log_basis_weight(&field.negated(), basis),
            );
            [1.0 - p1, p1]
        })
        .collect())
}

/// Classical RBM conditionals in the 0/1 convention,
/// `p(h_j = 1 | v) = σ(c_j + Σ_i W_ij v_i)`.
///
/// With spins `s = 1 − 2·bit` the pool-`{Z}` Hamiltonian maps onto
/// `c_j = 2β(b_j + Σ_i w_ij)` and `W_ij = −4β w_ij`.
pub fn logistic_hidden_conditional(params: &ModelParams, v: &BitString) -> Result<Vec<f64>> {
    params.check_visible(v)?;
    if !params.pool().is_classical() {
        return Err(Error::Contract("logistic conditionals need the {Z} pool".into()));
    }
    let beta = params.beta();
    Ok((0..params.m())
        .map(|j| {
            let mut x = 2.0 * beta * params.b(0, j);
            for i in 0..params.n() {
                x += 2.0 * beta * params.w(0, i, j);
                x += -4.0 * beta * params.w(0, i, j) * v.bit(i) as f64;
            }
            logistic(x)
        })
        .collect())
}

pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `p(h = 1)` from the log-weights of the two outcomes.
#[inline]
fn one_probability(ln_d0: f64, ln_d1: f64) -> f64 {
    logistic(ln_d1 - ln_d0)
}

/// Log of the unnormalized `p̃(v | h^P)` for every `v`.
pub fn visible_conditional_log_weights(params: &ModelParams, h: &HiddenOutcome) -> Result<Vec<f64>> {
    params.check_hidden(h)?;
    check_enumerable(params.n())?;
    let beta = params.beta();
    let basis = h.basis;
    Ok(par::map_range(1usize << params.n(), |v| {
        let v = v as u64;
        let mut lw = visible_log_factor(params, v);
        for j in 0..params.m() {
            let mut field = field_at(params, v, j).scaled(beta);
            if h.bits.bit(j) == 1 {
                field = field.negated();
            }
            lw += log_basis_weight(&field, basis);
        }
        lw
    }))
}

/// Unnormalized `p̃(v | h^P) = e^{−βΣ a_i s_i} ∏_j D_j^P(v, h_j)`, strictly positive.
pub fn visible_conditional_weights(params: &ModelParams, h: &HiddenOutcome) -> Result<Vec<f64>> {
    Ok(visible_conditional_log_weights(params, h)?
        .into_iter()
        .map(f64::exp)
        .collect())
}

/// Exact visible marginal of the Gibbs state.
pub fn visible_marginal(params: &ModelParams) -> Result<VisibleDistribution> {
    check_enumerable(params.n())?;
    let logs = par::map_range(1usize << params.n(), |v| log_marginal_weight(params, v as u64));
    VisibleDistribution::from_log_weights(params.n(), &logs)
}

/// `−Σ_v q(v) ln p(v)`.
pub fn nll(params: &ModelParams, q: &VisibleDistribution) -> Result<f64> {
    if q.n() != params.n() {
        return Err(Error::Dimension(format!("target over n={}, model n={}", q.n(), params.n())));
    }
    let p = visible_marginal(params)?;
    Ok(-q
        .probs()
        .iter()
        .zip(p.probs())
        .filter(|(&qv, _)| qv > 0.0)
        .map(|(qv, pv)| qv * pv.ln())
        .sum::<f64>())
}

/// Exact likelihood gradient from the closed forms:
/// `∂L/∂θ_i = β Σ_v (q(v) − p(v)) ⟨H_i⟩_v`, where `⟨H_i⟩_v` is the expectation
/// of term `i` in the Gibbs state projected onto `v`.
pub fn exact_gradient(params: &ModelParams, q: &VisibleDistribution) -> Result<Vec<f64>> {
    if q.n() != params.n() {
        return Err(Error::Dimension(format!("target over n={}, model n={}", q.n(), params.n())));
    }
    let table = FieldTable::new(params)?;
    let p = table.marginal()?;
    let mut grad = vec![0.0; params.num_params()];
    for v in 0..1u64 << params.n() {
        let coeff = params.beta() * (q.probs()[v as usize] - p.probs()[v as usize]);
        if coeff == 0.0 {
            continue;
        }
        table.accumulate_statistics(params, v, coeff, &mut grad);
    }
    Ok(grad)
}

/// Per-configuration closed-form quantities for every visible bitstring,
/// evaluated at the current parameters. Built once per parameter update and
/// shared read-only by samplers and estimators.
#[derive(Debug, Clone)]
pub struct FieldTable {
    n: usize,
    m: usize,
    pool: Vec<PauliBasis>,
    visible_log: Vec<f64>,
    log_cosh: Vec<f64>,
    /// `[ln D(h_j = 0), ln D(h_j = 1)]`, indexed `(v·m + j)·|pool| + p`.
    log_weight: Vec<[f64; 2]>,
}

impl FieldTable {
    /// Largest `2^n · m · |pool|` table that will be allocated.
    pub const MAX_ENTRIES: usize = 1 << 24;

    pub fn new(params: &ModelParams) -> Result<Self> {
        let (n, m, k) = (params.n(), params.m(), params.pool().len());
        check_enumerable(n)?;
        let states = 1usize << n;
        if states.saturating_mul(m).saturating_mul(k) > Self::MAX_ENTRIES {
            return Err(Error::Capacity(format!(
                "field table for n={n}, m={m}, |pool|={k} exceeds {} entries",
                Self::MAX_ENTRIES
            )));
        }
        let beta = params.beta();
        let pool = params.pool().members().to_vec();
        let rows = par::map_range(states, |v| {
            let v = v as u64;
            let mut log_cosh = Vec::with_capacity(m);
            let mut weights = Vec::with_capacity(m * k);
            for j in 0..m {
                let field = field_at(params, v, j).scaled(beta);
                log_cosh.push(ln_two_cosh(field.norm()));
                let flipped = field.negated();
                for &basis in &pool {
                    weights.push([log_basis_weight(&field, basis), log_basis_weight(&flipped, basis)]);
                }
            }
            (visible_log_factor(params, v), log_cosh, weights)
        });
        let mut table = FieldTable {
            n,
            m,
            pool,
            visible_log: Vec::with_capacity(states),
            log_cosh: Vec::with_capacity(states * m),
            log_weight: Vec::with_capacity(states * m * k),
        };
        for (vis, lc, lw) in rows {
            table.visible_log.push(vis);
            table.log_cosh.extend(lc);
            table.log_weight.extend(lw);
        }
        Ok(table)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn pool(&self) -> &[PauliBasis] {
        &self.pool
    }

    #[inline]
    pub fn log_weights(&self, v: u64, j: usize, p: usize) -> [f64; 2] {
        self.log_weight[(v as usize * self.m + j) * self.pool.len() + p]
    }

    /// `p(h_j^P = 1 | v)` for pool position `p`.
    #[inline]
    pub fn one_probability(&self, v: u64, j: usize, p: usize) -> f64 {
        let [d0, d1] = self.log_weights(v, j, p);
        one_probability(d0, d1)
    }

    /// `E[(−1)^{h_j} | v]` in basis `p`.
    #[inline]
    pub fn spin_mean(&self, v: u64, j: usize, p: usize) -> f64 {
        let [d0, d1] = self.log_weights(v, j, p);
        (0.5 * (d0 - d1)).tanh()
    }

    #[inline]
    pub fn visible_log(&self, v: u64) -> f64 {
        self.visible_log[v as usize]
    }

    /// `ln p̃(v | h^P)` for pool position `p` and integer-encoded `h`.
    pub fn conditional_log_weight(&self, v: u64, p: usize, h: u64) -> f64 {
        let mut lw = self.visible_log[v as usize];
        for j in 0..self.m {
            lw += self.log_weights(v, j, p)[((h >> j) & 1) as usize];
        }
        lw
    }

    pub fn marginal(&self) -> Result<VisibleDistribution> {
        let logs: Vec<f64> = (0..1usize << self.n)
            .map(|v| self.visible_log[v] + self.log_cosh[v * self.m..(v + 1) * self.m].iter().sum::<f64>())
            .collect();
        VisibleDistribution::from_log_weights(self.n, &logs)
    }

    /// Add `coeff · ⟨H_i⟩_v` into `out` for every Hamiltonian term.
    pub(crate) fn accumulate_statistics(&self, params: &ModelParams, v: u64, coeff: f64, out: &mut [f64]) {
        let spins: Vec<f64> = (0..self.n).map(|i| if (v >> i) & 1 == 0 { 1.0 } else { -1.0 }).collect();
        for (i, s) in spins.iter().enumerate() {
            out[i] += coeff * s;
        }
        for p in 0..self.pool.len() {
            for j in 0..self.m {
                let t = coeff * self.spin_mean(v, j, p);
                out[params.b_index(p, j)] += t;
                for (i, s) in spins.iter().enumerate() {
                    out[params.w_index(p, i, j)] += t * s;
                }
            }
        }
    }
}
