use num_complex::Complex64;

use super::{build_hamiltonian, check_dense, gibbs_state, hamiltonian_terms, DenseOperator};
use crate::error::{Error, Result};
use crate::model::{ModelParams, VisibleDistribution};

/// `p(v) = Tr[(Π_v ⊗ 1) ρ]`.
pub fn dense_visible_marginal(rho: &DenseOperator) -> Result<VisibleDistribution> {
    let (n, m) = (rho.n(), rho.m());
    let block = 1usize << m;
    let probs: Vec<f64> = (0..1usize << n)
        .map(|v| (0..block).map(|k| rho.get((v << m) | k, (v << m) | k).re).sum())
        .collect();
    VisibleDistribution::from_weights(n, probs)
}

fn check_target(params: &ModelParams, q: &VisibleDistribution) -> Result<()> {
    if q.n() != params.n() {
        return Err(Error::Dimension(format!("target over n={}, model n={}", q.n(), params.n())));
    }
    let total: f64 = q.probs().iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Contract(format!("target sums to {total}")));
    }
    Ok(())
}

fn dense_marginal(params: &ModelParams) -> Result<(DenseOperator, VisibleDistribution)> {
    check_dense(params)?;
    let rho = gibbs_state(&build_hamiltonian(params)?, params.beta())?;
    let p = dense_visible_marginal(&rho)?;
    Ok((rho, p))
}

/// `L = −Σ_v q(v) ln p(v)` from the dense Gibbs state.
pub fn exact_nll(params: &ModelParams, q: &VisibleDistribution) -> Result<f64> {
    check_target(params, q)?;
    let (_, p) = dense_marginal(params)?;
    Ok(cross_entropy(q, &p))
}

/// `D_KL(q ‖ p) = L − H(q)`.
pub fn exact_kl(params: &ModelParams, q: &VisibleDistribution) -> Result<f64> {
    Ok(exact_nll(params, q)? - q.entropy())
}

fn cross_entropy(q: &VisibleDistribution, p: &VisibleDistribution) -> f64 {
    -q.probs()
        .iter()
        .zip(p.probs())
        .filter(|(&qv, _)| qv > 0.0)
        .map(|(qv, pv)| qv * pv.ln())
        .sum::<f64>()
}

/// `∂L/∂θ_i = −β Σ_v q(v) ( Tr[ρ H_i] − Tr[(Π_v ⊗ 1) ρ H_i] / p(v) )`.
///
/// The projected expectation is divided by `p(v)`: `Π_v` commutes with `H`,
/// so `∂ ln Tr[Π_v e^{−βH}] = −β Tr[Π_v e^{−βH} H_i] / Tr[Π_v e^{−βH}]`.
pub fn exact_nll_gradient(params: &ModelParams, q: &VisibleDistribution) -> Result<Vec<f64>> {
    check_target(params, q)?;
    let (rho, p) = dense_marginal(params)?;
    let (n, m) = (params.n(), params.m());
    let block = 1usize << m;
    let beta = params.beta();
    let mut grad = vec![0.0; params.num_params()];
    for term in hamiltonian_terms(params) {
        // (ρ H_i)[x, x] = ρ[x, y] · phase where H_i |x⟩ = phase |y⟩
        let diag = |x: usize| -> f64 {
            let (y, phase): (usize, Complex64) = term.act(n, m, x);
            (rho.get(x, y) * phase).re
        };
        let total: f64 = (0..rho.dim()).map(diag).sum();
        let mut g = 0.0;
        for (v, &qv) in q.probs().iter().enumerate() {
            if qv == 0.0 {
                continue;
            }
            let projected: f64 = (0..block).map(|k| diag((v << m) | k)).sum();
            g += qv * (total - projected / p.probs()[v]);
        }
        grad[term.param_index] = -beta * g;
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{visible_marginal, OperatorPool};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_model_nll_is_n_ln2() {
        let params = ModelParams::zeros(3, 1, OperatorPool::semi_quantum()).unwrap();
        let q = VisibleDistribution::from_weights(3, vec![1.0, 0.0, 2.0, 0.0, 0.0, 3.0, 0.0, 1.0]).unwrap();
        let l = exact_nll(&params, &q).unwrap();
        assert!((l - 3.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn model_target_gives_entropy_and_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let params = ModelParams::random_uniform(2, 2, OperatorPool::semi_quantum(), 1.0, &mut rng).unwrap();
        let p = visible_marginal(&params).unwrap();
        let l = exact_nll(&params, &p).unwrap();
        assert!((l - p.entropy()).abs() < 1e-12);
        assert!(exact_kl(&params, &p).unwrap().abs() < 1e-12);
        let g = exact_nll_gradient(&params, &p).unwrap();
        assert!(g.iter().all(|x| x.abs() < 1e-8), "{g:?}");
    }

    #[test]
    fn dense_and_closed_form_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let params = ModelParams::random_uniform(2, 1, OperatorPool::semi_quantum(), 1.0, &mut rng).unwrap();
        let q = VisibleDistribution::from_weights(2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let p = visible_marginal(&params).unwrap();
        let closed: f64 = -q.probs().iter().zip(p.probs()).map(|(a, b)| a * b.ln()).sum::<f64>();
        assert!((exact_nll(&params, &q).unwrap() - closed).abs() < 1e-12);
        let g_dense = exact_nll_gradient(&params, &q).unwrap();
        let g_closed = crate::model::exact_gradient(&params, &q).unwrap();
        for (a, b) in g_dense.iter().zip(&g_closed) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn symmetric_target_gives_zero_visible_bias_gradient() {
        // Target and model both invariant under flipping visible unit 0.
        let mut params = ModelParams::zeros(2, 1, OperatorPool::semi_quantum()).unwrap();
        params.visible_bias_mut()[1] = 0.4;
        params.hidden_bias_mut().copy_from_slice(&[0.3, -0.2, 0.5]);
        let q = VisibleDistribution::from_weights(2, vec![0.1, 0.1, 0.4, 0.4]).unwrap();
        let g = exact_nll_gradient(&params, &q).unwrap();
        assert!(g[0].abs() < 1e-10);
    }

    #[test]
    fn rejects_mismatched_target() {
        let params = ModelParams::zeros(2, 1, OperatorPool::classical()).unwrap();
        let q = VisibleDistribution::uniform(3).unwrap();
        assert!(matches!(exact_nll(&params, &q), Err(Error::Dimension(_))));
    }
}
