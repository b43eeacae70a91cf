use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{build_hamiltonian, check_dense, gibbs_state, imaginary_time_evolution, DenseOperator};
use crate::error::{Error, Result};
use crate::model::{BitString, HiddenOutcome, ModelParams, PauliBasis};

/// What a conditional distribution is conditioned on.
#[derive(Debug, Clone, Copy)]
pub enum Conditioning {
    /// `p(h^P | v)`; the hidden register is read out in `basis`.
    Visible { v: BitString, basis: PauliBasis },
    /// `p(v | h^P)`; the visible register is read out in `Z`.
    Hidden(HiddenOutcome),
}

/// Single-qubit eigenvector of `basis` with eigenvalue `(−1)^bit`.
fn eigenvector(basis: PauliBasis, bit: usize) -> [Complex64; 2] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let c = |re: f64, im: f64| Complex64::new(re, im);
    match (basis, bit) {
        (PauliBasis::Z, 0) => [c(1.0, 0.0), c(0.0, 0.0)],
        (PauliBasis::Z, _) => [c(0.0, 0.0), c(1.0, 0.0)],
        (PauliBasis::X, 0) => [c(s, 0.0), c(s, 0.0)],
        (PauliBasis::X, _) => [c(s, 0.0), c(-s, 0.0)],
        (PauliBasis::Y, 0) => [c(s, 0.0), c(0.0, s)],
        (PauliBasis::Y, _) => [c(s, 0.0), c(0.0, -s)],
    }
}

/// Columns are the product states `|h⟩_P` on `m` qubits, indexed by `h`.
fn hidden_basis_matrix(m: usize, basis: PauliBasis) -> DMatrix<Complex64> {
    let d = 1usize << m;
    DMatrix::from_fn(d, d, |row, h| {
        let mut amp = Complex64::new(1.0, 0.0);
        for j in 0..m {
            amp *= eigenvector(basis, (h >> j) & 1)[(row >> j) & 1];
        }
        amp
    })
}

/// `⟨v, h_P| X |v, h_P⟩` for every `(v, h)`, indexed `(v << m) | h`.
pub fn joint_distribution(op: &DenseOperator, basis: PauliBasis) -> Vec<f64> {
    let (n, m) = (op.n(), op.m());
    let block = 1usize << m;
    let u = hidden_basis_matrix(m, basis);
    let u_adj = u.adjoint();
    let mut out = vec![0.0; op.dim()];
    for v in 0..1usize << n {
        let start = v << m;
        let sub = op.matrix().view((start, start), (block, block)).into_owned();
        let rotated = &u_adj * sub * &u;
        for h in 0..block {
            out[start + h] = rotated[(h, h)].re;
        }
    }
    out
}

fn hidden_projector(n: usize, m: usize, h: &HiddenOutcome) -> DenseOperator {
    let block = 1usize << m;
    let u = hidden_basis_matrix(m, h.basis);
    let ket = u.column(h.bits.index() as usize).into_owned();
    let proj = &ket * ket.adjoint();
    let mut mat = DMatrix::zeros(block << n, block << n);
    let scale = Complex64::new(1.0 / (1u64 << n) as f64, 0.0);
    for v in 0..1usize << n {
        let start = v << m;
        mat.view_mut((start, start), (block, block)).copy_from(&(&proj * scale));
    }
    DenseOperator::new(n, m, mat).expect("dimensions match by construction")
}

fn check_conditioning(params: &ModelParams, given: &Conditioning) -> Result<()> {
    match given {
        Conditioning::Visible { v, basis } => {
            if v.len() != params.n() {
                return Err(Error::Dimension(format!("visible length {} for n={}", v.len(), params.n())));
            }
            if !params.pool().contains(*basis) {
                return Err(Error::InvalidBasis(*basis));
            }
        }
        Conditioning::Hidden(h) => {
            if h.bits.len() != params.m() {
                return Err(Error::Dimension(format!("hidden length {} for m={}", h.bits.len(), params.m())));
            }
            if !params.pool().contains(h.basis) {
                return Err(Error::InvalidBasis(h.basis));
            }
        }
    }
    Ok(())
}

/// Conditional distribution by the imaginary-time channel: prepare the
/// reference state (`|v⟩⟨v| ⊗ I/2^m` or `I/2^n ⊗ |h⟩⟨h|_P`), apply
/// `X ↦ e^{−βH/2} X e^{−βH/2}`, normalize, and read out the other register.
pub fn channel_conditional(params: &ModelParams, given: Conditioning) -> Result<Vec<f64>> {
    check_dense(params)?;
    check_conditioning(params, &given)?;
    let (n, m) = (params.n(), params.m());
    let h = build_hamiltonian(params)?;
    let half = imaginary_time_evolution(&h, 0.5 * params.beta())?;
    match given {
        Conditioning::Visible { v, basis } => {
            let mut reference = DenseOperator::visible_projector(n, m, v.index());
            let inv = 1.0 / (1u64 << m) as f64;
            reference = DenseOperator::new(n, m, reference.matrix().scale(inv))?;
            let out = half.sandwich(&reference).normalized()?;
            let joint = joint_distribution(&out, basis);
            let block = 1usize << m;
            Ok((0..block)
                .map(|hh| (0..1usize << n).map(|vv| joint[(vv << m) | hh]).sum())
                .collect())
        }
        Conditioning::Hidden(outcome) => {
            let reference = hidden_projector(n, m, &outcome);
            let out = half.sandwich(&reference).normalized()?;
            let block = 1usize << m;
            Ok((0..1usize << n)
                .map(|vv| (0..block).map(|k| out.get((vv << m) | k, (vv << m) | k).re).sum())
                .collect())
        }
    }
}

/// Conditional distribution by Bayes' rule on the Gibbs state:
/// `p(v, h^P) / p(v)` or `p(v, h^P) / p(h^P)`.
pub fn bayes_conditional(params: &ModelParams, given: Conditioning) -> Result<Vec<f64>> {
    check_dense(params)?;
    check_conditioning(params, &given)?;
    let (n, m) = (params.n(), params.m());
    let rho = gibbs_state(&build_hamiltonian(params)?, params.beta())?;
    match given {
        Conditioning::Visible { v, basis } => {
            let joint = joint_distribution(&rho, basis);
            let start = (v.index() as usize) << m;
            let row = &joint[start..start + (1 << m)];
            let total: f64 = row.iter().sum();
            Ok(row.iter().map(|x| x / total).collect())
        }
        Conditioning::Hidden(outcome) => {
            let joint = joint_distribution(&rho, outcome.basis);
            let hh = outcome.bits.index() as usize;
            let col: Vec<f64> = (0..1usize << n).map(|vv| joint[(vv << m) | hh]).collect();
            let total: f64 = col.iter().sum();
            Ok(col.iter().map(|x| x / total).collect())
        }
    }
}
