//! Dense brute-force reference for small models.
//!
//! Everything here works on explicit `2^(n+m)`-dimensional complex matrices
//! and is only used to check the closed forms and to drive validation. The
//! dense index of the basis state `|v⟩ ⊗ |h⟩` is `(v << m) | h`, so the
//! visible register occupies the high bits.

mod channel;
mod likelihood;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{ModelParams, PauliBasis};

pub use channel::{bayes_conditional, channel_conditional, joint_distribution, Conditioning};
pub use likelihood::{dense_visible_marginal, exact_kl, exact_nll, exact_nll_gradient};

/// Largest `n + m` the dense oracle accepts.
pub const MAX_DENSE_QUBITS: usize = 12;

/// Tolerance for the Hermiticity contract on inputs.
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// A dense operator on the joint visible–hidden register.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    n: usize,
    m: usize,
    matrix: DMatrix<Complex64>,
}

impl DenseOperator {
    pub fn new(n: usize, m: usize, matrix: DMatrix<Complex64>) -> Result<Self> {
        let dim = 1usize << (n + m);
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::Dimension(format!(
                "{}×{} matrix for n+m={} qubits",
                matrix.nrows(),
                matrix.ncols(),
                n + m
            )));
        }
        Ok(DenseOperator { n, m, matrix })
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        let dim = 1usize << (n + m);
        DenseOperator {
            n,
            m,
            matrix: DMatrix::zeros(dim, dim),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[(row, col)]
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// Largest entry of `|A − A†|`.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for r in 0..d {
            for c in r..d {
                worst = worst.max((self.matrix[(r, c)] - self.matrix[(c, r)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    fn require_hermitian(&self) -> Result<()> {
        let err = self.hermiticity_error();
        if err > HERMITIAN_TOLERANCE {
            return Err(Error::Contract(format!("operator is not Hermitian (error {err:e})")));
        }
        Ok(())
    }

    /// Real eigenvalues in ascending order; requires a Hermitian operator.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        self.require_hermitian()?;
        let mut vals: Vec<f64> = SymmetricEigen::new(self.matrix.clone()).eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| a.total_cmp(b));
        Ok(vals)
    }

    /// `f(A)` through the Hermitian eigendecomposition. `f` receives the
    /// eigenvalue and the smallest eigenvalue.
    fn spectral_map(&self, f: impl Fn(f64, f64) -> f64) -> Result<DenseOperator> {
        self.require_hermitian()?;
        let eig = SymmetricEigen::new(self.matrix.clone());
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let vecs = &eig.eigenvectors;
        let mut scaled = vecs.clone();
        for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
            let fk = f(lambda, min);
            scaled.column_mut(k).scale_mut(fk);
        }
        let mut out = scaled * vecs.adjoint();
        hermitize(&mut out);
        Ok(DenseOperator {
            n: self.n,
            m: self.m,
            matrix: out,
        })
    }

    /// `X ↦ self · X · self`.
    pub fn sandwich(&self, x: &DenseOperator) -> DenseOperator {
        let mut out = &self.matrix * &x.matrix * &self.matrix;
        hermitize(&mut out);
        DenseOperator {
            n: self.n,
            m: self.m,
            matrix: out,
        }
    }

    pub fn normalized(&self) -> Result<DenseOperator> {
        let tr = self.trace();
        if !(tr.re.is_finite() && tr.re > 0.0) {
            return Err(Error::Contract(format!("cannot normalize operator with trace {tr}")));
        }
        Ok(DenseOperator {
            n: self.n,
            m: self.m,
            matrix: self.matrix.unscale(tr.re),
        })
    }

    /// Projector onto the visible computational state `v`, identity on hidden.
    pub fn visible_projector(n: usize, m: usize, v: u64) -> DenseOperator {
        let mut op = DenseOperator::zeros(n, m);
        let block = 1usize << m;
        let start = (v as usize) << m;
        for x in start..start + block {
            op.matrix[(x, x)] = Complex64::new(1.0, 0.0);
        }
        op
    }
}

fn hermitize(a: &mut DMatrix<Complex64>) {
    let d = a.nrows();
    for r in 0..d {
        a[(r, r)].im = 0.0;
        for c in r + 1..d {
            let avg = 0.5 * (a[(r, c)] + a[(c, r)].conj());
            a[(r, c)] = avg;
            a[(c, r)] = avg.conj();
        }
    }
}

/// One Hamiltonian term `θ_i H_i`: a Pauli word over `n + m` qubits (visible
/// first) and the index of its coefficient in the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HamiltonianTerm {
    pub param_index: usize,
    pub letters: Vec<Option<PauliBasis>>,
}

impl HamiltonianTerm {
    pub fn weight(&self) -> usize {
        self.letters.iter().filter(|l| l.is_some()).count()
    }

    /// `H_i |x⟩ = phase · |x ⊕ flip⟩` for dense index `x`.
    pub(crate) fn act(&self, n: usize, m: usize, x: usize) -> (usize, Complex64) {
        let mut y = x;
        let mut phase = Complex64::new(1.0, 0.0);
        for (q, letter) in self.letters.iter().enumerate() {
            let Some(p) = letter else { continue };
            let bit_pos = if q < n { m + q } else { q - n };
            let bit = (x >> bit_pos) & 1;
            match p {
                PauliBasis::X => y ^= 1 << bit_pos,
                PauliBasis::Y => {
                    y ^= 1 << bit_pos;
                    phase *= if bit == 0 {
                        Complex64::new(0.0, 1.0)
                    } else {
                        Complex64::new(0.0, -1.0)
                    };
                }
                PauliBasis::Z => {
                    if bit == 1 {
                        phase = -phase;
                    }
                }
            }
        }
        (y, phase)
    }
}

/// Terms of the model Hamiltonian in flat parameter order `a ++ b ++ w`.
pub fn hamiltonian_terms(params: &ModelParams) -> Vec<HamiltonianTerm> {
    let (n, m) = (params.n(), params.m());
    let word = || vec![None; n + m];
    let mut terms = Vec::with_capacity(params.num_params());
    for i in 0..n {
        let mut letters = word();
        letters[i] = Some(PauliBasis::Z);
        terms.push(HamiltonianTerm { param_index: i, letters });
    }
    for (p, &basis) in params.pool().members().iter().enumerate() {
        for j in 0..m {
            let mut letters = word();
            letters[n + j] = Some(basis);
            terms.push(HamiltonianTerm {
                param_index: params.b_index(p, j),
                letters,
            });
        }
    }
    for (p, &basis) in params.pool().members().iter().enumerate() {
        for i in 0..n {
            for j in 0..m {
                let mut letters = word();
                letters[i] = Some(PauliBasis::Z);
                letters[n + j] = Some(basis);
                terms.push(HamiltonianTerm {
                    param_index: params.w_index(p, i, j),
                    letters,
                });
            }
        }
    }
    terms
}

pub(crate) fn check_dense(params: &ModelParams) -> Result<()> {
    let q = params.n() + params.m();
    if q > MAX_DENSE_QUBITS {
        return Err(Error::Capacity(format!(
            "dense oracle limited to n+m ≤ {MAX_DENSE_QUBITS}, got {q}"
        )));
    }
    Ok(())
}

/// `H = Σ_i θ_i H_i` as a dense matrix.
pub fn build_hamiltonian(params: &ModelParams) -> Result<DenseOperator> {
    check_dense(params)?;
    let (n, m) = (params.n(), params.m());
    let theta = params.to_flat();
    let mut h = DenseOperator::zeros(n, m);
    let dim = h.dim();
    for term in hamiltonian_terms(params) {
        let coeff = theta[term.param_index];
        if coeff == 0.0 {
            continue;
        }
        for x in 0..dim {
            let (y, phase) = term.act(n, m, x);
            h.matrix[(y, x)] += phase * coeff;
        }
    }
    Ok(h)
}

/// `ρ = e^{−βH} / Tr e^{−βH}`, with the spectrum shifted by its minimum before
/// exponentiation.
pub fn gibbs_state(h: &DenseOperator, beta: f64) -> Result<DenseOperator> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::Contract(format!("inverse temperature must be positive, got {beta}")));
    }
    h.spectral_map(|lambda, min| (-beta * (lambda - min)).exp())?.normalized()
}

/// `e^{−τ(H − λ_min)}`. The shift only rescales, which every consumer
/// normalizes away.
pub fn imaginary_time_evolution(h: &DenseOperator, tau: f64) -> Result<DenseOperator> {
    h.spectral_map(|lambda, min| (-tau * (lambda - min)).exp())
}

/// Write the eigenvalues of `op`, one per line, for inspection.
pub fn write_spectrum(op: &DenseOperator, path: &Path) -> Result<()> {
    let mut text = String::new();
    for lambda in op.eigenvalues()? {
        let _ = writeln!(text, "{lambda:.17e}");
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
