//! Parameters and closed-form quantities of RBMs and semi-quantum RBMs.
//!
//! The model Hamiltonian is
//!
//! ```text
//! H = Σ_i a_i Z_i + Σ_{P ∈ pool} ( Σ_j b_j^P P_{n+j} + Σ_ij w_ij^P Z_i P_{n+j} )
//! ```
//!
//! and the model distribution is the Gibbs state `e^{-βH} / Tr e^{-βH}`.
//! Bits map to spins as `s = (-1)^bit`, so bit 0 is the `+1` eigenstate of
//! every Pauli basis. A pool of `{Z}` is the classical RBM.

mod checkpoint;
mod field;
mod marginal;

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use checkpoint::{checkpoint_string, parse_checkpoint, read_checkpoint, write_checkpoint, CHECKPOINT_HEADER};
pub use field::{basis_weight, effective_field, log_basis_weight, EffectiveField};
pub use marginal::{
    exact_gradient, hidden_conditional, logistic_hidden_conditional, nll, visible_conditional_log_weights,
    visible_conditional_weights, visible_marginal, FieldTable, VisibleDistribution,
};

/// Largest visible register for which distributions over `2^n` are enumerated.
pub const MAX_ENUMERATED_VISIBLE: usize = 24;

/// Single-qubit Pauli basis carried by hidden units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PauliBasis {
    X,
    Y,
    Z,
}

impl PauliBasis {
    pub const ALL: [PauliBasis; 3] = [PauliBasis::X, PauliBasis::Y, PauliBasis::Z];

    pub fn index(self) -> usize {
        match self {
            PauliBasis::X => 0,
            PauliBasis::Y => 1,
            PauliBasis::Z => 2,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "X" | "x" => Ok(PauliBasis::X),
            "Y" | "y" => Ok(PauliBasis::Y),
            "Z" | "z" => Ok(PauliBasis::Z),
            other => Err(Error::parse("pauli basis", format!("unknown basis `{other}`"))),
        }
    }
}

impl fmt::Display for PauliBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            PauliBasis::X => "X",
            PauliBasis::Y => "Y",
            PauliBasis::Z => "Z",
        };
        f.write_str(c)
    }
}

/// Hidden-unit operator pool: `{Z}` for an RBM, `{X, Y, Z}` for an sqRBM.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<PauliBasis>", into = "Vec<PauliBasis>")]
pub struct OperatorPool {
    members: Vec<PauliBasis>,
}

impl OperatorPool {
    pub fn classical() -> Self {
        OperatorPool {
            members: vec![PauliBasis::Z],
        }
    }

    pub fn semi_quantum() -> Self {
        OperatorPool {
            members: PauliBasis::ALL.to_vec(),
        }
    }

    /// Build a pool from arbitrary members. Only `{Z}` and `{X, Y, Z}` are
    /// accepted; members are sorted into the fixed `X < Y < Z` order.
    pub fn new(mut members: Vec<PauliBasis>) -> Result<Self> {
        members.sort();
        let before = members.len();
        members.dedup();
        if members.len() != before {
            return Err(Error::Config("operator pool has duplicate members".into()));
        }
        match members.as_slice() {
            [PauliBasis::Z] | [PauliBasis::X, PauliBasis::Y, PauliBasis::Z] => Ok(OperatorPool { members }),
            _ => Err(Error::Config(format!(
                "operator pool must be {{Z}} or {{X,Y,Z}}, got {members:?}"
            ))),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "rbm" | "classical" => Ok(Self::classical()),
            "sqrbm" | "semi-quantum" => Ok(Self::semi_quantum()),
            list => {
                let members = list
                    .split(',')
                    .filter(|t| !t.trim().is_empty())
                    .map(PauliBasis::parse)
                    .collect::<Result<Vec<_>>>()?;
                Self::new(members)
            }
        }
    }

    pub fn members(&self) -> &[PauliBasis] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, basis: PauliBasis) -> bool {
        self.members.contains(&basis)
    }

    /// Row of `basis` in the `b` and `w` parameter blocks.
    pub fn position(&self, basis: PauliBasis) -> Option<usize> {
        self.members.iter().position(|&p| p == basis)
    }

    pub fn is_classical(&self) -> bool {
        self.members == [PauliBasis::Z]
    }
}

impl TryFrom<Vec<PauliBasis>> for OperatorPool {
    type Error = Error;

    fn try_from(members: Vec<PauliBasis>) -> Result<Self> {
        OperatorPool::new(members)
    }
}

impl From<OperatorPool> for Vec<PauliBasis> {
    fn from(pool: OperatorPool) -> Self {
        pool.members
    }
}

impl fmt::Display for OperatorPool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self.members.iter().map(|p| p.to_string()).collect();
        f.write_str(&names.join(","))
    }
}

/// Packed bitstring of at most 64 bits. Bit `i` is bit `i` of the integer
/// encoding (index 0 is the least significant bit).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    code: u64,
    len: u8,
}

impl BitString {
    pub const MAX_LEN: usize = 64;

    pub fn zeros(len: usize) -> Self {
        assert!(len <= Self::MAX_LEN, "bitstring longer than 64 bits");
        BitString { code: 0, len: len as u8 }
    }

    pub fn from_index(index: u64, len: usize) -> Result<Self> {
        if len > Self::MAX_LEN {
            return Err(Error::Capacity(format!("bitstring of length {len} exceeds 64")));
        }
        if len < 64 && index >> len != 0 {
            return Err(Error::Dimension(format!(
                "index {index} does not fit in {len} bits"
            )));
        }
        Ok(BitString {
            code: index,
            len: len as u8,
        })
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if bits.len() > Self::MAX_LEN {
            return Err(Error::Capacity(format!(
                "bitstring of length {} exceeds 64",
                bits.len()
            )));
        }
        let mut code = 0u64;
        for (i, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => code |= 1 << i,
                other => {
                    return Err(Error::Dimension(format!("bit {i} has value {other}, expected 0 or 1")))
                }
            }
        }
        Ok(BitString {
            code,
            len: bits.len() as u8,
        })
    }

    pub(crate) fn from_code(code: u64, len: usize) -> Self {
        debug_assert!(len <= 64 && (len == 64 || code >> len == 0));
        BitString { code, len: len as u8 }
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn index(&self) -> u64 {
        self.code
    }

    pub fn bit(&self, i: usize) -> u8 {
        debug_assert!(i < self.len());
        ((self.code >> i) & 1) as u8
    }

    /// `(-1)^bit` for position `i`.
    pub fn spin(&self, i: usize) -> f64 {
        1.0 - 2.0 * self.bit(i) as f64
    }

    pub fn bits(&self) -> Vec<u8> {
        (0..self.len()).map(|i| self.bit(i)).collect()
    }

    /// Text form: `bit 0` first.
    pub fn to_text(&self) -> String {
        (0..self.len()).map(|i| if self.bit(i) == 1 { '1' } else { '0' }).collect()
    }

    pub fn parse(s: &str) -> Result<Self> {
        let bits = s
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(0u8),
                '1' => Ok(1u8),
                other => Err(Error::parse("bitstring", format!("unexpected character `{other}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_bits(&bits)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Hidden measurement outcome `h` in Pauli basis `P`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HiddenOutcome {
    pub bits: BitString,
    pub basis: PauliBasis,
}

impl HiddenOutcome {
    pub fn new(bits: BitString, basis: PauliBasis) -> Self {
        HiddenOutcome { bits, basis }
    }
}

/// All parameters of an RBM or sqRBM.
///
/// Layout: `b` is `|pool| × m` and `w` is `|pool| × n × m`, both row-major with
/// the pool position as the slowest index. The flat parameter vector used by
/// gradients and the optimizer is `a ++ b ++ w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    n: usize,
    m: usize,
    pool: OperatorPool,
    beta: f64,
    a: Vec<f64>,
    b: Vec<f64>,
    w: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(n: usize, m: usize, pool: OperatorPool) -> Result<Self> {
        let k = pool.len();
        Self::from_parts(n, m, pool, 1.0, vec![0.0; n], vec![0.0; k * m], vec![0.0; k * n * m])
    }

    pub fn from_parts(
        n: usize,
        m: usize,
        pool: OperatorPool,
        beta: f64,
        a: Vec<f64>,
        b: Vec<f64>,
        w: Vec<f64>,
    ) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::Dimension(format!("need n ≥ 1 and m ≥ 1, got n={n}, m={m}")));
        }
        if n > BitString::MAX_LEN || m > BitString::MAX_LEN {
            return Err(Error::Capacity(format!("n={n}, m={m} exceed 64 units")));
        }
        let k = pool.len();
        if a.len() != n || b.len() != k * m || w.len() != k * n * m {
            return Err(Error::Dimension(format!(
                "parameter lengths a={}, b={}, w={} do not match n={n}, m={m}, |pool|={k}",
                a.len(),
                b.len(),
                w.len()
            )));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Contract(format!("inverse temperature must be positive, got {beta}")));
        }
        if a.iter().chain(&b).chain(&w).any(|x| !x.is_finite()) {
            return Err(Error::Contract("parameters must be finite".into()));
        }
        Ok(ModelParams { n, m, pool, beta, a, b, w })
    }

    /// Weights drawn from `N(0, std)`, zero biases.
    pub fn random_weights<R: Rng + ?Sized>(
        n: usize,
        m: usize,
        pool: OperatorPool,
        std: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut params = Self::zeros(n, m, pool)?;
        if std > 0.0 {
            let normal = Normal::new(0.0, std).map_err(|e| Error::Config(e.to_string()))?;
            for x in params.w.iter_mut() {
                *x = normal.sample(rng);
            }
        }
        Ok(params)
    }

    /// Every entry uniform in `[-scale, scale]`. Used by tests and validation.
    pub fn random_uniform<R: Rng + ?Sized>(
        n: usize,
        m: usize,
        pool: OperatorPool,
        scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut params = Self::zeros(n, m, pool)?;
        for x in params.a.iter_mut().chain(params.b.iter_mut()).chain(params.w.iter_mut()) {
            *x = rng.random_range(-scale..=scale);
        }
        Ok(params)
    }

    /// Set visible biases so that, with zero couplings, `p(v_i = 1)` equals
    /// `means[i]`. Means are clipped to `[1e-6, 1 - 1e-6]`.
    pub fn set_visible_bias_from_means(&mut self, means: &[f64]) -> Result<()> {
        if means.len() != self.n {
            return Err(Error::Dimension(format!(
                "{} means for {} visible units",
                means.len(),
                self.n
            )));
        }
        // p(v_i = 1) = σ(2β a_i) when w = 0
        for (a, &mu) in self.a.iter_mut().zip(means) {
            let mu = mu.clamp(1e-6, 1.0 - 1e-6);
            *a = (mu / (1.0 - mu)).ln() / (2.0 * self.beta);
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn pool(&self) -> &OperatorPool {
        &self.pool
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Contract(format!("inverse temperature must be positive, got {beta}")));
        }
        self.beta = beta;
        Ok(self)
    }

    pub fn visible_bias(&self) -> &[f64] {
        &self.a
    }

    pub fn visible_bias_mut(&mut self) -> &mut [f64] {
        &mut self.a
    }

    pub fn hidden_bias(&self) -> &[f64] {
        &self.b
    }

    pub fn hidden_bias_mut(&mut self) -> &mut [f64] {
        &mut self.b
    }

    pub fn couplings(&self) -> &[f64] {
        &self.w
    }

    pub fn couplings_mut(&mut self) -> &mut [f64] {
        &mut self.w
    }

    /// `b_j^P` for pool position `p`.
    #[inline]
    pub fn b(&self, p: usize, j: usize) -> f64 {
        self.b[p * self.m + j]
    }

    /// `w_ij^{Z,P}` for pool position `p`.
    #[inline]
    pub fn w(&self, p: usize, i: usize, j: usize) -> f64 {
        self.w[(p * self.n + i) * self.m + j]
    }

    pub fn b_index(&self, p: usize, j: usize) -> usize {
        self.n + p * self.m + j
    }

    pub fn w_index(&self, p: usize, i: usize, j: usize) -> usize {
        self.n + self.pool.len() * self.m + (p * self.n + i) * self.m + j
    }

    pub fn num_params(&self) -> usize {
        self.a.len() + self.b.len() + self.w.len()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut theta = Vec::with_capacity(self.num_params());
        theta.extend_from_slice(&self.a);
        theta.extend_from_slice(&self.b);
        theta.extend_from_slice(&self.w);
        theta
    }

    pub fn set_flat(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.num_params() {
            return Err(Error::Dimension(format!(
                "flat vector of length {} for {} parameters",
                theta.len(),
                self.num_params()
            )));
        }
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::Contract("parameters must be finite".into()));
        }
        let (a, rest) = theta.split_at(self.a.len());
        let (b, w) = rest.split_at(self.b.len());
        self.a.copy_from_slice(a);
        self.b.copy_from_slice(b);
        self.w.copy_from_slice(w);
        Ok(())
    }

    pub(crate) fn check_visible(&self, v: &BitString) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::Dimension(format!(
                "visible bitstring has length {}, model has n={}",
                v.len(),
                self.n
            )));
        }
        Ok(())
    }

    pub(crate) fn check_hidden(&self, h: &HiddenOutcome) -> Result<usize> {
        if h.bits.len() != self.m {
            return Err(Error::Dimension(format!(
                "hidden bitstring has length {}, model has m={}",
                h.bits.len(),
                self.m
            )));
        }
        self.pool_position(h.basis)
    }

    pub(crate) fn pool_position(&self, basis: PauliBasis) -> Result<usize> {
        self.pool.position(basis).ok_or(Error::InvalidBasis(basis))
    }
}
