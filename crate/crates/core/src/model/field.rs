use super::{BitString, ModelParams, PauliBasis};
use crate::error::{Error, Result};

/// Per-hidden-unit field `Φ_j(v, h_j) = (φ^X, φ^Y, φ^Z)`.
///
/// Given the visible configuration, hidden unit `j` sees the single-qubit
/// Hamiltonian `Φ_j(v, 0) · σ`, so its Gibbs weights only depend on this vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveField {
    components: [f64; 3],
    norm: f64,
}

impl EffectiveField {
    pub fn new(components: [f64; 3]) -> Self {
        let [x, y, z] = components;
        EffectiveField {
            components,
            norm: x.hypot(y).hypot(z),
        }
    }

    pub fn zero() -> Self {
        EffectiveField {
            components: [0.0; 3],
            norm: 0.0,
        }
    }

    pub fn components(&self) -> [f64; 3] {
        self.components
    }

    pub fn component(&self, basis: PauliBasis) -> f64 {
        self.components[basis.index()]
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn scaled(&self, factor: f64) -> Self {
        EffectiveField {
            components: self.components.map(|c| c * factor),
            norm: self.norm * factor.abs(),
        }
    }

    pub fn negated(&self) -> Self {
        EffectiveField {
            components: self.components.map(|c| -c),
            norm: self.norm,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(|c| c.is_finite())
    }
}

/// `φ_j^P(v, h_j) = (-1)^{h_j} ( b_j^P + Σ_i (-1)^{v_i} w_ij^{Z,P} )` for every
/// basis in the pool; bases outside the pool contribute 0. `j` is zero-based.
pub fn effective_field(params: &ModelParams, v: &BitString, j: usize, h_j: u8) -> Result<EffectiveField> {
    params.check_visible(v)?;
    if j >= params.m() {
        return Err(Error::Dimension(format!("hidden index {j} out of range for m={}", params.m())));
    }
    if h_j > 1 {
        return Err(Error::Dimension(format!("hidden bit must be 0 or 1, got {h_j}")));
    }
    let field = field_at(params, v.index(), j);
    Ok(if h_j == 1 { field.negated() } else { field })
}

/// Unscaled `Φ_j(v, 0)` for the integer-encoded visible configuration.
pub(crate) fn field_at(params: &ModelParams, v: u64, j: usize) -> EffectiveField {
    let mut comps = [0.0; 3];
    for (p, basis) in params.pool().members().iter().enumerate() {
        let mut phi = params.b(p, j);
        for i in 0..params.n() {
            let w = params.w(p, i, j);
            if (v >> i) & 1 == 0 {
                phi += w;
            } else {
                phi -= w;
            }
        }
        comps[basis.index()] = phi;
    }
    EffectiveField::new(comps)
}

/// `D = cosh‖Φ‖ − (φ^P/‖Φ‖) sinh‖Φ‖`, the unnormalized weight of the hidden
/// outcome whose field is `field`. Equal to 1 at `Φ = 0`.
pub fn basis_weight(field: &EffectiveField, basis: PauliBasis) -> f64 {
    log_basis_weight(field, basis).exp()
}

/// Natural log of [`basis_weight`], evaluated without cancellation when the
/// field is nearly aligned with `basis`.
pub fn log_basis_weight(field: &EffectiveField, basis: PauliBasis) -> f64 {
    let p = basis.index();
    let phi = field.components[p];
    let r = field.norm;
    if r < 0.5 {
        return (r.cosh() - phi * sinhc(r)).ln();
    }
    let rest: f64 = field
        .components
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != p)
        .map(|(_, c)| c * c)
        .sum();
    // D = [e^r (r − φ) + e^{−r} (r + φ)] / 2r
    let (minus, plus) = if phi >= 0.0 {
        (rest / (r + phi), r + phi)
    } else {
        (r - phi, rest / (r - phi))
    };
    r + ((minus + plus * (-2.0 * r).exp()) / (2.0 * r)).ln()
}

/// `ln(2 cosh x)` for `x ≥ 0`.
pub(crate) fn ln_two_cosh(x: f64) -> f64 {
    x + (-2.0 * x).exp().ln_1p()
}

pub(crate) fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 + x * x / 6.0
    } else {
        x.sinh() / x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::OperatorPool;
    use proptest::prelude::*;

    fn direct(field: &EffectiveField, basis: PauliBasis) -> f64 {
        let r = field.norm();
        r.cosh() - field.component(basis) * sinhc(r)
    }

    #[test]
    fn zero_parameters_give_zero_field() {
        let params = ModelParams::zeros(3, 2, OperatorPool::semi_quantum()).unwrap();
        let v = BitString::from_bits(&[1, 0, 1]).unwrap();
        for h in 0..2 {
            let f = effective_field(&params, &v, 1, h).unwrap();
            assert_eq!(f.components(), [0.0; 3]);
        }
    }

    #[test]
    fn single_unit_substitution() {
        let params = ModelParams::from_parts(
            1,
            1,
            OperatorPool::classical(),
            1.0,
            vec![0.0],
            vec![0.5],
            vec![0.25],
        )
        .unwrap();
        let v = BitString::from_bits(&[0]).unwrap();
        let f0 = effective_field(&params, &v, 0, 0).unwrap();
        let f1 = effective_field(&params, &v, 0, 1).unwrap();
        assert_eq!(f0.component(PauliBasis::Z), 0.75);
        assert_eq!(f1.component(PauliBasis::Z), -0.75);
        assert_eq!(f0.component(PauliBasis::X), 0.0);
        assert_eq!(f0.component(PauliBasis::Y), 0.0);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let params = ModelParams::zeros(2, 1, OperatorPool::classical()).unwrap();
        let v = BitString::from_bits(&[1]).unwrap();
        assert!(matches!(effective_field(&params, &v, 0, 0), Err(Error::Dimension(_))));
        let v = BitString::from_bits(&[1, 1]).unwrap();
        assert!(effective_field(&params, &v, 1, 0).is_err());
        assert!(effective_field(&params, &v, 0, 2).is_err());
    }

    #[test]
    fn weight_limits() {
        assert_eq!(basis_weight(&EffectiveField::zero(), PauliBasis::X), 1.0);
        for t in [0.1, 0.7, 2.0, 15.0] {
            let f = EffectiveField::new([0.0, 0.0, t]);
            let d = basis_weight(&f, PauliBasis::Z);
            assert!(((d - (-t).exp()) / (-t).exp()).abs() < 1e-13, "t={t}");
            let d = basis_weight(&f.negated(), PauliBasis::Z);
            assert!(((d - t.exp()) / t.exp()).abs() < 1e-13, "t={t}");
        }
    }

    #[test]
    fn stable_form_matches_direct_form() {
        let fields = [[0.3, -1.2, 0.8], [2.0, 0.1, -0.4], [-0.9, 0.9, 0.9], [0.2, 0.1, 0.3]];
        for comps in fields {
            let f = EffectiveField::new(comps);
            for basis in PauliBasis::ALL {
                let a = basis_weight(&f, basis);
                let b = direct(&f, basis);
                assert!((a - b).abs() < 1e-13 * b.max(1.0), "{comps:?} {basis}");
            }
        }
    }

    proptest! {
        #[test]
        fn field_flips_with_hidden_bit(
            a in proptest::collection::vec(-2.0f64..2.0, 3),
            b in proptest::collection::vec(-2.0f64..2.0, 6),
            w in proptest::collection::vec(-2.0f64..2.0, 18),
            v in 0u64..8,
            j in 0usize..2,
        ) {
            let params = ModelParams::from_parts(3, 2, OperatorPool::semi_quantum(), 1.0, a, b, w).unwrap();
            let v = BitString::from_index(v, 3).unwrap();
            let f0 = effective_field(&params, &v, j, 0).unwrap();
            let f1 = effective_field(&params, &v, j, 1).unwrap();
            for basis in PauliBasis::ALL {
                prop_assert_eq!(f1.component(basis), -f0.component(basis));
            }
            prop_assert_eq!(f0.norm(), f1.norm());
            let [x, y, z] = f0.components();
            prop_assert!((f0.norm() - (x * x + y * y + z * z).sqrt()).abs() < 1e-12);
            for basis in PauliBasis::ALL {
                let d0 = basis_weight(&f0, basis);
                let d1 = basis_weight(&f1, basis);
                prop_assert!(d0 > 0.0 && d1 > 0.0);
                let expect = 2.0 * f0.norm().cosh();
                prop_assert!(((d0 + d1) - expect).abs() <= 1e-12 * expect);
            }
        }
    }
}
