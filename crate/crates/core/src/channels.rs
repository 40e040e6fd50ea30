//! Depolarizing noise and Choi-matrix representation of quantum operations.
//!
//! Choi convention: `J = Σ_ij |i><j| ⊗ E(|i><j|)` with the input factors
//! first and an unnormalized maximally entangled pairing. A map is recovered
//! as `E(ρ) = tr_in[(ρᵀ ⊗ I) J]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocols::LoccProtocol;
use crate::tensor::{Operator, SubsystemSelector, C64};

/// Slack allowed on the CP and trace-non-increasing checks.
pub const CHOI_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseModel {
    Global { gamma: f64 },
    Bilocal { gamma1: f64, gamma2: f64 },
}

fn check_unit(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            range: "[0, 1]",
        })
    }
}

impl NoiseModel {
    pub fn global(gamma: f64) -> Result<Self> {
        check_unit("gamma", gamma)?;
        Ok(Self::Global { gamma })
    }

    pub fn bilocal(gamma1: f64, gamma2: f64) -> Result<Self> {
        check_unit("gamma1", gamma1)?;
        check_unit("gamma2", gamma2)?;
        Ok(Self::Bilocal { gamma1, gamma2 })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Global { gamma } => check_unit("gamma", gamma),
            Self::Bilocal { gamma1, gamma2 } => {
                check_unit("gamma1", gamma1)?;
                check_unit("gamma2", gamma2)
            }
        }
    }

    /// Noise level of the equivalent global channel on maximally entangled
    /// inputs.
    pub fn effective_gamma(&self) -> f64 {
        match *self {
            Self::Global { gamma } => gamma,
            Self::Bilocal { gamma1, gamma2 } => gamma_effective(gamma1, gamma2),
        }
    }

    /// Apply to a two-qubit state.
    pub fn apply(&self, rho_ab: &Operator) -> Result<Operator> {
        match *self {
            Self::Global { gamma } => depolarize_global(rho_ab, gamma),
            Self::Bilocal { gamma1, gamma2 } => depolarize_bilocal(rho_ab, gamma1, gamma2),
        }
    }

    /// `N(ψ) ⊗ N(ψ)` with qubit order A₁B₁A₂B₂.
    pub fn noisy_pair(&self, psi: &Operator) -> Result<Operator> {
        let noisy = self.apply(psi)?;
        noisy.kron(&noisy)
    }
}

/// `(1 − γ) ρ + γ tr(ρ) I/d`. Linear, so it also acts on non-density inputs.
pub fn depolarize_global(rho: &Operator, gamma: f64) -> Result<Operator> {
    check_unit("gamma", gamma)?;
    let mixed = Operator::maximally_mixed(rho.dims().to_vec()).scale_complex(rho.trace());
    Ok(&rho.scale(1.0 - gamma) + &mixed.scale(gamma))
}

/// Global depolarizing acting jointly on the selected factors of a larger
/// operator, identity on the rest.
pub fn depolarize_subsystems(op: &Operator, selector: &SubsystemSelector, gamma: f64) -> Result<Operator> {
    check_unit("gamma", gamma)?;
    if selector.is_empty() {
        return Ok(op.clone());
    }
    let n = op.dims().len();
    let rest = selector.complement(n);
    let sel_dims: Vec<usize> = selector.indices().iter().map(|&k| op.dims()[k]).collect();
    let mixed = Operator::maximally_mixed(sel_dims);
    let replaced = if rest.is_empty() {
        mixed.scale_complex(op.trace())
    } else {
        let reduced = op.partial_trace(selector)?;
        // factors now ordered (selected..., rest...); move them back
        let current: Vec<usize> = selector.indices().iter().chain(rest.indices()).copied().collect();
        let mut order = vec![0; n];
        for (pos, &orig) in current.iter().enumerate() {
            order[orig] = pos;
        }
        mixed.kron(&reduced)?.permute(&order)?
    };
    Ok(&op.scale(1.0 - gamma) + &replaced.scale(gamma))
}

/// Single-qubit depolarizing on each factor of a two-qubit operator.
pub fn depolarize_bilocal(rho_ab: &Operator, gamma1: f64, gamma2: f64) -> Result<Operator> {
    check_unit("gamma1", gamma1)?;
    check_unit("gamma2", gamma2)?;
    if rho_ab.dims() != [2, 2] {
        return Err(Error::dims([2, 2], rho_ab.dims()));
    }
    let half = Operator::maximally_mixed(vec![2]);
    let rho_a = rho_ab.partial_trace(&SubsystemSelector::single(1))?;
    let rho_b = rho_ab.partial_trace(&SubsystemSelector::single(0))?;
    let terms = [
        ((1.0 - gamma1) * (1.0 - gamma2), rho_ab.clone()),
        (gamma1 * (1.0 - gamma2), half.kron(&rho_b)?),
        (gamma2 * (1.0 - gamma1), rho_a.kron(&half)?),
        (
            gamma1 * gamma2,
            Operator::maximally_mixed(vec![2, 2]).scale_complex(rho_ab.trace()),
        ),
    ];
    let mut out = Operator::zeros(vec![2, 2]);
    for (w, t) in &terms {
        out += &t.scale(*w);
    }
    Ok(out)
}

/// `γ′ = 1 − (1 − γ₁)(1 − γ₂)`.
pub fn gamma_effective(gamma1: f64, gamma2: f64) -> f64 {
    1.0 - (1.0 - gamma1) * (1.0 - gamma2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChoiMatrix {
    op: Operator,
    input: SubsystemSelector,
    output: SubsystemSelector,
}

impl ChoiMatrix {
    /// Wrap `op` whose first `n_input` factors are the input. Checks the CP
    /// and trace-non-increasing invariants.
    pub fn new(op: Operator, n_input: usize) -> Result<Self> {
        let choi = Self::new_unchecked(op, n_input)?;
        choi.check()?;
        Ok(choi)
    }

    pub(crate) fn new_unchecked(op: Operator, n_input: usize) -> Result<Self> {
        let n = op.dims().len();
        if n_input == 0 || n_input >= n {
            return Err(Error::Selector(format!(
                "{n_input} input factors out of {n} leaves no input or output"
            )));
        }
        Ok(Self {
            op,
            input: SubsystemSelector::range(0..n_input),
            output: SubsystemSelector::range(n_input..n),
        })
    }

    /// Choi matrix of a linear map given by its action on matrix units.
    pub fn from_map(
        input_dims: &[usize],
        output_dims: &[usize],
        map: impl Fn(&Operator) -> Result<Operator>,
    ) -> Result<Self> {
        let d_in: usize = input_dims.iter().product();
        let mut dims = input_dims.to_vec();
        dims.extend_from_slice(output_dims);
        let mut op = Operator::zeros(dims);
        let d_out: usize = output_dims.iter().product();
        for i in 0..d_in {
            for j in 0..d_in {
                let image = map(&Operator::matrix_unit(input_dims.to_vec(), i, j))?;
                if image.dim() != d_out {
                    return Err(Error::dims(output_dims, image.dims()));
                }
                for r in 0..d_out {
                    for c in 0..d_out {
                        op.set(i * d_out + r, j * d_out + c, image.get(r, c));
                    }
                }
            }
        }
        Self::new(op, input_dims.len())
    }

    /// Choi matrix `Σ_k |K_k⟩⟩⟨⟨K_k|` of a Kraus family, each `K_k` of shape
    /// `d_out × d_in`.
    pub fn from_kraus(
        input_dims: &[usize],
        output_dims: &[usize],
        kraus: &[nalgebra::DMatrix<C64>],
    ) -> Result<Self> {
        let d_in: usize = input_dims.iter().product();
        let d_out: usize = output_dims.iter().product();
        let mut dims = input_dims.to_vec();
        dims.extend_from_slice(output_dims);
        let n = d_in * d_out;
        let mut data = nalgebra::DMatrix::<C64>::zeros(n, n);
        for k in kraus {
            if k.nrows() != d_out || k.ncols() != d_in {
                return Err(Error::dims((d_out, d_in), (k.nrows(), k.ncols())));
            }
            // |K>> = Σ_i |i> ⊗ K|i>
            let v = nalgebra::DVector::from_fn(n, |idx, _| k[(idx % d_out, idx / d_out)]);
            data += &v * v.adjoint();
        }
        Self::new(Operator::new(data, dims)?, input_dims.len())
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn into_op(self) -> Operator {
        self.op
    }

    pub fn input_selector(&self) -> &SubsystemSelector {
        &self.input
    }

    pub fn output_selector(&self) -> &SubsystemSelector {
        &self.output
    }

    pub fn input_dims(&self) -> Vec<usize> {
        self.input.indices().iter().map(|&k| self.op.dims()[k]).collect()
    }

    pub fn output_dims(&self) -> Vec<usize> {
        self.output.indices().iter().map(|&k| self.op.dims()[k]).collect()
    }

    /// `I − tr_out J`, which must be PSD for a trace-non-increasing map.
    pub fn trace_deficit(&self) -> Result<Operator> {
        let reduced = self.op.partial_trace(&self.output)?;
        Ok(&Operator::identity(reduced.dims().to_vec()) - &reduced)
    }

    fn check(&self) -> Result<()> {
        let min = self.op.min_eigenvalue()?;
        if min < -CHOI_TOL {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
        let deficit = self.trace_deficit()?.min_eigenvalue()?;
        if deficit < -CHOI_TOL {
            return Err(Error::OutOfRange {
                name: "min eigenvalue of I - tr_out J",
                value: deficit,
                range: "[0, inf)",
            });
        }
        Ok(())
    }
}

/// `tr_in[(ρᵀ ⊗ I) J]`.
pub fn apply_choi(choi: &ChoiMatrix, rho_in: &Operator) -> Result<Operator> {
    let d_in: usize = choi.input_dims().iter().product();
    if rho_in.dim() != d_in {
        return Err(Error::dims(choi.input_dims(), rho_in.dims()));
    }
    let d_out: usize = choi.output_dims().iter().product();
    let j = choi.op.matrix();
    Operator::from_fn(choi.output_dims(), |r, c| {
        let mut acc = C64::new(0.0, 0.0);
        for a in 0..d_in {
            for b in 0..d_in {
                // (ρᵀ)_{ba} = ρ_{ab}
                acc += rho_in.get(a, b) * j[(a * d_out + r, b * d_out + c)];
            }
        }
        acc
    })
}

/// Choi matrix of a two-copy protocol: input A₁B₁A₂B₂, output A′B′.
pub fn choi_of_protocol(protocol: &LoccProtocol) -> Result<ChoiMatrix> {
    ChoiMatrix::from_kraus(&[2, 2, 2, 2], &[2, 2], &protocol.kraus_operators()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{fidelity_pure, random};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn phi_plus() -> Operator {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Operator::projector_real(&[s, 0.0, 0.0, s], vec![2, 2]).unwrap()
    }

    #[test]
    fn global_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let rho = random::density(&[2, 2], 4, &mut rng);
        assert!(depolarize_global(&rho, 0.0).unwrap().max_abs_diff(&rho) < 1e-15);
        let mixed = depolarize_global(&rho, 1.0).unwrap();
        assert!(mixed.max_abs_diff(&Operator::maximally_mixed(vec![2, 2])) < 1e-15);
        assert!(depolarize_global(&rho, 1.5).is_err());
        assert!(depolarize_global(&rho, -0.1).is_err());
    }

    #[test]
    fn global_bell_fidelity() {
        let phi = phi_plus();
        let noisy = depolarize_global(&phi, 0.36).unwrap();
        assert!((fidelity_pure(&phi, &noisy).unwrap() - 0.73).abs() < 1e-12);
        let ev = depolarize_global(&phi, 0.4).unwrap().eigenvalues().unwrap();
        for (a, b) in ev.iter().zip([0.7, 0.1, 0.1, 0.1]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn bilocal_examples() {
        let phi = phi_plus();
        let bi = depolarize_bilocal(&phi, 0.2, 0.2).unwrap();
        let gl = depolarize_global(&phi, 0.36).unwrap();
        assert!(bi.max_abs_diff(&gl) < 1e-12);

        let zero = Operator::projector_real(&[1.0, 0.0], vec![2]).unwrap();
        let zz = zero.kron(&zero).unwrap();
        let out = depolarize_bilocal(&zz, 0.4, 0.0).unwrap();
        let expected = &zz.scale(0.6) + &Operator::maximally_mixed(vec![2]).kron(&zero).unwrap().scale(0.4);
        assert!(out.max_abs_diff(&expected) < 1e-15);
        assert!(depolarize_bilocal(&zz, 0.0, 0.0).unwrap().max_abs_diff(&zz) == 0.0);
        assert!(depolarize_bilocal(&Operator::identity(vec![4]), 0.1, 0.1).is_err());
    }

    #[test]
    fn bilocal_equals_composed_single_qubit_maps() {
        // oracle: apply one-qubit depolarizing on each factor through a Choi matrix
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rho = random::density(&[2, 2], 4, &mut rng);
        let (g1, g2) = (0.3, 0.15);
        let one = |g: f64| ChoiMatrix::from_map(&[2], &[2], |x| depolarize_global(x, g)).unwrap();
        let (c1, c2) = (one(g1), one(g2));
        let both = ChoiMatrix::new(
            c1.op().kron(c2.op()).unwrap().permute(&[0, 2, 1, 3]).unwrap(),
            2,
        )
        .unwrap();
        let expected = apply_choi(&both, &rho).unwrap();
        let got = depolarize_bilocal(&rho, g1, g2).unwrap();
        assert!(got.max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn subsystem_depolarizing_matches_product_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let a = random::density(&[2, 2], 4, &mut rng);
        let b = random::density(&[2], 2, &mut rng);
        let c = random::density(&[2, 2], 4, &mut rng);
        let abc = Operator::kron_all(&[&a, &b, &c]).unwrap();
        let sel = SubsystemSelector::new(vec![3, 4]).unwrap();
        let got = depolarize_subsystems(&abc, &sel, 0.3).unwrap();
        let expected = Operator::kron_all(&[&a, &b, &depolarize_global(&c, 0.3).unwrap()]).unwrap();
        assert!(got.max_abs_diff(&expected) < 1e-14);
        let sel = SubsystemSelector::new(vec![0, 1]).unwrap();
        let got = depolarize_subsystems(&abc, &sel, 0.7).unwrap();
        let expected = Operator::kron_all(&[&depolarize_global(&a, 0.7).unwrap(), &b, &c]).unwrap();
        assert!(got.max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn gamma_effective_examples() {
        assert_eq!(gamma_effective(0.0, 0.0), 0.0);
        assert!((gamma_effective(0.2, 0.2) - 0.36).abs() < 1e-15);
        assert_eq!(gamma_effective(1.0, 0.3), 1.0);
    }

    #[test]
    fn identity_choi() {
        let id = ChoiMatrix::from_map(&[2, 2], &[2, 2], |x| Ok(x.clone())).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let rho = random::density(&[2, 2], 3, &mut rng);
        assert!(apply_choi(&id, &rho).unwrap().max_abs_diff(&rho) < 1e-14);
    }

    #[test]
    fn depolarizing_choi_matches_affine_form() {
        let gamma = 0.27;
        let choi = ChoiMatrix::from_map(&[2, 2], &[2, 2], |x| depolarize_global(x, gamma)).unwrap();
        // (1-γ)|Φ><Φ| + γ I⊗I/d with unnormalized Φ
        let mut phi = vec![0.0; 16];
        for i in 0..4 {
            phi[i * 4 + i] = 1.0;
        }
        let expected = &Operator::projector_real(&phi, vec![2, 2, 2, 2]).unwrap().scale(1.0 - gamma)
            + &Operator::identity(vec![2, 2, 2, 2]).scale(gamma / 4.0);
        assert!(choi.op().max_abs_diff(&expected) < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let psi = random::pure_state(&[2, 2], &mut rng);
        let via_choi = apply_choi(&choi, &psi).unwrap();
        assert!(via_choi.max_abs_diff(&depolarize_global(&psi, gamma).unwrap()) < 1e-14);
    }

    #[test]
    fn choi_rejects_non_cp_and_increasing() {
        let transpose = ChoiMatrix::from_map(&[2], &[2], |x| Ok(x.transpose()));
        assert!(matches!(transpose, Err(Error::NotPsd { .. })));
        let doubled = ChoiMatrix::from_map(&[2], &[2], |x| Ok(x.scale(2.0)));
        assert!(doubled.is_err());
    }

    #[test]
    fn depolarizing_commutes_with_local_unitaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let rho = random::density(&[2, 2], 4, &mut rng);
        let u = random::su2(&mut rng).kron(&random::su2(&mut rng)).unwrap();
        for model in [NoiseModel::global(0.3).unwrap(), NoiseModel::bilocal(0.1, 0.25).unwrap()] {
            let a = model.apply(&rho.conjugate_by(&u).unwrap()).unwrap();
            let b = model.apply(&rho).unwrap().conjugate_by(&u).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-14);
        }
    }

    #[test]
    fn noise_model_json() {
        let m = NoiseModel::bilocal(0.1, 0.2).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"kind":"bilocal","gamma1":0.1,"gamma2":0.2}"#);
        assert_eq!(serde_json::from_str::<NoiseModel>(&s).unwrap(), m);
        assert!(NoiseModel::global(2.0).is_err());
    }
}
