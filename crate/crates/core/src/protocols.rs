//! Two-copy LOCC purification protocols and their figures of merit.
//!
//! Two-copy inputs use qubit order A₁B₁A₂B₂: the first pair is kept, the
//! second pair (A₂, B₂) is measured.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};
use std::sync::OnceLock;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::NoiseModel;
use crate::error::{Error, Result};
use crate::gates;
use crate::tensor::{Operator, SubsystemSelector, C64, EIG_TOL};

/// Largest noise level covered by the single-state gain guarantee.
pub const SINGLE_STATE_MAX_GAMMA: f64 = 0.4;

const UNITARY_TOL: f64 = 1e-10;
const PAIR_DIMS: [usize; 4] = [2, 2, 2, 2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoccProtocol {
    /// Unitary on (A₁, A₂).
    pub party_a_unitary: Operator,
    /// Unitary on (B₁, B₂).
    pub party_b_unitary: Operator,
    /// Measured qubits as positions in A₁B₁A₂B₂; subset of {2, 3}.
    pub measured: SubsystemSelector,
    /// Accepted outcome strings, one character per measured qubit.
    pub accept_outcomes: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolOutcome {
    pub state: Operator,
    pub success_probability: f64,
    pub fidelity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSet {
    states: Vec<Operator>,
    label: String,
}

fn accept_zero(n: usize) -> BTreeSet<String> {
    BTreeSet::from(["0".repeat(n)])
}

impl LoccProtocol {
    pub fn new(
        party_a_unitary: Operator,
        party_b_unitary: Operator,
        measured: SubsystemSelector,
        accept_outcomes: BTreeSet<String>,
    ) -> Result<Self> {
        let p = Self {
            party_a_unitary,
            party_b_unitary,
            measured,
            accept_outcomes,
        };
        p.validate()?;
        Ok(p)
    }

    /// Local unitaries followed by measurement of A₂B₂ with acceptance on 00.
    pub fn measure_second_pair(party_a_unitary: Operator, party_b_unitary: Operator) -> Result<Self> {
        Self::new(
            party_a_unitary,
            party_b_unitary,
            SubsystemSelector::range(2..4),
            accept_zero(2),
        )
    }

    /// Discard the second copy; the trivial protocol.
    pub fn trace_out_second_copy() -> Self {
        Self {
            party_a_unitary: Operator::identity(vec![2, 2]),
            party_b_unitary: Operator::identity(vec![2, 2]),
            measured: SubsystemSelector::range(0..0),
            accept_outcomes: BTreeSet::from([String::new()]),
        }
    }

    /// A protocol whose acceptance predicate never fires.
    pub fn reject_all() -> Self {
        Self {
            accept_outcomes: BTreeSet::new(),
            ..Self::trace_out_second_copy()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, u) in [("party A", &self.party_a_unitary), ("party B", &self.party_b_unitary)] {
            if u.dim() != 4 {
                return Err(Error::InvalidProtocol(format!("{name} unitary must be 4x4")));
            }
            let r = u.unitarity_residual();
            if r > UNITARY_TOL {
                return Err(Error::InvalidProtocol(format!(
                    "{name} unitary has residual {r:.3e}"
                )));
            }
        }
        if self.measured.indices().iter().any(|&i| !(2..4).contains(&i)) {
            return Err(Error::InvalidProtocol(format!(
                "measured qubits {:?} must lie in the second pair {{2, 3}}",
                self.measured.indices()
            )));
        }
        let k = self.measured.indices().len();
        for m in &self.accept_outcomes {
            if m.len() != k || m.chars().any(|c| c != '0' && c != '1') {
                return Err(Error::InvalidProtocol(format!(
                    "outcome {m:?} is not a bit string of length {k}"
                )));
            }
        }
        Ok(())
    }

    /// Joint unitary on A₁B₁A₂B₂.
    pub fn joint_unitary(&self) -> Result<Operator> {
        let ua = Operator::embed(&self.party_a_unitary, &[0, 2], &PAIR_DIMS)?;
        let ub = Operator::embed(&self.party_b_unitary, &[1, 3], &PAIR_DIMS)?;
        ua.matmul(&ub)
    }

    /// Kraus operators (4×16) of the post-selected map A₁B₁A₂B₂ → A₁B₁.
    pub fn kraus_operators(&self) -> Result<Vec<DMatrix<C64>>> {
        self.validate()?;
        let w = self.joint_unitary()?;
        let w = w.matrix();
        let measured = self.measured.indices();
        let unmeasured: Vec<usize> = (2..4).filter(|q| !measured.contains(q)).collect();
        let mut kraus = Vec::new();
        for outcome in &self.accept_outcomes {
            for rest in 0..(1usize << unmeasured.len()) {
                // index of the second pair, a₂·2 + b₂
                let mut second = 0;
                for (bit, &q) in outcome.chars().zip(measured) {
                    if bit == '1' {
                        second |= 1 << (3 - q);
                    }
                }
                for (k, &q) in unmeasured.iter().enumerate() {
                    if (rest >> (unmeasured.len() - 1 - k)) & 1 == 1 {
                        second |= 1 << (3 - q);
                    }
                }
                kraus.push(DMatrix::from_fn(4, 16, |o, c| w[(o * 4 + second, c)]));
            }
        }
        Ok(kraus)
    }

    /// Unnormalized output `σ̃` on A₁B₁ for a two-copy input.
    pub fn apply(&self, pair: &Operator) -> Result<Operator> {
        if pair.dim() != 16 {
            return Err(Error::dims(PAIR_DIMS, pair.dims()));
        }
        apply_kraus(&self.kraus_operators()?, pair)
    }

    /// Run on `pair` and score the normalized output against `reference`.
    pub fn run(&self, pair: &Operator, reference: &Operator) -> Result<ProtocolOutcome> {
        outcome_from_unnormalized(self.apply(pair)?, reference)
    }
}

pub(crate) fn apply_kraus(kraus: &[DMatrix<C64>], pair: &Operator) -> Result<Operator> {
    let rho = pair.matrix();
    let mut out = DMatrix::<C64>::zeros(4, 4);
    for k in kraus {
        out += k * rho * k.adjoint();
    }
    Operator::new(out, vec![2, 2])
}

fn outcome_from_unnormalized(sigma: Operator, reference: &Operator) -> Result<ProtocolOutcome> {
    let p = sigma.trace().re;
    if p <= 0.0 {
        return Err(Error::DegenerateProtocol);
    }
    let state = sigma.scale(1.0 / p);
    let fidelity = reference.trace_product(&state).re;
    Ok(ProtocolOutcome {
        state,
        success_probability: p,
        fidelity,
    })
}

/// `|ψ_α⟩ = α|00⟩ + √(1−α²)|11⟩`.
pub fn psi_alpha(alpha: f64) -> Result<Operator> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::OutOfRange {
            name: "alpha",
            value: alpha,
            range: "[0, 1]",
        });
    }
    let beta = (1.0 - alpha * alpha).max(0.0).sqrt();
    Operator::projector_real(&[alpha, 0.0, 0.0, beta], vec![2, 2])
}

/// Bell states in the order Φ⁺, Φ⁻, Ψ⁺, Ψ⁻.
pub fn bell_states() -> [Operator; 4] {
    let s = FRAC_1_SQRT_2;
    [
        [s, 0.0, 0.0, s],
        [s, 0.0, 0.0, -s],
        [0.0, s, s, 0.0],
        [0.0, s, -s, 0.0],
    ]
    .map(|v| Operator::projector_real(&v, vec![2, 2]).expect("4 amplitudes"))
}

impl StateSet {
    pub fn new(states: Vec<Operator>, label: impl Into<String>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Config("state set is empty".into()));
        }
        for s in &states {
            if s.dims() != [2, 2] && s.dims() != [4] {
                return Err(Error::dims([2, 2], s.dims()));
            }
            s.check_pure()?;
        }
        let states = states
            .into_iter()
            .map(|s| s.with_dims(vec![2, 2]))
            .collect::<Result<_>>()?;
        Ok(Self {
            states,
            label: label.into(),
        })
    }

    /// The four Bell states.
    pub fn bell() -> Self {
        Self {
            states: bell_states().to_vec(),
            label: "bell".into(),
        }
    }

    /// `{ψ_α : α ∈ alphas}`.
    pub fn from_alphas(alphas: &[f64], label: impl Into<String>) -> Result<Self> {
        Self::new(alphas.iter().map(|&a| psi_alpha(a)).collect::<Result<_>>()?, label)
    }

    /// `{ψ_{1/√k} : k = 2..5}`.
    pub fn sd() -> Self {
        let alphas: Vec<f64> = (2..=5).map(|k| 1.0 / (k as f64).sqrt()).collect();
        Self::from_alphas(&alphas, "sd").expect("valid alphas")
    }

    pub fn states(&self) -> &[Operator] {
        &self.states
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

fn dominant_reference(rho: &Operator) -> Result<Operator> {
    let v = rho.top_eigenvector()?;
    Operator::projector(&v, rho.dims().to_vec())
}

/// Permutation operator on `n` factors of dimension `d`: factor `k` of the
/// input lands in position `perm[k]`.
fn permutation_operator(d: usize, perm: &[usize]) -> Operator {
    let n = perm.len();
    let size = d.pow(n as u32);
    let mut op = Operator::zeros(vec![d; n]);
    let mut digits = vec![0; n];
    for idx in 0..size {
        let mut rem = idx;
        for k in (0..n).rev() {
            digits[k] = rem % d;
            rem /= d;
        }
        let mut target = 0;
        let mut moved = vec![0; n];
        for k in 0..n {
            moved[perm[k]] = digits[k];
        }
        for &digit in &moved {
            target = target * d + digit;
        }
        op.set(target, idx, C64::new(1.0, 0.0));
    }
    op
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Projector onto the symmetric subspace of `n` copies of dimension `d`.
pub fn symmetric_projector(d: usize, n: usize) -> Result<Operator> {
    let size = d.checked_pow(n as u32).unwrap_or(usize::MAX);
    if size > crate::tensor::MAX_DIM {
        return Err(Error::dims(format!("d^n <= {}", crate::tensor::MAX_DIM), size));
    }
    let perms = permutations(n);
    let mut sum = Operator::zeros(vec![d; n]);
    for p in &perms {
        sum += &permutation_operator(d, p);
    }
    Ok(sum.scale(1.0 / perms.len() as f64))
}

/// Symmetric projection of `n` copies of `rho`, output on the first copy.
///
/// The output is `Σⱼ ρʲ / Σⱼ tr ρʲ`; the success probability is
/// `tr[Π_sym ρ^{⊗n}]` from the explicit projector, and fidelity is measured
/// against the dominant eigenvector of `rho`.
pub fn symmetric_projection(rho: &Operator, n: usize) -> Result<ProtocolOutcome> {
    if n < 2 {
        return Err(Error::OutOfRange {
            name: "n",
            value: n as f64,
            range: "[2, inf)",
        });
    }
    rho.check_density(false)?;
    let d = rho.dim();
    let projector = symmetric_projector(d, n)?;

    let mut power = rho.clone();
    let mut numerator = rho.clone();
    for _ in 1..n {
        power = &power * rho;
        numerator += &power;
    }
    let state = numerator.scale(1.0 / numerator.trace().re);

    let flat = rho.clone().with_dims(vec![d])?;
    let copies = vec![&flat; n];
    let rho_n = Operator::kron_all(&copies)?;
    let success_probability = projector.trace_product(&rho_n).re;

    let reference = dominant_reference(rho)?;
    let fidelity = reference.trace_product(&state).re;
    Ok(ProtocolOutcome {
        state,
        success_probability,
        fidelity,
    })
}

/// Swap-test gadget: ancilla in |+⟩ controls a swap of the two registers,
/// ancilla measured in the X basis with acceptance on `+`, second register
/// discarded.
pub fn swap_test(rho: &Operator, sigma_in: &Operator) -> Result<ProtocolOutcome> {
    if rho.dim() != sigma_in.dim() {
        return Err(Error::dims(rho.dims(), sigma_in.dims()));
    }
    let d = rho.dim();
    let flat_rho = rho.clone().with_dims(vec![d])?;
    let flat_sigma = sigma_in.clone().with_dims(vec![d])?;
    let zero = Operator::projector_real(&[1.0, 0.0], vec![2])?;
    let input = Operator::kron_all(&[&zero, &flat_rho, &flat_sigma])?;

    let dims = [2, d, d];
    let h = Operator::embed(&gates::hadamard(), &[0], &dims)?;
    let p0 = Operator::kron_all(&[&zero, &Operator::identity(vec![d, d])])?;
    let p1 = &Operator::identity(vec![2, d, d]) - &p0;
    let swap = Operator::embed(&gates::swap(d), &[1, 2], &dims)?;
    let cswap = &p0 + &(&p1 * &swap);
    let circuit = &(&h * &cswap) * &h;

    let evolved = input.conjugate_by(&circuit.with_dims(dims.to_vec())?)?;
    let post = evolved.conjugate_by(&p0.with_dims(dims.to_vec())?)?;
    let out = post
        .partial_trace(&SubsystemSelector::new(vec![0, 2])?)?
        .with_dims(rho.dims().to_vec())?;
    outcome_from_unnormalized(out, &dominant_reference(rho)?)
}

/// Local unitaries bringing a pure two-qubit state to `ψ_α` form.
#[derive(Clone, Debug)]
pub struct SchmidtForm {
    pub alpha: f64,
    pub u_a: Operator,
    pub u_b: Operator,
}

/// Schmidt decomposition via the SVD `C = U Σ V†` of the 2×2 amplitude
/// matrix; `u_a = U†`, `u_b = Vᵀ` map the state to `α|00⟩ + β|11⟩` with
/// `α ≥ β ≥ 0`.
pub fn schmidt_phase1(psi: &Operator) -> Result<SchmidtForm> {
    if psi.dim() != 4 {
        return Err(Error::dims([2, 2], psi.dims()));
    }
    psi.check_pure()?;
    let v = psi.top_eigenvector()?;
    let c = DMatrix::from_fn(2, 2, |i, j| v[2 * i + j]);
    let svd = c.svd(true, true);
    let (u, v_t) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let mut s = [svd.singular_values[0], svd.singular_values[1]];
    // columns of U and rows of V† in order of decreasing singular value
    let order = if s[0] >= s[1] { [0, 1] } else { [1, 0] };
    s = [s[order[0]], s[order[1]]];
    let u_a = DMatrix::from_fn(2, 2, |k, i| u[(i, order[k])].conj());
    // V = (V†)†, so Vᵀ = conj(V†)
    let u_b = DMatrix::from_fn(2, 2, |k, j| v_t[(order[k], j)].conj());
    let norm = (s[0] * s[0] + s[1] * s[1]).sqrt();
    Ok(SchmidtForm {
        alpha: (s[0] / norm).clamp(FRAC_1_SQRT_2, 1.0),
        u_a: Operator::new(u_a, vec![2])?,
        u_b: Operator::new(u_b, vec![2])?,
    })
}

/// Where the Phase-2 X rotations act relative to the CNOTs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationPlacement {
    /// Both local qubits of each party.
    BothCopies,
    /// Control (first-copy) qubits only.
    ControlOnly,
    /// Target (second-copy) qubits only.
    TargetOnly,
}

/// Phase-2 circuit parameters: `RX(theta_a)` on Alice, `RX(theta_b)` on Bob,
/// then CNOT A₁→A₂ and B₁→B₂.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phase2Candidate {
    pub placement: RotationPlacement,
    pub theta_a: f64,
    pub theta_b: f64,
}

impl Phase2Candidate {
    fn party_unitary(&self, theta: f64) -> Result<Operator> {
        let r = gates::rx(theta);
        let id = Operator::identity(vec![2]);
        let rotations = match self.placement {
            RotationPlacement::BothCopies => r.kron(&r)?,
            RotationPlacement::ControlOnly => r.kron(&id)?,
            RotationPlacement::TargetOnly => id.kron(&r)?,
        };
        gates::cnot().matmul(&rotations)
    }

    pub fn party_unitaries(&self) -> Result<(Operator, Operator)> {
        Ok((self.party_unitary(self.theta_a)?, self.party_unitary(self.theta_b)?))
    }

    pub fn protocol(&self) -> Result<LoccProtocol> {
        let (a, b) = self.party_unitaries()?;
        LoccProtocol::measure_second_pair(a, b)
    }

    /// Candidates in calibration order: placement, then magnitude, then signs.
    pub fn enumerate() -> Vec<Self> {
        let signs = [(1.0, -1.0), (-1.0, 1.0), (1.0, 1.0), (-1.0, -1.0)];
        let mut out = Vec::new();
        for placement in [
            RotationPlacement::BothCopies,
            RotationPlacement::ControlOnly,
            RotationPlacement::TargetOnly,
        ] {
            for magnitude in [FRAC_PI_2, FRAC_PI_4, PI] {
                for (sa, sb) in signs {
                    out.push(Self {
                        placement,
                        theta_a: sa * magnitude,
                        theta_b: sb * magnitude,
                    });
                }
            }
        }
        out
    }
}

/// Baseline `F(ψ_α, N^{γ,γ}(ψ_α))`.
pub fn unpurified_fidelity(alpha: f64, gamma: f64) -> Result<f64> {
    let psi = psi_alpha(alpha)?;
    let noisy = NoiseModel::bilocal(gamma, gamma)?.apply(&psi)?;
    Ok(psi.trace_product(&noisy).re)
}

/// Run a Phase-2 candidate on `noisy_pair` and score against `reference`.
pub fn phase2_purify(
    noisy_pair: &Operator,
    reference: &Operator,
    candidate: &Phase2Candidate,
) -> Result<ProtocolOutcome> {
    candidate.protocol()?.run(noisy_pair, reference)
}

/// Simulated fidelity gain of a candidate on `ψ_α` under `N^{γ,γ}`.
pub fn phase2_gain(alpha: f64, gamma: f64, candidate: &Phase2Candidate) -> Result<f64> {
    let psi = psi_alpha(alpha)?;
    let pair = NoiseModel::bilocal(gamma, gamma)?.noisy_pair(&psi)?;
    let out = phase2_purify(&pair, &psi, candidate)?;
    Ok(out.fidelity - unpurified_fidelity(alpha, gamma)?)
}

const CALIBRATION_ALPHAS: [f64; 3] = [0.3, FRAC_1_SQRT_2, 0.9];
const CALIBRATION_GAMMAS: [f64; 2] = [0.1, 0.3];
const CALIBRATION_TOL: f64 = 1e-9;

/// First candidate whose simulated gain matches [`closed_form_gain`] on the
/// probe grid.
pub fn calibrate_phase2_angle() -> Result<Phase2Candidate> {
    for candidate in Phase2Candidate::enumerate() {
        let mut matches = true;
        'probe: for &alpha in &CALIBRATION_ALPHAS {
            for &gamma in &CALIBRATION_GAMMAS {
                let simulated = match phase2_gain(alpha, gamma, &candidate) {
                    Ok(g) => g,
                    Err(Error::DegenerateProtocol) => f64::NAN,
                    Err(e) => return Err(e),
                };
                if !((simulated - closed_form_gain(alpha, gamma)?).abs() <= CALIBRATION_TOL) {
                    matches = false;
                    break 'probe;
                }
            }
        }
        if matches {
            return Ok(candidate);
        }
    }
    Err(Error::Calibration(format!(
        "none of {} candidates reproduces the closed-form gain",
        Phase2Candidate::enumerate().len()
    )))
}

/// Calibrated Phase-2 candidate, computed once per process.
pub fn phase2_candidate() -> Result<Phase2Candidate> {
    static CACHE: OnceLock<std::result::Result<Phase2Candidate, String>> = OnceLock::new();
    CACHE
        .get_or_init(|| calibrate_phase2_angle().map_err(|e| e.to_string()))
        .clone()
        .map_err(Error::Calibration)
}

/// Fidelity gain `f·g/d` of the Phase-2 circuit on `ψ_α` under `N^{γ,γ}`.
pub fn closed_form_gain(alpha: f64, gamma: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::OutOfRange {
            name: "alpha",
            value: alpha,
            range: "[0, 1]",
        });
    }
    if !(0.0..=SINGLE_STATE_MAX_GAMMA).contains(&gamma) {
        return Err(Error::OutOfRange {
            name: "gamma",
            value: gamma,
            range: "[0, 0.4]",
        });
    }
    let beta = (1.0 - alpha * alpha).max(0.0).sqrt();
    let d = 2.0 * (1.0 + 2.0 * alpha * beta * (gamma - 1.0).powi(4));
    let f = alpha * gamma * (gamma - 2.0) * (gamma - 1.0).powi(2);
    let g = 4.0 * alpha - 4.0 * alpha.powi(3) - beta * (gamma - 2.0).powi(2)
        + 8.0 * alpha * alpha * beta * gamma * (gamma - 1.0) * (alpha * alpha - 1.0);
    Ok(f * g / d)
}

/// Phase-1 conjugated Phase-2 circuit for a known pure target.
pub fn single_state_locc(psi: &Operator) -> Result<LoccProtocol> {
    let schmidt = schmidt_phase1(psi)?;
    let (pa, pb) = phase2_candidate()?.party_unitaries()?;
    let id = Operator::identity(vec![2]);
    let wrap = |u: &Operator, inner: &Operator| -> Result<Operator> {
        let pre = u.kron(u)?;
        let post = u.adjoint().kron(&id)?;
        post.matmul(&inner.matmul(&pre)?)
    };
    LoccProtocol::measure_second_pair(wrap(&schmidt.u_a, &pa)?, wrap(&schmidt.u_b, &pb)?)
}

/// Noise range handling for [`single_state_protocol`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GammaGuard {
    /// Reject noise levels above 0.4.
    #[default]
    Enforce,
    /// Allow any level; the gain is then not guaranteed to be nonnegative.
    Override,
}

fn noise_level(noise: &NoiseModel) -> f64 {
    match *noise {
        NoiseModel::Global { gamma } => gamma,
        NoiseModel::Bilocal { gamma1, gamma2 } => gamma1.max(gamma2),
    }
}

/// Purify `noise`-corrupted copies of the known pure state `psi`.
pub fn single_state_protocol(psi: &Operator, noise: &NoiseModel, guard: GammaGuard) -> Result<ProtocolOutcome> {
    noise.validate()?;
    let level = noise_level(noise);
    if guard == GammaGuard::Enforce && level > SINGLE_STATE_MAX_GAMMA {
        return Err(Error::OutOfRange {
            name: "gamma",
            value: level,
            range: "[0, 0.4] (pass an override to go beyond)",
        });
    }
    let psi = psi.clone().with_dims(vec![2, 2])?;
    let pair = noise.noisy_pair(&psi)?;
    single_state_locc(&psi)?.run(&pair, &psi)
}

/// Average purification fidelity and success probability of a two-copy
/// protocol: `f̄ = (1/|S|) Σ F(ψ, σ̃_ψ / p̄)`, `p̄ = (1/|S|) Σ tr σ̃_ψ`.
pub fn average_fidelity(protocol: &LoccProtocol, set: &StateSet, noise: &NoiseModel, n: usize) -> Result<(f64, f64)> {
    if n != 2 {
        return Err(Error::OutOfRange {
            name: "n",
            value: n as f64,
            range: "{2}",
        });
    }
    let kraus = protocol.kraus_operators()?;
    let per_state: Vec<(f64, f64)> = set
        .states()
        .par_iter()
        .map(|psi| {
            let sigma = apply_kraus(&kraus, &noise.noisy_pair(psi)?)?;
            Ok((psi.trace_product(&sigma).re, sigma.trace().re))
        })
        .collect::<Result<_>>()?;
    average_from_parts(&per_state)
}

/// `(f̄, p̄)` from per-state `(⟨ψ|σ̃|ψ⟩, tr σ̃)` pairs.
pub fn average_from_parts(per_state: &[(f64, f64)]) -> Result<(f64, f64)> {
    let m = per_state.len() as f64;
    let p_bar = per_state.iter().map(|x| x.1).sum::<f64>() / m;
    if !(p_bar > EIG_TOL * 1e-2) {
        return Err(Error::DegenerateProtocol);
    }
    let f_bar = per_state.iter().map(|x| x.0).sum::<f64>() / m / p_bar;
    Ok((f_bar, p_bar))
}

/// Mean unpurified fidelity `(1/|S|) Σ F(ψ, N(ψ))`.
pub fn baseline_fidelity(set: &StateSet, noise: &NoiseModel) -> Result<f64> {
    let total = set
        .states()
        .iter()
        .map(|psi| Ok(psi.trace_product(&noise.apply(psi)?).re))
        .sum::<Result<f64>>()?;
    Ok(total / set.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::depolarize_global;
    use crate::tensor::random;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn noisy_bell(gamma: f64) -> Operator {
        depolarize_global(&bell_states()[0], gamma).unwrap()
    }

    #[test]
    fn symmetric_projection_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let psi = random::pure_state(&[2, 2], &mut rng);
        let out = symmetric_projection(&psi, 2).unwrap();
        assert!(out.state.max_abs_diff(&psi) < 1e-12);
        assert!((out.success_probability - 1.0).abs() < 1e-12);

        let out = symmetric_projection(&noisy_bell(0.4), 2).unwrap();
        assert!((out.fidelity - 1.19 / 1.52).abs() < 1e-12);
        assert!((out.success_probability - 0.76).abs() < 1e-12);

        let mixed = Operator::maximally_mixed(vec![2, 2]);
        let out = symmetric_projection(&mixed, 3).unwrap();
        assert!(out.state.max_abs_diff(&mixed) < 1e-14);
        assert!(symmetric_projection(&mixed, 1).is_err());
    }

    #[test]
    fn symmetric_success_probability_matches_cycle_formula() {
        // tr[Π_sym ρ^{⊗3}] = (1 + 3 tr ρ² + 2 tr ρ³) / 6
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rho = random::density(&[2, 2], 4, &mut rng);
        let t2 = rho.trace_product(&rho).re;
        let t3 = (&rho * &rho).trace_product(&rho).re;
        let out = symmetric_projection(&rho, 3).unwrap();
        assert!((out.success_probability - (1.0 + 3.0 * t2 + 2.0 * t3) / 6.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_projector_is_projector() {
        let p = symmetric_projector(3, 3).unwrap();
        assert!((&p * &p).max_abs_diff(&p) < 1e-14);
        // dimension of Sym³(C³) is 10
        assert!((p.trace().re - 10.0).abs() < 1e-12);
    }

    #[test]
    fn swap_test_examples() {
        let out = swap_test(&noisy_bell(0.4), &noisy_bell(0.4)).unwrap();
        assert!((out.fidelity - 1.19 / 1.52).abs() < 1e-12);
        assert!((out.success_probability - 0.76).abs() < 1e-12);

        let mixed = Operator::maximally_mixed(vec![2, 2]);
        let out = swap_test(&mixed, &mixed).unwrap();
        assert!((out.success_probability - 0.625).abs() < 1e-12);
        assert!(out.state.max_abs_diff(&mixed) < 1e-14);
        assert!(swap_test(&mixed, &Operator::maximally_mixed(vec![2])).is_err());
    }

    #[test]
    fn schmidt_examples() {
        let zz = psi_alpha(1.0).unwrap();
        let s = schmidt_phase1(&zz).unwrap();
        assert!((s.alpha - 1.0).abs() < 1e-12);

        let phi_minus = &bell_states()[1];
        let s = schmidt_phase1(phi_minus).unwrap();
        assert!((s.alpha - FRAC_1_SQRT_2).abs() < 1e-12);
        let u = s.u_a.kron(&s.u_b).unwrap();
        let mapped = phi_minus.conjugate_by(&u).unwrap();
        assert!(mapped.max_abs_diff(&psi_alpha(FRAC_1_SQRT_2).unwrap()) < 1e-10);
    }

    #[test]
    fn closed_form_examples() {
        assert!((closed_form_gain(FRAC_1_SQRT_2, 0.2).unwrap() - 0.03759364358683314).abs() < 1e-14);
        assert_eq!(closed_form_gain(0.6, 0.0).unwrap(), 0.0);
        assert_eq!(closed_form_gain(0.0, 0.3).unwrap(), 0.0);
        assert!(closed_form_gain(1.0, 0.3).unwrap().abs() < 1e-15);
        assert!(closed_form_gain(0.5, 0.5).is_err());
        assert!(closed_form_gain(1.5, 0.1).is_err());
    }

    #[test]
    fn calibration_finds_control_rotations() {
        let c = calibrate_phase2_angle().unwrap();
        assert_eq!(c.placement, RotationPlacement::ControlOnly);
        assert!((c.theta_a - FRAC_PI_2).abs() < 1e-15);
        assert!((c.theta_b + FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn phase2_bell_example() {
        let c = phase2_candidate().unwrap();
        let psi = psi_alpha(FRAC_1_SQRT_2).unwrap();
        let pair = NoiseModel::bilocal(0.2, 0.2).unwrap().noisy_pair(&psi).unwrap();
        let out = phase2_purify(&pair, &psi, &c).unwrap();
        assert!((out.fidelity - (0.73 + 0.03759364358683314)).abs() < 1e-12);
        assert!(phase2_gain(0.4, 0.0, &c).unwrap().abs() < 1e-14);
    }

    #[test]
    fn single_state_examples() {
        let noise = NoiseModel::bilocal(0.2, 0.2).unwrap();
        let out = single_state_protocol(&bell_states()[0], &noise, GammaGuard::Enforce).unwrap();
        assert!((out.fidelity - 0.7676).abs() < 1e-4);

        let product = psi_alpha(1.0).unwrap();
        let out = single_state_protocol(&product, &noise, GammaGuard::Enforce).unwrap();
        assert!((out.fidelity - unpurified_fidelity(1.0, 0.2).unwrap()).abs() < 1e-12);

        let strong = NoiseModel::bilocal(0.5, 0.5).unwrap();
        assert!(single_state_protocol(&product, &strong, GammaGuard::Enforce).is_err());
        assert!(single_state_protocol(&product, &strong, GammaGuard::Override).is_ok());
    }

    #[test]
    fn average_fidelity_examples() {
        let gp = 0.36;
        let (f, p) = average_fidelity(
            &LoccProtocol::trace_out_second_copy(),
            &StateSet::bell(),
            &NoiseModel::global(gp).unwrap(),
            2,
        )
        .unwrap();
        assert!((f - (1.0 - 0.75 * gp)).abs() < 1e-12);
        assert!((p - 1.0).abs() < 1e-12);

        let err = average_fidelity(&LoccProtocol::reject_all(), &StateSet::bell(), &NoiseModel::global(0.1).unwrap(), 2);
        assert!(matches!(err, Err(Error::DegenerateProtocol)));

        let noise = NoiseModel::bilocal(0.2, 0.2).unwrap();
        let set = StateSet::sd();
        let (f, _) = average_fidelity(&phase2_candidate().unwrap().protocol().unwrap(), &set, &noise, 2).unwrap();
        assert!(f > baseline_fidelity(&set, &noise).unwrap());
    }

    #[test]
    fn protocol_validation() {
        let id = Operator::identity(vec![2, 2]);
        let bad = LoccProtocol::new(id.clone(), id.scale(2.0), SubsystemSelector::range(2..4), accept_zero(2));
        assert!(bad.is_err());
        let bad = LoccProtocol::new(id.clone(), id.clone(), SubsystemSelector::range(1..3), accept_zero(2));
        assert!(bad.is_err());
        let bad = LoccProtocol::new(id.clone(), id.clone(), SubsystemSelector::range(2..4), accept_zero(1));
        assert!(bad.is_err());
    }

    #[test]
    fn state_set_construction() {
        assert_eq!(StateSet::sd().len(), 4);
        assert!(StateSet::new(vec![Operator::maximally_mixed(vec![2, 2])], "x").is_err());
        assert!(StateSet::new(vec![], "x").is_err());
    }
}
