//! PPT relaxation of the optimal two-copy average purification fidelity.
//!
//! The Choi variable `J` lives on A₁B₁A₂B₂A′B′ (qubits, input first). With
//! `T_in` the transpose on the input and `Γ` the partial transpose on
//! A₁A₂A′, the program is
//!
//! ```text
//! max  ⟨Q^{T_in}, J⟩ / P̄
//! s.t. ⟨R^{T_in}, J⟩ = P̄,   ⟨M_ψ, J⟩ ≥ 0 for ψ ∈ S,
//!      J ⪰ 0,  Γ(J) ⪰ 0,  tr_{A′B′} J ⪯ I.
//! ```
//!
//! and its dual is `min tr K − P̄ x` subject to
//! `Q^{T_in}/P̄ + x R^{T_in} − K ⊗ I + Γ(L) + Σ yᵢ M_ψᵢ ⪯ 0`,
//! `K ⪰ 0`, `L ⪰ 0`, `y ≥ 0`.

use std::collections::BTreeMap;

use nalgebra::{ComplexField, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::channels::{choi_of_protocol, NoiseModel};
use crate::error::{Error, Result};
use crate::protocols::{LoccProtocol, StateSet};
use crate::tensor::{Operator, SubsystemSelector, C64};

const QUBITS: [usize; 6] = [2; 6];
const N: usize = 64;
const N_IN: usize = 16;
const N_OUT: usize = 4;

/// Slack allowed on the dual matrix inequality.
pub const DUAL_TOL: f64 = 1e-10;

/// Transpose selector for the input pairs A₁B₁A₂B₂.
pub fn input_selector() -> SubsystemSelector {
    SubsystemSelector::range(0..4)
}

/// Partial-transpose selector A₁A₂A′ of the PPT constraint.
pub fn ppt_selector() -> SubsystemSelector {
    SubsystemSelector::new(vec![0, 2, 4]).expect("increasing")
}

/// Output selector A′B′.
pub fn output_selector() -> SubsystemSelector {
    SubsystemSelector::range(4..6)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    /// `(1/|S|) Σ N(ψ)^{⊗2} ⊗ ψ`.
    pub q: Operator,
    /// `(1/|S|) Σ N(ψ)^{⊗2} ⊗ I`.
    pub r: Operator,
    /// `(N(ψ)^{⊗2})ᵀ ⊗ (ψ − F(ψ, N(ψ)) I)` per state.
    pub m_list: Vec<Operator>,
    pub p_bar: f64,
    pub ppt_selector: SubsystemSelector,
    pub input_selector: SubsystemSelector,
    pub output_selector: SubsystemSelector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    /// Operator on A₁B₁A₂B₂.
    pub k: Operator,
    pub x: f64,
    pub y: Vec<f64>,
    /// Operator on A₁B₁A₂B₂A′B′.
    pub l: Operator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpSolution {
    pub j: Operator,
    pub objective: f64,
    /// Heuristic accuracy band from the final primal and dual residuals.
    pub objective_uncertainty: f64,
    pub residuals: BTreeMap<String, f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stopping threshold on the primal and dual ADMM residuals.
    pub tol_primal: f64,
    /// Eigenvalue slack allowed on the cone constraints at convergence.
    pub tol_feasibility: f64,
    pub max_iter: usize,
    pub relaxation: f64,
    pub rho: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_primal: 1e-6,
            tol_feasibility: 1e-8,
            max_iter: 200_000,
            relaxation: 1.5,
            rho: 1.0,
        }
    }
}

/// Linearized fidelity-gain kernel `(N(ψ)^{⊗2})ᵀ ⊗ (ψ − F(ψ, N(ψ)) I)`;
/// `⟨M_ψ, J⟩ ≥ 0` iff the protocol does not lower the fidelity of `ψ`
/// (whenever it succeeds with positive probability).
pub fn fidelity_gain_kernel(psi: &Operator, noise: &NoiseModel) -> Result<Operator> {
    let noisy = noise.apply(psi)?;
    let baseline = psi.trace_product(&noisy).re;
    let pair_t = noisy.kron(&noisy)?.transpose();
    let target = psi - &Operator::identity(vec![2, 2]).scale(baseline);
    pair_t.kron(&target)?.with_dims(QUBITS.to_vec())
}

pub fn build_problem(set: &StateSet, noise: &NoiseModel, p_bar: f64) -> Result<SdpProblem> {
    if set.is_empty() {
        return Err(Error::Config("state set is empty".into()));
    }
    if !(p_bar > 0.0 && p_bar <= 1.0) {
        return Err(Error::OutOfRange {
            name: "p_bar",
            value: p_bar,
            range: "(0, 1]",
        });
    }
    noise.validate()?;
    let m = set.len() as f64;
    let mut q = Operator::zeros(QUBITS.to_vec());
    let mut r = Operator::zeros(QUBITS.to_vec());
    let id = Operator::identity(vec![2, 2]);
    let mut m_list = Vec::with_capacity(set.len());
    for psi in set.states() {
        let noisy = noise.apply(psi)?;
        let pair = noisy.kron(&noisy)?;
        q += &pair.kron(psi)?.with_dims(QUBITS.to_vec())?;
        r += &pair.kron(&id)?.with_dims(QUBITS.to_vec())?;
        m_list.push(fidelity_gain_kernel(psi, noise)?);
    }
    let problem = SdpProblem {
        q: q.scale(1.0 / m),
        r: r.scale(1.0 / m),
        m_list,
        p_bar,
        ppt_selector: ppt_selector(),
        input_selector: input_selector(),
        output_selector: output_selector(),
    };
    // The linearized fidelity constraints are equivalent to the ratio form
    // only where the success probability is positive; check that the
    // trivial protocol succeeds on every state.
    let trivial = trivial_choi(1.0)?;
    for psi in set.states() {
        let noisy = noise.apply(psi)?;
        let r_psi = noisy.kron(&noisy)?.transpose().kron(&id)?;
        let p = r_psi.inner_re(&trivial);
        if !(p > 0.0) {
            return Err(Error::Sdp(format!(
                "trivial protocol has success probability {p} on a set element"
            )));
        }
    }
    Ok(problem)
}

/// `scale · Φ⁺_{A₁A′} ⊗ Φ⁺_{B₁B′} ⊗ I_{A₂B₂}` (unnormalized Φ⁺): the Choi
/// matrix of discarding the second copy.
pub fn trivial_choi(scale: f64) -> Result<Operator> {
    Ok(choi_of_protocol(&LoccProtocol::trace_out_second_copy())?
        .into_op()
        .scale(scale))
}

impl SdpProblem {
    /// `Q^{T_in} / P̄`.
    pub fn objective_kernel(&self) -> Result<Operator> {
        Ok(self.q.partial_transpose(&self.input_selector)?.scale(1.0 / self.p_bar))
    }

    /// `R^{T_in}`.
    pub fn probability_kernel(&self) -> Result<Operator> {
        self.r.partial_transpose(&self.input_selector)
    }

    pub fn objective(&self, j: &Operator) -> Result<f64> {
        Ok(self.objective_kernel()?.inner_re(j))
    }

    pub fn probability(&self, j: &Operator) -> Result<f64> {
        Ok(self.probability_kernel()?.inner_re(j))
    }

    /// Trivial protocol scaled to meet the probability constraint.
    pub fn initial_choi(&self) -> Result<Operator> {
        let j = trivial_choi(1.0)?;
        let p = self.probability(&j)?;
        Ok(j.scale(self.p_bar / p))
    }

    /// Constraint violations of a candidate `J` (all ≤ 0 means feasible up to
    /// the reported magnitudes).
    pub fn residuals(&self, j: &Operator) -> Result<BTreeMap<String, f64>> {
        let mut out = BTreeMap::new();
        out.insert("psd_violation".into(), (-j.min_eigenvalue()?).max(0.0));
        let ppt = j.partial_transpose(&self.ppt_selector)?;
        out.insert("ppt_violation".into(), (-ppt.min_eigenvalue()?).max(0.0));
        let reduced = j.partial_trace(&self.output_selector)?;
        let cap = &Operator::identity(reduced.dims().to_vec()) - &reduced;
        out.insert("trace_cap_violation".into(), (-cap.min_eigenvalue()?).max(0.0));
        out.insert(
            "probability_error".into(),
            (self.probability(j)? - self.p_bar).abs(),
        );
        let worst = self
            .m_list
            .iter()
            .map(|m| m.inner_re(j))
            .fold(f64::INFINITY, f64::min);
        out.insert("fidelity_gain_violation".into(), (-worst).max(0.0));
        Ok(out)
    }

    /// Dual slack `Q^{T_in}/P̄ + x R^{T_in} − K⊗I + Γ(L) + Σ yᵢ Mᵢ`.
    pub fn dual_slack(&self, cert: &DualCertificate) -> Result<Operator> {
        if cert.k.dim() != N_IN || cert.l.dim() != N {
            return Err(Error::dims((N_IN, N), (cert.k.dim(), cert.l.dim())));
        }
        if cert.y.len() != self.m_list.len() {
            return Err(Error::dims(self.m_list.len(), cert.y.len()));
        }
        let k_full = cert
            .k
            .clone()
            .with_dims(vec![2, 2, 2, 2])?
            .kron(&Operator::identity(vec![2, 2]))?;
        let mut s = self.objective_kernel()?;
        s += &self.probability_kernel()?.scale(cert.x);
        s -= &k_full;
        s += &cert.l.clone().with_dims(QUBITS.to_vec())?.partial_transpose(&self.ppt_selector)?;
        for (y, m) in cert.y.iter().zip(&self.m_list) {
            s += &m.scale(*y);
        }
        Ok(s)
    }
}

/// Check dual feasibility and return the certified upper bound
/// `tr K − P̄ x`.
pub fn verify_dual(problem: &SdpProblem, cert: &DualCertificate) -> Result<f64> {
    let infeasible = |reason: &str, worst: f64| Error::InfeasibleCertificate {
        reason: reason.into(),
        worst_eigenvalue: worst,
    };
    let k_min = cert.k.min_eigenvalue()?;
    if k_min < -DUAL_TOL {
        return Err(infeasible("K is not PSD", k_min));
    }
    let l_min = cert.l.min_eigenvalue()?;
    if l_min < -DUAL_TOL {
        return Err(infeasible("L is not PSD", l_min));
    }
    if let Some(y) = cert.y.iter().find(|y| !(**y >= 0.0)) {
        return Err(infeasible("y has a negative entry", *y));
    }
    let s_max = problem.dual_slack(cert)?.max_eigenvalue()?;
    if s_max > DUAL_TOL {
        return Err(infeasible("dual slack is not negative semidefinite", s_max));
    }
    Ok(cert.k.trace().re - problem.p_bar * cert.x)
}

/// Scalars the ADMM core can run on: real symmetric data takes the cheaper
/// real eigensolver.
trait Field: ComplexField<RealField = f64> + Copy {
    fn from_c64(z: C64) -> Self;
    fn to_c64(self) -> C64;
}

impl Field for f64 {
    fn from_c64(z: C64) -> Self {
        z.re
    }
    fn to_c64(self) -> C64 {
        C64::new(self, 0.0)
    }
}

impl Field for C64 {
    fn from_c64(z: C64) -> Self {
        z
    }
    fn to_c64(self) -> C64 {
        self
    }
}

fn convert<T: Field>(op: &Operator) -> DMatrix<T> {
    op.matrix().map(T::from_c64)
}

fn inner<T: Field>(a: &DMatrix<T>, b: &DMatrix<T>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conjugate() * *y).real()).sum()
}

fn frob2<T: Field>(a: &DMatrix<T>) -> f64 {
    a.iter().map(|x| x.modulus_squared()).sum()
}

fn project_psd<T: Field>(x: &DMatrix<T>) -> DMatrix<T> {
    let herm = (x + x.adjoint()) * T::from_real(0.5);
    let eig = herm.symmetric_eigen();
    let mut v = eig.eigenvectors.clone();
    let mut any_positive = false;
    for (k, &w) in eig.eigenvalues.iter().enumerate() {
        let s = w.max(0.0);
        any_positive |= s > 0.0;
        v.column_mut(k).scale_mut(s.sqrt());
    }
    if !any_positive {
        return DMatrix::zeros(x.nrows(), x.ncols());
    }
    &v * v.adjoint()
}

/// Index tables for the structural maps on 64×64 matrices.
struct Structure {
    /// `Γ(X)[(r, c)] = X[ppt[(r, c)]]`, column-major linear indices.
    ppt: Vec<usize>,
}

impl Structure {
    fn new() -> Self {
        let probe = Operator::from_fn(QUBITS.to_vec(), |r, c| C64::new((c * N + r) as f64, 0.0))
            .expect("64x64")
            .partial_transpose(&ppt_selector())
            .expect("valid selector");
        let ppt = probe.matrix().iter().map(|z| z.re as usize).collect();
        Self { ppt }
    }

    fn gamma<T: Field>(&self, x: &DMatrix<T>) -> DMatrix<T> {
        let src = x.as_slice();
        DMatrix::from_iterator(N, N, self.ppt.iter().map(|&i| src[i]))
    }

    fn tr_out<T: Field>(x: &DMatrix<T>) -> DMatrix<T> {
        DMatrix::from_fn(N_IN, N_IN, |i, j| {
            let mut acc = T::zero();
            for o in 0..N_OUT {
                acc += x[(i * N_OUT + o, j * N_OUT + o)];
            }
            acc
        })
    }

    fn tr_out_adj<T: Field>(y: &DMatrix<T>) -> DMatrix<T> {
        DMatrix::from_fn(N, N, |r, c| {
            if r % N_OUT == c % N_OUT {
                y[(r / N_OUT, c / N_OUT)]
            } else {
                T::zero()
            }
        })
    }

    /// Inverse of `ρ (2·id + tr_out* tr_out)`.
    fn h_inv<T: Field>(x: &DMatrix<T>, rho: f64) -> DMatrix<T> {
        let p = Self::tr_out_adj(&Self::tr_out(x)) * T::from_real(1.0 / N_OUT as f64);
        ((x - &p) * T::from_real(0.5) + p * T::from_real(1.0 / 6.0)) * T::from_real(1.0 / rho)
    }
}

/// `min ½λᵀGλ − hᵀλ` with `λᵢ ≥ 0` for `i ≥ 1` (`λ₀` free), by a
/// Lawson–Hanson style active-set method.
fn bounded_qp(g: &DMatrix<f64>, h: &DVector<f64>) -> DVector<f64> {
    let m = h.len();
    let solve_on = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..m).filter(|&i| passive[i]).collect();
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |a, b| g[(idx[a], idx[b])]);
        let rhs = DVector::from_fn(idx.len(), |a, _| h[idx[a]]);
        let sol = sub
            .clone()
            .cholesky()
            .map(|c| c.solve(&rhs))
            .or_else(|| sub.lu().solve(&rhs))
            .unwrap_or_else(|| DVector::zeros(idx.len()));
        let mut full = DVector::zeros(m);
        for (a, &i) in idx.iter().enumerate() {
            full[i] = sol[a];
        }
        full
    };
    let scale = g.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-300);
    let tol = 1e-13 * scale * (1.0 + h.amax());
    let mut passive = vec![false; m];
    passive[0] = true;
    let mut lambda = solve_on(&passive);
    for _ in 0..(4 * m + 10) {
        let w = h - g * &lambda;
        let entering = (1..m)
            .filter(|&i| !passive[i] && w[i] > tol)
            .max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(i) = entering else { break };
        passive[i] = true;
        loop {
            let s = solve_on(&passive);
            let blocking: Vec<usize> = (1..m).filter(|&i| passive[i] && s[i] <= 0.0).collect();
            if blocking.is_empty() {
                lambda = s;
                break;
            }
            let alpha = blocking
                .iter()
                .map(|&i| lambda[i] / (lambda[i] - s[i]))
                .fold(1.0, f64::min);
            lambda = &lambda + (&s - &lambda) * alpha;
            for i in 1..m {
                if passive[i] && lambda[i] <= tol {
                    passive[i] = false;
                    lambda[i] = 0.0;
                }
            }
        }
    }
    lambda
}

struct Admm<T: Field> {
    c: DMatrix<T>,
    a: Vec<DMatrix<T>>,
    b: DVector<f64>,
    structure: Structure,
}

impl<T: Field> Admm<T> {
    fn gram(&self, rho: f64) -> DMatrix<f64> {
        let hinv: Vec<DMatrix<T>> = self.a.iter().map(|a| Structure::h_inv(a, rho)).collect();
        DMatrix::from_fn(self.a.len(), self.a.len(), |i, j| inner(&self.a[i], &hinv[j]))
    }

    fn run(&self, j0: &DMatrix<T>, opts: &SolverOptions, problem: &SdpProblem) -> Result<SdpSolution> {
        let st = &self.structure;
        let id16 = DMatrix::<T>::identity(N_IN, N_IN);
        let alpha = opts.relaxation;
        let mut rho = opts.rho;
        let mut z1 = j0.clone();
        let mut z2 = st.gamma(j0);
        let mut z3 = &id16 - Structure::tr_out(j0);
        let mut u1 = DMatrix::<T>::zeros(N, N);
        let mut u2 = DMatrix::<T>::zeros(N, N);
        let mut u3 = DMatrix::<T>::zeros(N_IN, N_IN);
        let mut gram = self.gram(rho);
        let mut j = j0.clone();
        let (mut r_norm, mut s_norm) = (f64::INFINITY, f64::INFINITY);
        let mut converged = false;
        let mut iterations = 0;
        let t = |x: f64| T::from_real(x);

        for it in 0..opts.max_iter {
            iterations = it + 1;
            let v1 = &z1 - &u1;
            let v2 = st.gamma(&(&z2 - &u2));
            let v3 = &id16 - &z3 + &u3;
            let rhs = (v1 + v2 + Structure::tr_out_adj(&v3)) * t(rho) + &self.c;
            let j_free = Structure::h_inv(&rhs, rho);
            let g0 = DVector::from_iterator(self.a.len(), self.a.iter().map(|a| inner(a, &j_free)));
            let lambda = bounded_qp(&gram, &(&self.b - g0));
            let mut combo = DMatrix::<T>::zeros(N, N);
            for (l, a) in lambda.iter().zip(&self.a) {
                combo += a * t(*l);
            }
            j = j_free + Structure::h_inv(&combo, rho);

            let gj = st.gamma(&j);
            let cap = &id16 - Structure::tr_out(&j);
            let x1 = &j * t(alpha) + &z1 * t(1.0 - alpha);
            let x2 = &gj * t(alpha) + &z2 * t(1.0 - alpha);
            let x3 = &cap * t(alpha) + &z3 * t(1.0 - alpha);
            let z1n = project_psd(&(&x1 + &u1));
            let z2n = project_psd(&(&x2 + &u2));
            let z3n = project_psd(&(&x3 + &u3));
            u1 += &x1 - &z1n;
            u2 += &x2 - &z2n;
            u3 += &x3 - &z3n;

            r_norm = (frob2(&(&j - &z1n)) + frob2(&(&gj - &z2n)) + frob2(&(&cap - &z3n))).sqrt();
            s_norm = rho * (frob2(&(&z1n - &z1)) + frob2(&(&z2n - &z2)) + frob2(&(&z3n - &z3))).sqrt();
            z1 = z1n;
            z2 = z2n;
            z3 = z3n;

            if r_norm < opts.tol_primal && s_norm < opts.tol_primal && it % 25 == 0 {
                let candidate = Operator::new(j.map(T::to_c64), QUBITS.to_vec())?;
                let res = problem.residuals(&candidate)?;
                let feasible = res["psd_violation"] <= opts.tol_feasibility
                    && res["ppt_violation"] <= opts.tol_feasibility
                    && res["trace_cap_violation"] <= opts.tol_feasibility
                    && res["fidelity_gain_violation"] <= opts.tol_feasibility
                    && res["probability_error"] <= opts.tol_primal;
                if feasible {
                    converged = true;
                    break;
                }
            }
            if it > 0 && it % 50 == 0 {
                let factor = if r_norm > 10.0 * s_norm {
                    2.0
                } else if s_norm > 10.0 * r_norm {
                    0.5
                } else {
                    1.0
                };
                if factor != 1.0 {
                    rho *= factor;
                    let inv = t(1.0 / factor);
                    u1 *= inv;
                    u2 *= inv;
                    u3 *= inv;
                    gram = self.gram(rho);
                }
            }
        }

        let j_op = Operator::new(j.map(T::to_c64), QUBITS.to_vec())?;
        let objective = inner(&self.c, &j);
        let mut residuals = problem.residuals(&j_op)?;
        residuals.insert("admm_primal".into(), r_norm);
        residuals.insert("admm_dual".into(), s_norm);
        let c_norm = frob2(&self.c).sqrt();
        Ok(SdpSolution {
            j: j_op,
            objective,
            objective_uncertainty: c_norm * (r_norm + s_norm / rho),
            residuals,
            iterations,
            converged,
        })
    }
}

/// Solve by over-relaxed ADMM on the splitting `J = Z₁ ⪰ 0`,
/// `Γ(J) = Z₂ ⪰ 0`, `I − tr_out J = Z₃ ⪰ 0`, with the linear constraints
/// enforced exactly in the `J` update. Starts from the trivial protocol
/// scaled to `P̄`.
pub fn solve(problem: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    if !(opts.tol_primal > 0.0 && opts.relaxation > 0.0 && opts.relaxation < 2.0 && opts.rho > 0.0) {
        return Err(Error::Sdp(format!("invalid solver options {opts:?}")));
    }
    let c = problem.objective_kernel()?;
    let mut a = vec![problem.probability_kernel()?];
    a.extend(problem.m_list.iter().cloned());
    let mut b = DVector::zeros(a.len());
    b[0] = problem.p_bar;
    let j0 = problem.initial_choi()?;
    let real = c.is_real() && a.iter().all(Operator::is_real) && j0.is_real();
    if real {
        Admm::<f64> {
            c: convert(&c),
            a: a.iter().map(convert).collect(),
            b,
            structure: Structure::new(),
        }
        .run(&convert(&j0), opts, problem)
    } else {
        Admm::<C64> {
            c: convert(&c),
            a: a.iter().map(convert).collect(),
            b,
            structure: Structure::new(),
        }
        .run(&convert(&j0), opts, problem)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::bell_states;

    #[test]
    fn trivial_protocol_value_on_bell_set() {
        let gp = 0.36;
        let problem = build_problem(&StateSet::bell(), &NoiseModel::global(gp).unwrap(), 1.0).unwrap();
        let j = problem.initial_choi().unwrap();
        assert!((problem.objective(&j).unwrap() - (1.0 - 0.75 * gp)).abs() < 1e-12);
        let res = problem.residuals(&j).unwrap();
        assert!(res.values().all(|&v| v < 1e-12), "{res:?}");
    }

    #[test]
    fn noiseless_single_state_has_value_one() {
        let set = StateSet::new(vec![bell_states()[0].clone()], "phi").unwrap();
        let problem = build_problem(&set, &NoiseModel::global(0.0).unwrap(), 1.0).unwrap();
        let j = problem.initial_choi().unwrap();
        assert!((problem.objective(&j).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sd_assembly() {
        let problem = build_problem(&StateSet::sd(), &NoiseModel::bilocal(0.2, 0.2).unwrap(), 0.1).unwrap();
        assert_eq!(problem.m_list.len(), 4);
        for m in &problem.m_list {
            assert!(m.hermiticity_residual() < 1e-12);
        }
        assert!(problem.q.min_eigenvalue().unwrap() > -1e-12);
        assert!(problem.r.min_eigenvalue().unwrap() > -1e-12);
    }

    #[test]
    fn build_problem_errors() {
        let noise = NoiseModel::global(0.1).unwrap();
        assert!(build_problem(&StateSet::bell(), &noise, 0.0).is_err());
        assert!(build_problem(&StateSet::bell(), &noise, 1.5).is_err());
    }

    #[test]
    fn bounded_qp_matches_enumeration() {
        // G positive definite, compare with brute-force KKT enumeration
        let g = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        for h in [
            DVector::from_row_slice(&[1.0, -1.0, 2.0]),
            DVector::from_row_slice(&[-1.0, 1.0, 1.0]),
            DVector::from_row_slice(&[0.3, -2.0, -1.0]),
        ] {
            let lambda = bounded_qp(&g, &h);
            let w = &h - &g * &lambda;
            assert!(w[0].abs() < 1e-12);
            for i in 1..3 {
                assert!(lambda[i] >= 0.0);
                assert!(w[i] <= 1e-12);
                assert!((lambda[i] * w[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn structure_maps_agree_with_operator_versions() {
        use crate::tensor::random;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(30);
        let h = random::hermitian(&QUBITS, &mut rng);
        let st = Structure::new();
        let hm: DMatrix<C64> = convert(&h);
        let via_table = st.gamma(&hm);
        let direct = h.partial_transpose(&ppt_selector()).unwrap();
        assert!(Operator::new(via_table, QUBITS.to_vec()).unwrap().max_abs_diff(&direct) == 0.0);
        let reduced = Structure::tr_out(&hm);
        let direct = h.partial_trace(&output_selector()).unwrap();
        assert!(Operator::new(reduced, vec![2, 2, 2, 2]).unwrap().max_abs_diff(&direct) < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let problem = build_problem(&StateSet::bell(), &NoiseModel::global(0.2).unwrap(), 0.5).unwrap();
        let text = serde_json::to_string(&problem).unwrap();
        let back: SdpProblem = serde_json::from_str(&text).unwrap();
        assert_eq!(back, problem);
    }
}
