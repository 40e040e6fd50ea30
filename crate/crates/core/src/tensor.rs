//! Dense complex operators on small multipartite Hilbert spaces.
//!
//! Every [`Operator`] carries the ordered list of its subsystem dimensions.
//! Basis indexing is big-endian: the first subsystem is the most significant
//! digit, so `kron(a, b)` has `a`'s factors before `b`'s.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest total dimension any operator may have.
pub const MAX_DIM: usize = 256;
/// Hermiticity tolerance for objects built by exact arithmetic.
pub const EXACT_TOL: f64 = 1e-12;
/// Tolerance applied after an eigensolve.
pub const EIG_TOL: f64 = 1e-10;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct SubsystemSelector {
    indices: Vec<usize>,
}

impl SubsystemSelector {
    /// Indices must be strictly increasing; range is checked against the
    /// operator the selector is used with.
    pub fn new(indices: impl Into<Vec<usize>>) -> Result<Self> {
        let indices = indices.into();
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Selector(format!(
                "indices {indices:?} are not strictly increasing"
            )));
        }
        Ok(Self { indices })
    }

    pub fn single(index: usize) -> Self {
        Self {
            indices: vec![index],
        }
    }

    pub fn range(range: std::ops::Range<usize>) -> Self {
        Self {
            indices: range.collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    fn validate(&self, n_subsystems: usize) -> Result<()> {
        match self.indices.last() {
            Some(&last) if last >= n_subsystems => Err(Error::Selector(format!(
                "index {last} out of range for {n_subsystems} subsystems"
            ))),
            _ => Ok(()),
        }
    }

    /// Complement within `0..n_subsystems`.
    pub fn complement(&self, n_subsystems: usize) -> Self {
        Self {
            indices: (0..n_subsystems).filter(|i| !self.contains(*i)).collect(),
        }
    }
}

impl TryFrom<Vec<usize>> for SubsystemSelector {
    type Error = Error;
    fn try_from(indices: Vec<usize>) -> Result<Self> {
        Self::new(indices)
    }
}

impl From<SubsystemSelector> for Vec<usize> {
    fn from(sel: SubsystemSelector) -> Self {
        sel.indices
    }
}

/// Sorted eigendecomposition of a Hermitian operator. Column `k` of
/// `vectors` belongs to `values[k]`; values are in descending order.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: Operator,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    data: DMatrix<C64>,
    dims: Vec<usize>,
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

/// Part of a flat index contributed by the selected subsystems.
fn selected_part(index: usize, dims: &[usize], strides: &[usize], sel: &SubsystemSelector) -> usize {
    sel.indices()
        .iter()
        .map(|&k| (index / strides[k]) % dims[k] * strides[k])
        .sum()
}

impl Operator {
    pub fn new(data: DMatrix<C64>, dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        let side: usize = dims.iter().product();
        if data.nrows() != data.ncols() {
            return Err(Error::dims("square matrix", (data.nrows(), data.ncols())));
        }
        if side != data.nrows() || dims.is_empty() {
            return Err(Error::dims(dims, data.nrows()));
        }
        if side > MAX_DIM {
            return Err(Error::dims(format!("total dimension <= {MAX_DIM}"), side));
        }
        Ok(Self { data, dims })
    }

    /// Single-factor operator.
    pub fn from_matrix(data: DMatrix<C64>) -> Result<Self> {
        let n = data.nrows();
        Self::new(data, vec![n])
    }

    pub fn from_fn(dims: impl Into<Vec<usize>>, f: impl FnMut(usize, usize) -> C64) -> Result<Self> {
        let dims = dims.into();
        let n = dims.iter().product();
        Self::new(DMatrix::from_fn(n, n, f), dims)
    }

    /// Row-major real entries.
    pub fn from_real(dims: impl Into<Vec<usize>>, entries: &[f64]) -> Result<Self> {
        let dims = dims.into();
        let n: usize = dims.iter().product();
        if entries.len() != n * n {
            return Err(Error::dims(n * n, entries.len()));
        }
        Self::from_fn(dims, |r, c| C64::new(entries[r * n + c], 0.0))
    }

    pub fn identity(dims: impl Into<Vec<usize>>) -> Self {
        let dims = dims.into();
        let n = dims.iter().product();
        Self {
            data: DMatrix::identity(n, n),
            dims,
        }
    }

    pub fn zeros(dims: impl Into<Vec<usize>>) -> Self {
        let dims = dims.into();
        let n = dims.iter().product();
        Self {
            data: DMatrix::zeros(n, n),
            dims,
        }
    }

    pub fn maximally_mixed(dims: impl Into<Vec<usize>>) -> Self {
        let id = Self::identity(dims);
        let d = id.dim() as f64;
        id.scale(1.0 / d)
    }

    /// `|v><v|` for an amplitude vector (not renormalized).
    pub fn projector(amplitudes: &[C64], dims: impl Into<Vec<usize>>) -> Result<Self> {
        let v = DVector::from_column_slice(amplitudes);
        Self::new(&v * v.adjoint(), dims)
    }

    /// `|v><v|` for real amplitudes.
    pub fn projector_real(amplitudes: &[f64], dims: impl Into<Vec<usize>>) -> Result<Self> {
        let v: Vec<C64> = amplitudes.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::projector(&v, dims)
    }

    /// `|i><j|` on the given dims.
    pub fn matrix_unit(dims: impl Into<Vec<usize>>, i: usize, j: usize) -> Self {
        let mut op = Self::zeros(dims);
        op.data[(i, j)] = ONE;
        op
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: C64) {
        self.data[(row, col)] = value;
    }

    /// Reinterpret the same matrix with a different factorization.
    pub fn with_dims(self, dims: impl Into<Vec<usize>>) -> Result<Self> {
        Self::new(self.data, dims)
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            data: self.data.adjoint(),
            dims: self.dims.clone(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            data: self.data.transpose(),
            dims: self.dims.clone(),
        }
    }

    pub fn conjugate(&self) -> Self {
        Self {
            data: self.data.map(|z| z.conj()),
            dims: self.dims.clone(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            data: &self.data * C64::new(s, 0.0),
            dims: self.dims.clone(),
        }
    }

    pub fn scale_complex(&self, s: C64) -> Self {
        Self {
            data: &self.data * s,
            dims: self.dims.clone(),
        }
    }

    /// Matrix product; dims are taken from `self`.
    pub fn matmul(&self, other: &Operator) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::dims(&self.dims, &other.dims));
        }
        Ok(Self {
            data: &self.data * &other.data,
            dims: self.dims.clone(),
        })
    }

    /// `U self U†`.
    pub fn conjugate_by(&self, u: &Operator) -> Result<Self> {
        if self.dim() != u.dim() {
            return Err(Error::dims(&self.dims, &u.dims));
        }
        Ok(Self {
            data: &u.data * &self.data * u.data.adjoint(),
            dims: self.dims.clone(),
        })
    }

    /// `tr(self · other)` without forming the product.
    pub fn trace_product(&self, other: &Operator) -> C64 {
        let n = self.dim();
        let mut acc = ZERO;
        for i in 0..n {
            for j in 0..n {
                acc += self.data[(i, j)] * other.data[(j, i)];
            }
        }
        acc
    }

    /// Real part of the Hilbert–Schmidt inner product `tr(self† other)`.
    pub fn inner_re(&self, other: &Operator) -> f64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_residual(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.data[(i, j)] - self.data[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_residual() <= tol
    }

    /// `(A + A†) / 2`.
    pub fn hermitian_part(&self) -> Self {
        Self {
            data: (&self.data + self.data.adjoint()) * C64::new(0.5, 0.0),
            dims: self.dims.clone(),
        }
    }

    pub fn unitarity_residual(&self) -> f64 {
        let n = self.dim();
        let prod = &self.data * self.data.adjoint();
        (prod - DMatrix::<C64>::identity(n, n))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// True when every imaginary part is exactly zero.
    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }

    /// Kronecker product; `dims = a.dims ++ b.dims`.
    pub fn kron(&self, other: &Operator) -> Result<Self> {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self::new(self.data.kronecker(&other.data), dims)
    }

    /// Kronecker product of a non-empty list of factors.
    pub fn kron_all(factors: &[&Operator]) -> Result<Self> {
        let (first, rest) = factors
            .split_first()
            .ok_or_else(|| Error::dims("at least one factor", 0))?;
        rest.iter().try_fold((*first).clone(), |acc, f| acc.kron(f))
    }

    /// Trace out the selected subsystems; the remaining factors keep their
    /// original order.
    pub fn partial_trace(&self, traced: &SubsystemSelector) -> Result<Self> {
        traced.validate(self.dims.len())?;
        if traced.is_empty() {
            return Ok(self.clone());
        }
        let kept = traced.complement(self.dims.len());
        if kept.is_empty() {
            return Self::new(DMatrix::from_element(1, 1, self.trace()), vec![1]);
        }
        let st = strides(&self.dims);
        let kept_dims: Vec<usize> = kept.indices().iter().map(|&k| self.dims[k]).collect();
        let traced_dims: Vec<usize> = traced.indices().iter().map(|&k| self.dims[k]).collect();
        let kept_st = strides(&kept_dims);
        let traced_st = strides(&traced_dims);
        let nk: usize = kept_dims.iter().product();
        let nt: usize = traced_dims.iter().product();

        // join[k * nt + t] = flat index of (kept = k, traced = t)
        let mut join = vec![0usize; nk * nt];
        for (k, slot) in (0..nk).flat_map(|k| (0..nt).map(move |t| (k, t))).zip(join.iter_mut()) {
            let (k, t) = k;
            let mut idx = 0;
            for (pos, &sub) in kept.indices().iter().enumerate() {
                idx += (k / kept_st[pos]) % kept_dims[pos] * st[sub];
            }
            for (pos, &sub) in traced.indices().iter().enumerate() {
                idx += (t / traced_st[pos]) % traced_dims[pos] * st[sub];
            }
            *slot = idx;
        }
        let data = DMatrix::from_fn(nk, nk, |r, c| {
            (0..nt).fold(ZERO, |acc, t| acc + self.data[(join[r * nt + t], join[c * nt + t])])
        });
        Self::new(data, kept_dims)
    }

    /// Partial transpose on the selected subsystems:
    /// `<i_S i_R| X^{T_S} |j_S j_R> = <j_S i_R| X |i_S j_R>`.
    pub fn partial_transpose(&self, selector: &SubsystemSelector) -> Result<Self> {
        selector.validate(self.dims.len())?;
        let st = strides(&self.dims);
        let n = self.dim();
        let sel: Vec<usize> = (0..n)
            .map(|i| selected_part(i, &self.dims, &st, selector))
            .collect();
        let data = DMatrix::from_fn(n, n, |r, c| {
            let rr = r - sel[r] + sel[c];
            let cc = c - sel[c] + sel[r];
            self.data[(rr, cc)]
        });
        Self::new(data, self.dims.clone())
    }

    /// Reorder subsystems: new factor `k` is old factor `order[k]`.
    pub fn permute(&self, order: &[usize]) -> Result<Self> {
        let n_sub = self.dims.len();
        let mut seen = vec![false; n_sub];
        if order.len() != n_sub || order.iter().any(|&o| o >= n_sub || std::mem::replace(&mut seen[o], true)) {
            return Err(Error::Selector(format!(
                "{order:?} is not a permutation of {n_sub} subsystems"
            )));
        }
        let st = strides(&self.dims);
        let new_dims: Vec<usize> = order.iter().map(|&o| self.dims[o]).collect();
        let new_st = strides(&new_dims);
        let n = self.dim();
        // map[old] = new
        let map: Vec<usize> = (0..n)
            .map(|i| {
                order
                    .iter()
                    .enumerate()
                    .map(|(k, &o)| (i / st[o]) % self.dims[o] * new_st[k])
                    .sum()
            })
            .collect();
        let mut data = DMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                data[(map[r], map[c])] = self.data[(r, c)];
            }
        }
        Self::new(data, new_dims)
    }

    /// Embed a local operator acting on `targets` (in the given order) into
    /// the full space of `dims`, identity elsewhere.
    pub fn embed(local: &Operator, targets: &[usize], dims: &[usize]) -> Result<Self> {
        let local_dims: Vec<usize> = targets.iter().map(|&t| dims[t]).collect();
        if local_dims.iter().product::<usize>() != local.dim() || targets.iter().any(|&t| t >= dims.len()) {
            return Err(Error::dims(local_dims, local.dims()));
        }
        let rest: Vec<usize> = (0..dims.len()).filter(|k| !targets.contains(k)).collect();
        let rest_dims: Vec<usize> = rest.iter().map(|&k| dims[k]).collect();
        let local = local.clone().with_dims(local_dims)?;
        let full = if rest.is_empty() {
            local
        } else {
            local.kron(&Operator::identity(rest_dims))?
        };
        // full is ordered (targets..., rest...); undo that ordering
        let mut current: Vec<usize> = targets.to_vec();
        current.extend_from_slice(&rest);
        let mut order = vec![0; dims.len()];
        for (pos, &orig) in current.iter().enumerate() {
            order[orig] = pos;
        }
        full.permute(&order)
    }

    /// Hermitian eigendecomposition, eigenvalues descending.
    pub fn eig_hermitian(&self) -> Result<HermitianEigen> {
        let scale = self.max_abs().max(1.0);
        let residual = self.hermiticity_residual();
        if residual > EIG_TOL * scale {
            return Err(Error::NotHermitian { residual });
        }
        let eig = self.hermitian_part().data.symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let n = self.dim();
        let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(HermitianEigen {
            values,
            vectors: Operator {
                data: vectors,
                dims: self.dims.clone(),
            },
        })
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self.eig_hermitian()?.values)
    }

    pub fn max_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?[0])
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(*self.eigenvalues()?.last().expect("non-empty"))
    }

    /// Apply `f` to the spectrum of a Hermitian operator.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let eig = self.eig_hermitian()?;
        let v = &eig.vectors.data;
        let fd = DVector::from_iterator(eig.values.len(), eig.values.iter().map(|&x| C64::new(f(x), 0.0)));
        let data = v * DMatrix::from_diagonal(&fd) * v.adjoint();
        Ok(Self {
            data,
            dims: self.dims.clone(),
        })
    }

    /// Square root of a PSD operator (negative rounding noise clipped).
    pub fn sqrt_psd(&self) -> Result<Self> {
        self.spectral_map(|x| x.max(0.0).sqrt())
    }

    /// Nearest PSD operator in Frobenius norm.
    pub fn project_psd(&self) -> Result<Self> {
        self.spectral_map(|x| x.max(0.0))
    }

    /// Leading eigenvector as an amplitude vector.
    pub fn top_eigenvector(&self) -> Result<Vec<C64>> {
        let eig = self.eig_hermitian()?;
        Ok(eig.vectors.data.column(0).iter().copied().collect())
    }

    /// Checks the density-matrix role: Hermitian, PSD and unit trace (or
    /// trace in `[0, 1]` when `allow_subnormalized`).
    pub fn check_density(&self, allow_subnormalized: bool) -> Result<()> {
        let residual = self.hermiticity_residual();
        if residual > EIG_TOL {
            return Err(Error::NotHermitian { residual });
        }
        let min = self.min_eigenvalue()?;
        if min < -EIG_TOL {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
        let tr = self.trace().re;
        let ok = if allow_subnormalized {
            (-EIG_TOL..=1.0 + EIG_TOL).contains(&tr)
        } else {
            (tr - 1.0).abs() <= EIG_TOL
        };
        if !ok {
            return Err(Error::OutOfRange {
                name: "trace",
                value: tr,
                range: if allow_subnormalized { "[0, 1]" } else { "{1}" },
            });
        }
        Ok(())
    }

    /// Unit trace and `tr(ρ²) = 1`.
    pub fn check_pure(&self) -> Result<()> {
        let tr = self.trace().re;
        let purity = self.trace_product(self).re;
        if (tr - 1.0).abs() > EIG_TOL || (purity - 1.0).abs() > 1e-9 || !self.is_hermitian(EIG_TOL) {
            return Err(Error::NotPure(format!("trace {tr}, purity {purity}")));
        }
        Ok(())
    }
}

/// `F(ψ, ρ) = <ψ|ρ|ψ> = tr(ψρ)` for a pure density matrix `ψ`.
pub fn fidelity_pure(psi: &Operator, rho: &Operator) -> Result<f64> {
    psi.check_pure()?;
    if psi.dim() != rho.dim() {
        return Err(Error::dims(psi.dims(), rho.dims()));
    }
    Ok(psi.trace_product(rho).re)
}

/// Uhlmann fidelity `‖√ρ √σ‖₁²`, via the singular values of `√ρ √σ`.
pub fn fidelity_general(rho: &Operator, sigma: &Operator) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::dims(rho.dims(), sigma.dims()));
    }
    for op in [rho, sigma] {
        let min = op.min_eigenvalue()?;
        if min < -EIG_TOL {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
    }
    // singular values avoid square roots of near-zero eigenvalues
    let product = rho.sqrt_psd()?.data * sigma.sqrt_psd()?.data;
    let nuclear: f64 = product.singular_values().iter().sum();
    Ok(nuclear * nuclear)
}

pub fn kron(a: &Operator, b: &Operator) -> Result<Operator> {
    a.kron(b)
}

pub fn partial_trace(op: &Operator, traced: &SubsystemSelector) -> Result<Operator> {
    op.partial_trace(traced)
}

pub fn partial_transpose(op: &Operator, selector: &SubsystemSelector) -> Result<Operator> {
    op.partial_transpose(selector)
}

pub fn eig_hermitian(h: &Operator) -> Result<HermitianEigen> {
    h.eig_hermitian()
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        Operator {
            data: &self.data + &rhs.data,
            dims: self.dims.clone(),
        }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        Operator {
            data: &self.data - &rhs.data,
            dims: self.dims.clone(),
        }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        Operator {
            data: &self.data * &rhs.data,
            dims: self.dims.clone(),
        }
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale(-1.0)
    }
}

impl std::ops::AddAssign<&Operator> for Operator {
    fn add_assign(&mut self, rhs: &Operator) {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        self.data += &rhs.data;
    }
}

impl std::ops::SubAssign<&Operator> for Operator {
    fn sub_assign(&mut self, rhs: &Operator) {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        self.data -= &rhs.data;
    }
}

#[derive(Serialize, Deserialize)]
struct OperatorRepr {
    dims: Vec<usize>,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl Serialize for Operator {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.dim();
        let rows = |f: fn(&C64) -> f64| -> Vec<Vec<f64>> {
            (0..n).map(|r| (0..n).map(|c| f(&self.data[(r, c)])).collect()).collect()
        };
        OperatorRepr {
            dims: self.dims.clone(),
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Operator {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = OperatorRepr::deserialize(deserializer)?;
        let n = repr.re.len();
        if repr.im.len() != n || repr.re.iter().chain(repr.im.iter()).any(|row| row.len() != n) {
            return Err(D::Error::custom("re/im must be square arrays of equal size"));
        }
        Operator::from_fn(repr.dims, |r, c| C64::new(repr.re[r][c], repr.im[r][c])).map_err(D::Error::custom)
    }
}

/// Seeded random states and unitaries.
pub mod random {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn ginibre<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> DMatrix<C64> {
        DMatrix::from_fn(n, m, |_, _| {
            C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
        })
    }

    /// Haar-random unitary via QR of a Ginibre matrix with phase correction.
    pub fn haar_unitary<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Operator {
        let n: usize = dims.iter().product();
        let qr = ginibre(n, n, rng).qr();
        let (q, r) = (qr.q(), qr.r());
        let phases = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                let d = r[(i, i)];
                if d.norm() > 0.0 { d / d.norm() } else { ONE }
            } else {
                ZERO
            }
        });
        Operator {
            data: q * phases,
            dims: dims.to_vec(),
        }
    }

    /// Haar-random element of SU(2).
    pub fn su2<R: Rng + ?Sized>(rng: &mut R) -> Operator {
        let u = haar_unitary(&[2], rng);
        let det = u.data[(0, 0)] * u.data[(1, 1)] - u.data[(0, 1)] * u.data[(1, 0)];
        u.scale_complex(det.sqrt().inv())
    }

    pub fn state_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<C64> {
        let v = ginibre(n, 1, rng);
        let norm = v.norm();
        v.iter().map(|z| z / norm).collect()
    }

    /// Haar-random pure density matrix.
    pub fn pure_state<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Operator {
        let n = dims.iter().product();
        Operator::projector(&state_vector(n, rng), dims.to_vec()).expect("dims match")
    }

    /// Random density matrix `G G† / tr(G G†)` with `G` of shape `d × rank`.
    pub fn density<R: Rng + ?Sized>(dims: &[usize], rank: usize, rng: &mut R) -> Operator {
        let n = dims.iter().product();
        let g = ginibre(n, rank.max(1), rng);
        let rho = &g * g.adjoint();
        let tr = rho.trace();
        Operator {
            data: rho / tr,
            dims: dims.to_vec(),
        }
    }

    /// Random Hermitian matrix with Gaussian entries.
    pub fn hermitian<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Operator {
        let n = dims.iter().product();
        let g = ginibre(n, n, rng);
        Operator {
            data: (&g + g.adjoint()) * C64::new(0.5, 0.0),
            dims: dims.to_vec(),
        }
    }
}
