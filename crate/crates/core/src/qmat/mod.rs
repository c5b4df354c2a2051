//! Dense Hermitian linear algebra, state and measurement types, and random sampling.
//!
//! Matrices are small (total dimension at most a few dozen) and always dense.
//! Validated wrappers ([`DensityMatrix`], [`Povm`], [`Ensemble`], ...) check their
//! invariants on construction; internal constructors that come out of exact
//! algebra skip the checks but re-symmetrise.

pub mod linalg;
pub(crate) mod sample;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use linalg::{CMat, CVec, Eigh};
use linalg::{hermitize, max_abs, ONE, ZERO};
use num_complex::Complex64;
pub use sample::{
    random_haar_pure, random_isometry, random_mixed, random_mixed_with_rank, sample_pair,
    sample_state, trial_rng, Measure, RngSpec, TrialRng,
};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const NEG_EIG_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const COMPLETENESS_TOL: f64 = 1e-10;

/// Clip eigenvalues in `[-NEG_EIG_TOL, 0)` to zero.
pub fn clip_eigenvalue(x: f64) -> f64 {
    if x < 0.0 {
        0.0
    } else {
        x
    }
}

/// A Hermitian matrix (not necessarily positive or normalised).
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    mat: CMat,
}

impl HermitianOperator {
    pub fn new(mat: CMat) -> Result<Self> {
        if mat.nrows() != mat.ncols() || mat.nrows() == 0 {
            return Err(Error::InvalidOperator(format!(
                "expected a nonempty square matrix, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let defect = linalg::hermiticity_defect(&mat);
        if defect > HERMITIAN_TOL {
            return Err(Error::InvalidOperator(format!("not Hermitian (defect {defect:e})")));
        }
        Ok(HermitianOperator { mat: hermitize(&mat) })
    }

    pub(crate) fn from_raw(mat: CMat) -> Self {
        HermitianOperator { mat: hermitize(&mat) }
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianOperator { mat: CMat::zeros(dim, dim) }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        HermitianOperator {
            mat: CMat::from_fn(n, n, |i, j| if i == j { Complex64::new(diag[i], 0.0) } else { ZERO }),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        Eigh::new(&self.mat).values
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn scale(&self, s: f64) -> Self {
        HermitianOperator { mat: &self.mat * Complex64::new(s, 0.0) }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(HermitianOperator { mat: &self.mat - &other.mat })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(HermitianOperator { mat: &self.mat + &other.mat })
    }
}

/// A positive semidefinite, unit-trace matrix on a tensor product of factors `dims`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    dims: Vec<usize>,
    mat: CMat,
}

impl DensityMatrix {
    /// Validating constructor.
    pub fn new(dims: Vec<usize>, mat: CMat) -> Result<Self> {
        validate_dims(&dims)?;
        let d: usize = dims.iter().product();
        if mat.nrows() != d || mat.ncols() != d {
            return Err(Error::InvalidState(format!(
                "matrix is {}x{} but dims {:?} multiply to {}",
                mat.nrows(),
                mat.ncols(),
                dims,
                d
            )));
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("non-finite entry".into()));
        }
        let defect = linalg::hermiticity_defect(&mat);
        if defect > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (defect {defect:e})")));
        }
        let tr = mat.trace().re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let mat = hermitize(&mat);
        let min = Eigh::new(&mat).values[0];
        if min < -NEG_EIG_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(DensityMatrix { dims, mat })
    }

    /// Builds a state from a positive matrix produced by exact algebra, dividing by
    /// its trace. Caller guarantees positivity up to rounding.
    pub(crate) fn from_positive_unnormalized(dims: Vec<usize>, mat: CMat) -> Self {
        let tr = mat.trace().re;
        let mat = hermitize(&mat) * Complex64::new(1.0 / tr, 0.0);
        DensityMatrix { dims, mat }
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let d: usize = dims.iter().product();
        DensityMatrix {
            dims,
            mat: CMat::identity(d, d) * Complex64::new(1.0 / d as f64, 0.0),
        }
    }

    /// `|index⟩⟨index|` in the computational basis.
    pub fn basis_state(dims: Vec<usize>, index: usize) -> Result<Self> {
        validate_dims(&dims)?;
        let d: usize = dims.iter().product();
        if index >= d {
            return Err(Error::OutOfRange(format!("basis index {index} >= {d}")));
        }
        let mut mat = CMat::zeros(d, d);
        mat[(index, index)] = ONE;
        Ok(DensityMatrix { dims, mat })
    }

    pub fn diagonal(dims: Vec<usize>, probs: &[f64]) -> Result<Self> {
        let d = probs.len();
        DensityMatrix::new(
            dims,
            CMat::from_fn(d, d, |i, j| if i == j { Complex64::new(probs[i], 0.0) } else { ZERO }),
        )
    }

    pub fn from_pure(psi: &PureStateVector) -> Self {
        let v = &psi.amplitudes;
        DensityMatrix { dims: psi.dims.clone(), mat: v * v.adjoint() }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn as_operator(&self) -> HermitianOperator {
        HermitianOperator { mat: self.mat.clone() }
    }

    pub fn eigh(&self) -> Eigh {
        Eigh::new(&self.mat)
    }

    /// Spectrum with tiny negative eigenvalues clipped to zero.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigh().values.into_iter().map(clip_eigenvalue).collect()
    }

    pub fn purity(&self) -> f64 {
        linalg::re_trace_product(&self.mat, &self.mat)
    }

    /// Same matrix, new factorisation of the same total dimension.
    pub fn with_dims(&self, dims: Vec<usize>) -> Result<Self> {
        validate_dims(&dims)?;
        let d: usize = dims.iter().product();
        if d != self.dim() {
            return Err(Error::DimMismatch { expected: self.dim(), found: d });
        }
        Ok(DensityMatrix { dims, mat: self.mat.clone() })
    }

    /// `(1 - t) self + t other`.
    pub fn mix(&self, other: &DensityMatrix, t: f64) -> Result<Self> {
        self.check_same_dims(other)?;
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::OutOfRange(format!("mixing weight {t} outside [0,1]")));
        }
        Ok(DensityMatrix {
            dims: self.dims.clone(),
            mat: &self.mat * Complex64::new(1.0 - t, 0.0) + &other.mat * Complex64::new(t, 0.0),
        })
    }

    pub fn difference(&self, other: &DensityMatrix) -> Result<HermitianOperator> {
        self.check_same_dims(other)?;
        Ok(HermitianOperator { mat: &self.mat - &other.mat })
    }

    pub(crate) fn check_same_dims(&self, other: &DensityMatrix) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() || dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidState(format!("invalid factor dims {dims:?}")));
    }
    Ok(())
}

/// A unit vector on a tensor product of factors `dims`.
#[derive(Clone, Debug, PartialEq)]
pub struct PureStateVector {
    dims: Vec<usize>,
    amplitudes: CVec,
}

impl PureStateVector {
    pub fn new(dims: Vec<usize>, amplitudes: CVec) -> Result<Self> {
        validate_dims(&dims)?;
        let d: usize = dims.iter().product();
        if amplitudes.len() != d {
            return Err(Error::DimMismatch { expected: d, found: amplitudes.len() });
        }
        let n2 = amplitudes.norm_squared();
        if (n2 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("squared norm {n2} differs from 1")));
        }
        Ok(PureStateVector { dims, amplitudes })
    }

    pub(crate) fn from_unnormalized(dims: Vec<usize>, v: CVec) -> Self {
        let n = v.norm();
        PureStateVector { dims, amplitudes: v / Complex64::new(n, 0.0) }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn amplitudes(&self) -> &CVec {
        &self.amplitudes
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::from_pure(self)
    }
}

/// A finite measurement `{A_i}` with `Σ A_i† A_i = I`.
#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    elements: Vec<CMat>,
}

impl Povm {
    pub fn new(elements: Vec<CMat>) -> Result<Self> {
        let first = elements
            .first()
            .ok_or_else(|| Error::InvalidPovm("no elements".into()))?;
        let d = first.nrows();
        if elements.iter().any(|a| a.nrows() != d || a.ncols() != d) {
            return Err(Error::InvalidPovm("elements must all be square of equal size".into()));
        }
        let mut sum = CMat::zeros(d, d);
        for a in &elements {
            sum += a.adjoint() * a;
        }
        let defect = max_abs(&(sum - CMat::identity(d, d)));
        if defect > COMPLETENESS_TOL {
            return Err(Error::InvalidPovm(format!("completeness defect {defect:e}")));
        }
        Ok(Povm { elements })
    }

    pub fn trivial(dim: usize) -> Self {
        Povm { elements: vec![CMat::identity(dim, dim)] }
    }

    /// Projective measurement onto the columns of a unitary.
    pub fn from_basis(unitary: &CMat) -> Result<Self> {
        let d = unitary.nrows();
        let elements = (0..unitary.ncols())
            .map(|j| {
                let v = unitary.column(j);
                v * v.adjoint()
            })
            .collect::<Vec<CMat>>();
        let _ = d;
        Povm::new(elements)
    }

    pub fn elements(&self) -> &[CMat] {
        &self.elements
    }

    pub fn outcome_count(&self) -> usize {
        self.elements.len()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].nrows()
    }

    /// The effects `A_i† A_i`.
    pub fn effects(&self) -> Vec<CMat> {
        self.elements.iter().map(|a| a.adjoint() * a).collect()
    }
}

/// Weighted list of states on a common space.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    members: Vec<(f64, DensityMatrix)>,
}

impl Ensemble {
    pub fn new(members: Vec<(f64, DensityMatrix)>) -> Result<Self> {
        let Some((_, first)) = members.first() else {
            return Err(Error::InvalidEnsemble("empty ensemble".into()));
        };
        if members.iter().any(|(p, _)| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidEnsemble("negative or non-finite weight".into()));
        }
        let total: f64 = members.iter().map(|(p, _)| p).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidEnsemble(format!("weights sum to {total}")));
        }
        if members.iter().any(|(_, s)| s.dims() != first.dims()) {
            return Err(Error::InvalidEnsemble("members have different dims".into()));
        }
        Ok(Ensemble { members })
    }

    pub fn members(&self) -> &[(f64, DensityMatrix)] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.members.iter().map(|(p, _)| *p).collect()
    }

    pub fn dims(&self) -> &[usize] {
        self.members[0].1.dims()
    }

    /// `Σ p_i ρ_i`.
    pub fn barycenter(&self) -> DensityMatrix {
        let d = self.members[0].1.dim();
        let mut acc = CMat::zeros(d, d);
        for (p, s) in &self.members {
            acc += s.matrix() * Complex64::new(*p, 0.0);
        }
        DensityMatrix { dims: self.dims().to_vec(), mat: hermitize(&acc) }
    }
}

pub fn tensor(a: &DensityMatrix, b: &DensityMatrix) -> DensityMatrix {
    let mut dims = a.dims.clone();
    dims.extend_from_slice(&b.dims);
    DensityMatrix { dims, mat: linalg::kron(&a.mat, &b.mat) }
}

/// Reduced state on the factors listed in `keep` (any order, no repeats).
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let mut sorted = keep.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.is_empty() || sorted.len() != keep.len() || *sorted.last().unwrap() >= rho.dims.len() {
        return Err(Error::InvalidSubsystems { keep: keep.to_vec(), dims: rho.dims.clone() });
    }
    let mat = linalg::partial_trace_raw(&rho.mat, &rho.dims, &sorted);
    let dims = sorted.iter().map(|&i| rho.dims[i]).collect();
    Ok(DensityMatrix { dims, mat: hermitize(&mat) })
}

/// `||A||_1`, the sum of absolute eigenvalues.
pub fn trace_norm(a: &HermitianOperator) -> f64 {
    a.eigenvalues().iter().map(|x| x.abs()).sum()
}

/// `||ρ - σ||_1` (full trace norm, not halved).
pub fn trace_distance_norm(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    Ok(trace_norm(&rho.difference(sigma)?))
}

/// Root fidelity `Tr √(√ρ σ √ρ)`, clamped to `[0, 1]`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    rho.check_same_dims(sigma)?;
    let sqrt_rho = rho.eigh().apply(|x| clip_eigenvalue(x).sqrt());
    let inner = &sqrt_rho * sigma.matrix() * &sqrt_rho;
    let f: f64 = Eigh::new(&inner)
        .values
        .iter()
        .map(|&x| clip_eigenvalue(x).sqrt())
        .sum();
    Ok(f.clamp(0.0, 1.0))
}

/// Purification on `H ⊗ H'` with `dim H' = dim H`: `Σ_k √λ_k |u_k⟩|k⟩`.
pub fn purify(rho: &DensityMatrix) -> PureStateVector {
    let d = rho.dim();
    let eig = rho.eigh();
    let mut v = CVec::zeros(d * d);
    for k in 0..d {
        let w = clip_eigenvalue(eig.values[k]).sqrt();
        if w == 0.0 {
            continue;
        }
        for i in 0..d {
            v[i * d + k] += eig.vectors[(i, k)] * w;
        }
    }
    let mut dims = rho.dims.clone();
    dims.push(d);
    PureStateVector::from_unnormalized(dims, v)
}

/// Splits `Δ = pos - neg` into orthogonally supported positive parts.
pub fn jordan_decompose(delta: &HermitianOperator) -> (HermitianOperator, HermitianOperator) {
    let eig = Eigh::new(delta.matrix());
    let pos = eig.apply(|x| x.max(0.0));
    let neg = eig.apply(|x| (-x).max(0.0));
    (HermitianOperator::from_raw(pos), HermitianOperator::from_raw(neg))
}

/// The swap `V (φ ⊗ χ) = χ ⊗ φ` on `C^d ⊗ C^d`.
pub fn flip_operator(d: usize) -> CMat {
    let mut v = CMat::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            v[(j * d + i, i * d + j)] = ONE;
        }
    }
    v
}

/// `(I - V) / (d² - d)`, the normalised projector onto the antisymmetric subspace.
pub fn antisymmetric_state(d: usize) -> Result<DensityMatrix> {
    if d < 2 {
        return Err(Error::OutOfRange(format!("antisymmetric state needs d >= 2, got {d}")));
    }
    let n = d * d;
    let m = (CMat::identity(n, n) - flip_operator(d)) * Complex64::new(1.0 / (n - d) as f64, 0.0);
    Ok(DensityMatrix { dims: vec![d, d], mat: m })
}

/// `|Φ+⟩ = (|00⟩ + |11⟩)/√2`.
pub fn bell_phi_plus() -> PureStateVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v = CVec::from_vec(vec![Complex64::new(s, 0.0), ZERO, ZERO, Complex64::new(s, 0.0)]);
    PureStateVector { dims: vec![2, 2], amplitudes: v }
}

/// JSON form `{"dims": [...], "re": [[...]], "im": [[...]]}`, row-major.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateJson {
    pub dims: Vec<usize>,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&DensityMatrix> for StateJson {
    fn from(rho: &DensityMatrix) -> Self {
        let d = rho.dim();
        StateJson {
            dims: rho.dims.clone(),
            re: (0..d).map(|i| (0..d).map(|j| rho.mat[(i, j)].re).collect()).collect(),
            im: (0..d).map(|i| (0..d).map(|j| rho.mat[(i, j)].im).collect()).collect(),
        }
    }
}

impl TryFrom<StateJson> for DensityMatrix {
    type Error = Error;

    fn try_from(js: StateJson) -> Result<Self> {
        let d = js.re.len();
        if js.im.len() != d || js.re.iter().chain(js.im.iter()).any(|row| row.len() != d) {
            return Err(Error::Parse("re/im must be square matrices of equal size".into()));
        }
        let mat = CMat::from_fn(d, d, |i, j| Complex64::new(js.re[i][j], js.im[i][j]));
        DensityMatrix::new(js.dims, mat)
    }
}

impl Serialize for DensityMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        StateJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let js = StateJson::deserialize(d)?;
        DensityMatrix::try_from(js).map_err(serde::de::Error::custom)
    }
}

/// Serialised measurement: list of elements in the state-JSON matrix layout.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PovmJson {
    pub elements: Vec<MatrixJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&CMat> for MatrixJson {
    fn from(m: &CMat) -> Self {
        MatrixJson {
            re: (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].re).collect()).collect(),
            im: (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].im).collect()).collect(),
        }
    }
}

impl MatrixJson {
    pub fn to_matrix(&self) -> Result<CMat> {
        let r = self.re.len();
        let c = self.re.first().map_or(0, |row| row.len());
        if self.im.len() != r || self.re.iter().chain(self.im.iter()).any(|row| row.len() != c) {
            return Err(Error::Parse("ragged matrix".into()));
        }
        Ok(CMat::from_fn(r, c, |i, j| Complex64::new(self.re[i][j], self.im[i][j])))
    }
}

impl From<&Povm> for PovmJson {
    fn from(p: &Povm) -> Self {
        PovmJson { elements: p.elements.iter().map(MatrixJson::from).collect() }
    }
}

impl TryFrom<PovmJson> for Povm {
    type Error = Error;

    fn try_from(js: PovmJson) -> Result<Self> {
        Povm::new(js.elements.iter().map(|m| m.to_matrix()).collect::<Result<Vec<_>>>()?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleJson {
    pub members: Vec<EnsembleMemberJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleMemberJson {
    pub weight: f64,
    pub state: DensityMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

impl From<&Ensemble> for EnsembleJson {
    fn from(e: &Ensemble) -> Self {
        EnsembleJson {
            members: e
                .members
                .iter()
                .map(|(p, s)| EnsembleMemberJson { weight: *p, state: s.clone(), value: None })
                .collect(),
        }
    }
}
