//! Entropic functionals (base 2) and the classical information quantities.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmat::linalg::{embed_raw, partial_trace_raw, CMat, Eigh};
use crate::qmat::{clip_eigenvalue, partial_trace, DensityMatrix};

/// Eigenvalue below which σ is treated as vanishing when testing supports.
pub const SUPPORT_TOL: f64 = 1e-12;

/// Floor applied to eigenvalues inside logarithms of gradients.
const GRADIENT_EIG_FLOOR: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum FunctionalValue {
    Finite(f64),
    Infinite,
}

impl FunctionalValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            FunctionalValue::Finite(v) => Some(v),
            FunctionalValue::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, FunctionalValue::Infinite)
    }

    /// `+∞` encoded as `f64::INFINITY`.
    pub fn as_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

/// A real-valued function of states, as consumed by the continuity checkers and
/// by the measurement and roof optimisers.
pub trait Functional: Send + Sync {
    fn name(&self) -> String;

    fn eval(&self, rho: &DensityMatrix) -> FunctionalValue;

    /// Hermitian `G` with `f(ρ + tH) = f(ρ) + t·Re Tr[G H] + o(t)` for Hermitian `H`.
    /// `None` when no analytic form is available; optimisers then fall back to
    /// derivative-free search.
    fn gradient(&self, _rho: &DensityMatrix) -> Option<CMat> {
        None
    }

    /// Constant `M` with `|f(ρ)| <= M log d`.
    fn subextensivity(&self) -> f64 {
        1.0
    }
}

/// `η(x) = −x log x`, with `η(0) = 0`.
pub fn eta(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange(format!("eta argument {x} outside [0,1]")));
    }
    Ok(eta_raw(x))
}

pub(crate) fn eta_raw(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * x.log2()
    }
}

/// Binary entropy `H(ε)`.
pub fn binary_entropy(eps: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::OutOfRange(format!("binary entropy argument {eps} outside [0,1]")));
    }
    Ok(binary_entropy_raw(eps))
}

pub(crate) fn binary_entropy_raw(eps: f64) -> f64 {
    eta_raw(eps) + eta_raw(1.0 - eps)
}

/// Shannon entropy of a probability vector.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    p.iter().map(|&x| eta_raw(x)).sum()
}

pub(crate) fn matrix_entropy(m: &CMat) -> f64 {
    Eigh::new(m).values.into_iter().map(|x| eta_raw(clip_eigenvalue(x))).sum()
}

/// `-(log₂ τ + I/ln 2)`, the gradient of `S` at `τ`.
fn entropy_gradient_raw(m: &CMat) -> CMat {
    Eigh::new(m).apply(|x| -(x.max(GRADIENT_EIG_FLOOR).log2() + 1.0 / LN_2))
}

pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    matrix_entropy(rho.matrix())
}

/// `S(ρ|σ) = Tr ρ log ρ − Tr ρ log σ`, infinite when `supp ρ ⊄ supp σ`.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<FunctionalValue> {
    rho.check_same_dims(sigma)?;
    let er = rho.eigh();
    let es = sigma.eigh();
    let overlaps = er.vectors.adjoint() * &es.vectors;
    let mut neg_entropy = 0.0;
    let mut cross = 0.0;
    let mut leaked = 0.0;
    for (i, &p) in er.values.iter().enumerate() {
        let p = clip_eigenvalue(p);
        if p == 0.0 {
            continue;
        }
        neg_entropy += p * p.log2();
        for (j, &q) in es.values.iter().enumerate() {
            let w = overlaps[(i, j)].norm_sqr();
            if q < SUPPORT_TOL {
                leaked += p * w;
            } else {
                cross += p * w * q.log2();
            }
        }
    }
    if leaked > SUPPORT_TOL {
        return Ok(FunctionalValue::Infinite);
    }
    Ok(FunctionalValue::Finite((neg_entropy - cross).max(0.0)))
}

fn require_bipartite(rho: &DensityMatrix) -> Result<()> {
    if rho.dims().len() != 2 {
        return Err(Error::Precondition(format!(
            "expected a bipartite state, got dims {:?}",
            rho.dims()
        )));
    }
    Ok(())
}

/// `I(A:B) = S(ρ_A) + S(ρ_B) − S(ρ_AB)`.
pub fn mutual_information(rho: &DensityMatrix) -> Result<f64> {
    require_bipartite(rho)?;
    let sa = von_neumann_entropy(&partial_trace(rho, &[0])?);
    let sb = von_neumann_entropy(&partial_trace(rho, &[1])?);
    Ok((sa + sb - von_neumann_entropy(rho)).max(0.0))
}

/// `S(A|B) = S(ρ_AB) − S(ρ_B)`.
pub fn conditional_entropy(rho: &DensityMatrix) -> Result<f64> {
    require_bipartite(rho)?;
    Ok(von_neumann_entropy(rho) - von_neumann_entropy(&partial_trace(rho, &[1])?))
}

#[derive(Clone, Copy, Debug, Default)]
pub struct VonNeumann;

impl Functional for VonNeumann {
    fn name(&self) -> String {
        "entropy".into()
    }

    fn eval(&self, rho: &DensityMatrix) -> FunctionalValue {
        FunctionalValue::Finite(von_neumann_entropy(rho))
    }

    fn gradient(&self, rho: &DensityMatrix) -> Option<CMat> {
        Some(entropy_gradient_raw(rho.matrix()))
    }
}

/// Entropy of the marginal on `keep`; `S_A` for bipartite states with `keep = [0]`.
#[derive(Clone, Debug)]
pub struct ReducedEntropy {
    pub keep: Vec<usize>,
}

impl ReducedEntropy {
    pub fn subsystem_a() -> Self {
        ReducedEntropy { keep: vec![0] }
    }
}

impl Functional for ReducedEntropy {
    fn name(&self) -> String {
        format!("reduced-entropy{:?}", self.keep)
    }

    fn eval(&self, rho: &DensityMatrix) -> FunctionalValue {
        FunctionalValue::Finite(matrix_entropy(&partial_trace_raw(rho.matrix(), rho.dims(), &self.keep)))
    }

    fn gradient(&self, rho: &DensityMatrix) -> Option<CMat> {
        let reduced = partial_trace_raw(rho.matrix(), rho.dims(), &self.keep);
        Some(embed_raw(&entropy_gradient_raw(&reduced), rho.dims(), &self.keep))
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct MutualInformation;

impl Functional for MutualInformation {
    fn name(&self) -> String {
        "mutual-information".into()
    }

    fn eval(&self, rho: &DensityMatrix) -> FunctionalValue {
        FunctionalValue::Finite(mutual_information(rho).expect("bipartite input"))
    }

    fn gradient(&self, rho: &DensityMatrix) -> Option<CMat> {
        let dims = rho.dims();
        let m = rho.matrix();
        let ga = embed_raw(&entropy_gradient_raw(&partial_trace_raw(m, dims, &[0])), dims, &[0]);
        let gb = embed_raw(&entropy_gradient_raw(&partial_trace_raw(m, dims, &[1])), dims, &[1]);
        Some(ga + gb - entropy_gradient_raw(m))
    }

    fn subextensivity(&self) -> f64 {
        2.0
    }
}

/// `S(A|B)`; Lipschitz-type bounds for it only scale with `log d_A`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ConditionalEntropy;

impl Functional for ConditionalEntropy {
    fn name(&self) -> String {
        "conditional-entropy".into()
    }

    fn eval(&self, rho: &DensityMatrix) -> FunctionalValue {
        FunctionalValue::Finite(conditional_entropy(rho).expect("bipartite input"))
    }

    fn gradient(&self, rho: &DensityMatrix) -> Option<CMat> {
        let dims = rho.dims();
        let m = rho.matrix();
        let gb = embed_raw(&entropy_gradient_raw(&partial_trace_raw(m, dims, &[1])), dims, &[1]);
        Some(entropy_gradient_raw(m) - gb)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Constant(pub f64);

impl Functional for Constant {
    fn name(&self) -> String {
        format!("constant({})", self.0)
    }

    fn eval(&self, _rho: &DensityMatrix) -> FunctionalValue {
        FunctionalValue::Finite(self.0)
    }

    fn gradient(&self, rho: &DensityMatrix) -> Option<CMat> {
        Some(CMat::zeros(rho.dim(), rho.dim()))
    }

    fn subextensivity(&self) -> f64 {
        0.0
    }
}

/// `τ ↦ reference − S(τ)`.
#[derive(Clone, Copy, Debug)]
pub struct EntropyDeficit {
    pub reference: f64,
}

impl Functional for EntropyDeficit {
    fn name(&self) -> String {
        "entropy-deficit".into()
    }

    fn eval(&self, rho: &DensityMatrix) -> FunctionalValue {
        FunctionalValue::Finite(self.reference - von_neumann_entropy(rho))
    }

    fn gradient(&self, rho: &DensityMatrix) -> Option<CMat> {
        Some(-entropy_gradient_raw(rho.matrix()))
    }
}

/// `−f`, used to turn maximisation into minimisation.
pub struct Negated<'a>(pub &'a dyn Functional);

impl Functional for Negated<'_> {
    fn name(&self) -> String {
        format!("-{}", self.0.name())
    }

    fn eval(&self, rho: &DensityMatrix) -> FunctionalValue {
        match self.0.eval(rho) {
            FunctionalValue::Finite(v) => FunctionalValue::Finite(-v),
            FunctionalValue::Infinite => FunctionalValue::Infinite,
        }
    }

    fn gradient(&self, rho: &DensityMatrix) -> Option<CMat> {
        self.0.gradient(rho).map(|g| -g)
    }

    fn subextensivity(&self) -> f64 {
        self.0.subextensivity()
    }
}

/// Builds a functional from its registry name (`entropy`, `sa`, `mi`, `cond`).
pub fn functional_by_name(name: &str) -> Result<Box<dyn Functional>> {
    Ok(match name {
        "entropy" | "s" => Box::new(VonNeumann),
        "sa" | "reduced-entropy" => Box::new(ReducedEntropy::subsystem_a()),
        "mi" | "mutual-information" => Box::new(MutualInformation),
        "cond" | "conditional-entropy" => Box::new(ConditionalEntropy),
        other => return Err(Error::Parse(format!("unknown functional '{other}'"))),
    })
}

/// Joint distribution `p(x, y, e)`, flattened row-major with `e` fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ClassicalJointJson", into = "ClassicalJointJson")]
pub struct ClassicalJoint {
    nx: usize,
    ny: usize,
    ne: usize,
    p: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassicalJointJson {
    pub nx: usize,
    pub ny: usize,
    pub ne: usize,
    pub p: Vec<f64>,
}

impl TryFrom<ClassicalJointJson> for ClassicalJoint {
    type Error = Error;

    fn try_from(js: ClassicalJointJson) -> Result<Self> {
        ClassicalJoint::new(js.nx, js.ny, js.ne, js.p)
    }
}

impl From<ClassicalJoint> for ClassicalJointJson {
    fn from(j: ClassicalJoint) -> Self {
        ClassicalJointJson { nx: j.nx, ny: j.ny, ne: j.ne, p: j.p }
    }
}

impl ClassicalJoint {
    pub fn new(nx: usize, ny: usize, ne: usize, p: Vec<f64>) -> Result<Self> {
        if nx == 0 || ny == 0 || ne == 0 {
            return Err(Error::Parse("alphabet sizes must be positive".into()));
        }
        if p.len() != nx * ny * ne {
            return Err(Error::DimMismatch { expected: nx * ny * ne, found: p.len() });
        }
        if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::Parse("probabilities must be finite and nonnegative".into()));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Parse(format!("probabilities sum to {total}")));
        }
        Ok(ClassicalJoint { nx, ny, ne, p })
    }

    /// `p(x, y, e)` from a closure, normalised.
    pub fn from_fn(nx: usize, ny: usize, ne: usize, f: impl Fn(usize, usize, usize) -> f64) -> Result<Self> {
        let mut p = Vec::with_capacity(nx * ny * ne);
        for x in 0..nx {
            for y in 0..ny {
                for e in 0..ne {
                    p.push(f(x, y, e));
                }
            }
        }
        let total: f64 = p.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Parse("distribution has no mass".into()));
        }
        p.iter_mut().for_each(|v| *v /= total);
        ClassicalJoint::new(nx, ny, ne, p)
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.nx, self.ny, self.ne)
    }

    pub fn table(&self) -> &[f64] {
        &self.p
    }

    pub fn get(&self, x: usize, y: usize, e: usize) -> f64 {
        self.p[(x * self.ny + y) * self.ne + e]
    }

    /// `I(X;Y)` with E marginalised out.
    pub fn mutual_information_xy(&self) -> f64 {
        let mut pxy = vec![0.0; self.nx * self.ny];
        for x in 0..self.nx {
            for y in 0..self.ny {
                pxy[x * self.ny + y] = (0..self.ne).map(|e| self.get(x, y, e)).sum();
            }
        }
        conditional_mutual_information_table(self.nx, self.ny, 1, &pxy)
    }
}

/// `I(X;Y|E) = Σ_e p(e) I(X;Y|E=e)` for a table indexed `(x, y, e)`, `e` fastest.
pub fn conditional_mutual_information(j: &ClassicalJoint) -> f64 {
    conditional_mutual_information_table(j.nx, j.ny, j.ne, &j.p)
}

pub(crate) fn conditional_mutual_information_table(nx: usize, ny: usize, ne: usize, p: &[f64]) -> f64 {
    // H(XE) + H(YE) − H(XYE) − H(E)
    let mut pxe = vec![0.0; nx * ne];
    let mut pye = vec![0.0; ny * ne];
    let mut pe = vec![0.0; ne];
    for x in 0..nx {
        for y in 0..ny {
            for e in 0..ne {
                let v = p[(x * ny + y) * ne + e];
                pxe[x * ne + e] += v;
                pye[y * ne + e] += v;
                pe[e] += v;
            }
        }
    }
    let value = shannon_entropy(&pxe) + shannon_entropy(&pye) - shannon_entropy(p) - shannon_entropy(&pe);
    value.max(0.0)
}

#[cfg(test)]
fn complex(re: f64) -> num_complex::Complex64 {
    num_complex::Complex64::new(re, 0.0)
}
