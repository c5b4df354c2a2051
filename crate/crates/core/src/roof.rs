//! Pure and mixed convex roofs.
//!
//! Every size-`m` decomposition of a rank-`r` state `ρ = Σ λ_k |u_k⟩⟨u_k|` arises
//! from an `m × r` isometry `V` acting on the purification
//! `φ = Σ_k √λ_k |u_k⟩|k⟩`: measuring the ancilla with rank-one elements whose
//! rows are those of `V` yields pure ensembles (the pure roof), general
//! measurements yield mixed ensembles (the mixed roof). Both roofs are therefore
//! measurement minimisations on `φ` and share the arrowing optimiser.

use num_complex::Complex64;
use serde::Serialize;

use crate::arrowing::{measure_conditionals, optimize_measurement, ArrowOptions, MeasurementKind, MeasurementObjective};
use crate::error::{Error, Result};
use crate::functionals::{
    mutual_information, von_neumann_entropy, Functional, FunctionalValue, MutualInformation, ReducedEntropy,
};
use crate::qmat::linalg::{CMat, CVec};
use crate::qmat::{antisymmetric_state, partial_trace, DensityMatrix, Ensemble, EnsembleJson, PureStateVector};
use crate::reldist::{rel_entropy_distance, ConvexSetSpec, OptimizerConfig};
use crate::stiefel::StiefelObjective;

/// Eigenvalues below this are dropped when building the rank-`r` purification.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct RoofResult {
    pub value: f64,
    pub best_ensemble: Ensemble,
    pub outcome_count: usize,
    pub converged: bool,
}

#[derive(Serialize)]
pub struct RoofResultJson {
    pub value: f64,
    pub outcome_count: usize,
    pub converged: bool,
    pub ensemble: EnsembleJson,
}

impl From<&RoofResult> for RoofResultJson {
    fn from(r: &RoofResult) -> Self {
        RoofResultJson {
            value: r.value,
            outcome_count: r.outcome_count,
            converged: r.converged,
            ensemble: EnsembleJson::from(&r.best_ensemble),
        }
    }
}

/// `Σ_k √λ_k |u_k⟩|k⟩` over the eigenvalues above [`RANK_TOL`], renormalised;
/// the ancilla has dimension `r = rank ρ`.
pub fn minimal_purification(rho: &DensityMatrix) -> PureStateVector {
    let eig = rho.eigh();
    let d = rho.dim();
    let kept: Vec<usize> = (0..d).filter(|&k| eig.values[k] > RANK_TOL).collect();
    let r = kept.len().max(1);
    let mut v = CVec::zeros(d * r);
    for (col, &k) in kept.iter().enumerate() {
        let w = eig.values[k].sqrt();
        for i in 0..d {
            v[i * r + col] = eig.vectors[(i, k)] * w;
        }
    }
    let mut dims = rho.dims().to_vec();
    dims.push(r);
    PureStateVector::from_unnormalized(dims, v)
}

/// Decomposition objective on a fixed purification, exposed for gradient checks.
pub struct RoofProblem {
    purification: DensityMatrix,
    ancilla: usize,
}

impl RoofProblem {
    pub fn new(rho: &DensityMatrix) -> Self {
        Self::from_purification(&minimal_purification(rho)).expect("purification has an ancilla factor")
    }

    /// Any purification whose last factor is the ancilla.
    pub fn from_purification(psi: &PureStateVector) -> Result<Self> {
        let dims = psi.dims();
        if dims.len() < 2 {
            return Err(Error::Precondition("purification needs an ancilla factor".into()));
        }
        Ok(RoofProblem { purification: psi.to_density(), ancilla: dims[dims.len() - 1] })
    }

    pub fn ancilla_dim(&self) -> usize {
        self.ancilla
    }

    pub fn purification(&self) -> &DensityMatrix {
        &self.purification
    }

    /// `Σ_i p_i f(ψ_i)` for the pure decomposition generated by the rows of `v` (`m × r`).
    pub fn value(&self, f: &dyn Functional, v: &CMat) -> Result<f64> {
        Ok(self.objective(f, v)?.value(v))
    }

    /// Euclidean gradient of [`RoofProblem::value`] with respect to `v`
    /// (real inner product `Re Tr[X† Y]`), if `f` has an analytic gradient.
    pub fn gradient(&self, f: &dyn Functional, v: &CMat) -> Result<Option<CMat>> {
        Ok(self.objective(f, v)?.value_and_gradient(v).1)
    }

    fn objective<'a>(&'a self, f: &'a dyn Functional, v: &CMat) -> Result<MeasurementObjective<'a>> {
        if v.ncols() != self.ancilla {
            return Err(Error::DimMismatch { expected: self.ancilla, found: v.ncols() });
        }
        MeasurementObjective::new(&self.purification, f, MeasurementKind::RankOne)
    }

    fn run(&self, f: &dyn Functional, kind: MeasurementKind, m: usize, opts: &ArrowOptions) -> Result<RoofResult> {
        let arrow = optimize_measurement(&self.purification, f, kind, m, opts)?;
        let members = measure_conditionals(&self.purification, &arrow.best_povm)?;
        let total: f64 = members.iter().map(|(p, _)| p).sum();
        let members: Vec<(f64, DensityMatrix)> = members.into_iter().map(|(p, s)| (p / total, s)).collect();
        let value = members.iter().map(|(p, s)| p * f.eval(s).as_f64()).sum();
        Ok(RoofResult {
            value,
            best_ensemble: Ensemble::new(members)?,
            outcome_count: arrow.outcome_count,
            converged: arrow.converged,
        })
    }
}

/// Pure convex roof `f̂(ρ) = inf Σ p_k f(ψ_k)` over pure decompositions of size
/// at most `m` (default `r²`). The value is attained by `best_ensemble`.
pub fn pure_convex_roof(rho: &DensityMatrix, f: &dyn Functional, m: Option<usize>, opts: &ArrowOptions) -> Result<RoofResult> {
    let problem = RoofProblem::new(rho);
    let r = problem.ancilla;
    problem.run(f, MeasurementKind::RankOne, m.unwrap_or(r * r).max(r), opts)
}

/// As [`pure_convex_roof`] but on a caller-supplied purification (last factor = ancilla).
pub fn pure_convex_roof_with_purification(
    psi: &PureStateVector,
    f: &dyn Functional,
    m: Option<usize>,
    opts: &ArrowOptions,
) -> Result<RoofResult> {
    let problem = RoofProblem::from_purification(psi)?;
    let r = problem.ancilla;
    problem.run(f, MeasurementKind::RankOne, m.unwrap_or(r * r).max(r), opts)
}

/// Mixed convex roof `f̃(ρ) = inf Σ p_k f(ρ_k)` over decompositions into at most `m`
/// mixed states (default `d² + 1`). The search starts from the trivial ensemble and
/// from the pure-roof optimum, so the value never exceeds either.
pub fn mixed_convex_roof(rho: &DensityMatrix, f: &dyn Functional, m: Option<usize>, opts: &ArrowOptions) -> Result<RoofResult> {
    let d = rho.dim();
    let problem = RoofProblem::new(rho);
    let r = problem.ancilla;
    let m = m.unwrap_or(d * d + 1).max(1);
    let mut run_opts = opts.clone();
    if run_opts.warm_start.is_none() && r * r <= m {
        let pure_opts = ArrowOptions { warm_start: None, ..opts.clone() };
        let pure = optimize_measurement(&problem.purification, f, MeasurementKind::RankOne, r * r, &pure_opts)?;
        run_opts.warm_start = Some(pure.best_povm);
    }
    problem.run(f, MeasurementKind::General, m, &run_opts)
}

/// Entanglement of formation: pure convex roof of `S_A`.
pub fn entanglement_of_formation(rho_ab: &DensityMatrix, opts: &ArrowOptions) -> Result<RoofResult> {
    if rho_ab.dims().len() != 2 {
        return Err(Error::Precondition(format!("expected a bipartite state, got dims {:?}", rho_ab.dims())));
    }
    pure_convex_roof(rho_ab, &ReducedEntropy::subsystem_a(), None, opts)
}

/// Spectral decomposition of `ρ` (eigenvalues above [`RANK_TOL`]).
pub fn eigen_ensemble(rho: &DensityMatrix) -> Result<Ensemble> {
    let eig = rho.eigh();
    let kept: Vec<usize> = (0..rho.dim()).filter(|&k| eig.values[k] > RANK_TOL).collect();
    let total: f64 = kept.iter().map(|&k| eig.values[k]).sum();
    let members = kept
        .iter()
        .map(|&k| {
            let psi = PureStateVector::from_unnormalized(rho.dims().to_vec(), eig.vectors.column(k).into_owned());
            (eig.values[k] / total, psi.to_density())
        })
        .collect();
    Ensemble::new(members)
}

/// `Σ p_k f(ρ_k)`.
pub fn ensemble_value(ens: &Ensemble, f: &dyn Functional) -> f64 {
    ens.members().iter().map(|(p, s)| p * f.eval(s).as_f64()).sum()
}

/// `E(ρ_ABC) = E_R^D(ρ_AB) + S(ρ_C)` for a convex set `D` on `AB`.
pub struct TripartiteE {
    pub set: ConvexSetSpec,
    pub config: OptimizerConfig,
}

impl TripartiteE {
    pub fn new(set: ConvexSetSpec, config: OptimizerConfig) -> Self {
        TripartiteE { set, config }
    }
}

/// `E(ρ_ABC)`; fails on non-tripartite input or a set on the wrong space.
pub fn tripartite_e(rho_abc: &DensityMatrix, set: &ConvexSetSpec, cfg: &OptimizerConfig) -> Result<f64> {
    if rho_abc.dims().len() != 3 {
        return Err(Error::Precondition(format!("expected a tripartite state, got dims {:?}", rho_abc.dims())));
    }
    let rho_ab = partial_trace(rho_abc, &[0, 1])?;
    let rho_c = partial_trace(rho_abc, &[2])?;
    Ok(rel_entropy_distance(&rho_ab, set, cfg)?.value + von_neumann_entropy(&rho_c))
}

impl Functional for TripartiteE {
    fn name(&self) -> String {
        "tripartite-e".into()
    }

    fn eval(&self, rho: &DensityMatrix) -> FunctionalValue {
        match tripartite_e(rho, &self.set, &self.config) {
            Ok(v) => FunctionalValue::Finite(v),
            Err(_) => FunctionalValue::Infinite,
        }
    }

    fn subextensivity(&self) -> f64 {
        2.0
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RoofGapRecord {
    pub d: usize,
    pub pure_roof_im: f64,
    pub mixed_roof_im: f64,
    pub gap: f64,
    /// `2·E_F` from an independent roof run, which should match the pure roof.
    pub twice_ef: f64,
    /// `I_M` of the state itself, the trivial-ensemble bound for the mixed roof.
    pub trivial_im: f64,
    pub converged: bool,
}

/// Pure vs mixed roof of `I_M` on the antisymmetric state of `C^d ⊗ C^d`.
pub fn roof_gap_antisymmetric(d: usize, opts: &ArrowOptions) -> Result<RoofGapRecord> {
    let rho = antisymmetric_state(d)?;
    let pure = pure_convex_roof(&rho, &MutualInformation, None, opts)?;
    let ef = entanglement_of_formation(&rho, opts)?;
    let mixed = mixed_convex_roof(&rho, &MutualInformation, None, opts)?;
    Ok(RoofGapRecord {
        d,
        pure_roof_im: pure.value,
        mixed_roof_im: mixed.value,
        gap: pure.value - mixed.value,
        twice_ef: 2.0 * ef.value,
        trivial_im: mutual_information(&rho)?,
        converged: pure.converged && mixed.converged && ef.converged,
    })
}

/// Unitary change of basis on the ancilla of a purification; gives another
/// purification of the same state.
pub fn rotate_ancilla(psi: &PureStateVector, u: &CMat) -> Result<PureStateVector> {
    let dims = psi.dims();
    let de = *dims.last().ok_or_else(|| Error::Precondition("empty dims".into()))?;
    if u.nrows() != de || u.ncols() != de {
        return Err(Error::DimMismatch { expected: de, found: u.nrows() });
    }
    let dx = psi.amplitudes().len() / de;
    let a = psi.amplitudes();
    let mut out = CVec::zeros(dx * de);
    for x in 0..dx {
        for e in 0..de {
            let mut s = Complex64::new(0.0, 0.0);
            for f in 0..de {
                s += u[(e, f)] * a[x * de + f];
            }
            out[x * de + e] = s;
        }
    }
    PureStateVector::new(dims.to_vec(), out)
}
