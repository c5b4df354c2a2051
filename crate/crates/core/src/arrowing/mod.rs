//! Arrowing: optimising an outcome-averaged functional of system X over
//! finite measurements on an ancilla E.
//!
//! A measurement with `m` outcomes is parametrised by an isometry `V` whose
//! row blocks are the Kraus operators `A_i`; `V†V = Σ A_i†A_i = I` holds by
//! construction. General measurements use `d_E × d_E` blocks, rank-one
//! measurements use single rows (`A_i = |0⟩⟨b_i|`).

mod intrinsic;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{EntropyDeficit, Functional, Negated};
use crate::qmat::linalg::{ancilla_contraction, conditional_block, re_trace_product, CMat, Eigh};
use crate::qmat::{partial_trace, random_isometry, trial_rng, DensityMatrix, Povm, PovmJson};
use crate::stiefel::{self, StiefelObjective, StiefelOptions};

pub use intrinsic::{intrinsic_information, IntrinsicOptions, IntrinsicResult, StochasticChannel};

/// Outcomes less likely than this are dropped; their conditional state is undefined.
pub const OUTCOME_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementKind {
    General,
    RankOne,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArrowOptions {
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    /// Extra starting point, padded with zero outcomes to the budget.
    #[serde(skip)]
    pub warm_start: Option<Povm>,
}

impl Default for ArrowOptions {
    fn default() -> Self {
        ArrowOptions { restarts: 32, max_iter: 2000, tol: 1e-6, seed: 0, warm_start: None }
    }
}

#[derive(Clone, Debug)]
pub struct ArrowResult {
    pub value: f64,
    pub best_povm: Povm,
    pub outcome_count: usize,
    pub converged: bool,
    pub restarts: usize,
}

#[derive(Serialize)]
pub struct ArrowResultJson {
    pub value: f64,
    pub outcome_count: usize,
    pub converged: bool,
    pub restarts: usize,
    pub povm: PovmJson,
}

impl From<&ArrowResult> for ArrowResultJson {
    fn from(r: &ArrowResult) -> Self {
        ArrowResultJson {
            value: r.value,
            outcome_count: r.outcome_count,
            converged: r.converged,
            restarts: r.restarts,
            povm: PovmJson::from(&r.best_povm),
        }
    }
}

/// Splits `dims = [x..., e]` into (X factor dims, `d_X`, `d_E`).
fn split_ancilla(rho_xe: &DensityMatrix) -> Result<(Vec<usize>, usize, usize)> {
    let dims = rho_xe.dims();
    if dims.len() < 2 {
        return Err(Error::Precondition(format!(
            "expected a state on X ⊗ E (at least two factors), got dims {dims:?}"
        )));
    }
    let (x, e) = dims.split_at(dims.len() - 1);
    Ok((x.to_vec(), x.iter().product(), e[0]))
}

/// Outcome probabilities and conditional states of X for measurement `povm` on E.
/// Outcomes with `p_i < OUTCOME_TOL` are dropped.
pub fn measure_conditionals(rho_xe: &DensityMatrix, povm: &Povm) -> Result<Vec<(f64, DensityMatrix)>> {
    let (dims_x, dx, de) = split_ancilla(rho_xe)?;
    if povm.dim() != de {
        return Err(Error::DimMismatch { expected: de, found: povm.dim() });
    }
    Ok(povm
        .effects()
        .iter()
        .filter_map(|eff| {
            let w = conditional_block(rho_xe.matrix(), dx, de, eff);
            let p = w.trace().re;
            (p >= OUTCOME_TOL).then(|| (p, DensityMatrix::from_positive_unnormalized(dims_x.clone(), w)))
        })
        .collect())
}

/// `F(ρ, M) = Σ_i p_i f(ρ^i_X)`.
pub fn avg_under_measurement(rho_xe: &DensityMatrix, povm: &Povm, f: &dyn Functional) -> Result<f64> {
    Ok(measure_conditionals(rho_xe, povm)?
        .iter()
        .map(|(p, s)| p * f.eval(s).as_f64())
        .sum())
}

/// Objective `V ↦ F(ρ, M(V))` on the isometry manifold.
pub(crate) struct MeasurementObjective<'a> {
    rho: &'a CMat,
    dims_x: Vec<usize>,
    dx: usize,
    de: usize,
    block_rows: usize,
    f: &'a dyn Functional,
}

impl<'a> MeasurementObjective<'a> {
    pub(crate) fn new(rho_xe: &'a DensityMatrix, f: &'a dyn Functional, kind: MeasurementKind) -> Result<Self> {
        let (dims_x, dx, de) = split_ancilla(rho_xe)?;
        let block_rows = match kind {
            MeasurementKind::General => de,
            MeasurementKind::RankOne => 1,
        };
        Ok(MeasurementObjective { rho: rho_xe.matrix(), dims_x, dx, de, block_rows, f })
    }

    fn effect(&self, v: &CMat, i: usize) -> CMat {
        let block = v.rows(i * self.block_rows, self.block_rows);
        block.adjoint() * block
    }

    fn outcomes(&self, v: &CMat) -> usize {
        v.nrows() / self.block_rows
    }

    pub(crate) fn to_povm(&self, v: &CMat) -> Result<Povm> {
        let de = self.de;
        let elements = (0..self.outcomes(v))
            .map(|i| {
                let block = v.rows(i * self.block_rows, self.block_rows);
                let mut a = CMat::zeros(de, de);
                a.rows_mut(0, self.block_rows).copy_from(&block);
                a
            })
            .collect();
        Povm::new(elements)
    }

    /// Isometry reproducing `povm`'s effects, padded to `outcomes` blocks.
    pub(crate) fn from_povm(&self, povm: &Povm, outcomes: usize) -> Result<CMat> {
        if povm.dim() != self.de {
            return Err(Error::DimMismatch { expected: self.de, found: povm.dim() });
        }
        if povm.outcome_count() > outcomes {
            return Err(Error::Precondition(format!(
                "warm start has {} outcomes, budget is {outcomes}",
                povm.outcome_count()
            )));
        }
        let k = self.block_rows;
        let mut v = CMat::zeros(outcomes * k, self.de);
        for (i, eff) in povm.effects().iter().enumerate() {
            // Any square root B of the effect with B†B = E reproduces the outcome statistics.
            let eig = Eigh::new(eff);
            let rank_tol = 1e-12;
            let mut rows = Vec::new();
            for j in (0..self.de).rev() {
                let lam = eig.values[j];
                if lam > rank_tol {
                    rows.push(eig.vectors.column(j).adjoint() * Complex64::new(lam.sqrt(), 0.0));
                }
            }
            if rows.len() > k {
                return Err(Error::Precondition("warm start element exceeds the rank-one restriction".into()));
            }
            for (r, row) in rows.iter().enumerate() {
                v.row_mut(i * k + r).copy_from(row);
            }
        }
        Ok(crate::qmat::linalg::qr_orthonormalize(&v))
    }

    /// `(p_i, W_i)` for every outcome, unnormalised conditional blocks.
    fn blocks(&self, v: &CMat) -> Vec<(f64, CMat)> {
        (0..self.outcomes(v))
            .map(|i| {
                let w = conditional_block(self.rho, self.dx, self.de, &self.effect(v, i));
                (w.trace().re, w)
            })
            .collect()
    }
}

impl StiefelObjective for MeasurementObjective<'_> {
    fn value(&self, v: &CMat) -> f64 {
        self.blocks(v)
            .into_iter()
            .filter(|(p, _)| *p >= OUTCOME_TOL)
            .map(|(p, w)| p * self.f.eval(&DensityMatrix::from_positive_unnormalized(self.dims_x.clone(), w)).as_f64())
            .sum()
    }

    fn value_and_gradient(&self, v: &CMat) -> (f64, Option<CMat>) {
        let mut total = 0.0;
        let mut grad = CMat::zeros(v.nrows(), v.ncols());
        for (i, (p, w)) in self.blocks(v).into_iter().enumerate() {
            if p < OUTCOME_TOL {
                continue;
            }
            let tau = DensityMatrix::from_positive_unnormalized(self.dims_x.clone(), w);
            let fv = self.f.eval(&tau).as_f64();
            total += p * fv;
            let Some(g) = self.f.gradient(&tau) else {
                return (self.value(v), None);
            };
            // Gradient of the perspective W ↦ Tr(W) f(W / Tr W).
            let shift = fv - re_trace_product(tau.matrix(), &g);
            let mut gp = g;
            for d in 0..self.dx {
                gp[(d, d)] += Complex64::new(shift, 0.0);
            }
            let r = ancilla_contraction(self.rho, self.dx, self.de, &gp);
            let block = v.rows(i * self.block_rows, self.block_rows);
            let z = block * r * Complex64::new(2.0, 0.0);
            grad.rows_mut(i * self.block_rows, self.block_rows).copy_from(&z);
        }
        (total, Some(grad))
    }
}

/// Starting isometry with the first `de` outcomes projecting on the computational
/// basis (general: a single identity block, i.e. the trivial measurement).
fn anchor_start(obj: &MeasurementObjective<'_>, outcomes: usize) -> CMat {
    let rows = outcomes * obj.block_rows;
    let mut v = CMat::zeros(rows, obj.de);
    for j in 0..obj.de.min(rows) {
        v[(j, j)] = Complex64::new(1.0, 0.0);
    }
    v
}

pub(crate) fn optimize_measurement(
    rho_xe: &DensityMatrix,
    f: &dyn Functional,
    kind: MeasurementKind,
    outcomes: usize,
    opts: &ArrowOptions,
) -> Result<ArrowResult> {
    if outcomes == 0 {
        return Err(Error::Precondition("outcome budget must be at least 1".into()));
    }
    let obj = MeasurementObjective::new(rho_xe, f, kind)?;
    let rows = outcomes * obj.block_rows;
    if rows < obj.de {
        return Err(Error::Precondition(format!(
            "rank-one measurements on a {}-dimensional ancilla need at least {} outcomes",
            obj.de, obj.de
        )));
    }
    let mut starts = vec![anchor_start(&obj, outcomes)];
    if let Some(ws) = &opts.warm_start {
        starts.push(obj.from_povm(ws, outcomes)?);
    }
    let n_random = opts.restarts.saturating_sub(starts.len());
    let base = starts.len();
    let sopts = StiefelOptions { max_iter: opts.max_iter, tol: opts.tol };

    let mut runs: Vec<(usize, stiefel::StiefelOutcome)> = (0..base + n_random)
        .into_par_iter()
        .map(|r| {
            let mut rng = trial_rng(opts.seed, r as u64);
            let start = if r < base { starts[r].clone() } else { random_isometry(&mut rng, rows, obj.de) };
            (r, stiefel::minimize(&obj, start, sopts, &mut rng))
        })
        .collect();
    runs.sort_by_key(|(r, _)| *r);
    let (_, best) = runs
        .iter()
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value))
        .expect("at least one start");
    let best_povm = obj.to_povm(&best.point)?;
    // Report the value of the exported measurement itself.
    let value = avg_under_measurement(rho_xe, &best_povm, f)?;
    Ok(ArrowResult {
        value,
        best_povm,
        outcome_count: outcomes,
        converged: best.converged,
        restarts: runs.len(),
    })
}

fn default_budget(rho_xe: &DensityMatrix) -> usize {
    let de = *rho_xe.dims().last().unwrap_or(&1);
    de * de + 1
}

/// `f↓(ρ_XE)`: infimum of `F(ρ, M)` over measurements on E with at most `m` outcomes
/// (default `d_E² + 1`). The reported value is attained by `best_povm`, hence an
/// upper bound on the infimum.
pub fn arrow_down(rho_xe: &DensityMatrix, f: &dyn Functional, m: Option<usize>, opts: &ArrowOptions) -> Result<ArrowResult> {
    let m = m.unwrap_or_else(|| default_budget(rho_xe));
    optimize_measurement(rho_xe, f, MeasurementKind::General, m, opts)
}

/// `f↑(ρ_XE)`: supremum counterpart of [`arrow_down`]; the value is a lower bound.
pub fn arrow_up(rho_xe: &DensityMatrix, f: &dyn Functional, m: Option<usize>, opts: &ArrowOptions) -> Result<ArrowResult> {
    let neg = Negated(f);
    let mut r = arrow_down(rho_xe, &neg, m, opts)?;
    r.value = -r.value;
    Ok(r)
}

/// `f↓cpl`: as [`arrow_down`] but every measurement element has rank one.
pub fn arrow_down_cpl(rho_xe: &DensityMatrix, f: &dyn Functional, m: Option<usize>, opts: &ArrowOptions) -> Result<ArrowResult> {
    let m = m.unwrap_or_else(|| default_budget(rho_xe));
    optimize_measurement(rho_xe, f, MeasurementKind::RankOne, m, opts)
}

/// Runs [`arrow_down`]-type optimisations for increasing budgets, warm-starting
/// each from the previous optimum, so reported values are nonincreasing in `m`.
pub fn arrow_down_budget_scan(
    rho_xe: &DensityMatrix,
    f: &dyn Functional,
    kind: MeasurementKind,
    budgets: &[usize],
    opts: &ArrowOptions,
) -> Result<Vec<ArrowResult>> {
    let mut sorted = budgets.to_vec();
    sorted.sort_unstable();
    let mut out: Vec<ArrowResult> = Vec::with_capacity(sorted.len());
    let mut run_opts = opts.clone();
    for m in sorted {
        if let Some(prev) = out.last() {
            run_opts.warm_start = Some(prev.best_povm.clone());
        }
        out.push(optimize_measurement(rho_xe, f, kind, m, &run_opts)?);
    }
    Ok(out)
}

/// Classical correlation `C←(ρ_AB) = max_M [S(ρ_A) − Σ_i p_i S(ρ^i_A)]`, measuring B.
pub fn classical_correlation_backward(rho_ab: &DensityMatrix, m: Option<usize>, opts: &ArrowOptions) -> Result<ArrowResult> {
    if rho_ab.dims().len() != 2 {
        return Err(Error::Precondition(format!("expected a bipartite state, got dims {:?}", rho_ab.dims())));
    }
    let reference = crate::functionals::von_neumann_entropy(&partial_trace(rho_ab, &[0])?);
    arrow_up(rho_ab, &EntropyDeficit { reference }, m, opts)
}

/// Rank-one projective measurement `{|n⟩⟨n|, |−n⟩⟨−n|}` along Bloch direction `(θ, φ)`.
pub fn qubit_projective(theta: f64, phi: f64) -> Povm {
    let (s, c) = ((theta / 2.0).sin(), (theta / 2.0).cos());
    let e = Complex64::from_polar(1.0, phi);
    let up = [Complex64::new(c, 0.0), e * s];
    let down = [Complex64::new(-s, 0.0), e * c];
    let proj = |v: [Complex64; 2]| CMat::from_fn(2, 2, |i, j| v[i] * v[j].conj());
    Povm::new(vec![proj(up), proj(down)]).expect("orthonormal basis")
}

/// Draws a random measurement with `m` outcomes on a `d`-dimensional space.
pub fn random_povm<R: Rng + ?Sized>(rng: &mut R, d: usize, m: usize, kind: MeasurementKind) -> Povm {
    let k = match kind {
        MeasurementKind::General => d,
        MeasurementKind::RankOne => 1,
    };
    let v = random_isometry(rng, (m * k).max(d), d);
    let elements = (0..(v.nrows() / k))
        .map(|i| {
            let mut a = CMat::zeros(d, d);
            a.rows_mut(0, k).copy_from(&v.rows(i * k, k));
            a
        })
        .collect();
    Povm::new(elements).expect("isometry blocks form a measurement")
}
