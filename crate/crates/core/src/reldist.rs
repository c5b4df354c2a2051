//! Relative-entropy distance `E_R^D(ρ) = min_{σ ∈ D} S(ρ|σ)` to a finitely
//! generated convex set `D ∋ I/d`.
//!
//! The objective is convex in the mixing weights `λ` of the generators, so a
//! projected-gradient method on the simplex finds the global minimum up to its
//! tolerance. Gradients use the divided-difference form of the derivative of the
//! matrix logarithm.

use std::f64::consts::LN_2;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuity::{shrink_pair, BoundRecord, BoundReport};
use crate::error::{Error, Result};
use crate::functionals::{
    binary_entropy_raw, relative_entropy, von_neumann_entropy, Functional, FunctionalValue, SUPPORT_TOL,
};
use crate::qmat::linalg::{max_abs, CMat, Eigh};
use crate::qmat::sample::sample_pair_with;
use crate::qmat::{random_mixed, trace_distance_norm, trial_rng, DensityMatrix, Ensemble, RngSpec, StateJson};
use crate::simplex;

/// Slack (bits) for inequality campaigns whose sides both carry optimisation error.
pub const OPTIMIZER_SLACK: f64 = 1e-3;

/// Generators of `D`; always contains `I/d`.
#[derive(Clone, Debug)]
pub struct ConvexSetSpec {
    generators: Vec<DensityMatrix>,
    appended_maximally_mixed: bool,
}

#[derive(Serialize, Deserialize)]
pub struct ConvexSetJson {
    pub states: Vec<StateJson>,
    #[serde(default)]
    pub append_maximally_mixed: bool,
}

impl ConvexSetSpec {
    /// Appends `I/d` when no generator equals it (within 1e-10).
    pub fn new(generators: Vec<DensityMatrix>) -> Result<Self> {
        Self::build(generators, true)
    }

    /// The singleton `{I/d}`.
    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        ConvexSetSpec { generators: vec![DensityMatrix::maximally_mixed(dims)], appended_maximally_mixed: false }
    }

    /// `n` Hilbert–Schmidt random states plus `I/d`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, dims: &[usize], n: usize) -> Self {
        let gens = (0..n).map(|_| random_mixed(rng, dims)).collect();
        Self::new(gens).expect("sampled states share dims")
    }

    fn build(generators: Vec<DensityMatrix>, append: bool) -> Result<Self> {
        let first = generators
            .first()
            .ok_or_else(|| Error::Precondition("convex set needs at least one generator".into()))?;
        let dims = first.dims().to_vec();
        for g in &generators {
            if g.dims() != dims.as_slice() {
                return Err(Error::DimMismatch { expected: first.dim(), found: g.dim() });
            }
        }
        let mixed = DensityMatrix::maximally_mixed(dims);
        let present = generators.iter().any(|g| max_abs(&(g.matrix() - mixed.matrix())) <= 1e-10);
        let mut generators = generators;
        if !present {
            if !append {
                return Err(Error::Precondition("convex set must contain the maximally mixed state".into()));
            }
            generators.push(mixed);
        }
        Ok(ConvexSetSpec { generators, appended_maximally_mixed: !present })
    }

    pub fn generators(&self) -> &[DensityMatrix] {
        &self.generators
    }

    pub fn appended_maximally_mixed(&self) -> bool {
        self.appended_maximally_mixed
    }

    pub fn dims(&self) -> &[usize] {
        self.generators[0].dims()
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    /// `Σ_j λ_j σ_j`.
    pub fn mixture(&self, lambda: &[f64]) -> Result<DensityMatrix> {
        if lambda.len() != self.len() {
            return Err(Error::DimMismatch { expected: self.len(), found: lambda.len() });
        }
        if lambda.iter().any(|&l| l < 0.0) || (lambda.iter().sum::<f64>() - 1.0).abs() > 1e-10 {
            return Err(Error::OutOfRange("weights are not a probability vector".into()));
        }
        Ok(DensityMatrix::from_positive_unnormalized(self.dims().to_vec(), self.mix_raw(lambda)))
    }

    fn mix_raw(&self, lambda: &[f64]) -> CMat {
        let d = self.generators[0].dim();
        let mut m = CMat::zeros(d, d);
        for (l, g) in lambda.iter().zip(&self.generators) {
            if *l != 0.0 {
                m += g.matrix() * num_complex::Complex64::new(*l, 0.0);
            }
        }
        m
    }

    pub fn from_json(json: ConvexSetJson) -> Result<Self> {
        let gens = json.states.into_iter().map(DensityMatrix::try_from).collect::<Result<Vec<_>>>()?;
        Self::build(gens, json.append_maximally_mixed)
    }

    pub fn to_json(&self) -> ConvexSetJson {
        ConvexSetJson { states: self.generators.iter().map(StateJson::from).collect(), append_maximally_mixed: false }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { restarts: 32, max_iter: 5000, tol: 1e-7, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct RelDistResult {
    pub value: f64,
    pub argmin_weights: Vec<f64>,
    pub argmin_state: DensityMatrix,
    pub converged: bool,
    pub iterations: usize,
}

/// `λ ↦ S(ρ | Σ λ_j σ_j)` in bits.
struct Objective<'a> {
    rho: &'a CMat,
    set: &'a ConvexSetSpec,
    neg_entropy: f64,
}

struct Evaluation {
    value: f64,
    eig: Eigh,
    rho_rot: CMat,
}

impl<'a> Objective<'a> {
    fn new(rho: &'a DensityMatrix, set: &'a ConvexSetSpec) -> Self {
        Objective { rho: rho.matrix(), set, neg_entropy: -von_neumann_entropy(rho) }
    }

    fn evaluate(&self, lambda: &[f64]) -> Evaluation {
        let eig = Eigh::new(&self.set.mix_raw(lambda));
        let rho_rot = eig.vectors.adjoint() * self.rho * &eig.vectors;
        let mut cross = 0.0;
        let mut value = self.neg_entropy;
        for (a, &mu) in eig.values.iter().enumerate() {
            let w = rho_rot[(a, a)].re;
            if mu < SUPPORT_TOL {
                if w > SUPPORT_TOL {
                    value = f64::INFINITY;
                }
                continue;
            }
            cross += w * mu.log2();
        }
        if value.is_finite() {
            value -= cross;
        }
        Evaluation { value, eig, rho_rot }
    }

    fn value(&self, lambda: &[f64]) -> f64 {
        self.evaluate(lambda).value
    }

    /// `∂_j = −Re Tr[G σ_j] / ln 2` with `G = U (L ∘ U†ρU) U†` and `L` the divided
    /// differences of `ln` at the eigenvalues of `σ(λ)`.
    fn gradient(&self, ev: &Evaluation) -> Vec<f64> {
        let mu = &ev.eig.values;
        let n = mu.len();
        let mut g_rot = ev.rho_rot.clone();
        for a in 0..n {
            for b in 0..n {
                g_rot[(a, b)] *= log_divided_difference(mu[a], mu[b]);
            }
        }
        let g = &ev.eig.vectors * g_rot * ev.eig.vectors.adjoint();
        self.set
            .generators
            .iter()
            .map(|s| -crate::qmat::linalg::re_trace_product(&g, s.matrix()) / LN_2)
            .collect()
    }
}

/// `(ln x − ln y)/(x − y)`, `1/x` on the diagonal; 0 when either point is in the kernel.
fn log_divided_difference(x: f64, y: f64) -> f64 {
    if x < SUPPORT_TOL || y < SUPPORT_TOL {
        return 0.0;
    }
    if x == y {
        return 1.0 / x;
    }
    // ln(x/y) = ln_1p((x−y)/y) stays accurate for nearly equal arguments.
    ((x - y) / y).ln_1p() / (x - y)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Run {
    lambda: Vec<f64>,
    value: f64,
    converged: bool,
    iterations: usize,
}

/// Spectral projected gradient with Armijo backtracking on the weight simplex.
fn spg(obj: &Objective<'_>, start: Vec<f64>, cfg: &OptimizerConfig) -> Run {
    let mut lambda = simplex::project(&start);
    let mut ev = obj.evaluate(&lambda);
    if !ev.value.is_finite() {
        return Run { lambda, value: f64::INFINITY, converged: false, iterations: 0 };
    }
    let mut g = obj.gradient(&ev);
    let mut alpha = 1.0;
    for it in 0..cfg.max_iter {
        let full: Vec<f64> = lambda.iter().zip(&g).map(|(l, gi)| l - gi).collect();
        let pg: Vec<f64> = simplex::project(&full).iter().zip(&lambda).map(|(p, l)| p - l).collect();
        if norm(&pg) < cfg.tol {
            return Run { lambda, value: ev.value, converged: true, iterations: it };
        }
        let trial: Vec<f64> = lambda.iter().zip(&g).map(|(l, gi)| l - alpha * gi).collect();
        let dir: Vec<f64> = simplex::project(&trial).iter().zip(&lambda).map(|(p, l)| p - l).collect();
        let slope = dot(&g, &dir);
        let mut t = 1.0;
        let mut next = None;
        for _ in 0..60 {
            let cand: Vec<f64> = lambda.iter().zip(&dir).map(|(l, d)| (l + t * d).max(0.0)).collect();
            let cev = obj.evaluate(&cand);
            if cev.value.is_finite() && cev.value <= ev.value + 1e-4 * t * slope {
                next = Some((cand, cev));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, cev)) = next else {
            // No representable decrease left.
            return Run { lambda, value: ev.value, converged: norm(&pg) < cfg.tol.sqrt(), iterations: it };
        };
        let gc = obj.gradient(&cev);
        let s: Vec<f64> = cand.iter().zip(&lambda).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gc.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        alpha = if sy > 0.0 { (dot(&s, &s) / sy).clamp(1e-10, 1e10) } else { 1e10 };
        lambda = cand;
        ev = cev;
        g = gc;
    }
    let full: Vec<f64> = lambda.iter().zip(&g).map(|(l, gi)| l - gi).collect();
    let pg: Vec<f64> = simplex::project(&full).iter().zip(&lambda).map(|(p, l)| p - l).collect();
    Run { lambda, value: ev.value, converged: norm(&pg) < cfg.tol, iterations: cfg.max_iter }
}

/// `E_R^D(ρ)`. The value is attained by `argmin_state ∈ D`, so it upper-bounds the
/// infimum, and never exceeds `S(ρ|σ_j)` for any generator.
pub fn rel_entropy_distance(rho: &DensityMatrix, set: &ConvexSetSpec, cfg: &OptimizerConfig) -> Result<RelDistResult> {
    if rho.dims() != set.dims() {
        return Err(Error::DimMismatch { expected: set.generators[0].dim(), found: rho.dim() });
    }
    let n = set.len();
    let obj = Objective::new(rho, set);

    let mut best = if n == 1 {
        Run { lambda: vec![1.0], value: obj.value(&[1.0]), converged: true, iterations: 0 }
    } else {
        let mut runs: Vec<(usize, Run)> = (0..cfg.restarts.max(1))
            .into_par_iter()
            .map(|r| {
                let start = if r == 0 {
                    vec![1.0 / n as f64; n]
                } else {
                    simplex::random_point(&mut trial_rng(cfg.seed, r as u64), n)
                };
                (r, spg(&obj, start, cfg))
            })
            .collect();
        runs.sort_by_key(|(r, _)| *r);
        let any_converged = runs.iter().any(|(_, run)| run.converged);
        let mut best = runs
            .into_iter()
            .map(|(_, run)| run)
            .min_by(|a, b| a.value.total_cmp(&b.value))
            .expect("at least one restart");
        best.converged = best.converged || any_converged;
        best
    };

    // Vertices are feasible too; they can only help.
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let v = obj.value(&e);
        if v < best.value {
            best = Run { lambda: e, value: v, converged: best.converged, iterations: best.iterations };
        }
    }

    let argmin_state = set.mixture(&best.lambda)?;
    let value = match relative_entropy(rho, &argmin_state)? {
        FunctionalValue::Finite(v) => v,
        FunctionalValue::Infinite => return Err(Error::SupportMismatch),
    };
    Ok(RelDistResult {
        value,
        argmin_weights: best.lambda,
        argmin_state,
        converged: best.converged,
        iterations: best.iterations,
    })
}

/// Gradient of `λ ↦ S(ρ | Σ λ_j σ_j)` with respect to the weights.
pub fn objective_gradient(rho: &DensityMatrix, lambda: &[f64], set: &ConvexSetSpec) -> Result<Vec<f64>> {
    if rho.dims() != set.dims() {
        return Err(Error::DimMismatch { expected: set.generators[0].dim(), found: rho.dim() });
    }
    if lambda.len() != set.len() {
        return Err(Error::DimMismatch { expected: set.len(), found: lambda.len() });
    }
    let obj = Objective::new(rho, set);
    let ev = obj.evaluate(lambda);
    if !ev.value.is_finite() {
        return Err(Error::SupportMismatch);
    }
    Ok(obj.gradient(&ev))
}

/// Objective value at arbitrary (not necessarily normalised) weights; used for
/// finite-difference checks.
pub fn objective_value(rho: &DensityMatrix, lambda: &[f64], set: &ConvexSetSpec) -> f64 {
    Objective::new(rho, set).value(lambda)
}

/// `E_R^D` as a [`Functional`]; without an explicit set it uses `D = {I/d}`.
pub struct RelDistFunctional {
    pub set: Option<ConvexSetSpec>,
    pub config: OptimizerConfig,
}

impl Functional for RelDistFunctional {
    fn name(&self) -> String {
        "relative-entropy-distance".into()
    }

    fn eval(&self, rho: &DensityMatrix) -> FunctionalValue {
        let singleton;
        let set = match &self.set {
            Some(s) => s,
            None => {
                singleton = ConvexSetSpec::maximally_mixed(rho.dims().to_vec());
                &singleton
            }
        };
        match rel_entropy_distance(rho, set, &self.config) {
            Ok(r) => FunctionalValue::Finite(r.value),
            Err(_) => FunctionalValue::Infinite,
        }
    }
}

/// `Σ p_k E_R(ρ_k) − E_R(Σ p_k ρ_k) ≤ S(Σ p_k ρ_k) − Σ p_k S(ρ_k)`, one record.
pub fn check_donation_inequality(ens: &Ensemble, set: &ConvexSetSpec, cfg: &OptimizerConfig) -> Result<BoundReport> {
    Ok(BoundReport::new(vec![donation_record(0, ens, set, cfg)?], cfg.seed, OPTIMIZER_SLACK, 0))
}

pub fn donation_record(trial: u64, ens: &Ensemble, set: &ConvexSetSpec, cfg: &OptimizerConfig) -> Result<BoundRecord> {
    let mut avg_er = 0.0;
    let mut avg_s = 0.0;
    let mut reliable = true;
    for (p, rho) in ens.members() {
        let r = rel_entropy_distance(rho, set, cfg)?;
        reliable &= r.converged;
        avg_er += p * r.value;
        avg_s += p * von_neumann_entropy(rho);
    }
    let bary = ens.barycenter();
    let r = rel_entropy_distance(&bary, set, cfg)?;
    reliable &= r.converged;
    let lhs = avg_er - r.value;
    let rhs = von_neumann_entropy(&bary) - avg_s;
    Ok(BoundRecord::new(trial, bary.dim(), 0.0, lhs, rhs, OPTIMIZER_SLACK).unreliable(!reliable))
}

/// `|E_R((1−δ)ρ + δσ) − E_R(ρ)| ≤ 2δ log d + H(δ)`; `eps` column holds `δ`.
pub fn check_lemma1(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    delta: f64,
    set: &ConvexSetSpec,
    cfg: &OptimizerConfig,
) -> Result<BoundRecord> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::OutOfRange(format!("admixture weight {delta} outside [0,1]")));
    }
    let mixed = rho.mix(sigma, delta)?;
    let a = rel_entropy_distance(&mixed, set, cfg)?;
    let b = rel_entropy_distance(rho, set, cfg)?;
    let d = rho.dim();
    let rhs = 2.0 * delta * (d as f64).log2() + binary_entropy_raw(delta);
    Ok(BoundRecord::new(0, d, delta, (a.value - b.value).abs(), rhs, OPTIMIZER_SLACK)
        .unreliable(!(a.converged && b.converged)))
}

/// `|E_R(ρ) − E_R(σ)| ≤ 4ε log d + 2H(ε)` with `ε = ||ρ − σ||₁ ≤ 1`.
pub fn check_lemma2(rho: &DensityMatrix, sigma: &DensityMatrix, set: &ConvexSetSpec, cfg: &OptimizerConfig) -> Result<BoundRecord> {
    let eps = trace_distance_norm(rho, sigma)?;
    if eps > 1.0 + 1e-12 {
        return Err(Error::Precondition(format!("trace distance {eps} exceeds 1")));
    }
    let a = rel_entropy_distance(rho, set, cfg)?;
    let b = rel_entropy_distance(sigma, set, cfg)?;
    let d = rho.dim();
    let rhs = 4.0 * eps * (d as f64).log2() + 2.0 * binary_entropy_raw(eps.min(1.0));
    Ok(BoundRecord::new(0, d, eps, (a.value - b.value).abs(), rhs, OPTIMIZER_SLACK)
        .unreliable(!(a.converged && b.converged)))
}

/// Lemma-2 campaign on sampled pairs (shrunk to `ε ≤ ½`); trials run sequentially
/// so that the restarts inside each optimisation can use the worker pool.
pub fn lemma2_campaign(
    set: &ConvexSetSpec,
    sampler: &RngSpec,
    trials: u64,
    cfg: &OptimizerConfig,
) -> Result<BoundReport> {
    let dims = set.dims().to_vec();
    let records = (0..trials)
        .map(|t| {
            let mut rng = trial_rng(sampler.seed, t);
            let (rho, sigma) = sample_pair_with(&mut rng, sampler.measure, &dims);
            let (sigma, _) = shrink_pair(&rho, sigma, 0.5)?;
            let mut rec = check_lemma2(&rho, &sigma, set, cfg)?;
            rec.trial = t;
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport::new(records, sampler.seed, OPTIMIZER_SLACK, 0))
}

/// Lemma-1 campaign with `δ` uniform on `(0, ½]`.
pub fn lemma1_campaign(set: &ConvexSetSpec, sampler: &RngSpec, trials: u64, cfg: &OptimizerConfig) -> Result<BoundReport> {
    let dims = set.dims().to_vec();
    let records = (0..trials)
        .map(|t| {
            let mut rng = trial_rng(sampler.seed, t);
            let (rho, sigma) = sample_pair_with(&mut rng, sampler.measure, &dims);
            let delta = 0.5 * (1.0 - rng.random::<f64>());
            let mut rec = check_lemma1(&rho, &sigma, delta, set, cfg)?;
            rec.trial = t;
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport::new(records, sampler.seed, OPTIMIZER_SLACK, 0))
}

/// Donation campaign over random ensembles of `members` Hilbert–Schmidt states.
pub fn donation_campaign(
    set: &ConvexSetSpec,
    members: usize,
    seed: u64,
    trials: u64,
    cfg: &OptimizerConfig,
) -> Result<BoundReport> {
    let dims = set.dims().to_vec();
    let records = (0..trials)
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let w = simplex::random_point(&mut rng, members);
            let ens = Ensemble::new(w.into_iter().map(|p| (p, random_mixed(&mut rng, &dims))).collect())?;
            donation_record(t, &ens, set, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport::new(records, seed, OPTIMIZER_SLACK, 0))
}
