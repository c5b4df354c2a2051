//! Continuity predicates and randomized bound campaigns.
//!
//! A [`ContinuitySpec`] encodes a right-hand side `K·a(ε)·log₂ d + O(a(ε))`, where
//! `a` is the identity (or `√(2ε)` for roof-level bounds) and `O` is one of a few
//! named correction forms. Campaigns draw state pairs from an [`RngSpec`], one
//! independent stream per trial, and report each comparison in a [`BoundReport`].

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{binary_entropy_raw, eta_raw, Functional};
use crate::qmat::sample::sample_pair_with;
use crate::qmat::{jordan_decompose, trace_distance_norm, trial_rng, DensityMatrix, RngSpec};

/// Excess (in bits) tolerated before a bound counts as violated.
pub const DEFAULT_SLACK: f64 = 1e-9;

/// Trace-norm distance above which [`tales_decompose`] refuses a pair.
pub const TALES_MAX_EPS: f64 = 1.0;

const INV_E: f64 = 1.0 / std::f64::consts::E;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrectionForm {
    Zero,
    /// `x`
    Linear,
    /// `H(x)`; arguments above 1 are clamped to 1.
    BinaryEntropy,
    /// `H(min(x, ½))`, the nondecreasing envelope of `H`.
    BinaryEntropyEnvelope,
    /// `η(x) = −x log x`; arguments above 1 are clamped to 1.
    Eta,
    /// `η(min(x, 1/e))`, the nondecreasing envelope of `η`.
    EtaEnvelope,
    /// `√x`
    Sqrt,
}

/// `coeff · form(arg_scale · x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correction {
    pub form: CorrectionForm,
    pub coeff: f64,
    #[serde(default = "one")]
    pub arg_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl Correction {
    pub fn zero() -> Self {
        Correction { form: CorrectionForm::Zero, coeff: 0.0, arg_scale: 1.0 }
    }

    pub fn new(form: CorrectionForm, coeff: f64) -> Self {
        Correction { form, coeff, arg_scale: 1.0 }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let y = (self.arg_scale * x).max(0.0);
        let v = match self.form {
            CorrectionForm::Zero => 0.0,
            CorrectionForm::Linear => y,
            CorrectionForm::BinaryEntropy => binary_entropy_raw(y.min(1.0)),
            CorrectionForm::BinaryEntropyEnvelope => binary_entropy_raw(y.min(0.5)),
            CorrectionForm::Eta => eta_raw(y.min(1.0)),
            CorrectionForm::EtaEnvelope => eta_raw(y.min(INV_E)),
            CorrectionForm::Sqrt => y.sqrt(),
        };
        self.coeff * v
    }

    /// Whether the correction is nondecreasing on `[0, ½]` (checked on a fine grid
    /// plus the analytic turning points).
    pub fn is_monotone_on_half(&self) -> bool {
        let mut xs: Vec<f64> = (0..=2000).map(|k| 0.5 * k as f64 / 2000.0).collect();
        if self.arg_scale > 0.0 {
            for turn in [INV_E, 0.5, 1.0] {
                let x = turn / self.arg_scale;
                if x <= 0.5 {
                    xs.push(x);
                }
            }
        }
        xs.sort_by(f64::total_cmp);
        xs.windows(2).all(|w| self.eval(w[1]) >= self.eval(w[0]) - 1e-15)
    }
}

impl fmt::Display for Correction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.form {
            CorrectionForm::Zero => return write!(f, "0"),
            CorrectionForm::Linear => "",
            CorrectionForm::BinaryEntropy => "H",
            CorrectionForm::BinaryEntropyEnvelope => "Hbar",
            CorrectionForm::Eta => "eta",
            CorrectionForm::EtaEnvelope => "etabar",
            CorrectionForm::Sqrt => "sqrt",
        };
        if self.arg_scale == 1.0 {
            write!(f, "{}*{}(x)", self.coeff, name)
        } else {
            write!(f, "{}*{}({}x)", self.coeff, name, self.arg_scale)
        }
    }
}

/// How the distance enters the bound.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceScale {
    /// `a(ε) = ε`.
    #[default]
    Linear,
    /// `a(ε) = √(2ε)`.
    SqrtTwice,
}

impl DistanceScale {
    pub fn apply(self, eps: f64) -> f64 {
        match self {
            DistanceScale::Linear => eps,
            DistanceScale::SqrtTwice => (2.0 * eps).sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuitySpec {
    pub k: f64,
    pub correction: Correction,
    #[serde(default)]
    pub distance: DistanceScale,
}

impl ContinuitySpec {
    pub fn new(k: f64, correction: Correction) -> Result<Self> {
        let spec = ContinuitySpec { k, correction, distance: DistanceScale::Linear };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_distance(mut self, distance: DistanceScale) -> Self {
        self.distance = distance;
        self
    }

    /// Requires `K >= 0`, a nonnegative finite coefficient and a positive argument
    /// scale; `correction(0) = 0` then holds for every form.
    pub fn validate(&self) -> Result<()> {
        let c = &self.correction;
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return Err(Error::OutOfRange(format!("constant K = {} must be finite and nonnegative", self.k)));
        }
        if !(c.coeff >= 0.0 && c.coeff.is_finite()) {
            return Err(Error::OutOfRange(format!("correction coefficient {} must be finite and nonnegative", c.coeff)));
        }
        if !(c.arg_scale > 0.0 && c.arg_scale.is_finite()) {
            return Err(Error::OutOfRange(format!("correction argument scale {} must be positive", c.arg_scale)));
        }
        Ok(())
    }

    /// `K·a(ε)·log₂ d + O(a(ε))`.
    pub fn rhs(&self, eps: f64, d: usize) -> f64 {
        let a = self.distance.apply(eps);
        self.k * a * (d as f64).log2() + self.correction.eval(a)
    }
}

impl fmt::Display for ContinuitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.distance {
            DistanceScale::Linear => write!(f, "K={}, O={}", self.k, self.correction),
            DistanceScale::SqrtTwice => write!(f, "K={}, O={}, x=sqrt(2eps)", self.k, self.correction),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransferDirection {
    RobustnessToContinuity,
    ContinuityToRobustness,
}

/// Constants obtained by converting one continuity notion into the other:
/// robustness `(K, O)` gives continuity `(2K, 2·O(ε))`; continuity `(K, O)` gives
/// robustness `(2K, O(2δ))`.
pub fn transfer_constants(direction: TransferDirection, spec: &ContinuitySpec) -> ContinuitySpec {
    let mut out = *spec;
    out.k = 2.0 * spec.k;
    match direction {
        TransferDirection::RobustnessToContinuity => out.correction.coeff *= 2.0,
        TransferDirection::ContinuityToRobustness => out.correction.arg_scale *= 2.0,
    }
    out
}

/// `σ = (1−ε)ρ₁ + εγ₁ = (1−ε)ρ₂ + εγ₂` with `ε = ||ρ₁ − ρ₂||₁`.
#[derive(Clone, Debug)]
pub struct TalesWitness {
    pub sigma: DensityMatrix,
    pub gamma1: DensityMatrix,
    pub gamma2: DensityMatrix,
    pub epsilon: f64,
}

impl TalesWitness {
    /// Trace-norm residuals of the two reconstructions of `σ`.
    pub fn residuals(&self, rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<(f64, f64)> {
        let e = self.epsilon;
        let r1 = rho1.mix(&self.gamma1, e)?;
        let r2 = rho2.mix(&self.gamma2, e)?;
        Ok((trace_distance_norm(&self.sigma, &r1)?, trace_distance_norm(&self.sigma, &r2)?))
    }
}

/// Explicit witness with `γ₁ = ((1−ε)/ε)Δ₊ + ((1+ε)/2)·I/d` and `γ₂` likewise with `Δ₋`,
/// where `ρ₂ − ρ₁ = Δ₊ − Δ₋`. For `ε = 0` the fillers are `I/d`.
pub fn tales_decompose(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<TalesWitness> {
    let delta = rho2.difference(rho1)?;
    let (pos, neg) = jordan_decompose(&delta);
    let eps = pos.trace() + neg.trace();
    if eps > TALES_MAX_EPS + 1e-12 {
        return Err(Error::Precondition(format!("trace distance {eps} exceeds {TALES_MAX_EPS}")));
    }
    let dims = rho1.dims().to_vec();
    let mixed = DensityMatrix::maximally_mixed(dims.clone());
    if eps == 0.0 {
        return Ok(TalesWitness { sigma: rho1.clone(), gamma1: mixed.clone(), gamma2: mixed, epsilon: 0.0 });
    }
    let c = |x: f64| Complex64::new(x, 0.0);
    let filler = mixed.matrix() * c((1.0 + eps) / 2.0);
    let w = c((1.0 - eps) / eps);
    let gamma1 = DensityMatrix::new(dims.clone(), pos.matrix() * w + &filler)?;
    let gamma2 = DensityMatrix::new(dims.clone(), neg.matrix() * w + &filler)?;
    let sigma = rho1.mix(&gamma1, eps)?;
    Ok(TalesWitness { sigma, gamma1, gamma2, epsilon: eps })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRecord {
    pub trial: u64,
    pub d: usize,
    pub eps: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub violated: bool,
    /// An inner optimisation did not converge; the comparison may be loose.
    #[serde(default)]
    pub unreliable: bool,
}

impl BoundRecord {
    pub fn new(trial: u64, d: usize, eps: f64, lhs: f64, rhs: f64, slack: f64) -> Self {
        let margin = rhs - lhs;
        BoundRecord { trial, d, eps, lhs, rhs, margin, violated: margin < -slack, unreliable: false }
    }

    pub fn unreliable(mut self, flag: bool) -> Self {
        self.unreliable = flag;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub trials: usize,
    pub violations: usize,
    pub min_margin: Option<f64>,
    pub seed: u64,
    pub skipped: usize,
    pub unreliable: usize,
    pub slack: f64,
    #[serde(default)]
    pub config: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub records: Vec<BoundRecord>,
    pub summary: ReportSummary,
}

impl BoundReport {
    /// Sorts records by trial id and computes the summary.
    pub fn new(mut records: Vec<BoundRecord>, seed: u64, slack: f64, skipped: usize) -> Self {
        records.sort_by_key(|r| r.trial);
        let summary = ReportSummary {
            trials: records.len() + skipped,
            violations: records.iter().filter(|r| r.violated).count(),
            min_margin: records.iter().map(|r| r.margin).min_by(f64::total_cmp),
            seed,
            skipped,
            unreliable: records.iter().filter(|r| r.unreliable).count(),
            slack,
            config: serde_json::Value::Null,
        };
        BoundReport { records, summary }
    }

    pub fn with_config(mut self, config: serde_json::Value) -> Self {
        self.summary.config = config;
        self
    }

    pub fn violations(&self) -> usize {
        self.summary.violations
    }

    /// Concatenates campaigns (e.g. one per dimension) under one seed.
    pub fn merge(reports: Vec<BoundReport>, seed: u64, slack: f64) -> Self {
        let skipped = reports.iter().map(|r| r.summary.skipped).sum();
        let records = reports.into_iter().flat_map(|r| r.records).collect();
        BoundReport::new(records, seed, slack, skipped)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,d,eps,lhs,rhs,margin,violated\n");
        for r in &self.records {
            out.push_str(&format!("{},{},{},{},{},{},{}\n", r.trial, r.d, r.eps, r.lhs, r.rhs, r.margin, r.violated));
        }
        out
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary is serialisable")
    }
}

/// Moves `rho2` towards `rho1` until their distance is at most `max_eps`.
pub fn shrink_pair(rho1: &DensityMatrix, rho2: DensityMatrix, max_eps: f64) -> Result<(DensityMatrix, f64)> {
    let eps = trace_distance_norm(rho1, &rho2)?;
    if eps <= max_eps {
        return Ok((rho2, eps));
    }
    let shrunk = rho1.mix(&rho2, max_eps / eps)?;
    let eps = trace_distance_norm(rho1, &shrunk)?;
    Ok((shrunk, eps))
}

/// Runs `trial` for ids `0..trials` in parallel; `None` marks a skipped trial.
pub fn run_trials<F>(trials: u64, f: F) -> Result<(Vec<BoundRecord>, usize)>
where
    F: Fn(u64) -> Result<Option<BoundRecord>> + Sync + Send,
{
    let results: Vec<Result<Option<BoundRecord>>> = (0..trials).into_par_iter().map(&f).collect();
    let mut records = Vec::new();
    let mut skipped = 0;
    for r in results {
        match r? {
            Some(rec) => records.push(rec),
            None => skipped += 1,
        }
    }
    Ok((records, skipped))
}

/// `|f(ρ₁) − f(ρ₂)| ≤ K ε log d + O(ε)` on sampled pairs, shrunk to `ε ≤ ½`.
pub fn check_asymptotic_continuity(
    f: &dyn Functional,
    spec: &ContinuitySpec,
    sampler: &RngSpec,
    trials: u64,
    dims: &[usize],
) -> Result<BoundReport> {
    spec.validate()?;
    let d: usize = dims.iter().product();
    let (records, skipped) = run_trials(trials, |t| {
        let mut rng = trial_rng(sampler.seed, t);
        let (rho1, rho2) = sample_pair_with(&mut rng, sampler.measure, dims);
        let (rho2, eps) = shrink_pair(&rho1, rho2, 0.5)?;
        let (Some(a), Some(b)) = (f.eval(&rho1).finite(), f.eval(&rho2).finite()) else {
            return Ok(None);
        };
        Ok(Some(BoundRecord::new(t, d, eps, (a - b).abs(), spec.rhs(eps, d), DEFAULT_SLACK)))
    })?;
    Ok(BoundReport::new(records, sampler.seed, DEFAULT_SLACK, skipped))
}

/// `|f((1−δ)ρ₁ + δρ₂) − f(ρ₁)| ≤ K δ log d + O(δ)` with `δ` uniform on `(0, ½]`.
pub fn check_robustness(
    f: &dyn Functional,
    spec: &ContinuitySpec,
    sampler: &RngSpec,
    trials: u64,
    dims: &[usize],
) -> Result<BoundReport> {
    spec.validate()?;
    let (records, skipped) = run_trials(trials, |t| {
        let mut rng = trial_rng(sampler.seed, t);
        let (rho1, rho2) = sample_pair_with(&mut rng, sampler.measure, dims);
        let delta = 0.5 * (1.0 - rng.random::<f64>());
        Ok(robustness_record(f, spec, t, &rho1, &rho2, delta)?)
    })?;
    Ok(BoundReport::new(records, sampler.seed, DEFAULT_SLACK, skipped))
}

/// One robustness comparison; `None` if `f` is infinite at either state.
pub fn robustness_record(
    f: &dyn Functional,
    spec: &ContinuitySpec,
    trial: u64,
    rho1: &DensityMatrix,
    rho2: &DensityMatrix,
    delta: f64,
) -> Result<Option<BoundRecord>> {
    let mixed = rho1.mix(rho2, delta)?;
    let d = rho1.dim();
    let (Some(a), Some(b)) = (f.eval(&mixed).finite(), f.eval(rho1).finite()) else {
        return Ok(None);
    };
    Ok(Some(BoundRecord::new(trial, d, delta, (a - b).abs(), spec.rhs(delta, d), DEFAULT_SLACK)))
}

/// Reconstruction residuals of [`tales_decompose`] on sampled pairs shrunk to `ε ≤ 1`;
/// `lhs` is the larger residual, `rhs` the tolerance `tol`.
pub fn check_tales(sampler: &RngSpec, trials: u64, dims: &[usize], tol: f64) -> Result<BoundReport> {
    let d: usize = dims.iter().product();
    let (records, skipped) = run_trials(trials, |t| {
        let mut rng = trial_rng(sampler.seed, t);
        let (rho1, rho2) = sample_pair_with(&mut rng, sampler.measure, dims);
        let (rho2, _) = shrink_pair(&rho1, rho2, TALES_MAX_EPS)?;
        let w = tales_decompose(&rho1, &rho2)?;
        let (r1, r2) = w.residuals(&rho1, &rho2)?;
        Ok(Some(BoundRecord::new(t, d, w.epsilon, r1.max(r2), tol, 0.0)))
    })?;
    Ok(BoundReport::new(records, sampler.seed, 0.0, skipped))
}
