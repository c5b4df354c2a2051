//! Carathéodory reduction of valued ensembles.
//!
//! Each member is a point `(ρ_i, f_i)` in the real affine space of unit-trace
//! Hermitian matrices times `R`, which has dimension `d²`. While the active points
//! are affinely dependent, weight is shifted along the dependency until one
//! weight vanishes; the state barycenter and the mean value are unchanged. At most
//! `d² + 1` members survive.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::functionals::Functional;
use crate::qmat::{DensityMatrix, Ensemble, EnsembleJson, EnsembleMemberJson};

/// Singular values below this (relative to the largest, floor 1) signal a dependency.
pub const NULL_TOL: f64 = 1e-11;

#[derive(Clone, Debug, PartialEq)]
pub struct ValuedEnsemble {
    ensemble: Ensemble,
    values: Vec<f64>,
}

impl ValuedEnsemble {
    pub fn new(ensemble: Ensemble, values: Vec<f64>) -> Result<Self> {
        if values.len() != ensemble.len() {
            return Err(Error::InvalidEnsemble(format!(
                "{} values for {} members",
                values.len(),
                ensemble.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidEnsemble("member values must be finite".into()));
        }
        Ok(ValuedEnsemble { ensemble, values })
    }

    /// Values `f(ρ_i)`; fails if `f` is infinite on a member.
    pub fn from_functional(ensemble: Ensemble, f: &dyn Functional) -> Result<Self> {
        let values = ensemble.members().iter().map(|(_, s)| f.eval(s).as_f64()).collect();
        Self::new(ensemble, values)
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn barycenter(&self) -> DensityMatrix {
        self.ensemble.barycenter()
    }

    /// `Σ p_i f_i`.
    pub fn mean_value(&self) -> f64 {
        self.ensemble.weights().iter().zip(&self.values).map(|(p, v)| p * v).sum()
    }

    pub fn to_json(&self) -> EnsembleJson {
        EnsembleJson {
            members: self
                .ensemble
                .members()
                .iter()
                .zip(&self.values)
                .map(|((p, s), v)| EnsembleMemberJson { weight: *p, state: s.clone(), value: Some(*v) })
                .collect(),
        }
    }

    /// Every member must carry a value.
    pub fn from_json(json: EnsembleJson) -> Result<Self> {
        let mut members = Vec::with_capacity(json.members.len());
        let mut values = Vec::with_capacity(json.members.len());
        for (i, m) in json.members.into_iter().enumerate() {
            values.push(m.value.ok_or_else(|| Error::Parse(format!("member {i} has no value")))?);
            members.push((m.weight, m.state));
        }
        Self::new(Ensemble::new(members)?, values)
    }
}

/// Real coordinates of a Hermitian matrix in an orthonormal basis, then the value.
fn coordinates(rho: &DensityMatrix, value: f64) -> Vec<f64> {
    let m = rho.matrix();
    let d = rho.dim();
    let mut c = Vec::with_capacity(d * d + 1);
    for i in 0..d {
        c.push(m[(i, i)].re);
    }
    let s = std::f64::consts::SQRT_2;
    for i in 0..d {
        for j in (i + 1)..d {
            c.push(s * m[(i, j)].re);
            c.push(s * m[(i, j)].im);
        }
    }
    c.push(value);
    c
}

/// Columns `[x_i; 1]` of the active points, zero-padded to a square matrix so the
/// SVD exposes the whole null space.
fn dependency(points: &[Vec<f64>], active: &[usize]) -> Option<DVector<f64>> {
    let n = active.len();
    if n < 2 {
        return None;
    }
    let rows = points[0].len() + 1;
    let size = rows.max(n);
    let mut a = DMatrix::<f64>::zeros(size, n);
    for (col, &i) in active.iter().enumerate() {
        for (r, &x) in points[i].iter().enumerate() {
            a[(r, col)] = x;
        }
        a[(rows - 1, col)] = 1.0;
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let (k, &smin) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    let smax = svd.singular_values.max();
    (smin <= NULL_TOL * smax.max(1.0)).then(|| v_t.row(k).transpose())
}

/// Removes members while an affine dependency among the `(state, value)` points
/// exists. Output members are a subset of the input; the barycenter and mean value
/// are preserved. Inputs without dependencies are returned unchanged.
pub fn reduce_ensemble(ve: &ValuedEnsemble) -> ValuedEnsemble {
    let members = ve.ensemble.members();
    let points: Vec<Vec<f64>> = members.iter().zip(&ve.values).map(|((_, s), &v)| coordinates(s, v)).collect();
    let mut weights: Vec<f64> = members.iter().map(|(p, _)| *p).collect();
    let mut active: Vec<usize> = (0..members.len()).filter(|&i| weights[i] > 0.0).collect();
    let mut changed = active.len() != members.len();

    while let Some(c) = dependency(&points, &active) {
        // Orient so that some coefficient is positive, then step until a weight hits zero.
        let c: Vec<f64> = if c.iter().any(|&x| x > 0.0) { c.iter().copied().collect() } else { c.iter().map(|x| -x).collect() };
        let (pos, t) = c
            .iter()
            .enumerate()
            .filter(|(_, &ci)| ci > 0.0)
            .map(|(k, &ci)| (k, weights[active[k]] / ci))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("a nonzero dependency has a positive entry");
        for (k, &i) in active.iter().enumerate() {
            weights[i] = (weights[i] - t * c[k]).max(0.0);
        }
        weights[active[pos]] = 0.0;
        active.retain(|&i| weights[i] > 0.0);
        changed = true;
    }

    if !changed {
        return ve.clone();
    }
    let weights = refine(&points, &active, &weights, &barycenter_coords(&points, &ve.ensemble.weights()));
    let total: f64 = active.iter().map(|&i| weights[i]).sum();
    let kept: Vec<(f64, DensityMatrix)> = active.iter().map(|&i| (weights[i] / total, members[i].1.clone())).collect();
    let values = active.iter().map(|&i| ve.values[i]).collect();
    ValuedEnsemble::new(Ensemble::new(kept).expect("subset of a valid ensemble"), values).expect("lengths match")
}

fn barycenter_coords(points: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let mut b = vec![0.0; points[0].len()];
    for (x, &p) in points.iter().zip(weights) {
        for (bi, xi) in b.iter_mut().zip(x) {
            *bi += p * xi;
        }
    }
    b
}

/// Re-solves the weights of the surviving (affinely independent) points against the
/// original barycenter, removing drift accumulated during elimination. Keeps the
/// eliminated weights if the solve is not an improvement or leaves the simplex.
fn refine(points: &[Vec<f64>], active: &[usize], weights: &[f64], target: &[f64]) -> Vec<f64> {
    let rows = target.len() + 1;
    let n = active.len();
    let mut a = DMatrix::<f64>::zeros(rows, n);
    for (col, &i) in active.iter().enumerate() {
        for (r, &x) in points[i].iter().enumerate() {
            a[(r, col)] = x;
        }
        a[(rows - 1, col)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(rows);
    for (r, &x) in target.iter().enumerate() {
        b[r] = x;
    }
    b[rows - 1] = 1.0;
    let current = DVector::from_iterator(n, active.iter().map(|&i| weights[i]));
    let residual = |q: &DVector<f64>| (&a * q - &b).norm();
    let Ok(q) = a.clone().svd(true, true).solve(&b, 1e-14) else {
        return weights.to_vec();
    };
    if q.iter().any(|&x| x < 0.0) || residual(&q) >= residual(&current) {
        return weights.to_vec();
    }
    let mut out = weights.to_vec();
    for (k, &i) in active.iter().enumerate() {
        out[i] = q[k];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::VonNeumann;
    use crate::qmat::{random_mixed, trace_distance_norm, trial_rng};
    use crate::simplex;

    fn random_valued(seed: u64, n: usize, d: usize) -> ValuedEnsemble {
        let mut rng = trial_rng(seed, 0);
        let w = simplex::random_point(&mut rng, n);
        let ens = Ensemble::new(w.into_iter().map(|p| (p, random_mixed(&mut rng, &[d]))).collect()).unwrap();
        ValuedEnsemble::from_functional(ens, &VonNeumann).unwrap()
    }

    fn assert_preserved(a: &ValuedEnsemble, b: &ValuedEnsemble) {
        assert!(trace_distance_norm(&a.barycenter(), &b.barycenter()).unwrap() <= 1e-10);
        assert!((a.mean_value() - b.mean_value()).abs() <= 1e-10);
    }

    #[test]
    fn copies_collapse_to_one_member() {
        let mut rng = trial_rng(1, 0);
        let s = random_mixed(&mut rng, &[2]);
        let ens = Ensemble::new(vec![(0.1, s.clone()); 10]).unwrap();
        let ve = ValuedEnsemble::from_functional(ens, &VonNeumann).unwrap();
        let r = reduce_ensemble(&ve);
        assert_eq!(r.len(), 1);
        assert!((r.ensemble().weights()[0] - 1.0).abs() < 1e-15);
        assert_preserved(&ve, &r);
    }

    #[test]
    fn affine_values_on_a_line_reduce_to_two() {
        let ps = [0.1, 0.4, 0.6, 0.9];
        let members = ps.iter().map(|&p| (0.25, DensityMatrix::diagonal(vec![2], &[p, 1.0 - p]).unwrap())).collect();
        let values = ps.iter().map(|&p| 3.0 * p - 1.0).collect();
        let ve = ValuedEnsemble::new(Ensemble::new(members).unwrap(), values).unwrap();
        let r = reduce_ensemble(&ve);
        assert!(r.len() <= 2, "{}", r.len());
        assert_preserved(&ve, &r);
    }

    #[test]
    fn generic_qubit_ensembles_shrink_to_five() {
        for seed in 0..20 {
            let ve = random_valued(seed, 20, 2);
            let r = reduce_ensemble(&ve);
            assert!(r.len() <= 5, "{}", r.len());
            assert_preserved(&ve, &r);
            let again = reduce_ensemble(&r);
            assert_eq!(again, r);
        }
    }

    #[test]
    fn small_ensembles_are_unchanged() {
        let ve = random_valued(3, 3, 3);
        assert_eq!(reduce_ensemble(&ve), ve);
    }

    #[test]
    fn qutrit_bound() {
        let ve = random_valued(4, 40, 3);
        let r = reduce_ensemble(&ve);
        assert!(r.len() <= 10);
        assert_preserved(&ve, &r);
    }

    #[test]
    fn json_requires_values() {
        let ve = random_valued(5, 4, 2);
        let mut json = ve.to_json();
        assert_eq!(ValuedEnsemble::from_json(json.clone()).unwrap(), ve);
        json.members[0].value = None;
        assert!(ValuedEnsemble::from_json(json).is_err());
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let ve = random_valued(6, 4, 2);
        assert!(ValuedEnsemble::new(ve.ensemble().clone(), vec![0.0; 3]).is_err());
    }
}
