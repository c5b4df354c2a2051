//! Local search on the complex Stiefel manifold `{V : V†V = I}` with QR retraction.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::qmat::linalg::{frobenius_inner, herm_part, qr_orthonormalize, CMat};

pub(crate) trait StiefelObjective {
    /// Objective value; `+∞` marks infeasible points.
    fn value(&self, v: &CMat) -> f64;

    /// Value and Euclidean gradient w.r.t. the real inner product `Re Tr[X† Y]`,
    /// or `None` if no analytic gradient exists.
    fn value_and_gradient(&self, v: &CMat) -> (f64, Option<CMat>);
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct StiefelOptions {
    pub max_iter: usize,
    pub tol: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct StiefelOutcome {
    pub point: CMat,
    pub value: f64,
    pub converged: bool,
}

/// Projection of an ambient direction onto the tangent space at `v`.
pub(crate) fn tangent_projection(v: &CMat, z: &CMat) -> CMat {
    z - v * herm_part(&(v.adjoint() * z))
}

pub(crate) fn retract(v: &CMat, step: &CMat) -> CMat {
    qr_orthonormalize(&(v + step))
}

const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;

pub(crate) fn minimize<R: Rng + ?Sized>(
    obj: &dyn StiefelObjective,
    start: CMat,
    opts: StiefelOptions,
    rng: &mut R,
) -> StiefelOutcome {
    let (f0, grad) = obj.value_and_gradient(&start);
    match grad {
        Some(g) => gradient_descent(obj, start, f0, g, opts),
        None => pattern_search(obj, start, f0, opts, rng),
    }
}

/// Riemannian gradient descent with Barzilai–Borwein trial steps and Armijo backtracking.
fn gradient_descent(
    obj: &dyn StiefelObjective,
    mut v: CMat,
    mut fv: f64,
    egrad: CMat,
    opts: StiefelOptions,
) -> StiefelOutcome {
    let mut xi = tangent_projection(&v, &egrad);
    let mut prev: Option<(CMat, CMat)> = None;
    let mut alpha = 1.0;
    for _ in 0..opts.max_iter {
        let gnorm2 = frobenius_inner(&xi, &xi);
        if gnorm2.sqrt() < opts.tol {
            return StiefelOutcome { point: v, value: fv, converged: true };
        }
        if let Some((pv, pxi)) = &prev {
            let s = &v - pv;
            let y = &xi - pxi;
            let sy = frobenius_inner(&s, &y).abs();
            if sy > 1e-300 {
                alpha = (frobenius_inner(&s, &s) / sy).clamp(1e-8, 1e4);
            }
        }
        let mut t = alpha;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let cand = retract(&v, &(&xi * Complex64::new(-t, 0.0)));
            let fc = obj.value(&cand);
            if fc.is_finite() && fc <= fv - ARMIJO_C * t * gnorm2 {
                accepted = Some(cand);
                break;
            }
            t *= 0.5;
        }
        let Some(next) = accepted else {
            // No decrease along the gradient at machine precision: stationary for practical purposes.
            return StiefelOutcome { point: v, value: fv, converged: gnorm2.sqrt() < opts.tol.sqrt() };
        };
        let (fn_, g) = obj.value_and_gradient(&next);
        let g = g.expect("gradient availability does not change");
        let xi_next = tangent_projection(&next, &g);
        prev = Some((v, xi));
        v = next;
        fv = fn_;
        xi = xi_next;
    }
    let converged = frobenius_inner(&xi, &xi).sqrt() < opts.tol;
    StiefelOutcome { point: v, value: fv, converged }
}

fn random_tangent<R: Rng + ?Sized>(v: &CMat, rng: &mut R) -> CMat {
    let z = CMat::from_fn(v.nrows(), v.ncols(), |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let t = tangent_projection(v, &z);
    let n = frobenius_inner(&t, &t).sqrt();
    if n > 0.0 {
        t / Complex64::new(n, 0.0)
    } else {
        t
    }
}

/// Derivative-free fallback: random tangent probes with a shrinking radius.
fn pattern_search<R: Rng + ?Sized>(
    obj: &dyn StiefelObjective,
    mut v: CMat,
    mut fv: f64,
    opts: StiefelOptions,
    rng: &mut R,
) -> StiefelOutcome {
    let mut radius = 0.5;
    for _ in 0..opts.max_iter {
        if radius < opts.tol {
            return StiefelOutcome { point: v, value: fv, converged: true };
        }
        let d = random_tangent(&v, rng);
        let mut improved = false;
        for sign in [1.0, -1.0] {
            let cand = retract(&v, &(&d * Complex64::new(sign * radius, 0.0)));
            let fc = obj.value(&cand);
            if fc.is_finite() && fc < fv {
                v = cand;
                fv = fc;
                improved = true;
                break;
            }
        }
        if improved {
            radius = (radius * 1.5).min(1.0);
        } else {
            radius *= 0.7;
        }
    }
    StiefelOutcome { point: v, value: fv, converged: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::linalg::{max_abs, re_trace_product};
    use crate::qmat::{random_isometry, trial_rng};

    /// `f(V) = Re Tr[V† A V]` for Hermitian A: minimised by the bottom eigenvectors.
    struct Rayleigh(CMat);

    impl StiefelObjective for Rayleigh {
        fn value(&self, v: &CMat) -> f64 {
            re_trace_product(&v.adjoint(), &(&self.0 * v))
        }

        fn value_and_gradient(&self, v: &CMat) -> (f64, Option<CMat>) {
            (self.value(v), Some(&self.0 * v * Complex64::new(2.0, 0.0)))
        }
    }

    struct RayleighNoGrad(CMat);

    impl StiefelObjective for RayleighNoGrad {
        fn value(&self, v: &CMat) -> f64 {
            re_trace_product(&v.adjoint(), &(&self.0 * v))
        }

        fn value_and_gradient(&self, v: &CMat) -> (f64, Option<CMat>) {
            (self.value(v), None)
        }
    }

    fn diag(values: &[f64]) -> CMat {
        let n = values.len();
        CMat::from_fn(n, n, |i, j| if i == j { Complex64::new(values[i], 0.0) } else { Complex64::new(0.0, 0.0) })
    }

    #[test]
    fn finds_lowest_eigenspace() {
        let mut rng = trial_rng(3, 3);
        let a = diag(&[3.0, -1.0, 2.0, 0.5]);
        let start = random_isometry(&mut rng, 4, 2);
        let out = minimize(&Rayleigh(a), start, StiefelOptions { max_iter: 2000, tol: 1e-8 }, &mut rng);
        assert!((out.value - (-0.5)).abs() < 1e-8, "{}", out.value);
        assert!(max_abs(&(out.point.adjoint() * &out.point - CMat::identity(2, 2))) < 1e-12);
    }

    #[test]
    fn derivative_free_path_also_descends() {
        let mut rng = trial_rng(4, 4);
        let a = diag(&[3.0, -1.0, 2.0]);
        let start = random_isometry(&mut rng, 3, 1);
        let f0 = RayleighNoGrad(a.clone()).value(&start);
        let out = minimize(&RayleighNoGrad(a), start, StiefelOptions { max_iter: 3000, tol: 1e-7 }, &mut rng);
        assert!(out.value <= f0);
        assert!((out.value + 1.0).abs() < 1e-4, "{}", out.value);
    }
}
