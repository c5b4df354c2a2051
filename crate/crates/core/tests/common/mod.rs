//! Reference computations used by the integration and acceptance tests. Nothing
//! here calls into the optimizers under test.
#![allow(dead_code)]

use entrocheck::qmat::CMat;
use entrocheck::DensityMatrix;
use nalgebra::DMatrix;
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let h = (m + m.adjoint()) * c(0.5, 0.0);
    let mut v: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn psd_sqrt(m: &CMat) -> CMat {
    let h = (m + m.adjoint()) * c(0.5, 0.0);
    let e = h.symmetric_eigen();
    let d = CMat::from_diagonal(&e.eigenvalues.map(|x| c(x.max(0.0).sqrt(), 0.0)));
    &e.eigenvectors * d * e.eigenvectors.adjoint()
}

pub fn h2(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    term(p) + term(1.0 - p)
}

pub fn entropy_of(m: &CMat) -> f64 {
    hermitian_eigenvalues(m).into_iter().filter(|&x| x > 0.0).map(|x| -x * x.log2()).sum()
}

/// Two-qubit concurrence from the spin-flipped state `ρ̃ = (σ_y⊗σ_y) ρ* (σ_y⊗σ_y)`.
/// The `λ_i` are the singular values of `√ρ √ρ̃`, which avoids square roots of
/// round-off-sized eigenvalues.
pub fn concurrence(rho: &CMat) -> f64 {
    let sy = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]);
    let yy = sy.kronecker(&sy);
    let s = psd_sqrt(rho);
    let s_tilde = &yy * s.map(|z| z.conj()) * &yy;
    let mut l: Vec<f64> = (&s * s_tilde).singular_values().iter().copied().collect();
    l.sort_by(|a, b| b.total_cmp(a));
    (l[0] - l[1] - l[2] - l[3]).max(0.0)
}

/// Closed-form two-qubit entanglement of formation.
pub fn wootters_ef(rho: &DensityMatrix) -> f64 {
    let cc = concurrence(rho.matrix()).min(1.0);
    h2(0.5 * (1.0 + (1.0 - cc * cc).max(0.0).sqrt()))
}

/// Entropy of the first-qubit marginal of a two-qubit matrix.
pub fn reduced_entropy_a(rho: &CMat) -> f64 {
    let mut r = CMat::zeros(2, 2);
    for a in 0..2 {
        for b in 0..2 {
            for k in 0..2 {
                r[(a, b)] += rho[(2 * a + k, 2 * b + k)];
            }
        }
    }
    entropy_of(&r)
}

/// Unnormalised conditional block `Tr_E[(I ⊗ E) ρ]` on a `dx·de` system.
pub fn conditional_block(rho: &CMat, dx: usize, de: usize, effect: &CMat) -> CMat {
    CMat::from_fn(dx, dx, |x, y| {
        let mut s = c(0.0, 0.0);
        for e in 0..de {
            for f in 0..de {
                s += rho[(x * de + e, y * de + f)] * effect[(f, e)];
            }
        }
        s
    })
}

pub fn trace_norm(m: &CMat) -> f64 {
    hermitian_eigenvalues(m).iter().map(|x| x.abs()).sum()
}

/// Rank-one projective measurement along Bloch direction `(θ, φ)` and its antipode.
pub fn bloch_projectors(theta: f64, phi: f64) -> [CMat; 2] {
    let (ct, st) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let v = [c(ct, 0.0), Complex64::from_polar(st, phi)];
    let w = [c(-st, 0.0), Complex64::from_polar(ct, phi)];
    let outer = |u: &[Complex64; 2]| CMat::from_fn(2, 2, |i, j| u[i] * u[j].conj());
    [outer(&v), outer(&w)]
}

/// `Σ p_i S(ρ_X^i)` for a projective measurement on the second qubit of `ρ_XE`.
pub fn projective_entropy_average(rho: &CMat, theta: f64, phi: f64) -> f64 {
    bloch_projectors(theta, phi)
        .iter()
        .map(|p| {
            let block = conditional_block(rho, 2, 2, p);
            let prob = block.trace().re;
            if prob < 1e-14 {
                0.0
            } else {
                prob * entropy_of(&(block / c(prob, 0.0)))
            }
        })
        .sum()
}

/// Minimum of `g(θ, φ)` over the sphere: a dense grid followed by repeated local
/// grid refinement around the incumbent.
pub fn sphere_grid_min(g: impl Fn(f64, f64) -> f64) -> f64 {
    use std::f64::consts::PI;
    let (nt, np) = (60, 120);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=nt {
        let t = PI * i as f64 / nt as f64;
        for j in 0..np {
            let p = 2.0 * PI * j as f64 / np as f64;
            let v = g(t, p);
            if v < best.0 {
                best = (v, t, p);
            }
        }
    }
    let (mut dt, mut dp) = (PI / nt as f64, 2.0 * PI / np as f64);
    for _ in 0..30 {
        let (_, t0, p0) = best;
        for i in -5..=5 {
            for j in -5..=5 {
                let t = (t0 + dt * i as f64 / 5.0).clamp(0.0, PI);
                let p = p0 + dp * j as f64 / 5.0;
                let v = g(t, p);
                if v < best.0 {
                    best = (v, t, p);
                }
            }
        }
        dt *= 0.5;
        dp *= 0.5;
    }
    best.0
}

/// Central difference `(g(x+h) − g(x−h)) / 2h`.
pub fn central_difference(g: impl Fn(f64) -> f64, h: f64) -> f64 {
    (g(h) - g(-h)) / (2.0 * h)
}

/// `||a − b|| / max(||b||, floor)`.
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / norm.max(floor)
}

/// Matrix with independent uniform entries in the unit square around 0.
pub fn random_complex_matrix<R: rand::Rng>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    DMatrix::from_fn(rows, cols, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

pub fn real_inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}
