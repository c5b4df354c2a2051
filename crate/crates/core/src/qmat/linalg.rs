//! Raw dense helpers on complex matrices. Everything above this layer works
//! with validated wrappers; these functions assume shapes are consistent.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl Eigh {
    pub fn new(m: &CMat) -> Self {
        let n = m.nrows();
        if n == 0 {
            return Eigh {
                values: vec![],
                vectors: CMat::zeros(0, 0),
            };
        }
        let eig = hermitize(m).symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vectors = CMat::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Eigh { values, vectors }
    }

    /// `U f(Λ) U†`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> CMat {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let s = f(self.values[j]);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        &scaled * self.vectors.adjoint()
    }
}

pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermiticity_defect(m: &CMat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn trace_re(m: &CMat) -> f64 {
    m.trace().re
}

/// `Re Tr[A B]`.
pub fn re_trace_product(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// Flat offsets of every row-major multi-index over `axes`.
fn axis_offsets(axes: &[usize], dims: &[usize], strides: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize];
    for &ax in axes {
        let mut next = Vec::with_capacity(out.len() * dims[ax]);
        for &base in &out {
            for v in 0..dims[ax] {
                next.push(base + v * strides[ax]);
            }
        }
        out = next;
    }
    out
}

/// Partial trace keeping the (sorted, unique, in-range) factors `keep`.
pub fn partial_trace_raw(m: &CMat, dims: &[usize], keep: &[usize]) -> CMat {
    let st = strides(dims);
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    let kept = axis_offsets(keep, dims, &st);
    let tr = axis_offsets(&traced, dims, &st);
    let dk = kept.len();
    let mut out = CMat::zeros(dk, dk);
    for (a, &ka) in kept.iter().enumerate() {
        for (b, &kb) in kept.iter().enumerate() {
            let mut acc = ZERO;
            for &t in &tr {
                acc += m[(ka + t, kb + t)];
            }
            out[(a, b)] = acc;
        }
    }
    out
}

/// Inverse of the partial trace pattern: `op` on factors `keep`, identity elsewhere,
/// with factors kept in their original tensor positions.
pub fn embed_raw(op: &CMat, dims: &[usize], keep: &[usize]) -> CMat {
    let st = strides(dims);
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    let kept = axis_offsets(keep, dims, &st);
    let tr = axis_offsets(&traced, dims, &st);
    let n: usize = dims.iter().product();
    let mut out = CMat::zeros(n, n);
    for (a, &ka) in kept.iter().enumerate() {
        for (b, &kb) in kept.iter().enumerate() {
            let v = op[(a, b)];
            if v == ZERO {
                continue;
            }
            for &t in &tr {
                out[(ka + t, kb + t)] = v;
            }
        }
    }
    out
}

/// Unnormalised post-measurement state of X: `Tr_E[(I ⊗ effect) ρ]`, with E the
/// last tensor factor of dimension `de`.
pub fn conditional_block(rho: &CMat, dx: usize, de: usize, effect: &CMat) -> CMat {
    let mut out = CMat::zeros(dx, dx);
    for a in 0..dx {
        for b in 0..dx {
            let mut acc = ZERO;
            for e in 0..de {
                for f in 0..de {
                    let w = effect[(e, f)];
                    if w != ZERO {
                        acc += w * rho[(a * de + f, b * de + e)];
                    }
                }
            }
            out[(a, b)] = acc;
        }
    }
    out
}

/// `Tr_X[ρ (G ⊗ I_E)]`, E last factor of dimension `de`.
pub fn ancilla_contraction(rho: &CMat, dx: usize, de: usize, g: &CMat) -> CMat {
    let mut out = CMat::zeros(de, de);
    for e in 0..de {
        for f in 0..de {
            let mut acc = ZERO;
            for a in 0..dx {
                for b in 0..dx {
                    let gv = g[(b, a)];
                    if gv != ZERO {
                        acc += rho[(a * de + e, b * de + f)] * gv;
                    }
                }
            }
            out[(e, f)] = acc;
        }
    }
    out
}

/// Thin QR with the phases of R's diagonal fixed to be nonnegative, so the
/// retraction is a smooth function of its input.
pub fn qr_orthonormalize(m: &CMat) -> CMat {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..q.ncols().min(r.nrows()) {
        let d = r[(j, j)];
        let n = d.norm();
        if n > 0.0 {
            let phase = d / n;
            for i in 0..q.nrows() {
                q[(i, j)] *= phase;
            }
        }
    }
    q
}

pub fn frobenius_inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

pub fn herm_part(m: &CMat) -> CMat {
    hermitize(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn partial_trace_and_embed_are_adjoint() {
        let dims = [2, 3, 2];
        let n = 12;
        let m = CMat::from_fn(n, n, |i, j| Complex64::new((i * 7 + j) as f64, (i as f64) - (j as f64)));
        let op = CMat::from_fn(4, 4, |i, j| Complex64::new((i + 2 * j) as f64, 0.5 * i as f64));
        // Tr[ptrace(M) op] == Tr[M embed(op)]
        let lhs = (partial_trace_raw(&m, &dims, &[0, 2]) * &op).trace();
        let rhs = (&m * embed_raw(&op, &dims, &[0, 2])).trace();
        assert!((lhs - rhs).norm() < 1e-9);
    }

    #[test]
    fn conditional_block_matches_explicit_construction() {
        let dx = 2;
        let de = 3;
        let rho = CMat::from_fn(6, 6, |i, j| Complex64::new((i + j) as f64, (i as f64) * 0.1 - (j as f64) * 0.1));
        let eff = CMat::from_fn(3, 3, |i, j| Complex64::new((i * j) as f64 + 1.0, 0.0));
        let full = kron(&identity(dx), &eff) * &rho;
        let expected = partial_trace_raw(&full, &[dx, de], &[0]);
        let got = conditional_block(&rho, dx, de, &eff);
        assert!(max_abs(&(expected - got)) < 1e-12);
    }

    #[test]
    fn eigh_is_sorted_and_reconstructs() {
        let m = CMat::from_row_slice(2, 2, &[c(2.0), Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0), c(-1.0)]);
        let e = Eigh::new(&m);
        assert!(e.values[0] <= e.values[1]);
        assert!(max_abs(&(e.apply(|x| x) - m)) < 1e-12);
    }
}
