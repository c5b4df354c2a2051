//! Intrinsic conditional information `I(X;Y↓E) = min_{P(ē|e)} I(X;Y|Ē)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{conditional_mutual_information_table, ClassicalJoint};
use crate::qmat::trial_rng;
use crate::simplex;

const ROW_TOL: f64 = 1e-12;
/// Deterministic channels are enumerated exhaustively up to this alphabet size.
const ENUMERATION_LIMIT: usize = 4;

/// Row-stochastic matrix `P(ē|e)`, stored row-major (`e` selects the row).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StochasticChannel {
    pub inputs: usize,
    pub outputs: usize,
    pub p: Vec<f64>,
}

impl StochasticChannel {
    pub fn new(inputs: usize, outputs: usize, p: Vec<f64>) -> Result<Self> {
        if inputs == 0 || outputs == 0 || p.len() != inputs * outputs {
            return Err(Error::Parse(format!(
                "channel table of length {} does not match {inputs}x{outputs}",
                p.len()
            )));
        }
        for (e, row) in p.chunks(outputs).enumerate() {
            if row.iter().any(|&x| !(x >= 0.0)) {
                return Err(Error::OutOfRange(format!("row {e} has a negative entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_TOL {
                return Err(Error::OutOfRange(format!("row {e} sums to {s}")));
            }
        }
        Ok(StochasticChannel { inputs, outputs, p })
    }

    pub fn identity(n: usize) -> Self {
        Self::deterministic(&(0..n).collect::<Vec<_>>(), n)
    }

    /// Every input mapped to output 0.
    pub fn constant(inputs: usize, outputs: usize) -> Self {
        Self::deterministic(&vec![0; inputs], outputs)
    }

    pub fn deterministic(map: &[usize], outputs: usize) -> Self {
        let mut p = vec![0.0; map.len() * outputs];
        for (e, &t) in map.iter().enumerate() {
            p[e * outputs + t] = 1.0;
        }
        StochasticChannel { inputs: map.len(), outputs, p }
    }

    pub fn get(&self, e: usize, e_bar: usize) -> f64 {
        self.p[e * self.outputs + e_bar]
    }

    /// Joint distribution of `(X, Y, Ē)`.
    pub fn apply(&self, j: &ClassicalJoint) -> Result<ClassicalJoint> {
        let (nx, ny, ne) = j.sizes();
        if ne != self.inputs {
            return Err(Error::DimMismatch { expected: ne, found: self.inputs });
        }
        ClassicalJoint::new(nx, ny, self.outputs, push_forward(j.table(), nx * ny, ne, self.outputs, &self.p))
    }
}

fn push_forward(p: &[f64], nxy: usize, ne: usize, nb: usize, ch: &[f64]) -> Vec<f64> {
    let mut q = vec![0.0; nxy * nb];
    for xy in 0..nxy {
        for e in 0..ne {
            let w = p[xy * ne + e];
            if w == 0.0 {
                continue;
            }
            for b in 0..nb {
                q[xy * nb + b] += w * ch[e * nb + b];
            }
        }
    }
    q
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntrinsicOptions {
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for IntrinsicOptions {
    fn default() -> Self {
        IntrinsicOptions { restarts: 16, max_iter: 2000, tol: 1e-10, seed: 0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IntrinsicResult {
    pub value: f64,
    pub channel: StochasticChannel,
    pub converged: bool,
}

struct Problem<'a> {
    p: &'a [f64],
    nx: usize,
    ny: usize,
    ne: usize,
}

impl Problem<'_> {
    fn value(&self, ch: &[f64]) -> f64 {
        let q = push_forward(self.p, self.nx * self.ny, self.ne, self.ne, ch);
        conditional_mutual_information_table(self.nx, self.ny, self.ne, &q).max(0.0)
    }

    /// `∂ I(X;Y|Ē) / ∂ P(ē|e)`.
    fn gradient(&self, ch: &[f64]) -> Vec<f64> {
        let (nx, ny, nb) = (self.nx, self.ny, self.ne);
        let q = push_forward(self.p, nx * ny, self.ne, nb, ch);
        let mut qxb = vec![0.0; nx * nb];
        let mut qyb = vec![0.0; ny * nb];
        let mut qb = vec![0.0; nb];
        for x in 0..nx {
            for y in 0..ny {
                for b in 0..nb {
                    let v = q[(x * ny + y) * nb + b];
                    qxb[x * nb + b] += v;
                    qyb[y * nb + b] += v;
                    qb[b] += v;
                }
            }
        }
        // ∂I/∂q(x,y,ē) = log q(x,y,ē) q(ē) / (q(x,ē) q(y,ē)); floored so it stays finite.
        let floor = 1e-300;
        let mut g = vec![0.0; self.ne * nb];
        for x in 0..nx {
            for y in 0..ny {
                for b in 0..nb {
                    let num = q[(x * ny + y) * nb + b].max(floor) * qb[b].max(floor);
                    let den = qxb[x * nb + b].max(floor) * qyb[y * nb + b].max(floor);
                    let dq = (num / den).log2().clamp(-64.0, 64.0);
                    for e in 0..self.ne {
                        g[e * nb + b] += self.p[(x * ny + y) * self.ne + e] * dq;
                    }
                }
            }
        }
        g
    }

    fn project(&self, ch: &[f64]) -> Vec<f64> {
        ch.chunks(self.ne).flat_map(simplex::project).collect()
    }

    /// Projected gradient with Armijo backtracking along the projection arc.
    fn descend(&self, mut ch: Vec<f64>, opts: &IntrinsicOptions) -> (Vec<f64>, f64, bool) {
        let mut f = self.value(&ch);
        let mut step: f64 = 1.0;
        for _ in 0..opts.max_iter {
            let g = self.gradient(&ch);
            let full: Vec<f64> = ch.iter().zip(&g).map(|(c, gi)| c - gi).collect();
            let pg = self.project(&full);
            let stat: f64 = pg.iter().zip(&ch).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if stat < opts.tol {
                return (ch, f, true);
            }
            let mut t = (step * 2.0).min(1e3);
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = ch.iter().zip(&g).map(|(c, gi)| c - t * gi).collect();
                let cand = self.project(&trial);
                let dec: f64 = g.iter().zip(cand.iter().zip(&ch)).map(|(gi, (a, b))| gi * (a - b)).sum();
                let fc = self.value(&cand);
                if fc <= f + 1e-4 * dec {
                    accepted = fc < f || dec.abs() > 0.0;
                    ch = cand;
                    f = fc;
                    step = t;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                return (ch, f, stat < opts.tol.sqrt());
            }
        }
        (ch, f, false)
    }
}

/// Minimises `I(X;Y|Ē)` over channels `E → Ē` with `|Ē| = |E|`.
///
/// The identity and constant channels, and (for `|E| <= 4`) every deterministic
/// channel, are always evaluated, so the result never exceeds `I(X;Y|E)` or `I(X;Y)`.
pub fn intrinsic_information(j: &ClassicalJoint, opts: &IntrinsicOptions) -> Result<IntrinsicResult> {
    let (nx, ny, ne) = j.sizes();
    let prob = Problem { p: j.table(), nx, ny, ne };

    let mut candidates: Vec<(Vec<f64>, f64, bool)> = Vec::new();
    let probe = |ch: StochasticChannel| {
        let v = prob.value(&ch.p);
        (ch.p, v, true)
    };
    candidates.push(probe(StochasticChannel::identity(ne)));
    candidates.push(probe(StochasticChannel::constant(ne, ne)));
    if ne <= ENUMERATION_LIMIT {
        let total = ne.pow(ne as u32);
        for code in 0..total {
            let map: Vec<usize> = (0..ne).map(|k| (code / ne.pow(k as u32)) % ne).collect();
            candidates.push(probe(StochasticChannel::deterministic(&map, ne)));
        }
    }

    let mut runs: Vec<(usize, (Vec<f64>, f64, bool))> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = trial_rng(opts.seed, r as u64);
            let start: Vec<f64> = (0..ne).flat_map(|_| simplex::random_point(&mut rng, ne)).collect();
            (r, prob.descend(start, opts))
        })
        .collect();
    runs.sort_by_key(|(r, _)| *r);
    let any_converged = runs.iter().any(|(_, c)| c.2) || runs.is_empty();
    candidates.extend(runs.into_iter().map(|(_, c)| c));

    let (best, _, conv) = candidates
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("identity channel is always a candidate");
    let channel = StochasticChannel::new(ne, ne, renormalize_rows(best, ne))?;
    let value = prob.value(&channel.p);
    Ok(IntrinsicResult { value, channel, converged: conv && any_converged })
}

fn renormalize_rows(mut p: Vec<f64>, n: usize) -> Vec<f64> {
    for row in p.chunks_mut(n) {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= s);
    }
    p
}
