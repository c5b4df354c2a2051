//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero if
//! any criterion fails. An optional argument filters criteria by substring.

mod common;

use std::time::{Duration, Instant};

use entrocheck::arrowing::{arrow_down_cpl, intrinsic_information, random_povm, ArrowOptions, IntrinsicOptions, MeasurementKind};
use entrocheck::caratheodory::{reduce_ensemble, ValuedEnsemble};
use entrocheck::continuity::{
    check_asymptotic_continuity, check_robustness, check_tales, shrink_pair, tales_decompose, transfer_constants,
    ContinuitySpec, Correction, CorrectionForm, TransferDirection,
};
use entrocheck::functionals::{ClassicalJoint, VonNeumann};
use entrocheck::qmat::{
    bell_phi_plus, random_haar_pure, random_isometry, random_mixed, random_mixed_with_rank, sample_pair, trial_rng,
    Measure, RngSpec,
};
use entrocheck::reldist::{lemma2_campaign, objective_gradient, objective_value, rel_entropy_distance, ConvexSetSpec, OptimizerConfig};
use entrocheck::roof::{entanglement_of_formation, roof_gap_antisymmetric, RoofProblem};
use entrocheck::{DensityMatrix, Ensemble};
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t <= limit, || format!("runtime {:.1}s exceeds {}s", t.as_secs_f64(), limit.as_secs()))
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn spec(k: f64, form: CorrectionForm, coeff: f64) -> ContinuitySpec {
    ContinuitySpec::new(k, Correction::new(form, coeff)).expect("valid constants")
}

fn fannes() -> Outcome {
    let start = Instant::now();
    let spec = spec(1.0, CorrectionForm::Eta, 1.0);
    let mut worst = f64::INFINITY;
    for d in 2..=8usize {
        let sampler = RngSpec::new(7 + d as u64, Measure::Perturbation { radius: 0.25 }).map_err(err)?;
        let report = check_asymptotic_continuity(&VonNeumann, &spec, &sampler, 2000, &[d]).map_err(err)?;
        ensure(report.records.len() == 2000, || format!("d={d}: {} records", report.records.len()))?;
        ensure(report.records.iter().all(|r| r.eps <= 0.5 + 1e-12), || format!("d={d}: pair with eps > 1/2"))?;
        ensure(report.violations() == 0, || format!("d={d}: {} violations", report.violations()))?;
        worst = worst.min(report.summary.min_margin.unwrap_or(f64::INFINITY));
    }
    within_time(start, Duration::from_secs(60))?;
    Ok(format!("14000 pairs, min margin {worst:.3e}"))
}

fn tales() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for d in 2..=6usize {
        let sampler = RngSpec::new(100 + d as u64, Measure::Perturbation { radius: 0.5 }).map_err(err)?;
        let report = check_tales(&sampler, 1000, &[d], 1e-10).map_err(err)?;
        ensure(report.violations() == 0, || format!("d={d}: {} residuals above 1e-10", report.violations()))?;
        for t in 0..1000 {
            let (rho1, rho2) = sample_pair(&sampler.for_trial(t), &[d]);
            let (rho2, eps) = shrink_pair(&rho1, rho2, 1.0).map_err(err)?;
            let w = tales_decompose(&rho1, &rho2).map_err(err)?;
            let via2 = rho2.mix(&w.gamma2, w.epsilon).map_err(err)?;
            let gap = common::trace_norm(&(w.sigma.matrix() - via2.matrix()));
            worst = worst.max(gap);
            ensure(gap <= 1e-10, || format!("d={d} trial {t}: reconstructions differ by {gap:e}"))?;
            ensure((w.epsilon - eps).abs() <= 1e-12, || format!("d={d} trial {t}: epsilon mismatch"))?;
            for g in [&w.gamma1, &w.gamma2] {
                let m = g.matrix();
                let herm = (m - m.adjoint()).camax();
                let tr = m.trace();
                let min_eig = g.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
                ensure(herm <= 1e-12 && (tr.re - 1.0).abs() <= 1e-10 && tr.im.abs() <= 1e-12 && min_eig >= -1e-10, || {
                    format!("d={d} trial {t}: filler state invalid (trace {tr}, min eig {min_eig:e})")
                })?;
            }
        }
    }
    within_time(start, Duration::from_secs(30))?;
    Ok(format!("5000 pairs, max reconstruction gap {worst:.2e}"))
}

fn prop1() -> Outcome {
    let hs = |seed| RngSpec::new(seed, Measure::HilbertSchmidtMixed).expect("valid");
    let robust = spec(1.0, CorrectionForm::BinaryEntropy, 1.0);
    let cont = spec(1.0, CorrectionForm::Eta, 1.0);
    let to_cont = transfer_constants(TransferDirection::RobustnessToContinuity, &robust);
    let to_robust = transfer_constants(TransferDirection::ContinuityToRobustness, &cont);
    ensure(to_cont.k == 2.0 && to_cont.correction.coeff == 2.0, || format!("unexpected transfer {to_cont}"))?;
    ensure(to_robust.k == 2.0 && to_robust.correction.arg_scale == 2.0, || format!("unexpected transfer {to_robust}"))?;
    for d in [2usize, 3, 4] {
        let s = 10 * d as u64;
        let checks = [
            ("robustness K=1,O=H", check_robustness(&VonNeumann, &robust, &hs(s), 1000, &[d])),
            ("transferred continuity", check_asymptotic_continuity(&VonNeumann, &to_cont, &hs(s + 1), 1000, &[d])),
            ("continuity K=1,O=eta", check_asymptotic_continuity(&VonNeumann, &cont, &hs(s + 2), 1000, &[d])),
            ("transferred robustness", check_robustness(&VonNeumann, &to_robust, &hs(s + 3), 1000, &[d])),
        ];
        for (name, report) in checks {
            let report = report.map_err(err)?;
            ensure(report.records.len() == 1000, || format!("d={d} {name}: {} records", report.records.len()))?;
            ensure(report.violations() == 0, || format!("d={d} {name}: {} violations", report.violations()))?;
        }
    }
    Ok(format!("both directions at d=2,3,4; transferred {to_cont} and {to_robust}"))
}

fn er_singleton() -> Outcome {
    let start = Instant::now();
    let cfg = OptimizerConfig::default();
    let mut worst = 0.0f64;
    for d in 2..=4usize {
        let set = ConvexSetSpec::maximally_mixed(vec![d]);
        let mut rng = trial_rng(40 + d as u64, 0);
        for i in 0..100 {
            let rho = random_mixed(&mut rng, &[d]);
            let oracle = (d as f64).log2() - common::entropy_of(rho.matrix());
            let r = rel_entropy_distance(&rho, &set, &cfg).map_err(err)?;
            worst = worst.max((r.value - oracle).abs());
            ensure((r.value - oracle).abs() <= 1e-6, || format!("d={d} #{i}: {} vs {oracle}", r.value))?;
        }
    }
    within_time(start, Duration::from_secs(30))?;
    Ok(format!("300 states, max error {worst:.2e}"))
}

fn lemma2() -> Outcome {
    let start = Instant::now();
    let cfg = OptimizerConfig { restarts: 8, ..OptimizerConfig::default() };
    let mut unreliable = 0;
    let mut worst = f64::INFINITY;
    for d in [2usize, 3] {
        let mut rng = trial_rng(50 + d as u64, 0);
        let set = ConvexSetSpec::random(&mut rng, &[d], 20);
        ensure(set.len() == 21, || format!("hull has {} generators", set.len()))?;
        let sampler = RngSpec::new(60 + d as u64, Measure::HilbertSchmidtMixed).map_err(err)?;
        let report = lemma2_campaign(&set, &sampler, 500, &cfg).map_err(err)?;
        ensure(report.violations() == 0, || format!("d={d}: {} violations", report.violations()))?;
        unreliable += report.summary.unreliable;
        worst = worst.min(report.summary.min_margin.unwrap_or(f64::INFINITY));
    }
    within_time(start, Duration::from_secs(600))?;
    Ok(format!("1000 pairs, min margin {worst:.3e}, {unreliable} unconverged, {:.1}s", start.elapsed().as_secs_f64()))
}

fn bell_hull() -> Outcome {
    let rho = bell_phi_plus().to_density();
    let mut gens: Vec<DensityMatrix> = (0..4).map(|i| DensityMatrix::basis_state(vec![2, 2], i).expect("index")).collect();
    gens.push(DensityMatrix::maximally_mixed(vec![2, 2]));
    let set = ConvexSetSpec::new(gens).map_err(err)?;
    let r = rel_entropy_distance(&rho, &set, &OptimizerConfig::default()).map_err(err)?;
    // Over diagonal σ the objective is −½(log a + log e) with a + e ≤ 1; golden-section on a + e = 1.
    let g = |a: f64| -0.5 * (a.log2() + (1.0 - a).log2());
    let (mut lo, mut hi) = (1e-9, 1.0 - 1e-9);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let (x1, x2) = (hi - phi * (hi - lo), lo + phi * (hi - lo));
        if g(x1) < g(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let oracle = g(0.5 * (lo + hi));
    ensure((r.value - oracle).abs() <= 1e-3, || format!("value {} vs oracle {oracle}", r.value))?;
    ensure((r.value - 1.0).abs() <= 1e-3, || format!("value {} not 1.000", r.value))?;
    Ok(format!("value {:.6}, oracle {oracle:.6}", r.value))
}

fn ef_two_qubit() -> Outcome {
    let start = Instant::now();
    let opts = ArrowOptions { restarts: 16, seed: 70, ..ArrowOptions::default() };
    let mut rng = trial_rng(71, 0);
    // Oracle validation on pure states, where E_F is the marginal entropy.
    for i in 0..20 {
        let psi = random_haar_pure(&mut rng, &[2, 2]).to_density();
        let (w, s) = (common::wootters_ef(&psi), common::reduced_entropy_a(psi.matrix()));
        ensure((w - s).abs() <= 1e-9, || format!("oracle disagrees with S_A on pure state {i}: {w} vs {s}"))?;
        let r = entanglement_of_formation(&psi, &opts).map_err(err)?;
        ensure((r.value - s).abs() <= 1e-6, || format!("pure state {i}: roof {} vs S_A {s}", r.value))?;
    }
    let mut worst = 0.0f64;
    for i in 0..50usize {
        let rank = 1 + i % 4;
        let rho = if rank == 4 { random_mixed(&mut rng, &[2, 2]) } else { random_mixed_with_rank(&mut rng, &[2, 2], rank) };
        let oracle = common::wootters_ef(&rho);
        let r = entanglement_of_formation(&rho, &opts).map_err(err)?;
        worst = worst.max((r.value - oracle).abs());
        ensure((r.value - oracle).abs() <= 1e-3, || format!("state {i} (rank {rank}): roof {} vs oracle {oracle}", r.value))?;
    }
    within_time(start, Duration::from_secs(300))?;
    Ok(format!("50 states, max error {worst:.2e}, {:.1}s", start.elapsed().as_secs_f64()))
}

fn roofgap() -> Outcome {
    let opts = ArrowOptions { seed: 80, ..ArrowOptions::default() };
    let rec = roof_gap_antisymmetric(3, &opts).map_err(err)?;
    let in_band = |x: f64| (2.0 - 1e-2..=2.0 + 1e-2).contains(&x);
    ensure(in_band(rec.pure_roof_im), || format!("pure roof {}", rec.pure_roof_im))?;
    ensure(in_band(rec.twice_ef), || format!("2 E_F {}", rec.twice_ef))?;
    ensure(rec.mixed_roof_im <= 3f64.log2() + 1e-9, || format!("mixed roof {}", rec.mixed_roof_im))?;
    ensure(rec.gap >= 0.4, || format!("gap {}", rec.gap))?;
    Ok(format!("pure {:.4}, 2E_F {:.4}, mixed {:.4}, gap {:.4}", rec.pure_roof_im, rec.twice_ef, rec.mixed_roof_im, rec.gap))
}

fn arrowing_facts() -> Outcome {
    let mut worst1 = f64::NEG_INFINITY;
    let mut worst2 = f64::NEG_INFINITY;
    for t in 0..1000u64 {
        let mut rng = trial_rng(90, t);
        let (dx, de) = (rng.random_range(2..=3usize), rng.random_range(2..=3usize));
        let m = rng.random_range(2..=5usize);
        let rho = random_mixed(&mut rng, &[dx, de]);
        let sigma = random_mixed(&mut rng, &[dx, de]);
        let kind = if t % 2 == 0 { MeasurementKind::General } else { MeasurementKind::RankOne };
        let povm = random_povm(&mut rng, de, m, kind);
        let eps = common::trace_norm(&(rho.matrix() - sigma.matrix()));
        let mut sum_abs = 0.0;
        let mut sum_weighted = 0.0;
        for e in povm.effects() {
            let a = common::conditional_block(rho.matrix(), dx, de, &e);
            let b = common::conditional_block(sigma.matrix(), dx, de, &e);
            let (p, q) = (a.trace().re, b.trace().re);
            sum_abs += (p - q).abs();
            if p > 1e-14 && q > 1e-14 {
                let eps_k = common::trace_norm(&(a.unscale(p) - b.unscale(q)));
                sum_weighted += p * eps_k;
            } else if p > 1e-14 {
                sum_weighted += 2.0 * p;
            }
        }
        worst1 = worst1.max(sum_abs - eps);
        worst2 = worst2.max(sum_weighted - 2.0 * eps);
        ensure(sum_abs <= eps + 1e-10, || format!("triple {t}: sum |p-q| = {sum_abs} > {eps}"))?;
        ensure(sum_weighted <= 2.0 * eps + 1e-10, || format!("triple {t}: sum p eps_k = {sum_weighted} > {}", 2.0 * eps))?;
    }
    Ok(format!("1000 triples, max excess {worst1:.2e} / {worst2:.2e}"))
}

fn cpl_grid() -> Outcome {
    let opts = ArrowOptions { seed: 100, ..ArrowOptions::default() };
    let mut rng = trial_rng(101, 0);
    let mut worst = 0.0f64;
    for i in 0..20 {
        let rho = random_mixed(&mut rng, &[2, 2]);
        let r = arrow_down_cpl(&rho, &VonNeumann, None, &opts).map_err(err)?;
        let m = rho.matrix().clone();
        let oracle = common::sphere_grid_min(|t, p| common::projective_entropy_average(&m, t, p));
        worst = worst.max((r.value - oracle).abs());
        ensure((r.value - oracle).abs() <= 1e-3, || format!("state {i}: optimizer {} vs grid {oracle}", r.value))?;
    }
    Ok(format!("20 states, max deviation {worst:.2e}"))
}

fn mutual_information_xy(j: &ClassicalJoint) -> f64 {
    let (nx, ny, ne) = j.sizes();
    let pxy = |x, y| (0..ne).map(|e| j.get(x, y, e)).sum::<f64>();
    let px: Vec<f64> = (0..nx).map(|x| (0..ny).map(|y| pxy(x, y)).sum()).collect();
    let py: Vec<f64> = (0..ny).map(|y| (0..nx).map(|x| pxy(x, y)).sum()).collect();
    let mut total = 0.0;
    for x in 0..nx {
        for y in 0..ny {
            let p = pxy(x, y);
            if p > 0.0 {
                total += p * (p / (px[x] * py[y])).log2();
            }
        }
    }
    total
}

fn intrinsic() -> Outcome {
    let opts = IntrinsicOptions { seed: 110, ..IntrinsicOptions::default() };
    let xor = ClassicalJoint::from_fn(2, 2, 2, |x, y, e| if e == x ^ y { 0.25 } else { 0.0 }).map_err(err)?;
    let copy = ClassicalJoint::from_fn(2, 2, 2, |x, y, e| if x == y && e == x { 0.5 } else { 0.0 }).map_err(err)?;
    let v = intrinsic_information(&xor, &opts).map_err(err)?.value;
    ensure(v <= 1e-6, || format!("xor: {v}"))?;
    let v = intrinsic_information(&copy, &opts).map_err(err)?.value;
    ensure(v <= 1e-6, || format!("copy: {v}"))?;
    let mut rng = trial_rng(111, 0);
    for i in 0..10 {
        let (nx, ny, ne) = (rng.random_range(2..=3), rng.random_range(2..=3), rng.random_range(2..=4));
        let pxy: Vec<f64> = (0..nx * ny).map(|_| rng.random::<f64>() + 0.01).collect();
        let pe: Vec<f64> = (0..ne).map(|_| rng.random::<f64>() + 0.01).collect();
        let (sxy, se): (f64, f64) = (pxy.iter().sum(), pe.iter().sum());
        let j = ClassicalJoint::from_fn(nx, ny, ne, |x, y, e| pxy[x * ny + y] / sxy * pe[e] / se).map_err(err)?;
        let oracle = mutual_information_xy(&j);
        let v = intrinsic_information(&j, &opts).map_err(err)?.value;
        ensure((v - oracle).abs() <= 1e-6, || format!("independent E #{i}: {v} vs I(X;Y) = {oracle}"))?;
    }
    Ok("xor, copy and 10 independent-E joints".into())
}

fn caratheodory() -> Outcome {
    let mut largest = 0;
    for t in 0..500u64 {
        let mut rng = trial_rng(120, t);
        let mut w: Vec<f64> = (0..20).map(|_| rng.random::<f64>() + 1e-3).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        let members: Vec<(f64, DensityMatrix)> = w
            .into_iter()
            .enumerate()
            .map(|(k, p)| (p, if k % 3 == 0 { random_haar_pure(&mut rng, &[2]).to_density() } else { random_mixed(&mut rng, &[2]) }))
            .collect();
        let values: Vec<f64> = (0..20).map(|_| 4.0 * rng.random::<f64>() - 2.0).collect();
        let ve = ValuedEnsemble::new(Ensemble::new(members).map_err(err)?, values).map_err(err)?;
        let r = reduce_ensemble(&ve);
        largest = largest.max(r.len());
        ensure(r.len() <= 5, || format!("ensemble {t}: {} members remain", r.len()))?;
        let bary = |v: &ValuedEnsemble| {
            v.ensemble().members().iter().fold(entrocheck::qmat::CMat::zeros(2, 2), |acc, (p, s)| {
                acc + s.matrix() * num_complex::Complex64::new(*p, 0.0)
            })
        };
        let db = common::trace_norm(&(bary(&ve) - bary(&r)));
        let mean = |v: &ValuedEnsemble| v.ensemble().weights().iter().zip(v.values()).map(|(p, f)| p * f).sum::<f64>();
        let dv = (mean(&ve) - mean(&r)).abs();
        ensure(db <= 1e-10 && dv <= 1e-10, || format!("ensemble {t}: barycenter moved by {db:e}, value by {dv:e}"))?;
        let wsum: f64 = r.ensemble().weights().iter().sum();
        ensure((wsum - 1.0).abs() <= 1e-12 && r.ensemble().weights().iter().all(|&p| p >= 0.0), || {
            format!("ensemble {t}: weights not a probability vector")
        })?;
        for ((_, s), f) in r.ensemble().members().iter().zip(r.values()) {
            let found = ve.ensemble().members().iter().zip(ve.values()).any(|((_, s0), f0)| s0 == s && f0 == f);
            ensure(found, || format!("ensemble {t}: output member not in input"))?;
        }
        ensure(reduce_ensemble(&r) == r, || format!("ensemble {t}: not idempotent"))?;
    }
    Ok(format!("500 ensembles, largest output {largest}"))
}

fn gradients() -> Outcome {
    let h = 1e-5;
    let mut worst_er = 0.0f64;
    for t in 0..100u64 {
        let mut rng = trial_rng(130, t);
        let d = 2 + (t % 2) as usize;
        let set = ConvexSetSpec::random(&mut rng, &[d], 4);
        let rho = random_mixed(&mut rng, &[d]);
        let mut lambda: Vec<f64> = (0..set.len()).map(|_| rng.random::<f64>() + 0.05).collect();
        let s: f64 = lambda.iter().sum();
        lambda.iter_mut().for_each(|x| *x /= s);
        let grad = objective_gradient(&rho, &lambda, &set).map_err(err)?;
        let fd: Vec<f64> = (0..lambda.len())
            .map(|j| {
                common::central_difference(
                    |step| {
                        let mut l = lambda.clone();
                        l[j] += step;
                        objective_value(&rho, &l, &set)
                    },
                    h,
                )
            })
            .collect();
        let e = common::relative_error(&grad, &fd, 1e-8);
        worst_er = worst_er.max(e);
        ensure(e <= 1e-4, || format!("E_R instance {t}: relative error {e:e}"))?;
    }
    let mut worst_roof = 0.0f64;
    let f = entrocheck::functionals::ReducedEntropy::subsystem_a();
    for t in 0..100u64 {
        let mut rng = trial_rng(140, t);
        let rank = 2 + (t % 3) as usize;
        let rho = random_mixed_with_rank(&mut rng, &[2, 2], rank);
        let problem = RoofProblem::new(&rho);
        let r = problem.ancilla_dim();
        let m = r + 1 + (t % 3) as usize;
        let v = random_isometry(&mut rng, m, r);
        let g = problem.gradient(&f, &v).map_err(err)?.ok_or("entropy functional has no gradient")?;
        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        for _ in 0..4 {
            let z = common::random_complex_matrix(&mut rng, m, r);
            analytic.push(common::real_inner(&g, &z));
            let value = |step: f64| problem.value(&f, &(&v + &z * num_complex::Complex64::new(step, 0.0))).expect("dims");
            numeric.push(common::central_difference(value, h));
        }
        let e = common::relative_error(&analytic, &numeric, 1e-8);
        worst_roof = worst_roof.max(e);
        ensure(e <= 1e-4, || format!("roof instance {t}: relative error {e:e}"))?;
    }
    Ok(format!("max relative error E_R {worst_er:.2e}, roof {worst_roof:.2e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("fannes-campaign", fannes),
        ("tales-decomposition", tales),
        ("continuity-transfer", prop1),
        ("rel-entropy-singleton", er_singleton),
        ("rel-entropy-continuity-campaign", lemma2),
        ("bell-diagonal-hull", bell_hull),
        ("formation-two-qubit", ef_two_qubit),
        ("antisymmetric-roof-gap", roofgap),
        ("measurement-facts", arrowing_facts),
        ("rank-one-grid-oracle", cpl_grid),
        ("intrinsic-information", intrinsic),
        ("caratheodory-reduction", caratheodory),
        ("gradient-checks", gradients),
    ];
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
