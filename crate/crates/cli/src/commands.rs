//! One function per subcommand. Each returns the number of violated checks.

use std::path::Path;

use entrocheck::arrowing::{
    arrow_down, arrow_up, classical_correlation_backward, intrinsic_information, ArrowOptions, ArrowResultJson,
    IntrinsicOptions, MeasurementKind,
};
use entrocheck::caratheodory::{reduce_ensemble, ValuedEnsemble};
use entrocheck::continuity::{
    check_asymptotic_continuity, check_robustness, check_tales, transfer_constants, BoundRecord, BoundReport, ContinuitySpec,
    CorrectionForm, TransferDirection, DEFAULT_SLACK,
};
use entrocheck::functionals::{
    conditional_mutual_information, functional_by_name, relative_entropy, ClassicalJoint, Functional,
};
use entrocheck::qmat::{sample_state, trace_distance_norm, trial_rng, EnsembleJson, Measure, RngSpec, StateJson};
use entrocheck::reldist::{
    donation_campaign, lemma2_campaign, rel_entropy_distance, ConvexSetJson, ConvexSetSpec, OptimizerConfig,
};
use entrocheck::roof::{entanglement_of_formation, mixed_convex_roof, pure_convex_roof, roof_gap_antisymmetric, RoofResultJson};
use entrocheck::DensityMatrix;
use rand::Rng;
use serde_json::{json, Value};

use crate::config::{read_json, Effective, Options};

type Res<T> = Result<T, String>;

fn lib<T>(r: entrocheck::Result<T>) -> Res<T> {
    r.map_err(|e| e.to_string())
}

/// Seed for the `i`-th sub-campaign derived from the base seed.
fn sub_seed(seed: u64, i: u64) -> u64 {
    trial_rng(seed, i).random()
}

/// Concatenates reports, renumbering trials so that ids stay unique.
fn concat(reports: Vec<BoundReport>, seed: u64, slack: f64) -> BoundReport {
    let mut offset = 0;
    let mut skipped = 0;
    let mut records = Vec::new();
    for r in reports {
        let n = (r.records.len() + r.summary.skipped) as u64;
        skipped += r.summary.skipped;
        records.extend(r.records.into_iter().map(|mut rec| {
            rec.trial += offset;
            rec
        }));
        offset += n;
    }
    BoundReport::new(records, seed, slack, skipped)
}

/// Prints to stdout, ignoring a closed pipe.
fn print(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn write(dir: &Path, name: &str, text: &str) -> Res<()> {
    std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Writes `<name>.csv` and `<name>.summary.json` and prints the summary.
fn emit_report(o: &Options, name: &str, report: BoundReport, eff: &Effective) -> Res<usize> {
    let report = report.with_config(eff.to_value());
    let dir = o.out_dir();
    write(&dir, &format!("{name}.csv"), &report.to_csv())?;
    let summary = report.summary_json();
    write(&dir, &format!("{name}.summary.json"), &summary)?;
    print(&summary);
    Ok(report.violations())
}

/// Writes `<name>.json` (result plus effective config) and prints it.
fn emit_result(o: &Options, name: &str, result: Value, eff: &Effective, violations: usize) -> Res<usize> {
    let doc = json!({ "result": result, "violations": violations, "config": eff.to_value() });
    let text = serde_json::to_string_pretty(&doc).expect("serialisable");
    write(&o.out_dir(), &format!("{name}.json"), &text)?;
    print(&text);
    Ok(violations)
}

fn functional(name: &str, dims: &[usize]) -> Res<Box<dyn Functional>> {
    let f = lib(functional_by_name(name))?;
    if !matches!(name, "entropy" | "s") && dims.len() != 2 {
        return Err(format!("functional '{name}' needs a bipartite system, got dims {dims:?}"));
    }
    Ok(f)
}

fn load_state(path: &Path) -> Res<DensityMatrix> {
    let js: StateJson = read_json(path)?;
    lib(DensityMatrix::try_from(js))
}

/// `--input` state, or a Hilbert–Schmidt random state on `--dims`.
fn input_state(o: &Options, seed: u64, default_dims: &str, eff: &mut Effective) -> Res<DensityMatrix> {
    match &o.input {
        Some(p) => {
            eff.set("input", p);
            load_state(p)
        }
        None => {
            let dims = o.subsystem_dims(default_dims)?;
            eff.set("dims", &dims).set("state", "hilbert-schmidt-random");
            Ok(sample_state(&lib(RngSpec::new(seed, Measure::HilbertSchmidtMixed))?, &dims))
        }
    }
}

fn convex_set(o: &Options, dims: &[usize], seed: u64, default_generators: usize, eff: &mut Effective) -> Res<ConvexSetSpec> {
    if let Some(p) = &o.set {
        eff.set("set", p);
        let set = lib(ConvexSetSpec::from_json(read_json::<ConvexSetJson>(p)?))?;
        if set.dims() != dims {
            return Err(format!("convex set has dims {:?}, state has {dims:?}", set.dims()));
        }
        return Ok(set);
    }
    let n = o.generators.unwrap_or(default_generators);
    eff.set("generators", n);
    Ok(if n == 0 { ConvexSetSpec::maximally_mixed(dims.to_vec()) } else { ConvexSetSpec::random(&mut trial_rng(seed, u64::MAX), dims, n) })
}

fn arrow_options(o: &Options, seed: u64, eff: &mut Effective) -> ArrowOptions {
    let opts = ArrowOptions { restarts: o.restarts.unwrap_or(32), seed, ..ArrowOptions::default() };
    eff.set("restarts", opts.restarts).set("max_iter", opts.max_iter).set("tol", opts.tol).set("budget", o.budget);
    opts
}

fn optimizer(o: &Options, seed: u64, default_restarts: usize, eff: &mut Effective) -> OptimizerConfig {
    let cfg = OptimizerConfig { restarts: o.restarts.unwrap_or(default_restarts), seed, ..OptimizerConfig::default() };
    eff.set("optimizer", cfg);
    cfg
}

fn spec_json(spec: &ContinuitySpec) -> Value {
    json!({ "k": spec.k, "correction": spec.correction, "distance": spec.distance, "display": spec.to_string() })
}

pub fn fannes(o: &Options) -> Res<usize> {
    let seed = o.seed()?;
    let mut eff = Effective::new("fannes", seed);
    let trials = o.trials(2000)?;
    let name = o.functional.clone().unwrap_or_else(|| "entropy".into());
    let spec = o.spec(1.0, CorrectionForm::Eta, 1.0)?;
    let radius = o.radius.unwrap_or(0.25);
    let systems: Vec<Vec<usize>> = match &o.dims {
        Some(_) => vec![o.subsystem_dims("")?],
        None => o.dim_list("2..8")?.into_iter().map(|d| vec![d]).collect(),
    };
    eff.set("systems", &systems).set("trials", trials).set("functional", &name).set("spec", spec_json(&spec)).set("radius", radius);
    let mut reports = Vec::new();
    for (i, dims) in systems.iter().enumerate() {
        let f = functional(&name, dims)?;
        let sampler = lib(RngSpec::new(sub_seed(seed, i as u64), Measure::Perturbation { radius }))?;
        reports.push(lib(check_asymptotic_continuity(f.as_ref(), &spec, &sampler, trials, dims))?);
    }
    emit_report(o, "fannes", concat(reports, seed, DEFAULT_SLACK), &eff)
}

pub fn tales(o: &Options) -> Res<usize> {
    let seed = o.seed()?;
    let mut eff = Effective::new("tales", seed);
    let trials = o.trials(1000)?;
    let ds = o.dim_list("2..6")?;
    let radius = o.radius.unwrap_or(0.5);
    let tol = 1e-10;
    eff.set("d", &ds).set("trials", trials).set("radius", radius).set("tolerance", tol);
    let mut reports = Vec::new();
    for (i, &d) in ds.iter().enumerate() {
        let sampler = lib(RngSpec::new(sub_seed(seed, i as u64), Measure::Perturbation { radius }))?;
        reports.push(lib(check_tales(&sampler, trials, &[d], tol))?);
    }
    emit_report(o, "tales", concat(reports, seed, 0.0), &eff)
}

pub fn prop1(o: &Options) -> Res<usize> {
    let seed = o.seed()?;
    let mut eff = Effective::new("prop1", seed);
    let trials = o.trials(1000)?;
    let ds = o.dim_list("2..4")?;
    let name = o.functional.clone().unwrap_or_else(|| "entropy".into());
    let directions = match o.direction.as_deref() {
        None => vec![TransferDirection::RobustnessToContinuity, TransferDirection::ContinuityToRobustness],
        Some(s) => vec![serde_json::from_value(Value::String(s.into())).map_err(|_| format!("unknown direction {s:?}"))?],
    };
    let mut stages = Vec::new();
    for dir in &directions {
        let source = match dir {
            TransferDirection::RobustnessToContinuity => o.spec(1.0, CorrectionForm::BinaryEntropy, 1.0)?,
            TransferDirection::ContinuityToRobustness if o.direction.is_some() => o.spec(1.0, CorrectionForm::Eta, 1.0)?,
            TransferDirection::ContinuityToRobustness => ContinuitySpec::new(1.0, entrocheck::continuity::Correction::new(CorrectionForm::Eta, 1.0)).expect("valid"),
        };
        stages.push((*dir, source, transfer_constants(*dir, &source)));
    }
    eff.set("d", &ds).set("trials", trials).set("functional", &name).set(
        "stages",
        stages
            .iter()
            .map(|(d, s, t)| json!({ "direction": d, "source": spec_json(s), "transferred": spec_json(t) }))
            .collect::<Vec<_>>(),
    );
    let mut reports = Vec::new();
    let mut k = 0;
    for &d in &ds {
        let f = functional(&name, &[d])?;
        for (dir, source, transferred) in &stages {
            let mut sampler = || {
                k += 1;
                lib(RngSpec::new(sub_seed(seed, k), Measure::HilbertSchmidtMixed))
            };
            let (robust, cont) = match dir {
                TransferDirection::RobustnessToContinuity => (source, transferred),
                TransferDirection::ContinuityToRobustness => (transferred, source),
            };
            let s1 = sampler()?;
            let s2 = sampler()?;
            reports.push(lib(check_robustness(f.as_ref(), robust, &s1, trials, &[d]))?);
            reports.push(lib(check_asymptotic_continuity(f.as_ref(), cont, &s2, trials, &[d]))?);
        }
    }
    emit_report(o, "prop1", concat(reports, seed, DEFAULT_SLACK), &eff)
}

pub fn reldist(o: &Options) -> Res<usize> {
    let seed = o.seed()?;
    let mut eff = Effective::new("reldist", seed);
    let cfg = optimizer(o, seed, 32, &mut eff);
    if let Some(p) = &o.input {
        eff.set("input", p);
        let rho = load_state(p)?;
        let set = convex_set(o, rho.dims(), seed, 0, &mut eff)?;
        let r = lib(rel_entropy_distance(&rho, &set, &cfg))?;
        let result = json!({
            "value": r.value,
            "argmin_weights": r.argmin_weights,
            "argmin_state": r.argmin_state,
            "converged": r.converged,
            "iterations": r.iterations,
        });
        return emit_result(o, "reldist", result, &eff, 0);
    }
    // Campaign: the optimum must not exceed S(ρ|σ_j) for any generator.
    let trials = o.trials(100)?;
    let ds = o.dim_list("2")?;
    eff.set("d", &ds).set("trials", trials);
    let mut reports = Vec::new();
    for (i, &d) in ds.iter().enumerate() {
        let set = convex_set(o, &[d], sub_seed(seed, 2 * i as u64), 0, &mut eff)?;
        let sampler = lib(RngSpec::new(sub_seed(seed, 2 * i as u64 + 1), Measure::HilbertSchmidtMixed))?;
        let mut records = Vec::new();
        for t in 0..trials {
            let rho = sample_state(&sampler.for_trial(t), &[d]);
            let r = lib(rel_entropy_distance(&rho, &set, &cfg))?;
            let best_vertex = set
                .generators()
                .iter()
                .map(|g| relative_entropy(&rho, g).map(|v| v.as_f64()))
                .collect::<entrocheck::Result<Vec<_>>>()
                .map_err(|e| e.to_string())?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            records.push(BoundRecord::new(t, d, 0.0, r.value, best_vertex, 1e-8).unreliable(!r.converged));
        }
        reports.push(BoundReport::new(records, seed, 1e-8, 0));
    }
    emit_report(o, "reldist", concat(reports, seed, 1e-8), &eff)
}

pub fn lemma2(o: &Options) -> Res<usize> {
    let seed = o.seed()?;
    let mut eff = Effective::new("lemma2", seed);
    let trials = o.trials(500)?;
    let ds = o.dim_list("2..3")?;
    let cfg = optimizer(o, seed, 8, &mut eff);
    eff.set("d", &ds).set("trials", trials);
    let mut reports = Vec::new();
    for (i, &d) in ds.iter().enumerate() {
        let set = convex_set(o, &[d], sub_seed(seed, 2 * i as u64), 20, &mut eff)?;
        let sampler = lib(RngSpec::new(sub_seed(seed, 2 * i as u64 + 1), Measure::HilbertSchmidtMixed))?;
        reports.push(lib(lemma2_campaign(&set, &sampler, trials, &cfg))?);
    }
    emit_report(o, "lemma2", concat(reports, seed, entrocheck::reldist::OPTIMIZER_SLACK), &eff)
}

pub fn donation(o: &Options) -> Res<usize> {
    let seed = o.seed()?;
    let mut eff = Effective::new("donation", seed);
    let trials = o.trials(50)?;
    let ds = o.dim_list("2")?;
    let members = o.members.unwrap_or(5);
    if members == 0 {
        return Err("--members must be at least 1".into());
    }
    let cfg = optimizer(o, seed, 8, &mut eff);
    eff.set("d", &ds).set("trials", trials).set("members", members);
    let mut reports = Vec::new();
    for (i, &d) in ds.iter().enumerate() {
        let set = convex_set(o, &[d], sub_seed(seed, 2 * i as u64), 10, &mut eff)?;
        reports.push(lib(donation_campaign(&set, members, sub_seed(seed, 2 * i as u64 + 1), trials, &cfg))?);
    }
    emit_report(o, "donation", concat(reports, seed, entrocheck::reldist::OPTIMIZER_SLACK), &eff)
}

fn ancilla_split(rho: &DensityMatrix) -> Res<Vec<usize>> {
    let dims = rho.dims();
    if dims.len() < 2 {
        return Err(format!("expected a state on X ⊗ E, got dims {dims:?}"));
    }
    Ok(dims[..dims.len() - 1].to_vec())
}

fn arrow_with(o: &Options, name: &'static str, kind: Option<MeasurementKind>) -> Res<usize> {
    let seed = o.seed()?;
    let mut eff = Effective::new(name, seed);
    let rho = input_state(o, seed, "2,2", &mut eff)?;
    let fname = o.functional.clone().unwrap_or_else(|| "entropy".into());
    let f = functional(&fname, &ancilla_split(&rho)?)?;
    let kind = match (kind, o.kind.as_deref()) {
        (Some(k), _) => k,
        (None, None) => MeasurementKind::General,
        (None, Some(s)) => serde_json::from_value(Value::String(s.into())).map_err(|_| format!("unknown measurement kind {s:?}"))?,
    };
    let sup = o.sup.unwrap_or(false);
    let opts = arrow_options(o, seed, &mut eff);
    eff.set("functional", &fname).set("kind", kind).set("sup", sup);
    let r = match (kind, sup) {
        (MeasurementKind::General, false) => arrow_down(&rho, f.as_ref(), o.budget, &opts),
        (MeasurementKind::General, true) => arrow_up(&rho, f.as_ref(), o.budget, &opts),
        (MeasurementKind::RankOne, false) => entrocheck::arrowing::arrow_down_cpl(&rho, f.as_ref(), o.budget, &opts),
        (MeasurementKind::RankOne, true) => return Err("the supremum is only implemented for general measurements".into()),
    };
    let r = lib(r)?;
    emit_result(o, name, serde_json::to_value(ArrowResultJson::from(&r)).expect("serialisable"), &eff, 0)
}

pub fn arrow(o: &Options) -> Res<usize> {
    arrow_with(o, "arrow", None)
}

pub fn cpl(o: &Options) -> Res<usize> {
    if o.sup == Some(true) {
        return Err("cpl is an infimum; --sup is not accepted".into());
    }
    arrow_with(o, "cpl", Some(MeasurementKind::RankOne))
}

pub fn cback(o: &Options) -> Res<usize> {
    let seed = o.seed()?;
    let mut eff = Effective::new("cback", seed);
    let rho = input_state(o, seed, "2,2", &mut eff)?;
    if rho.dims().len() != 2 {
        return Err(format!("expected a bipartite state, got dims {:?}", rho.dims()));
    }
    let opts = arrow_options(o, seed, &mut eff);
    let r = lib(classical_correlation_backward(&rho, o.budget, &opts))?;
    emit_result(o, "cback", serde_json::to_value(ArrowResultJson::from(&r)).expect("serialisable"), &eff, 0)
}

pub fn intrinsic(o: &Options) -> Res<usize> {
    let seed = o.seed()?;
    let mut eff = Effective::new("intrinsic", seed);
    let joint: ClassicalJoint = match &o.input {
        Some(p) => {
            eff.set("input", p);
            read_json(p)?
        }
        None => {
            let mut rng = trial_rng(seed, 0);
            let w: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
            let s: f64 = w.iter().sum();
            eff.set("joint", "uniform-random-2x2x2");
            lib(ClassicalJoint::new(2, 2, 2, w.into_iter().map(|x| x / s).collect()))?
        }
    };
    let opts = IntrinsicOptions { restarts: o.restarts.unwrap_or(16), seed, ..IntrinsicOptions::default() };
    eff.set("options", &opts);
    let r = lib(intrinsic_information(&joint, &opts))?;
    let result = json!({
        "value": r.value,
        "channel": r.channel,
        "converged": r.converged,
        "conditional_mutual_information": conditional_mutual_information(&joint),
        "mutual_information": joint.mutual_information_xy(),
    });
    emit_result(o, "intrinsic", result, &eff, 0)
}

pub fn roof(o: &Options) -> Res<usize> {
    let seed = o.seed()?;
    let mut eff = Effective::new("roof", seed);
    let rho = input_state(o, seed, "2,2", &mut eff)?;
    let fname = o.functional.clone().unwrap_or_else(|| "sa".into());
    let f = functional(&fname, rho.dims())?;
    let mixed = o.mixed.unwrap_or(false);
    let opts = arrow_options(o, seed, &mut eff);
    eff.set("functional", &fname).set("mixed", mixed);
    let r = if mixed {
        lib(mixed_convex_roof(&rho, f.as_ref(), o.budget, &opts))?
    } else {
        lib(pure_convex_roof(&rho, f.as_ref(), o.budget, &opts))?
    };
    emit_result(o, "roof", serde_json::to_value(RoofResultJson::from(&r)).expect("serialisable"), &eff, 0)
}

pub fn ef(o: &Options) -> Res<usize> {
    let seed = o.seed()?;
    let mut eff = Effective::new("ef", seed);
    let rho = input_state(o, seed, "2,2", &mut eff)?;
    if rho.dims().len() != 2 {
        return Err(format!("expected a bipartite state, got dims {:?}", rho.dims()));
    }
    let opts = arrow_options(o, seed, &mut eff);
    let r = lib(entanglement_of_formation(&rho, &opts))?;
    emit_result(o, "ef", serde_json::to_value(RoofResultJson::from(&r)).expect("serialisable"), &eff, 0)
}

pub fn roofgap(o: &Options) -> Res<usize> {
    let seed = o.seed()?;
    let mut eff = Effective::new("roofgap", seed);
    let ds = o.dim_list("3")?;
    if ds.iter().any(|&d| d < 2) {
        return Err("roofgap needs d >= 2".into());
    }
    let opts = arrow_options(o, seed, &mut eff);
    eff.set("d", &ds);
    let mut violations = 0;
    let mut rows = Vec::new();
    for &d in &ds {
        let rec = lib(roof_gap_antisymmetric(d, &opts))?;
        let bound = (2.0 * d as f64 / (d as f64 - 1.0)).log2();
        let ok = d < 3 || (rec.mixed_roof_im <= bound + 1e-9 && rec.pure_roof_im >= 2.0 - 1e-2);
        violations += usize::from(!ok);
        rows.push(json!({ "record": rec, "mixed_bound": bound, "ok": ok }));
    }
    emit_result(o, "roofgap", Value::Array(rows), &eff, violations)
}

pub fn reduce(o: &Options) -> Res<usize> {
    let seed = o.seed()?;
    let mut eff = Effective::new("reduce", seed);
    let path = o.input.as_ref().ok_or("reduce needs --input <ensemble.json>")?;
    eff.set("input", path);
    let mut js: EnsembleJson = read_json(path)?;
    if js.members.iter().any(|m| m.value.is_none()) {
        let name = o.functional.as_deref().ok_or("some members have no value; pass --functional to compute them")?;
        let dims = js.members.first().map(|m| m.state.dims().to_vec()).unwrap_or_default();
        let f = functional(name, &dims)?;
        eff.set("functional", name);
        for m in js.members.iter_mut().filter(|m| m.value.is_none()) {
            m.value = Some(f.eval(&m.state).finite().ok_or("functional is infinite on a member")?);
        }
    }
    let ve = lib(ValuedEnsemble::from_json(js))?;
    let r = reduce_ensemble(&ve);
    let shift = lib(trace_distance_norm(&ve.barycenter(), &r.barycenter()))?;
    let value_shift = (ve.mean_value() - r.mean_value()).abs();
    let d = ve.barycenter().dim();
    let ok = shift <= 1e-10 && value_shift <= 1e-10 && r.len() <= d * d + 1;
    let result = json!({
        "input_size": ve.len(),
        "output_size": r.len(),
        "barycenter_shift": shift,
        "value_shift": value_shift,
        "ensemble": r.to_json(),
    });
    emit_result(o, "reduce", result, &eff, usize::from(!ok))
}
