//! Acceptance criteria, one line per criterion.
//!
//! Criteria 1–4 are empirical claims about regenerated data. They are
//! computed at the stated tolerance and reported; the process status is
//! decided by the deterministic criteria 5–7.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;

use trajsel::bbob::make_instance;
use trajsel::classifiers::{best_split, fit_rotation_forest, gini, pca, RotationParams};
use trajsel::config::{ExperimentConfig, InputFamily};
use trajsel::ela_features::SobolGenerator;
use trajsel::experiments::report::ExperimentReport;
use trajsel::experiments::{ks_two_sample, loio_folds, LabeledData};
use trajsel::pipeline::{Pipeline, Study};
use trajsel::rng::rng_from;
use trajsel::solvers::{resume, run, Algorithm, SolverConfig};
use trajsel::trajectory::{probe, running_min, Mode};

type Check = Result<String, String>;

#[derive(PartialEq)]
enum Kind {
    Empirical,
    Deterministic,
}

struct Line {
    id: &'static str,
    kind: Kind,
    passed: bool,
    detail: String,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn median_of(report: &ExperimentReport, input: &str) -> Result<f64, String> {
    report
        .evaluation(input)
        .map(|e| e.summary.median)
        .ok_or_else(|| format!("{} report lacks {input}", report.experiment))
}

fn desk_config(dir: &Path) -> ExperimentConfig {
    ExperimentConfig {
        combinations: vec!["P".parse().unwrap(), "ALL".parse().unwrap()],
        input_kinds: vec![InputFamily::Raw],
        output_dir: dir.to_path_buf(),
        ..Default::default()
    }
}

fn reduced_config(dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        dimension: 3,
        functions: vec![1, 2, 6, 10, 15, 21, 24],
        instances_per_function: 3,
        runs_per_instance: 2,
        labeling_budget: 1_000,
        combinations: vec!["C".parse().unwrap(), "D-P".parse().unwrap(), "ALL".parse().unwrap()],
        output_dir: dir.to_path_buf(),
        ..Default::default()
    };
    cfg.studies.shuffles = 3;
    cfg.studies.sweep_generations = vec![2, 4, 7];
    cfg.classifiers.random_forest.n_trees = 30;
    cfg.classifiers.boruta.n_trees = 30;
    cfg.classifiers.boruta.max_iter = 8;
    cfg
}

struct Desk {
    pipeline: Pipeline,
    accuracy: ExperimentReport,
    shuffle: ExperimentReport,
    order: ExperimentReport,
    sweep: ExperimentReport,
}

fn build_desk(dir: &Path) -> Result<Desk, String> {
    let pipeline = Pipeline::new(desk_config(dir)).map_err(err)?;
    let t = Instant::now();
    let g = pipeline.generate(false).map_err(err)?;
    pipeline.extract().map_err(err)?;
    println!("# desk data: {} runs generated and extracted in {:.0} s", g.computed, t.elapsed().as_secs_f64());
    let study = |s| {
        let t = Instant::now();
        let r = pipeline.study(s).map_err(err);
        println!("# study {s}: {:.0} s", t.elapsed().as_secs_f64());
        r
    };
    let accuracy = study(Study::Accuracy)?;
    let shuffle = study(Study::Shuffle)?;
    let order = study(Study::Order)?;
    let sweep = study(Study::Sweep)?;
    study(Study::Project)?;
    Ok(Desk { pipeline, accuracy, shuffle, order, sweep })
}

fn criterion_1(d: &Desk) -> Check {
    let raw = median_of(&d.accuracy, "raw:ALL:current:g7")?;
    let ela = median_of(&d.accuracy, "ela:500")?;
    ensure(raw >= ela, format!("ALL-current g7 rotation forest median {raw:.3} vs ELA-500 random forest {ela:.3} (need >=)"))
}

fn criterion_2(d: &Desk) -> Check {
    let raw = median_of(&d.accuracy, "raw:P:best:g2")?;
    let ela = median_of(&d.accuracy, "ela:300")?;
    let gap = (raw - ela).abs();
    ensure(
        gap <= 0.10 + 1e-12,
        format!("PSO best g2 (80 evals) median {raw:.3} vs ELA-300 {ela:.3}, gap {:.1} pp (need <= 10)", 100.0 * gap),
    )
}

fn criterion_3(d: &Desk) -> Check {
    let ps = |r: &ExperimentReport| r.ks.iter().map(|k| k.p_value).collect::<Vec<_>>();
    let (s, o) = (ps(&d.shuffle), ps(&d.order));
    let fmt = |v: &[f64]| v.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>().join(",");
    let ok = s.len() == 5 && o.len() == 5 && s.iter().chain(&o).all(|&p| p >= 0.05);
    ensure(ok, format!("shuffle p = [{}], order p = [{}] (need all >= 0.05)", fmt(&s), fmt(&o)))
}

fn criterion_4(d: &Desk) -> Check {
    let m = |mode: &str, g: usize| median_of(&d.sweep, &format!("raw:ALL:{mode}:g{g}"));
    let mut curve = Vec::new();
    for g in 2..=7 {
        curve.push(format!("g{g} {:.3}/{:.3}", m("best", g)?, m("current", g)?));
    }
    let early = m("best", 2)? >= m("current", 2)?;
    let late = m("current", 7)? >= m("best", 7)?;
    ensure(
        early && late,
        format!("best/current medians: {} (need best >= current at g2: {early}, current >= best at g7: {late})", curve.join(", ")),
    )
}

fn criterion_5() -> Check {
    let mut rng = rng_from(0xC4EC);
    for case in 0..50 {
        let alg = Algorithm::ALL[rng.random_range(0..3)];
        let inst = make_instance(rng.random_range(1..=24), rng.random_range(1..=5), 10).map_err(err)?;
        let pop = alg.default_population();
        let split = rng.random_range(1..=10);
        let b2 = rng.random_range(1..=6 * pop);
        let seed = rng.random::<u64>();
        let cfg = SolverConfig::new(alg, seed, split * pop + b2);
        let full = run(&inst, &cfg).map_err(err)?;
        let head = run(&inst, &SolverConfig { budget_evals: split * pop, ..cfg.clone() }).map_err(err)?;
        let chk = head.checkpoints.get(&split).ok_or(format!("case {case}: no checkpoint at {split}"))?;
        let tail = resume(&inst, &cfg, chk, b2).map_err(err)?;
        let joined: Vec<_> = head.records.iter().chain(&tail.records).collect();
        let same = joined.len() == full.records.len()
            && joined.iter().zip(&full.records).all(|(a, b)| {
                a.eval_index == b.eval_index && a.generation == b.generation && a.fitness.to_bits() == b.fitness.to_bits()
            })
            && tail.final_best.to_bits() == full.final_best.to_bits();
        if !same {
            return Err(format!("case {case}: {alg} f{} i{} split {split} b2 {b2} diverged", inst.function_id, inst.instance_id));
        }
    }
    Ok("50 (algorithm, instance, split) triples bit-identical".into())
}

fn exhaustive_gini(x: &[Vec<f64>], y: &[usize]) -> Option<f64> {
    let n = x.len();
    let mut best: Option<f64> = None;
    for f in 0..x[0].len() {
        let vals: BTreeSet<u64> = x.iter().map(|r| r[f].to_bits()).collect();
        let mut vals: Vec<f64> = vals.into_iter().map(f64::from_bits).collect();
        vals.sort_by(f64::total_cmp);
        for w in vals.windows(2) {
            let t = 0.5 * (w[0] + w[1]);
            let (mut l, mut r) = (vec![0; 3], vec![0; 3]);
            for (row, &c) in x.iter().zip(y) {
                if row[f] <= t { l[c] += 1 } else { r[c] += 1 }
            }
            let nl: usize = l.iter().sum();
            let imp = (nl as f64 * gini(&l) + (n - nl) as f64 * gini(&r)) / n as f64;
            best = Some(best.map_or(imp, |b: f64| b.min(imp)));
        }
    }
    best
}

fn ecdf_ks(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let mut worst = 0usize;
    for &t in a.iter().chain(b) {
        let ca = a.iter().filter(|&&v| v <= t).count();
        let cb = b.iter().filter(|&&v| v <= t).count();
        worst = worst.max((ca * m).abs_diff(cb * n));
    }
    worst as f64 / (n * m) as f64
}

fn criterion_6() -> Check {
    let mut rng = rng_from(0x06AC);
    for case in 0..200 {
        let n = rng.random_range(2..=12);
        let p = rng.random_range(1..=3);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random_range(0..5) as f64).collect()).collect();
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let got = best_split(&x, &y, 3).map(|s| s.impurity);
        let want = exhaustive_gini(&x, &y);
        let agree = match (got, want) {
            (None, None) => true,
            (Some(a), Some(b)) => (a - b).abs() < 1e-12,
            _ => false,
        };
        if !agree {
            return Err(format!("(a) Gini case {case}: split {got:?} vs exhaustive {want:?}"));
        }
    }

    for case in 0..100 {
        let a: Vec<f64> = (0..rng.random_range(1..=8)).map(|_| rng.random_range(0..6) as f64).collect();
        let b: Vec<f64> = (0..rng.random_range(1..=8)).map(|_| rng.random_range(0..6) as f64).collect();
        let got = ks_two_sample(&a, &b).map_err(err)?.statistic;
        if got != ecdf_ks(&a, &b) {
            return Err(format!("(b) KS case {case}: {got} vs {}", ecdf_ks(&a, &b)));
        }
    }

    // one-dimensional Sobol: direction numbers v_k = 2^(32-k), point i+1
    // flips v at the lowest zero bit of i
    let mut g = SobolGenerator::new(1).map_err(err)?;
    let mut state = 0u32;
    for i in 0u32..32 {
        let c = i.trailing_ones();
        state ^= 1u32 << (31 - c);
        let want = state as f64 / 2f64.powi(32);
        let got = g.next_point()[0];
        if got != want {
            return Err(format!("(c) Sobol point {i}: {got} vs {want}"));
        }
    }

    let x: Vec<Vec<f64>> = (0..50).map(|_| (0..6).map(|j| rng.random_range(-1.0..1.0) * (j + 1) as f64).collect()).collect();
    let model = pca(&x, 6).map_err(err)?;
    let worst = x
        .iter()
        .map(|r| {
            let back = model.reconstruct(&model.transform(r));
            back.iter().zip(r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    ensure(worst < 1e-9, format!("(a) 200 Gini cases, (b) 100 KS pairs, (c) 32 Sobol points exact; (d) PCA error {worst:.1e}"))
}

fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).into_iter().flatten().flatten() {
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else if let Ok(bytes) = fs::read(&path) {
                out.insert(path.strip_prefix(root).unwrap_or(&path).to_path_buf(), bytes);
            }
        }
    }
    out
}

fn full_pipeline(dir: &Path) -> Result<(), String> {
    let p = Pipeline::new(reduced_config(dir)).map_err(err)?;
    p.generate(false).map_err(err)?;
    p.extract().map_err(err)?;
    for s in Study::ALL {
        p.study(s).map_err(err)?;
    }
    Ok(())
}

fn criterion_7(d: &Desk) -> Check {
    let p = &d.pipeline;
    let runs = p.load_runs().map_err(err)?;
    let g = p.config.max_generations();
    for log in &runs {
        let best = probe(log, g, Mode::Best).map_err(err)?;
        let fit = log.fitness();
        if best.values.windows(2).any(|w| w[1] > w[0])
            || running_min(&fit).windows(2).any(|w| w[1] > w[0])
            || fit.iter().any(|&f| log.final_best > f)
        {
            return Err(format!("run {} f{} i{} r{} best trajectory increases", log.config.algorithm, log.instance.function_id, log.instance.instance_id, log.run_index));
        }
    }

    let labels = p.load_labels().map_err(err)?;
    let mut datasets = Vec::new();
    for (c, m, g) in p.trajectory_kinds() {
        let set = p.load_trajectories(&c, m, g).map_err(err)?;
        datasets.push((format!("raw:{c}:{m}:g{g}"), LabeledData::from_trajectories(&set, &labels).map_err(err)?));
    }
    for (name, _, data) in p.accuracy_inputs(&labels).map_err(err)? {
        if name.starts_with("ela") {
            datasets.push((name, data));
        }
    }
    for (name, data) in &datasets {
        let d = &data.dataset;
        let folds = loio_folds(d).map_err(err)?;
        let mut cover = vec![0; d.n_rows()];
        for f in &folds {
            let train: BTreeSet<u32> = f.train.iter().map(|&i| d.groups[i]).collect();
            let valid: BTreeSet<u32> = f.validation.iter().map(|&i| d.groups[i]).collect();
            if !train.is_disjoint(&valid) || valid.len() != 1 {
                return Err(format!("{name}: fold {} leaks", f.instance_id));
            }
            f.validation.iter().for_each(|&i| cover[i] += 1);
        }
        if cover.iter().any(|&c| c != 1) {
            return Err(format!("{name}: folds do not partition the rows"));
        }
    }

    let mut blocks = 0;
    let mut worst: f64 = 0.0;
    for (name, data) in datasets.iter().filter(|(n, _)| n.contains("current:g7") || n.contains("best:g2")) {
        for f in loio_folds(&data.dataset).map_err(err)? {
            let model = fit_rotation_forest(&data.dataset.subset(&f.train), &RotationParams::default(), f.instance_id as u64)
                .map_err(|e| format!("{name}: {e}"))?;
            for b in model.rotation_blocks() {
                blocks += 1;
                for (i, ri) in b.rotation.iter().enumerate() {
                    for (j, rj) in b.rotation.iter().enumerate() {
                        let dot: f64 = ri.iter().zip(rj).map(|(a, b)| a * b).sum();
                        worst = worst.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
                    }
                }
            }
        }
    }
    if worst >= 1e-8 {
        return Err(format!("rotation block orthonormality error {worst:.1e}"));
    }

    let before = snapshot(&p.layout.reports());
    p.study(Study::Accuracy).map_err(err)?;
    p.study(Study::Sweep).map_err(err)?;
    let after = snapshot(&p.layout.reports());
    if before != after {
        return Err("desk-scale reports changed when rerun".into());
    }
    let (a, b) = (tempfile::tempdir().map_err(err)?, tempfile::tempdir().map_err(err)?);
    full_pipeline(a.path())?;
    full_pipeline(b.path())?;
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    if sa != sb {
        let diff: Vec<_> = sa.keys().filter(|k| sa.get(*k) != sb.get(*k)).map(|k| k.display().to_string()).collect();
        return Err(format!("reduced-scale reruns differ in {diff:?}"));
    }
    Ok(format!(
        "{} run logs monotone; {} datasets leak-free; {blocks} rotation blocks (max error {worst:.1e}); reports byte-identical across reruns ({} files)",
        runs.len(),
        datasets.len(),
        sa.len()
    ))
}

fn main() {
    // libtest arguments are ignored
    let start = Instant::now();
    let dir = tempfile::tempdir().expect("temporary directory");
    let desk = build_desk(dir.path());
    let mut lines = Vec::new();
    let mut record = |id, kind, outcome: Check| {
        let (passed, detail) = match outcome {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        lines.push(Line { id, kind, passed, detail });
    };
    let on_desk = |f: fn(&Desk) -> Check| match &desk {
        Ok(d) => f(d),
        Err(e) => Err(format!("desk pipeline failed: {e}")),
    };
    record("1 trajectory vs ELA-500", Kind::Empirical, on_desk(criterion_1));
    record("2 PSO g2 vs ELA-300", Kind::Empirical, on_desk(criterion_2));
    record("3 shuffle/order invariance", Kind::Empirical, on_desk(criterion_3));
    record("4 best/current crossover", Kind::Empirical, on_desk(criterion_4));
    record("5 checkpoint equivalence", Kind::Deterministic, criterion_5());
    record("6 oracle suites", Kind::Deterministic, criterion_6());
    record("7 structural invariants", Kind::Deterministic, on_desk(criterion_7));

    for l in &lines {
        let tag = match (&l.kind, l.passed) {
            (_, true) => "PASS",
            (Kind::Empirical, false) => "FAIL (empirical)",
            (Kind::Deterministic, false) => "FAIL",
        };
        println!("criterion {:<28} {tag:<16} {}", l.id, l.detail);
    }
    println!("criterion {:<28} {:<16} published accuracy figures and UMAP cluster geometry are not asserted", "8 excluded", "EXCLUDED");
    let failed = lines.iter().filter(|l| !l.passed).count();
    println!("acceptance: {} passed, {failed} failed in {:.0} s", lines.len() - failed, start.elapsed().as_secs_f64());
    if lines.iter().any(|l| l.kind == Kind::Deterministic && !l.passed) {
        std::process::exit(1);
    }
}
