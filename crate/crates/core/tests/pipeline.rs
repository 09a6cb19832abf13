use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use trajsel::config::{ExperimentConfig, InputFamily};
use trajsel::error::Error;
use trajsel::pipeline::{Pipeline, Study};
use trajsel::trajectory::{Combination, Mode};

fn tiny(dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        dimension: 2,
        functions: vec![1, 6, 15, 21],
        instances_per_function: 3,
        runs_per_instance: 2,
        labeling_budget: 400,
        generations: vec![2],
        combinations: vec!["C".parse().unwrap(), "ALL".parse().unwrap()],
        input_kinds: vec![InputFamily::Raw, InputFamily::Ts, InputFamily::TsSelected],
        output_dir: dir.to_path_buf(),
        ..Default::default()
    };
    cfg.studies.shuffles = 2;
    cfg.studies.study_generations = 3;
    cfg.studies.sweep_generations = vec![2, 3];
    cfg.classifiers.random_forest.n_trees = 15;
    cfg.classifiers.rotation_forest.n_trees = 4;
    cfg.classifiers.boruta.n_trees = 15;
    cfg.classifiers.boruta.max_iter = 6;
    cfg
}

fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn full_run(p: &Pipeline) {
    p.generate(false).unwrap();
    p.extract().unwrap();
    for s in Study::ALL {
        p.study(s).unwrap();
    }
}

#[test]
fn reruns_with_the_same_seed_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let pa = Pipeline::new(tiny(a.path())).unwrap();
    let pb = Pipeline::new(tiny(b.path())).unwrap();
    assert_eq!(pa.hash, pb.hash);
    full_run(&pa);
    full_run(&pb);
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    assert_eq!(sa.keys().collect::<Vec<_>>(), sb.keys().collect::<Vec<_>>());
    for (k, v) in &sa {
        assert!(v == &sb[k], "{} differs", k.display());
    }
    let reports: Vec<_> = sa.keys().filter(|k| k.starts_with("reports")).collect();
    assert!(reports.iter().any(|k| k.to_string_lossy().ends_with(&format!("accuracy_{}.json", &pa.hash[..12]))));
    assert_eq!(pa.existing_reports().unwrap().len(), Study::ALL.len());
}

#[test]
fn generate_reuses_cached_cells_and_rejects_foreign_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    let p = Pipeline::new(cfg.clone()).unwrap();
    let first = p.generate(false).unwrap();
    assert_eq!((first.computed, first.cached), (4 * 3 * 2 * 3, 0));
    let again = p.generate(false).unwrap();
    assert_eq!((again.computed, again.cached), (0, 72));

    let other = Pipeline::new(ExperimentConfig { base_seed: 2, ..cfg }).unwrap();
    assert!(matches!(other.generate(false), Err(Error::StaleCache(_))));
    assert!(matches!(other.extract(), Err(Error::StaleCache(_))));
    assert!(matches!(other.study(Study::Sweep), Err(Error::StaleCache(_))));
    let forced = other.generate(true).unwrap();
    assert_eq!(forced.computed, 72);
    assert!(matches!(p.extract(), Err(Error::StaleCache(_))));
}

#[test]
fn stages_report_missing_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let p = Pipeline::new(tiny(dir.path())).unwrap();
    assert!(matches!(p.extract(), Err(Error::IncompleteData(_))));
    p.generate(false).unwrap();
    assert!(matches!(p.study(Study::Accuracy), Err(Error::IncompleteData(_))));
    p.extract().unwrap();
    let set = p.load_trajectories(&Combination::all(), Mode::Current, 3).unwrap();
    assert_eq!(set.trajectories.len(), 4 * 3 * 2);
    assert_eq!(set.width(), Some(3 * (10 + 30 + 40)));
}

#[test]
fn normalized_trajectories_lie_in_the_unit_interval() {
    let dir = tempfile::tempdir().unwrap();
    let p = Pipeline::new(ExperimentConfig { normalize_trajectories: true, ..tiny(dir.path()) }).unwrap();
    p.generate(false).unwrap();
    p.extract().unwrap();
    let set = p.load_trajectories(&Combination::all(), Mode::Best, 2).unwrap();
    for t in &set.trajectories {
        assert!(t.values.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(t.values.contains(&0.0));
    }
}
