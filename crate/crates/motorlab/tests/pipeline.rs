use std::path::Path;

use motorlab::core::tasks::TaskKind;
use motorlab::experiment::{run_experiment, RunRecord};
use motorlab::records::{read_csv, LesionCsvRow, TrialRow};
use motorlab::report::{emit_report, summarise};
use motorlab::{checkpoint, Config, Model};

fn tiny(threads: usize) -> Config {
    let mut c = Config::parse(
        "[experiment]\nmodels = [\"Uni-B\", \"CC-S\"]\nseeds = [1, 2]\ntest_trials = 6\n\
         [train]\nmax_epochs = 2\nbatch_size = 2\nbatches_per_epoch = 2\nval_trials = 4\n",
        &[],
    )
    .unwrap();
    c.experiment.threads = threads;
    c
}

fn quiet(_: &RunRecord) {}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn experiment_writes_a_complete_result_set() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&tiny(1), dir.path(), &quiet).unwrap();
    assert!(out.all_ok());
    assert_eq!(out.records.len(), 2 * 2 * 2);

    let run = dir.path().join("runs/CC-S_Hold_seed2");
    let trials: Vec<TrialRow> = read_csv(&run.join("trials.csv")).unwrap();
    assert_eq!(trials.len(), 6);
    assert!(trials.iter().all(|t| t.model == "CC-S" && t.task == "Hold" && t.seed == 2));
    let lesions: Vec<LesionCsvRow> = read_csv(&run.join("lesions.csv")).unwrap();
    // baseline + 7 lesions, two evaluation tasks, four metrics
    assert_eq!(lesions.len(), 8 * 2 * 4);
    assert!(lesions.iter().all(|r| r.trained_on == "Hold" && r.model == "BilateralCC" && r.specialised));
    assert!(!dir.path().join("runs/Uni-B_Hold_seed1/lesions.csv").exists());

    let params = checkpoint::load(&run.join("checkpoint.txt")).unwrap();
    assert_eq!(params.param_count(), 268);

    let s = summarise(dir.path()).unwrap();
    assert_eq!(s.performance("CC-S", "Reach", "goal_completion").unwrap().n, 2);
    assert_eq!(s.lesion("CC-S", "Reach", "corpus_callosum", "Hold", "time_in_goal").unwrap().values.len(), 2);
    assert_eq!(s.family("Hold", "time_in_goal").unwrap().pairs.len(), 1);
    for name in ["summary.json", "README.txt", "figures/performance_Reach_goal_completion.svg", "figures/lesions_CC-S_Hold_time_in_goal.svg"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&tiny(1), a.path(), &quiet).unwrap();
    run_experiment(&tiny(3), b.path(), &quiet).unwrap();
    let strip = |v: Vec<(String, Vec<u8>)>| v.into_iter().filter(|(p, _)| !p.starts_with("timing")).collect::<Vec<_>>();
    let (fa, fb) = (strip(files(a.path())), strip(files(b.path())));
    assert_eq!(fa.iter().map(|f| &f.0).collect::<Vec<_>>(), fb.iter().map(|f| &f.0).collect::<Vec<_>>());
    for ((p, x), (_, y)) in fa.iter().zip(&fb) {
        assert!(x == y, "{p} differs");
    }
}

#[test]
fn report_flags_missing_and_failed_runs() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&tiny(1), dir.path(), &quiet).unwrap();
    std::fs::remove_dir_all(dir.path().join("runs/Uni-B_Reach_seed1")).unwrap();
    let failed = dir.path().join("runs/CC-S_Reach_seed2/run.json");
    let mut rec: RunRecord = serde_json::from_str(&std::fs::read_to_string(&failed).unwrap()).unwrap();
    rec.ok = false;
    rec.error = Some("diverged".into());
    std::fs::write(&failed, serde_json::to_string(&rec).unwrap()).unwrap();

    let outcome = emit_report(dir.path()).unwrap();
    assert_eq!(outcome.missing, vec!["Uni-B_Reach_seed1".to_string()]);
    assert_eq!(outcome.failed, vec!["CC-S_Reach_seed2".to_string()]);
    let s = summarise(dir.path()).unwrap();
    assert_eq!(s.performance("Uni-B", "Reach", "goal_completion").unwrap().n, 1);
    assert_eq!(s.performance("CC-S", "Reach", "goal_completion").unwrap().n, 1);
    let readme = std::fs::read_to_string(dir.path().join("README.txt")).unwrap();
    assert!(readme.contains("MISSING runs: Uni-B_Reach_seed1") && readme.contains("FAILED runs: CC-S_Reach_seed2"));
}

#[test]
fn recorded_config_reloads_identically() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(2);
    cfg.experiment.lesions = false;
    cfg.experiment.tasks = vec![TaskKind::Hold];
    cfg.experiment.models = vec![Model::BiNs];
    cfg.experiment.seeds = vec![4];
    run_experiment(&cfg, dir.path(), &quiet).unwrap();
    let back = Config::load(&dir.path().join("config.toml"), &[]).unwrap();
    cfg.experiment.threads = 0;
    assert_eq!(back, cfg);
    assert!(!dir.path().join("runs/Bi-NS_Hold_seed4/lesions.csv").exists());
}
