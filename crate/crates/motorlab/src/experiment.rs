//! Multi-model, multi-seed experiment runner.
//!
//! Output layout under the experiment directory:
//!
//! ```text
//! config.toml                     resolved configuration
//! runs/<model>_<task>_seed<k>/
//!     run.json                    RunRecord
//!     training.csv                per-epoch losses
//!     trials.csv                  held-out test trials of the fit task
//!     checkpoint.txt              best-epoch parameters
//!     lesions.csv                 bilateral models only
//! timing/<model>_<task>_seed<k>.csv   wall-clock times (not deterministic)
//! ```
//!
//! Every file except those under `timing/` is a pure function of the
//! configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use motorlab_core::eval::{self, MetricSummary, METRICS};
use motorlab_core::lesion::{lesion_suite, LesionPlan, LesionRow};
use motorlab_core::tasks::{TaskKind, TrialMetrics, TrialSpec};
use motorlab_core::training::{fit, Environment};
use motorlab_core::NetworkParams;

use crate::config::{Config, Model};
use crate::records::{write_csv, EpochRow, LesionCsvRow, TimingRow, TrialRow};
use crate::{checkpoint, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RunKey {
    pub model: Model,
    pub task: TaskKind,
    pub seed: u64,
}

impl RunKey {
    pub fn dir_name(&self) -> String {
        format!("{}_{}_seed{}", self.model.name(), self.task.name(), self.seed)
    }

    pub fn dir(&self, out: &Path) -> PathBuf {
        out.join("runs").join(self.dir_name())
    }
}

/// Every (model, task, seed) triple of `cfg`, in canonical order.
pub fn run_keys(cfg: &Config) -> Vec<RunKey> {
    let mut keys = Vec::new();
    for model in cfg.models() {
        for task in cfg.tasks() {
            for &seed in &cfg.experiment.seeds {
                keys.push(RunKey { model, task, seed });
            }
        }
    }
    keys
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: Model,
    pub task: TaskKind,
    pub seed: u64,
    pub ok: bool,
    pub error: Option<String>,
    pub epochs_trained: usize,
    pub best_epoch: usize,
    /// Means over the held-out trials of the fit task; `None` when undefined.
    pub metrics: BTreeMap<String, Option<f64>>,
    /// Relative path of the lesion table, if one was produced.
    pub lesion_table: Option<String>,
}

impl RunRecord {
    pub fn key(&self) -> RunKey {
        RunKey { model: self.model, task: self.task, seed: self.seed }
    }
}

/// Held-out trial sets for every task, shared by all runs.
pub struct TestSets {
    pub sets: Vec<(TaskKind, Vec<TrialSpec>)>,
}

impl TestSets {
    pub fn new(n: usize, env: &Environment) -> Result<TestSets> {
        let sets = TaskKind::ALL.into_iter().map(|t| Ok((t, eval::test_set(t, n, env)?))).collect::<Result<_>>()?;
        Ok(TestSets { sets })
    }

    pub fn get(&self, task: TaskKind) -> &[TrialSpec] {
        &self.sets.iter().find(|(t, _)| *t == task).expect("all tasks present").1
    }
}

pub fn metric_map(s: &MetricSummary) -> BTreeMap<String, Option<f64>> {
    METRICS
        .iter()
        .map(|m| {
            let v = s.metric(m).filter(|v| v.is_finite());
            (m.to_string(), v)
        })
        .collect()
}

pub fn trial_rows(key: &RunKey, metrics: &[TrialMetrics]) -> Vec<TrialRow> {
    metrics
        .iter()
        .map(|m| TrialRow {
            model: key.model.name().into(),
            task: key.task.name().into(),
            seed: key.seed,
            trial: m.trial,
            goal_completed: m.goal_completed,
            speed_to_goal: m.speed_to_goal,
            time_in_goal: m.time_in_goal,
            final_distance: m.final_distance,
        })
        .collect()
}

pub fn lesion_csv_rows(model: Model, seed: u64, trained_on: TaskKind, rows: &[LesionRow]) -> Vec<LesionCsvRow> {
    let mut out = Vec::new();
    for r in rows {
        for m in METRICS {
            out.push(LesionCsvRow {
                model: model.kind().name().into(),
                specialised: model.specialised(),
                seed,
                trained_on: trained_on.name().into(),
                lesion: r.lesion_name().into(),
                task: r.task.name().into(),
                metric: m.into(),
                value: r.summary.metric(m).expect("known metric"),
            });
        }
    }
    out
}

/// Trained parameters and everything written for one run.
pub struct RunOutput {
    pub record: RunRecord,
    pub params: Option<NetworkParams>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable");
    s.push('\n');
    crate::write_file(path, s)
}

/// Fits, evaluates and (for bilateral models) lesions one model; writes its
/// run directory. Failures are recorded in `run.json` rather than returned.
pub fn run_one(cfg: &Config, key: RunKey, tests: &TestSets, out: &Path) -> Result<RunOutput> {
    let dir = key.dir(out);
    let mut timing = Vec::new();
    let result = run_inner(cfg, key, tests, &dir, &mut timing);
    let output = match result {
        Ok(o) => o,
        Err(e) => RunOutput {
            record: RunRecord {
                model: key.model,
                task: key.task,
                seed: key.seed,
                ok: false,
                error: Some(e.to_string()),
                epochs_trained: 0,
                best_epoch: 0,
                metrics: BTreeMap::new(),
                lesion_table: None,
            },
            params: None,
        },
    };
    write_json(&dir.join("run.json"), &output.record)?;
    write_csv(&out.join("timing").join(format!("{}.csv", key.dir_name())), &timing)?;
    Ok(output)
}

fn run_inner(cfg: &Config, key: RunKey, tests: &TestSets, dir: &Path, timing: &mut Vec<TimingRow>) -> Result<RunOutput> {
    let env = cfg.environment();
    let arch = cfg.architecture(key.model);
    let timing_row = |epoch, seconds| TimingRow { model: key.model.name().into(), task: key.task.name().into(), seed: key.seed, epoch, seconds };
    let mut clock = Instant::now();
    let fitted = fit(&arch, &cfg.train, &env, key.task, key.model.mode(), key.seed, |rec| {
        timing.push(timing_row(Some(rec.epoch), clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    })?;
    let epochs: Vec<EpochRow> = fitted.history.iter().map(|h| EpochRow { epoch: h.epoch, train_loss: h.train_loss, val_loss: h.val_loss }).collect();
    write_csv(&dir.join("training.csv"), &epochs)?;
    checkpoint::save(&fitted.params, &dir.join("checkpoint.txt"))?;

    let clock = Instant::now();
    let metrics = eval::evaluate_trials(&fitted.params, tests.get(key.task), &env)?;
    write_csv(&dir.join("trials.csv"), &trial_rows(&key, &metrics))?;
    let summary = MetricSummary::of(&metrics);
    timing.push(timing_row(None, clock.elapsed().as_secs_f64()));

    let mut lesion_table = None;
    if key.model.is_bilateral() && cfg.experiment.lesions {
        let clock = Instant::now();
        let plan = LesionPlan { cfg: &cfg.train, env: &env, fit_task: key.task, seed: key.seed, test_sets: &tests.sets };
        let rows = lesion_suite(&fitted.params, &plan)?;
        write_csv(&dir.join("lesions.csv"), &lesion_csv_rows(key.model, key.seed, key.task, &rows))?;
        lesion_table = Some(format!("runs/{}/lesions.csv", key.dir_name()));
        timing.push(timing_row(None, clock.elapsed().as_secs_f64()));
    }

    let record = RunRecord {
        model: key.model,
        task: key.task,
        seed: key.seed,
        ok: true,
        error: None,
        epochs_trained: fitted.epochs_run(),
        best_epoch: fitted.best_epoch,
        metrics: metric_map(&summary),
        lesion_table,
    };
    Ok(RunOutput { record, params: Some(fitted.params) })
}

/// Result of a whole experiment.
pub struct ExperimentOutcome {
    pub records: Vec<RunRecord>,
    pub report: crate::report::ReportOutcome,
}

impl ExperimentOutcome {
    pub fn all_ok(&self) -> bool {
        self.records.iter().all(|r| r.ok) && self.report.missing.is_empty()
    }
}

/// Runs every (model, task, seed) of `cfg` on a worker pool, then emits the
/// report. `progress` is called once per finished run, in completion order.
pub fn run_experiment(cfg: &Config, out: &Path, progress: &(dyn Fn(&RunRecord) + Sync)) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    // The thread count does not affect results, so it is left out of the record.
    let mut recorded = cfg.clone();
    recorded.experiment.threads = 0;
    crate::write_file(&out.join("config.toml"), recorded.to_toml())?;
    let env = cfg.environment();
    let tests = TestSets::new(cfg.experiment.test_trials, &env)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.experiment.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let keys = run_keys(cfg);
    let records: Vec<RunRecord> = pool.install(|| {
        keys.par_iter()
            .map(|key| {
                let r = run_one(cfg, *key, &tests, out)?.record;
                progress(&r);
                Ok(r)
            })
            .collect::<Result<_>>()
    })?;
    let report = crate::report::emit_report(out)?;
    Ok(ExperimentOutcome { records, report })
}
