//! Aggregate report, rebuilt from the files of an experiment directory.
//!
//! Writes `summary.json`, `README.txt` and `figures/*.svg`. Runs without a
//! `run.json` are listed as missing; runs whose `run.json` records an error are
//! listed as failed. Neither stops the report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use motorlab_core::eval::{mean_sd, MetricSummary, METRICS};
use motorlab_core::tasks::{TaskKind, TrialMetrics};

use crate::config::{Config, Model};
use crate::experiment::{run_keys, RunKey, RunRecord};
use crate::records::{read_csv, LesionCsvRow, TrialRow};
use crate::stats::{pairwise, PairRow};
use crate::svg::{bar_chart, Bar};
use crate::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReportOutcome {
    pub missing: Vec<String>,
    pub failed: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedValue {
    pub seed: u64,
    pub value: Option<f64>,
}

/// Mean and sd over seeds of one per-seed quantity; undefined values are skipped.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Aggregate {
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub n: usize,
    pub values: Vec<SeedValue>,
}

impl Aggregate {
    pub fn of(values: Vec<SeedValue>) -> Self {
        let xs = finite(&values);
        let (m, s) = mean_sd(&xs);
        Aggregate { mean: m.is_finite().then_some(m), sd: s.is_finite().then_some(s), n: xs.len(), values }
    }
}

fn finite(values: &[SeedValue]) -> Vec<f64> {
    values.iter().filter_map(|v| v.value).filter(|v| v.is_finite()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerformanceRow {
    pub model: String,
    pub task: String,
    pub metric: String,
    #[serde(flatten)]
    pub stats: Aggregate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LesionAggRow {
    pub model: String,
    pub trained_on: String,
    pub lesion: String,
    pub task: String,
    pub metric: String,
    #[serde(flatten)]
    pub stats: Aggregate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StatFamily {
    pub task: String,
    pub metric: String,
    pub pairs: Vec<PairRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub models: Vec<String>,
    pub tasks: Vec<String>,
    pub seeds: Vec<u64>,
    pub missing_runs: Vec<String>,
    pub failed_runs: Vec<String>,
    /// Held-out metrics of each model on the task it was fit to, plus
    /// `epochs_trained` and `best_epoch`.
    pub performance: Vec<PerformanceRow>,
    pub lesions: Vec<LesionAggRow>,
    /// Pairwise Welch tests between models; Holm correction within each family.
    pub stats: Vec<StatFamily>,
}

impl Summary {
    pub fn performance(&self, model: &str, task: &str, metric: &str) -> Option<&Aggregate> {
        self.performance.iter().find(|r| r.model == model && r.task == task && r.metric == metric).map(|r| &r.stats)
    }

    pub fn lesion(&self, model: &str, trained_on: &str, lesion: &str, task: &str, metric: &str) -> Option<&Aggregate> {
        self.lesions
            .iter()
            .find(|r| r.model == model && r.trained_on == trained_on && r.lesion == lesion && r.task == task && r.metric == metric)
            .map(|r| &r.stats)
    }

    pub fn family(&self, task: &str, metric: &str) -> Option<&StatFamily> {
        self.stats.iter().find(|f| f.task == task && f.metric == metric)
    }
}

struct RunData {
    key: RunKey,
    record: RunRecord,
    summary: MetricSummary,
    lesions: Vec<LesionCsvRow>,
}

fn load_run(out: &Path, key: RunKey) -> Result<Option<RunData>> {
    let dir = key.dir(out);
    let path = dir.join("run.json");
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let record: RunRecord = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if !record.ok {
        return Ok(Some(RunData { key, record, summary: MetricSummary::of(&[]), lesions: Vec::new() }));
    }
    let trials: Vec<TrialRow> = read_csv(&dir.join("trials.csv"))?;
    let metrics: Vec<TrialMetrics> = trials
        .iter()
        .map(|t| TrialMetrics {
            trial: t.trial,
            goal_completed: t.goal_completed,
            speed_to_goal: t.speed_to_goal,
            time_in_goal: t.time_in_goal,
            final_distance: t.final_distance,
        })
        .collect();
    let lesions = match &record.lesion_table {
        Some(rel) => read_csv(&out.join(rel))?,
        None => Vec::new(),
    };
    Ok(Some(RunData { key, record, summary: MetricSummary::of(&metrics), lesions }))
}

/// Builds the summary of an experiment directory without writing anything.
pub fn summarise(out: &Path) -> Result<Summary> {
    let cfg = Config::load(&out.join("config.toml"), &[])?;
    let mut missing = Vec::new();
    let mut failed = Vec::new();
    let mut runs = Vec::new();
    for key in run_keys(&cfg) {
        match load_run(out, key)? {
            None => missing.push(key.dir_name()),
            Some(r) if !r.record.ok => failed.push(key.dir_name()),
            Some(r) => runs.push(r),
        }
    }
    let (models, tasks) = (cfg.models(), cfg.tasks());

    let seed_values = |model: Model, task: TaskKind, f: &dyn Fn(&RunData) -> f64| -> Vec<SeedValue> {
        runs.iter()
            .filter(|r| r.key.model == model && r.key.task == task)
            .map(|r| {
                let v = f(r);
                SeedValue { seed: r.key.seed, value: v.is_finite().then_some(v) }
            })
            .collect()
    };

    let mut performance = Vec::new();
    for &model in &models {
        for &task in &tasks {
            let mut push = |metric: &str, values| {
                performance.push(PerformanceRow { model: model.name().into(), task: task.name().into(), metric: metric.into(), stats: Aggregate::of(values) });
            };
            for m in METRICS {
                push(m, seed_values(model, task, &|r| r.summary.metric(m).unwrap()));
            }
            push("epochs_trained", seed_values(model, task, &|r| r.record.epochs_trained as f64));
            push("best_epoch", seed_values(model, task, &|r| r.record.best_epoch as f64));
        }
    }

    let mut lesion_groups: BTreeMap<(usize, usize, usize, usize, usize), Vec<SeedValue>> = BTreeMap::new();
    let lesion_order = |name: &str| motorlab_core::lesion::LesionKind::from_name(name).map_or(0, |l| l as usize + 1);
    let task_order = |name: &str| TaskKind::ALL.iter().position(|t| t.name() == name).unwrap_or(usize::MAX);
    let metric_order = |name: &str| METRICS.iter().position(|m| *m == name).unwrap_or(usize::MAX);
    for r in &runs {
        let mi = models.iter().position(|m| *m == r.key.model).unwrap();
        for row in &r.lesions {
            let key = (mi, task_order(&row.trained_on), lesion_order(&row.lesion), task_order(&row.task), metric_order(&row.metric));
            lesion_groups.entry(key).or_default().push(SeedValue { seed: r.key.seed, value: row.value.is_finite().then_some(row.value) });
        }
    }
    let lesions = lesion_groups
        .into_iter()
        .map(|((mi, to, li, ti, mti), values)| LesionAggRow {
            model: models[mi].name().into(),
            trained_on: TaskKind::ALL[to].name().into(),
            lesion: if li == 0 { "none".into() } else { motorlab_core::lesion::LesionKind::ALL[li - 1].name().into() },
            task: TaskKind::ALL[ti].name().into(),
            metric: METRICS[mti].into(),
            stats: Aggregate::of(values),
        })
        .collect();

    let mut stats = Vec::new();
    for &task in &tasks {
        for m in METRICS {
            let groups: Vec<(String, Vec<f64>)> = models
                .iter()
                .map(|&model| (model.name().to_string(), finite(&seed_values(model, task, &|r| r.summary.metric(m).unwrap()))))
                .collect();
            stats.push(StatFamily { task: task.name().into(), metric: m.into(), pairs: pairwise(&groups) });
        }
    }

    Ok(Summary {
        models: models.iter().map(|m| m.name().to_string()).collect(),
        tasks: tasks.iter().map(|t| t.name().to_string()).collect(),
        seeds: cfg.experiment.seeds.clone(),
        missing_runs: missing,
        failed_runs: failed,
        performance,
        lesions,
        stats,
    })
}

fn bar(label: &str, a: &Aggregate) -> Bar {
    Bar { label: label.into(), value: a.mean.unwrap_or(f64::NAN), err: a.sd.unwrap_or(0.0) }
}

fn metric_label(metric: &str) -> &'static str {
    match metric {
        "goal_completion" => "fraction of trials",
        "speed_to_goal" => "m per step",
        "time_in_goal" => "steps",
        "final_distance" => "m",
        _ => "",
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |v| format!("{v:.4}"))
}

fn readme(s: &Summary) -> String {
    let mut r = String::new();
    writeln!(r, "motorlab experiment report").unwrap();
    writeln!(r).unwrap();
    writeln!(r, "models: {}", s.models.join(", ")).unwrap();
    writeln!(r, "tasks: {}", s.tasks.join(", ")).unwrap();
    writeln!(r, "seeds: {:?}", s.seeds).unwrap();
    if !s.missing_runs.is_empty() {
        writeln!(r, "MISSING runs: {}", s.missing_runs.join(", ")).unwrap();
    }
    if !s.failed_runs.is_empty() {
        writeln!(r, "FAILED runs: {}", s.failed_runs.join(", ")).unwrap();
    }
    writeln!(r).unwrap();
    writeln!(r, "Held-out performance on the fit task (mean +- sd over seeds):").unwrap();
    for task in &s.tasks {
        writeln!(r).unwrap();
        writeln!(r, "{task}").unwrap();
        writeln!(r, "{:<8} {:>18} {:>18} {:>18} {:>18} {:>8}", "model", "goal_completion", "speed_to_goal", "time_in_goal", "final_distance", "epochs").unwrap();
        for model in &s.models {
            let cell = |m: &str| {
                let a = s.performance(model, task, m).unwrap();
                format!("{} +- {}", fmt_opt(a.mean), fmt_opt(a.sd))
            };
            let epochs = s.performance(model, task, "epochs_trained").unwrap().mean;
            writeln!(r, "{:<8} {:>18} {:>18} {:>18} {:>18} {:>8}", model, cell("goal_completion"), cell("speed_to_goal"), cell("time_in_goal"), cell("final_distance"), fmt_opt(epochs)).unwrap();
        }
    }
    writeln!(r).unwrap();
    writeln!(r, "Files: summary.json holds every aggregate, lesion table and pairwise test;").unwrap();
    writeln!(r, "figures/ holds the bar charts; runs/ holds per-run CSVs and checkpoints.").unwrap();
    r
}

/// Rebuilds `summary.json`, `README.txt` and `figures/` from the run files.
pub fn emit_report(out: &Path) -> Result<ReportOutcome> {
    let s = summarise(out)?;
    let mut json = serde_json::to_string_pretty(&s).expect("serialisable");
    json.push('\n');
    crate::write_file(&out.join("summary.json"), json)?;
    crate::write_file(&out.join("README.txt"), readme(&s))?;

    let figs = out.join("figures");
    for task in &s.tasks {
        for m in METRICS {
            let bars: Vec<Bar> = s.models.iter().map(|model| bar(model, s.performance(model, task, m).unwrap())).collect();
            let svg = bar_chart(&format!("{task}: {m}"), metric_label(m), &bars);
            crate::write_file(&figs.join(format!("performance_{task}_{m}.svg")), svg)?;
        }
    }
    for model in &s.models {
        for trained_on in &s.tasks {
            let rows: Vec<&LesionAggRow> = s.lesions.iter().filter(|r| &r.model == model && &r.trained_on == trained_on && &r.task == trained_on).collect();
            if rows.is_empty() {
                continue;
            }
            for m in METRICS {
                let bars: Vec<Bar> = rows.iter().filter(|r| r.metric == m).map(|r| bar(&r.lesion, &r.stats)).collect();
                let svg = bar_chart(&format!("{model} trained on {trained_on}: {m} after lesion"), metric_label(m), &bars);
                crate::write_file(&figs.join(format!("lesions_{model}_{trained_on}_{m}.svg")), svg)?;
            }
        }
    }
    Ok(ReportOutcome { missing: s.missing_runs, failed: s.failed_runs })
}
