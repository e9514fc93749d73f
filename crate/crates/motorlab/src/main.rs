use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use motorlab::core::checks;
use motorlab::core::eval::{self, MetricSummary};
use motorlab::core::lesion::{apply_lesion, retrain_output_layer, retrain_stream, LesionKind};
use motorlab::core::tasks::TaskKind;
use motorlab::core::training::fit;
use motorlab::experiment::{run_experiment, RunRecord};
use motorlab::records::{write_csv, EpochRow};
use motorlab::{checkpoint, config, report, Config, Error, Model, Result};

#[derive(Parser)]
#[command(name = "motorlab", version, about = "Bilateral motor-control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration; defaults are used for anything not given.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set train.lr=0.0005`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<Config> {
        match &self.config {
            Some(p) => Config::load(p, &self.overrides),
            None => Config::parse("", &self.overrides),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit one model and save its best-epoch checkpoint.
    Train {
        #[arg(long)]
        model: String,
        #[arg(long)]
        task: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Checkpoint path; `training.csv` is written next to it.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Evaluate a checkpoint on the held-out trials of a task.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        task: String,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Lesion a checkpoint, retrain its output layer and evaluate on both tasks.
    Lesion {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        lesion: String,
        /// Task the model was fit on; used for retraining.
        #[arg(long)]
        task: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Optional path for the lesioned checkpoint.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run every configured model, task and seed, then write the report.
    Experiment {
        #[arg(long)]
        out: PathBuf,
        /// Use seeds 1..=N instead of the configured list.
        #[arg(long)]
        seeds: Option<u64>,
        /// Worker threads (0 = one per core).
        #[arg(long)]
        threads: Option<usize>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Rebuild summary.json, README.txt and figures from an experiment directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Gradient and plant checks.
    Selftest {
        #[arg(long, default_value_t = 20)]
        pairs: usize,
        #[arg(long, default_value_t = 5)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn model(s: &str) -> Result<Model> {
    Model::from_name(s).ok_or_else(|| Error::Config(format!("unknown model `{s}`")))
}

fn task(s: &str) -> Result<TaskKind> {
    config::parse_task(s).ok_or_else(|| Error::Config(format!("unknown task `{s}`")))
}

fn print_summary(label: &str, s: &MetricSummary) {
    println!(
        "{label}: trials {} goal_completion {:.4} speed_to_goal {:.5} time_in_goal {:.3} final_distance {:.5}",
        s.trials, s.goal_completion, s.speed_to_goal_mean, s.time_in_goal_mean, s.final_distance_mean
    );
}

fn progress(r: &RunRecord) {
    match &r.error {
        None => eprintln!("done {} {} seed {} (best epoch {})", r.model, r.task.name(), r.seed, r.best_epoch),
        Some(e) => eprintln!("FAILED {} {} seed {}: {e}", r.model, r.task.name(), r.seed),
    }
}

fn run(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Train { model: m, task: t, seed, out, cfg } => {
            let cfg = cfg.load()?;
            let (m, t) = (model(&m)?, task(&t)?);
            let fitted = fit(&cfg.architecture(m), &cfg.train, &cfg.environment(), t, m.mode(), seed, |r| {
                eprintln!("epoch {} train {:.6} val {:.6}", r.epoch, r.train_loss, r.val_loss);
            })?;
            checkpoint::save(&fitted.params, &out)?;
            let rows: Vec<EpochRow> = fitted.history.iter().map(|h| EpochRow { epoch: h.epoch, train_loss: h.train_loss, val_loss: h.val_loss }).collect();
            write_csv(&out.parent().unwrap_or(Path::new(".")).join("training.csv"), &rows)?;
            println!("best epoch {} of {}", fitted.best_epoch, fitted.epochs_run());
            Ok(true)
        }
        Command::Evaluate { checkpoint: path, task: t, cfg } => {
            let cfg = cfg.load()?;
            let params = checkpoint::load(&path)?;
            let env = cfg.environment();
            let trials = eval::test_set(task(&t)?, cfg.experiment.test_trials, &env)?;
            print_summary(&t, &eval::evaluate(&params, &trials, &env)?);
            Ok(true)
        }
        Command::Lesion { checkpoint: path, lesion, task: t, seed, out, cfg } => {
            let cfg = cfg.load()?;
            let params = checkpoint::load(&path)?;
            let kind = LesionKind::from_name(&lesion).ok_or_else(|| Error::Config(format!("unknown lesion `{lesion}`")))?;
            let fit_task = task(&t)?;
            let env = cfg.environment();
            let lesioned = apply_lesion(&params, kind)?;
            let retrained = retrain_output_layer(&lesioned, &cfg.train, &env, fit_task, retrain_stream(seed, kind, fit_task))?;
            for t in TaskKind::ALL {
                let trials = eval::test_set(t, cfg.experiment.test_trials, &env)?;
                print_summary(t.name(), &eval::evaluate(&retrained, &trials, &env)?);
            }
            if let Some(out) = out {
                checkpoint::save(&retrained, &out)?;
            }
            Ok(true)
        }
        Command::Experiment { out, seeds, threads, cfg } => {
            let mut cfg = cfg.load()?;
            if let Some(n) = seeds {
                cfg.experiment.seeds = (1..=n).collect();
            }
            if let Some(n) = threads {
                cfg.experiment.threads = n;
            }
            let outcome = run_experiment(&cfg, &out, &progress)?;
            for m in &outcome.report.missing {
                eprintln!("missing run: {m}");
            }
            println!("report written to {}", out.display());
            Ok(outcome.all_ok())
        }
        Command::Report { dir } => {
            let outcome = report::emit_report(&dir)?;
            for m in &outcome.missing {
                eprintln!("missing run: {m}");
            }
            for f in &outcome.failed {
                eprintln!("failed run: {f}");
            }
            Ok(outcome.missing.is_empty() && outcome.failed.is_empty())
        }
        Command::Selftest { pairs, steps, seed } => {
            let mut ok = true;
            for (kind, profile, err) in checks::gradient_checks(steps, pairs, seed)? {
                let pass = err < 1e-4;
                ok &= pass;
                println!("{} gradient {} {:?}: max relative error {err:.3e}", if pass { "PASS" } else { "FAIL" }, kind.name(), profile);
            }
            for c in checks::plant_checks(&Default::default(), seed)? {
                ok &= c.passed;
                println!("{} {}: worst {:.3e} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.worst, c.detail);
            }
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
