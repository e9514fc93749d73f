//! Held-out evaluation.

use alloc::vec::Vec;

use crate::error::Result;
use crate::network::NetworkParams;
use crate::rng::{labels, SeedStream};
use crate::tape::Tape;
use crate::tasks::{simulate_with, trial_set, TaskKind, TrialMetrics, TrialSpec};
use crate::training::Environment;

/// Seed of the held-out test trials, shared by every model and lesion.
pub const TEST_SET_SEED: u64 = 0x07e5_75e7;
pub const TEST_TRIALS: usize = 1000;

pub fn test_set(task: TaskKind, n: usize, env: &Environment) -> Result<Vec<TrialSpec>> {
    let base = SeedStream::new(TEST_SET_SEED).split(labels::TEST).split(task.label());
    trial_set(task, &base, 0, n, &env.task, &env.plant)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricSummary {
    pub trials: usize,
    /// Fraction of trials with three consecutive in-goal steps.
    pub goal_completion: f64,
    /// Over completed trials only; `NaN` when none completed.
    pub speed_to_goal_mean: f64,
    pub speed_to_goal_sd: f64,
    pub time_in_goal_mean: f64,
    pub time_in_goal_sd: f64,
    pub final_distance_mean: f64,
}

/// Metric names in reporting order.
pub const METRICS: [&str; 4] = ["goal_completion", "speed_to_goal", "time_in_goal", "final_distance"];

impl MetricSummary {
    pub fn of(rows: &[TrialMetrics]) -> Self {
        let speeds: Vec<f64> = rows.iter().filter_map(|r| r.speed_to_goal).collect();
        let tig: Vec<f64> = rows.iter().map(|r| r.time_in_goal as f64).collect();
        let fd: Vec<f64> = rows.iter().map(|r| r.final_distance).collect();
        let completed = rows.iter().filter(|r| r.goal_completed).count();
        let (speed_mean, speed_sd) = mean_sd(&speeds);
        let (tig_mean, tig_sd) = mean_sd(&tig);
        MetricSummary {
            trials: rows.len(),
            goal_completion: completed as f64 / rows.len().max(1) as f64,
            speed_to_goal_mean: speed_mean,
            speed_to_goal_sd: speed_sd,
            time_in_goal_mean: tig_mean,
            time_in_goal_sd: tig_sd,
            final_distance_mean: mean_sd(&fd).0,
        }
    }

    /// Mean value of a metric by name (see [`METRICS`]).
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "goal_completion" => Some(self.goal_completion),
            "speed_to_goal" => Some(self.speed_to_goal_mean),
            "time_in_goal" => Some(self.time_in_goal_mean),
            "final_distance" => Some(self.final_distance_mean),
            _ => None,
        }
    }
}

/// Mean and sample standard deviation; `NaN` for empty input, sd 0 for one value.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var))
}

/// Per-trial metrics in trial order.
pub fn evaluate_trials(params: &NetworkParams, trials: &[TrialSpec], env: &Environment) -> Result<Vec<TrialMetrics>> {
    let mut tape = Tape::with_capacity(8192, 32768);
    trials
        .iter()
        .map(|spec| simulate_with(&mut tape, params, spec, &env.plant).map(|t| TrialMetrics::of(&t)))
        .collect()
}

pub fn evaluate(params: &NetworkParams, trials: &[TrialSpec], env: &Environment) -> Result<MetricSummary> {
    Ok(MetricSummary::of(&evaluate_trials(params, trials, env)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_sd_hand_values() {
        let (m, s) = mean_sd(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(m, 5.0);
        assert!((s - libm::sqrt(32.0 / 7.0)).abs() < 1e-15);
        assert!(mean_sd(&[]).0.is_nan());
    }

    #[test]
    fn summary_counts_completed_only_for_speed() {
        let rows = [
            TrialMetrics { trial: 0, goal_completed: true, speed_to_goal: Some(0.01), time_in_goal: 10, final_distance: 0.0 },
            TrialMetrics { trial: 1, goal_completed: false, speed_to_goal: None, time_in_goal: 0, final_distance: 0.2 },
        ];
        let s = MetricSummary::of(&rows);
        assert_eq!(s.goal_completion, 0.5);
        assert_eq!(s.speed_to_goal_mean, 0.01);
        assert_eq!(s.time_in_goal_mean, 5.0);
        assert!((s.final_distance_mean - 0.1).abs() < 1e-15);
    }

    #[test]
    fn test_set_is_shared() {
        let env = Environment::default();
        let a = test_set(TaskKind::Reach, 5, &env).unwrap();
        let b = test_set(TaskKind::Reach, 8, &env).unwrap();
        assert_eq!(a[..], b[..5]);
    }
}
