//! CSV row types of the on-disk result set.
//!
//! | file | columns |
//! |---|---|
//! | `trials.csv` | model, task, seed, trial, goal_completed, speed_to_goal, time_in_goal, final_distance |
//! | `training.csv` | epoch, train_loss, val_loss |
//! | `lesions.csv` | model, specialised, seed, trained_on, lesion, task, metric, value |
//! | `timing.csv` | model, task, seed, epoch, seconds |
//!
//! `speed_to_goal` is empty for trials that never reached the goal.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub model: String,
    pub task: String,
    pub seed: u64,
    pub trial: u64,
    pub goal_completed: bool,
    pub speed_to_goal: Option<f64>,
    pub time_in_goal: usize,
    pub final_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LesionCsvRow {
    /// Architecture kind.
    pub model: String,
    pub specialised: bool,
    pub seed: u64,
    pub trained_on: String,
    pub lesion: String,
    pub task: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub model: String,
    pub task: String,
    pub seed: u64,
    /// Empty for the evaluation and lesion phases.
    pub epoch: Option<usize>,
    pub seconds: f64,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| Error::csv(path, e))).collect()
}
