//! Random Reach and Hold Position trials, closed-loop rollouts and the
//! three accuracy metrics.

use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::TapedTrajectory;
use crate::math;
use crate::network::NetworkParams;
use crate::plant::{forward_kinematics, PlantConfig, PlantState, TapedPlant, TapedState, N_MUSCLES, N_OBS};
use crate::rng::SeedStream;
use crate::tape::{Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum TaskKind {
    Reach,
    Hold,
}

impl TaskKind {
    pub const ALL: [TaskKind; 2] = [TaskKind::Reach, TaskKind::Hold];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Reach => "Reach",
            TaskKind::Hold => "Hold",
        }
    }

    pub fn label(self) -> u64 {
        match self {
            TaskKind::Reach => crate::rng::labels::REACH,
            TaskKind::Hold => crate::rng::labels::HOLD,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default, deny_unknown_fields))]
pub struct TaskConfig {
    pub timesteps: usize,
    /// Goal radius (m).
    pub threshold: f64,
    /// Upper bound on the hold-task endpoint force (N).
    pub force_bound: f64,
    /// Sampling range for the shoulder angle (degrees).
    pub shoulder_deg: [f64; 2],
    /// Sampling range for the elbow angle (degrees).
    pub elbow_deg: [f64; 2],
    pub max_attempts: usize,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig {
            timesteps: 50,
            threshold: 0.01,
            force_bound: 4.0,
            shoulder_deg: [20.0, 110.0],
            elbow_deg: [30.0, 140.0],
            max_attempts: 1000,
        }
    }
}

impl TaskConfig {
    pub fn validate(&self) -> Result<()> {
        if self.timesteps == 0 || !(self.threshold > 0.0) || !(self.force_bound >= 0.0) || self.max_attempts == 0 {
            return Err(Error::InvalidConfig("task timesteps, threshold and attempts must be positive".into()));
        }
        if !(self.shoulder_deg[0] <= self.shoulder_deg[1] && self.elbow_deg[0] <= self.elbow_deg[1]) {
            return Err(Error::InvalidConfig("empty joint sampling range".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialSpec {
    pub kind: TaskKind,
    pub id: u64,
    pub q_init: [f64; 2],
    pub target: [f64; 2],
    pub external_force: [f64; 2],
    pub timesteps: usize,
    pub threshold: f64,
}

fn sample_configuration(rng: &mut SeedStream, cfg: &TaskConfig) -> [f64; 2] {
    let q1 = rng.uniform(cfg.shoulder_deg[0], cfg.shoulder_deg[1]).to_radians();
    let q2 = rng.uniform(cfg.elbow_deg[0], cfg.elbow_deg[1]).to_radians();
    [q1, q2]
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    math::hypot(a[0] - b[0], a[1] - b[1])
}

/// Start and target drawn independently; redrawn until they are more than
/// twice the goal radius apart. No external force.
pub fn sample_reach_trial(rng: &mut SeedStream, id: u64, cfg: &TaskConfig, plant: &PlantConfig) -> Result<TrialSpec> {
    for _ in 0..cfg.max_attempts {
        let q_init = sample_configuration(rng, cfg);
        let q_target = sample_configuration(rng, cfg);
        let target = forward_kinematics(q_target, &plant.arm);
        if distance(forward_kinematics(q_init, &plant.arm), target) > 2.0 * cfg.threshold {
            return Ok(TrialSpec {
                kind: TaskKind::Reach,
                id,
                q_init,
                target,
                external_force: [0.0, 0.0],
                timesteps: cfg.timesteps,
                threshold: cfg.threshold,
            });
        }
    }
    Err(Error::SamplingExhausted { attempts: cfg.max_attempts })
}

/// Starts on target; constant endpoint force of random direction and
/// magnitude uniform in `[0, force_bound]`.
pub fn sample_hold_trial(rng: &mut SeedStream, id: u64, cfg: &TaskConfig, plant: &PlantConfig) -> TrialSpec {
    let q_init = sample_configuration(rng, cfg);
    let target = forward_kinematics(q_init, &plant.arm);
    let phi = rng.uniform(0.0, 2.0 * core::f64::consts::PI);
    let magnitude = rng.uniform(0.0, cfg.force_bound);
    TrialSpec {
        kind: TaskKind::Hold,
        id,
        q_init,
        target,
        external_force: [magnitude * math::cos(phi), magnitude * math::sin(phi)],
        timesteps: cfg.timesteps,
        threshold: cfg.threshold,
    }
}

pub fn sample_trial(kind: TaskKind, rng: &mut SeedStream, id: u64, cfg: &TaskConfig, plant: &PlantConfig) -> Result<TrialSpec> {
    match kind {
        TaskKind::Reach => sample_reach_trial(rng, id, cfg, plant),
        TaskKind::Hold => Ok(sample_hold_trial(rng, id, cfg, plant)),
    }
}

/// Trials `first..first + n` of the stream `base`; trial `i` draws from `base.split(i)`.
pub fn trial_set(kind: TaskKind, base: &SeedStream, first: u64, n: usize, cfg: &TaskConfig, plant: &PlantConfig) -> Result<Vec<TrialSpec>> {
    (0..n as u64)
        .map(|i| {
            let id = first + i;
            let mut rng = base.split(id);
            sample_trial(kind, &mut rng, id, cfg, plant)
        })
        .collect()
}

/// Nodes of a recorded closed-loop rollout.
#[derive(Clone, Debug)]
pub struct Rollout {
    pub trajectory: TapedTrajectory,
    pub target: Var,
    pub start: [f64; 2],
}

/// Runs the controller against the plant for `spec.timesteps` steps,
/// recording everything on `tape`.
pub fn rollout(tape: &mut Tape, params: &NetworkParams, vars: &[Var], spec: &TrialSpec, plant_cfg: &PlantConfig) -> Result<Rollout> {
    let plant = TapedPlant::new(tape, plant_cfg, spec.external_force);
    let target = tape.constant_vector(&spec.target);
    let mut state = TapedState::constant(tape, &PlantState::at_rest(spec.q_init));
    let n = spec.timesteps;
    let mut traj = TapedTrajectory {
        endpoints: Vec::with_capacity(n),
        activations: Vec::with_capacity(n),
        excitations: Vec::with_capacity(n),
        observations: Vec::with_capacity(n),
    };
    let mut geom = plant.geometry(tape, &state);
    for t in 0..n {
        let x = plant.observe(tape, &geom, target);
        let input = plant.sense(tape, x);
        let u = params.forward(tape, vars, input);
        state = plant
            .step(tape, &state, &geom, u)
            .map_err(|cause| Error::Diverged { trial: spec.id, step: t + 1, cause })?;
        geom = plant.geometry(tape, &state);
        traj.observations.push(x);
        traj.excitations.push(u);
        traj.endpoints.push(geom.endpoint);
        traj.activations.push(state.a);
    }
    tape.status().map_err(|cause| Error::Diverged { trial: spec.id, step: n, cause })?;
    Ok(Rollout { trajectory: traj, target, start: forward_kinematics(spec.q_init, &plant_cfg.arm) })
}

/// Plain-value record of one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub spec: TrialSpec,
    /// Endpoint before the first step.
    pub start: [f64; 2],
    /// Entries are for t = 1..=T.
    pub endpoints: Vec<[f64; 2]>,
    pub activations: Vec<[f64; N_MUSCLES]>,
    pub excitations: Vec<[f64; N_MUSCLES]>,
    pub observations: Vec<[f64; N_OBS]>,
}

impl Trajectory {
    pub fn from_tape(tape: &Tape, r: &Rollout, spec: &TrialSpec) -> Self {
        fn read<const N: usize>(tape: &Tape, vars: &[Var]) -> Vec<[f64; N]> {
            vars.iter()
                .map(|v| {
                    let mut a = [0.0; N];
                    a.copy_from_slice(tape.value(*v));
                    a
                })
                .collect()
        }
        Trajectory {
            spec: spec.clone(),
            start: r.start,
            endpoints: read(tape, &r.trajectory.endpoints),
            activations: read(tape, &r.trajectory.activations),
            excitations: read(tape, &r.trajectory.excitations),
            observations: read(tape, &r.trajectory.observations),
        }
    }

    pub fn distances(&self) -> Vec<f64> {
        self.endpoints.iter().map(|p| distance(*p, self.spec.target)).collect()
    }
}

/// Forward-only rollout; `tape` is cleared and reused.
pub fn simulate_with(tape: &mut Tape, params: &NetworkParams, spec: &TrialSpec, plant: &PlantConfig) -> Result<Trajectory> {
    tape.clear();
    let vars = params.register(tape, false);
    let r = rollout(tape, params, &vars, spec, plant)?;
    Ok(Trajectory::from_tape(tape, &r, spec))
}

pub fn simulate(params: &NetworkParams, spec: &TrialSpec, plant: &PlantConfig) -> Result<Trajectory> {
    simulate_with(&mut Tape::new(), params, spec, plant)
}

// ---- metrics -----------------------------------------------------------------

/// First timestep (1-based) of the first run of three consecutive in-goal steps.
pub fn first_goal_step(distances: &[f64], threshold: f64) -> Option<usize> {
    let mut run = 0;
    for (i, d) in distances.iter().enumerate() {
        if *d <= threshold {
            run += 1;
            if run == 3 {
                return Some(i + 1 - 2);
            }
        } else {
            run = 0;
        }
    }
    None
}

pub fn goal_completion(traj: &Trajectory) -> bool {
    first_goal_step(&traj.distances(), traj.spec.threshold).is_some()
}

/// Start-to-target distance per timestep until the goal; `None` if never reached.
pub fn speed_to_goal(traj: &Trajectory) -> Option<f64> {
    let t = first_goal_step(&traj.distances(), traj.spec.threshold)?;
    Some(distance(traj.start, traj.spec.target) / t as f64)
}

pub fn time_in_goal(traj: &Trajectory) -> usize {
    let thr = traj.spec.threshold;
    traj.distances().iter().filter(|d| **d <= thr).count()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialMetrics {
    pub trial: u64,
    pub goal_completed: bool,
    pub speed_to_goal: Option<f64>,
    pub time_in_goal: usize,
    pub final_distance: f64,
}

impl TrialMetrics {
    pub fn of(traj: &Trajectory) -> Self {
        let d = traj.distances();
        let thr = traj.spec.threshold;
        let first = first_goal_step(&d, thr);
        TrialMetrics {
            trial: traj.spec.id,
            goal_completed: first.is_some(),
            speed_to_goal: first.map(|t| distance(traj.start, traj.spec.target) / t as f64),
            time_in_goal: d.iter().filter(|x| **x <= thr).count(),
            final_distance: d.last().copied().unwrap_or(f64::NAN),
        }
    }
}
