//! Adam, hemisphere-wise gradient routing, epochs and early stopping.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{composite_loss, trajectory_terms, weight_penalty, LossConfig, LossProfile};
use crate::network::{ArchitectureConfig, Group, NetworkParams};
use crate::plant::PlantConfig;
use crate::rng::{labels, SeedStream};
use crate::tape::Tape;
use crate::tasks::{rollout, trial_set, TaskConfig, TaskKind, TrialSpec};

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub lr: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub batches_per_epoch: usize,
    pub val_trials: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.001,
            max_epochs: 100,
            patience: 3,
            batch_size: 32,
            batches_per_epoch: 64,
            val_trials: 256,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 || self.patience == 0 || self.batch_size == 0 || self.batches_per_epoch == 0 || self.val_trials == 0 {
            return Err(Error::InvalidConfig("epoch, patience, batch and validation sizes must be positive".into()));
        }
        if !(self.lr >= 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return Err(Error::InvalidConfig("invalid optimiser hyperparameters".into()));
        }
        Ok(())
    }
}

/// How the batch gradient is formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum LossMode {
    /// One loss profile for every tensor.
    Profile(LossProfile),
    /// DL gradient to the dominant side, NDL to the non-dominant side, their
    /// mean to shared tensors.
    Specialised,
}

/// Physical and task settings shared by training and evaluation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Environment {
    pub plant: PlantConfig,
    pub task: TaskConfig,
    pub losses: LossConfig,
}

impl Environment {
    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        self.task.validate()
    }
}

// ---- optimiser ---------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &NetworkParams) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors.iter().map(|t| vec![0.0; t.len()]).collect();
        OptimizerState { m: zeros.clone(), v: zeros, step: 0 }
    }
}

/// One bias-corrected Adam update. Frozen tensors are left untouched.
pub fn adam_step(params: &mut NetworkParams, grads: &[Vec<f64>], opt: &mut OptimizerState, cfg: &TrainConfig, lr: f64) -> Result<()> {
    assert_eq!(grads.len(), params.tensors.len(), "gradient/parameter count mismatch");
    for (t, g) in params.tensors.iter().zip(grads) {
        assert_eq!(t.len(), g.len(), "gradient shape mismatch for `{}`", t.name);
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteGradient { tensor: t.name.clone() });
        }
    }
    opt.step += 1;
    let bc1 = 1.0 - libm::pow(cfg.beta1, opt.step as f64);
    let bc2 = 1.0 - libm::pow(cfg.beta2, opt.step as f64);
    for (i, t) in params.tensors.iter_mut().enumerate() {
        if params.frozen[i] {
            continue;
        }
        let (m, v, g) = (&mut opt.m[i], &mut opt.v[i], &grads[i]);
        for k in 0..t.data.len() {
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
            let m_hat = m[k] / bc1;
            let v_hat = v[k] / bc2;
            t.data[k] -= lr * m_hat / (libm::sqrt(v_hat) + cfg.eps);
        }
    }
    Ok(())
}

/// Dominant tensors take the DL gradient, non-dominant tensors the NDL
/// gradient and shared tensors their 50:50 mix.
pub fn route_gradients(grad_dl: &[Vec<f64>], grad_ndl: &[Vec<f64>], params: &NetworkParams) -> Vec<Vec<f64>> {
    assert_eq!(grad_dl.len(), params.tensors.len());
    assert_eq!(grad_ndl.len(), params.tensors.len());
    params
        .tensors
        .iter()
        .zip(grad_dl.iter().zip(grad_ndl))
        .map(|(t, (d, n))| match t.group {
            Group::Dominant => d.clone(),
            Group::NonDominant => n.clone(),
            Group::Shared => d.iter().zip(n).map(|(a, b)| 0.5 * a + 0.5 * b).collect(),
        })
        .collect()
}

// ---- batches and epochs ------------------------------------------------------

/// Reusable buffers for gradient computation.
#[derive(Default)]
pub struct Workspace {
    tape: Tape,
    adjoint: Vec<f64>,
}

impl Workspace {
    pub fn new() -> Self {
        Workspace { tape: Tape::with_capacity(8192, 32768), adjoint: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchGradients {
    pub loss: f64,
    pub grads: Vec<Vec<f64>>,
}

fn zero_grads(params: &NetworkParams) -> Vec<Vec<f64>> {
    params.tensors.iter().map(|t| vec![0.0; t.len()]).collect()
}

/// Separate batch-mean gradients for the DL and NDL profiles.
pub fn specialised_gradients(params: &NetworkParams, trials: &[TrialSpec], env: &Environment, ws: &mut Workspace) -> Result<(BatchGradients, BatchGradients)> {
    let mut dl = BatchGradients { loss: 0.0, grads: zero_grads(params) };
    let mut ndl = BatchGradients { loss: 0.0, grads: zero_grads(params) };
    let kind = params.kind();
    let w_dl = env.losses.weights(LossProfile::Dominant);
    let w_ndl = env.losses.weights(LossProfile::NonDominant);
    let inv = 1.0 / trials.len() as f64;
    for spec in trials {
        let tape = &mut ws.tape;
        tape.clear();
        let vars = params.register(tape, true);
        let r = rollout(tape, params, &vars, spec, &env.plant)?;
        let terms = trajectory_terms(tape, &r.trajectory.endpoints, &r.trajectory.activations, r.target);
        let pen_dl = weight_penalty(tape, params, &vars, LossProfile::Dominant.penalty_scope(kind), env.losses.penalty_scale);
        let pen_ndl = weight_penalty(tape, params, &vars, LossProfile::NonDominant.penalty_scope(kind), env.losses.penalty_scale);
        let l_dl = composite_loss(tape, &terms, Some(pen_dl), &w_dl);
        let l_ndl = composite_loss(tape, &terms, Some(pen_ndl), &w_ndl);
        tape.status()?;
        for (loss, acc) in [(l_dl, &mut dl), (l_ndl, &mut ndl)] {
            acc.loss += inv * tape.scalar(loss);
            tape.backward_into(loss, &mut ws.adjoint)?;
            for (g, v) in acc.grads.iter_mut().zip(&vars) {
                for (gi, ai) in g.iter_mut().zip(tape.adjoint(&ws.adjoint, *v)) {
                    *gi += inv * ai;
                }
            }
        }
    }
    Ok((dl, ndl))
}

/// Batch-mean loss and gradient for a single profile.
pub fn profile_gradients(params: &NetworkParams, trials: &[TrialSpec], profile: LossProfile, env: &Environment, ws: &mut Workspace) -> Result<BatchGradients> {
    let mut out = BatchGradients { loss: 0.0, grads: zero_grads(params) };
    let weights = env.losses.weights(profile);
    let scope = profile.penalty_scope(params.kind());
    let inv = 1.0 / trials.len() as f64;
    for spec in trials {
        let tape = &mut ws.tape;
        tape.clear();
        let vars = params.register(tape, true);
        let r = rollout(tape, params, &vars, spec, &env.plant)?;
        let terms = trajectory_terms(tape, &r.trajectory.endpoints, &r.trajectory.activations, r.target);
        let pen = (weights.weight_penalty != 0.0).then(|| weight_penalty(tape, params, &vars, scope, env.losses.penalty_scale));
        let loss = composite_loss(tape, &terms, pen, &weights);
        tape.status()?;
        out.loss += inv * tape.scalar(loss);
        tape.backward_into(loss, &mut ws.adjoint)?;
        for (g, v) in out.grads.iter_mut().zip(&vars) {
            for (gi, ai) in g.iter_mut().zip(tape.adjoint(&ws.adjoint, *v)) {
                *gi += inv * ai;
            }
        }
    }
    Ok(out)
}

/// The gradient actually applied for `mode`, with its reported loss.
pub fn batch_update(params: &NetworkParams, trials: &[TrialSpec], mode: LossMode, env: &Environment, ws: &mut Workspace) -> Result<BatchGradients> {
    match mode {
        LossMode::Profile(p) => profile_gradients(params, trials, p, env, ws),
        LossMode::Specialised => {
            let (dl, ndl) = specialised_gradients(params, trials, env, ws)?;
            Ok(BatchGradients { loss: 0.5 * (dl.loss + ndl.loss), grads: route_gradients(&dl.grads, &ndl.grads, params) })
        }
    }
}

/// Applies a per-tensor trainability mask to gradients.
pub fn mask_gradients(grads: &mut [Vec<f64>], trainable: &[bool]) {
    for (g, keep) in grads.iter_mut().zip(trainable) {
        if !keep {
            g.fill(0.0);
        }
    }
}

/// Training stream for one epoch of a run.
pub fn epoch_stream(seed: u64, task: TaskKind, epoch: usize) -> SeedStream {
    SeedStream::new(seed).split(labels::TRAIN).split(task.label()).split(epoch as u64)
}

/// Validation trials of a run; fixed for the whole fit.
pub fn validation_set(seed: u64, task: TaskKind, n: usize, env: &Environment) -> Result<Vec<TrialSpec>> {
    let base = SeedStream::new(seed).split(labels::VALIDATION).split(task.label());
    trial_set(task, &base, 0, n, &env.task, &env.plant)
}

/// Everything needed to run one epoch besides parameters and optimiser state.
pub struct EpochPlan<'a> {
    pub cfg: &'a TrainConfig,
    pub env: &'a Environment,
    pub task: TaskKind,
    pub mode: LossMode,
    /// Trials are drawn from `stream.split(batch * batch_size + i)`.
    pub stream: SeedStream,
    /// Per-tensor trainability; `None` trains everything not frozen.
    pub trainable: Option<&'a [bool]>,
    pub epoch: usize,
}

/// One epoch of freshly sampled batches. Returns the mean batch loss.
pub fn train_epoch(params: &mut NetworkParams, opt: &mut OptimizerState, plan: &EpochPlan<'_>, ws: &mut Workspace) -> Result<f64> {
    let cfg = plan.cfg;
    let mut total = 0.0;
    for b in 0..cfg.batches_per_epoch {
        let wrap = |e: Error| Error::InBatch { epoch: plan.epoch, batch: b, cause: alloc::boxed::Box::new(e) };
        let first = (b * cfg.batch_size) as u64;
        let trials = trial_set(plan.task, &plan.stream, first, cfg.batch_size, &plan.env.task, &plan.env.plant).map_err(wrap)?;
        let mut batch = batch_update(params, &trials, plan.mode, plan.env, ws).map_err(wrap)?;
        if let Some(mask) = plan.trainable {
            mask_gradients(&mut batch.grads, mask);
        }
        adam_step(params, &batch.grads, opt, cfg, cfg.lr).map_err(wrap)?;
        total += batch.loss;
    }
    Ok(total / cfg.batches_per_epoch as f64)
}

/// Loss of one trial under `profile`, without gradients.
pub fn trial_loss(params: &NetworkParams, spec: &TrialSpec, profile: LossProfile, env: &Environment, tape: &mut Tape) -> Result<f64> {
    let weights = env.losses.weights(profile);
    tape.clear();
    let vars = params.register(tape, false);
    let r = rollout(tape, params, &vars, spec, &env.plant)?;
    let terms = trajectory_terms(tape, &r.trajectory.endpoints, &r.trajectory.activations, r.target);
    let pen = (weights.weight_penalty != 0.0).then(|| weight_penalty(tape, params, &vars, profile.penalty_scope(params.kind()), env.losses.penalty_scale));
    let loss = composite_loss(tape, &terms, pen, &weights);
    tape.status()?;
    Ok(tape.scalar(loss))
}

/// Mean Combined-profile loss over `trials`, without gradients.
pub fn validation_loss(params: &NetworkParams, trials: &[TrialSpec], env: &Environment, ws: &mut Workspace) -> Result<f64> {
    let mut total = 0.0;
    for spec in trials {
        total += trial_loss(params, spec, LossProfile::Combined, env, &mut ws.tape)?;
    }
    Ok(total / trials.len() as f64)
}

// ---- early stopping ----------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stopped<P> {
    pub best: P,
    /// 1-based epoch whose parameters are returned.
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

/// Generic patience loop: runs `epoch` then `validate` until `max_epochs`,
/// or until `patience` consecutive epochs fail to improve on the best
/// validation loss. Returns the state of the best epoch.
pub fn early_stopping<P: Clone>(
    mut state: P,
    max_epochs: usize,
    patience: usize,
    mut epoch: impl FnMut(&mut P, usize) -> Result<f64>,
    mut validate: impl FnMut(&P, usize) -> Result<f64>,
    mut observe: impl FnMut(&EpochRecord),
) -> Result<Stopped<P>> {
    let mut best: Option<(f64, usize, P)> = None;
    let mut stale = 0;
    let mut history = Vec::new();
    for e in 1..=max_epochs {
        let train_loss = epoch(&mut state, e)?;
        let val_loss = validate(&state, e)?;
        let record = EpochRecord { epoch: e, train_loss, val_loss };
        observe(&record);
        history.push(record);
        let improved = match &best {
            None => true,
            Some((b, _, _)) => val_loss < *b,
        };
        if improved {
            best = Some((val_loss, e, state.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= patience {
                break;
            }
        }
    }
    let (_, best_epoch, best) = best.expect("at least one epoch runs");
    Ok(Stopped { best, best_epoch, history })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub params: NetworkParams,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

impl FitResult {
    pub fn epochs_run(&self) -> usize {
        self.history.len()
    }
}

/// Trains a fresh network of `arch` on `task` from `seed`.
pub fn fit(
    arch: &ArchitectureConfig,
    cfg: &TrainConfig,
    env: &Environment,
    task: TaskKind,
    mode: LossMode,
    seed: u64,
    observe: impl FnMut(&EpochRecord),
) -> Result<FitResult> {
    cfg.validate()?;
    env.validate()?;
    let params = NetworkParams::init(arch.clone(), seed)?;
    let val = validation_set(seed, task, cfg.val_trials, env)?;
    let mut opt = OptimizerState::new(&params);
    let mut ws = Workspace::new();
    let mut val_ws = Workspace::new();
    let stopped = early_stopping(
        params,
        cfg.max_epochs,
        cfg.patience,
        |p, e| {
            let plan = EpochPlan { cfg, env, task, mode, stream: epoch_stream(seed, task, e), trainable: None, epoch: e };
            train_epoch(p, &mut opt, &plan, &mut ws)
        },
        |p, _| validation_loss(p, &val, env, &mut val_ws),
        observe,
    )?;
    Ok(FitResult { params: stopped.best, best_epoch: stopped.best_epoch, history: stopped.history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{ArchitectureKind, Hemisphere};

    fn small_env() -> Environment {
        let mut env = Environment::default();
        env.task.timesteps = 4;
        env
    }

    #[test]
    fn adam_zero_gradient_is_identity() {
        let mut p = NetworkParams::init(ArchitectureConfig::new(ArchitectureKind::Unilateral, 10, 2), 1).unwrap();
        let before = p.clone();
        let mut opt = OptimizerState::new(&p);
        let g = zero_grads(&p);
        adam_step(&mut p, &g, &mut opt, &TrainConfig::default(), 0.001).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn adam_first_step_hand_evaluated() {
        // m̂ = g, v̂ = g², update = -lr · g / (|g| + eps).
        let mut p = NetworkParams::zeros(ArchitectureConfig::new(ArchitectureKind::Unilateral, 10, 2)).unwrap();
        let mut opt = OptimizerState::new(&p);
        let mut g = zero_grads(&p);
        g[1][0] = 1.0;
        adam_step(&mut p, &g, &mut opt, &TrainConfig::default(), 0.001).unwrap();
        let expected = -0.001 * 1.0 / (1.0 + 1e-8);
        assert!((p.tensors[1].data[0] - expected).abs() < 1e-18);
        assert!((p.tensors[1].data[0] + 0.000999999).abs() < 1e-9);
    }

    #[test]
    fn adam_rejects_non_finite() {
        let mut p = NetworkParams::zeros(ArchitectureConfig::new(ArchitectureKind::Unilateral, 10, 2)).unwrap();
        let mut opt = OptimizerState::new(&p);
        let mut g = zero_grads(&p);
        g[2][3] = f64::NAN;
        let err = adam_step(&mut p, &g, &mut opt, &TrainConfig::default(), 0.001).unwrap_err();
        assert_eq!(err, Error::NonFiniteGradient { tensor: "hidden1.weight".into() });
    }

    #[test]
    fn routing_examples() {
        let p = NetworkParams::zeros(ArchitectureConfig::new(ArchitectureKind::Bilateral, 10, 2)).unwrap();
        let mut dl = zero_grads(&p);
        let mut ndl = zero_grads(&p);
        let (ow, _) = p.output_index();
        dl[ow][0] = 0.2;
        ndl[ow][0] = -0.2;
        let (dw, _) = p.hidden_index(Some(Hemisphere::Dominant), 0);
        dl[dw][5] = 0.7;
        ndl[dw][5] = 123.0;
        let routed = route_gradients(&dl, &ndl, &p);
        assert_eq!(routed[ow][0], 0.0);
        assert_eq!(routed[dw][5], 0.7);
    }

    #[test]
    fn unilateral_routing_is_plain_average() {
        let p = NetworkParams::init(ArchitectureConfig::new(ArchitectureKind::Unilateral, 10, 2), 3).unwrap();
        let mut rng = SeedStream::new(8);
        let a: Vec<Vec<f64>> = p.tensors.iter().map(|t| (0..t.len()).map(|_| rng.uniform(-1.0, 1.0)).collect()).collect();
        let b: Vec<Vec<f64>> = p.tensors.iter().map(|t| (0..t.len()).map(|_| rng.uniform(-1.0, 1.0)).collect()).collect();
        let r = route_gradients(&a, &b, &p);
        for i in 0..a.len() {
            for k in 0..a[i].len() {
                assert_eq!(r[i][k], 0.5 * a[i][k] + 0.5 * b[i][k]);
            }
        }
    }

    #[test]
    fn routing_is_idempotent() {
        for kind in [ArchitectureKind::Unilateral, ArchitectureKind::Bilateral, ArchitectureKind::BilateralCC] {
            let p = NetworkParams::init(ArchitectureConfig::new(kind, 10, 2), 3).unwrap();
            let g: Vec<Vec<f64>> = p.tensors.iter().map(|t| t.data.clone()).collect();
            assert_eq!(route_gradients(&g, &g, &p), g);
        }
    }

    #[test]
    fn synthetic_validation_curve() {
        let curve = [1.0, 0.9, 0.95, 0.96, 0.97, 0.5, 0.4];
        let mut ran = 0;
        let out = early_stopping(0usize, 100, 3, |p, e| { *p = e; ran += 1; Ok(0.0) }, |_, e| Ok(curve[e - 1]), |_| {}).unwrap();
        assert_eq!(ran, 5);
        assert_eq!(out.history.len(), 5);
        assert_eq!(out.best_epoch, 2);
        assert_eq!(out.best, 2);
    }

    #[test]
    fn single_epoch_cap() {
        let out = early_stopping(0usize, 1, 3, |p, e| { *p = e; Ok(0.0) }, |_, _| Ok(1.0), |_| {}).unwrap();
        assert_eq!(out.history.len(), 1);
        assert_eq!(out.best, 1);
    }

    fn tiny_cfg() -> TrainConfig {
        TrainConfig { batch_size: 2, batches_per_epoch: 2, val_trials: 4, max_epochs: 2, ..TrainConfig::default() }
    }

    #[test]
    fn zero_learning_rate_leaves_params() {
        let env = small_env();
        let cfg = TrainConfig { lr: 0.0, ..tiny_cfg() };
        let mut p = NetworkParams::init(ArchitectureConfig::new(ArchitectureKind::BilateralCC, 10, 2), 5).unwrap();
        let before = p.clone();
        let mut opt = OptimizerState::new(&p);
        let plan = EpochPlan { cfg: &cfg, env: &env, task: TaskKind::Reach, mode: LossMode::Specialised, stream: epoch_stream(5, TaskKind::Reach, 1), trainable: None, epoch: 1 };
        let loss = train_epoch(&mut p, &mut opt, &plan, &mut Workspace::new()).unwrap();
        assert!(loss.is_finite() && loss > 0.0);
        assert_eq!(p, before);
    }

    #[test]
    fn epoch_is_deterministic() {
        let env = small_env();
        let cfg = tiny_cfg();
        let run = || {
            let mut p = NetworkParams::init(ArchitectureConfig::new(ArchitectureKind::Bilateral, 10, 2), 6).unwrap();
            let mut opt = OptimizerState::new(&p);
            let plan = EpochPlan { cfg: &cfg, env: &env, task: TaskKind::Hold, mode: LossMode::Specialised, stream: epoch_stream(6, TaskKind::Hold, 1), trainable: None, epoch: 1 };
            let l = train_epoch(&mut p, &mut opt, &plan, &mut Workspace::new()).unwrap();
            (p, l)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn fit_returns_best_epoch() {
        let env = small_env();
        let cfg = TrainConfig { max_epochs: 3, ..tiny_cfg() };
        let arch = ArchitectureConfig::new(ArchitectureKind::Unilateral, 10, 2);
        let r = fit(&arch, &cfg, &env, TaskKind::Reach, LossMode::Profile(LossProfile::Combined), 2, |_| {}).unwrap();
        assert!(r.epochs_run() <= 3);
        let best = r.history[r.best_epoch - 1].val_loss;
        assert!(r.history.iter().all(|h| best <= h.val_loss));
        // the returned parameters reproduce the recorded best validation loss
        let val = validation_set(2, TaskKind::Reach, cfg.val_trials, &env).unwrap();
        let again = validation_loss(&r.params, &val, &env, &mut Workspace::new()).unwrap();
        assert_eq!(again, best);
    }
}
