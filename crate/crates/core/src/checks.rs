//! Invariant suites shared by the test targets and the `selftest` command.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Result;
use crate::losses::LossProfile;
use crate::network::{ArchitectureConfig, ArchitectureKind, NetworkParams};
use crate::plant::{endpoint_jacobian, forward_kinematics, kinetic_energy, step, PlantConfig, PlantState, N_MUSCLES};
use crate::rng::SeedStream;
use crate::tape::Tape;
use crate::tasks::{sample_trial, TaskKind};
use crate::training::{profile_gradients, trial_loss, Environment, Workspace};

/// Outcome of one invariant suite.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub detail: String,
}

/// Relative error with a floor on the denominator, so components that are
/// zero in both estimates do not divide by zero.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        return 0.0;
    }
    d / a.abs().max(b.abs()).max(1e-3)
}

/// Random parameters: Glorot init plus a uniform perturbation of every entry,
/// so biases and combination scalars are not at special values.
pub fn perturbed_params(kind: ArchitectureKind, seed: u64) -> Result<NetworkParams> {
    let mut p = NetworkParams::init(ArchitectureConfig::new(kind, 10, 2), seed)?;
    let mut rng = SeedStream::new(seed).split(0xfd);
    for t in p.tensors.iter_mut() {
        for x in t.data.iter_mut() {
            *x += rng.uniform(-0.2, 0.2);
        }
    }
    Ok(p)
}

/// Max relative error between the BPTT gradient of a `steps`-step rollout
/// and central finite differences, over `pairs` random (params, trial) pairs.
pub fn rollout_gradient_error(kind: ArchitectureKind, profile: LossProfile, steps: usize, pairs: usize, seed: u64) -> Result<f64> {
    let mut env = Environment::default();
    env.task.timesteps = steps;
    let mut ws = Workspace::new();
    let mut tape = Tape::new();
    let mut worst = 0.0f64;
    for i in 0..pairs as u64 {
        let pair_seed = seed.wrapping_mul(1_000_003).wrapping_add(i);
        let params = perturbed_params(kind, pair_seed)?;
        let task = if i % 2 == 0 { TaskKind::Reach } else { TaskKind::Hold };
        let mut rng = SeedStream::new(pair_seed).split(0xfe);
        let spec = sample_trial(task, &mut rng, i, &env.task, &env.plant)?;
        let analytic = profile_gradients(&params, core::slice::from_ref(&spec), profile, &env, &mut ws)?;
        let mut probe = params.clone();
        for (ti, t) in params.tensors.iter().enumerate() {
            for k in 0..t.data.len() {
                let x = t.data[k];
                let h = 1e-6 * x.abs().max(1.0);
                probe.tensors[ti].data[k] = x + h;
                let up = trial_loss(&probe, &spec, profile, &env, &mut tape)?;
                probe.tensors[ti].data[k] = x - h;
                let down = trial_loss(&probe, &spec, profile, &env, &mut tape)?;
                probe.tensors[ti].data[k] = x;
                let numeric = (up - down) / (2.0 * h);
                worst = worst.max(relative_error(analytic.grads[ti][k], numeric));
            }
        }
    }
    Ok(worst)
}

fn random_state(rng: &mut SeedStream) -> PlantState {
    PlantState {
        q: [rng.uniform(0.2, 2.0), rng.uniform(0.3, 2.5)],
        qdot: [rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)],
        a: [0.0; N_MUSCLES],
        t: 0,
    }
}

/// Zero excitation, zero force: no motion, no activation.
pub fn check_equilibrium(cfg: &PlantConfig, trials: usize, seed: u64) -> Result<Check> {
    let mut rng = SeedStream::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let s = PlantState::at_rest([rng.uniform(0.2, 2.0), rng.uniform(0.3, 2.5)]);
        let next = step(&s, &[0.0; N_MUSCLES], [0.0, 0.0], cfg)?;
        let moved = (next.q[0] - s.q[0]).abs() + (next.q[1] - s.q[1]).abs() + next.qdot[0].abs() + next.qdot[1].abs();
        let active: f64 = next.a.iter().map(|a| a.abs()).sum();
        worst = worst.max(moved + active);
    }
    Ok(Check { name: "equilibrium", passed: worst == 0.0, worst, detail: alloc::format!("{trials} resting states, max |Δstate| = {worst:e}") })
}

/// Kinetic energy never increases under zero excitation at dt = 1e-4.
pub fn check_passivity(cfg: &PlantConfig, trials: usize, steps: usize, seed: u64) -> Result<Check> {
    let mut cfg = cfg.clone();
    cfg.arm.dt = 1e-4;
    let mut rng = SeedStream::new(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let mut s = random_state(&mut rng);
        let mut e = kinetic_energy(&s, &cfg.arm);
        for _ in 0..steps {
            s = step(&s, &[0.0; N_MUSCLES], [0.0, 0.0], &cfg)?;
            let e_next = kinetic_energy(&s, &cfg.arm);
            worst = worst.max(e_next - e);
            e = e_next;
        }
    }
    Ok(Check {
        name: "passivity",
        passed: worst <= 0.0,
        worst,
        detail: alloc::format!("{trials} random states × {steps} steps, max energy increase = {worst:e} J"),
    })
}

/// Analytic endpoint Jacobian against central differences.
pub fn check_jacobian(cfg: &PlantConfig, trials: usize, seed: u64) -> Result<Check> {
    let mut rng = SeedStream::new(seed);
    let mut worst = 0.0f64;
    let h = 1e-6;
    for _ in 0..trials {
        let q = [rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)];
        let j = endpoint_jacobian(q, &cfg.arm);
        for c in 0..2 {
            let mut up = q;
            let mut down = q;
            up[c] += h;
            down[c] -= h;
            let pu = forward_kinematics(up, &cfg.arm);
            let pd = forward_kinematics(down, &cfg.arm);
            for r in 0..2 {
                let numeric = (pu[r] - pd[r]) / (2.0 * h);
                worst = worst.max(relative_error(j[r][c], numeric));
            }
        }
    }
    Ok(Check { name: "jacobian", passed: worst < 1e-6, worst, detail: alloc::format!("{trials} random postures, max rel err = {worst:e}") })
}

/// Activations stay in [0, 1] for arbitrary excitation sequences in [0, 1].
pub fn check_activation_bounds(cfg: &PlantConfig, trials: usize, steps: usize, seed: u64) -> Result<Check> {
    let mut rng = SeedStream::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let mut s = PlantState::at_rest([rng.uniform(0.2, 2.0), rng.uniform(0.3, 2.5)]);
        for _ in 0..steps {
            let u: [f64; N_MUSCLES] = core::array::from_fn(|_| match rng.next_u64() % 3 {
                0 => 0.0,
                1 => 1.0,
                _ => rng.next_f64(),
            });
            s = step(&s, &u, [0.0, 0.0], cfg)?;
            for a in s.a {
                worst = worst.max(-a).max(a - 1.0);
            }
        }
    }
    Ok(Check {
        name: "activation_bounds",
        passed: worst <= 0.0,
        worst,
        detail: alloc::format!("{trials} random excitation sequences × {steps} steps, max bound violation = {worst:e}"),
    })
}

/// All plant invariants with the sizes used by `selftest`.
pub fn plant_checks(cfg: &PlantConfig, seed: u64) -> Result<Vec<Check>> {
    Ok(alloc::vec![
        check_equilibrium(cfg, 100, seed)?,
        check_passivity(cfg, 20, 100, seed)?,
        check_jacobian(cfg, 100, seed)?,
        check_activation_bounds(cfg, 20, 200, seed)?,
    ])
}

/// Gradient checks for every architecture kind and loss profile.
pub fn gradient_checks(steps: usize, pairs: usize, seed: u64) -> Result<Vec<(ArchitectureKind, LossProfile, f64)>> {
    let mut out = Vec::new();
    for kind in [ArchitectureKind::Unilateral, ArchitectureKind::Bilateral, ArchitectureKind::BilateralCC] {
        for profile in [LossProfile::Dominant, LossProfile::NonDominant, LossProfile::Combined] {
            out.push((kind, profile, rollout_gradient_error(kind, profile, steps, pairs, seed)?));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plant_suites_pass() {
        for c in plant_checks(&PlantConfig::default(), 3).unwrap() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn short_rollout_gradients() {
        let e = rollout_gradient_error(ArchitectureKind::BilateralCC, LossProfile::Combined, 3, 2, 9).unwrap();
        assert!(e < 1e-4, "{e}");
    }
}
