//! Loss terms and the three weighted profiles.
//!
//! Every trajectory term is a mean over timesteps. All functions record on a
//! tape; `*_value` helpers evaluate plain trajectories through a scratch tape
//! so that the recorded and reported numbers come from the same code.

use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::network::{ArchitectureKind, GroupSet, NetworkParams, Role};
use crate::tape::{Tape, Var};

/// Default weight-penalty coefficient.
pub const WEIGHT_PENALTY_SCALE: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(deny_unknown_fields))]
pub struct LossWeights {
    pub cart1: f64,
    pub cart2: f64,
    pub activation: f64,
    pub weight_penalty: f64,
}

impl LossWeights {
    pub const DOMINANT: LossWeights = LossWeights { cart1: 0.0, cart2: 5.0, activation: 2.0, weight_penalty: 0.0 };
    pub const NON_DOMINANT: LossWeights = LossWeights { cart1: 5.0, cart2: 0.0, activation: 0.0, weight_penalty: 2.0 };
    pub const COMBINED: LossWeights = LossWeights { cart1: 2.5, cart2: 2.5, activation: 1.0, weight_penalty: 1.0 };
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum LossProfile {
    Dominant,
    NonDominant,
    Combined,
}

impl LossProfile {
    pub fn name(self) -> &'static str {
        match self {
            LossProfile::Dominant => "DL",
            LossProfile::NonDominant => "NDL",
            LossProfile::Combined => "Combined",
        }
    }

    /// Tensors covered by the weight penalty of this profile.
    ///
    /// The non-dominant profile penalises the non-dominant hemisphere of a
    /// bilateral net, or the whole net when there is only one side.
    pub fn penalty_scope(self, kind: ArchitectureKind) -> GroupSet {
        match (self, kind.is_bilateral()) {
            (LossProfile::NonDominant, true) => GroupSet::NON_DOMINANT,
            _ => GroupSet::ALL,
        }
    }
}

/// Configurable profile weights.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default, deny_unknown_fields))]
pub struct LossConfig {
    pub dominant: LossWeights,
    pub non_dominant: LossWeights,
    pub combined: LossWeights,
    pub penalty_scale: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            dominant: LossWeights::DOMINANT,
            non_dominant: LossWeights::NON_DOMINANT,
            combined: LossWeights::COMBINED,
            penalty_scale: WEIGHT_PENALTY_SCALE,
        }
    }
}

impl LossConfig {
    pub fn weights(&self, profile: LossProfile) -> LossWeights {
        match profile {
            LossProfile::Dominant => self.dominant,
            LossProfile::NonDominant => self.non_dominant,
            LossProfile::Combined => self.combined,
        }
    }
}

/// Per-step endpoint and activation nodes of a recorded rollout.
#[derive(Clone, Debug, Default)]
pub struct TapedTrajectory {
    pub endpoints: Vec<Var>,
    pub activations: Vec<Var>,
    pub excitations: Vec<Var>,
    pub observations: Vec<Var>,
}

/// Trajectory terms shared by all profiles, computed once per rollout.
#[derive(Clone, Copy, Debug)]
pub struct TrajectoryTerms {
    pub cart1: Var,
    pub cart2: Var,
    pub activation: Var,
}

fn mean_of(tape: &mut Tape, per_step: &[Var]) -> Var {
    let all = tape.concat(per_step);
    let s = tape.sum(all);
    tape.scale(s, 1.0 / per_step.len() as f64)
}

pub fn trajectory_terms(tape: &mut Tape, endpoints: &[Var], activations: &[Var], target: Var) -> TrajectoryTerms {
    assert!(!endpoints.is_empty(), "empty trajectory");
    let mut l1 = Vec::with_capacity(endpoints.len());
    let mut l2 = Vec::with_capacity(endpoints.len());
    for &p in endpoints {
        let e = tape.sub(p, target);
        let a = tape.abs(e);
        l1.push(tape.sum(a));
        let s = tape.square(e);
        l2.push(tape.sum(s));
    }
    let mut act = Vec::with_capacity(activations.len());
    for &a in activations {
        let s = tape.square(a);
        act.push(tape.sum(s));
    }
    TrajectoryTerms {
        cart1: mean_of(tape, &l1),
        cart2: mean_of(tape, &l2),
        activation: mean_of(tape, &act),
    }
}

/// Mean over steps of `‖p_t − target‖₁`.
pub fn cartesian_l1(tape: &mut Tape, endpoints: &[Var], target: Var) -> Var {
    trajectory_terms(tape, endpoints, &[], target).cart1
}

/// Mean over steps of `‖p_t − target‖₂²`.
pub fn cartesian_l2(tape: &mut Tape, endpoints: &[Var], target: Var) -> Var {
    trajectory_terms(tape, endpoints, &[], target).cart2
}

/// Mean over steps of `Σ_m a_t(m)²`.
pub fn muscle_activation_loss(tape: &mut Tape, activations: &[Var]) -> Var {
    assert!(!activations.is_empty(), "empty trajectory");
    let mut act = Vec::with_capacity(activations.len());
    for &a in activations {
        let s = tape.square(a);
        act.push(tape.sum(s));
    }
    mean_of(tape, &act)
}

/// `scale · Σ w²` over weight matrices (not biases or mixing scalars) in `scope`.
pub fn weight_penalty(tape: &mut Tape, params: &NetworkParams, vars: &[Var], scope: GroupSet, scale: f64) -> Var {
    let mut parts = Vec::new();
    for (t, &v) in params.tensors.iter().zip(vars) {
        if t.role == Role::Weight && scope.contains(t.group) {
            let s = tape.square(v);
            parts.push(tape.sum(s));
        }
    }
    if parts.is_empty() {
        return tape.constant_scalar(0.0);
    }
    let all = tape.concat(&parts);
    let s = tape.sum(all);
    tape.scale(s, scale)
}

/// Weighted sum of the four terms. Zero-weight terms are not recorded.
pub fn composite_loss(tape: &mut Tape, terms: &TrajectoryTerms, penalty: Option<Var>, w: &LossWeights) -> Var {
    let mut parts = Vec::with_capacity(4);
    for (weight, v) in [(w.cart1, Some(terms.cart1)), (w.cart2, Some(terms.cart2)), (w.activation, Some(terms.activation)), (w.weight_penalty, penalty)] {
        if weight != 0.0 {
            if let Some(v) = v {
                parts.push(tape.scale(v, weight));
            }
        }
    }
    if parts.is_empty() {
        return tape.constant_scalar(0.0);
    }
    let all = tape.concat(&parts);
    tape.sum(all)
}

// ---- plain-value helpers -----------------------------------------------------

fn with_terms<R>(endpoints: &[[f64; 2]], activations: &[[f64; 6]], target: [f64; 2], f: impl FnOnce(&Tape, TrajectoryTerms) -> R) -> R {
    let mut tape = Tape::new();
    let target = tape.constant_vector(&target);
    let ps: Vec<Var> = endpoints.iter().map(|p| tape.constant_vector(p)).collect();
    let acts: Vec<Var> = activations.iter().map(|a| tape.constant_vector(a)).collect();
    let acts = if acts.is_empty() { alloc::vec![tape.constant_vector(&[0.0; 6])] } else { acts };
    let terms = trajectory_terms(&mut tape, &ps, &acts, target);
    f(&tape, terms)
}

pub fn cartesian_l1_value(endpoints: &[[f64; 2]], target: [f64; 2]) -> f64 {
    with_terms(endpoints, &[], target, |t, terms| t.scalar(terms.cart1))
}

pub fn cartesian_l2_value(endpoints: &[[f64; 2]], target: [f64; 2]) -> f64 {
    with_terms(endpoints, &[], target, |t, terms| t.scalar(terms.cart2))
}

pub fn muscle_activation_value(activations: &[[f64; 6]]) -> f64 {
    with_terms(&[[0.0; 2]], activations, [0.0; 2], |t, terms| t.scalar(terms.activation))
}

pub fn weight_penalty_value(params: &NetworkParams, scope: GroupSet, scale: f64) -> f64 {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape, false);
    let p = weight_penalty(&mut tape, params, &vars, scope, scale);
    tape.scalar(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{ArchitectureConfig, Hemisphere};

    #[test]
    fn cartesian_examples() {
        assert_eq!(cartesian_l1_value(&[[0.3, 0.1]; 4], [0.3, 0.1]), 0.0);
        assert!((cartesian_l1_value(&[[0.1, 0.2]], [0.3, 0.1]) - 0.3).abs() < 1e-15);
        assert_eq!(cartesian_l2_value(&[[0.3, 0.1]; 4], [0.3, 0.1]), 0.0);
        assert!((cartesian_l2_value(&[[0.1, 0.2]], [0.3, 0.1]) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn homogeneity() {
        let target = [0.2, -0.1];
        let ps = [[0.25, -0.05], [0.1, 0.0], [0.2, -0.3]];
        let doubled: Vec<[f64; 2]> = ps.iter().map(|p| [target[0] + 2.0 * (p[0] - target[0]), target[1] + 2.0 * (p[1] - target[1])]).collect();
        let l1 = cartesian_l1_value(&ps, target);
        let l2 = cartesian_l2_value(&ps, target);
        assert!((cartesian_l1_value(&doubled, target) - 2.0 * l1).abs() < 1e-12);
        assert!((cartesian_l2_value(&doubled, target) - 4.0 * l2).abs() < 1e-12);
    }

    #[test]
    fn single_coordinate_errors() {
        for e in [-0.3, -0.01, 0.0, 0.07, 0.5] {
            assert!((cartesian_l1_value(&[[e, 0.0]], [0.0, 0.0]) - e.abs()).abs() < 1e-15);
            assert!((cartesian_l2_value(&[[e, 0.0]], [0.0, 0.0]) - e * e).abs() < 1e-15);
        }
    }

    #[test]
    fn activation_examples() {
        assert_eq!(muscle_activation_value(&[[0.0; 6]; 3]), 0.0);
        assert_eq!(muscle_activation_value(&[[0.5, 0.0, 0.0, 0.0, 0.0, 0.0]]), 0.25);
        assert_eq!(muscle_activation_value(&[[1.0; 6]]), 6.0);
    }

    #[test]
    fn weight_penalty_examples() {
        let cfg = ArchitectureConfig::new(ArchitectureKind::Bilateral, 10, 2);
        let mut p = NetworkParams::zeros(cfg).unwrap();
        assert_eq!(weight_penalty_value(&p, GroupSet::ALL, 1e-3), 0.0);
        p.tensors[0].data[3] = 2.0;
        assert!((weight_penalty_value(&p, GroupSet::ALL, 1e-3) - 0.004).abs() < 1e-15);
        // dominant weight ignored by a non-dominant scope
        assert_eq!(weight_penalty_value(&p, GroupSet::NON_DOMINANT, 1e-3), 0.0);
        let (wn, bn) = p.hidden_index(Some(Hemisphere::NonDominant), 1);
        p.tensors[bn].data[0] = 5.0; // biases never count
        p.tensors[wn].data[0] = 1.0;
        assert!((weight_penalty_value(&p, GroupSet::NON_DOMINANT, 1e-3) - 0.001).abs() < 1e-15);
    }

    fn composite(cart1: f64, cart2: f64, act: f64, wp: f64, w: &LossWeights) -> f64 {
        let mut t = Tape::new();
        let terms = TrajectoryTerms {
            cart1: t.constant_scalar(cart1),
            cart2: t.constant_scalar(cart2),
            activation: t.constant_scalar(act),
        };
        let pen = t.constant_scalar(wp);
        let l = composite_loss(&mut t, &terms, Some(pen), w);
        t.scalar(l)
    }

    #[test]
    fn composite_examples() {
        assert!((composite(0.0, 0.05, 0.25, 0.0, &LossWeights::DOMINANT) - 0.75).abs() < 1e-15);
        assert!((composite(0.3, 0.0, 0.0, 0.004, &LossWeights::NON_DOMINANT) - 1.508).abs() < 1e-15);
        assert_eq!(composite(0.0, 0.0, 0.0, 0.0, &LossWeights::COMBINED), 0.0);
    }

    #[test]
    fn canonical_profiles() {
        let c = LossConfig::default();
        let row = |w: LossWeights| [w.cart1, w.cart2, w.activation, w.weight_penalty];
        assert_eq!(row(c.weights(LossProfile::Dominant)), [0.0, 5.0, 2.0, 0.0]);
        assert_eq!(row(c.weights(LossProfile::NonDominant)), [5.0, 0.0, 0.0, 2.0]);
        assert_eq!(row(c.weights(LossProfile::Combined)), [2.5, 2.5, 1.0, 1.0]);
    }

    #[test]
    fn penalty_scope_rules() {
        assert_eq!(LossProfile::NonDominant.penalty_scope(ArchitectureKind::Bilateral), GroupSet::NON_DOMINANT);
        assert_eq!(LossProfile::NonDominant.penalty_scope(ArchitectureKind::Unilateral), GroupSet::ALL);
        assert_eq!(LossProfile::Combined.penalty_scope(ArchitectureKind::BilateralCC), GroupSet::ALL);
    }
}
