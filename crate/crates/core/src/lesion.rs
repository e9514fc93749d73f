//! Structural lesions of bilateral networks and post-lesion retraining.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{evaluate, MetricSummary};
use crate::losses::LossProfile;
use crate::network::{ArchitectureKind, Hemisphere, NetworkParams};
use crate::rng::{labels, SeedStream};
use crate::tasks::{TaskKind, TrialSpec};
use crate::training::{train_epoch, Environment, EpochPlan, LossMode, OptimizerState, TrainConfig, Workspace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum LesionKind {
    ShallowDominant,
    ShallowNonDominant,
    DeepDominant,
    DeepNonDominant,
    CorpusCallosum,
    CcDeepDominant,
    CcDeepNonDominant,
}

impl LesionKind {
    pub const ALL: [LesionKind; 7] = [
        LesionKind::ShallowDominant,
        LesionKind::ShallowNonDominant,
        LesionKind::DeepDominant,
        LesionKind::DeepNonDominant,
        LesionKind::CorpusCallosum,
        LesionKind::CcDeepDominant,
        LesionKind::CcDeepNonDominant,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LesionKind::ShallowDominant => "shallow_dominant",
            LesionKind::ShallowNonDominant => "shallow_nondominant",
            LesionKind::DeepDominant => "deep_dominant",
            LesionKind::DeepNonDominant => "deep_nondominant",
            LesionKind::CorpusCallosum => "corpus_callosum",
            LesionKind::CcDeepDominant => "cc_deep_dominant",
            LesionKind::CcDeepNonDominant => "cc_deep_nondominant",
        }
    }

    pub fn from_name(s: &str) -> Option<LesionKind> {
        LesionKind::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn involves_cc(self) -> bool {
        matches!(self, LesionKind::CorpusCallosum | LesionKind::CcDeepDominant | LesionKind::CcDeepNonDominant)
    }

    pub fn valid_for(self, kind: ArchitectureKind) -> bool {
        match kind {
            ArchitectureKind::Unilateral => false,
            ArchitectureKind::Bilateral => !self.involves_cc(),
            ArchitectureKind::BilateralCC => true,
        }
    }

    /// Valid kinds for `arch`, in enumeration order.
    pub fn valid_kinds(kind: ArchitectureKind) -> Vec<LesionKind> {
        LesionKind::ALL.into_iter().filter(|l| l.valid_for(kind)).collect()
    }

    fn label(self) -> u64 {
        self as u64 + 1
    }

    /// Elementary effects this lesion is composed of.
    pub fn parts(self) -> &'static [Part] {
        match self {
            LesionKind::ShallowDominant => &[Part::Shallow(Hemisphere::Dominant)],
            LesionKind::ShallowNonDominant => &[Part::Shallow(Hemisphere::NonDominant)],
            LesionKind::DeepDominant => &[Part::Deep(Hemisphere::Dominant)],
            LesionKind::DeepNonDominant => &[Part::Deep(Hemisphere::NonDominant)],
            LesionKind::CorpusCallosum => &[Part::CrossTalk],
            LesionKind::CcDeepDominant => &[Part::CrossTalk, Part::Deep(Hemisphere::Dominant)],
            LesionKind::CcDeepNonDominant => &[Part::CrossTalk, Part::Deep(Hemisphere::NonDominant)],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    /// Input-to-first-hidden weights of a hemisphere zeroed; biases kept.
    Shallow(Hemisphere),
    /// Combination scalar of a hemisphere zeroed.
    Deep(Hemisphere),
    /// Pooled cross-hemisphere additions removed.
    CrossTalk,
}

/// Applies one elementary effect in place; zeroed tensors are frozen.
pub fn apply_part(params: &mut NetworkParams, part: Part) {
    match part {
        Part::Shallow(side) => {
            let (w, _) = params.hidden_index(Some(side), 0);
            params.tensors[w].data.fill(0.0);
            params.frozen[w] = true;
        }
        Part::Deep(side) => {
            let c = params.combination_index(side);
            params.tensors[c].data.fill(0.0);
            params.frozen[c] = true;
        }
        Part::CrossTalk => params.cross_talk_severed = true,
    }
}

pub fn apply_lesion(params: &NetworkParams, lesion: LesionKind) -> Result<NetworkParams> {
    let kind = params.kind();
    if !lesion.valid_for(kind) {
        return Err(Error::InvalidLesion { lesion: lesion.name(), architecture: kind.name() });
    }
    let mut out = params.clone();
    for part in lesion.parts() {
        apply_part(&mut out, *part);
    }
    Ok(out)
}

/// Trainability mask that leaves only the output layer free.
pub fn output_layer_mask(params: &NetworkParams) -> Vec<bool> {
    let mut mask = vec![false; params.tensors.len()];
    let (w, b) = params.output_index();
    mask[w] = true;
    mask[b] = true;
    mask
}

/// Retraining stream of a lesioned model.
pub fn retrain_stream(seed: u64, lesion: LesionKind, task: TaskKind) -> SeedStream {
    SeedStream::new(seed).split(labels::LESION).split(lesion.label()).split(task.label())
}

/// One epoch of output-layer-only training with the Combined loss and a
/// fresh optimiser.
pub fn retrain_output_layer(lesioned: &NetworkParams, cfg: &TrainConfig, env: &Environment, task: TaskKind, stream: SeedStream) -> Result<NetworkParams> {
    let mut params = lesioned.clone();
    let mask = output_layer_mask(&params);
    let mut opt = OptimizerState::new(&params);
    let plan = EpochPlan {
        cfg,
        env,
        task,
        mode: LossMode::Profile(LossProfile::Combined),
        stream,
        trainable: Some(&mask),
        epoch: 1,
    };
    train_epoch(&mut params, &mut opt, &plan, &mut Workspace::new())?;
    Ok(params)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LesionRow {
    /// `None` for the unlesioned baseline.
    pub lesion: Option<LesionKind>,
    pub task: TaskKind,
    pub summary: MetricSummary,
}

impl LesionRow {
    pub fn lesion_name(&self) -> &'static str {
        self.lesion.map_or("none", LesionKind::name)
    }
}

/// Lesions of one model retrained on the task it was fit on.
pub struct LesionPlan<'a> {
    pub cfg: &'a TrainConfig,
    pub env: &'a Environment,
    pub fit_task: TaskKind,
    pub seed: u64,
    /// Test sets evaluated for every row.
    pub test_sets: &'a [(TaskKind, Vec<TrialSpec>)],
}

/// Retrains and evaluates one lesion; rows follow the order of `test_sets`.
pub fn lesion_rows(params: &NetworkParams, lesion: Option<LesionKind>, plan: &LesionPlan<'_>) -> Result<Vec<LesionRow>> {
    let model = match lesion {
        None => params.clone(),
        Some(l) => {
            let lesioned = apply_lesion(params, l)?;
            retrain_output_layer(&lesioned, plan.cfg, plan.env, plan.fit_task, retrain_stream(plan.seed, l, plan.fit_task))?
        }
    };
    plan.test_sets
        .iter()
        .map(|(task, trials)| Ok(LesionRow { lesion, task: *task, summary: evaluate(&model, trials, plan.env)? }))
        .collect()
}

/// Baseline plus every valid lesion, in enumeration order.
pub fn lesion_suite(params: &NetworkParams, plan: &LesionPlan<'_>) -> Result<Vec<LesionRow>> {
    let mut rows = lesion_rows(params, None, plan)?;
    for l in LesionKind::valid_kinds(params.kind()) {
        rows.extend(lesion_rows(params, Some(l), plan)?);
    }
    Ok(rows)
}
