//! Controller architectures: a unilateral MLP and two-hemisphere networks
//! with and without pooled cross-hemisphere connections.
//!
//! Hidden layers use tanh, the output layer a sigmoid so excitations stay in
//! (0, 1). In the bilateral networks each hemisphere has `U/2` units per
//! layer and sees the full observation. The last hidden layers are mixed by
//! two trainable scalars before a shared output layer. With cross-talk
//! enabled, after every hidden level but the last the opposing hemisphere's
//! activity is average-pooled to half width and added to the first
//! components of the home layer before it feeds the next dense layer.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::plant::{N_MUSCLES, N_OBS};
use crate::rng::{labels, SeedStream};
use crate::tape::{Shape, Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum ArchitectureKind {
    Unilateral,
    Bilateral,
    #[cfg_attr(feature = "serde", serde(rename = "BilateralCC"))]
    BilateralCC,
}

impl ArchitectureKind {
    pub fn name(self) -> &'static str {
        match self {
            ArchitectureKind::Unilateral => "Unilateral",
            ArchitectureKind::Bilateral => "Bilateral",
            ArchitectureKind::BilateralCC => "BilateralCC",
        }
    }

    pub fn is_bilateral(self) -> bool {
        self != ArchitectureKind::Unilateral
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(deny_unknown_fields))]
pub struct ArchitectureConfig {
    pub kind: ArchitectureKind,
    pub units: usize,
    pub layers: usize,
    #[cfg_attr(feature = "serde", serde(default = "default_inputs"))]
    pub inputs: usize,
    #[cfg_attr(feature = "serde", serde(default = "default_outputs"))]
    pub outputs: usize,
}

#[cfg(feature = "serde")]
fn default_inputs() -> usize {
    N_OBS
}

#[cfg(feature = "serde")]
fn default_outputs() -> usize {
    N_MUSCLES
}

impl ArchitectureConfig {
    pub fn new(kind: ArchitectureKind, units: usize, layers: usize) -> Self {
        ArchitectureConfig { kind, units, layers, inputs: N_OBS, outputs: N_MUSCLES }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.units == 0 || self.inputs == 0 || self.outputs == 0 {
            return Err(Error::InvalidConfig("layers, units, inputs and outputs must be positive".into()));
        }
        if self.kind.is_bilateral() && !self.units.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!("bilateral networks need an even unit count, got {}", self.units)));
        }
        if self.kind == ArchitectureKind::BilateralCC && self.units / 2 < 2 {
            return Err(Error::InvalidConfig("cross-hemisphere pooling needs at least 2 units per hemisphere".into()));
        }
        Ok(())
    }

    /// Width of one hemisphere (or of the whole layer for a unilateral net).
    pub fn side_width(&self) -> usize {
        if self.kind.is_bilateral() {
            self.units / 2
        } else {
            self.units
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum Group {
    Dominant,
    NonDominant,
    Shared,
}

impl Group {
    pub fn name(self) -> &'static str {
        match self {
            Group::Dominant => "dominant",
            Group::NonDominant => "nondominant",
            Group::Shared => "shared",
        }
    }

    pub fn from_name(s: &str) -> Option<Group> {
        match s {
            "dominant" => Some(Group::Dominant),
            "nondominant" => Some(Group::NonDominant),
            "shared" => Some(Group::Shared),
            _ => None,
        }
    }
}

/// A subset of parameter groups.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroupSet {
    pub dominant: bool,
    pub non_dominant: bool,
    pub shared: bool,
}

impl GroupSet {
    pub const ALL: GroupSet = GroupSet { dominant: true, non_dominant: true, shared: true };
    pub const NON_DOMINANT: GroupSet = GroupSet { dominant: false, non_dominant: true, shared: false };
    pub const DOMINANT: GroupSet = GroupSet { dominant: true, non_dominant: false, shared: false };

    pub fn contains(&self, g: Group) -> bool {
        match g {
            Group::Dominant => self.dominant,
            Group::NonDominant => self.non_dominant,
            Group::Shared => self.shared,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Weight,
    Bias,
    /// One of the two hemisphere mixing scalars.
    Combination,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Weight => "weight",
            Role::Bias => "bias",
            Role::Combination => "combination",
        }
    }

    pub fn from_name(s: &str) -> Option<Role> {
        match s {
            "weight" => Some(Role::Weight),
            "bias" => Some(Role::Bias),
            "combination" => Some(Role::Combination),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub group: Group,
    pub role: Role,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    fn zeros(name: String, group: Group, role: Role, rows: usize, cols: usize) -> Self {
        Tensor { name, group, role, rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn shape(&self) -> Shape {
        Shape::matrix(self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Side of a bilateral network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hemisphere {
    Dominant,
    NonDominant,
}

impl Hemisphere {
    pub fn group(self) -> Group {
        match self {
            Hemisphere::Dominant => Group::Dominant,
            Hemisphere::NonDominant => Group::NonDominant,
        }
    }

    fn prefix(self) -> &'static str {
        match self {
            Hemisphere::Dominant => "dom",
            Hemisphere::NonDominant => "nondom",
        }
    }
}

/// Trainable tensors plus the structural state lesions can change.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    pub config: ArchitectureConfig,
    pub tensors: Vec<Tensor>,
    /// Per-tensor freeze flags, parallel to `tensors`.
    pub frozen: Vec<bool>,
    /// Cross-hemisphere pooling disabled (corpus callosum lesion).
    pub cross_talk_severed: bool,
}

impl NetworkParams {
    /// All tensors zero, combination weights 0.5.
    pub fn zeros(config: ArchitectureConfig) -> Result<Self> {
        config.validate()?;
        let mut tensors = Vec::new();
        let w = config.side_width();
        let dense = |tensors: &mut Vec<Tensor>, prefix: &str, group: Group, k: usize, fan_in: usize| {
            tensors.push(Tensor::zeros(format!("{prefix}hidden{k}.weight"), group, Role::Weight, w, fan_in));
            tensors.push(Tensor::zeros(format!("{prefix}hidden{k}.bias"), group, Role::Bias, w, 1));
        };
        if config.kind.is_bilateral() {
            for side in [Hemisphere::Dominant, Hemisphere::NonDominant] {
                let prefix = format!("{}.", side.prefix());
                for k in 0..config.layers {
                    let fan_in = if k == 0 { config.inputs } else { w };
                    dense(&mut tensors, &prefix, side.group(), k, fan_in);
                }
            }
            for name in ["comb.dom", "comb.nondom"] {
                let mut t = Tensor::zeros(name.into(), Group::Shared, Role::Combination, 1, 1);
                t.data[0] = 0.5;
                tensors.push(t);
            }
        } else {
            for k in 0..config.layers {
                let fan_in = if k == 0 { config.inputs } else { w };
                dense(&mut tensors, "", Group::Shared, k, fan_in);
            }
        }
        tensors.push(Tensor::zeros("output.weight".into(), Group::Shared, Role::Weight, config.outputs, w));
        tensors.push(Tensor::zeros("output.bias".into(), Group::Shared, Role::Bias, config.outputs, 1));
        let frozen = vec![false; tensors.len()];
        Ok(NetworkParams { config, tensors, frozen, cross_talk_severed: false })
    }

    /// Glorot-uniform weights, zero biases, combination weights 0.5.
    pub fn init(config: ArchitectureConfig, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let mut rng = SeedStream::new(seed).split(labels::INIT);
        for t in p.tensors.iter_mut().filter(|t| t.role == Role::Weight) {
            let limit = math::sqrt(6.0 / (t.rows + t.cols) as f64);
            for x in t.data.iter_mut() {
                *x = rng.uniform(-limit, limit);
            }
        }
        Ok(p)
    }

    pub fn kind(&self) -> ArchitectureKind {
        self.config.kind
    }

    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.tensors.iter().position(|t| t.name == name)
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.iter_mut().find(|t| t.name == name)
    }

    /// Index of the (weight, bias) pair of hidden level `k` (0-based).
    pub fn hidden_index(&self, side: Option<Hemisphere>, k: usize) -> (usize, usize) {
        let per_side = 2 * self.config.layers;
        let base = match side {
            None | Some(Hemisphere::Dominant) => 0,
            Some(Hemisphere::NonDominant) => per_side,
        };
        (base + 2 * k, base + 2 * k + 1)
    }

    /// Index of a hemisphere's mixing scalar.
    pub fn combination_index(&self, side: Hemisphere) -> usize {
        let base = 4 * self.config.layers;
        match side {
            Hemisphere::Dominant => base,
            Hemisphere::NonDominant => base + 1,
        }
    }

    /// Index of the output (weight, bias) pair.
    pub fn output_index(&self) -> (usize, usize) {
        let n = self.tensors.len();
        (n - 2, n - 1)
    }

    /// Flattened copy of all tensors, in tensor order.
    pub fn flatten(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.data.iter().copied()).collect()
    }

    pub fn unflatten(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count(), "flat parameter length mismatch");
        let mut off = 0;
        for t in self.tensors.iter_mut() {
            let n = t.data.len();
            t.data.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
    }

    /// Records every tensor as a tape leaf; gradients only when `trainable`.
    pub fn register(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        self.tensors
            .iter()
            .map(|t| if trainable { tape.param(&t.data, t.shape()) } else { tape.constant(&t.data, t.shape()) })
            .collect()
    }

    /// Cross-talk is live for CC networks unless severed by a lesion.
    pub fn cross_talk_active(&self) -> bool {
        self.config.kind == ArchitectureKind::BilateralCC && !self.cross_talk_severed
    }

    /// Muscle excitations for observation `x`, on the tape.
    pub fn forward(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Var {
        match self.config.kind {
            ArchitectureKind::Unilateral => self.forward_unilateral(tape, vars, x),
            _ => self.forward_bilateral(tape, vars, x, self.cross_talk_active()),
        }
    }

    pub fn forward_unilateral(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Var {
        let mut h = x;
        for k in 0..self.config.layers {
            let (w, b) = self.hidden_index(None, k);
            h = dense(tape, vars[w], vars[b], h);
            h = tape.tanh(h);
        }
        let (w, b) = self.output_index();
        let z = dense(tape, vars[w], vars[b], h);
        tape.sigmoid(z)
    }

    /// Bilateral forward pass; `cross_talk` selects the pooled connections
    /// regardless of the network kind.
    pub fn forward_bilateral(&self, tape: &mut Tape, vars: &[Var], x: Var, cross_talk: bool) -> Var {
        let gain = if cross_talk { Some(1.0) } else { None };
        self.forward_bilateral_with_gain(tape, vars, x, gain)
    }

    pub(crate) fn forward_bilateral_with_gain(&self, tape: &mut Tape, vars: &[Var], x: Var, gain: Option<f64>) -> Var {
        let width = self.config.side_width();
        let layers = self.config.layers;
        let mut in_dom = x;
        let mut in_non = x;
        for k in 0..layers {
            let (wd, bd) = self.hidden_index(Some(Hemisphere::Dominant), k);
            let (wn, bn) = self.hidden_index(Some(Hemisphere::NonDominant), k);
            let hd = dense(tape, vars[wd], vars[bd], in_dom);
            let hd = tape.tanh(hd);
            let hn = dense(tape, vars[wn], vars[bn], in_non);
            let hn = tape.tanh(hn);
            match gain {
                Some(g) if k + 1 < layers => {
                    in_dom = add_pooled(tape, hd, hn, width, g);
                    in_non = add_pooled(tape, hn, hd, width, g);
                }
                _ => {
                    in_dom = hd;
                    in_non = hn;
                }
            }
        }
        let cd = vars[self.combination_index(Hemisphere::Dominant)];
        let cn = vars[self.combination_index(Hemisphere::NonDominant)];
        let cd = tape.broadcast(cd, width);
        let cn = tape.broadcast(cn, width);
        let md = tape.mul(cd, in_dom);
        let mn = tape.mul(cn, in_non);
        let c = tape.add(md, mn);
        let (w, b) = self.output_index();
        let z = dense(tape, vars[w], vars[b], c);
        tape.sigmoid(z)
    }

    /// Evaluates the network on plain values.
    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        let mut tape = Tape::new();
        let vars = self.register(&mut tape, false);
        let x = tape.constant_vector(x);
        let y = self.forward(&mut tape, &vars, x);
        tape.value(y).to_vec()
    }
}

fn dense(tape: &mut Tape, w: Var, b: Var, x: Var) -> Var {
    let z = tape.matvec(w, x);
    tape.add(z, b)
}

/// `home` with `pool_half(other)·gain` added to its first `width/2` entries.
fn add_pooled(tape: &mut Tape, home: Var, other: Var, width: usize, gain: f64) -> Var {
    let half = width / 2;
    let mut pooled = tape.avg_pool2(other);
    if gain != 1.0 {
        pooled = tape.scale(pooled, gain);
    }
    let head = tape.slice(home, 0, half);
    let head = tape.add(head, pooled);
    if half == width {
        head
    } else {
        let tail = tape.slice(home, half, width - half);
        tape.concat(&[head, tail])
    }
}

/// Non-overlapping window-2 mean pooling; the trailing odd element is dropped.
pub fn pool_half(h: &[f64]) -> Result<Vec<f64>> {
    if h.len() < 2 {
        return Err(Error::InvalidConfig(format!("cannot pool a layer of width {}", h.len())));
    }
    Ok((0..h.len() / 2).map(|i| 0.5 * (h[2 * i] + h[2 * i + 1])).collect())
}

/// Number of trainable scalars for `config`.
pub fn param_count(config: &ArchitectureConfig) -> usize {
    let w = config.side_width();
    let side = (config.inputs * w + w) + (config.layers - 1) * (w * w + w);
    let output = config.outputs * w + config.outputs;
    if config.kind.is_bilateral() {
        2 * side + 2 + output
    } else {
        side + output
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;

    fn cfg(kind: ArchitectureKind) -> ArchitectureConfig {
        ArchitectureConfig::new(kind, 10, 2)
    }

    fn random_input(seed: u64) -> Vec<f64> {
        let mut r = SeedStream::new(seed);
        (0..N_OBS).map(|_| r.uniform(-1.0, 1.0)).collect()
    }

    #[test]
    fn init_is_deterministic() {
        let a = NetworkParams::init(cfg(ArchitectureKind::BilateralCC), 3).unwrap();
        let b = NetworkParams::init(cfg(ArchitectureKind::BilateralCC), 3).unwrap();
        assert_eq!(a, b);
        let c = NetworkParams::init(cfg(ArchitectureKind::BilateralCC), 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn init_bounds_and_biases() {
        let p = NetworkParams::init(cfg(ArchitectureKind::Bilateral), 1).unwrap();
        for t in &p.tensors {
            match t.role {
                Role::Bias => assert!(t.data.iter().all(|x| *x == 0.0)),
                Role::Combination => assert_eq!(t.data, vec![0.5]),
                Role::Weight => {
                    let limit = (6.0 / (t.rows + t.cols) as f64).sqrt();
                    assert!(t.data.iter().all(|x| x.abs() <= limit));
                }
            }
        }
    }

    #[test]
    fn groups_partition_tensors() {
        let u = NetworkParams::zeros(cfg(ArchitectureKind::Unilateral)).unwrap();
        assert!(u.tensors.iter().all(|t| t.group == Group::Shared));
        let b = NetworkParams::zeros(cfg(ArchitectureKind::Bilateral)).unwrap();
        let dom: usize = b.tensors.iter().filter(|t| t.group == Group::Dominant).map(Tensor::len).sum();
        let non: usize = b.tensors.iter().filter(|t| t.group == Group::NonDominant).map(Tensor::len).sum();
        let shared: usize = b.tensors.iter().filter(|t| t.group == Group::Shared).map(Tensor::len).sum();
        assert_eq!(dom, 115);
        assert_eq!(non, 115);
        assert_eq!(shared, 38);
        assert_eq!(b.tensors[b.combination_index(Hemisphere::Dominant)].name, "comb.dom");
        assert_eq!(b.tensors[b.hidden_index(Some(Hemisphere::NonDominant), 1).0].name, "nondom.hidden1.weight");
        assert_eq!(b.tensors[b.output_index().1].name, "output.bias");
    }

    #[test]
    fn zero_network_outputs_half() {
        for kind in [ArchitectureKind::Unilateral, ArchitectureKind::Bilateral, ArchitectureKind::BilateralCC] {
            let mut p = NetworkParams::zeros(cfg(kind)).unwrap();
            for t in p.tensors.iter_mut() {
                t.data.fill(0.0);
            }
            assert_eq!(p.evaluate(&random_input(1)), vec![0.5; 6]);
        }
    }

    #[test]
    fn unilateral_matches_straight_line_oracle() {
        let p = NetworkParams::init(cfg(ArchitectureKind::Unilateral), 11).unwrap();
        let x = random_input(5);
        let layer = |w: &Tensor, b: &Tensor, x: &[f64], act: fn(f64) -> f64| -> Vec<f64> {
            (0..w.rows)
                .map(|r| act((0..w.cols).map(|c| w.data[r * w.cols + c] * x[c]).sum::<f64>() + b.data[r]))
                .collect()
        };
        let h1 = layer(&p.tensors[0], &p.tensors[1], &x, f64::tanh);
        let h2 = layer(&p.tensors[2], &p.tensors[3], &h1, f64::tanh);
        let y = layer(&p.tensors[4], &p.tensors[5], &h2, |z| 1.0 / (1.0 + (-z).exp()));
        let got = p.evaluate(&x);
        for (a, b) in got.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn outputs_in_open_unit_interval() {
        let mut p = NetworkParams::init(cfg(ArchitectureKind::BilateralCC), 2).unwrap();
        for t in p.tensors.iter_mut() {
            for x in t.data.iter_mut() {
                *x *= 3.0;
            }
        }
        let y = p.evaluate(&[1.0; N_OBS]);
        assert!(y.iter().all(|v| *v > 0.0 && *v < 1.0));
    }

    #[test]
    fn pool_half_examples() {
        assert_eq!(pool_half(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap(), vec![1.5, 3.5]);
        assert_eq!(pool_half(&[0.3; 4]).unwrap(), vec![0.3, 0.3]);
        assert!(pool_half(&[1.0]).is_err());
        let h = [0.1, -0.4, 0.9, 0.25];
        let shifted: Vec<f64> = h.iter().map(|x| x + 2.0).collect();
        let a = pool_half(&h).unwrap();
        let b = pool_half(&shifted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((y - x - 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(param_count(&cfg(ArchitectureKind::Unilateral)), 346);
        assert_eq!(param_count(&cfg(ArchitectureKind::Bilateral)), 268);
        assert_eq!(param_count(&cfg(ArchitectureKind::BilateralCC)), 268);
        for kind in [ArchitectureKind::Unilateral, ArchitectureKind::Bilateral, ArchitectureKind::BilateralCC] {
            let p = NetworkParams::zeros(cfg(kind)).unwrap();
            assert_eq!(p.param_count(), param_count(&p.config));
        }
    }

    #[test]
    fn odd_bilateral_width_rejected() {
        assert!(NetworkParams::zeros(ArchitectureConfig::new(ArchitectureKind::Bilateral, 9, 2)).is_err());
        assert!(NetworkParams::zeros(ArchitectureConfig::new(ArchitectureKind::BilateralCC, 2, 2)).is_err());
        assert!(NetworkParams::zeros(ArchitectureConfig::new(ArchitectureKind::Unilateral, 9, 2)).is_ok());
    }

    #[test]
    fn nondominant_silenced_without_cross_talk() {
        let mut p = NetworkParams::init(cfg(ArchitectureKind::Bilateral), 7).unwrap();
        let ci = p.combination_index(Hemisphere::NonDominant);
        p.tensors[ci].data[0] = 0.0;
        let x = random_input(9);
        let before = p.evaluate(&x);
        let (w, _) = p.hidden_index(Some(Hemisphere::NonDominant), 0);
        for v in p.tensors[w].data.iter_mut() {
            *v += 0.37;
        }
        assert_eq!(before, p.evaluate(&x));
    }

    #[test]
    fn cross_talk_of_zero_layers_is_inert() {
        // Non-dominant hemisphere computes tanh(0) = 0 everywhere.
        let mut p = NetworkParams::init(cfg(ArchitectureKind::BilateralCC), 8).unwrap();
        for k in 0..2 {
            let (w, b) = p.hidden_index(Some(Hemisphere::NonDominant), k);
            p.tensors[w].data.fill(0.0);
            p.tensors[b].data.fill(0.0);
        }
        let x = random_input(2);
        let mut tape = Tape::new();
        let vars = p.register(&mut tape, false);
        let xv = tape.constant_vector(&x);
        let on = p.forward_bilateral(&mut tape, &vars, xv, true);
        let off = p.forward_bilateral(&mut tape, &vars, xv, false);
        assert_eq!(tape.value(on), tape.value(off));
    }

    #[test]
    fn identical_hemispheres_combine_to_either() {
        let mut p = NetworkParams::init(cfg(ArchitectureKind::Bilateral), 4).unwrap();
        for k in 0..2 {
            let (wd, bd) = p.hidden_index(Some(Hemisphere::Dominant), k);
            let (wn, bn) = p.hidden_index(Some(Hemisphere::NonDominant), k);
            p.tensors[wn].data = p.tensors[wd].data.clone();
            p.tensors[bn].data = p.tensors[bd].data.clone();
        }
        // Route everything through the dominant side with weight 1 and compare.
        let x = random_input(3);
        let mixed = p.evaluate(&x);
        let mut solo = p.clone();
        let cd = solo.combination_index(Hemisphere::Dominant);
        let cn = solo.combination_index(Hemisphere::NonDominant);
        solo.tensors[cd].data[0] = 1.0;
        solo.tensors[cn].data[0] = 0.0;
        let single = solo.evaluate(&x);
        for (a, b) in mixed.iter().zip(&single) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_gain_cross_talk_equals_disabled_exactly() {
        let p = NetworkParams::init(cfg(ArchitectureKind::BilateralCC), 12).unwrap();
        for s in 0..20 {
            let x = random_input(100 + s);
            let mut tape = Tape::new();
            let vars = p.register(&mut tape, false);
            let xv = tape.constant_vector(&x);
            let zeroed = p.forward_bilateral_with_gain(&mut tape, &vars, xv, Some(0.0));
            let off = p.forward_bilateral(&mut tape, &vars, xv, false);
            assert_eq!(tape.value(zeroed), tape.value(off));
        }
    }
}
