//! Differentiable two-link, six-muscle arm with bilateral neural controllers.
//!
//! Everything here is `no_std` with `alloc`: a reverse-mode tape, the plant,
//! the three controller architectures, losses, tasks and metrics, training
//! with hemisphere-routed gradients, and structural lesions.

#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod checks;
pub mod eval;
pub mod lesion;
pub mod losses;
pub mod math;
pub mod network;
pub mod plant;
pub mod rng;
pub mod tape;
pub mod tasks;
pub mod training;

pub use error::{Error, Result};
pub use network::{ArchitectureConfig, ArchitectureKind, Group, Hemisphere, NetworkParams};
pub use tape::{Tape, Var};
