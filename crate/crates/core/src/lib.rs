//! Casimir-preserving learned flow maps (CO-LPNets) for networks of coupled
//! Lie-Poisson control systems on SO(3)^N and SE(3)^N.
//!
//! The crate is organised bottom-up:
//!
//! * [`lie`] — structure constants, Poisson tensors and Casimirs;
//! * [`control`] — interaction graphs, the matrix `Ψ` and the Hamiltonian;
//! * [`integrator`] — implicit-midpoint ground truth;
//! * [`dataset`] — sampled trajectories and the on-disk pair format;
//! * [`maps`] — the exact test-Hamiltonian flows;
//! * [`net`], [`model`], [`train`] — the learned composition and its fitting;
//! * [`eval`] — long-horizon reconstruction and metrics;
//! * [`oracles`] — independent reference computations for verification.

pub mod control;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod integrator;
pub mod io;
pub mod lie;
pub mod maps;
pub mod model;
pub mod net;
pub mod oracles;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
