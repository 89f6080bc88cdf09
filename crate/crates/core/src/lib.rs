//! Particle transport through a tight-binding channel between two finite,
//! harmonically trapped reservoirs.
//!
//! Units: `ħ = 1`; energies are usually quoted in units of the hopping `J`.

// `!(x > 0.0)` style guards reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod fock;
pub mod lattice;
pub mod ode;
pub mod polylog;
pub mod reservoir;
pub mod roots;
pub mod scenario;

pub use config::{parse_config, Config};
pub use dynamics::{ObservableRecord, ReservoirMode, Sampling, SystemState, Trajectory, TransportModel};
pub use error::{Error, ErrorKind, Result};
pub use lattice::{relaxation_time, ChannelSpec, RateSet};
pub use ode::StepControl;
pub use reservoir::{solve_equilibrium, Equilibrium, QuantumStatistics, TrapSpec};
pub use scenario::run_scenario;
