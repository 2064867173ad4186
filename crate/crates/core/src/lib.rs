//! Dissipative particle dynamics with three stochastic integrators.
//!
//! The crate provides the DPD pair model, a deterministic cell-list Verlet
//! neighbor list, keyed counter-based noise, velocity Verlet, Shardlow's S1
//! splitting and the ABOBA splitting, Lees–Edwards shear boundaries, and the
//! measurement layer (configurational and kinetic temperature, g(r),
//! Irving–Kirkwood stress, shear viscosity). The [`harness`] module drives
//! replica runs, stepsize sweeps and efficiency tables.

pub mod boundary;
pub mod error;
pub mod harness;
pub mod integrators;
pub mod model;
pub mod neighbor;
pub mod observables;
pub mod rng;

pub use boundary::{le_minimum_image, le_relative_velocity, le_wrap, minimum_image, streaming_velocity, SimBox};
pub use error::{DpdError, Result};
pub use harness::{Boundary, Observable, RunConfig, RunReport, SweepResult, SweepRow};
pub use integrators::{bbk_pair_update, ou_pair_update, PairKickResult, Scheme, Simulation, ThermostatVirial};
pub use model::{
    conservative_pair_force, pair_potential, schmidt_number_estimate, total_conservative, weight_r, DpdParams,
    PairGeometry, SystemState,
};
pub use neighbor::{build_pair_list, needs_rebuild, PairList};
pub use observables::{
    kinetic_temperature, stress_tensor, viscosity_estimate, ObservableSeries, RdfHistogram, VelocityProfile,
};
pub use rng::RngStream;

pub use nalgebra::{Matrix3, Vector3};
