//! Leaderless consensus of nonholonomic unicycle swarms under switching
//! topologies without dwell time.
//!
//! The crate covers graph algebra, switching schedules and the joint
//! connectivity check, the closed-loop dynamics with an event-aligned
//! integrator, Lyapunov and bound diagnostics, and scenario I/O.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod io;
pub mod switching;

pub use dynamics::{
    integrate, BodyFrameState, ControllerParams, ExcitationProfile, InitialState, IntegratorConfig,
    SwarmState, Trajectory, VectorField,
};
pub use error::{Error, Result};
pub use graph::{DenseMatrix, GraphFamily, Mode, WeightedGraph};
pub use io::{parse_config, run_scenario, RunOptions, RunReport, ScenarioConfig};
pub use switching::{ScheduleSpec, SwitchEvent, SwitchSchedule};
