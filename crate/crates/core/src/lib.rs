//! Potential-reduction interior point solver for s-t maximum flow.
//!
//! Two schedules are provided: a warm-up method taking `O(√m)` progress steps
//! with a plain log barrier, and a weighted-barrier method that grows per-edge
//! barrier weights to take `m^{1/2-η}` steps. Both finish with integral
//! rounding and augmenting paths so the reported flow is exact.

pub mod agd;
pub mod barrier;
pub mod combinatorial;
pub mod config;
pub mod dimacs;
pub mod driver;
pub mod error;
pub mod graph;
pub mod laplacian;
pub mod potential_step;
pub mod scalar;
pub mod state;
pub mod trace;
pub mod weighted_step;

pub use config::{Mode, SolverConfig};
pub use config::FStarSource;
pub use driver::{solve, solve_instance, SolveReport};
pub use error::{FlowError, Result};
pub use graph::{build_graph, precondition, Edge, FlowInstance, Graph};
pub use scalar::Scalar;

pub type Graph64 = graph::Graph<f64>;
pub type Graph32 = graph::Graph<f32>;
pub type Weights64 = barrier::Weights<f64>;
pub type Weights32 = barrier::Weights<f32>;
pub type IterateState64 = state::IterateState<f64>;
pub type IterateState32 = state::IterateState<f32>;
pub type StepResult64 = potential_step::StepResult<f64>;
pub type StepResult32 = potential_step::StepResult<f32>;
