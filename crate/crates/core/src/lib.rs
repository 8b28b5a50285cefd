//! Consensus-based optimization (CBO).
//!
//! Particles `V^i` in `R^d` drift toward a softmax-weighted mean of the
//! ensemble and diffuse with amplitude proportional to their distance from
//! it:
//!
//! ```text
//! V^i <- V^i - dt * lambda * (V^i - v_alpha) * H(E(V^i) - E(v_alpha))
//!            + sigma * |V^i - v_alpha| * B^i,      B^i ~ N(0, dt I_d)
//! v_alpha = sum_i V^i w_i / sum_i w_i,           w_i = exp(-alpha E(V^i))
//! ```
//!
//! Besides the particle engine the crate evaluates the empirical
//! functionals that track convergence (`V`, variance, ball mass), the
//! closed-form constants of the mean-field convergence analysis, and a
//! coupling harness measuring the mean-field approximation error.

// `!(x > 0.0)` also rejects NaN, which is the point of those checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod ensemble;
pub mod error;
pub mod metrics;
pub mod mfa;
pub mod noise;
pub mod objectives;
pub mod theory;

pub use engine::{
    cbo_step, consensus_point, euler_maruyama_step, h_eval, sample_initial, simulate, simulate_from, CboParams,
    HVariant, InitDistribution, RecordingPlan, SimulationError, SimulationResult, StepView,
};
pub use ensemble::Ensemble;
pub use error::{Error, Result};
pub use metrics::{MetricsRecord, MetricsSeries};
pub use objectives::{AssumptionConstants, ObjectiveSpec};
