//! Informative path planning with multimodal sensing: a Gaussian-process
//! belief over an unknown field, budgeted trajectory optimization that also
//! chooses which sensor to use at each knot, and an experiment harness.

pub mod dynamics;
pub mod environment;
pub mod error;
pub mod gp;
pub mod harness;
pub mod objective;
pub mod optimizer;

pub use dynamics::{DynamicsModel, ModelKind, Trajectory};
pub use environment::{BudgetModel, EnvironmentMap, SensorKind, SensorModel};
pub use error::{Error, Result};
pub use gp::{GpBelief, Kernel, Measurement, MeasurementSet, Point, Posterior};
pub use objective::{Objective, ObjectiveBreakdown, ObjectiveParams, Region};
pub use optimizer::{optimize, OptimizeResult, OptimizerConfig, PlanBudget};
