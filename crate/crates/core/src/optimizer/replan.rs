//! One receding-horizon step: plan from the current state with the remaining
//! budget, sense at the current knot with the planned sensor, move to the
//! next knot.

use nalgebra::DVector;
use rand::Rng;

use super::budget::{knot_count, shifted_plan, PlanBudget};
use super::{optimize, OptimizeResult, OptimizerConfig};
use crate::dynamics::{DynamicsModel, Trajectory};
use crate::environment::{sense, EnvironmentMap, SensorKind, SensorModel};
use crate::error::Result;
use crate::gp::{GpBelief, Measurement, MeasurementSet, Point};
use crate::objective::{GradientMode, Objective, ObjectiveParams};

/// Everything fixed over an episode.
#[derive(Clone, Copy, Debug)]
pub struct ReplanContext<'a> {
    pub model: &'a DynamicsModel,
    pub config: &'a OptimizerConfig,
    pub params: &'a ObjectiveParams,
    pub belief: &'a GpBelief,
    pub sensors: SensorModel,
    pub movement_cost: f64,
    pub map: &'a EnvironmentMap,
    pub gradient_mode: GradientMode,
}

/// What changes over an episode.
#[derive(Clone, Debug)]
pub struct EpisodeState {
    pub state: DVector<f64>,
    pub executed: MeasurementSet,
    pub spent: f64,
    pub total_budget: f64,
    /// Previous plan, used to warm-start the next one.
    pub plan: Option<Trajectory>,
}

impl EpisodeState {
    pub fn new(start: DVector<f64>, total_budget: f64) -> Self {
        Self {
            state: start,
            executed: MeasurementSet::new(),
            spent: 0.0,
            total_budget,
            plan: None,
        }
    }

    pub fn remaining(&self) -> f64 {
        self.total_budget - self.spent
    }

    pub fn position(&self) -> Point {
        DynamicsModel::position(&self.state)
    }
}

#[derive(Clone, Debug)]
pub struct ReplanOutcome {
    pub measurement: Measurement,
    pub kind: SensorKind,
    pub moved_to: Point,
    pub result: OptimizeResult,
}

/// Returns `None`, changing nothing, once the remaining budget no longer
/// covers a single knot.
pub fn replan_step<R1, R2>(
    ctx: &ReplanContext<'_>,
    st: &mut EpisodeState,
    inject_rng: &mut R1,
    sensor_rng: &mut R2,
) -> Result<Option<ReplanOutcome>>
where
    R1: Rng + ?Sized,
    R2: Rng + ?Sized,
{
    let remaining = st.remaining();
    let horizon = knot_count(remaining, ctx.movement_cost, ctx.model);
    if horizon == 0 {
        return Ok(None);
    }
    let goal = DynamicsModel::position(&ctx.params.goal);
    let pb = PlanBudget::new(remaining.max(0.0), ctx.movement_cost, ctx.sensors, goal, ctx.params.region)?;
    let objective = Objective::new(ctx.params.clone(), ctx.belief, &st.executed, ctx.sensors)?
        .with_gradient_mode(ctx.gradient_mode);
    let init = match &st.plan {
        Some(prev) => Some(shifted_plan(prev, ctx.model, &st.state, horizon)?),
        None => None,
    };
    let result = optimize(ctx.config, ctx.model, &objective, &st.state, horizon, Some(&pb), init, inject_rng)?;

    let plan = &result.plan;
    let here = st.position();
    let kind = plan.sensor_types[0];
    let measurement = sense(ctx.map, &here, kind, &ctx.sensors, sensor_rng)?;
    st.executed.push(measurement.clone());
    st.spent += ctx.sensors.cost(kind);

    let next = plan.states[1].clone();
    let moved_to = DynamicsModel::position(&next);
    st.spent += ctx.movement_cost * (moved_to - here).norm();
    st.state = next;
    st.plan = Some(plan.clone());
    Ok(Some(ReplanOutcome {
        measurement,
        kind,
        moved_to,
        result,
    }))
}
