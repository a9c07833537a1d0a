//! Random sensor-type perturbation, kept only when it lowers the objective.

use rand::Rng;

use super::budget::{enforce_budget, truncate_to_budget, PlanBudget};
use crate::dynamics::{DynamicsModel, Trajectory};
use crate::environment::SensorKind;
use crate::error::Result;
use crate::objective::Objective;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct InjectionOutcome {
    /// The probability draw allowed a perturbation.
    pub attempted: bool,
    pub index: Option<usize>,
    pub from: Option<SensorKind>,
    pub to: Option<SensorKind>,
    /// The perturbed plan was over budget and had to be shortened.
    pub truncated: bool,
    pub accepted: bool,
}

impl InjectionOutcome {
    pub fn accepted_drill(&self) -> bool {
        self.accepted && self.to == Some(SensorKind::Drill)
    }
}

#[derive(Clone, Debug)]
pub struct Injected {
    pub plan: Trajectory,
    pub objective: f64,
    pub outcome: InjectionOutcome,
}

/// With probability `p`, changes the sensor type at one knot drawn uniformly
/// from `0..=T` to one of the other kinds (uniformly), truncating the plan if
/// the change breaks the budget, and keeps the result only if the objective
/// of the budget-enforced plan strictly decreases. `current` is the objective of `plan`.
pub fn inject_samples<R: Rng + ?Sized>(
    plan: &Trajectory,
    current: f64,
    objective: &Objective<'_>,
    model: &DynamicsModel,
    budget: Option<&PlanBudget>,
    p: f64,
    rng: &mut R,
) -> Result<Injected> {
    let unchanged = |outcome| Injected {
        plan: plan.clone(),
        objective: current,
        outcome,
    };
    let draw: f64 = rng.random();
    if !(draw < p) {
        return Ok(unchanged(InjectionOutcome::default()));
    }
    let i = rng.random_range(0..=plan.horizon());
    let from = plan.sensor_types[i];
    let others: Vec<SensorKind> = SensorKind::ALL.iter().copied().filter(|&k| k != from).collect();
    let to = others[rng.random_range(0..others.len())];
    let mut outcome = InjectionOutcome {
        attempted: true,
        index: Some(i),
        from: Some(from),
        to: Some(to),
        ..Default::default()
    };

    let mut cand = plan.clone();
    cand.sensor_types[i] = to;
    if let Some(pb) = budget {
        if !pb.is_feasible(&cand) {
            outcome.truncated = true;
            match truncate_to_budget(&cand, model, pb)? {
                Some(t) => cand = t,
                None => return Ok(unchanged(outcome)),
            }
        }
        // score the plan the budget rule would actually leave: a costlier
        // sensor lowers the per-step movement allowance everywhere
        cand = enforce_budget(&cand, model, pb)?;
    }
    let j = objective.evaluate(&cand)?.total;
    if j < current {
        outcome.accepted = true;
        Ok(Injected {
            plan: cand,
            objective: j,
            outcome,
        })
    } else {
        Ok(unchanged(outcome))
    }
}
