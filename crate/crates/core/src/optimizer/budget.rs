//! Budget bookkeeping for plans: the shortest-path initial plan, per-step
//! control clamping, and tail truncation.
//!
//! A plan is feasible when its movement and sensing cost, plus the straight
//! return from its last knot to the goal, fit in the remaining budget.

use nalgebra::DVector;

use crate::dynamics::{DynamicsModel, ModelKind, Trajectory};
use crate::environment::{SensorKind, SensorModel};
use crate::error::{Error, Result};
use crate::gp::Point;
use crate::objective::Region;

/// Slack kept below the budget when clamping so that round-off in the
/// accumulated cost can never push a plan over.
const MARGIN: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanBudget {
    pub remaining: f64,
    pub movement_cost: f64,
    pub sensors: SensorModel,
    pub goal: Point,
    pub region: Region,
}

impl PlanBudget {
    pub fn new(remaining: f64, movement_cost: f64, sensors: SensorModel, goal: Point, region: Region) -> Result<Self> {
        if !(remaining >= 0.0 && remaining.is_finite()) {
            return Err(Error::arg(format!("remaining budget must be finite and >= 0, got {remaining}")));
        }
        if !(movement_cost > 0.0) {
            return Err(Error::arg("movement cost per unit must be positive"));
        }
        if !region.contains(&goal) {
            return Err(Error::arg("goal lies outside the region"));
        }
        Ok(Self {
            remaining,
            movement_cost,
            sensors,
            goal,
            region,
        })
    }

    pub fn sensing_cost(&self, types: &[SensorKind]) -> f64 {
        types.iter().map(|&k| self.sensors.cost(k)).sum()
    }

    pub fn movement(&self, positions: &[Point]) -> f64 {
        positions.windows(2).map(|w| (w[1] - w[0]).norm()).sum::<f64>() * self.movement_cost
    }

    /// Movement plus sensing cost of the plan's knots.
    pub fn plan_cost(&self, traj: &Trajectory) -> f64 {
        self.movement(&traj.positions()) + self.sensing_cost(&traj.sensor_types)
    }

    /// `plan_cost` plus the straight return from the last knot to the goal.
    pub fn cost_with_return(&self, traj: &Trajectory) -> f64 {
        let last = DynamicsModel::position(traj.states.last().unwrap());
        self.plan_cost(traj) + self.movement_cost * (self.goal - last).norm()
    }

    pub fn is_feasible(&self, traj: &Trajectory) -> bool {
        self.cost_with_return(traj) <= self.remaining * (1.0 + 1e-12) + 1e-12
    }
}

/// `T = floor(remaining / (c · u_max · Δt))`.
pub fn knot_count(remaining: f64, movement_cost: f64, model: &DynamicsModel) -> usize {
    let per_knot = movement_cost * model.u_max * model.dt;
    let k = (remaining / per_knot).floor();
    if k.is_finite() && k > 0.0 {
        k as usize
    } else {
        0
    }
}

fn require_single_integrator(model: &DynamicsModel) -> Result<()> {
    if model.kind != ModelKind::SingleIntegrator {
        return Err(Error::Unsupported(
            "budget enforcement is implemented for the single integrator only".into(),
        ));
    }
    Ok(())
}

/// Plan through the given positions; `u_T` is zero.
fn plan_from_positions(
    model: &DynamicsModel,
    x0: &DVector<f64>,
    positions: &[Point],
    sensor_types: Vec<SensorKind>,
    last_control: Option<DVector<f64>>,
) -> Result<Trajectory> {
    let mut controls: Vec<DVector<f64>> = positions
        .windows(2)
        .map(|w| {
            let d = (w[1] - w[0]) / model.dt;
            DVector::from_vec(vec![d.x, d.y])
        })
        .collect();
    controls.push(last_control.unwrap_or_else(|| DVector::zeros(2)));
    Trajectory::from_controls(model, x0, controls, sensor_types)
}

/// Evenly spaced knots on the segment from `start` to `goal`, all
/// spectrometer. Controls are clipped to `u_max` per axis, so a goal beyond
/// reach is approached as far as possible.
pub fn straight_line_plan(
    model: &DynamicsModel,
    start: &DVector<f64>,
    goal: &Point,
    horizon: usize,
) -> Result<Trajectory> {
    let p0 = DynamicsModel::position(start);
    let types = vec![SensorKind::Spectrometer; horizon + 1];
    let mut controls = vec![DVector::zeros(2); horizon + 1];
    match model.kind {
        ModelKind::SingleIntegrator => {
            if horizon > 0 {
                let d = (goal - p0) / (horizon as f64 * model.dt);
                let u = DVector::from_vec(vec![
                    d.x.clamp(-model.u_max, model.u_max),
                    d.y.clamp(-model.u_max, model.u_max),
                ]);
                for c in controls.iter_mut().take(horizon) {
                    *c = u.clone();
                }
            }
        }
        ModelKind::DoubleIntegrator => {
            // accelerate on the first step, coast, brake on the last
            if horizon >= 2 {
                let w = (goal - p0) / ((horizon - 1) as f64 * model.dt);
                controls[0] = DVector::from_vec(vec![w.x, w.y]) / model.dt;
                controls[horizon - 1] = -controls[0].clone();
            }
        }
    }
    Trajectory::from_controls(model, start, controls, types)
}

/// Swaps drills for spectrometers, last first, until the sensing cost plus
/// the straight-line cost to the goal fits in the budget.
fn drop_tail_drills(types: &mut [SensorKind], straight: f64, pb: &PlanBudget) -> Result<f64> {
    let mut sensing = pb.sensing_cost(types);
    while sensing + straight > pb.remaining {
        match types.iter().rposition(|&k| k == SensorKind::Drill) {
            Some(i) => {
                types[i] = SensorKind::Spectrometer;
                sensing = pb.sensing_cost(types);
            }
            None => break,
        }
    }
    if sensing + straight > pb.remaining * (1.0 + 1e-12) + 1e-12 {
        return Err(Error::Infeasible(format!(
            "straight-line cost {straight:.6} plus sensing {sensing:.6} exceeds budget {:.6}",
            pb.remaining
        )));
    }
    Ok(sensing)
}

/// Clamps a plan onto the budget.
///
/// Drills are dropped from the tail if even the straight line would not be
/// affordable with them. The movement allowance left after sensing is spread
/// evenly: no step may be longer than `allowance / (c·T)`. Each step is also
/// clipped to `u_max` per axis and to the region, and finally pulled toward
/// the straight goal step until the goal stays reachable from the new knot.
/// A plan that already satisfies all of this is returned with the same knots.
pub fn enforce_budget(traj: &Trajectory, model: &DynamicsModel, pb: &PlanBudget) -> Result<Trajectory> {
    require_single_integrator(model)?;
    let c = pb.movement_cost;
    let x0 = &traj.states[0];
    let p0 = DynamicsModel::position(x0);
    if !pb.region.contains(&p0) {
        return Err(Error::arg("plan start lies outside the region"));
    }
    let horizon = traj.horizon();
    let mut types = traj.sensor_types.clone();
    let sensing = drop_tail_drills(&mut types, c * (pb.goal - p0).norm(), pb)?;

    let allowance = pb.remaining - sensing;
    let eff = allowance - MARGIN * allowance.max(1.0);
    let step_max = model.u_max * model.dt;
    let cap = if horizon > 0 { eff.max(0.0) / (c * horizon as f64) } else { 0.0 };

    let want = traj.positions();
    let mut pos = Vec::with_capacity(horizon + 1);
    pos.push(p0);
    let mut spent = 0.0;
    for t in 0..horizon {
        let cur = pos[t];
        let mut d = want[t + 1] - cur;
        d.x = d.x.clamp(-step_max, step_max);
        d.y = d.y.clamp(-step_max, step_max);
        let len = d.norm();
        if len > cap {
            d *= cap / len;
        }
        let reach_ok = |p: &Point| spent + c * (p - cur).norm() + c * (pb.goal - p).norm() <= eff;
        let mut p = pb.region.clamp(&(cur + d));
        if !reach_ok(&p) {
            let dg = (pb.goal - cur).norm();
            let safe = if dg > 0.0 {
                cur + (pb.goal - cur) * (cap.min(dg).min(step_max) / dg)
            } else {
                cur
            };
            if reach_ok(&safe) {
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if reach_ok(&(p + (safe - p) * mid)) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                p += (safe - p) * hi;
            } else {
                p = safe;
            }
        }
        spent += c * (p - cur).norm();
        pos.push(p);
    }

    if pos == want && types == traj.sensor_types {
        return Ok(traj.clone());
    }
    let last = traj.controls[horizon].map(|u| u.clamp(-model.u_max, model.u_max));
    plan_from_positions(model, x0, &pos, types, Some(last))
}

/// Makes an over-budget plan feasible by cutting knots from the tail and
/// walking the freed knots straight to the goal (stacking there once it is
/// reached). Keeps the longest feasible prefix; sensor types stay attached to
/// their knot index. `None` when no prefix works.
pub fn truncate_to_budget(traj: &Trajectory, model: &DynamicsModel, pb: &PlanBudget) -> Result<Option<Trajectory>> {
    require_single_integrator(model)?;
    if pb.is_feasible(traj) {
        return Ok(Some(traj.clone()));
    }
    let horizon = traj.horizon();
    let orig = traj.positions();
    let step_max = model.u_max * model.dt;
    for k in (0..horizon).rev() {
        let mut pos = orig[..=k].to_vec();
        for _ in k + 1..=horizon {
            let cur = *pos.last().unwrap();
            let dg = (pb.goal - cur).norm();
            let next = if dg <= step_max { pb.goal } else { cur + (pb.goal - cur) * (step_max / dg) };
            pos.push(next);
        }
        let cand = plan_from_positions(model, &traj.states[0], &pos, traj.sensor_types.clone(), None)?;
        if pb.is_feasible(&cand) {
            return Ok(Some(cand));
        }
    }
    Ok(None)
}

/// Shifts a plan one knot forward for warm-starting the next replan: drops
/// knot 0, then cuts or pads (with zero controls and spectrometers) to
/// `horizon + 1` knots and rolls out from `x0`.
pub fn shifted_plan(prev: &Trajectory, model: &DynamicsModel, x0: &DVector<f64>, horizon: usize) -> Result<Trajectory> {
    let mut controls: Vec<DVector<f64>> = prev.controls.iter().skip(1).take(horizon + 1).cloned().collect();
    let mut types: Vec<SensorKind> = prev.sensor_types.iter().skip(1).take(horizon + 1).copied().collect();
    // the old terminal control was never executed
    if controls.len() == prev.controls.len() - 1 {
        if let Some(u) = controls.last_mut() {
            *u = DVector::zeros(model.control_dim());
        }
    }
    controls.resize(horizon + 1, DVector::zeros(model.control_dim()));
    types.resize(horizon + 1, SensorKind::Spectrometer);
    Trajectory::from_controls(model, x0, controls, types)
}
