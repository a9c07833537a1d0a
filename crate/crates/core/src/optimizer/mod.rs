//! Projection-based trajectory optimization with sensor-type injection.
//!
//! Each iteration linearizes the dynamics about the current plan, solves the
//! linear-quadratic descent subproblem, backtracks along the projected
//! descent path, then tries one random sensor-type change.

pub mod budget;
pub mod inject;
pub mod line_search;
pub mod projection;
pub mod replan;
pub mod riccati;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{DynamicsModel, ModelKind, Trajectory};
use crate::error::{Error, Result};
use crate::objective::{Gradients, Objective, ObjectiveBreakdown};

pub use budget::{enforce_budget, knot_count, shifted_plan, straight_line_plan, truncate_to_budget, PlanBudget};
pub use inject::{inject_samples, Injected, InjectionOutcome};
pub use line_search::{backtracking, LineSearchParams, LineSearchResult};
pub use projection::{project, project_candidate, projection_gains};
pub use replan::{replan_step, EpisodeState, ReplanContext, ReplanOutcome};
pub use riccati::{descent_direction, lqr_gains, DescentDirection, DescentProblem, RiccatiSolution};

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub line_search: LineSearchParams,
    pub q_n: DMatrix<f64>,
    pub r_n: DMatrix<f64>,
    pub inject_prob: f64,
    pub max_iters: usize,
    /// Relative objective change below which an iteration counts as stalled.
    pub convergence_tol: f64,
    /// Consecutive stalled iterations that end the run.
    pub convergence_window: usize,
    /// Seed for `optimize_seeded`.
    pub seed: u64,
    /// Half-width of the random lateral offsets added to the interior knots
    /// of a fresh straight-line start. Between symmetric start and goal
    /// points the straight line is a stationary point of the variance term,
    /// and first-order steps would otherwise stay on it. Unused when `q = 0`.
    pub init_perturbation: f64,
}

impl OptimizerConfig {
    /// Replanning defaults: 50 iterations.
    pub fn online(model: &DynamicsModel) -> Self {
        let n = model.state_dim();
        Self {
            line_search: LineSearchParams::default(),
            q_n: DMatrix::identity(n, n),
            r_n: DMatrix::identity(2, 2) * 0.1,
            inject_prob: 0.05,
            max_iters: 50,
            convergence_tol: 1e-4,
            convergence_window: 3,
            seed: 0,
            init_perturbation: 0.1,
        }
    }

    /// Plan-once defaults: 5000 iterations.
    pub fn offline(model: &DynamicsModel) -> Self {
        Self {
            max_iters: 5000,
            ..Self::online(model)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.line_search.validate()?;
        riccati::check_weights(&self.q_n, &self.r_n)?;
        if !(0.0..=1.0).contains(&self.inject_prob) {
            return Err(Error::arg("inject_prob must lie in [0, 1]"));
        }
        if !(self.convergence_tol >= 0.0) {
            return Err(Error::arg("convergence_tol must be nonnegative"));
        }
        if !(self.init_perturbation >= 0.0 && self.init_perturbation.is_finite()) {
            return Err(Error::arg("init_perturbation must be finite and nonnegative"));
        }
        if self.convergence_window == 0 {
            return Err(Error::arg("convergence_window must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Objective of the current plan after the iteration.
    pub objective: f64,
    /// Lowest objective seen so far.
    pub best_objective: f64,
    /// Accepted step size; 0 when the line search found nothing.
    pub gamma: f64,
    pub injection: InjectionOutcome,
}

#[derive(Clone, Debug)]
pub struct OptimizeResult {
    /// Lowest-objective plan encountered.
    pub plan: Trajectory,
    pub objective: ObjectiveBreakdown,
    pub initial_objective: f64,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
}

impl OptimizeResult {
    pub fn accepted_injections(&self) -> usize {
        self.history.iter().filter(|r| r.injection.accepted).count()
    }

    pub fn accepted_drill_injections(&self) -> usize {
        self.history.iter().filter(|r| r.injection.accepted_drill()).count()
    }
}

/// Builds the descent subproblem about `traj`.
pub fn descent_problem(
    config: &OptimizerConfig,
    model: &DynamicsModel,
    traj: &Trajectory,
    grads: &Gradients,
) -> Result<DescentProblem> {
    let (a, b): (Vec<_>, Vec<_>) = traj
        .states
        .iter()
        .zip(&traj.controls)
        .map(|(x, u)| model.linearize(x, u))
        .unzip();
    DescentProblem::new(a, b, grads.a.clone(), grads.b.clone(), config.q_n.clone(), config.r_n.clone())
}

fn candidate(traj: &Trajectory, dir: &DescentDirection, gamma: f64) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let alpha = traj.states.iter().zip(&dir.z).map(|(x, z)| x + z * gamma).collect();
    let mu = traj.controls.iter().zip(&dir.v).map(|(u, v)| u + v * gamma).collect();
    (alpha, mu)
}

/// Projection onto the dynamics, then onto the budget when there is one.
pub fn project_and_enforce(
    config: &OptimizerConfig,
    model: &DynamicsModel,
    traj: &Trajectory,
    alpha: &[DVector<f64>],
    mu: &[DVector<f64>],
    budget: Option<&PlanBudget>,
) -> Result<Trajectory> {
    let projected = project_candidate(
        model,
        &traj.states[0],
        alpha,
        mu,
        traj.sensor_types.clone(),
        &config.q_n,
        &config.r_n,
    )?;
    match budget {
        Some(pb) => enforce_budget(&projected, model, pb),
        None => Ok(projected),
    }
}

/// Backtracking along `𝒫(x + γz, u + γv)`.
pub fn line_search(
    config: &OptimizerConfig,
    model: &DynamicsModel,
    objective: &Objective<'_>,
    traj: &Trajectory,
    j0: f64,
    dir: &DescentDirection,
    slope: f64,
    budget: Option<&PlanBudget>,
) -> Result<LineSearchResult<Trajectory>> {
    backtracking(&config.line_search, j0, slope, |gamma| {
        let (alpha, mu) = candidate(traj, dir, gamma);
        let plan = project_and_enforce(config, model, traj, &alpha, &mu, budget)?;
        let j = objective.evaluate(&plan)?.total;
        Ok((j, plan))
    })
}

/// Offsets interior knots (single integrator) or interior controls (double
/// integrator) by independent uniform draws in `[-amplitude, amplitude]`
/// perpendicular to the start-goal segment.
fn perturb_laterally<R: Rng + ?Sized>(
    line: &Trajectory,
    model: &DynamicsModel,
    amplitude: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    let horizon = line.horizon();
    if horizon < 2 {
        return Ok(line.clone());
    }
    let p0 = DynamicsModel::position(&line.states[0]);
    let pt = DynamicsModel::position(&line.states[horizon]);
    let d = pt - p0;
    let normal = if d.norm() > 0.0 {
        crate::gp::Point::new(-d.y, d.x) / d.norm()
    } else {
        crate::gp::Point::new(0.0, 1.0)
    };
    let offsets: Vec<f64> = (0..horizon).map(|_| rng.random_range(-amplitude..=amplitude)).collect();
    let mut controls = line.controls.clone();
    match model.kind {
        ModelKind::SingleIntegrator => {
            // knot t moves by offsets[t]; knots 0 and T stay
            for t in 0..horizon {
                let before = if t == 0 { 0.0 } else { offsets[t] };
                let after = if t + 1 == horizon { 0.0 } else { offsets[t + 1] };
                let du = normal * ((after - before) / model.dt);
                controls[t][0] += du.x;
                controls[t][1] += du.y;
            }
        }
        ModelKind::DoubleIntegrator => {
            for t in 1..horizon.saturating_sub(1) {
                let du = normal * (offsets[t] / (model.dt * model.dt));
                controls[t][0] += du.x;
                controls[t][1] += du.y;
            }
        }
    }
    Trajectory::from_controls(model, &line.states[0], controls, line.sensor_types.clone())
}

/// Runs the optimizer from `init` (or, without one, the straight line to
/// the objective's goal with `horizon` steps) and returns the best plan seen.
pub fn optimize<R: Rng + ?Sized>(
    config: &OptimizerConfig,
    model: &DynamicsModel,
    objective: &Objective<'_>,
    start: &DVector<f64>,
    horizon: usize,
    budget: Option<&PlanBudget>,
    init: Option<Trajectory>,
    rng: &mut R,
) -> Result<OptimizeResult> {
    config.validate()?;
    if start.len() != model.state_dim() {
        return Err(Error::arg("start state has the wrong dimension"));
    }
    let goal = DynamicsModel::position(&objective.params.goal);
    let mut traj = match init {
        Some(t) => {
            if t.states[0] != *start {
                return Err(Error::arg("initial plan does not begin at the start state"));
            }
            t
        }
        None => {
            let line = straight_line_plan(model, start, &goal, horizon)?;
            if config.max_iters > 0 && config.init_perturbation > 0.0 && objective.params.q > 0.0 {
                perturb_laterally(&line, model, config.init_perturbation, rng)?
            } else {
                line
            }
        }
    };
    if let Some(pb) = budget {
        traj = enforce_budget(&traj, model, pb)?;
    }
    let mut j = objective.evaluate(&traj)?.total;
    let initial_objective = j;
    let mut best = (traj.clone(), j);
    let mut history = Vec::new();
    let mut stalled = 0;
    let mut converged = false;

    for iteration in 0..config.max_iters {
        let j_prev = j;
        let grads = objective.gradients(&traj)?;
        let dp = descent_problem(config, model, &traj, &grads)?;
        let (dir, _) = descent_direction(&dp)?;
        let slope = grads.dot(&dir.z, &dir.v);
        let ls = line_search(config, model, objective, &traj, j, &dir, slope, budget)?;
        if let Some((jn, plan)) = ls.accepted {
            traj = plan;
            j = jn;
        }
        let inj = inject_samples(&traj, j, objective, model, budget, config.inject_prob, rng)?;
        traj = inj.plan;
        j = inj.objective;

        if j < best.1 {
            best = (traj.clone(), j);
        }
        history.push(IterationRecord {
            iteration,
            objective: j,
            best_objective: best.1,
            gamma: ls.gamma,
            injection: inj.outcome,
        });

        if ls.gamma == 0.0 && !inj.outcome.accepted {
            converged = true;
            break;
        }
        let rel = (j_prev - j).abs() / j_prev.abs().max(f64::MIN_POSITIVE);
        stalled = if rel < config.convergence_tol { stalled + 1 } else { 0 };
        if stalled >= config.convergence_window {
            converged = true;
            break;
        }
    }

    let (plan, _) = best;
    let objective = objective.evaluate(&plan)?;
    Ok(OptimizeResult {
        plan,
        objective,
        initial_objective,
        history,
        converged,
    })
}

/// `optimize` with a fresh generator seeded from `config.seed`.
pub fn optimize_seeded(
    config: &OptimizerConfig,
    model: &DynamicsModel,
    objective: &Objective<'_>,
    start: &DVector<f64>,
    horizon: usize,
    budget: Option<&PlanBudget>,
    init: Option<Trajectory>,
) -> Result<OptimizeResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    optimize(config, model, objective, start, horizon, budget, init, &mut rng)
}
