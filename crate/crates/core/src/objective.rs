//! Trajectory objective
//!
//! `J = -q·VR + ‖x_T - x_f‖²_{Q_f} + Σ_t ½ u_tᵀ R u_t + J_b`
//!
//! where `VR` is the drop in posterior trace obtained by adding the planned
//! samples (one per knot, noise set by the knot's sensor type) to the
//! measurements already executed, and `J_b = c_b Σ_t dist(x_t, region)²`.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{DynamicsModel, Trajectory};
use crate::environment::SensorModel;
use crate::error::{Error, Result};
use crate::gp::{GpBelief, MeasurementSet, Point};

/// Axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Region {
    pub lo: Point,
    pub hi: Point,
}

impl Region {
    pub fn square(extent: f64) -> Self {
        Self {
            lo: Point::zeros(),
            hi: Point::new(extent, extent),
        }
    }

    pub fn clamp(&self, p: &Point) -> Point {
        Point::new(p.x.clamp(self.lo.x, self.hi.x), p.y.clamp(self.lo.y, self.hi.y))
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.clamp(p) == *p
    }

    pub fn dist_squared(&self, p: &Point) -> f64 {
        (p - self.clamp(p)).norm_squared()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GradientMode {
    #[default]
    Analytic,
    /// Central differences of `evaluate`; slow, for debugging.
    FiniteDifference,
}

#[derive(Clone, Debug)]
pub struct ObjectiveParams {
    pub q: f64,
    /// Goal weight over the full state.
    pub q_f: DMatrix<f64>,
    pub r_t: DMatrix<f64>,
    pub goal: DVector<f64>,
    pub boundary_weight: f64,
    pub region: Region,
}

impl ObjectiveParams {
    /// `q = 1`, `Q_f = 100` on position (1 on velocity, if any), `R = 0.1 I`, `c_b = 100`.
    pub fn defaults(model: &DynamicsModel, goal: &Point, region: Region) -> Self {
        let n = model.state_dim();
        let mut q_f = DMatrix::identity(n, n);
        q_f[(0, 0)] = 100.0;
        q_f[(1, 1)] = 100.0;
        Self {
            q: 1.0,
            q_f,
            r_t: DMatrix::identity(2, 2) * 0.1,
            goal: model.state_at(goal),
            boundary_weight: 100.0,
            region,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q >= 0.0) {
            return Err(Error::arg("variance weight q must be nonnegative"));
        }
        if !(self.boundary_weight >= 0.0) {
            return Err(Error::arg("boundary weight must be nonnegative"));
        }
        for (name, m) in [("Q_f", &self.q_f), ("R", &self.r_t)] {
            if !m.is_square() || (m - m.transpose()).amax() > 1e-12 || m.clone().cholesky().is_none() {
                return Err(Error::WeightConfig(format!("{name} must be symmetric positive definite")));
            }
        }
        if self.q_f.nrows() != self.goal.len() {
            return Err(Error::arg("goal and Q_f dimensions differ"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveBreakdown {
    pub total: f64,
    pub variance_term: f64,
    pub goal_term: f64,
    pub control_term: f64,
    pub boundary_term: f64,
}

/// Per-knot gradients `a_t = ∇ₓJ`, `b_t = ∇ᵤJ`.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub a: Vec<DVector<f64>>,
    pub b: Vec<DVector<f64>>,
}

impl Gradients {
    /// `∇J · (z, v)`.
    pub fn dot(&self, z: &[DVector<f64>], v: &[DVector<f64>]) -> f64 {
        let sa: f64 = self.a.iter().zip(z).map(|(a, z)| a.dot(z)).sum();
        let sb: f64 = self.b.iter().zip(v).map(|(b, v)| b.dot(v)).sum();
        sa + sb
    }
}

/// The objective bound to a belief and to the measurements executed so far.
#[derive(Clone, Debug)]
pub struct Objective<'a> {
    pub params: ObjectiveParams,
    pub belief: &'a GpBelief,
    pub sensors: SensorModel,
    pub gradient_mode: GradientMode,
    fixed_locations: Vec<Point>,
    fixed_noise: Vec<f64>,
    base_trace: f64,
    plan_samples: bool,
}

impl<'a> Objective<'a> {
    pub fn new(
        params: ObjectiveParams,
        belief: &'a GpBelief,
        executed: &MeasurementSet,
        sensors: SensorModel,
    ) -> Result<Self> {
        params.validate()?;
        let fixed_locations = executed.locations();
        let fixed_noise = executed.noise_vars();
        let base_trace = belief.trace_at(&fixed_locations, &fixed_noise)?;
        Ok(Self {
            params,
            belief,
            sensors,
            gradient_mode: GradientMode::Analytic,
            fixed_locations,
            fixed_noise,
            base_trace,
            plan_samples: true,
        })
    }

    /// Knots carry no planned samples; the variance term is then identically zero.
    pub fn without_planned_samples(mut self) -> Self {
        self.plan_samples = false;
        self
    }

    pub fn with_gradient_mode(mut self, mode: GradientMode) -> Self {
        self.gradient_mode = mode;
        self
    }

    /// Posterior trace given only the executed measurements.
    pub fn base_trace(&self) -> f64 {
        self.base_trace
    }

    fn sample_set(&self, traj: &Trajectory) -> (Vec<Point>, Vec<f64>) {
        let mut locs = self.fixed_locations.clone();
        let mut noise = self.fixed_noise.clone();
        if self.plan_samples {
            locs.extend(traj.positions());
            noise.extend(traj.sensor_types.iter().map(|&k| self.sensors.noise_var(k)));
        }
        (locs, noise)
    }

    /// Variance reduction achieved by the planned samples.
    pub fn variance_reduction(&self, traj: &Trajectory) -> Result<f64> {
        if !self.plan_samples {
            return Ok(0.0);
        }
        let (locs, noise) = self.sample_set(traj);
        Ok(self.base_trace - self.belief.trace_at(&locs, &noise)?)
    }

    pub fn evaluate(&self, traj: &Trajectory) -> Result<ObjectiveBreakdown> {
        let p = &self.params;
        let variance_term = -p.q * self.variance_reduction(traj)?;
        let dx = traj.states.last().unwrap() - &p.goal;
        let goal_term = dx.dot(&(&p.q_f * &dx));
        let control_term: f64 = traj.controls.iter().map(|u| 0.5 * u.dot(&(&p.r_t * u))).sum();
        let boundary_term: f64 = p.boundary_weight
            * traj
                .states
                .iter()
                .map(|x| p.region.dist_squared(&DynamicsModel::position(x)))
                .sum::<f64>();
        Ok(ObjectiveBreakdown {
            total: variance_term + goal_term + control_term + boundary_term,
            variance_term,
            goal_term,
            control_term,
            boundary_term,
        })
    }

    pub fn gradients(&self, traj: &Trajectory) -> Result<Gradients> {
        match self.gradient_mode {
            GradientMode::Analytic => self.analytic_gradients(traj),
            GradientMode::FiniteDifference => self.fd_gradients(traj, 1e-6),
        }
    }

    fn analytic_gradients(&self, traj: &Trajectory) -> Result<Gradients> {
        let p = &self.params;
        let horizon = traj.horizon();
        let mut a: Vec<DVector<f64>> = traj.states.iter().map(|x| DVector::zeros(x.len())).collect();

        if self.plan_samples && p.q != 0.0 {
            let (locs, noise) = self.sample_set(traj);
            let tg = self.belief.trace_gradient(&locs, &noise)?;
            let offset = self.fixed_locations.len();
            for (t, at) in a.iter_mut().enumerate() {
                // J_var = -q (base - Tr), so dJ/dx = q dTr/dx
                let g = tg.d_locations[offset + t] * p.q;
                at[0] += g.x;
                at[1] += g.y;
            }
        }
        if p.boundary_weight != 0.0 {
            for (at, x) in a.iter_mut().zip(&traj.states) {
                let pos = DynamicsModel::position(x);
                let g = (pos - p.region.clamp(&pos)) * (2.0 * p.boundary_weight);
                at[0] += g.x;
                at[1] += g.y;
            }
        }
        let dx = &traj.states[horizon] - &p.goal;
        a[horizon] += (&p.q_f + p.q_f.transpose()) * dx;

        let b = traj.controls.iter().map(|u| &p.r_t * u).collect();
        Ok(Gradients { a, b })
    }

    /// Central differences of `evaluate`, treating each state and control as free.
    pub fn fd_gradients(&self, traj: &Trajectory, h: f64) -> Result<Gradients> {
        let mut work = traj.clone();
        let mut a = Vec::with_capacity(traj.states.len());
        for t in 0..traj.states.len() {
            let mut g = DVector::zeros(traj.states[t].len());
            for i in 0..g.len() {
                let orig = work.states[t][i];
                work.states[t][i] = orig + h;
                let up = self.evaluate(&work)?.total;
                work.states[t][i] = orig - h;
                let down = self.evaluate(&work)?.total;
                work.states[t][i] = orig;
                g[i] = (up - down) / (2.0 * h);
            }
            a.push(g);
        }
        let mut b = Vec::with_capacity(traj.controls.len());
        for t in 0..traj.controls.len() {
            let mut g = DVector::zeros(traj.controls[t].len());
            for i in 0..g.len() {
                let orig = work.controls[t][i];
                work.controls[t][i] = orig + h;
                let up = self.evaluate(&work)?.total;
                work.controls[t][i] = orig - h;
                let down = self.evaluate(&work)?.total;
                work.controls[t][i] = orig;
                g[i] = (up - down) / (2.0 * h);
            }
            b.push(g);
        }
        Ok(Gradients { a, b })
    }
}
