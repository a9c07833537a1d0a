//! Agent motion models. Both built-in models are forward-Euler discretizations
//! `x' = x + h(x, u) Δt` with constant Jacobians, so linearization is exact.

use nalgebra::{DMatrix, DVector};

use crate::environment::SensorKind;
use crate::error::{Error, Result};
use crate::gp::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    /// state = position, control = velocity
    SingleIntegrator,
    /// state = (position, velocity), control = acceleration
    DoubleIntegrator,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DynamicsModel {
    pub kind: ModelKind,
    pub dt: f64,
    /// Per-axis control magnitude bound.
    pub u_max: f64,
}

impl Default for DynamicsModel {
    fn default() -> Self {
        Self {
            kind: ModelKind::SingleIntegrator,
            dt: 1.0,
            u_max: 1.0,
        }
    }
}

impl DynamicsModel {
    pub fn new(kind: ModelKind, dt: f64, u_max: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::arg(format!("dt must be positive, got {dt}")));
        }
        if !(u_max > 0.0) {
            return Err(Error::arg(format!("u_max must be positive, got {u_max}")));
        }
        Ok(Self { kind, dt, u_max })
    }

    pub fn state_dim(&self) -> usize {
        match self.kind {
            ModelKind::SingleIntegrator => 2,
            ModelKind::DoubleIntegrator => 4,
        }
    }

    pub fn control_dim(&self) -> usize {
        2
    }

    /// State at rest at `p`.
    pub fn state_at(&self, p: &Point) -> DVector<f64> {
        let mut x = DVector::zeros(self.state_dim());
        x[0] = p.x;
        x[1] = p.y;
        x
    }

    fn check(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<()> {
        if x.len() != self.state_dim() || u.len() != self.control_dim() {
            return Err(Error::arg(format!(
                "dimension mismatch: state {} (want {}), control {} (want {})",
                x.len(),
                self.state_dim(),
                u.len(),
                self.control_dim()
            )));
        }
        Ok(())
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(x, u)?;
        Ok(self.step_unchecked(x, u))
    }

    pub(crate) fn step_unchecked(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let dt = self.dt;
        match self.kind {
            ModelKind::SingleIntegrator => x + u * dt,
            ModelKind::DoubleIntegrator => {
                let mut next = x.clone();
                next[0] += x[2] * dt;
                next[1] += x[3] * dt;
                next[2] += u[0] * dt;
                next[3] += u[1] * dt;
                next
            }
        }
    }

    /// Discrete Jacobians `(Ã, B̃) = (I + ∇ₓh Δt, ∇ᵤh Δt)`.
    pub fn linearize(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let dt = self.dt;
        match self.kind {
            ModelKind::SingleIntegrator => (DMatrix::identity(2, 2), DMatrix::identity(2, 2) * dt),
            ModelKind::DoubleIntegrator => {
                let mut a = DMatrix::identity(4, 4);
                a[(0, 2)] = dt;
                a[(1, 3)] = dt;
                let mut b = DMatrix::zeros(4, 2);
                b[(2, 0)] = dt;
                b[(3, 1)] = dt;
                (a, b)
            }
        }
    }

    /// `states[0] = x0`, `states[t + 1] = step(states[t], controls[t])`.
    pub fn rollout(&self, x0: &DVector<f64>, controls: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        let mut states = Vec::with_capacity(controls.len() + 1);
        states.push(x0.clone());
        for u in controls {
            let next = self.step(states.last().unwrap(), u)?;
            states.push(next);
        }
        Ok(states)
    }

    pub fn position(x: &DVector<f64>) -> Point {
        Point::new(x[0], x[1])
    }
}

/// Knot states `x_0..x_T`, controls `u_0..u_T` and per-knot sensor choices.
/// `u_T` is never used for stepping; it is kept so every per-knot sequence has
/// length `T + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub controls: Vec<DVector<f64>>,
    pub sensor_types: Vec<SensorKind>,
    pub dt: f64,
}

impl Trajectory {
    pub fn new(
        states: Vec<DVector<f64>>,
        controls: Vec<DVector<f64>>,
        sensor_types: Vec<SensorKind>,
        dt: f64,
    ) -> Result<Self> {
        if states.is_empty() || states.len() != controls.len() || states.len() != sensor_types.len() {
            return Err(Error::arg(format!(
                "trajectory lengths differ: {} states, {} controls, {} sensor types",
                states.len(),
                controls.len(),
                sensor_types.len()
            )));
        }
        Ok(Self {
            states,
            controls,
            sensor_types,
            dt,
        })
    }

    /// Rolls `controls[..T]` out from `x0`.
    pub fn from_controls(
        model: &DynamicsModel,
        x0: &DVector<f64>,
        controls: Vec<DVector<f64>>,
        sensor_types: Vec<SensorKind>,
    ) -> Result<Self> {
        let t = controls.len().saturating_sub(1);
        let states = model.rollout(x0, &controls[..t])?;
        Self::new(states, controls, sensor_types, model.dt)
    }

    /// The horizon `T` (number of knots minus one).
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    pub fn positions(&self) -> Vec<Point> {
        self.states.iter().map(DynamicsModel::position).collect()
    }

    /// Largest `‖x_{t+1} - step(x_t, u_t)‖` along the trajectory.
    pub fn dynamics_residual(&self, model: &DynamicsModel) -> f64 {
        self.states
            .windows(2)
            .zip(&self.controls)
            .map(|(w, u)| (&w[1] - model.step_unchecked(&w[0], u)).norm())
            .fold(0.0, f64::max)
    }
}
