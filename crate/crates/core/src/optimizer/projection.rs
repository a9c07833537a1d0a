//! Projection of a candidate `(α, μ)` onto the dynamics by the feedback
//! rollout `ũₜ = μₜ + 𝒦ₜ(αₜ − x̃ₜ)`, `x̃_{t+1} = step(x̃ₜ, ũₜ)`.

use nalgebra::{DMatrix, DVector};

use super::riccati::lqr_gains;
use crate::dynamics::{DynamicsModel, Trajectory};
use crate::environment::SensorKind;
use crate::error::{Error, Result};

/// Gains of the tracking LQR about the candidate.
pub fn projection_gains(
    model: &DynamicsModel,
    alpha: &[DVector<f64>],
    mu: &[DVector<f64>],
    q_n: &DMatrix<f64>,
    r_n: &DMatrix<f64>,
) -> Result<Vec<DMatrix<f64>>> {
    let (a, b): (Vec<_>, Vec<_>) = alpha.iter().zip(mu).map(|(x, u)| model.linearize(x, u)).unzip();
    lqr_gains(&a, &b, q_n, r_n)
}

/// Returns `(x̃, ũ)` with `x̃₀ = x0`.
pub fn project(
    model: &DynamicsModel,
    x0: &DVector<f64>,
    alpha: &[DVector<f64>],
    mu: &[DVector<f64>],
    gains: &[DMatrix<f64>],
) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)> {
    let len = alpha.len();
    if len == 0 || mu.len() != len || gains.len() != len {
        return Err(Error::arg("projection inputs must be nonempty and of equal length"));
    }
    let mut xs = Vec::with_capacity(len);
    let mut us = Vec::with_capacity(len);
    xs.push(x0.clone());
    for t in 0..len {
        let u = &mu[t] + &gains[t] * (&alpha[t] - &xs[t]);
        if t + 1 < len {
            xs.push(model.step(&xs[t], &u)?);
        }
        us.push(u);
    }
    Ok((xs, us))
}

/// Projection followed by packing into a trajectory.
pub fn project_candidate(
    model: &DynamicsModel,
    x0: &DVector<f64>,
    alpha: &[DVector<f64>],
    mu: &[DVector<f64>],
    sensor_types: Vec<SensorKind>,
    q_n: &DMatrix<f64>,
    r_n: &DMatrix<f64>,
) -> Result<Trajectory> {
    let gains = projection_gains(model, alpha, mu, q_n, r_n)?;
    let (xs, us) = project(model, x0, alpha, mu, &gains)?;
    Trajectory::new(xs, us, sensor_types, model.dt)
}
