//! Backtracking step-size search on the sufficient-decrease condition
//! `J(γ) ≤ J₀ + ργ·slope`.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSearchParams {
    pub gamma0: f64,
    pub tau: f64,
    pub rho: f64,
    pub max_backtracks: usize,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        Self {
            gamma0: 1.0,
            tau: 0.5,
            rho: 1e-4,
            max_backtracks: 30,
        }
    }
}

impl LineSearchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma0 > 0.0 && self.gamma0.is_finite()) {
            return Err(Error::arg("gamma0 must be positive"));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::arg("tau must lie in (0, 1)"));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::arg("rho must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct LineSearchResult<T> {
    /// Accepted step, or 0 if none was found.
    pub gamma: f64,
    /// Objective value and payload at the accepted step.
    pub accepted: Option<(f64, T)>,
    pub trials: usize,
    /// The direction was not a descent direction; nothing was evaluated.
    pub non_descent: bool,
}

/// Tries `γ₀, τγ₀, τ²γ₀, …` (at most `max_backtracks` reductions) and returns
/// the first step satisfying the condition. `eval(γ)` returns the objective at
/// that step together with whatever the caller wants back (the projected
/// plan, typically). Non-finite objective values count as failures.
pub fn backtracking<T, F>(params: &LineSearchParams, j0: f64, slope: f64, mut eval: F) -> Result<LineSearchResult<T>>
where
    F: FnMut(f64) -> Result<(f64, T)>,
{
    if !(slope < 0.0) {
        return Ok(LineSearchResult {
            gamma: 0.0,
            accepted: None,
            trials: 0,
            non_descent: true,
        });
    }
    let mut gamma = params.gamma0;
    for k in 0..=params.max_backtracks {
        let (j, payload) = eval(gamma)?;
        if j.is_finite() && j <= j0 + params.rho * gamma * slope {
            return Ok(LineSearchResult {
                gamma,
                accepted: Some((j, payload)),
                trials: k + 1,
                non_descent: false,
            });
        }
        gamma *= params.tau;
    }
    Ok(LineSearchResult {
        gamma: 0.0,
        accepted: None,
        trials: params.max_backtracks + 1,
        non_descent: false,
    })
}
