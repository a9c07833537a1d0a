use nalgebra::DVector;

use crate::environment::EnvironmentMap;
use crate::error::{Error, Result};
use crate::gp::{expected_improvement_point, GpBelief, MeasurementSet};

/// Root-mean-square difference between the posterior mean and the true
/// cell values, both in cell order.
pub fn compute_rmse(mean: &DVector<f64>, truth: &[f64]) -> Result<f64> {
    if mean.len() != truth.len() || truth.is_empty() {
        return Err(Error::arg(format!(
            "rmse needs equal nonempty lengths, got {} and {}",
            mean.len(),
            truth.len()
        )));
    }
    let sq: f64 = mean.iter().zip(truth).map(|(m, t)| (m - t) * (m - t)).sum();
    Ok((sq / truth.len() as f64).sqrt())
}

/// Belief quality after some set of executed measurements.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricSnapshot {
    pub trace: f64,
    pub rmse: f64,
    /// Mean expected improvement over the query points; 0 with no data.
    pub ei_mean: f64,
}

/// Scores `executed` against `map`. The belief must query the cell centres.
/// With `ei_maximize` the improvement is measured above the largest
/// observation instead of below the smallest.
pub fn snapshot(
    belief: &GpBelief,
    executed: &MeasurementSet,
    map: &EnvironmentMap,
    ei_maximize: bool,
) -> Result<MetricSnapshot> {
    let (mean, var) = belief.marginals(executed)?;
    let trace = var.sum();
    let rmse = compute_rmse(&mean, map.cells())?;
    let values = executed.values();
    let ei_mean = if values.is_empty() {
        0.0
    } else {
        let total: f64 = if ei_maximize {
            let y_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            mean.iter()
                .zip(var.iter())
                .map(|(&m, &v)| expected_improvement_point(-m, v, -y_max))
                .sum()
        } else {
            let y_min = values.iter().copied().fold(f64::INFINITY, f64::min);
            mean.iter()
                .zip(var.iter())
                .map(|(&m, &v)| expected_improvement_point(m, v, y_min))
                .sum()
        };
        total / mean.len() as f64
    };
    Ok(MetricSnapshot { trace, rmse, ei_mean })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_trivial_cases() {
        let t = [1.0, 2.0, 3.0, 4.0];
        let m = DVector::from_row_slice(&t);
        assert_eq!(compute_rmse(&m, &t).unwrap(), 0.0);
        let shifted = m.add_scalar(-0.75);
        assert!((compute_rmse(&shifted, &t).unwrap() - 0.75).abs() < 1e-15);
        assert!(compute_rmse(&m, &t[..3]).is_err());
    }
}
