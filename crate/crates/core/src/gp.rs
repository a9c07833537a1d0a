//! Gaussian process world belief.
//!
//! The belief is a GP with a constant mean and a squared-exponential kernel,
//! conditioned on measurements that each carry their own noise variance. The
//! noise matrix added to the Gram matrix is therefore `diag(noise_var) + jitter * I`
//! rather than a single scalar times the identity.
//!
//! Posterior variance depends only on measurement locations and noise
//! variances, never on the measured values. The planner relies on this: it
//! scores candidate trajectories without knowing what it will observe.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Vector2};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// A location in environment coordinates (grid units).
pub type Point = Vector2<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelFamily {
    SquaredExponential,
}

/// Stationary covariance function `k(x, x')`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kernel {
    pub family: KernelFamily,
    pub length_scale: f64,
    pub signal_var: f64,
}

impl Kernel {
    pub fn squared_exponential(length_scale: f64, signal_var: f64) -> Result<Self> {
        if !(length_scale > 0.0 && length_scale.is_finite()) {
            return Err(Error::arg(format!("length scale must be positive, got {length_scale}")));
        }
        if !(signal_var > 0.0 && signal_var.is_finite()) {
            return Err(Error::arg(format!("signal variance must be positive, got {signal_var}")));
        }
        Ok(Self {
            family: KernelFamily::SquaredExponential,
            length_scale,
            signal_var,
        })
    }

    #[inline]
    pub fn eval(&self, a: &Point, b: &Point) -> f64 {
        match self.family {
            KernelFamily::SquaredExponential => {
                let d2 = (a - b).norm_squared();
                self.signal_var * (-d2 / (2.0 * self.length_scale * self.length_scale)).exp()
            }
        }
    }

    /// Gradient of `k(a, b)` with respect to `a`.
    #[inline]
    pub fn grad_first(&self, a: &Point, b: &Point) -> Point {
        match self.family {
            KernelFamily::SquaredExponential => {
                let k = self.eval(a, b);
                -(a - b) * (k / (self.length_scale * self.length_scale))
            }
        }
    }

    /// Cross-covariance matrix `K(A, B)`.
    pub fn matrix(&self, a: &[Point], b: &[Point]) -> DMatrix<f64> {
        DMatrix::from_fn(a.len(), b.len(), |i, j| self.eval(&a[i], &b[j]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Measurement {
    pub location: Point,
    pub value: f64,
    pub noise_var: f64,
}

impl Measurement {
    pub fn new(location: Point, value: f64, noise_var: f64) -> Result<Self> {
        if !(location.x.is_finite() && location.y.is_finite()) {
            return Err(Error::arg("measurement location must be finite"));
        }
        if !(noise_var >= 0.0) {
            return Err(Error::arg(format!("noise variance must be >= 0, got {noise_var}")));
        }
        Ok(Self {
            location,
            value,
            noise_var,
        })
    }
}

/// Measurements in acquisition order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MeasurementSet {
    entries: Vec<Measurement>,
}

impl MeasurementSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, m: Measurement) {
        self.entries.push(m);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Measurement] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = &Measurement> {
        self.entries.iter()
    }

    pub fn locations(&self) -> Vec<Point> {
        self.entries.iter().map(|m| m.location).collect()
    }

    pub fn noise_vars(&self) -> Vec<f64> {
        self.entries.iter().map(|m| m.noise_var).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|m| m.value).collect()
    }

    /// Smallest measured value, if any.
    pub fn min_value(&self) -> Option<f64> {
        self.entries.iter().map(|m| m.value).reduce(f64::min)
    }

    pub fn is_prefix_of(&self, other: &MeasurementSet) -> bool {
        self.len() <= other.len() && self.entries[..] == other.entries[..self.len()]
    }
}

impl FromIterator<Measurement> for MeasurementSet {
    fn from_iter<I: IntoIterator<Item = Measurement>>(iter: I) -> Self {
        Self {
            entries: iter.into_iter().collect(),
        }
    }
}

impl Extend<Measurement> for MeasurementSet {
    fn extend<I: IntoIterator<Item = Measurement>>(&mut self, iter: I) {
        self.entries.extend(iter);
    }
}

/// Posterior mean and covariance over the query points.
#[derive(Clone, Debug)]
pub struct Posterior {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl Posterior {
    /// Pointwise posterior variances, with round-off negatives clamped to zero.
    pub fn variances(&self) -> DVector<f64> {
        self.cov.diagonal().map(|v| v.max(0.0))
    }
}

#[derive(Clone, Debug)]
pub struct GpBelief {
    pub kernel: Kernel,
    pub mean_const: f64,
    query_points: Vec<Point>,
    pub jitter: f64,
}

/// Gradient of the posterior trace with respect to every measurement location.
#[derive(Clone, Debug)]
pub struct TraceGradient {
    pub trace: f64,
    pub d_locations: Vec<Point>,
}

impl GpBelief {
    pub fn new(kernel: Kernel, mean_const: f64, query_points: Vec<Point>, jitter: f64) -> Result<Self> {
        if query_points.is_empty() {
            return Err(Error::arg("query point set must be nonempty"));
        }
        if query_points.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(Error::arg("query points must be finite"));
        }
        if !(jitter > 0.0) {
            return Err(Error::arg(format!("jitter must be positive, got {jitter}")));
        }
        Ok(Self {
            kernel,
            mean_const,
            query_points,
            jitter,
        })
    }

    /// Query points at the centres of an `per_axis x per_axis` lattice over `[0, extent]^2`.
    /// With `per_axis == n` and `extent == n` these are the grid-cell centres.
    pub fn lattice(extent: f64, per_axis: usize) -> Vec<Point> {
        let h = extent / per_axis as f64;
        let mut pts = Vec::with_capacity(per_axis * per_axis);
        for iy in 0..per_axis {
            for ix in 0..per_axis {
                pts.push(Point::new((ix as f64 + 0.5) * h, (iy as f64 + 0.5) * h));
            }
        }
        pts
    }

    pub fn query_points(&self) -> &[Point] {
        &self.query_points
    }

    /// `Tr(K(X*, X*))`.
    pub fn prior_trace(&self) -> f64 {
        self.query_points.iter().map(|p| self.kernel.eval(p, p)).sum()
    }

    fn factorize(&self, locations: &[Point], noise: &[f64]) -> Result<Cholesky<f64, Dyn>> {
        let mut gram = self.kernel.matrix(locations, locations);
        for (i, nv) in noise.iter().enumerate() {
            gram[(i, i)] += nv + self.jitter;
        }
        Cholesky::new(gram).ok_or_else(|| {
            let mut duplicates = Vec::new();
            for i in 0..locations.len() {
                for j in (i + 1)..locations.len() {
                    if (locations[i] - locations[j]).norm() <= 1e-9 * self.kernel.length_scale {
                        duplicates.push((i, j));
                    }
                }
            }
            Error::Conditioning {
                detail: format!("cholesky failed for {} measurements", locations.len()),
                duplicates,
            }
        })
    }

    /// Posterior mean and covariance over the query points.
    pub fn posterior(&self, m: &MeasurementSet) -> Result<Posterior> {
        let xq = &self.query_points;
        let prior_cov = self.kernel.matrix(xq, xq);
        let nq = xq.len();
        if m.is_empty() {
            return Ok(Posterior {
                mean: DVector::from_element(nq, self.mean_const),
                cov: prior_cov,
            });
        }
        let (chol, k_xq) = self.conditioned(m)?;
        let resid = DVector::from_iterator(m.len(), m.iter().map(|e| e.value - self.mean_const));
        let alpha = chol.solve(&resid);
        let mean = k_xq.tr_mul(&alpha).add_scalar(self.mean_const);

        let mut v = k_xq;
        chol.l_dirty().solve_lower_triangular_mut(&mut v);
        let mut cov = prior_cov - v.tr_mul(&v);
        // exact symmetry; the subtraction above is symmetric up to round-off only
        for i in 0..nq {
            for j in (i + 1)..nq {
                let s = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                cov[(i, j)] = s;
                cov[(j, i)] = s;
            }
        }
        Ok(Posterior { mean, cov })
    }

    /// Posterior mean only; avoids forming the query covariance.
    pub fn posterior_mean(&self, m: &MeasurementSet) -> Result<DVector<f64>> {
        let nq = self.query_points.len();
        if m.is_empty() {
            return Ok(DVector::from_element(nq, self.mean_const));
        }
        let (chol, k_xq) = self.conditioned(m)?;
        let resid = DVector::from_iterator(m.len(), m.iter().map(|e| e.value - self.mean_const));
        let alpha = chol.solve(&resid);
        Ok(k_xq.tr_mul(&alpha).add_scalar(self.mean_const))
    }

    /// Posterior mean and pointwise variances (clamped at zero), without the
    /// off-diagonal covariance.
    pub fn marginals(&self, m: &MeasurementSet) -> Result<(DVector<f64>, DVector<f64>)> {
        let xq = &self.query_points;
        let prior_var = DVector::from_iterator(xq.len(), xq.iter().map(|p| self.kernel.eval(p, p)));
        if m.is_empty() {
            return Ok((DVector::from_element(xq.len(), self.mean_const), prior_var));
        }
        let (chol, k_xq) = self.conditioned(m)?;
        let resid = DVector::from_iterator(m.len(), m.iter().map(|e| e.value - self.mean_const));
        let alpha = chol.solve(&resid);
        let mean = k_xq.tr_mul(&alpha).add_scalar(self.mean_const);
        let mut v = k_xq;
        chol.l_dirty().solve_lower_triangular_mut(&mut v);
        let var = DVector::from_iterator(
            xq.len(),
            v.column_iter().zip(prior_var.iter()).map(|(c, &p)| (p - c.norm_squared()).max(0.0)),
        );
        Ok((mean, var))
    }

    fn conditioned(&self, m: &MeasurementSet) -> Result<(Cholesky<f64, Dyn>, DMatrix<f64>)> {
        let locs = m.locations();
        let chol = self.factorize(&locs, &m.noise_vars())?;
        let k_xq = self.kernel.matrix(&locs, &self.query_points);
        Ok((chol, k_xq))
    }

    /// `Tr(Σ*)` for measurements at `locations` with the given noise variances,
    /// without forming the full posterior covariance.
    pub fn trace_at(&self, locations: &[Point], noise: &[f64]) -> Result<f64> {
        debug_assert_eq!(locations.len(), noise.len());
        let prior = self.prior_trace();
        if locations.is_empty() {
            return Ok(prior);
        }
        let chol = self.factorize(locations, noise)?;
        let mut v = self.kernel.matrix(locations, &self.query_points);
        chol.l_dirty().solve_lower_triangular_mut(&mut v);
        Ok(prior - v.norm_squared())
    }

    /// `Tr(Σ*)` together with its gradient with respect to every measurement
    /// location. Differentiates through both `K(X*, X)` and `K(X, X)`:
    ///
    /// `dTr/dx_i = -2 Σ_q W_iq ∂k(x_i, x*_q)/∂x_i + 2 Σ_{j≠i} G_ij ∂k(x_i, x_j)/∂x_i`
    ///
    /// with `W = A⁻¹ K(X, X*)`, `G = W Wᵀ` and `A` the noisy Gram matrix.
    pub fn trace_gradient(&self, locations: &[Point], noise: &[f64]) -> Result<TraceGradient> {
        let n = locations.len();
        let prior = self.prior_trace();
        if n == 0 {
            return Ok(TraceGradient {
                trace: prior,
                d_locations: Vec::new(),
            });
        }
        let chol = self.factorize(locations, noise)?;
        let k_xq = self.kernel.matrix(locations, &self.query_points);
        let w = chol.solve(&k_xq);
        let reduction = k_xq.component_mul(&w).sum();
        let g = &w * w.transpose();

        let mut d_locations = vec![Point::zeros(); n];
        for (i, d) in d_locations.iter_mut().enumerate() {
            let xi = &locations[i];
            let mut acc = Point::zeros();
            for (q, xq) in self.query_points.iter().enumerate() {
                acc -= self.kernel.grad_first(xi, xq) * (2.0 * w[(i, q)]);
            }
            for (j, xj) in locations.iter().enumerate() {
                if j != i {
                    acc += self.kernel.grad_first(xi, xj) * (2.0 * g[(i, j)]);
                }
            }
            *d = acc;
        }
        Ok(TraceGradient {
            trace: prior - reduction,
            d_locations,
        })
    }
}

/// `Tr(Σ*)`.
pub fn trace_variance(p: &Posterior) -> f64 {
    p.cov.trace()
}

/// `Tr(Σ*_{m_old}) - Tr(Σ*_{m_new})`; `m_old` must be a prefix of `m_new`.
pub fn variance_reduction(belief: &GpBelief, m_new: &MeasurementSet, m_old: &MeasurementSet) -> Result<f64> {
    if !m_old.is_prefix_of(m_new) {
        return Err(Error::arg("old measurement set is not a prefix of the new one"));
    }
    let before = belief.trace_at(&m_old.locations(), &m_old.noise_vars())?;
    let after = belief.trace_at(&m_new.locations(), &m_new.noise_vars())?;
    Ok(before - after)
}

/// Expected improvement below `y_min` for one point with posterior mean `mu`
/// and variance `var`:
///
/// `E[I] = (y_min - mu) P(y <= y_min) + var * N(y_min | mu, var)`
///
/// The density term carries a `1/σ` factor, so `var * N(y_min | mu, var)`
/// equals the familiar `σ φ(z)`.
pub fn expected_improvement_point(mu: f64, var: f64, y_min: f64) -> f64 {
    let var = var.max(0.0);
    let gap = y_min - mu;
    if var == 0.0 {
        return gap.max(0.0);
    }
    let sd = var.sqrt();
    let z = gap / sd;
    let cdf = 0.5 * erfc(-z / std::f64::consts::SQRT_2);
    let density = (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
    gap * cdf + var * density
}

/// Expected improvement at every query point of `p`.
pub fn expected_improvement(p: &Posterior, y_min: f64) -> DVector<f64> {
    let var = p.cov.diagonal();
    DVector::from_iterator(
        p.mean.len(),
        p.mean
            .iter()
            .zip(var.iter())
            .map(|(&mu, &v)| expected_improvement_point(mu, v, y_min)),
    )
}
