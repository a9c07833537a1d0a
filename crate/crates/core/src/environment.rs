//! Rover exploration ground truth: map generation, sensors and the cost model.
//!
//! Maps are `n x n` grids over the continuous region `[0, n]^2`. Cell `(ix, iy)`
//! has its centre at `(ix + 0.5, iy + 0.5)` and is stored row-major by `iy`.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::gp::{Kernel, Measurement, Point};

#[derive(Clone, Debug, PartialEq)]
pub struct EnvironmentMap {
    pub size_n: usize,
    pub num_types: usize,
    /// `None` for maps drawn from a GP prior.
    pub smoothing_prob: Option<f64>,
    pub seed: u64,
    cells: Vec<f64>,
}

/// The `beta` measurement-type values `1, 2, ..., beta`.
pub fn type_values(beta: usize) -> Vec<f64> {
    (1..=beta).map(|k| k as f64).collect()
}

/// Mean of the measurement-type values; the default constant GP mean.
pub fn type_mean(beta: usize) -> f64 {
    (beta as f64 + 1.0) / 2.0
}

fn check_dims(n: usize, beta: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::arg(format!("grid size must be >= 2, got {n}")));
    }
    if beta < 2 {
        return Err(Error::arg(format!("number of measurement types must be >= 2, got {beta}")));
    }
    Ok(())
}

/// Spatially correlated map: i.i.d. uniform draws over the `beta` type values,
/// then one row-major pass in which each cell is replaced, with probability
/// `p_g`, by the mean of its (existing) 4-connected neighbours. The pass is in
/// place, so later cells see already-smoothed neighbours.
pub fn generate_map(n: usize, beta: usize, p_g: f64, seed: u64) -> Result<EnvironmentMap> {
    check_dims(n, beta)?;
    if !(0.0..=1.0).contains(&p_g) {
        return Err(Error::arg(format!("smoothing probability must lie in [0, 1], got {p_g}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = type_values(beta);
    let mut cells: Vec<f64> = (0..n * n).map(|_| values[rng.random_range(0..beta)]).collect();

    smooth_pass(&mut cells, n, p_g, &mut rng);
    Ok(EnvironmentMap {
        size_n: n,
        num_types: beta,
        smoothing_prob: Some(p_g),
        seed,
        cells,
    })
}

/// One in-place, row-major neighbour-averaging pass over an `n x n` grid.
pub fn smooth_pass<R: Rng + ?Sized>(cells: &mut [f64], n: usize, p_g: f64, rng: &mut R) {
    for iy in 0..n {
        for ix in 0..n {
            // draw unconditionally so the stream layout does not depend on p_g
            let u: f64 = rng.random();
            if u < p_g {
                let mut sum = 0.0;
                let mut count = 0usize;
                for (dx, dy) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                    let (jx, jy) = (ix as i64 + dx, iy as i64 + dy);
                    if jx >= 0 && jy >= 0 && (jx as usize) < n && (jy as usize) < n {
                        sum += cells[jy as usize * n + jx as usize];
                        count += 1;
                    }
                }
                cells[iy * n + ix] = sum / count as f64;
            }
        }
    }
}

/// Map drawn from the zero-mean GP prior on cell centres, shifted by the mean
/// of the type values. Values are not clamped, so the draw keeps the kernel's
/// covariance exactly.
pub fn generate_gp_map(n: usize, beta: usize, kernel: &Kernel, seed: u64) -> Result<EnvironmentMap> {
    check_dims(n, beta)?;
    let centers = cell_centers(n);
    let mut gram = kernel.matrix(&centers, &centers);
    let jitter = 1e-8 * kernel.signal_var;
    for i in 0..gram.nrows() {
        gram[(i, i)] += jitter;
    }
    let chol = nalgebra::Cholesky::new(gram).ok_or_else(|| Error::Conditioning {
        detail: "cholesky of the map prior failed".into(),
        duplicates: Vec::new(),
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DVector::from_fn(n * n, |_, _| StandardNormal.sample(&mut rng));
    let draw = chol.l() * z;
    let offset = type_mean(beta);
    Ok(EnvironmentMap {
        size_n: n,
        num_types: beta,
        smoothing_prob: None,
        seed,
        cells: draw.iter().map(|v| v + offset).collect(),
    })
}

/// Cell centres in storage order.
pub fn cell_centers(n: usize) -> Vec<Point> {
    let mut pts = Vec::with_capacity(n * n);
    for iy in 0..n {
        for ix in 0..n {
            pts.push(Point::new(ix as f64 + 0.5, iy as f64 + 0.5));
        }
    }
    pts
}

impl EnvironmentMap {
    pub fn from_cells(
        size_n: usize,
        num_types: usize,
        smoothing_prob: Option<f64>,
        seed: u64,
        cells: Vec<f64>,
    ) -> Result<Self> {
        check_dims(size_n, num_types)?;
        if cells.len() != size_n * size_n {
            return Err(Error::arg(format!(
                "expected {} cells, got {}",
                size_n * size_n,
                cells.len()
            )));
        }
        Ok(Self {
            size_n,
            num_types,
            smoothing_prob,
            seed,
            cells,
        })
    }

    pub fn extent(&self) -> f64 {
        self.size_n as f64
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn cell(&self, ix: usize, iy: usize) -> f64 {
        self.cells[iy * self.size_n + ix]
    }

    pub fn contains(&self, p: &Point) -> bool {
        let e = self.extent();
        p.x >= 0.0 && p.y >= 0.0 && p.x <= e && p.y <= e
    }

    /// Ground truth at a continuous location by bilinear interpolation between
    /// cell centres; constant extrapolation in the half-cell border.
    pub fn value_at(&self, p: &Point) -> Result<f64> {
        if !self.contains(p) {
            return Err(Error::OutOfRegion {
                x: p.x,
                y: p.y,
                extent: self.extent(),
            });
        }
        let n = self.size_n;
        let top = (n - 1) as f64;
        let u = (p.x - 0.5).clamp(0.0, top);
        let v = (p.y - 0.5).clamp(0.0, top);
        let i0 = (u.floor() as usize).min(n - 2);
        let j0 = (v.floor() as usize).min(n - 2);
        let fu = u - i0 as f64;
        let fv = v - j0 as f64;
        let c00 = self.cell(i0, j0);
        let c10 = self.cell(i0 + 1, j0);
        let c01 = self.cell(i0, j0 + 1);
        let c11 = self.cell(i0 + 1, j0 + 1);
        // exact at cell centres
        if fu == 0.0 && fv == 0.0 {
            return Ok(c00);
        }
        Ok((1.0 - fv) * ((1.0 - fu) * c00 + fu * c10) + fv * ((1.0 - fu) * c01 + fu * c11))
    }

    /// Plain-text form: a header line `n beta p_g seed`, then `n` rows of `n`
    /// values (row `iy = 0` first). GP-sampled maps write `NaN` for `p_g`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let p_g = self.smoothing_prob.unwrap_or(f64::NAN);
        let _ = writeln!(out, "{} {} {} {}", self.size_n, self.num_types, p_g, self.seed);
        for row in self.cells.chunks(self.size_n) {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or("empty map file")?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(format!("header must have 4 fields, got {}", fields.len()));
        }
        let n: usize = fields[0].parse().map_err(|e| format!("bad n: {e}"))?;
        let beta: usize = fields[1].parse().map_err(|e| format!("bad beta: {e}"))?;
        let p_g: f64 = fields[2].parse().map_err(|e| format!("bad p_g: {e}"))?;
        let seed: u64 = fields[3].parse().map_err(|e| format!("bad seed: {e}"))?;
        let mut cells = Vec::with_capacity(n * n);
        for (row_idx, line) in lines.enumerate() {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| format!("row {row_idx}: {e}"))?;
            if row.len() != n {
                return Err(format!("row {row_idx} has {} values, expected {n}", row.len()));
            }
            cells.extend(row);
        }
        let smoothing = if p_g.is_nan() { None } else { Some(p_g) };
        Self::from_cells(n, beta, smoothing, seed, cells).map_err(|e| e.to_string())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|detail| Error::Parse {
            path: path.to_path_buf(),
            detail,
        })
    }

    /// Cells as a matrix indexed `(iy, ix)`.
    pub fn as_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.size_n, self.size_n, &self.cells)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SensorKind {
    Spectrometer,
    Drill,
}

impl SensorKind {
    pub const ALL: [SensorKind; 2] = [SensorKind::Spectrometer, SensorKind::Drill];
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensorModel {
    pub spectrometer_noise_sd: f64,
    pub drill_noise_var: f64,
    pub spectrometer_cost: f64,
    pub drill_cost: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            spectrometer_noise_sd: 1.0,
            drill_noise_var: 1e-9,
            spectrometer_cost: 0.0,
            drill_cost: 3.0,
        }
    }
}

impl SensorModel {
    pub fn new(spectrometer_noise_sd: f64, drill_noise_var: f64, spectrometer_cost: f64, drill_cost: f64) -> Result<Self> {
        let s = Self {
            spectrometer_noise_sd,
            drill_noise_var,
            spectrometer_cost,
            drill_cost,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spectrometer_noise_sd > 0.0) {
            return Err(Error::arg("spectrometer noise sd must be positive"));
        }
        if !(self.drill_noise_var >= 0.0 && self.drill_noise_var < self.spectrometer_noise_sd.powi(2)) {
            return Err(Error::arg("drill noise variance must lie in [0, sigma_s^2)"));
        }
        if !(self.spectrometer_cost >= 0.0 && self.drill_cost > self.spectrometer_cost) {
            return Err(Error::arg("sensor costs must satisfy 0 <= c_s < c_d"));
        }
        Ok(())
    }

    pub fn noise_var(&self, kind: SensorKind) -> f64 {
        match kind {
            SensorKind::Spectrometer => self.spectrometer_noise_sd * self.spectrometer_noise_sd,
            SensorKind::Drill => self.drill_noise_var,
        }
    }

    pub fn cost(&self, kind: SensorKind) -> f64 {
        match kind {
            SensorKind::Spectrometer => self.spectrometer_cost,
            SensorKind::Drill => self.drill_cost,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BudgetModel {
    pub total_budget: f64,
    pub movement_cost_per_unit: f64,
}

impl BudgetModel {
    pub fn new(total_budget: f64, movement_cost_per_unit: f64) -> Result<Self> {
        if !(total_budget > 0.0 && total_budget.is_finite()) {
            return Err(Error::arg(format!("budget must be positive and finite, got {total_budget}")));
        }
        if !(movement_cost_per_unit > 0.0) {
            return Err(Error::arg("movement cost per unit must be positive"));
        }
        Ok(Self {
            total_budget,
            movement_cost_per_unit,
        })
    }

    pub fn movement_cost(&self, from: &Point, to: &Point) -> f64 {
        self.movement_cost_per_unit * (to - from).norm()
    }
}

/// Reads the ground truth at `location` with the given sensor. The
/// spectrometer adds `N(0, σ_s²)` noise; the drill returns the exact value.
pub fn sense<R: Rng + ?Sized>(
    map: &EnvironmentMap,
    location: &Point,
    kind: SensorKind,
    sensors: &SensorModel,
    rng: &mut R,
) -> Result<Measurement> {
    let truth = map.value_at(location)?;
    let value = match kind {
        SensorKind::Spectrometer => {
            let z: f64 = StandardNormal.sample(rng);
            truth + sensors.spectrometer_noise_sd * z
        }
        SensorKind::Drill => truth,
    };
    Measurement::new(*location, value, sensors.noise_var(kind))
}

/// Movement cost along consecutive knots plus the sensing cost of every knot.
pub fn path_cost(traj: &Trajectory, budget: &BudgetModel, sensors: &SensorModel) -> f64 {
    let positions = traj.positions();
    let movement: f64 = positions
        .windows(2)
        .map(|w| budget.movement_cost(&w[0], &w[1]))
        .sum();
    let sensing: f64 = traj.sensor_types.iter().map(|&k| sensors.cost(k)).sum();
    movement + sensing
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_smoothing_keeps_iid_type_values() {
        let m = generate_map(12, 4, 0.0, 3).unwrap();
        let vals = type_values(4);
        assert!(m.cells().iter().all(|c| vals.contains(c)));
    }

    #[test]
    fn constant_draw_is_fixed_point_of_smoothing() {
        let mut cells = vec![3.0; 36];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        smooth_pass(&mut cells, 6, 1.0, &mut rng);
        assert!(cells.iter().all(|&c| c == 3.0));
    }

    #[test]
    fn smoothed_cells_stay_in_convex_hull() {
        for seed in 0..20 {
            let m = generate_map(10, 4, 0.95, seed).unwrap();
            assert!(m.cells().iter().all(|&c| (1.0..=4.0).contains(&c)));
        }
    }

    #[test]
    fn invalid_map_parameters() {
        assert!(generate_map(1, 4, 0.5, 0).is_err());
        assert!(generate_map(5, 1, 0.5, 0).is_err());
        assert!(generate_map(5, 4, 1.5, 0).is_err());
    }

    #[test]
    fn drill_at_cell_center_is_exact() {
        let m = generate_map(8, 4, 0.95, 11).unwrap();
        let sensors = SensorModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (idx, c) in cell_centers(8).iter().enumerate() {
            let meas = sense(&m, c, SensorKind::Drill, &sensors, &mut rng).unwrap();
            assert_eq!(meas.value, m.cells()[idx]);
            assert_eq!(meas.noise_var, sensors.drill_noise_var);
        }
    }

    #[test]
    fn bilinear_midpoint_and_out_of_region() {
        let m = EnvironmentMap::from_cells(2, 2, Some(0.0), 0, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((m.value_at(&Point::new(1.0, 1.0)).unwrap() - 2.5).abs() < 1e-15);
        assert!((m.value_at(&Point::new(1.0, 0.5)).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(m.value_at(&Point::new(0.0, 0.0)).unwrap(), 1.0);
        assert!(matches!(
            m.value_at(&Point::new(-0.1, 1.0)),
            Err(Error::OutOfRegion { .. })
        ));
    }

    #[test]
    fn spectrometer_noiseless_limit() {
        let m = generate_map(6, 4, 0.95, 2).unwrap();
        let sensors = SensorModel::new(1e-12, 0.0, 0.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = Point::new(2.3, 4.1);
        let meas = sense(&m, &p, SensorKind::Spectrometer, &sensors, &mut rng).unwrap();
        assert!((meas.value - m.value_at(&p).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn sensor_model_invariants() {
        assert!(SensorModel::new(1.0, 1e-9, 0.0, 3.0).is_ok());
        assert!(SensorModel::new(0.1, 0.5, 0.0, 3.0).is_err());
        assert!(SensorModel::new(1.0, 0.0, 3.0, 3.0).is_err());
    }

    #[test]
    fn map_text_roundtrip_is_exact() {
        let m = generate_map(7, 3, 0.7, 42).unwrap();
        let back = EnvironmentMap::from_text(&m.to_text()).unwrap();
        assert_eq!(m, back);
        let k = Kernel::squared_exponential(2.0, 1.0).unwrap();
        let g = generate_gp_map(5, 4, &k, 8).unwrap();
        let back = EnvironmentMap::from_text(&g.to_text()).unwrap();
        assert_eq!(g.cells(), back.cells());
        assert!(back.smoothing_prob.is_none());
    }

    #[test]
    fn malformed_map_text() {
        assert!(EnvironmentMap::from_text("").is_err());
        assert!(EnvironmentMap::from_text("2 2 0.5\n1 2\n3 4\n").is_err());
        assert!(EnvironmentMap::from_text("2 2 0.5 1\n1 2\n3\n").is_err());
        assert!(EnvironmentMap::from_text("2 2 0.5 1\n1 2\n").is_err());
    }
}
