//! Experiment configuration: a flat TOML table. Every key is optional;
//! unknown keys are rejected.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{DynamicsModel, ModelKind};
use crate::environment::{type_mean, BudgetModel, SensorModel};
use crate::error::{Error, Result};
use crate::gp::{GpBelief, Kernel, Point};
use crate::objective::{GradientMode, ObjectiveParams, Region};
use crate::optimizer::{LineSearchParams, OptimizerConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Replan after every executed step.
    GpPto,
    /// Plan once, then execute.
    GpPtoOffline,
    Random,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::GpPto, Policy::GpPtoOffline, Policy::Random];

    pub fn name(self) -> &'static str {
        match self {
            Policy::GpPto => "gp_pto",
            Policy::GpPtoOffline => "gp_pto_offline",
            Policy::Random => "random",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown policy {s:?} (expected gp_pto, gp_pto_offline or random)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    SingleIntegrator,
    DoubleIntegrator,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientName {
    Analytic,
    FiniteDifference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    // environment
    pub grid_size: usize,
    pub num_types: usize,
    pub smoothing_prob: f64,
    pub gp_map: bool,

    // sweep
    pub budgets: Vec<f64>,
    pub sigma_s: Vec<f64>,
    pub policies: Vec<Policy>,
    pub runs_per_cell: usize,
    /// First episode seed; episodes use `seed, seed + 1, ...`.
    pub seed: u64,
    /// Explicit episode seeds; overrides `seed` and `runs_per_cell`.
    pub seeds: Option<Vec<u64>>,
    pub threads: Option<usize>,

    // belief
    pub length_scale: f64,
    pub signal_var: f64,
    /// Constant prior mean; defaults to the mean of the type values.
    pub mean_const: Option<f64>,
    pub jitter: f64,

    // sensors and cost
    pub drill_noise_var: f64,
    pub spectrometer_cost: f64,
    pub drill_cost: f64,
    pub movement_cost: f64,

    // motion
    pub model: ModelName,
    pub dt: f64,
    pub u_max: f64,
    /// Defaults to the centre of the first cell.
    pub start: Option<[f64; 2]>,
    /// Defaults to the centre of the last cell.
    pub goal: Option<[f64; 2]>,
    pub goal_tolerance: f64,

    // objective
    pub q: f64,
    pub q_f_position: f64,
    pub q_f_velocity: f64,
    pub r_weight: f64,
    pub boundary_weight: f64,
    pub gradient: GradientName,

    // optimizer
    pub q_n: f64,
    pub r_n: f64,
    pub gamma0: f64,
    pub tau: f64,
    pub rho: f64,
    pub max_backtracks: usize,
    pub inject_prob: f64,
    pub init_perturbation: f64,
    pub max_iters_online: usize,
    pub max_iters_offline: usize,
    pub convergence_tol: f64,
    pub convergence_window: usize,

    // metrics
    /// Score expected improvement for maximization instead of minimization.
    pub ei_maximize: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let ls = LineSearchParams::default();
        let sensors = SensorModel::default();
        Self {
            grid_size: 10,
            num_types: 4,
            smoothing_prob: 0.95,
            gp_map: false,
            budgets: vec![60.0],
            sigma_s: vec![1.0],
            policies: vec![Policy::GpPto, Policy::Random],
            runs_per_cell: 50,
            seed: 0,
            seeds: None,
            threads: None,
            length_scale: 1.0,
            signal_var: 1.0,
            mean_const: None,
            jitter: 1e-8,
            drill_noise_var: sensors.drill_noise_var,
            spectrometer_cost: sensors.spectrometer_cost,
            drill_cost: sensors.drill_cost,
            movement_cost: 1.0,
            model: ModelName::SingleIntegrator,
            dt: 1.0,
            u_max: 1.0,
            start: None,
            goal: None,
            goal_tolerance: 0.5,
            q: 1.0,
            q_f_position: 100.0,
            q_f_velocity: 1.0,
            r_weight: 0.1,
            boundary_weight: 100.0,
            gradient: GradientName::Analytic,
            q_n: 1.0,
            r_n: 0.1,
            gamma0: ls.gamma0,
            tau: ls.tau,
            rho: ls.rho,
            max_backtracks: ls.max_backtracks,
            inject_prob: 0.05,
            init_perturbation: 0.1,
            max_iters_online: 50,
            max_iters_offline: 5000,
            convergence_tol: 1e-4,
            convergence_window: 3,
            ei_maximize: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Episode seeds, in order.
    pub fn episode_seeds(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => (0..self.runs_per_cell as u64).map(|i| self.seed.wrapping_add(i)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.budgets.is_empty() || self.sigma_s.is_empty() || self.policies.is_empty() {
            return bad("budgets, sigma_s and policies must be nonempty");
        }
        if self.runs_per_cell == 0 && self.seeds.is_none() {
            return bad("runs_per_cell must be >= 1");
        }
        if matches!(&self.seeds, Some(s) if s.is_empty()) {
            return bad("seeds must be nonempty when given");
        }
        if self.threads == Some(0) {
            return bad("threads must be >= 1");
        }
        if !(self.goal_tolerance >= 0.0) {
            return bad("goal_tolerance must be nonnegative");
        }
        // build everything once so that range errors surface here
        for &b in &self.budgets {
            for &s in &self.sigma_s {
                self.episode(b, s)?;
            }
        }
        Ok(())
    }

    fn point(&self, p: Option<[f64; 2]>, default: f64) -> Point {
        p.map(|[x, y]| Point::new(x, y)).unwrap_or_else(|| Point::new(default, default))
    }

    /// Fully resolved settings for one sweep cell.
    pub fn episode(&self, budget: f64, sigma_s: f64) -> Result<EpisodeConfig> {
        let n = self.grid_size;
        let extent = n as f64;
        let kernel = Kernel::squared_exponential(self.length_scale, self.signal_var)?;
        let mean = self.mean_const.unwrap_or_else(|| type_mean(self.num_types));
        let belief = GpBelief::new(kernel, mean, crate::environment::cell_centers(n), self.jitter)?;
        let sensors = SensorModel::new(sigma_s, self.drill_noise_var, self.spectrometer_cost, self.drill_cost)?;
        let budget_model = BudgetModel::new(budget, self.movement_cost)?;
        let kind = match self.model {
            ModelName::SingleIntegrator => ModelKind::SingleIntegrator,
            ModelName::DoubleIntegrator => ModelKind::DoubleIntegrator,
        };
        let model = DynamicsModel::new(kind, self.dt, self.u_max)?;
        let start = self.point(self.start, 0.5);
        let goal = self.point(self.goal, extent - 0.5);
        let region = Region::square(extent);
        if !region.contains(&start) || !region.contains(&goal) {
            return Err(Error::Config("start and goal must lie inside the region".into()));
        }

        let mut params = ObjectiveParams::defaults(&model, &goal, region);
        params.q = self.q;
        let sd = model.state_dim();
        params.q_f = DMatrix::from_diagonal(&DVector::from_fn(sd, |i, _| {
            if i < 2 {
                self.q_f_position
            } else {
                self.q_f_velocity
            }
        }));
        params.r_t = DMatrix::identity(2, 2) * self.r_weight;
        params.boundary_weight = self.boundary_weight;
        params.validate()?;

        let mut online = OptimizerConfig::online(&model);
        online.line_search = LineSearchParams {
            gamma0: self.gamma0,
            tau: self.tau,
            rho: self.rho,
            max_backtracks: self.max_backtracks,
        };
        online.q_n = DMatrix::identity(sd, sd) * self.q_n;
        online.r_n = DMatrix::identity(2, 2) * self.r_n;
        online.inject_prob = self.inject_prob;
        online.init_perturbation = self.init_perturbation;
        online.max_iters = self.max_iters_online;
        online.convergence_tol = self.convergence_tol;
        online.convergence_window = self.convergence_window;
        online.validate()?;
        let offline = OptimizerConfig {
            max_iters: self.max_iters_offline,
            ..online.clone()
        };

        Ok(EpisodeConfig {
            grid_size: n,
            num_types: self.num_types,
            smoothing_prob: self.smoothing_prob,
            gp_map: self.gp_map,
            belief,
            sensors,
            budget: budget_model,
            model,
            start,
            goal,
            goal_tolerance: self.goal_tolerance,
            params,
            gradient_mode: match self.gradient {
                GradientName::Analytic => GradientMode::Analytic,
                GradientName::FiniteDifference => GradientMode::FiniteDifference,
            },
            online,
            offline,
            ei_maximize: self.ei_maximize,
        })
    }
}

/// Settings for a single (budget, σ_s) cell.
#[derive(Clone, Debug)]
pub struct EpisodeConfig {
    pub grid_size: usize,
    pub num_types: usize,
    pub smoothing_prob: f64,
    pub gp_map: bool,
    /// Shared by planning and by every policy's metrics.
    pub belief: GpBelief,
    pub sensors: SensorModel,
    pub budget: BudgetModel,
    pub model: DynamicsModel,
    pub start: Point,
    pub goal: Point,
    pub goal_tolerance: f64,
    pub params: ObjectiveParams,
    pub gradient_mode: GradientMode,
    pub online: OptimizerConfig,
    pub offline: OptimizerConfig,
    pub ei_maximize: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_gives_defaults() {
        assert_eq!(ExperimentConfig::from_toml_str("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn overrides_and_round_trip() {
        let cfg = ExperimentConfig::from_toml_str(
            "budgets = [30.0, 100.0]\nsigma_s = [0.1]\npolicies = [\"random\"]\nseeds = [3, 3]\ninject_prob = 0.2\n",
        )
        .unwrap();
        assert_eq!(cfg.budgets, vec![30.0, 100.0]);
        assert_eq!(cfg.policies, vec![Policy::Random]);
        assert_eq!(cfg.episode_seeds(), vec![3, 3]);
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            ExperimentConfig::from_toml_str("budjet = 3.0"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("budgets = []").is_err());
        assert!(ExperimentConfig::from_toml_str("runs_per_cell = 0").is_err());
        assert!(ExperimentConfig::from_toml_str("inject_prob = 1.5").is_err());
        assert!(ExperimentConfig::from_toml_str("sigma_s = [0.0]").is_err());
        assert!(ExperimentConfig::from_toml_str("goal = [20.0, 1.0]").is_err());
    }

    #[test]
    fn policy_names() {
        for p in Policy::ALL {
            assert_eq!(p.name().parse::<Policy>().unwrap(), p);
        }
        assert!("mcts".parse::<Policy>().is_err());
    }
}
