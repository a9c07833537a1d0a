use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{EpisodeConfig, Policy};
use super::metrics::{snapshot, MetricSnapshot};
use super::random_policy::{random_policy_step, RandomPolicy};
use crate::dynamics::DynamicsModel;
use crate::environment::{generate_gp_map, generate_map, sense, EnvironmentMap, SensorKind};
use crate::error::{Error, Result};
use crate::gp::{Measurement, MeasurementSet, Point};
use crate::objective::Objective;
use crate::optimizer::{knot_count, optimize, replan_step, EpisodeState, PlanBudget, ReplanContext};

/// Independent generator streams derived from one episode seed.
pub mod streams {
    pub const MAP: u64 = 1;
    pub const SENSOR: u64 = 2;
    pub const INJECTION: u64 = 3;
    pub const RANDOM_POLICY: u64 = 4;
}

/// An executed step costing less than this fraction of one full-speed step
/// ends a replanning episode.
const STALL_FRACTION: f64 = 1e-3;

pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The ground truth for an episode seed. It depends on nothing but the seed
/// and the environment settings, so every policy sees the same map.
pub fn episode_map(cfg: &EpisodeConfig, seed: u64) -> Result<EnvironmentMap> {
    let map_seed: u64 = substream(seed, streams::MAP).random();
    if cfg.gp_map {
        generate_gp_map(cfg.grid_size, cfg.num_types, &cfg.belief.kernel, map_seed)
    } else {
        generate_map(cfg.grid_size, cfg.num_types, cfg.smoothing_prob, map_seed)
    }
}

/// One executed reading.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub position: Point,
    pub sensor: SensorKind,
    pub trace: f64,
    pub rmse: f64,
    pub ei_mean: f64,
    /// Budget used up to and including this reading.
    pub cost_spent: f64,
    /// Distance travelled before this reading.
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub policy: Policy,
    pub seed: u64,
    pub budget: f64,
    pub sigma_s: f64,
    pub prior: MetricSnapshot,
    pub steps: Vec<StepRecord>,
    pub final_position: Point,
    pub reached_goal: bool,
    pub total_cost: f64,
    pub path_length: f64,
    pub planning_time_s: f64,
    pub replans: usize,
    pub accepted_injections: usize,
    pub accepted_drill_injections: usize,
}

impl EpisodeRecord {
    pub fn final_metrics(&self) -> MetricSnapshot {
        self.steps
            .last()
            .map(|s| MetricSnapshot {
                trace: s.trace,
                rmse: s.rmse,
                ei_mean: s.ei_mean,
            })
            .unwrap_or(self.prior)
    }

    /// `1 - Tr(Σ_final) / Tr(Σ_prior)`.
    pub fn variance_reduction_fraction(&self) -> f64 {
        1.0 - self.final_metrics().trace / self.prior.trace
    }

    pub fn drills(&self) -> usize {
        self.steps.iter().filter(|s| s.sensor == SensorKind::Drill).count()
    }

    /// Where along the executed path (0 = start, 1 = end) a reading was taken.
    pub fn fraction_along(&self, step: &StepRecord) -> f64 {
        if self.path_length > 0.0 {
            (step.distance / self.path_length).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    pub fn drill_fractions(&self) -> Vec<f64> {
        self.steps
            .iter()
            .filter(|s| s.sensor == SensorKind::Drill)
            .map(|s| self.fraction_along(s))
            .collect()
    }

    /// At least one drill in each of `[0, 1/3)`, `[1/3, 2/3)` and `[2/3, 1]`.
    pub fn drill_in_each_third(&self) -> bool {
        let mut seen = [false; 3];
        for f in self.drill_fractions() {
            seen[((f * 3.0) as usize).min(2)] = true;
        }
        seen.iter().all(|&s| s)
    }
}

struct Recorder<'a> {
    cfg: &'a EpisodeConfig,
    map: &'a EnvironmentMap,
    executed: MeasurementSet,
    steps: Vec<StepRecord>,
    spent: f64,
    distance: f64,
    pos: Point,
}

impl<'a> Recorder<'a> {
    fn new(cfg: &'a EpisodeConfig, map: &'a EnvironmentMap) -> Self {
        Self {
            cfg,
            map,
            executed: MeasurementSet::new(),
            steps: Vec::new(),
            spent: 0.0,
            distance: 0.0,
            pos: cfg.start,
        }
    }

    fn record(&mut self, m: Measurement, sensor: SensorKind) -> Result<()> {
        let position = m.location;
        self.executed.push(m);
        self.spent += self.cfg.sensors.cost(sensor);
        let s = snapshot(&self.cfg.belief, &self.executed, self.map, self.cfg.ei_maximize)?;
        self.steps.push(StepRecord {
            step: self.steps.len(),
            position,
            sensor,
            trace: s.trace,
            rmse: s.rmse,
            ei_mean: s.ei_mean,
            cost_spent: self.spent,
            distance: self.distance,
        });
        Ok(())
    }

    fn sense<R: Rng + ?Sized>(&mut self, sensor: SensorKind, rng: &mut R) -> Result<()> {
        let m = sense(self.map, &self.pos, sensor, &self.cfg.sensors, rng)?;
        self.record(m, sensor)
    }

    fn move_to(&mut self, p: Point) {
        let d = (p - self.pos).norm();
        self.distance += d;
        self.spent += self.cfg.budget.movement_cost_per_unit * d;
        self.pos = p;
    }

    fn affordable(&self, extra: f64) -> bool {
        self.spent + extra <= self.cfg.budget.total_budget
    }

    /// Final approach for the planners: read at the current position if
    /// that has not happened yet, walk straight to the goal, read there.
    /// Every part is skipped if it would break the budget.
    fn close<R: Rng + ?Sized>(&mut self, sensed_here: bool, rng: &mut R) -> Result<()> {
        let c = self.cfg.budget.movement_cost_per_unit;
        let c_s = self.cfg.sensors.cost(SensorKind::Spectrometer);
        let d = (self.cfg.goal - self.pos).norm();
        if !sensed_here && self.affordable(c_s + c * d) {
            self.sense(SensorKind::Spectrometer, rng)?;
        }
        if d > 1e-12 && self.affordable(c * d) {
            self.move_to(self.cfg.goal);
            if self.affordable(c_s) {
                self.sense(SensorKind::Spectrometer, rng)?;
            }
        }
        Ok(())
    }

    fn finish(self, policy: Policy, seed: u64, prior: MetricSnapshot) -> EpisodeRecord {
        EpisodeRecord {
            policy,
            seed,
            budget: self.cfg.budget.total_budget,
            sigma_s: self.cfg.sensors.spectrometer_noise_sd,
            prior,
            steps: self.steps,
            final_position: self.pos,
            reached_goal: (self.pos - self.cfg.goal).norm() <= self.cfg.goal_tolerance,
            total_cost: self.spent,
            path_length: self.distance,
            planning_time_s: 0.0,
            replans: 0,
            accepted_injections: 0,
            accepted_drill_injections: 0,
        }
    }
}

/// Runs one episode. Deterministic in `seed` (apart from the timing field).
pub fn run_episode(cfg: &EpisodeConfig, policy: Policy, seed: u64) -> Result<EpisodeRecord> {
    let map = episode_map(cfg, seed)?;
    run_episode_on(cfg, &map, policy, seed)
}

/// `run_episode` against a given ground truth.
pub fn run_episode_on(cfg: &EpisodeConfig, map: &EnvironmentMap, policy: Policy, seed: u64) -> Result<EpisodeRecord> {
    if map.size_n != cfg.grid_size {
        return Err(Error::arg("map size differs from the configured grid size"));
    }
    let c = cfg.budget.movement_cost_per_unit;
    let b = cfg.budget.total_budget;
    let straight = c * (cfg.goal - cfg.start).norm();
    if straight + cfg.sensors.spectrometer_cost > b {
        return Err(Error::Infeasible(format!(
            "budget {b} does not cover the straight path to the goal ({straight:.3})"
        )));
    }
    let prior = snapshot(&cfg.belief, &MeasurementSet::new(), map, cfg.ei_maximize)?;
    let mut sensor_rng = substream(seed, streams::SENSOR);
    let mut rec = Recorder::new(cfg, map);

    let mut planning = 0.0;
    let mut replans = 0;
    let mut injections = (0, 0);
    match policy {
        Policy::GpPto => {
            let mut inject_rng = substream(seed, streams::INJECTION);
            let ctx = ReplanContext {
                model: &cfg.model,
                config: &cfg.online,
                params: &cfg.params,
                belief: &cfg.belief,
                sensors: cfg.sensors,
                movement_cost: c,
                map,
                gradient_mode: cfg.gradient_mode,
            };
            let mut st = EpisodeState::new(cfg.model.state_at(&cfg.start), b);
            loop {
                let t0 = Instant::now();
                let out = replan_step(&ctx, &mut st, &mut inject_rng, &mut sensor_rng)?;
                planning += t0.elapsed().as_secs_f64();
                let Some(out) = out else { break };
                replans += 1;
                injections.0 += out.result.accepted_injections();
                injections.1 += out.result.accepted_drill_injections();
                let before = rec.spent;
                rec.record(out.measurement, out.kind)?;
                rec.move_to(out.moved_to);
                // a plan that neither moves nor pays for sensing would repeat forever
                if rec.spent - before < STALL_FRACTION * c * cfg.model.u_max * cfg.model.dt {
                    break;
                }
            }
            rec.close(false, &mut sensor_rng)?;
        }
        Policy::GpPtoOffline => {
            let mut inject_rng = substream(seed, streams::INJECTION);
            let horizon = knot_count(b, c, &cfg.model);
            let pb = PlanBudget::new(b, c, cfg.sensors, cfg.goal, cfg.params.region)?;
            let objective = Objective::new(cfg.params.clone(), &cfg.belief, &MeasurementSet::new(), cfg.sensors)?
                .with_gradient_mode(cfg.gradient_mode);
            let start = cfg.model.state_at(&cfg.start);
            let t0 = Instant::now();
            let res = optimize(&cfg.offline, &cfg.model, &objective, &start, horizon, Some(&pb), None, &mut inject_rng)?;
            planning += t0.elapsed().as_secs_f64();
            replans = 1;
            injections = (res.accepted_injections(), res.accepted_drill_injections());
            let plan = res.plan;
            for t in 0..=plan.horizon() {
                let kind = plan.sensor_types[t];
                if !rec.affordable(cfg.sensors.cost(kind)) {
                    break;
                }
                rec.sense(kind, &mut sensor_rng)?;
                if t < plan.horizon() {
                    rec.move_to(DynamicsModel::position(&plan.states[t + 1]));
                }
            }
            rec.close(true, &mut sensor_rng)?;
        }
        Policy::Random => {
            let mut policy_rng = substream(seed, streams::RANDOM_POLICY);
            let rp = RandomPolicy {
                goal: cfg.goal,
                region: cfg.params.region,
                movement_cost: c,
                sensors: cfg.sensors,
            };
            let off = cfg.goal - cfg.start;
            if (off.x - off.x.round()).abs() > 1e-9 || (off.y - off.y.round()).abs() > 1e-9 {
                return Err(Error::Config("random policy needs start and goal a whole number of cells apart".into()));
            }
            if cfg.sensors.spectrometer_cost + rp.cost_to_go(&cfg.start) > b {
                return Err(Error::Infeasible("budget does not cover the grid path to the goal".into()));
            }
            rec.sense(SensorKind::Spectrometer, &mut sensor_rng)?;
            let t0 = Instant::now();
            loop {
                let Some(a) = random_policy_step(&rp, &rec.pos, b - rec.spent, &mut policy_rng) else { break };
                rec.move_to(rec.pos + a.direction.offset());
                rec.sense(a.sensor, &mut sensor_rng)?;
            }
            planning += t0.elapsed().as_secs_f64();
        }
    }

    let mut record = rec.finish(policy, seed, prior);
    record.planning_time_s = planning;
    record.replans = replans;
    record.accepted_injections = injections.0;
    record.accepted_drill_injections = injections.1;
    Ok(record)
}
