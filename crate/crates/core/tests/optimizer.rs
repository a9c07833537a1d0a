use gp_pto::environment::{generate_map, path_cost};
use gp_pto::optimizer::{
    enforce_budget, inject_samples, knot_count, optimize_seeded, replan_step, straight_line_plan, truncate_to_budget,
    EpisodeState, ReplanContext,
};
use gp_pto::{
    optimize, BudgetModel, DynamicsModel, GpBelief, Kernel, MeasurementSet, Objective, ObjectiveParams,
    OptimizerConfig, PlanBudget, Point, Region, SensorKind, SensorModel, Trajectory,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn belief() -> GpBelief {
    GpBelief::new(Kernel::squared_exponential(1.0, 1.0).unwrap(), 2.5, GpBelief::lattice(10.0, 10), 1e-8).unwrap()
}

fn plan_budget(b: f64, goal: Point) -> PlanBudget {
    PlanBudget::new(b, 1.0, SensorModel::default(), goal, Region::square(10.0)).unwrap()
}

/// Movement plus sensing, accumulated knot by knot.
fn cost_oracle(traj: &Trajectory, sensors: &SensorModel) -> f64 {
    let mut total = 0.0;
    for t in 0..traj.states.len() {
        total += match traj.sensor_types[t] {
            SensorKind::Spectrometer => sensors.spectrometer_cost,
            SensorKind::Drill => sensors.drill_cost,
        };
        if t > 0 {
            let dx = traj.states[t][0] - traj.states[t - 1][0];
            let dy = traj.states[t][1] - traj.states[t - 1][1];
            total += (dx * dx + dy * dy).sqrt();
        }
    }
    total
}

#[test]
fn goal_only_objective_reaches_the_dense_qp_minimum() {
    let model = DynamicsModel::default();
    let b = belief();
    let horizon = 10;
    let x0 = Point::new(1.0, 1.0);
    let goal = Point::new(4.0, 3.0);
    let mut params = ObjectiveParams::defaults(&model, &goal, Region::square(10.0));
    params.q = 0.0;
    params.boundary_weight = 0.0;

    // minimize (x0 + dt S U - g)' Qf (.) + ½ U' R U over all T + 1 controls
    let dt = model.dt;
    let nu = 2 * (horizon + 1);
    let mut s = DMatrix::zeros(2, nu);
    for t in 0..horizon {
        s[(0, 2 * t)] = 1.0;
        s[(1, 2 * t + 1)] = 1.0;
    }
    let mut rbar = DMatrix::zeros(nu, nu);
    for t in 0..=horizon {
        rbar.view_mut((2 * t, 2 * t), (2, 2)).copy_from(&params.r_t);
    }
    let gap = DVector::from_vec(vec![goal.x - x0.x, goal.y - x0.y]);
    let h = s.transpose() * &params.q_f * &s * (2.0 * dt * dt) + &rbar;
    let rhs = s.transpose() * &params.q_f * &gap * (2.0 * dt);
    let u = h.lu().solve(&rhs).unwrap();
    let resid = &s * &u * dt - &gap;
    let j_star = resid.dot(&(&params.q_f * &resid)) + 0.5 * u.dot(&(&rbar * &u));

    let obj = Objective::new(params, &b, &MeasurementSet::new(), SensorModel::default()).unwrap();
    let config = OptimizerConfig::offline(&model);
    let res = optimize_seeded(&config, &model, &obj, &model.state_at(&x0), horizon, None, None).unwrap();
    assert!(
        (res.objective.total - j_star).abs() <= 1e-3,
        "J = {}, oracle {}",
        res.objective.total,
        j_star
    );
}

#[test]
fn zero_iterations_keep_the_straight_line() {
    let model = DynamicsModel::default();
    let b = belief();
    let goal = Point::new(9.5, 9.5);
    let params = ObjectiveParams::defaults(&model, &goal, Region::square(10.0));
    let obj = Objective::new(params, &b, &MeasurementSet::new(), SensorModel::default()).unwrap();
    let config = OptimizerConfig {
        max_iters: 0,
        ..OptimizerConfig::online(&model)
    };
    let start = model.state_at(&Point::new(0.5, 0.5));
    let pb = plan_budget(60.0, goal);
    let res = optimize_seeded(&config, &model, &obj, &start, 60, Some(&pb), None).unwrap();
    let line = straight_line_plan(&model, &start, &goal, 60).unwrap();
    assert_eq!(res.plan.positions(), line.positions());
    assert!(res.plan.sensor_types.iter().all(|&k| k == SensorKind::Spectrometer));
    assert!(res.history.is_empty());
}

#[test]
fn best_objective_is_monotone_and_plans_stay_in_budget() {
    let model = DynamicsModel::default();
    let b = belief();
    let goal = Point::new(9.5, 9.5);
    for seed in 0..3 {
        let params = ObjectiveParams::defaults(&model, &goal, Region::square(10.0));
        let obj = Objective::new(params, &b, &MeasurementSet::new(), SensorModel::default()).unwrap();
        let config = OptimizerConfig {
            seed,
            inject_prob: 0.5,
            ..OptimizerConfig::online(&model)
        };
        let pb = plan_budget(40.0, goal);
        let start = model.state_at(&Point::new(0.5, 0.5));
        let res = optimize_seeded(&config, &model, &obj, &start, knot_count(40.0, 1.0, &model), Some(&pb), None).unwrap();
        let mut prev = res.initial_objective;
        for r in &res.history {
            assert!(r.best_objective <= prev);
            prev = r.best_objective;
        }
        assert_eq!(res.objective.total, prev);
        assert!(cost_oracle(&res.plan, &SensorModel::default()) <= 40.0);
        assert!(res.plan.dynamics_residual(&model) <= 1e-10);

        let again = optimize_seeded(&config, &model, &obj, &start, knot_count(40.0, 1.0, &model), Some(&pb), None).unwrap();
        assert_eq!(again.plan, res.plan);
    }
}

#[test]
fn enforce_budget_repairs_random_plans() {
    let model = DynamicsModel::default();
    let sensors = SensorModel::default();
    let goal = Point::new(9.5, 9.5);
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..100 {
        let start = Point::new(rng.random_range(0.5..9.5), rng.random_range(0.5..9.5));
        let horizon = rng.random_range(5..40);
        let controls: Vec<DVector<f64>> = (0..=horizon)
            .map(|_| DVector::from_vec(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]))
            .collect();
        let types = (0..=horizon)
            .map(|_| if rng.random_bool(0.2) { SensorKind::Drill } else { SensorKind::Spectrometer })
            .collect();
        let traj = Trajectory::from_controls(&model, &model.state_at(&start), controls, types).unwrap();
        let traj = Trajectory::from_controls(
            &model,
            &traj.states[0],
            traj.positions()
                .windows(2)
                .map(|w| {
                    let p = Region::square(10.0).clamp(&w[1]) - Region::square(10.0).clamp(&w[0]);
                    DVector::from_vec(vec![p.x, p.y])
                })
                .chain(std::iter::once(DVector::zeros(2)))
                .collect(),
            traj.sensor_types.clone(),
        )
        .unwrap();
        let straight = (goal - start).norm();
        let budget = rng.random_range(straight..straight + 30.0);
        let pb = plan_budget(budget, goal);
        let out = enforce_budget(&traj, &model, &pb).unwrap();
        let cost = cost_oracle(&out, &sensors);
        let back = (goal - DynamicsModel::position(out.states.last().unwrap())).norm();
        assert!(cost + back <= budget + 1e-9, "cost {cost} + return {back} > {budget}");
        let bm = BudgetModel::new(budget, 1.0).unwrap();
        assert!((path_cost(&out, &bm, &sensors) - cost).abs() <= 1e-9);
        assert!(out.dynamics_residual(&model) <= 1e-10);
        assert!(out.positions().iter().all(|p| Region::square(10.0).contains(p)));
    }
}

#[test]
fn budget_at_straight_line_cost_forces_the_straight_line() {
    let model = DynamicsModel::default();
    let start = Point::new(1.5, 2.5);
    let goal = Point::new(7.5, 6.5);
    let straight = (goal - start).norm();
    let mut plan = straight_line_plan(&model, &model.state_at(&start), &Point::new(2.0, 9.0), 12).unwrap();
    plan.sensor_types[3] = SensorKind::Drill;
    plan.sensor_types[7] = SensorKind::Drill;
    let out = enforce_budget(&plan, &model, &plan_budget(straight, goal)).unwrap();
    assert!(out.sensor_types.iter().all(|&k| k == SensorKind::Spectrometer));
    let dir = (goal - start) / straight;
    let mut along = 0.0;
    for p in out.positions() {
        let d = p - start;
        let off = (d - dir * d.dot(&dir)).norm();
        assert!(off <= 1e-6, "knot {p:?} is {off} off the segment");
        assert!(d.dot(&dir) >= along - 1e-12);
        along = d.dot(&dir);
    }
}

#[test]
fn plan_within_budget_is_untouched() {
    let model = DynamicsModel::default();
    let goal = Point::new(9.5, 9.5);
    let plan = straight_line_plan(&model, &model.state_at(&Point::new(0.5, 0.5)), &goal, 60).unwrap();
    let out = enforce_budget(&plan, &model, &plan_budget(60.0, goal)).unwrap();
    assert_eq!(out, plan);
}

#[test]
fn truncation_keeps_goal_reachable() {
    let model = DynamicsModel::default();
    let goal = Point::new(9.5, 9.5);
    let start = Point::new(0.5, 9.5);
    let mut plan = straight_line_plan(&model, &model.state_at(&start), &Point::new(0.5, 0.5), 9).unwrap();
    for k in plan.sensor_types.iter_mut().step_by(3) {
        *k = SensorKind::Drill;
    }
    let pb = plan_budget(25.0, goal);
    assert!(!pb.is_feasible(&plan));
    let cut = truncate_to_budget(&plan, &model, &pb).unwrap().unwrap();
    assert!(pb.is_feasible(&cut));
    assert_eq!(cut.horizon(), plan.horizon());
}

fn single_knot(model: &DynamicsModel, p: Point, kind: SensorKind) -> Trajectory {
    Trajectory::from_controls(model, &model.state_at(&p), vec![DVector::zeros(2)], vec![kind]).unwrap()
}

#[test]
fn injection_oracle() {
    let model = DynamicsModel::default();
    let b = belief();
    let p = Point::new(5.5, 5.5);
    let params = ObjectiveParams::defaults(&model, &p, Region::square(10.0));
    let obj = Objective::new(params, &b, &MeasurementSet::new(), SensorModel::default()).unwrap();
    let pb = plan_budget(30.0, p);
    let mut rng = ChaCha8Rng::seed_from_u64(42);

    let plan = single_knot(&model, p, SensorKind::Spectrometer);
    let j = obj.evaluate(&plan).unwrap().total;

    // no draw below p = 0
    let out = inject_samples(&plan, j, &obj, &model, Some(&pb), 0.0, &mut rng).unwrap();
    assert!(!out.outcome.attempted);
    assert_eq!(out.plan, plan);

    // a lone spectrometer far from any data: the drill lowers J and is kept
    let out = inject_samples(&plan, j, &obj, &model, Some(&pb), 1.0, &mut rng).unwrap();
    assert!(out.outcome.accepted_drill());
    assert_eq!(out.plan.sensor_types[0], SensorKind::Drill);
    assert_eq!(out.objective, obj.evaluate(&out.plan).unwrap().total);
    assert!(out.objective < j);

    // the reverse change raises J and is discarded
    let drilled = out.plan;
    let jd = out.objective;
    let back = inject_samples(&drilled, jd, &obj, &model, Some(&pb), 1.0, &mut rng).unwrap();
    assert!(back.outcome.attempted && !back.outcome.accepted);
    assert_eq!(back.plan, drilled);
    assert_eq!(back.objective, jd);
}

#[test]
fn injected_drill_that_breaks_the_budget_is_truncated_or_refused() {
    let model = DynamicsModel::default();
    let b = belief();
    let goal = Point::new(6.5, 0.5);
    let params = ObjectiveParams::defaults(&model, &goal, Region::square(10.0));
    let obj = Objective::new(params, &b, &MeasurementSet::new(), SensorModel::default()).unwrap();
    let pb = plan_budget(7.0, goal);
    let plan = straight_line_plan(&model, &model.state_at(&Point::new(0.5, 0.5)), &goal, 6).unwrap();
    let j = obj.evaluate(&plan).unwrap().total;
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..50 {
        let out = inject_samples(&plan, j, &obj, &model, Some(&pb), 1.0, &mut rng).unwrap();
        assert!(out.outcome.attempted);
        assert!(pb.is_feasible(&out.plan));
        if out.outcome.accepted {
            assert!(out.objective < j);
        }
    }
}

#[test]
fn forced_replan_moves_along_the_straight_line() {
    let model = DynamicsModel::default();
    let b = belief();
    let start = Point::new(0.5, 0.5);
    let goal = Point::new(9.5, 9.5);
    let params = ObjectiveParams::defaults(&model, &goal, Region::square(10.0));
    let map = generate_map(10, 4, 0.95, 1).unwrap();
    let config = OptimizerConfig::online(&model);
    let ctx = ReplanContext {
        model: &model,
        config: &config,
        params: &params,
        belief: &b,
        sensors: SensorModel::default(),
        movement_cost: 1.0,
        map: &map,
        gradient_mode: Default::default(),
    };
    let mut st = EpisodeState::new(model.state_at(&start), (goal - start).norm());
    let mut r1 = ChaCha8Rng::seed_from_u64(1);
    let mut r2 = ChaCha8Rng::seed_from_u64(2);
    let out = replan_step(&ctx, &mut st, &mut r1, &mut r2).unwrap().unwrap();
    assert_eq!(out.kind, SensorKind::Spectrometer);
    let d = out.moved_to - start;
    assert!((d.x - d.y).abs() <= 1e-9, "left the diagonal: {:?}", out.moved_to);
    assert!(d.x > 0.0);
    assert!(st.spent <= st.total_budget);
}

#[test]
fn zero_iteration_replan_follows_the_initial_plan() {
    let model = DynamicsModel::default();
    let b = belief();
    let start = Point::new(0.5, 0.5);
    let goal = Point::new(9.5, 9.5);
    let params = ObjectiveParams::defaults(&model, &goal, Region::square(10.0));
    let map = generate_map(10, 4, 0.95, 1).unwrap();
    let config = OptimizerConfig {
        max_iters: 0,
        ..OptimizerConfig::online(&model)
    };
    let ctx = ReplanContext {
        model: &model,
        config: &config,
        params: &params,
        belief: &b,
        sensors: SensorModel::default(),
        movement_cost: 1.0,
        map: &map,
        gradient_mode: Default::default(),
    };
    let mut st = EpisodeState::new(model.state_at(&start), 60.0);
    let line = straight_line_plan(&model, &model.state_at(&start), &goal, 60).unwrap();
    let mut r1 = ChaCha8Rng::seed_from_u64(1);
    let mut r2 = ChaCha8Rng::seed_from_u64(2);
    let out = replan_step(&ctx, &mut st, &mut r1, &mut r2).unwrap().unwrap();
    assert_eq!(out.moved_to, line.positions()[1]);
    assert_eq!(st.executed.len(), 1);
}

#[test]
fn unsupported_budget_model_is_reported() {
    let model = DynamicsModel::new(gp_pto::ModelKind::DoubleIntegrator, 1.0, 1.0).unwrap();
    let b = belief();
    let goal = Point::new(5.0, 5.0);
    let params = ObjectiveParams::defaults(&model, &goal, Region::square(10.0));
    let obj = Objective::new(params, &b, &MeasurementSet::new(), SensorModel::default()).unwrap();
    let pb = plan_budget(30.0, goal);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let res = optimize(
        &OptimizerConfig::online(&model),
        &model,
        &obj,
        &model.state_at(&Point::new(1.0, 1.0)),
        10,
        Some(&pb),
        None,
        &mut rng,
    );
    assert!(matches!(res, Err(gp_pto::Error::Unsupported(_))));
}
