mod common;

use common::{central_differences, max_relative_error, DenseGp};
use gp_pto::objective::GradientMode;
use gp_pto::{
    DynamicsModel, GpBelief, Kernel, Measurement, MeasurementSet, ModelKind, Objective, ObjectiveParams, Point,
    Region, SensorKind, SensorModel, Trajectory,
};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn belief() -> GpBelief {
    GpBelief::new(Kernel::squared_exponential(1.0, 1.0).unwrap(), 2.5, GpBelief::lattice(10.0, 10), 1e-8).unwrap()
}

/// T = 20 single-integrator plan with three drills at distinct knots.
fn random_plan(model: &DynamicsModel, rng: &mut ChaCha8Rng) -> Trajectory {
    let horizon = 20;
    let x0 = model.state_at(&common::random_point(1.0, 9.0, rng));
    let controls: Vec<DVector<f64>> = (0..=horizon)
        .map(|_| DVector::from_vec(vec![rng.random_range(-0.8..0.8), rng.random_range(-0.8..0.8)]))
        .collect();
    let mut types = vec![SensorKind::Spectrometer; horizon + 1];
    let mut placed = 0;
    while placed < 3 {
        let i = rng.random_range(0..=horizon);
        if types[i] == SensorKind::Spectrometer {
            types[i] = SensorKind::Drill;
            placed += 1;
        }
    }
    Trajectory::from_controls(model, &x0, controls, types).unwrap()
}

fn executed(rng: &mut ChaCha8Rng) -> MeasurementSet {
    let mut m = MeasurementSet::new();
    for _ in 0..4 {
        m.push(Measurement::new(common::random_point(0.0, 10.0, rng), rng.random_range(1.0..4.0), 1.0).unwrap());
    }
    m
}

#[test]
fn analytic_gradients_match_central_differences() {
    let model = DynamicsModel::default();
    let b = belief();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let traj = random_plan(&model, &mut rng);
        let params = ObjectiveParams::defaults(&model, &Point::new(9.5, 9.5), Region::square(10.0));
        let obj = Objective::new(params, &b, &executed(&mut rng), SensorModel::default()).unwrap();
        let g = obj.gradients(&traj).unwrap();
        let (fa, fb) = central_differences(&obj, &traj, 1e-5);
        assert!(max_relative_error(&g.a, &fa) <= 1e-4, "state gradient error {}", max_relative_error(&g.a, &fa));
        assert!(max_relative_error(&g.b, &fb) <= 1e-4, "control gradient error {}", max_relative_error(&g.b, &fb));
    }
}

#[test]
fn boundary_gradient_outside_the_region() {
    let model = DynamicsModel::default();
    let b = belief();
    let params = ObjectiveParams::defaults(&model, &Point::new(9.5, 9.5), Region::square(10.0));
    let obj = Objective::new(params, &b, &MeasurementSet::new(), SensorModel::default()).unwrap();
    let controls = vec![DVector::from_vec(vec![1.0, -0.5]); 4];
    let traj = Trajectory::from_controls(&model, &model.state_at(&Point::new(9.2, 0.8)), controls, vec![SensorKind::Spectrometer; 4]).unwrap();
    let out = obj.evaluate(&traj).unwrap();
    assert!(out.boundary_term > 0.0);
    let g = obj.gradients(&traj).unwrap();
    let (fa, _) = central_differences(&obj, &traj, 1e-5);
    assert!(max_relative_error(&g.a, &fa) <= 1e-4);
}

#[test]
fn finite_difference_mode_agrees_with_analytic() {
    let model = DynamicsModel::default();
    let b = belief();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let traj = random_plan(&model, &mut rng);
    let params = ObjectiveParams::defaults(&model, &Point::new(9.5, 9.5), Region::square(10.0));
    let analytic = Objective::new(params.clone(), &b, &MeasurementSet::new(), SensorModel::default()).unwrap();
    let fd = Objective::new(params, &b, &MeasurementSet::new(), SensorModel::default())
        .unwrap()
        .with_gradient_mode(GradientMode::FiniteDifference);
    let ga = analytic.gradients(&traj).unwrap();
    let gf = fd.gradients(&traj).unwrap();
    assert!(max_relative_error(&ga.a, &gf.a) <= 1e-4);
    assert!(max_relative_error(&ga.b, &gf.b) <= 1e-4);
}

#[test]
fn breakdown_terms_sum_and_are_signed() {
    let model = DynamicsModel::default();
    let b = belief();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..20 {
        let traj = random_plan(&model, &mut rng);
        let params = ObjectiveParams::defaults(&model, &Point::new(9.5, 9.5), Region::square(10.0));
        let obj = Objective::new(params, &b, &executed(&mut rng), SensorModel::default()).unwrap();
        let o = obj.evaluate(&traj).unwrap();
        let sum = o.variance_term + o.goal_term + o.control_term + o.boundary_term;
        assert!((o.total - sum).abs() <= 1e-10);
        assert!(o.goal_term >= 0.0 && o.control_term >= 0.0 && o.boundary_term >= 0.0);
        assert!(o.variance_term <= 1e-9);
    }
}

#[test]
fn all_terms_vanish_at_rest_on_the_goal() {
    let model = DynamicsModel::default();
    let b = belief();
    let goal = Point::new(4.0, 6.0);
    let params = ObjectiveParams::defaults(&model, &goal, Region::square(10.0));
    let obj = Objective::new(params, &b, &MeasurementSet::new(), SensorModel::default())
        .unwrap()
        .without_planned_samples();
    let traj = Trajectory::from_controls(&model, &model.state_at(&goal), vec![DVector::zeros(2); 3], vec![SensorKind::Spectrometer; 3]).unwrap();
    let o = obj.evaluate(&traj).unwrap();
    assert_eq!(o.total, 0.0);
    assert_eq!(o.variance_term, 0.0);
}

#[test]
fn single_drill_variance_term_matches_oracle() {
    let model = DynamicsModel::default();
    let b = belief();
    let p = Point::new(3.5, 5.5);
    let params = ObjectiveParams::defaults(&model, &p, Region::square(10.0));
    let sensors = SensorModel::default();
    let obj = Objective::new(params, &b, &MeasurementSet::new(), sensors).unwrap();
    let traj = Trajectory::from_controls(&model, &model.state_at(&p), vec![DVector::zeros(2)], vec![SensorKind::Drill]).unwrap();
    let o = obj.evaluate(&traj).unwrap();
    let oracle = DenseGp { ell: 1.0, sf2: 1.0, mean: 2.5, jitter: 1e-8 };
    let q = GpBelief::lattice(10.0, 10);
    let vr = oracle.trace(&q, &[], &[]) - oracle.trace(&q, &[p], &[sensors.drill_noise_var]);
    assert!((o.variance_term + vr).abs() <= 1e-9, "{} vs {}", o.variance_term, -vr);
}

#[test]
fn double_integrator_gradients_match_central_differences() {
    let model = DynamicsModel::new(ModelKind::DoubleIntegrator, 0.5, 1.0).unwrap();
    let b = belief();
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let controls: Vec<DVector<f64>> = (0..=12)
        .map(|_| DVector::from_vec(vec![rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)]))
        .collect();
    let x0 = DVector::from_vec(vec![2.0, 3.0, 0.5, 0.2]);
    let mut types = vec![SensorKind::Spectrometer; 13];
    types[5] = SensorKind::Drill;
    let traj = Trajectory::from_controls(&model, &x0, controls, types).unwrap();
    let params = ObjectiveParams::defaults(&model, &Point::new(8.0, 8.0), Region::square(10.0));
    let obj = Objective::new(params, &b, &MeasurementSet::new(), SensorModel::default()).unwrap();
    let g = obj.gradients(&traj).unwrap();
    let (fa, fb) = central_differences(&obj, &traj, 1e-5);
    assert!(max_relative_error(&g.a, &fa) <= 1e-4);
    assert!(max_relative_error(&g.b, &fb) <= 1e-4);
}
