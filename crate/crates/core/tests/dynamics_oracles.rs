//! Integrator-level oracles: world vs body frame, convergence order,
//! closed-form heading drift and the rotation invariant of the zeroed-output
//! system.

use std::collections::BTreeMap;

use swarmsim::dynamics::{body_transform, default_step};
use swarmsim::io::random_state;
use swarmsim::{
    integrate, BodyFrameState, ControllerParams, ExcitationProfile, GraphFamily, InitialState,
    IntegratorConfig, Mode, ScenarioConfig, SwitchSchedule, Trajectory, VectorField,
};

fn default_scenario(horizon: f64) -> swarmsim::io::Scenario {
    ScenarioConfig::default_4d()
        .build_with_horizon(horizon)
        .unwrap()
}

fn run(field: VectorField, initial: &InitialState, step: f64, tf: f64) -> Trajectory {
    let s = default_scenario(tf);
    integrate(
        field,
        &s.schedule,
        &s.family,
        s.params,
        &s.profile,
        initial,
        IntegratorConfig::new(step, 0.0, tf).unwrap(),
    )
    .unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max)
}

#[test]
fn original_and_compact_agree_through_body_transform() {
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let init = InitialState::World(random_state(4, 10.0, seed));
        let world = run(VectorField::Original, &init, 1e-3, 10.0);
        let body = run(VectorField::Compact, &init, 1e-3, 10.0);
        assert_eq!(world.times(), body.times());
        for k in 0..world.len() {
            let mapped = body_transform(&world.world_state(k));
            worst = worst.max(max_abs_diff(
                &mapped.to_flat(),
                &body.body_state(k).to_flat(),
            ));
        }
    }
    assert!(worst < 1e-5, "frame mismatch {worst:e}");
}

#[test]
fn rk4_converges_at_fourth_order_across_switches() {
    let init = InitialState::World(random_state(4, 3.0, 7));
    let tf = 6.0;
    let ends: Vec<Vec<f64>> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&h| {
            let tr = run(VectorField::Compact, &init, h, tf);
            tr.body_state(tr.len() - 1).to_flat()
        })
        .collect();
    let e1 = max_abs_diff(&ends[0], &ends[1]);
    let e2 = max_abs_diff(&ends[1], &ends[2]);
    let order = (e1 / e2).log2();
    assert!(
        (3.5..4.5).contains(&order),
        "observed order {order} ({e1:e}, {e2:e})"
    );
}

/// `int_0^t p` for a constant-shape profile, written from the branch layout:
/// `+c` on `[T, T0/2)` and `-c` on `[T + T0/2, T0)` in every period.
fn p_integral_constant(c: f64, window: f64, period: f64, t: f64) -> f64 {
    let len = 0.5 * period - window;
    let phase = t - (t / period).floor() * period;
    let fwd = (phase - window).clamp(0.0, len);
    let bwd = (phase - window - 0.5 * period).clamp(0.0, len);
    c * (fwd - bwd)
}

#[test]
fn heading_sum_follows_excitation_integral() {
    let cfg = ScenarioConfig::default_4d();
    let (window, period) = (cfg.excitation.window, cfg.excitation.period);
    let init = random_state(4, 10.0, 3);
    let sum0: f64 = init.theta.iter().sum();
    let tr = run(VectorField::Compact, &InitialState::World(init), 1e-3, 40.0);
    let mut worst: f64 = 0.0;
    for k in 0..tr.len() {
        let sum: f64 = tr.body_state(k).theta.iter().sum();
        let expect = sum0 + 4.0 * p_integral_constant(5.0, window, period, tr.times()[k]);
        worst = worst.max((sum - expect).abs());
    }
    assert!(worst < 1e-9, "heading drift error {worst:e}");
}

#[test]
fn zeroed_output_system_conserves_planar_norm() {
    let b = BodyFrameState::new(
        vec![3.0, -1.0, 0.5, 2.0],
        vec![0.0, 4.0, -2.5, 1.0],
        vec![0.1; 4],
    )
    .unwrap();
    let u0: f64 = b.x.iter().chain(&b.y).map(|v| v * v).sum();
    let period = ScenarioConfig::default_4d().excitation.period;
    let tf = 100.0 * period;
    let tr = run(VectorField::Changed, &InitialState::Body(b), 1e-3, tf);
    let mut worst: f64 = 0.0;
    for k in (0..tr.len()).step_by(97).chain([tr.len() - 1]) {
        let s = tr.body_state(k);
        let u: f64 = s.x.iter().chain(&s.y).map(|v| v * v).sum();
        worst = worst.max((u - u0).abs() / u0);
    }
    assert!(worst < 1e-10, "relative drift {worst:e}");
}

#[test]
fn default_step_respects_switch_gaps() {
    let sched = SwitchSchedule::section4d(std::f64::consts::PI, 150.0).unwrap();
    let h = default_step(std::f64::consts::PI, &sched, 0.0, 150.0).unwrap();
    let gap = sched.min_switch_gap(0.0, 150.0).unwrap().unwrap();
    assert!(h <= 1e-3 * std::f64::consts::PI + 1e-15);
    assert!(h <= gap / 4.0 || h == 1e-6);
}

#[test]
fn constant_mode_without_excitation_is_plain_consensus() {
    // p = 0 and a fixed connected graph: headings converge to their mean.
    let s = default_scenario(30.0);
    let sched = SwitchSchedule::constant(0.0, Mode(1)).unwrap();
    let g = |m| s.family.get(Mode(m)).unwrap();
    let chain = g(1).union(g(2)).unwrap().union(g(3)).unwrap();
    let fam = GraphFamily::new(BTreeMap::from([(Mode(1), chain)])).unwrap();
    let prof = ExcitationProfile::constant(1.0, 3.0, 0.0).unwrap();
    let init = random_state(4, 2.0, 11);
    let mean = init.theta.iter().sum::<f64>() / 4.0;
    let tr = integrate(
        VectorField::Compact,
        &sched,
        &fam,
        ControllerParams::new(1.0, 1.0).unwrap(),
        &prof,
        &InitialState::World(init),
        IntegratorConfig::new(1e-2, 0.0, 30.0).unwrap(),
    )
    .unwrap();
    let last = tr.body_state(tr.len() - 1);
    assert!(last.theta.iter().all(|t| (t - mean).abs() < 1e-6));
}
