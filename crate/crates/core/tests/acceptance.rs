//! Acceptance suite. Prints one PASS/FAIL line per criterion; run with
//! `cargo test -p swarmsim-core --test acceptance -- --nocapture`.
//!
//! Every criterion except the exploratory negative control must pass for the
//! test to succeed. The negative control prints its honest outcome and does
//! not gate the build; see the README for the analysis.

use std::f64::consts::PI;

use swarmsim::diagnostics::{
    epsilon_bound_suite, gronwall_suite, laplacian_identity_suite, w_derivative_check,
    weak_obs_phase_check,
};
use swarmsim::dynamics::{body_transform, ExcitationShape};
use swarmsim::io::{
    random_state, run_scenario, InitSpec, RunOptions, ScenarioConfig, CSV_THRESHOLD,
};
use swarmsim::switching::{check_gujc, epsilon_bound, JointGraphParams};
use swarmsim::{integrate, InitialState, IntegratorConfig, Mode, VectorField};

const SEEDS: std::ops::RangeInclusive<u64> = 1..=10;
const WALL_LIMIT_S: f64 = 60.0;
const W_STEP_TOL: f64 = 1e-9;
const FD_TOL: f64 = 1e-3;
const SLACK_TOL: f64 = -1e-6;
const NEGATIVE_MIN_FAILS: usize = 8;

struct Criterion {
    name: &'static str,
    pass: bool,
    detail: String,
    gating: bool,
}

impl Criterion {
    fn gate(name: &'static str, pass: bool, detail: String) -> Self {
        Self {
            name,
            pass,
            detail,
            gating: true,
        }
    }
}

struct RunStats {
    seed: u64,
    time_to_threshold: Option<f64>,
    final_distance: f64,
    elapsed_s: f64,
    switch_events: usize,
    max_w_increase: f64,
    fd_error: f64,
    fd_checked: usize,
    energy_windows: usize,
    min_slack: f64,
    finite_bounds: usize,
}

fn with_seed(base: &ScenarioConfig, seed: u64) -> ScenarioConfig {
    let mut cfg = base.clone();
    cfg.init = InitSpec::Random { bound: 10.0, seed };
    cfg
}

fn run_seed(cfg: &ScenarioConfig, enforce_phase: bool) -> RunStats {
    let opts = RunOptions {
        enforce_phase,
        ..RunOptions::default()
    };
    let out = run_scenario(cfg, &opts).expect("acceptance run completes");
    let s = &out.scenario;
    let fd = w_derivative_check(&out.trajectory, &s.family, s.params, cfg.integrator.step).unwrap();
    let r = &out.report;
    let (energy_windows, min_slack, finite_bounds) = match &r.energy {
        Some(e) => (
            e.windows,
            e.min_slack_h.min(e.min_slack_h1),
            e.windows - e.infinite_bounds,
        ),
        None => (0, f64::NAN, 0),
    };
    RunStats {
        seed: match cfg.init {
            InitSpec::Random { seed, .. } => seed,
            InitSpec::Explicit { .. } => 0,
        },
        time_to_threshold: r.time_to_threshold,
        final_distance: r.final_distance,
        elapsed_s: r.elapsed_s,
        switch_events: r.switch_events,
        max_w_increase: r.max_w_increase,
        fd_error: fd.max_error,
        fd_checked: fd.checked,
        energy_windows,
        min_slack,
        finite_bounds,
    }
}

fn fmt_opt(t: Option<f64>) -> String {
    t.map_or("never".into(), |t| format!("{t:.2}"))
}

fn reproduction(runs: &[RunStats]) -> Criterion {
    let ok = runs
        .iter()
        .filter(|r| r.time_to_threshold.is_some_and(|t| t < 150.0) && r.elapsed_s < WALL_LIMIT_S)
        .count();
    let times: Vec<String> = runs
        .iter()
        .map(|r| format!("{}:{}s", r.seed, fmt_opt(r.time_to_threshold)))
        .collect();
    let wall = runs.iter().map(|r| r.elapsed_s).fold(0.0, f64::max);
    Criterion::gate(
        "reproduction: distance < 1e-2 before 150 s, < 60 s wall",
        ok == runs.len(),
        format!(
            "{ok}/{} seeds; hit times [{}]; max wall {wall:.2} s",
            runs.len(),
            times.join(" ")
        ),
    )
}

fn gujc_criterion() -> Criterion {
    let horizon = 20.0 * PI;
    let s = ScenarioConfig::default_4d()
        .build_with_horizon(horizon)
        .unwrap();
    let r = check_gujc(
        &s.schedule,
        &s.family,
        JointGraphParams::new(PI / 6.0, PI).unwrap(),
        horizon,
    )
    .unwrap();
    Criterion::gate(
        "joint connectivity with (tau_a, T) = (pi/6, pi) over 20 pi",
        r.holds,
        format!("{} ({} points)", r.verdict(), r.points_checked),
    )
}

fn dwell_free(runs: &[RunStats]) -> Criterion {
    let min = runs.iter().map(|r| r.switch_events).min().unwrap_or(0);
    Criterion::gate(
        "dwell-time-free: >= 1000 switch events per run, no step failure",
        min >= 1000,
        format!("min {min} switch events over {} completed runs", runs.len()),
    )
}

fn laplacian_criterion() -> Criterion {
    let r = laplacian_identity_suite(100, 1).unwrap();
    let parts = [
        ("centering norm", r.centering_norm),
        ("centering absorbs", r.centering_absorbs),
        ("swap symmetry", r.swap_symmetry),
        ("norm bound", r.norm_bound),
    ];
    let detail: Vec<String> = parts
        .iter()
        .map(|(n, p)| format!("{n} {} worst {:.1e}", p.instances, p.worst))
        .collect();
    Criterion::gate(
        "Laplacian identities on 100 random instances each",
        r.passed(),
        detail.join("; "),
    )
}

fn epsilon_criterion() -> Criterion {
    let horizon = 20.0 * PI;
    let s = ScenarioConfig::default_4d()
        .build_with_horizon(horizon)
        .unwrap();
    let eps = epsilon_bound(&s.family, PI / 6.0).unwrap().epsilon;
    let expect = PI / 6.0 * (2.0 - 2f64.sqrt());
    let gram = epsilon_bound_suite(&s.schedule, &s.family, PI / 6.0, PI, horizon, 1000, 1).unwrap();
    Criterion::gate(
        "epsilon = (pi/6)(2 - sqrt 2) and the window Gramian bound",
        (eps - expect).abs() <= 1e-9 && gram.passed && gram.trials == 1000,
        format!(
            "epsilon {eps:.12} (err {:.1e}); {} unit vectors, min margin {:.3e}",
            (eps - expect).abs(),
            gram.trials,
            gram.min_margin
        ),
    )
}

fn gronwall_criterion() -> Criterion {
    let s = gronwall_suite(100, 1).unwrap();
    Criterion::gate(
        "Gronwall-type estimate on 100 instances plus closed form",
        s.ok(),
        format!(
            "{}/{} passed; min margins {:.2e} / {:.2e}; closed-form gap {:.1e}",
            s.passed, s.instances, s.min_growth_margin, s.min_dissipation_margin, s.closed_form_gap
        ),
    )
}

fn monotonicity(all: &[&RunStats], repro: &[RunStats]) -> Criterion {
    let w_inc = all
        .iter()
        .map(|r| r.max_w_increase)
        .fold(f64::NEG_INFINITY, f64::max);
    let fd = repro.iter().map(|r| r.fd_error).fold(0.0, f64::max);
    let checked = repro.iter().map(|r| r.fd_checked).min().unwrap_or(0);
    Criterion::gate(
        "W nonincreasing and dW/dt = -h1^2",
        w_inc <= W_STEP_TOL && fd <= FD_TOL && checked > 0,
        format!(
            "max step increase {w_inc:.1e} over {} runs; max |FD + h1^2| {fd:.1e} (min {checked} points/run)",
            all.len()
        ),
    )
}

fn energy_criterion(runs: &[RunStats]) -> Criterion {
    let min = runs
        .iter()
        .map(|r| r.min_slack)
        .fold(f64::INFINITY, f64::min);
    let windows = runs.iter().all(|r| r.energy_windows == 20);
    let finite: Vec<String> = runs
        .iter()
        .map(|r| format!("{}:{}", r.seed, r.finite_bounds))
        .collect();
    Criterion::gate(
        "output energy within bound on 20 windows per run",
        windows && min >= SLACK_TOL,
        format!(
            "min slack {min:.3e}; finite h bounds per seed (of 20) [{}]",
            finite.join(" ")
        ),
    )
}

fn frame_criterion() -> Criterion {
    let s = ScenarioConfig::default_4d()
        .build_with_horizon(10.0)
        .unwrap();
    let cfg = IntegratorConfig::new(1e-3, 0.0, 10.0).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let init = InitialState::World(random_state(4, 10.0, seed));
        let go =
            |f| integrate(f, &s.schedule, &s.family, s.params, &s.profile, &init, cfg).unwrap();
        let (world, body) = (go(VectorField::Original), go(VectorField::Compact));
        for k in 0..world.len() {
            let a = body_transform(&world.world_state(k)).to_flat();
            let b = body.body_state(k).to_flat();
            worst = a
                .iter()
                .zip(&b)
                .map(|(p, q)| (p - q).abs())
                .fold(worst, f64::max);
        }
    }
    Criterion::gate(
        "world and body-frame integrations agree over 10 s",
        worst <= 1e-5,
        format!("10 instances, max deviation {worst:.2e}"),
    )
}

fn phase_criterion() -> Criterion {
    let default = ScenarioConfig::default_4d().raw_profile().unwrap();
    let mut accepted = 0;
    let mut tried = 0;
    for i in 0..100 {
        let psi = 2.0 * PI * i as f64 / 100.0;
        for r in [0.5, 5.0] {
            for m in [0, 1] {
                tried += 1;
                if weak_obs_phase_check(&default, r, psi, m).boundary_consistent {
                    accepted += 1;
                }
            }
        }
    }
    let mut c2 = ScenarioConfig::default_4d();
    c2.excitation.c = ExcitationShape::Constant { value: 2.0 };
    let c2 = c2.raw_profile().unwrap();
    let counter = weak_obs_phase_check(&c2, 1.0, 0.0, 0).boundary_consistent;
    Criterion::gate(
        "zeroing-output phase analysis",
        accepted == 0 && counter,
        format!(
            "default: {accepted}/{tried} r > 0 candidates consistent; c = 2: psi = 0 candidate consistent = {counter}"
        ),
    )
}

fn negative_controls(drop_g3: &[RunStats], c2: &[RunStats]) -> Criterion {
    let fails = |runs: &[RunStats]| {
        runs.iter()
            .filter(|r| r.time_to_threshold.is_none())
            .count()
    };
    let (a, b) = (fails(drop_g3), fails(c2));
    let late: Vec<String> = c2
        .iter()
        .filter(|r| r.time_to_threshold.is_some())
        .map(|r| format!("{}:{}s", r.seed, fmt_opt(r.time_to_threshold)))
        .collect();
    let finals: Vec<String> = drop_g3
        .iter()
        .map(|r| format!("{:.1}", r.final_distance))
        .collect();
    Criterion {
        name: "negative controls miss 1e-2 by 150 s on >= 8/10 seeds (exploratory)",
        pass: a >= NEGATIVE_MIN_FAILS && b >= NEGATIVE_MIN_FAILS,
        detail: format!(
            "drop G3: {a}/10 fail (final distances [{}]); c = 2: {b}/10 fail, converged seeds [{}]",
            finals.join(" "),
            late.join(" ")
        ),
        gating: false,
    }
}

#[test]
fn acceptance() {
    let base = ScenarioConfig::default_4d();
    let repro: Vec<RunStats> = SEEDS
        .map(|s| run_seed(&with_seed(&base, s), true))
        .collect();

    let mut drop = base.clone();
    drop.graphs.insert(Mode(3), Vec::new());
    let drop_g3: Vec<RunStats> = SEEDS
        .map(|s| run_seed(&with_seed(&drop, s), true))
        .collect();

    let mut c2 = base.clone();
    c2.excitation.c = ExcitationShape::Constant { value: 2.0 };
    let c2_runs: Vec<RunStats> = SEEDS.map(|s| run_seed(&with_seed(&c2, s), false)).collect();

    let all: Vec<&RunStats> = repro.iter().chain(&drop_g3).chain(&c2_runs).collect();
    let criteria = [
        reproduction(&repro),
        gujc_criterion(),
        dwell_free(&repro),
        laplacian_criterion(),
        epsilon_criterion(),
        gronwall_criterion(),
        monotonicity(&all, &repro),
        energy_criterion(&repro),
        frame_criterion(),
        phase_criterion(),
        negative_controls(&drop_g3, &c2_runs),
    ];

    println!("threshold {CSV_THRESHOLD:e}, seeds {SEEDS:?}");
    for c in &criteria {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        let note = if c.gating { "" } else { " [non-gating]" };
        println!("{tag}  {}{note}: {}", c.name, c.detail);
    }
    let failed: Vec<&str> = criteria
        .iter()
        .filter(|c| c.gating && !c.pass)
        .map(|c| c.name)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
