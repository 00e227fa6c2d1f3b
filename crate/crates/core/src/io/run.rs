//! Scenario execution, the run report, CSV emission and seed batches.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::{Scenario, ScenarioConfig};
use crate::diagnostics::{
    consensus_distance, decreasing_trend, fit_exponential_decay, max_w_increase, monitor_values,
    output_energies, output_sq, sliding_window_energy, BoundConstants, DecayFit, EnergyReport,
    OutputChannel,
};
use crate::dynamics::{check_phase_condition, integrate, InitialState, Trajectory, VectorField};
use crate::error::{Error, Result};
use crate::graph::GraphFamily;
use crate::switching::{check_gujc, epsilon_bound, EpsilonBound, GujcReport, JointGraphParams};

/// Distance below which the swarm counts as converged.
pub const CSV_THRESHOLD: f64 = 1e-2;

/// Number of `[s, tf]` windows in the energy summary.
pub const DEFAULT_ENERGY_WINDOWS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// `tau_a`; defaults to `window / 6`.
    pub tau_a: Option<f64>,
    /// Joint-graph window `T`; defaults to the excitation's `T`.
    pub window: Option<f64>,
    /// Span checked for joint connectivity; defaults to the run length.
    pub gujc_horizon: Option<f64>,
    pub energy_windows: usize,
    pub csv: Option<PathBuf>,
    /// Write every `csv_stride`-th sample (plus the last sample and the
    /// first one under the threshold).
    pub csv_stride: usize,
    /// Reject configs that violate the phase condition. Off only for
    /// deliberate counterexamples.
    pub enforce_phase: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            tau_a: None,
            window: None,
            gujc_horizon: None,
            energy_windows: DEFAULT_ENERGY_WINDOWS,
            csv: None,
            csv_stride: 1,
            enforce_phase: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergySummary {
    pub windows: usize,
    pub min_slack_h: f64,
    pub min_slack_h1: f64,
    /// windows whose `h` bound overflowed to `+inf`
    pub infinite_bounds: usize,
    pub reports: Vec<EnergyReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub gujc: Option<GujcReport>,
    pub gujc_verdict: String,
    pub epsilon: Option<EpsilonBound>,
    pub final_distance: f64,
    pub threshold: f64,
    pub time_to_threshold: Option<f64>,
    pub decay_fit: Option<DecayFit>,
    pub energy: Option<EnergySummary>,
    /// last `T0`-window energy of `h` below `1e-3` of the first
    pub window_energy_decreasing: Option<bool>,
    pub max_w_increase: f64,
    pub switch_events: usize,
    pub samples: usize,
    pub step: f64,
    pub t0: f64,
    pub tf: f64,
    pub elapsed_s: f64,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub trajectory: Trajectory,
    pub scenario: Scenario,
}

/// Index of the first sample with consensus distance below `threshold`.
fn first_below(traj: &Trajectory, threshold: f64) -> Option<usize> {
    (0..traj.len()).find(|&k| consensus_distance(&traj.body_state(k)) < threshold)
}

/// Runs the joint-connectivity check, the epsilon bound, the integration and
/// every trajectory diagnostic. GUJC failure and unfit decay constants are
/// warnings, not errors.
pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let started = Instant::now();
    let it = cfg.integrator;
    let window = opts.window.unwrap_or(cfg.excitation.window);
    let tau_a = opts.tau_a.unwrap_or(window / 6.0);
    let scenario = cfg.build_with(
        opts.gujc_horizon.map_or(it.tf, |h| h.max(it.tf)),
        opts.enforce_phase,
    )?;
    let Scenario {
        family,
        schedule,
        params,
        profile,
        integrator,
        initial,
    } = &scenario;
    let mut warnings = Vec::new();
    let mut notes = Vec::new();
    let phase = check_phase_condition(profile);
    if !phase.ok {
        warnings.push(format!(
            "phase condition violated: integral {:.12} is within tolerance of {} pi",
            phase.integral, phase.nearest_k
        ));
    }

    let joint = JointGraphParams::new(tau_a, window)?;
    let gujc_horizon = opts.gujc_horizon.unwrap_or(it.tf - schedule.t0());
    let gujc = if gujc_horizon > window {
        let r = check_gujc(schedule, family, joint, gujc_horizon)?;
        if !r.holds {
            warnings.push(format!(
                "joint connectivity {}; attractivity is not guaranteed",
                r.verdict()
            ));
        }
        Some(r)
    } else {
        warnings.push(format!(
            "joint connectivity not checked: horizon {gujc_horizon} does not exceed T = {window}"
        ));
        None
    };
    let gujc_verdict = gujc
        .as_ref()
        .map_or_else(|| "not checked".to_string(), GujcReport::verdict);

    let epsilon = match epsilon_bound(family, tau_a) {
        Ok(e) => Some(e),
        Err(e) => {
            warnings.push(format!("epsilon bound unavailable: {e}"));
            None
        }
    };

    let traj = integrate(
        VectorField::Original,
        schedule,
        family,
        *params,
        profile,
        &InitialState::World(initial.clone()),
        *integrator,
    )?;

    let last = traj.len() - 1;
    let final_distance = consensus_distance(&traj.body_state(last));
    let hit = first_below(&traj, CSV_THRESHOLD);
    let time_to_threshold = hit.map(|k| traj.times()[k]);

    let decay_fit = match fit_exponential_decay(&traj) {
        Ok(f) => Some(f),
        Err(e) => {
            warnings.push(format!("decay fit unavailable: {e}"));
            None
        }
    };

    let energy = match decay_fit {
        Some(fit) if fit.b > 0.0 => {
            match energy_summary(&traj, &scenario, fit, opts.energy_windows) {
                Ok(s) => {
                    notes.push(format!(
                        "energy bounds use the fitted decay constants a = {:.6e}, b = {:.6e}",
                        fit.a, fit.b
                    ));
                    Some(s)
                }
                Err(e) => {
                    warnings.push(format!("energy summary unavailable: {e}"));
                    None
                }
            }
        }
        Some(fit) => {
            warnings.push(format!(
                "fitted decay rate {:.3e} is not positive; energy bound skipped",
                fit.b
            ));
            None
        }
        None => None,
    };

    let window_energy_decreasing = sliding_window_energy(
        &traj,
        family,
        *params,
        OutputChannel::H,
        profile.period(),
        100,
    )
    .ok()
    .map(|s| decreasing_trend(&s));

    if matches!(cfg.init, super::InitSpec::Random { .. }) {
        notes.push("random initial states and the horizon are artifact choices".into());
    }

    if let Some(path) = &opts.csv {
        let file = std::fs::File::create(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut w = std::io::BufWriter::new(file);
        write_csv(&traj, family, *params, &mut w, opts.csv_stride, hit)?;
        w.flush()?;
    }

    let report = RunReport {
        gujc,
        gujc_verdict,
        epsilon,
        final_distance,
        threshold: CSV_THRESHOLD,
        time_to_threshold,
        decay_fit,
        energy,
        window_energy_decreasing,
        max_w_increase: max_w_increase(&traj),
        switch_events: traj.switch_events(),
        samples: traj.len(),
        step: it.step,
        t0: it.t0,
        tf: it.tf,
        elapsed_s: started.elapsed().as_secs_f64(),
        warnings,
        notes,
    };
    Ok(RunOutcome {
        report,
        trajectory: traj,
        scenario,
    })
}

fn energy_summary(
    traj: &Trajectory,
    scenario: &Scenario,
    fit: DecayFit,
    count: usize,
) -> Result<EnergySummary> {
    let consts = BoundConstants::new(
        fit.a,
        fit.b,
        &scenario.family,
        scenario.params,
        &scenario.profile,
    )?;
    let t = traj.times();
    let (start, end) = (t[0], t[t.len() - 1]);
    let windows: Vec<(f64, f64)> = (0..count)
        .map(|i| (start + (end - start) * i as f64 / count as f64, end))
        .collect();
    let h = output_energies(
        traj,
        &scenario.family,
        scenario.params,
        OutputChannel::H,
        &windows,
        &consts,
    )?;
    let h1 = output_energies(
        traj,
        &scenario.family,
        scenario.params,
        OutputChannel::H1,
        &windows,
        &consts,
    )?;
    let min = |r: &[EnergyReport]| r.iter().map(|e| e.slack).fold(f64::INFINITY, f64::min);
    Ok(EnergySummary {
        windows: count,
        min_slack_h: min(&h),
        min_slack_h1: min(&h1),
        infinite_bounds: h.iter().filter(|e| e.bound.is_infinite()).count(),
        reports: h.into_iter().chain(h1).collect(),
    })
}

const CSV_TAIL: [&str; 6] = ["dist_omega", "W", "U", "V", "h1", "h_norm_sq"];

/// Writes the trajectory with its per-sample diagnostics. Rows are every
/// `stride`-th sample, the last sample, and `keep` if given.
pub fn write_csv<W: Write>(
    traj: &Trajectory,
    family: &GraphFamily,
    params: crate::dynamics::ControllerParams,
    out: &mut W,
    stride: usize,
    keep: Option<usize>,
) -> Result<()> {
    let n = traj.n();
    let mut header = vec!["t".to_string(), "mode".to_string()];
    for i in 1..=n {
        header.extend([format!("x{i}"), format!("y{i}"), format!("theta{i}")]);
    }
    header.extend(CSV_TAIL.iter().map(|s| s.to_string()));
    writeln!(out, "{}", header.join(","))?;

    let stride = stride.max(1);
    let last = traj.len().saturating_sub(1);
    let mut line = String::new();
    for k in 0..traj.len() {
        if k % stride != 0 && k != last && Some(k) != keep {
            continue;
        }
        let mode = traj.modes()[k];
        let g = family.get(mode)?;
        let world = traj.world_state(k);
        let body = traj.body_state(k);
        let m = monitor_values(&body);
        line.clear();
        line.push_str(&format!("{:.16e},{}", traj.times()[k], mode));
        for i in 0..n {
            line.push_str(&format!(
                ",{:.16e},{:.16e},{:.16e}",
                world.x[i], world.y[i], world.theta[i]
            ));
        }
        for v in [
            consensus_distance(&body),
            m.w,
            m.u,
            m.v,
            output_sq(OutputChannel::H1, &body, g, params)?.sqrt(),
            output_sq(OutputChannel::H, &body, g, params)?,
        ] {
            line.push_str(&format!(",{v:.16e}"));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Thread cap from `SWSIM_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("SWSIM_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs independent scenarios in parallel; results keep the input order.
pub fn run_batch(
    jobs: &[(ScenarioConfig, RunOptions)],
    threads: Option<usize>,
) -> Vec<Result<RunOutcome>> {
    let work = || {
        jobs.par_iter()
            .map(|(cfg, opts)| run_scenario(cfg, opts))
            .collect::<Vec<_>>()
    };
    match threads.or_else(threads_from_env) {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(work),
            Err(_) => work(),
        },
        None => work(),
    }
}
