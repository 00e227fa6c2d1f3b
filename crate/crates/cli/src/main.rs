//! `swsim`: command-line front end for the swarm consensus toolkit.
//!
//! Exit codes: 0 success, 1 invalid input or usage, 2 runtime failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use swarmsim::diagnostics::{epsilon_bound_suite, gronwall_suite, laplacian_identity_suite};
use swarmsim::dynamics::check_phase_condition;
use swarmsim::io::{
    parse_config, parse_config_unchecked, run_batch, run_scenario, InitSpec, RunOptions,
    ScenarioConfig,
};
use swarmsim::switching::{check_gujc, epsilon_bound, JointGraphParams, ScheduleSpec};
use swarmsim::Error;

#[derive(Parser)]
#[command(
    name = "swsim",
    version,
    about = "Unicycle swarm consensus under dwell-time-free switching"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario, writing the trajectory CSV and printing the report.
    Simulate {
        config: PathBuf,
        /// CSV path; overrides the config's `output` key.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Also write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Keep every N-th sample in the CSV.
        #[arg(long, default_value_t = 10)]
        stride: usize,
        #[arg(long)]
        tau_a: Option<f64>,
        /// Span checked for joint connectivity.
        #[arg(long)]
        horizon: Option<f64>,
        /// Simulate even if the phase condition fails.
        #[arg(long)]
        allow_phase_violation: bool,
    },
    /// Check joint connectivity of the configured schedule.
    CheckGujc {
        config: PathBuf,
        /// Span to check; defaults to the run length.
        #[arg(long)]
        horizon: Option<f64>,
        /// Defaults to T/6.
        #[arg(long)]
        tau_a: Option<f64>,
        /// Joint-graph window; defaults to the excitation's T.
        #[arg(long)]
        window: Option<f64>,
    },
    /// Spectral lower bound epsilon for the configured family.
    Epsilon {
        config: PathBuf,
        #[arg(long)]
        tau_a: Option<f64>,
    },
    /// Check that the excitation integral avoids multiples of pi.
    PhaseCheck { config: PathBuf },
    /// Rerun the dwell-time-free chain scenario.
    #[command(name = "reproduce-4d")]
    Reproduce4d {
        /// Schedule period; the excitation uses T = T' and T0 = 3T'.
        #[arg(long)]
        t_prime: Option<f64>,
        #[arg(long, default_value = "swsim-out")]
        out: PathBuf,
        /// Number of random initial states (seeds 1..=N).
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long, default_value_t = 10)]
        stride: usize,
    },
    /// Randomized check of the Grönwall-type lemma.
    GronwallSelftest {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Randomized checks of the Laplacian identities and the epsilon bound.
    LemmaSelftest {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

enum Failure {
    Usage(String),
    Run(Error),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

/// Writes to stdout; a closed pipe (`swsim ... | head`) is not an error.
fn emit(text: &str) -> Result<(), Failure> {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
            Err(Failure::Run(Error::Io(format!("stdout: {e}"))))
        }
        _ => Ok(()),
    }
}

fn print_json(v: &serde_json::Value) -> Result<(), Failure> {
    emit(&serde_json::to_string_pretty(v).expect("json"))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Run(Error::Io(format!("{}: {e}", path.display()))))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate {
            config,
            csv,
            report,
            stride,
            tau_a,
            horizon,
            allow_phase_violation,
        } => {
            let cfg = if allow_phase_violation {
                parse_config_unchecked(&config)?
            } else {
                parse_config(&config)?
            };
            let opts = RunOptions {
                tau_a,
                gujc_horizon: horizon,
                csv: csv.or_else(|| cfg.output.clone()),
                csv_stride: stride,
                enforce_phase: !allow_phase_violation,
                ..RunOptions::default()
            };
            let out = run_scenario(&cfg, &opts)?;
            for w in &out.report.warnings {
                eprintln!("warning: {w}");
            }
            let text = serde_json::to_string_pretty(&out.report).expect("json");
            if let Some(path) = report {
                write_file(&path, &text)?;
            }
            emit(&text)?;
        }
        Command::CheckGujc {
            config,
            horizon,
            tau_a,
            window,
        } => {
            let cfg = parse_config_unchecked(&config)?;
            let window = window.unwrap_or(cfg.excitation.window);
            let tau_a = tau_a.unwrap_or(window / 6.0);
            let span = horizon.unwrap_or(cfg.integrator.tf - cfg.integrator.t0);
            let s = cfg.build_with(span.max(cfg.integrator.tf), false)?;
            let r = check_gujc(
                &s.schedule,
                &s.family,
                JointGraphParams::new(tau_a, window)?,
                span,
            )?;
            if !r.holds {
                eprintln!("warning: joint connectivity {}", r.verdict());
            }
            print_json(&json!({ "verdict": r.verdict(), "report": r }))?;
        }
        Command::Epsilon { config, tau_a } => {
            let cfg = parse_config_unchecked(&config)?;
            let tau_a = tau_a.unwrap_or(cfg.excitation.window / 6.0);
            let e = epsilon_bound(&cfg.family()?, tau_a)?;
            print_json(&json!({ "tau_a": tau_a, "bound": e }))?;
        }
        Command::PhaseCheck { config } => {
            let cfg = parse_config_unchecked(&config)?;
            let p = check_phase_condition(&cfg.raw_profile()?);
            print_json(&json!({
                "ok": p.ok,
                "integral": p.integral,
                "integral_over_pi": p.integral / std::f64::consts::PI,
                "nearest_k": p.nearest_k,
            }))?;
            if !p.ok {
                return Err(Failure::Run(Error::PhaseCondition {
                    integral: p.integral,
                    nearest_k: p.nearest_k,
                }));
            }
        }
        Command::Reproduce4d {
            t_prime,
            out,
            seeds,
            stride,
        } => {
            if seeds == 0 {
                return Err(Failure::Usage("--seeds must be at least 1".into()));
            }
            let mut base = ScenarioConfig::default_4d();
            if let Some(tp) = t_prime {
                base.schedule = ScheduleSpec::Section4d {
                    t_prime: tp,
                    horizon: None,
                };
                base.excitation.window = tp;
                base.excitation.period = 3.0 * tp;
                base.validate()?;
            }
            fs::create_dir_all(&out)
                .map_err(|e| Failure::Run(Error::Io(format!("{}: {e}", out.display()))))?;
            let bound = match base.init {
                InitSpec::Random { bound, .. } => bound,
                InitSpec::Explicit { .. } => 10.0,
            };
            let jobs: Vec<_> = (1..=seeds)
                .map(|seed| {
                    let mut cfg = base.clone();
                    cfg.init = InitSpec::Random { bound, seed };
                    let opts = RunOptions {
                        csv: Some(out.join(format!("trajectory_seed{seed}.csv"))),
                        csv_stride: stride,
                        ..RunOptions::default()
                    };
                    (cfg, opts)
                })
                .collect();
            let mut summary = Vec::new();
            for ((cfg, _), res) in jobs.iter().zip(run_batch(&jobs, None)) {
                let o = res?;
                let seed = match cfg.init {
                    InitSpec::Random { seed, .. } => seed,
                    InitSpec::Explicit { .. } => 0,
                };
                let text = serde_json::to_string_pretty(&o.report).expect("json");
                write_file(&out.join(format!("report_seed{seed}.json")), &text)?;
                summary.push(json!({
                    "seed": seed,
                    "time_to_threshold": o.report.time_to_threshold,
                    "final_distance": o.report.final_distance,
                    "switch_events": o.report.switch_events,
                    "gujc": o.report.gujc_verdict,
                }));
            }
            write_file(&out.join("config.json"), &base.to_json())?;
            print_json(&json!({ "out": out, "runs": summary }))?;
        }
        Command::GronwallSelftest { instances, seed } => {
            let s = gronwall_suite(instances, seed)?;
            print_json(&json!({ "ok": s.ok(), "suite": s }))?;
            if !s.ok() {
                return Err(Failure::Check("Grönwall self-test failed".into()));
            }
        }
        Command::LemmaSelftest { instances, seed } => {
            let ident = laplacian_identity_suite(instances, seed)?;
            let cfg = ScenarioConfig::default_4d();
            let horizon = 20.0 * cfg.excitation.window;
            let s = cfg.build_with_horizon(horizon)?;
            let gram = epsilon_bound_suite(
                &s.schedule,
                &s.family,
                cfg.excitation.window / 6.0,
                cfg.excitation.window,
                horizon,
                10 * instances,
                seed,
            )?;
            let ok = ident.passed() && gram.passed;
            print_json(&json!({ "ok": ok, "laplacian_identities": ident, "epsilon_bound": gram }))?;
            if !ok {
                return Err(Failure::Check("lemma self-test failed".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
