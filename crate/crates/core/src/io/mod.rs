//! Scenario configuration, execution, reports and CSV output.

mod run;

pub use run::{
    run_batch, run_scenario, threads_from_env, write_csv, EnergySummary, RunOptions, RunOutcome,
    RunReport, CSV_THRESHOLD, DEFAULT_ENERGY_WINDOWS,
};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    check_phase_condition, ControllerParams, ExcitationProfile, ExcitationShape, IntegratorConfig,
    SwarmState,
};
use crate::error::{Error, Result};
use crate::graph::{GraphFamily, Mode, WeightedGraph};
use crate::switching::{ScheduleSpec, SwitchSchedule};

/// The dwell-time-free chain scenario, shipped with the crate.
pub const DEFAULT_SCENARIO: &str = include_str!("../../data/scenario_4d.json");

/// One undirected edge; vertices are numbered from 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSpec {
    pub kv: f64,
    pub kw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcitationSpec {
    #[serde(rename = "T")]
    pub window: f64,
    #[serde(rename = "T0")]
    pub period: f64,
    pub c: ExcitationShape,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    pub step: f64,
    pub t0: f64,
    pub tf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitSpec {
    Explicit {
        states: Vec<AgentState>,
    },
    /// Uniform in `[-bound, bound]` per coordinate from a ChaCha8 stream
    /// seeded with `seed`.
    Random {
        bound: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n: usize,
    pub graphs: BTreeMap<Mode, Vec<EdgeSpec>>,
    pub schedule: ScheduleSpec,
    pub controller: ControllerSpec,
    pub excitation: ExcitationSpec,
    pub integrator: IntegratorSpec,
    pub init: InitSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// Runtime objects built from a validated config.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub family: GraphFamily,
    pub schedule: SwitchSchedule,
    pub params: ControllerParams,
    pub profile: ExcitationProfile,
    pub integrator: IntegratorConfig,
    pub initial: SwarmState,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg = Self::from_json_unchecked(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Syntax and key checks only; the invariants are left to the caller.
    pub fn from_json_unchecked(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// The shipped default scenario.
    pub fn default_4d() -> Self {
        Self::from_json(DEFAULT_SCENARIO).expect("shipped scenario is valid")
    }

    pub fn validate(&self) -> Result<()> {
        self.build_with_horizon(self.integrator.tf).map(|_| ())
    }

    pub fn family(&self) -> Result<GraphFamily> {
        if self.n < 2 {
            return Err(Error::Config(format!(
                "n must be at least 2, got {}",
                self.n
            )));
        }
        if self.graphs.is_empty() {
            return Err(Error::Config("graphs must list at least one mode".into()));
        }
        let mut map = BTreeMap::new();
        for (&mode, edges) in &self.graphs {
            let mut zero_based = Vec::with_capacity(edges.len());
            for e in edges {
                if e.i == 0 || e.j == 0 || e.i > self.n || e.j > self.n {
                    return Err(Error::Config(format!(
                        "mode {mode}: edge ({}, {}) outside vertices 1..={}",
                        e.i, e.j, self.n
                    )));
                }
                zero_based.push((e.i - 1, e.j - 1, e.w));
            }
            let g = WeightedGraph::from_edges(self.n, &zero_based)
                .map_err(|e| Error::Config(format!("mode {mode}: {e}")))?;
            map.insert(mode, g);
        }
        GraphFamily::new(map)
    }

    /// The excitation without the phase condition enforced.
    pub fn raw_profile(&self) -> Result<ExcitationProfile> {
        let e = &self.excitation;
        ExcitationProfile::new(e.window, e.period, e.c.clone())
    }

    pub fn profile(&self) -> Result<ExcitationProfile> {
        let prof = self.raw_profile()?;
        let phase = check_phase_condition(&prof);
        if !phase.ok {
            return Err(Error::PhaseCondition {
                integral: phase.integral,
                nearest_k: phase.nearest_k,
            });
        }
        Ok(prof)
    }

    pub fn initial_state(&self) -> Result<SwarmState> {
        match &self.init {
            InitSpec::Explicit { states } => {
                if states.len() != self.n {
                    return Err(Error::Config(format!(
                        "init lists {} states for n = {}",
                        states.len(),
                        self.n
                    )));
                }
                SwarmState::new(
                    states.iter().map(|s| s.x).collect(),
                    states.iter().map(|s| s.y).collect(),
                    states.iter().map(|s| s.theta).collect(),
                )
            }
            InitSpec::Random { bound, seed } => {
                if !(bound.is_finite() && *bound > 0.0) {
                    return Err(Error::Config(format!(
                        "init bound must be > 0, got {bound}"
                    )));
                }
                Ok(random_state(self.n, *bound, *seed))
            }
        }
    }

    /// Builds the runtime objects, generating the schedule out to at least
    /// `horizon`.
    pub fn build_with_horizon(&self, horizon: f64) -> Result<Scenario> {
        self.build_with(horizon, true)
    }

    /// As [`build_with_horizon`](Self::build_with_horizon); with
    /// `enforce_phase = false` a phase-condition violation is accepted so
    /// counterexamples can be simulated.
    pub fn build_with(&self, horizon: f64, enforce_phase: bool) -> Result<Scenario> {
        let family = self.family()?;
        let it = &self.integrator;
        let integrator = IntegratorConfig::new(it.step, it.t0, it.tf)?;
        let schedule = SwitchSchedule::from_spec(&self.schedule, horizon.max(it.tf))?;
        let used: Vec<Mode> = match &self.schedule {
            ScheduleSpec::Explicit { events } => events.iter().map(|e| e.mode).collect(),
            ScheduleSpec::Section4d { .. } => vec![Mode(1), Mode(2), Mode(3)],
        };
        for m in used {
            family.get(m)?;
        }
        if schedule.t0() > it.t0 {
            return Err(Error::Config(format!(
                "schedule starts at {} after integrator t0 = {}",
                schedule.t0(),
                it.t0
            )));
        }
        let params = ControllerParams::new(self.controller.kv, self.controller.kw)?;
        let profile = if enforce_phase {
            self.profile()?
        } else {
            self.raw_profile()?
        };
        let initial = self.initial_state()?;
        Ok(Scenario {
            family,
            schedule,
            params,
            profile,
            integrator,
            initial,
        })
    }

    pub fn build(&self) -> Result<Scenario> {
        self.build_with_horizon(self.integrator.tf)
    }
}

/// Uniform draws in `[-bound, bound]`: all `x`, then all `y`, then all
/// `theta`.
pub fn random_state(n: usize, bound: f64, seed: u64) -> SwarmState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || {
        (0..n)
            .map(|_| rng.gen_range(-bound..=bound))
            .collect::<Vec<f64>>()
    };
    let x = draw();
    let y = draw();
    let theta = draw();
    SwarmState { x, y, theta }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Reads and validates a JSON scenario file.
pub fn parse_config(path: &Path) -> Result<ScenarioConfig> {
    ScenarioConfig::from_json(&read(path)?)
}

/// Reads a JSON scenario file, checking syntax and keys only.
pub fn parse_config_unchecked(path: &Path) -> Result<ScenarioConfig> {
    ScenarioConfig::from_json_unchecked(&read(path)?)
}
