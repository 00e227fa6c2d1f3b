//! Switching signals, occupancy integrals, joint graphs and the generalized
//! uniformly jointly connected (GUJC) condition.
//!
//! A [`SwitchSchedule`] is piecewise constant and right-continuous. Switch
//! instants are generated lazily and memoized, so dwell-time-free signals
//! (whose event count grows superlinearly with the horizon) only materialize
//! what a query actually touches.

use std::collections::BTreeMap;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    is_connected, laplacian, sigma_min_positive, union_laplacian, DenseMatrix, GraphFamily, Mode,
    WeightedGraph,
};

/// Relative slack on `occupancy >= tau_a`. Occupancies are differences of
/// accumulated switch instants and can land a few ulps under an exact tie.
pub const OCCUPANCY_REL_TOL: f64 = 1e-9;

/// Largest mode set [`epsilon_bound`] will enumerate.
pub const MAX_ENUMERATED_MODES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchEvent {
    pub t: f64,
    pub mode: Mode,
}

/// Serializable description of a schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ScheduleSpec {
    /// First event fixes the start time and initial mode.
    Explicit { events: Vec<SwitchEvent> },
    /// The dwell-time-free three-mode signal with period `t_prime`.
    Section4d {
        t_prime: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Source {
    Explicit,
    Section4d { t_prime: f64 },
}

#[derive(Debug, Clone)]
struct EventCache {
    events: Vec<SwitchEvent>,
    // (k, l, j): next sub-interval of the dwell-time-free generator
    cursor: (u64, u64, u64),
    exhausted: bool,
}

#[derive(Debug)]
pub struct SwitchSchedule {
    t0: f64,
    initial: Mode,
    horizon: f64,
    source: Source,
    cache: RwLock<EventCache>,
}

impl Clone for SwitchSchedule {
    fn clone(&self) -> Self {
        Self {
            t0: self.t0,
            initial: self.initial,
            horizon: self.horizon,
            source: self.source,
            cache: RwLock::new(self.cache.read().unwrap().clone()),
        }
    }
}

impl SwitchSchedule {
    /// Schedule that stays in `mode` forever.
    pub fn constant(t0: f64, mode: Mode) -> Result<Self> {
        Self::explicit(&[SwitchEvent { t: t0, mode }])
    }

    /// Schedule from `(t, mode)` events; the first event is the start.
    /// Events that repeat the current mode are dropped.
    pub fn explicit(events: &[SwitchEvent]) -> Result<Self> {
        let first = events
            .first()
            .ok_or_else(|| Error::InvalidSchedule("no events".into()))?;
        if !(first.t.is_finite() && first.t >= 0.0) {
            return Err(Error::InvalidSchedule(format!(
                "bad start time {}",
                first.t
            )));
        }
        let mut kept: Vec<SwitchEvent> = Vec::new();
        let mut current = first.mode;
        let mut last_t = first.t;
        for e in &events[1..] {
            if !e.t.is_finite() || e.t <= last_t {
                return Err(Error::InvalidSchedule(format!(
                    "switch instants must be strictly increasing ({} after {})",
                    e.t, last_t
                )));
            }
            last_t = e.t;
            if e.mode != current {
                kept.push(*e);
                current = e.mode;
            }
        }
        Ok(Self {
            t0: first.t,
            initial: first.mode,
            horizon: f64::INFINITY,
            source: Source::Explicit,
            cache: RwLock::new(EventCache {
                events: kept,
                cursor: (0, 0, 0),
                exhausted: true,
            }),
        })
    }

    /// The dwell-time-free signal: for every `k >= 0` and `l = 0..=k` the block
    /// `[(k + l/(k+1)) T', (k + (l+1)/(k+1)) T')` is split into equal thirds
    /// with modes 1, 2, 3.
    pub fn section4d(t_prime: f64, horizon: f64) -> Result<Self> {
        if !(t_prime.is_finite() && t_prime > 0.0) {
            return Err(Error::InvalidSchedule(format!(
                "t_prime must be > 0, got {t_prime}"
            )));
        }
        if !(horizon > 0.0) {
            return Err(Error::InvalidSchedule(format!(
                "horizon must be > 0, got {horizon}"
            )));
        }
        Ok(Self {
            t0: 0.0,
            initial: Mode(1),
            horizon,
            source: Source::Section4d { t_prime },
            cache: RwLock::new(EventCache {
                events: Vec::new(),
                cursor: (0, 0, 1),
                exhausted: false,
            }),
        })
    }

    pub fn from_spec(spec: &ScheduleSpec, default_horizon: f64) -> Result<Self> {
        match spec {
            ScheduleSpec::Explicit { events } => Self::explicit(events),
            ScheduleSpec::Section4d { t_prime, horizon } => {
                Self::section4d(*t_prime, horizon.unwrap_or(default_horizon))
            }
        }
    }

    pub fn spec(&self) -> ScheduleSpec {
        match self.source {
            Source::Explicit => {
                let mut events = vec![SwitchEvent {
                    t: self.t0,
                    mode: self.initial,
                }];
                events.extend(self.cache.read().unwrap().events.iter().copied());
                ScheduleSpec::Explicit { events }
            }
            Source::Section4d { t_prime } => ScheduleSpec::Section4d {
                t_prime,
                horizon: Some(self.horizon),
            },
        }
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn initial_mode(&self) -> Mode {
        self.initial
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t < self.t0 {
            return Err(Error::BeforeStart { t, t0: self.t0 });
        }
        if t > self.horizon {
            return Err(Error::BeyondHorizon {
                t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    /// Makes sure every switch instant `<= t` is cached.
    fn ensure(&self, t: f64) {
        {
            let c = self.cache.read().unwrap();
            if c.exhausted || c.events.last().is_some_and(|e| e.t > t) {
                return;
            }
        }
        let mut c = self.cache.write().unwrap();
        let Source::Section4d { t_prime } = self.source else {
            return;
        };
        while !c.exhausted && c.events.last().is_none_or(|e| e.t <= t) {
            let (k, l, j) = c.cursor;
            let frac = (3 * l + j) as f64 / (3 * (k + 1)) as f64;
            let time = t_prime * (k as f64 + frac);
            if let Some(prev) = c.events.last() {
                assert!(time > prev.t, "switch instants must be strictly increasing");
            }
            c.events.push(SwitchEvent {
                t: time,
                mode: Mode(j as u32 + 1),
            });
            if time > self.horizon {
                c.exhausted = true;
            }
            c.cursor = if j < 2 {
                (k, l, j + 1)
            } else if l < k {
                (k, l + 1, 0)
            } else {
                (k + 1, 0, 0)
            };
        }
    }

    /// `lambda(t)`, right-continuous at switch instants.
    pub fn mode_at(&self, t: f64) -> Result<Mode> {
        self.check_time(t)?;
        self.ensure(t);
        let c = self.cache.read().unwrap();
        let idx = c.events.partition_point(|e| e.t <= t);
        Ok(if idx == 0 {
            self.initial
        } else {
            c.events[idx - 1].mode
        })
    }

    /// Switch events with `t1 < t < t2`.
    pub fn switches_between(&self, t1: f64, t2: f64) -> Result<Vec<SwitchEvent>> {
        self.check_interval(t1, t2)?;
        self.ensure(t2);
        let c = self.cache.read().unwrap();
        let lo = c.events.partition_point(|e| e.t <= t1);
        let hi = c.events.partition_point(|e| e.t < t2);
        Ok(c.events[lo..hi.max(lo)].to_vec())
    }

    /// Number of switch events with `t1 < t < t2`.
    pub fn count_switches_between(&self, t1: f64, t2: f64) -> Result<usize> {
        self.check_interval(t1, t2)?;
        self.ensure(t2);
        let c = self.cache.read().unwrap();
        let lo = c.events.partition_point(|e| e.t <= t1);
        let hi = c.events.partition_point(|e| e.t < t2);
        Ok(hi.saturating_sub(lo))
    }

    fn check_interval(&self, t1: f64, t2: f64) -> Result<()> {
        if !(t1 <= t2) || !t1.is_finite() || !t2.is_finite() {
            return Err(Error::InvalidInterval { t1, t2 });
        }
        self.check_time(t1)?;
        self.check_time(t2)
    }

    /// Decomposes `[t1, t2)` into maximal constant-mode pieces.
    pub fn segments(&self, t1: f64, t2: f64) -> Result<Vec<(f64, f64, Mode)>> {
        self.check_interval(t1, t2)?;
        if t1 == t2 {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        let mut start = t1;
        let mut mode = self.mode_at(t1)?;
        for e in self.switches_between(t1, t2)? {
            out.push((start, e.t, mode));
            start = e.t;
            mode = e.mode;
        }
        out.push((start, t2, mode));
        Ok(out)
    }

    /// Exact `int_{t1}^{t2} [lambda(s) == mode] ds`.
    pub fn occupancy(&self, mode: Mode, t1: f64, t2: f64) -> Result<f64> {
        Ok(self
            .segments(t1, t2)?
            .into_iter()
            .filter(|s| s.2 == mode)
            .map(|(a, b, _)| b - a)
            .sum())
    }

    /// Occupancy of every mode active somewhere in `[t1, t2)`.
    pub fn occupancies(&self, t1: f64, t2: f64) -> Result<BTreeMap<Mode, f64>> {
        let mut out = BTreeMap::new();
        for (a, b, m) in self.segments(t1, t2)? {
            *out.entry(m).or_insert(0.0) += b - a;
        }
        Ok(out)
    }

    /// Smallest gap between consecutive switch instants inside `[t1, t2]`.
    pub fn min_switch_gap(&self, t1: f64, t2: f64) -> Result<Option<f64>> {
        let ev = self.switches_between(t1, t2)?;
        Ok(ev
            .windows(2)
            .map(|w| w[1].t - w[0].t)
            .min_by(f64::total_cmp))
    }
}

/// `(tau_a, T)` with `T >= tau_a > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointGraphParams {
    pub tau_a: f64,
    pub window: f64,
}

impl JointGraphParams {
    pub fn new(tau_a: f64, window: f64) -> Result<Self> {
        if !(tau_a > 0.0 && window >= tau_a && window.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need T >= tau_a > 0, got tau_a = {tau_a}, T = {window}"
            )));
        }
        Ok(Self { tau_a, window })
    }
}

fn qualifies(occ: f64, tau_a: f64) -> bool {
    occ >= tau_a * (1.0 - OCCUPANCY_REL_TOL)
}

/// Modes whose occupancy on `[t1, t2)` reaches `tau_a`.
pub fn qualifying_modes(sched: &SwitchSchedule, tau_a: f64, t1: f64, t2: f64) -> Result<Vec<Mode>> {
    Ok(sched
        .occupancies(t1, t2)?
        .into_iter()
        .filter(|&(_, occ)| qualifies(occ, tau_a))
        .map(|(m, _)| m)
        .collect())
}

/// Edge-union (weights summed) of the graphs active for at least `tau_a`
/// on `[t1, t2)`.
pub fn joint_graph(
    sched: &SwitchSchedule,
    family: &GraphFamily,
    tau_a: f64,
    t1: f64,
    t2: f64,
) -> Result<WeightedGraph> {
    if !(t2 > t1) {
        return Err(Error::InvalidInterval { t1, t2 });
    }
    let mut g = WeightedGraph::empty(family.n())?;
    for m in qualifying_modes(sched, tau_a, t1, t2)? {
        g = g.union(family.get(m)?)?;
    }
    Ok(g)
}

/// `int_t^{t+T} L(lambda(s)) ds`, exact over switch-aligned pieces.
pub fn window_gramian(
    sched: &SwitchSchedule,
    family: &GraphFamily,
    t: f64,
    window: f64,
) -> Result<DenseMatrix> {
    let mut acc = DenseMatrix::zeros(family.n(), family.n());
    for (m, occ) in sched.occupancies(t, t + window)? {
        acc += laplacian(family.get(m)?) * occ;
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GujcReport {
    pub holds: bool,
    pub witness_t: Option<f64>,
    pub tau_a: f64,
    pub window: f64,
    pub t0: f64,
    pub horizon: f64,
    pub points_checked: usize,
}

impl GujcReport {
    /// A finite-horizon certificate, never an unconditional one.
    pub fn verdict(&self) -> String {
        let end = self.t0 + self.horizon;
        if self.holds {
            format!("holds on [{}, {}]", self.t0, end)
        } else {
            format!(
                "fails on [{}, {}]: joint graph disconnected at t = {}",
                self.t0,
                end,
                self.witness_t.unwrap_or(f64::NAN)
            )
        }
    }
}

/// Checks that every `tau_a`-joint graph over `[t, t + T)` is connected for
/// all window starts `t` in `[t0, t0 + horizon - T]`.
///
/// Each occupancy is piecewise linear in `t` with kinks at switch instants
/// and at switch instants minus `T`. Between kinks the qualifying set can only
/// change where some occupancy crosses `tau_a`, so testing kinks, crossings
/// and the midpoints between them covers every distinct joint graph.
pub fn check_gujc(
    sched: &SwitchSchedule,
    family: &GraphFamily,
    params: JointGraphParams,
    horizon: f64,
) -> Result<GujcReport> {
    let JointGraphParams { tau_a, window } = params;
    if !(horizon > window) {
        return Err(Error::InvalidParameter(format!(
            "horizon {horizon} must exceed the window {window}"
        )));
    }
    let t0 = sched.t0();
    let last_start = t0 + horizon - window;

    let mut kinks = vec![t0, last_start];
    for e in sched.switches_between(t0, t0 + horizon)? {
        if e.t < last_start {
            kinks.push(e.t);
        }
        let shifted = e.t - window;
        if shifted > t0 && shifted < last_start {
            kinks.push(shifted);
        }
    }
    kinks.sort_by(f64::total_cmp);
    kinks.dedup();

    let mut points = kinks.clone();
    let modes: Vec<Mode> = family.modes().collect();
    let mut occ_prev = sched.occupancies(kinks[0], kinks[0] + window)?;
    for pair in kinks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let occ_next = sched.occupancies(b, b + window)?;
        for m in &modes {
            let oa = occ_prev.get(m).copied().unwrap_or(0.0);
            let ob = occ_next.get(m).copied().unwrap_or(0.0);
            if (oa - tau_a) * (ob - tau_a) < 0.0 {
                let c = a + (tau_a - oa) * (b - a) / (ob - oa);
                if c > a && c < b {
                    points.push(c);
                }
            }
        }
        occ_prev = occ_next;
    }
    points.sort_by(f64::total_cmp);
    points.dedup();

    let mut grid = Vec::with_capacity(2 * points.len());
    for pair in points.windows(2) {
        grid.push(pair[0]);
        grid.push(0.5 * (pair[0] + pair[1]));
    }
    grid.push(*points.last().unwrap());

    for &t in &grid {
        let g = joint_graph(sched, family, tau_a, t, t + window)?;
        if !is_connected(&g) {
            return Ok(GujcReport {
                holds: false,
                witness_t: Some(t),
                tau_a,
                window,
                t0,
                horizon,
                points_checked: grid.len(),
            });
        }
    }
    Ok(GujcReport {
        holds: true,
        witness_t: None,
        tau_a,
        window,
        t0,
        horizon,
        points_checked: grid.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonBound {
    /// `tau_a * epsilon_prime`.
    pub epsilon: f64,
    /// Minimum algebraic connectivity over all connected mode subsets.
    pub epsilon_prime: f64,
    pub minimizing_subset: Vec<Mode>,
    pub connected_subsets: usize,
}

/// Lower bound on `u^T [int_t^{t+T} L] u` over unit `u` orthogonal to `1`,
/// by brute-force enumeration of the mode subsets whose union is connected.
pub fn epsilon_bound(family: &GraphFamily, tau_a: f64) -> Result<EpsilonBound> {
    let modes: Vec<Mode> = family.modes().collect();
    if modes.len() > MAX_ENUMERATED_MODES {
        return Err(Error::TooManyModes(modes.len()));
    }
    if !(tau_a > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tau_a must be > 0, got {tau_a}"
        )));
    }
    let mut best: Option<(f64, Vec<Mode>)> = None;
    let mut connected = 0;
    for mask in 1u32..(1u32 << modes.len()) {
        let subset: Vec<Mode> = modes
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, m)| *m)
            .collect();
        let mut union = WeightedGraph::empty(family.n())?;
        for &m in &subset {
            union = union.union(family.get(m)?)?;
        }
        if !is_connected(&union) {
            continue;
        }
        connected += 1;
        let sigma = sigma_min_positive(&union_laplacian(family, &subset)?)?;
        if best.as_ref().is_none_or(|(b, _)| sigma < *b) {
            best = Some((sigma, subset));
        }
    }
    let (epsilon_prime, minimizing_subset) = best.ok_or(Error::NoConnectedSubset)?;
    Ok(EpsilonBound {
        epsilon: tau_a * epsilon_prime,
        epsilon_prime,
        minimizing_subset,
        connected_subsets: connected,
    })
}
