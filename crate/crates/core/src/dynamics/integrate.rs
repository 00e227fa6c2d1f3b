//! Fixed-step RK4 with event-aligned sub-stepping.
//!
//! The right-hand side jumps at switch instants and at the breakpoints of
//! `p(t)`. Every nominal step is cut at those instants so each RK4 stage
//! sees one smooth vector field; the mode and the excitation branch of a
//! sub-step are read at its midpoint.

use crate::error::{Error, Result};
use crate::graph::{GraphFamily, Mode, WeightedGraph};
use crate::switching::SwitchSchedule;

use super::{
    body_transform, changed_rhs_with, compact_rhs_with, control_input_with, original_rhs_with,
    world_from_body, BodyFrameState, ControllerParams, ExcitationProfile, Inputs, SwarmState,
};

/// Abort when one nominal step holds more switch events than this.
pub const DEFAULT_EVENT_CAP: usize = 10_000;

/// Sub-steps shorter than this (relative to `max(1, |t|)`) are merged into
/// their neighbor.
const MIN_SUBSTEP_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorField {
    /// Unicycles in the world frame under the distributed law.
    Original,
    /// The same closed loop written in body-frame coordinates.
    Compact,
    /// Zeroed-output system: pure rotation at rate `p`.
    Changed,
}

impl VectorField {
    pub fn frame(self) -> Frame {
        match self {
            VectorField::Original => Frame::World,
            VectorField::Compact | VectorField::Changed => Frame::Body,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    World,
    Body,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    World(SwarmState),
    Body(BodyFrameState),
}

impl InitialState {
    fn flat_in(&self, frame: Frame) -> Vec<f64> {
        match (self, frame) {
            (InitialState::World(s), Frame::World) => s.to_flat(),
            (InitialState::World(s), Frame::Body) => body_transform(s).to_flat(),
            (InitialState::Body(b), Frame::Body) => b.to_flat(),
            (InitialState::Body(b), Frame::World) => world_from_body(b).to_flat(),
        }
    }

    fn n(&self) -> usize {
        match self {
            InitialState::World(s) => s.n(),
            InitialState::Body(b) => b.n(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub step: f64,
    pub t0: f64,
    pub tf: f64,
    pub event_cap: usize,
}

impl IntegratorConfig {
    pub fn new(step: f64, t0: f64, tf: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step must be > 0, got {step}"
            )));
        }
        if !(tf > t0 && t0.is_finite() && tf.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need tf > t0, got [{t0}, {tf}]"
            )));
        }
        Ok(Self {
            step,
            t0,
            tf,
            event_cap: DEFAULT_EVENT_CAP,
        })
    }
}

/// `min(1e-3 T', gap/4)` floored at `1e-6`, where `gap` is the smallest
/// switch spacing on `[t0, tf]`.
pub fn default_step(t_prime: f64, sched: &SwitchSchedule, t0: f64, tf: f64) -> Result<f64> {
    let mut h = 1e-3 * t_prime;
    if let Some(gap) = sched.min_switch_gap(t0, tf)? {
        h = h.min(gap / 4.0);
    }
    Ok(h.max(1e-6))
}

/// Time-stamped record of one run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    frame: Frame,
    n: usize,
    times: Vec<f64>,
    // mode active on [times[k], times[k+1]); the last entry is lambda(tf)
    modes: Vec<Mode>,
    states: Vec<f64>,
    inputs: Vec<f64>,
    switch_events: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    /// Switch instants crossed while integrating.
    pub fn switch_events(&self) -> usize {
        self.switch_events
    }

    fn flat(&self, k: usize) -> &[f64] {
        let w = 3 * self.n;
        &self.states[k * w..(k + 1) * w]
    }

    pub fn world_state(&self, k: usize) -> SwarmState {
        match self.frame {
            Frame::World => SwarmState::from_flat(self.flat(k)),
            Frame::Body => world_from_body(&BodyFrameState::from_flat(self.flat(k))),
        }
    }

    pub fn body_state(&self, k: usize) -> BodyFrameState {
        match self.frame {
            Frame::Body => BodyFrameState::from_flat(self.flat(k)),
            Frame::World => body_transform(&SwarmState::from_flat(self.flat(k))),
        }
    }

    pub fn inputs(&self, k: usize) -> Inputs {
        let w = 2 * self.n;
        let row = &self.inputs[k * w..(k + 1) * w];
        Inputs {
            v: row[..self.n].to_vec(),
            w: row[self.n..].to_vec(),
        }
    }

    /// Index of the first sample at or after `t`.
    pub fn index_at_or_after(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s < t)
    }
}

struct Rk4Buffers {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Buffers {
    fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }
}

fn eval_field(
    field: VectorField,
    g: &WeightedGraph,
    params: ControllerParams,
    p: f64,
    state: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let d = match field {
        VectorField::Original => {
            original_rhs_with(&SwarmState::from_flat(state), g, params, p)?.to_flat()
        }
        VectorField::Compact => {
            compact_rhs_with(&BodyFrameState::from_flat(state), g, params, p)?.to_flat()
        }
        VectorField::Changed => changed_rhs_with(&BodyFrameState::from_flat(state), p).to_flat(),
    };
    out.copy_from_slice(&d);
    Ok(())
}

/// `out = state + c k`.
fn stage(out: &mut [f64], state: &[f64], c: f64, k: &[f64]) {
    for ((o, s), k) in out.iter_mut().zip(state).zip(k) {
        *o = s + c * k;
    }
}

#[allow(clippy::too_many_arguments)]
fn rk4_step(
    field: VectorField,
    g: &WeightedGraph,
    params: ControllerParams,
    prof: &ExcitationProfile,
    a: f64,
    b: f64,
    state: &mut [f64],
    buf: &mut Rk4Buffers,
) -> Result<()> {
    let h = b - a;
    let piece = prof.piece_at(0.5 * (a + b));
    let p = |t: f64| prof.eval_piece(piece, t);

    eval_field(field, g, params, p(a), state, &mut buf.k1)?;
    stage(&mut buf.tmp, state, 0.5 * h, &buf.k1);
    eval_field(field, g, params, p(a + 0.5 * h), &buf.tmp, &mut buf.k2)?;
    stage(&mut buf.tmp, state, 0.5 * h, &buf.k2);
    eval_field(field, g, params, p(a + 0.5 * h), &buf.tmp, &mut buf.k3)?;
    stage(&mut buf.tmp, state, h, &buf.k3);
    eval_field(field, g, params, p(b), &buf.tmp, &mut buf.k4)?;
    for (i, s) in state.iter_mut().enumerate() {
        *s += h / 6.0 * (buf.k1[i] + 2.0 * buf.k2[i] + 2.0 * buf.k3[i] + buf.k4[i]);
    }
    Ok(())
}

/// Integrates `field` from `cfg.t0` to `cfg.tf`, recording every accepted
/// (sub-)step.
pub fn integrate(
    field: VectorField,
    sched: &SwitchSchedule,
    family: &GraphFamily,
    params: ControllerParams,
    prof: &ExcitationProfile,
    initial: &InitialState,
    cfg: IntegratorConfig,
) -> Result<Trajectory> {
    let IntegratorConfig {
        step,
        t0,
        tf,
        event_cap,
    } = cfg;
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step must be > 0, got {step}"
        )));
    }
    if !(tf > t0) {
        return Err(Error::InvalidInterval { t1: t0, t2: tf });
    }
    if sched.horizon() < tf {
        return Err(Error::BeyondHorizon {
            t: tf,
            horizon: sched.horizon(),
        });
    }
    let n = initial.n();
    if n != family.n() {
        return Err(Error::DimensionMismatch {
            expected: family.n(),
            found: n,
        });
    }
    let frame = field.frame();
    let mut state = initial.flat_in(frame);
    let mut buf = Rk4Buffers::new(state.len());

    let nominal = ((tf - t0) / step).ceil() as usize;
    let mut times = Vec::with_capacity(nominal + 1);
    let mut modes = Vec::with_capacity(nominal + 1);
    let mut states = Vec::with_capacity((nominal + 1) * state.len());
    times.push(t0);
    states.extend_from_slice(&state);
    let mut switch_events = 0;

    let mut t = t0;
    for k in 0..nominal {
        let t_end = if k + 1 == nominal {
            tf
        } else {
            t0 + (k + 1) as f64 * step
        };
        let switches = sched.switches_between(t, t_end)?;
        if switches.len() > event_cap {
            return Err(Error::EventDensity {
                t,
                step,
                events: switches.len(),
                cap: event_cap,
            });
        }
        switch_events += switches.len();

        let mut cuts: Vec<f64> = switches.iter().map(|e| e.t).collect();
        cuts.extend(prof.breakpoints_between(t, t_end));
        cuts.sort_by(f64::total_cmp);
        cuts.push(t_end);

        let mut a = t;
        for &b in &cuts {
            let tiny = MIN_SUBSTEP_REL * b.abs().max(1.0);
            if b - a <= tiny || (b < t_end && t_end - b <= tiny) {
                continue;
            }
            let mode = sched.mode_at(0.5 * (a + b))?;
            let g = family.get(mode)?;
            rk4_step(field, g, params, prof, a, b, &mut state, &mut buf)?;
            if state.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "state became non-finite at t = {b}"
                )));
            }
            modes.push(mode);
            times.push(b);
            states.extend_from_slice(&state);
            a = b;
        }
        t = t_end;
    }
    modes.push(sched.mode_at(tf)?);

    let dim = state.len();
    let mut inputs = Vec::with_capacity(times.len() * 2 * n);
    for (k, (&tk, &mode)) in times.iter().zip(&modes).enumerate() {
        let row = &states[k * dim..(k + 1) * dim];
        let p = prof.p_value(tk);
        let u = match field {
            VectorField::Changed => Inputs {
                v: vec![0.0; n],
                w: vec![p; n],
            },
            _ => {
                let world = match frame {
                    Frame::World => SwarmState::from_flat(row),
                    Frame::Body => world_from_body(&BodyFrameState::from_flat(row)),
                };
                control_input_with(&world, family.get(mode)?, params, p)?
            }
        };
        inputs.extend_from_slice(&u.v);
        inputs.extend_from_slice(&u.w);
    }

    Ok(Trajectory {
        frame,
        n,
        times,
        modes,
        states,
        inputs,
        switch_events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::WeightedGraph;
    use std::collections::BTreeMap;
    use std::f64::consts::PI;

    fn single_mode(n: usize) -> (SwitchSchedule, GraphFamily) {
        let g = WeightedGraph::empty(n).unwrap();
        (
            SwitchSchedule::constant(0.0, Mode(1)).unwrap(),
            GraphFamily::new(BTreeMap::from([(Mode(1), g)])).unwrap(),
        )
    }

    #[test]
    fn zero_field_is_constant() {
        let (s, f) = single_mode(2);
        let prof = ExcitationProfile::constant(1.0, 3.0, 0.0).unwrap();
        let b0 = BodyFrameState::new(vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]).unwrap();
        let traj = integrate(
            VectorField::Changed,
            &s,
            &f,
            ControllerParams::new(1.0, 1.0).unwrap(),
            &prof,
            &InitialState::Body(b0.clone()),
            IntegratorConfig::new(0.1, 0.0, 5.0).unwrap(),
        )
        .unwrap();
        assert_eq!(traj.body_state(traj.len() - 1), b0);
        assert!(traj.times().windows(2).all(|w| w[1] > w[0]));
        assert_eq!(traj.modes().len(), traj.len());
    }

    #[test]
    fn rejects_bad_config() {
        assert!(IntegratorConfig::new(0.0, 0.0, 1.0).is_err());
        assert!(IntegratorConfig::new(0.1, 1.0, 1.0).is_err());
    }

    #[test]
    fn horizon_must_cover_run() {
        let s = SwitchSchedule::section4d(PI, 5.0).unwrap();
        let g = WeightedGraph::empty(2).unwrap();
        let f = GraphFamily::new((1..=3).map(|m| (Mode(m), g.clone())).collect()).unwrap();
        let prof = ExcitationProfile::constant(PI, 3.0 * PI, 5.0).unwrap();
        let err = integrate(
            VectorField::Original,
            &s,
            &f,
            ControllerParams::new(1.0, 1.0).unwrap(),
            &prof,
            &InitialState::World(SwarmState::zeros(2)),
            IntegratorConfig::new(0.01, 0.0, 10.0).unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::BeyondHorizon { .. }));
    }

    #[test]
    fn event_cap_trips() {
        let s = SwitchSchedule::section4d(1.0, 50.0).unwrap();
        let g = WeightedGraph::empty(2).unwrap();
        let f = GraphFamily::new((1..=3).map(|m| (Mode(m), g.clone())).collect()).unwrap();
        let prof = ExcitationProfile::constant(1.0, 3.0, 5.0).unwrap();
        let mut cfg = IntegratorConfig::new(10.0, 0.0, 40.0).unwrap();
        cfg.event_cap = 50;
        let err = integrate(
            VectorField::Original,
            &s,
            &f,
            ControllerParams::new(1.0, 1.0).unwrap(),
            &prof,
            &InitialState::World(SwarmState::zeros(2)),
            cfg,
        )
        .unwrap_err();
        assert!(matches!(err, Error::EventDensity { .. }));
    }

    #[test]
    fn steps_align_with_switches() {
        let s = SwitchSchedule::section4d(PI, 4.0 * PI).unwrap();
        let g = WeightedGraph::empty(2).unwrap();
        let f = GraphFamily::new((1..=3).map(|m| (Mode(m), g.clone())).collect()).unwrap();
        let prof = ExcitationProfile::constant(PI, 3.0 * PI, 5.0).unwrap();
        let traj = integrate(
            VectorField::Original,
            &s,
            &f,
            ControllerParams::new(1.0, 1.0).unwrap(),
            &prof,
            &InitialState::World(SwarmState::zeros(2)),
            IntegratorConfig::new(0.1, 0.0, 3.0 * PI).unwrap(),
        )
        .unwrap();
        for e in s.switches_between(0.0, 3.0 * PI).unwrap() {
            let k = traj.index_at_or_after(e.t);
            assert!((traj.times()[k] - e.t).abs() < 1e-12);
            assert_eq!(traj.modes()[k], e.mode);
        }
        assert_eq!(
            traj.switch_events(),
            s.count_switches_between(0.0, 3.0 * PI).unwrap()
        );
    }
}
