//! Monitors, bounds and lemma checks for the consensus proof, evaluated on
//! concrete states and trajectories.
//!
//! Everything here is a finite-horizon surrogate: limits become trends over
//! the simulated span, and the decay constants `(a, b)` are fitted.

mod gronwall;
mod lemmas;
mod phase;

pub use gronwall::{
    gronwall_check, gronwall_suite, GronwallCheck, GronwallInstance, GronwallSpec, GronwallSuite,
    GRONWALL_TOL,
};
pub use lemmas::{
    epsilon_bound_suite, laplacian_identity_suite, EpsilonBoundReport, IdentityResult,
    LaplacianIdentityReport, IDENTITY_TOL,
};
pub use phase::{weak_obs_phase_check, PhaseCandidate};

use nalgebra::DVector;
use serde::Serialize;

use crate::dynamics::{BodyFrameState, ControllerParams, ExcitationProfile, Trajectory};
use crate::error::{Error, Result};
use crate::graph::{laplacian, quad_form, GraphFamily, WeightedGraph};

/// Radicands down to this value are clamped to zero.
pub const RADICAND_TOL: f64 = 1e-12;

/// Samples of `||theta_hat||` at or below this are ignored by the decay fit.
pub const FIT_FLOOR: f64 = 1e-12;

/// Fewest usable samples `fit_exponential_decay` accepts.
pub const FIT_MIN_SAMPLES: usize = 10;

fn centered(v: &[f64]) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - mean).collect()
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// `L0 theta`, the heading disagreement.
pub fn theta_hat(theta: &[f64]) -> Vec<f64> {
    centered(theta)
}

/// Distance to the consensus subspace where all positions and all headings
/// agree.
pub fn consensus_distance(b: &BodyFrameState) -> f64 {
    (norm_sq(&centered(&b.x)) + norm_sq(&centered(&b.y)) + norm_sq(&centered(&b.theta))).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Monitors {
    /// `||L0 theta||^2`
    pub w: f64,
    /// `||x||^2 + ||y||^2`
    pub u: f64,
    /// squared consensus distance
    pub v: f64,
}

pub fn monitor_values(b: &BodyFrameState) -> Monitors {
    let w = norm_sq(&centered(&b.theta));
    Monitors {
        w,
        u: norm_sq(&b.x) + norm_sq(&b.y),
        v: norm_sq(&centered(&b.x)) + norm_sq(&centered(&b.y)) + w,
    }
}

fn checked_sqrt(r: f64) -> Result<f64> {
    if r < -RADICAND_TOL {
        return Err(Error::NegativeRadicand(r));
    }
    Ok(r.max(0.0).sqrt())
}

/// `(2 k_w theta_hat^T L theta_hat)^{1/2}`; its square is `-dW/dt`.
pub fn virtual_output_h1(theta_hat: &[f64], g: &WeightedGraph, k_w: f64) -> Result<f64> {
    if theta_hat.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            found: theta_hat.len(),
        });
    }
    checked_sqrt(2.0 * k_w * quad_form(&laplacian(g), theta_hat))
}

/// `[(2 k_v x^T L x)^{1/2}, ||L0 theta||]`.
pub fn virtual_output_h(x: &[f64], theta: &[f64], g: &WeightedGraph, k_v: f64) -> Result<[f64; 2]> {
    for len in [x.len(), theta.len()] {
        if len != g.n() {
            return Err(Error::DimensionMismatch {
                expected: g.n(),
                found: len,
            });
        }
    }
    Ok([
        checked_sqrt(2.0 * k_v * quad_form(&laplacian(g), x))?,
        norm_sq(&centered(theta)).sqrt(),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputChannel {
    H1,
    H,
}

/// Squared norm of the chosen virtual output at one body-frame state.
pub fn output_sq(
    channel: OutputChannel,
    b: &BodyFrameState,
    g: &WeightedGraph,
    params: ControllerParams,
) -> Result<f64> {
    match channel {
        OutputChannel::H1 => Ok(virtual_output_h1(&theta_hat(&b.theta), g, params.k_w)?.powi(2)),
        OutputChannel::H => {
            let h = virtual_output_h(&b.x, &b.theta, g, params.k_v)?;
            Ok(h[0] * h[0] + h[1] * h[1])
        }
    }
}

/// Constants of the boundedness and energy estimates, built from decay
/// constants `(a, b)` of the heading subsystem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    pub a: f64,
    pub b: f64,
    /// `2 sqrt(2) a N k_v max ||L||`
    pub a_tilde: f64,
    pub n: usize,
    /// `int_0^{T0} |p|`
    pub abs_p_per_period: f64,
}

impl BoundConstants {
    pub fn new(
        a: f64,
        b: f64,
        family: &GraphFamily,
        params: ControllerParams,
        prof: &ExcitationProfile,
    ) -> Result<Self> {
        if !(a > 0.0) || a.is_nan() {
            return Err(Error::InvalidParameter(format!(
                "decay gain a must be > 0, got {a}"
            )));
        }
        if !(b > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "decay rate b must be > 0, got {b}"
            )));
        }
        let n = family.n();
        let a_tilde = 2.0
            * std::f64::consts::SQRT_2
            * a
            * n as f64
            * params.k_v
            * family.max_laplacian_norm();
        if !(a_tilde > 0.0) {
            return Err(Error::InvalidParameter(
                "graph family has no edges, so the bound constant vanishes".into(),
            ));
        }
        Ok(Self {
            a,
            b,
            a_tilde,
            n,
            abs_p_per_period: prof.abs_integral_per_period(),
        })
    }

    /// `F1^2 = e^{a_tilde ||theta|| / b} (1 + ||x||^2 + ||y||^2)`; bounds `U`
    /// from time `s` on.
    pub fn f1_sq(&self, s: &BodyFrameState) -> f64 {
        let th = norm_sq(&s.theta).sqrt();
        let u = norm_sq(&s.x) + norm_sq(&s.y);
        if th == 0.0 {
            return 1.0 + u;
        }
        (self.a_tilde * th / self.b).exp() * (1.0 + u)
    }

    /// `(a + 1) ||theta|| + sqrt(N) int_0^{T0} |p|`; bounds `||theta||`.
    pub fn f2(&self, theta: &[f64]) -> f64 {
        (self.a + 1.0) * norm_sq(theta).sqrt() + (self.n as f64).sqrt() * self.abs_p_per_period
    }

    /// `(F1^2 + F2^2)^{1/2}`; bounds the full state norm.
    pub fn f(&self, s: &BodyFrameState) -> f64 {
        (self.f1_sq(s) + self.f2(&s.theta).powi(2)).sqrt()
    }
}

/// Upper bound on `int_s^inf ||h||^2`:
/// `U(s) + (a_tilde/b) ||theta(s)|| (1 + F1^2) + (a^2/2b) ||theta(s)||^2`.
/// May be `+inf` when `F1` overflows.
pub fn energy_bound_rhs(s: &BodyFrameState, c: &BoundConstants) -> Result<f64> {
    if !(c.b > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "decay rate b must be > 0, got {}",
            c.b
        )));
    }
    let u = norm_sq(&s.x) + norm_sq(&s.y);
    let th = norm_sq(&s.theta).sqrt();
    if th == 0.0 {
        return Ok(u);
    }
    Ok(u + c.a_tilde / c.b * th * (1.0 + c.f1_sq(s)) + c.a * c.a / (2.0 * c.b) * th * th)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub channel: OutputChannel,
    pub s: f64,
    pub t: f64,
    pub integral: f64,
    pub bound: f64,
    pub slack: f64,
    pub note: String,
}

/// `d/dt h1^2 = -4 k_w^2 ||L theta_hat||^2` along the heading subsystem,
/// independent of the excitation.
fn h1_sq_rate(b: &BodyFrameState, g: &WeightedGraph, k_w: f64) -> f64 {
    let lt = laplacian(g) * dvec(&theta_hat(&b.theta));
    -4.0 * k_w * k_w * lt.norm_squared()
}

/// Cumulative integral of the squared output, indexed by sample. Each panel
/// uses the mode of its own segment at both ends. The `H` channel uses the
/// trapezoid rule; `H1` adds the endpoint-derivative correction, which makes
/// it exact for cubics.
pub fn cumulative_output_energy(
    traj: &Trajectory,
    family: &GraphFamily,
    params: ControllerParams,
    channel: OutputChannel,
) -> Result<Vec<f64>> {
    let t = traj.times();
    let modes = traj.modes();
    let mut acc = vec![0.0; t.len()];
    if t.is_empty() {
        return Ok(acc);
    }
    let mut prev = traj.body_state(0);
    for i in 1..t.len() {
        let next = traj.body_state(i);
        let g = family.get(modes[i - 1])?;
        let h = t[i] - t[i - 1];
        let fa = output_sq(channel, &prev, g, params)?;
        let fb = output_sq(channel, &next, g, params)?;
        let mut panel = 0.5 * h * (fa + fb);
        if channel == OutputChannel::H1 {
            panel += h * h / 12.0
                * (h1_sq_rate(&prev, g, params.k_w) - h1_sq_rate(&next, g, params.k_w));
        }
        acc[i] = acc[i - 1] + panel;
        prev = next;
    }
    Ok(acc)
}

fn window_indices(traj: &Trajectory, s: f64, t: f64) -> Result<(usize, usize)> {
    let times = traj.times();
    let (start, end) = (times[0], *times.last().unwrap_or(&times[0]));
    let slop = 1e-9 * end.abs().max(1.0);
    if !(s >= start - slop && t <= end + slop && t > s) {
        return Err(Error::WindowOutsideTrajectory { s, t, start, end });
    }
    let i = traj.index_at_or_after(s - slop).min(times.len() - 1);
    let j = times.partition_point(|&x| x <= t + slop).saturating_sub(1);
    if j <= i {
        return Err(Error::WindowOutsideTrajectory { s, t, start, end });
    }
    Ok((i, j))
}

/// Output energy over the samples spanning `[s, t]`, against the analytic
/// bound evaluated at the first sample. For `H1` the bound is `W(s)`; for `H`
/// it is [`energy_bound_rhs`] with the supplied constants.
pub fn output_energy(
    traj: &Trajectory,
    family: &GraphFamily,
    params: ControllerParams,
    channel: OutputChannel,
    s: f64,
    t: f64,
    consts: &BoundConstants,
) -> Result<EnergyReport> {
    let mut r = output_energies(traj, family, params, channel, &[(s, t)], consts)?;
    Ok(r.remove(0))
}

/// [`output_energy`] for several windows, sharing one quadrature pass.
pub fn output_energies(
    traj: &Trajectory,
    family: &GraphFamily,
    params: ControllerParams,
    channel: OutputChannel,
    windows: &[(f64, f64)],
    consts: &BoundConstants,
) -> Result<Vec<EnergyReport>> {
    let spans = windows
        .iter()
        .map(|&(s, t)| window_indices(traj, s, t))
        .collect::<Result<Vec<_>>>()?;
    let acc = cumulative_output_energy(traj, family, params, channel)?;
    let note = match channel {
        OutputChannel::H1 => "bound is W(s), no fitted constants".to_string(),
        OutputChannel::H => format!(
            "bound uses fitted decay constants a = {:.6e}, b = {:.6e} in place of the unknown exact ones",
            consts.a, consts.b
        ),
    };
    spans
        .into_iter()
        .map(|(i, j)| {
            let bs = traj.body_state(i);
            let bound = match channel {
                OutputChannel::H1 => monitor_values(&bs).w,
                OutputChannel::H => energy_bound_rhs(&bs, consts)?,
            };
            let integral = acc[j] - acc[i];
            Ok(EnergyReport {
                channel,
                s: traj.times()[i],
                t: traj.times()[j],
                integral,
                bound,
                slack: bound - integral,
                note: note.clone(),
            })
        })
        .collect()
}

/// `(t, int_t^{t+T0} ||output||^2)` for each sample `t` whose window fits
/// inside the trajectory, taken every `stride` samples.
pub fn sliding_window_energy(
    traj: &Trajectory,
    family: &GraphFamily,
    params: ControllerParams,
    channel: OutputChannel,
    t0_window: f64,
    stride: usize,
) -> Result<Vec<(f64, f64)>> {
    let times = traj.times();
    let span = times.last().copied().unwrap_or(0.0) - times.first().copied().unwrap_or(0.0);
    if !(t0_window > 0.0 && span > t0_window) {
        return Err(Error::NotEnoughSamples(format!(
            "trajectory span {span} is not longer than the window {t0_window}"
        )));
    }
    let acc = cumulative_output_energy(traj, family, params, channel)?;
    let at = |tt: f64| -> f64 {
        let j = times.partition_point(|&x| x < tt);
        if j == 0 {
            return acc[0];
        }
        if j >= times.len() {
            return acc[times.len() - 1];
        }
        let (ta, tb) = (times[j - 1], times[j]);
        let w = if tb > ta { (tt - ta) / (tb - ta) } else { 1.0 };
        acc[j - 1] + w * (acc[j] - acc[j - 1])
    };
    let end = times[times.len() - 1];
    let mut out = Vec::new();
    let mut k = 0;
    while k < times.len() && times[k] + t0_window <= end {
        out.push((times[k], at(times[k] + t0_window) - acc[k]));
        k += stride.max(1);
    }
    Ok(out)
}

/// Finite-horizon stand-in for "windowed energy tends to zero": the last
/// window holds less than `1e-3` of the first.
pub fn decreasing_trend(series: &[(f64, f64)]) -> bool {
    match (series.first(), series.last()) {
        (Some(&(_, first)), Some(&(_, last))) if series.len() >= 2 => last < first * 1e-3,
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    /// Overshoot gain, clipped to at least 1.
    pub a: f64,
    /// Decay rate; `+inf` when the channel had already vanished.
    pub b: f64,
    /// RMS residual of the log-linear fit.
    pub residual: f64,
    pub samples: usize,
}

/// Least-squares fit of `log ||theta_hat(t)|| ~ log ||theta_hat(t0)|| + log a - b (t - t0)`.
pub fn fit_log_linear(times: &[f64], values: &[f64]) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, &v)| v > FIT_FLOOR)
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    if pts.is_empty() && !values.is_empty() {
        return Ok(DecayFit {
            a: 1.0,
            b: f64::INFINITY,
            residual: 0.0,
            samples: 0,
        });
    }
    if pts.len() < FIT_MIN_SAMPLES {
        return Err(Error::NotEnoughSamples(format!(
            "{} samples above {FIT_FLOOR}, need {FIT_MIN_SAMPLES}",
            pts.len()
        )));
    }
    let t0 = times[0];
    let m = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0 - t0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - t0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - t0 - mt) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mt;
    let residual = (pts
        .iter()
        .map(|p| (p.1 - intercept - slope * (p.0 - t0)).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    let a = if values[0] > FIT_FLOOR {
        (intercept - values[0].ln()).exp().max(1.0)
    } else {
        1.0
    };
    Ok(DecayFit {
        a,
        b: -slope,
        residual,
        samples: pts.len(),
    })
}

/// Fits the decay of `||theta_hat||` along a trajectory.
pub fn fit_exponential_decay(traj: &Trajectory) -> Result<DecayFit> {
    let values: Vec<f64> = (0..traj.len())
        .map(|k| norm_sq(&theta_hat(&traj.body_state(k).theta)).sqrt())
        .collect();
    fit_log_linear(traj.times(), &values)
}

/// Largest one-step increase of `W` along a trajectory; nonincreasing `W`
/// keeps this at or below zero.
pub fn max_w_increase(traj: &Trajectory) -> f64 {
    let w: Vec<f64> = (0..traj.len())
        .map(|k| monitor_values(&traj.body_state(k)).w)
        .collect();
    w.windows(2)
        .map(|p| p[1] - p[0])
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeCheck {
    pub max_error: f64,
    pub checked: usize,
}

/// Fourth-order central differences of `W` against `-h1^2`, skipping samples
/// within two nominal steps of a switch or of an uneven sub-step.
pub fn w_derivative_check(
    traj: &Trajectory,
    family: &GraphFamily,
    params: ControllerParams,
    step: f64,
) -> Result<DerivativeCheck> {
    let t = traj.times();
    let modes = traj.modes();
    let w: Vec<f64> = (0..traj.len())
        .map(|k| monitor_values(&traj.body_state(k)).w)
        .collect();
    let mut max_error: f64 = 0.0;
    let mut checked = 0;
    for k in 2..traj.len().saturating_sub(2) {
        let even = (k - 2..=k + 1).all(|i| ((t[i + 1] - t[i]) - step).abs() < 1e-9 * step.max(1.0));
        let steady = modes[k - 2..=k + 1].iter().all(|&m| m == modes[k]);
        if !(even && steady) {
            continue;
        }
        // five-point stencil: truncation O(h^4) instead of O(h^2)
        let h = 0.25 * (t[k + 2] - t[k - 2]);
        let fd = (w[k - 2] - 8.0 * w[k - 1] + 8.0 * w[k + 1] - w[k + 2]) / (12.0 * h);
        let h1_sq = output_sq(
            OutputChannel::H1,
            &traj.body_state(k),
            family.get(modes[k])?,
            params,
        )?;
        max_error = max_error.max((fd + h1_sq).abs());
        checked += 1;
    }
    Ok(DerivativeCheck { max_error, checked })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundednessCheck {
    /// Smallest `F(s) - ||state(t)||` over the tested pairs; `+inf` when
    /// every bound overflowed.
    pub min_margin: f64,
    pub pairs: usize,
}

/// `||state(t)|| <= F(s)` for each listed `s` index and every later sample.
pub fn boundedness_check(
    traj: &Trajectory,
    consts: &BoundConstants,
    s_indices: &[usize],
) -> BoundednessCheck {
    let norms: Vec<f64> = (0..traj.len()).map(|k| traj.body_state(k).norm()).collect();
    // suffix maximum so each s costs O(1)
    let mut tail = norms.clone();
    for k in (0..tail.len().saturating_sub(1)).rev() {
        tail[k] = tail[k].max(tail[k + 1]);
    }
    let mut min_margin = f64::INFINITY;
    let mut pairs = 0;
    for &s in s_indices.iter().filter(|&&s| s < traj.len()) {
        min_margin = min_margin.min(consts.f(&traj.body_state(s)) - tail[s]);
        pairs += traj.len() - s;
    }
    BoundednessCheck { min_margin, pairs }
}

/// Column vector from a slice.
pub(crate) fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, InitialState, IntegratorConfig, SwarmState, VectorField};
    use crate::graph::Mode;
    use crate::switching::SwitchSchedule;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::collections::BTreeMap;
    use std::f64::consts::PI;

    fn body(x: &[f64], y: &[f64], th: &[f64]) -> BodyFrameState {
        BodyFrameState::new(x.to_vec(), y.to_vec(), th.to_vec()).unwrap()
    }

    fn pair() -> WeightedGraph {
        WeightedGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap()
    }

    fn chain_family() -> GraphFamily {
        GraphFamily::new(BTreeMap::from([
            (
                Mode(1),
                WeightedGraph::from_edges(4, &[(0, 1, 1.0)]).unwrap(),
            ),
            (
                Mode(2),
                WeightedGraph::from_edges(4, &[(1, 2, 1.0)]).unwrap(),
            ),
            (
                Mode(3),
                WeightedGraph::from_edges(4, &[(2, 3, 1.0)]).unwrap(),
            ),
        ]))
        .unwrap()
    }

    fn gains() -> ControllerParams {
        ControllerParams::new(1.0, 1.0).unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(
            consensus_distance(&body(&[3.0; 3], &[1.0; 3], &[-2.0; 3])),
            0.0
        );
        assert_abs_diff_eq!(
            consensus_distance(&body(&[1.0, -1.0], &[0.0; 2], &[0.0; 2])),
            2f64.sqrt(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn theta_hat_examples() {
        assert_eq!(theta_hat(&[1.0, 0.0]), vec![0.5, -0.5]);
        assert_eq!(theta_hat(&[4.0; 3]), vec![0.0; 3]);
        let t = theta_hat(&[0.3, -1.2, 5.0]);
        for (a, b) in theta_hat(&t).iter().zip(&t) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn monitors_by_hand() {
        let m = monitor_values(&body(&[2.0, 2.0], &[-1.0, -1.0], &[0.4, 0.4]));
        assert_eq!((m.w, m.v), (0.0, 0.0));
        assert_eq!(m.u, 2.0 * (4.0 + 1.0));
        // x = (1, 3): L0 x = (-1, 1); y = (0, 2): L0 y = (-1, 1); theta = (1, 0): (0.5, -0.5)
        let m = monitor_values(&body(&[1.0, 3.0], &[0.0, 2.0], &[1.0, 0.0]));
        assert_abs_diff_eq!(m.w, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m.u, 14.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.v, 4.5, epsilon = 1e-15);
    }

    #[test]
    fn h1_examples() {
        assert_eq!(virtual_output_h1(&[0.0, 0.0], &pair(), 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            virtual_output_h1(&[0.5, -0.5], &pair(), 1.0).unwrap(),
            2f64.sqrt(),
            epsilon = 1e-15
        );
        assert!(matches!(
            virtual_output_h1(&[0.5], &pair(), 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn h_examples() {
        assert_eq!(
            virtual_output_h(&[2.0; 2], &[1.0; 2], &pair(), 1.0).unwrap(),
            [0.0, 0.0]
        );
        let g = WeightedGraph::from_edges(3, &[(0, 1, 2.0), (1, 2, 0.5)]).unwrap();
        let x = [1.0, -2.0, 0.5];
        // direct edge sum: 2*(1+2)^2 + 0.5*(-2-0.5)^2
        let q: f64 = 2.0 * 9.0 + 0.5 * 6.25;
        let h = virtual_output_h(&x, &[1.0, 0.0, -1.0], &g, 3.0).unwrap();
        assert_abs_diff_eq!(h[0], (6.0 * q).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(h[1], 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn bound_examples() {
        let fam = chain_family();
        let prof = ExcitationProfile::constant(PI, 3.0 * PI, 5.0).unwrap();
        let c = BoundConstants::new(1.5, 0.2, &fam, gains(), &prof).unwrap();
        // ||L|| of a single edge is 2
        assert_abs_diff_eq!(
            c.a_tilde,
            2.0 * 2f64.sqrt() * 1.5 * 4.0 * 2.0,
            epsilon = 1e-12
        );
        let s = body(&[1.0; 4], &[2.0; 4], &[0.0; 4]);
        assert_eq!(energy_bound_rhs(&s, &c).unwrap(), 20.0);

        // n = 2 by hand
        let fam2 = GraphFamily::new(BTreeMap::from([(Mode(1), pair())])).unwrap();
        let c2 = BoundConstants::new(1.0, 4.0, &fam2, gains(), &prof).unwrap();
        let a_t = 2.0 * 2f64.sqrt() * 2.0 * 2.0;
        let s2 = body(&[1.0, 0.0], &[0.0, 0.0], &[0.01, 0.0]);
        let f1 = (a_t * 0.01 / 4.0f64).exp() * 2.0;
        let want = 1.0 + a_t / 4.0 * 0.01 * (1.0 + f1) + 1.0 / 8.0 * 1e-4;
        assert_abs_diff_eq!(energy_bound_rhs(&s2, &c2).unwrap(), want, epsilon = 1e-12);

        let mut bad = c2;
        bad.b = 0.0;
        assert!(energy_bound_rhs(&s2, &bad).is_err());
        assert!(BoundConstants::new(1.0, -1.0, &fam2, gains(), &prof).is_err());
    }

    #[test]
    fn fit_recovers_rate() {
        let t: Vec<f64> = (0..200).map(|k| k as f64 * 0.05).collect();
        let v: Vec<f64> = t.iter().map(|&s| 3.0 * (-0.7 * s).exp()).collect();
        let f = fit_log_linear(&t, &v).unwrap();
        assert_abs_diff_eq!(f.b, 0.7, epsilon = 1e-6);
        assert_abs_diff_eq!(f.a, 1.0, epsilon = 1e-9);
        assert!(f.residual < 1e-9);

        let f = fit_log_linear(&t, &vec![2.0; 200]).unwrap();
        assert!(f.b.abs() < 1e-12);

        let f = fit_log_linear(&t, &vec![0.0; 200]).unwrap();
        assert_eq!(f.b, f64::INFINITY);

        assert!(matches!(
            fit_log_linear(&t[..5], &v[..5]),
            Err(Error::NotEnoughSamples(_))
        ));
    }

    #[test]
    fn trend_verdict() {
        assert!(decreasing_trend(&[(0.0, 1.0), (1.0, 0.5), (2.0, 1e-4)]));
        assert!(!decreasing_trend(&[(0.0, 1.0), (2.0, 1.0)]));
        assert!(!decreasing_trend(&[(0.0, 0.0), (2.0, 0.0)]));
    }

    fn short_run(step: f64, tf: f64) -> Trajectory {
        let s = SwitchSchedule::section4d(PI, tf).unwrap();
        let prof = ExcitationProfile::constant(PI, 3.0 * PI, 5.0).unwrap();
        let init = SwarmState::new(
            vec![1.0, -2.0, 0.5, 3.0],
            vec![0.0, 1.0, -1.0, 2.0],
            vec![0.3, -0.7, 1.1, 0.0],
        )
        .unwrap();
        integrate(
            VectorField::Original,
            &s,
            &chain_family(),
            gains(),
            &prof,
            &InitialState::World(init),
            IntegratorConfig::new(step, 0.0, tf).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn w_decreases_and_matches_h1() {
        let traj = short_run(1e-4, 2.0);
        assert!(max_w_increase(&traj) <= 1e-9);
        let d = w_derivative_check(&traj, &chain_family(), gains(), 1e-4).unwrap();
        assert!(d.checked > 1000);
        assert!(d.max_error < 1e-3, "{d:?}");
    }

    #[test]
    fn h1_energy_within_w() {
        let traj = short_run(1e-3, 6.0);
        let fam = chain_family();
        let prof = ExcitationProfile::constant(PI, 3.0 * PI, 5.0).unwrap();
        let c = BoundConstants::new(1.0, 1.0, &fam, gains(), &prof).unwrap();
        let r = output_energy(&traj, &fam, gains(), OutputChannel::H1, 1.0, 5.0, &c).unwrap();
        assert!(r.integral > 0.0);
        // the integral equals W(s) - W(t), so the slack is W(t)
        let wt = monitor_values(&traj.body_state(traj.index_at_or_after(5.0 - 1e-9))).w;
        assert_abs_diff_eq!(r.slack, wt, epsilon = 1e-9);
        assert!(output_energy(&traj, &fam, gains(), OutputChannel::H, 1.0, 9.0, &c).is_err());
    }

    #[test]
    fn zero_output_has_zero_energy() {
        let fam = chain_family();
        let s = SwitchSchedule::section4d(PI, 10.0).unwrap();
        let prof = ExcitationProfile::constant(PI, 3.0 * PI, 5.0).unwrap();
        let traj = integrate(
            VectorField::Original,
            &s,
            &fam,
            gains(),
            &prof,
            &InitialState::World(
                SwarmState::new(vec![1.0; 4], vec![2.0; 4], vec![0.5; 4]).unwrap(),
            ),
            IntegratorConfig::new(1e-2, 0.0, 10.0).unwrap(),
        )
        .unwrap();
        let series =
            sliding_window_energy(&traj, &fam, gains(), OutputChannel::H, 3.0, 10).unwrap();
        assert!(!series.is_empty());
        assert!(series.iter().all(|&(_, e)| e.abs() < 1e-20));
        assert!(sliding_window_energy(&traj, &fam, gains(), OutputChannel::H, 20.0, 1).is_err());
    }

    proptest! {
        #[test]
        fn distance_ignores_translation(
            xs in prop::collection::vec(-10.0f64..10.0, 12),
            sh in prop::array::uniform3(-50.0f64..50.0),
        ) {
            let b = body(&xs[0..4], &xs[4..8], &xs[8..12]);
            let moved = body(
                &b.x.iter().map(|v| v + sh[0]).collect::<Vec<_>>(),
                &b.y.iter().map(|v| v + sh[1]).collect::<Vec<_>>(),
                &b.theta.iter().map(|v| v + sh[2]).collect::<Vec<_>>(),
            );
            prop_assert!((consensus_distance(&b) - consensus_distance(&moved)).abs() < 1e-12);
        }

        #[test]
        fn v_at_most_u_plus_w(xs in prop::collection::vec(-10.0f64..10.0, 9)) {
            let m = monitor_values(&body(&xs[0..3], &xs[3..6], &xs[6..9]));
            prop_assert!(m.v <= m.u + m.w + 1e-12);
        }

        #[test]
        fn bound_grows_with_theta(
            xs in prop::collection::vec(-3.0f64..3.0, 8),
            th in prop::collection::vec(-1.0f64..1.0, 4),
            scale in 1.0f64..2.0,
        ) {
            let fam = chain_family();
            let prof = ExcitationProfile::constant(PI, 3.0 * PI, 5.0).unwrap();
            let c = BoundConstants::new(1.2, 2.0, &fam, gains(), &prof).unwrap();
            let lo = body(&xs[0..4], &xs[4..8], &th);
            let hi = body(&xs[0..4], &xs[4..8], &th.iter().map(|v| v * scale).collect::<Vec<_>>());
            prop_assert!(energy_bound_rhs(&hi, &c).unwrap() >= energy_bound_rhs(&lo, &c).unwrap());
        }
    }
}
