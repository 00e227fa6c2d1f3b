//! The periodic excitation `p(t)` that keeps headings rotating.
//!
//! Over one period `[0, T0)` the signal is zero on `[0, T)`, follows
//! `c(t - T)` on `[T, T0/2)`, is zero again on `[T0/2, T + T0/2)` and follows
//! `-c(t - T - T0/2)` on `[T + T0/2, T0)`, so it integrates to zero per period.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance from the `k*pi` lattice below which the phase integral is
/// treated as degenerate.
pub const PHASE_TOL: f64 = 1e-6;

/// The shape `c` on `[0, T0/2 - T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ExcitationShape {
    Constant {
        value: f64,
    },
    /// Linear interpolation between samples, held constant outside them.
    Table {
        times: Vec<f64>,
        values: Vec<f64>,
    },
}

impl ExcitationShape {
    fn validate(&self) -> Result<()> {
        match self {
            ExcitationShape::Constant { value } if value.is_finite() => Ok(()),
            ExcitationShape::Constant { value } => Err(Error::InvalidParameter(format!(
                "non-finite constant c = {value}"
            ))),
            ExcitationShape::Table { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err(Error::InvalidParameter(format!(
                        "table needs matching nonempty times/values, got {} and {}",
                        times.len(),
                        values.len()
                    )));
                }
                if times.iter().chain(values).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("non-finite table entry".into()));
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidParameter(
                        "table times must be strictly increasing".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, tau: f64) -> f64 {
        match self {
            ExcitationShape::Constant { value } => *value,
            ExcitationShape::Table { times, values } => {
                let idx = times.partition_point(|&s| s <= tau);
                if idx == 0 {
                    values[0]
                } else if idx == times.len() {
                    values[idx - 1]
                } else {
                    let (t0, t1) = (times[idx - 1], times[idx]);
                    let (v0, v1) = (values[idx - 1], values[idx]);
                    v0 + (v1 - v0) * (tau - t0) / (t1 - t0)
                }
            }
        }
    }

    /// Linear pieces `(x0, x1, c(x0), c(x1))` covering `[0, len]`.
    fn pieces(&self, len: f64) -> Vec<(f64, f64, f64, f64)> {
        let mut cuts = vec![0.0];
        if let ExcitationShape::Table { times, .. } = self {
            cuts.extend(times.iter().copied().filter(|&s| s > 0.0 && s < len));
        }
        cuts.push(len);
        cuts.windows(2)
            .map(|w| (w[0], w[1], self.eval(w[0]), self.eval(w[1])))
            .collect()
    }

    /// Exact integral of the interpolant over `[0, len]`.
    pub fn integral(&self, len: f64) -> f64 {
        self.pieces(len)
            .into_iter()
            .map(|(a, b, va, vb)| 0.5 * (va + vb) * (b - a))
            .sum()
    }

    /// Exact integral of `|c|` over `[0, len]`.
    pub fn abs_integral(&self, len: f64) -> f64 {
        self.pieces(len)
            .into_iter()
            .map(|(a, b, va, vb)| {
                if va * vb >= 0.0 {
                    0.5 * (va.abs() + vb.abs()) * (b - a)
                } else {
                    let root = a + va.abs() / (va.abs() + vb.abs()) * (b - a);
                    0.5 * va.abs() * (root - a) + 0.5 * vb.abs() * (b - root)
                }
            })
            .sum()
    }

    fn knots(&self) -> &[f64] {
        match self {
            ExcitationShape::Constant { .. } => &[],
            ExcitationShape::Table { times, .. } => times,
        }
    }
}

/// Which branch of `p` is active, with the absolute time where it began.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExcitationPiece {
    Zero,
    Forward { origin: f64 },
    Backward { origin: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationProfile {
    window: f64,
    period: f64,
    shape: ExcitationShape,
}

impl ExcitationProfile {
    /// `window` is the joint-connectivity window `T`, `period` is `T0 > 2T`.
    pub fn new(window: f64, period: f64, shape: ExcitationShape) -> Result<Self> {
        if !(window.is_finite() && window > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "T must be > 0, got {window}"
            )));
        }
        if !(period.is_finite() && period > 2.0 * window) {
            return Err(Error::InvalidParameter(format!(
                "T0 must exceed 2T (T0 = {period}, T = {window})"
            )));
        }
        shape.validate()?;
        Ok(Self {
            window,
            period,
            shape,
        })
    }

    pub fn constant(window: f64, period: f64, value: f64) -> Result<Self> {
        Self::new(window, period, ExcitationShape::Constant { value })
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn shape(&self) -> &ExcitationShape {
        &self.shape
    }

    /// Length `T0/2 - T` of each active branch.
    pub fn active_len(&self) -> f64 {
        0.5 * self.period - self.window
    }

    fn cycle(&self, t: f64) -> (f64, f64) {
        let start = (t / self.period).floor() * self.period;
        let mut phase = t - start;
        let mut start = start;
        if phase >= self.period {
            start += self.period;
            phase -= self.period;
        } else if phase < 0.0 {
            start -= self.period;
            phase += self.period;
        }
        (start, phase)
    }

    pub fn piece_at(&self, t: f64) -> ExcitationPiece {
        let (start, phase) = self.cycle(t);
        let half = 0.5 * self.period;
        if phase < self.window {
            ExcitationPiece::Zero
        } else if phase < half {
            ExcitationPiece::Forward {
                origin: start + self.window,
            }
        } else if phase < self.window + half {
            ExcitationPiece::Zero
        } else {
            ExcitationPiece::Backward {
                origin: start + self.window + half,
            }
        }
    }

    /// Value of a fixed branch at `t`; lets integrators hold the branch
    /// across a step whose endpoint touches the next breakpoint.
    pub fn eval_piece(&self, piece: ExcitationPiece, t: f64) -> f64 {
        match piece {
            ExcitationPiece::Zero => 0.0,
            ExcitationPiece::Forward { origin } => self.shape.eval(t - origin),
            ExcitationPiece::Backward { origin } => -self.shape.eval(t - origin),
        }
    }

    pub fn p_value(&self, t: f64) -> f64 {
        self.eval_piece(self.piece_at(t), t)
    }

    fn cycle_breakpoints(&self, start: f64) -> Vec<f64> {
        let half = 0.5 * self.period;
        let mut out = vec![
            start,
            start + self.window,
            start + half,
            start + self.window + half,
        ];
        let len = self.active_len();
        for &k in self.shape.knots() {
            if k > 0.0 && k < len {
                out.push(start + self.window + k);
                out.push(start + self.window + half + k);
            }
        }
        out.sort_by(f64::total_cmp);
        out
    }

    /// Points in `(t1, t2)` where `p` or its derivative may jump.
    pub fn breakpoints_between(&self, t1: f64, t2: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let (mut start, _) = self.cycle(t1);
        while start < t2 {
            out.extend(
                self.cycle_breakpoints(start)
                    .into_iter()
                    .filter(|&b| b > t1 && b < t2),
            );
            start += self.period;
        }
        out
    }

    /// `int_0^{T0} |p|`.
    pub fn abs_integral_per_period(&self) -> f64 {
        2.0 * self.shape.abs_integral(self.active_len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCheck {
    pub ok: bool,
    pub integral: f64,
    pub nearest_k: i64,
}

/// Checks that `int_0^{T0/2 - T} c` stays off the `k*pi` lattice.
pub fn check_phase_condition(prof: &ExcitationProfile) -> PhaseCheck {
    let integral = prof.shape.integral(prof.active_len());
    let nearest_k = (integral / PI).round() as i64;
    let ok = (integral - nearest_k as f64 * PI).abs() > PHASE_TOL;
    PhaseCheck {
        ok,
        integral,
        nearest_k,
    }
}
