//! Unicycle swarm, the distributed controller, body-frame coordinates and
//! the closed-loop vector fields.

mod excitation;
mod integrate;

pub use excitation::{
    check_phase_condition, ExcitationPiece, ExcitationProfile, ExcitationShape, PhaseCheck,
    PHASE_TOL,
};
pub use integrate::{
    default_step, integrate, Frame, InitialState, IntegratorConfig, Trajectory, VectorField,
    DEFAULT_EVENT_CAP,
};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{generalized_laplacian, laplacian, DenseMatrix, WeightedGraph};

/// Below this `|s|` the difference quotients switch to their Taylor series.
const SERIES_CUTOFF: f64 = 1e-6;

/// World-frame positions and unwrapped headings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub theta: Vec<f64>,
}

/// Positions rotated into each robot's own heading frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyFrameState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub theta: Vec<f64>,
}

macro_rules! stacked_state {
    ($ty:ident) => {
        impl $ty {
            pub fn new(x: Vec<f64>, y: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
                let n = x.len();
                for len in [y.len(), theta.len()] {
                    if len != n {
                        return Err(Error::DimensionMismatch {
                            expected: n,
                            found: len,
                        });
                    }
                }
                if x.iter().chain(&y).chain(&theta).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("non-finite state entry".into()));
                }
                Ok(Self { x, y, theta })
            }

            pub fn zeros(n: usize) -> Self {
                Self {
                    x: vec![0.0; n],
                    y: vec![0.0; n],
                    theta: vec![0.0; n],
                }
            }

            pub fn n(&self) -> usize {
                self.x.len()
            }

            /// `[x; y; theta]`.
            pub fn to_flat(&self) -> Vec<f64> {
                let mut v = Vec::with_capacity(3 * self.n());
                v.extend_from_slice(&self.x);
                v.extend_from_slice(&self.y);
                v.extend_from_slice(&self.theta);
                v
            }

            pub fn from_flat(flat: &[f64]) -> Self {
                let n = flat.len() / 3;
                Self {
                    x: flat[..n].to_vec(),
                    y: flat[n..2 * n].to_vec(),
                    theta: flat[2 * n..3 * n].to_vec(),
                }
            }

            pub fn norm(&self) -> f64 {
                self.x
                    .iter()
                    .chain(&self.y)
                    .chain(&self.theta)
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt()
            }
        }
    };
}

stacked_state!(SwarmState);
stacked_state!(BodyFrameState);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    pub k_v: f64,
    pub k_w: f64,
}

impl ControllerParams {
    pub fn new(k_v: f64, k_w: f64) -> Result<Self> {
        if !(k_v > 0.0 && k_w > 0.0 && k_v.is_finite() && k_w.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gains must be positive, got k_v = {k_v}, k_w = {k_w}"
            )));
        }
        Ok(Self { k_v, k_w })
    }
}

/// Forward speed `v` and turn rate `w` for every robot.
#[derive(Debug, Clone, PartialEq)]
pub struct Inputs {
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

fn check_n(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// The distributed law, given the current excitation value `p`. Robot `i`
/// reads only the states of its neighbors in `g`.
pub fn control_input_with(
    state: &SwarmState,
    g: &WeightedGraph,
    params: ControllerParams,
    p: f64,
) -> Result<Inputs> {
    let n = state.n();
    check_n(g.n(), n)?;
    let mut v = vec![0.0; n];
    let mut w = vec![p; n];
    for i in 0..n {
        let (c, s) = (state.theta[i].cos(), state.theta[i].sin());
        let mut dv = 0.0;
        let mut dw = 0.0;
        for j in 0..n {
            let a = g.weight(i, j);
            if a == 0.0 {
                continue;
            }
            dv += a * (c * (state.x[i] - state.x[j]) + s * (state.y[i] - state.y[j]));
            dw += a * (state.theta[i] - state.theta[j]);
        }
        v[i] = -params.k_v * dv;
        w[i] -= params.k_w * dw;
    }
    Ok(Inputs { v, w })
}

pub fn control_input(
    state: &SwarmState,
    g: &WeightedGraph,
    params: ControllerParams,
    prof: &ExcitationProfile,
    t: f64,
) -> Result<Inputs> {
    control_input_with(state, g, params, prof.p_value(t))
}

/// Rotates every robot's position by minus its heading.
pub fn body_transform(state: &SwarmState) -> BodyFrameState {
    let n = state.n();
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    for i in 0..n {
        let (s, c) = state.theta[i].sin_cos();
        x[i] = c * state.x[i] + s * state.y[i];
        y[i] = -s * state.x[i] + c * state.y[i];
    }
    BodyFrameState {
        x,
        y,
        theta: state.theta.clone(),
    }
}

/// Inverse of [`body_transform`].
pub fn world_from_body(b: &BodyFrameState) -> SwarmState {
    let n = b.n();
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    for i in 0..n {
        let (s, c) = b.theta[i].sin_cos();
        x[i] = c * b.x[i] - s * b.y[i];
        y[i] = s * b.x[i] + c * b.y[i];
    }
    SwarmState {
        x,
        y,
        theta: b.theta.clone(),
    }
}

/// `(cos s - 1)/s`, continuously extended by 0 at the origin.
pub fn dcos0(s: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else if s.abs() < SERIES_CUTOFF {
        -s / 2.0 + s.powi(3) / 24.0
    } else {
        // cos s - 1 = -2 sin^2(s/2), without the cancellation
        -2.0 * (0.5 * s).sin().powi(2) / s
    }
}

/// `sin(s)/s`, continuously extended by 1 at the origin.
pub fn dsin0(s: f64) -> f64 {
    if s == 0.0 {
        1.0
    } else if s.abs() < SERIES_CUTOFF {
        1.0 - s * s / 6.0
    } else {
        s.sin() / s
    }
}

/// `B*_{ij} = dcos0(theta_i - theta_j) x_j + dsin0(theta_i - theta_j) y_j`.
pub fn bstar(b: &BodyFrameState) -> DenseMatrix {
    let n = b.n();
    DenseMatrix::from_fn(n, n, |i, j| {
        let d = b.theta[i] - b.theta[j];
        dcos0(d) * b.x[j] + dsin0(d) * b.y[j]
    })
}

/// Closed loop in body-frame coordinates:
///
/// ```text
/// x' = p y - k_v L x + L(k_v B* - k_w y 1^T) theta
/// y' = -p x + L(k_w x 1^T) theta
/// theta' = p 1 - k_w L theta
/// ```
pub fn compact_rhs_with(
    b: &BodyFrameState,
    g: &WeightedGraph,
    params: ControllerParams,
    p: f64,
) -> Result<BodyFrameState> {
    let n = b.n();
    check_n(g.n(), n)?;
    let lap = laplacian(g);
    let x = DVector::from_column_slice(&b.x);
    let y = DVector::from_column_slice(&b.y);
    let theta = DVector::from_column_slice(&b.theta);
    let ones = DVector::from_element(n, 1.0);

    let bx = bstar(b) * params.k_v - &y * ones.transpose() * params.k_w;
    let by = &x * ones.transpose() * params.k_w;

    let dx = &y * p - &lap * &x * params.k_v + generalized_laplacian(g, &bx)? * &theta;
    let dy = -&x * p + generalized_laplacian(g, &by)? * &theta;
    let dtheta = &ones * p - &lap * &theta * params.k_w;
    Ok(BodyFrameState {
        x: dx.as_slice().to_vec(),
        y: dy.as_slice().to_vec(),
        theta: dtheta.as_slice().to_vec(),
    })
}

pub fn compact_rhs(
    b: &BodyFrameState,
    g: &WeightedGraph,
    params: ControllerParams,
    prof: &ExcitationProfile,
    t: f64,
) -> Result<BodyFrameState> {
    compact_rhs_with(b, g, params, prof.p_value(t))
}

/// Unicycle kinematics driven by the distributed law.
pub fn original_rhs_with(
    state: &SwarmState,
    g: &WeightedGraph,
    params: ControllerParams,
    p: f64,
) -> Result<SwarmState> {
    let u = control_input_with(state, g, params, p)?;
    let n = state.n();
    let mut out = SwarmState::zeros(n);
    for i in 0..n {
        let (s, c) = state.theta[i].sin_cos();
        out.x[i] = c * u.v[i];
        out.y[i] = s * u.v[i];
        out.theta[i] = u.w[i];
    }
    Ok(out)
}

pub fn original_rhs(
    state: &SwarmState,
    g: &WeightedGraph,
    params: ControllerParams,
    prof: &ExcitationProfile,
    t: f64,
) -> Result<SwarmState> {
    original_rhs_with(state, g, params, prof.p_value(t))
}

/// The system left once the virtual output is zeroed: a pure rotation of
/// `(x, y)` at rate `p` with headings advancing uniformly.
pub fn changed_rhs_with(b: &BodyFrameState, p: f64) -> BodyFrameState {
    BodyFrameState {
        x: b.y.iter().map(|v| p * v).collect(),
        y: b.x.iter().map(|v| -p * v).collect(),
        theta: vec![p; b.n()],
    }
}

pub fn changed_rhs(b: &BodyFrameState, prof: &ExcitationProfile, t: f64) -> BodyFrameState {
    changed_rhs_with(b, prof.p_value(t))
}
