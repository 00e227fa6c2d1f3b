//! Sampled instances of the Grönwall-type lemma and its checker.
//!
//! For nonnegative `alpha1, alpha2, alpha3` with
//! `alpha1' <= -alpha2 + alpha3 (1 + alpha1)`, the lemma gives
//!
//! ```text
//! alpha1(t) <= exp(int_s^t alpha3) (1 + alpha1(s)) - 1
//! int_s^inf alpha2 <= beta e^beta + (1 + beta e^beta) alpha1(s),  beta = int_s^inf alpha3
//! ```
//!
//! A sampled instance on `[t_0, t_K]` is extended past `t_K` by
//! `alpha2 = alpha3 = 0` and constant `alpha1`, which keeps the premise, so
//! the truncated integrals are legitimate inputs.

use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::error::{Error, Result};

/// Quadrature tolerance, relative to `max(1, |rhs|)`.
pub const GRONWALL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GronwallInstance {
    pub times: Vec<f64>,
    pub alpha1: Vec<f64>,
    pub alpha2: Vec<f64>,
    pub alpha3: Vec<f64>,
    /// cumulative `int alpha2` from the first sample
    pub int_alpha2: Vec<f64>,
    /// cumulative `int alpha3` from the first sample
    pub int_alpha3: Vec<f64>,
    /// cumulative `int (-alpha2 + alpha3 (1 + alpha1))`
    pub int_rhs: Vec<f64>,
}

fn cumulative_trapezoid(t: &[f64], f: &[f64]) -> Vec<f64> {
    let mut acc = vec![0.0; t.len()];
    for k in 1..t.len() {
        acc[k] = acc[k - 1] + 0.5 * (t[k] - t[k - 1]) * (f[k] + f[k - 1]);
    }
    acc
}

impl GronwallInstance {
    /// Instance from raw samples, integrals by trapezoid.
    pub fn from_samples(
        times: Vec<f64>,
        alpha1: Vec<f64>,
        alpha2: Vec<f64>,
        alpha3: Vec<f64>,
    ) -> Result<Self> {
        let k = times.len();
        for len in [alpha1.len(), alpha2.len(), alpha3.len()] {
            if len != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: len,
                });
            }
        }
        if k < 2 {
            return Err(Error::NotEnoughSamples(format!("{k} samples, need 2")));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("sample times must increase".into()));
        }
        if alpha1
            .iter()
            .chain(&alpha2)
            .chain(&alpha3)
            .any(|v| !(*v >= 0.0))
        {
            return Err(Error::InvalidParameter(
                "alpha samples must be nonnegative".into(),
            ));
        }
        let rhs: Vec<f64> = (0..k)
            .map(|i| -alpha2[i] + alpha3[i] * (1.0 + alpha1[i]))
            .collect();
        Ok(Self {
            int_alpha2: cumulative_trapezoid(&times, &alpha2),
            int_alpha3: cumulative_trapezoid(&times, &alpha3),
            int_rhs: cumulative_trapezoid(&times, &rhs),
            times,
            alpha1,
            alpha2,
            alpha3,
        })
    }

    /// `alpha3 = lambda`, `alpha2 = 0`, `alpha1 = (1 + alpha1_0) e^{lambda t} - 1`:
    /// the growth estimate holds with equality.
    pub fn closed_form(lambda: f64, alpha1_0: f64, horizon: f64, points: usize) -> Result<Self> {
        if !(lambda >= 0.0 && alpha1_0 >= 0.0 && horizon > 0.0 && points >= 2) {
            return Err(Error::InvalidParameter(
                "closed-form instance needs lambda, alpha1_0 >= 0, horizon > 0, points >= 2".into(),
            ));
        }
        let times: Vec<f64> = (0..points)
            .map(|k| horizon * k as f64 / (points - 1) as f64)
            .collect();
        let alpha1: Vec<f64> = times
            .iter()
            .map(|&t| (1.0 + alpha1_0) * (lambda * t).exp_m1() + alpha1_0)
            .collect();
        Ok(Self {
            int_alpha2: vec![0.0; points],
            int_alpha3: times.iter().map(|&t| lambda * t).collect(),
            int_rhs: alpha1.iter().map(|&a| a - alpha1_0).collect(),
            alpha2: vec![0.0; points],
            alpha3: vec![lambda; points],
            times,
            alpha1,
        })
    }

    /// Forward RK4 integration of
    /// `alpha1' = -alpha2 + alpha3 (1 + alpha1) - slack alpha1` together
    /// with the running integrals, sampled every step.
    pub fn forward(spec: &GronwallSpec) -> Result<Self> {
        spec.validate()?;
        let steps = (spec.horizon / spec.step).round() as usize;
        let h = spec.horizon / steps as f64;
        // state: [alpha1, int alpha2, int alpha3, int rhs]
        let f = |t: f64, z: &[f64; 4]| -> [f64; 4] {
            let a2 = spec.alpha2_rate(t) * z[0];
            let a3 = spec.alpha3(t);
            let rhs = -a2 + a3 * (1.0 + z[0]);
            [rhs - spec.slack * z[0], a2, a3, rhs]
        };
        let mut z = [spec.alpha1_0, 0.0, 0.0, 0.0];
        let mut inst = Self {
            times: Vec::with_capacity(steps + 1),
            alpha1: Vec::with_capacity(steps + 1),
            alpha2: Vec::with_capacity(steps + 1),
            alpha3: Vec::with_capacity(steps + 1),
            int_alpha2: Vec::with_capacity(steps + 1),
            int_alpha3: Vec::with_capacity(steps + 1),
            int_rhs: Vec::with_capacity(steps + 1),
        };
        for k in 0..=steps {
            let t = k as f64 * h;
            inst.times.push(t);
            inst.alpha1.push(z[0]);
            inst.alpha2.push(spec.alpha2_rate(t) * z[0]);
            inst.alpha3.push(spec.alpha3(t));
            inst.int_alpha2.push(z[1]);
            inst.int_alpha3.push(z[2]);
            inst.int_rhs.push(z[3]);
            if k == steps {
                break;
            }
            let add = |a: &[f64; 4], b: &[f64; 4], s: f64| -> [f64; 4] {
                [
                    a[0] + s * b[0],
                    a[1] + s * b[1],
                    a[2] + s * b[2],
                    a[3] + s * b[3],
                ]
            };
            let k1 = f(t, &z);
            let k2 = f(t + 0.5 * h, &add(&z, &k1, 0.5 * h));
            let k3 = f(t + 0.5 * h, &add(&z, &k2, 0.5 * h));
            let k4 = f(t + h, &add(&z, &k3, h));
            for i in 0..4 {
                z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        Ok(inst)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Smooth nonnegative coefficients for a forward-integrated instance:
/// `alpha3 = c3 e^{-d3 t} (1 + sin(w3 t))`,
/// `alpha2 = c2 (1 + cos(w2 t + phase)) alpha1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GronwallSpec {
    pub horizon: f64,
    pub step: f64,
    pub alpha1_0: f64,
    pub c2: f64,
    pub w2: f64,
    pub phase: f64,
    pub c3: f64,
    pub d3: f64,
    pub w3: f64,
    pub slack: f64,
}

impl GronwallSpec {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        Self {
            horizon: rng.gen_range(2.0..8.0),
            step: 5e-3,
            alpha1_0: rng.gen_range(0.0..5.0),
            c2: rng.gen_range(0.0..1.5),
            w2: rng.gen_range(0.5..6.0),
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
            c3: rng.gen_range(0.0..0.8),
            d3: rng.gen_range(0.1..2.0),
            w3: rng.gen_range(0.5..6.0),
            slack: if rng.gen_bool(0.5) {
                rng.gen_range(0.0..0.5)
            } else {
                0.0
            },
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.horizon > 0.0
            && self.step > 0.0
            && self.alpha1_0 >= 0.0
            && self.c2 >= 0.0
            && self.c3 >= 0.0
            && self.d3 >= 0.0
            && self.slack >= 0.0;
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "invalid Grönwall spec {self:?}"
            )));
        }
        Ok(())
    }

    fn alpha2_rate(&self, t: f64) -> f64 {
        self.c2 * (1.0 + (self.w2 * t + self.phase).cos())
    }

    fn alpha3(&self, t: f64) -> f64 {
        self.c3 * (-self.d3 * t).exp() * (1.0 + (self.w3 * t).sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GronwallCheck {
    /// growth estimate held at every pair `s <= t`
    pub growth_ok: bool,
    /// dissipation estimate held at every `s`
    pub dissipation_ok: bool,
    /// smallest `rhs - alpha1(t)` over all pairs
    pub growth_margin: f64,
    /// largest `rhs - alpha1(t)` over all pairs
    pub growth_gap_max: f64,
    /// smallest `rhs - int alpha2` over all `s`
    pub dissipation_margin: f64,
}

/// Verifies both conclusions on every grid pair. Fails with
/// `GronwallPremise` if the samples violate the differential inequality,
/// which means the instance was built wrongly.
pub fn gronwall_check(inst: &GronwallInstance) -> Result<GronwallCheck> {
    let k = inst.len();
    if k < 2 {
        return Err(Error::NotEnoughSamples(format!("{k} samples, need 2")));
    }
    for i in 0..k - 1 {
        let excess =
            (inst.alpha1[i + 1] - inst.alpha1[i]) - (inst.int_rhs[i + 1] - inst.int_rhs[i]);
        if excess > GRONWALL_TOL * inst.alpha1[i + 1].abs().max(1.0) {
            return Err(Error::GronwallPremise {
                t: inst.times[i + 1],
                excess,
            });
        }
    }

    let mut growth_ok = true;
    let mut growth_margin = f64::INFINITY;
    let mut growth_gap_max = f64::NEG_INFINITY;
    for s in 0..k {
        let base = 1.0 + inst.alpha1[s];
        for t in s..k {
            let rhs = (inst.int_alpha3[t] - inst.int_alpha3[s]).exp() * base - 1.0;
            let m = rhs - inst.alpha1[t];
            growth_margin = growth_margin.min(m);
            growth_gap_max = growth_gap_max.max(m);
            if m < -GRONWALL_TOL * rhs.abs().max(1.0) {
                growth_ok = false;
            }
        }
    }

    let mut dissipation_ok = true;
    let mut dissipation_margin = f64::INFINITY;
    let last = k - 1;
    for s in 0..k {
        let beta = inst.int_alpha3[last] - inst.int_alpha3[s];
        let be = beta * beta.exp();
        let rhs = be + (1.0 + be) * inst.alpha1[s];
        let m = rhs - (inst.int_alpha2[last] - inst.int_alpha2[s]);
        dissipation_margin = dissipation_margin.min(m);
        if m < -GRONWALL_TOL * rhs.abs().max(1.0) {
            dissipation_ok = false;
        }
    }

    Ok(GronwallCheck {
        growth_ok,
        dissipation_ok,
        growth_margin,
        growth_gap_max,
        dissipation_margin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GronwallSuite {
    pub instances: usize,
    /// instances where both estimates held
    pub passed: usize,
    pub min_growth_margin: f64,
    pub min_dissipation_margin: f64,
    /// `max |rhs - alpha1(t)|` on the constant-`alpha3` closed form
    pub closed_form_gap: f64,
}

impl GronwallSuite {
    pub fn ok(&self) -> bool {
        self.passed == self.instances && self.closed_form_gap <= GRONWALL_TOL
    }
}

/// `instances` forward-integrated random instances plus the closed-form
/// case with `lambda = 0.5`, `alpha1(0) = 2` on `[0, 6]`.
pub fn gronwall_suite(instances: usize, seed: u64) -> Result<GronwallSuite> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut suite = GronwallSuite {
        instances,
        passed: 0,
        min_growth_margin: f64::INFINITY,
        min_dissipation_margin: f64::INFINITY,
        closed_form_gap: 0.0,
    };
    for _ in 0..instances {
        let c = gronwall_check(&GronwallInstance::forward(&GronwallSpec::random(&mut rng))?)?;
        if c.growth_ok && c.dissipation_ok {
            suite.passed += 1;
        }
        suite.min_growth_margin = suite.min_growth_margin.min(c.growth_margin);
        suite.min_dissipation_margin = suite.min_dissipation_margin.min(c.dissipation_margin);
    }
    let c = gronwall_check(&GronwallInstance::closed_form(0.5, 2.0, 6.0, 301)?)?;
    suite.closed_form_gap = c.growth_margin.abs().max(c.growth_gap_max.abs());
    Ok(suite)
}
