//! Randomized suites for the Laplacian identities and the spectral bound
//! `epsilon` on windowed Laplacian integrals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::dvec;
use crate::error::Result;
use crate::graph::{
    centering_matrix, generalized_laplacian, laplacian, rho, spectral_norm, DenseMatrix,
    GraphFamily, WeightedGraph,
};
use crate::switching::{epsilon_bound, window_gramian, SwitchSchedule};

/// Absolute tolerance for the exact identities.
pub const IDENTITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityResult {
    pub instances: usize,
    /// worst violation; at or below zero means every instance passed
    /// with room to spare
    pub worst: f64,
    pub passed: bool,
}

impl IdentityResult {
    fn new() -> Self {
        Self {
            instances: 0,
            worst: f64::NEG_INFINITY,
            passed: true,
        }
    }

    fn record(&mut self, violation: f64, tol: f64) {
        self.instances += 1;
        self.worst = self.worst.max(violation);
        if violation > tol {
            self.passed = false;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplacianIdentityReport {
    /// `||L0|| <= 1`
    pub centering_norm: IdentityResult,
    /// `L0 L = L` and `L(B) L0 = L(B)`
    pub centering_absorbs: IdentityResult,
    /// `u^T L(v 1^T) = v^T L(u 1^T)`
    pub swap_symmetry: IdentityResult,
    /// `||L(B)|| <= sqrt(n) ||L|| rho(B)`
    pub norm_bound: IdentityResult,
}

impl LaplacianIdentityReport {
    pub fn passed(&self) -> bool {
        self.centering_norm.passed
            && self.centering_absorbs.passed
            && self.swap_symmetry.passed
            && self.norm_bound.passed
    }
}

fn random_graph<R: Rng>(rng: &mut R, n: usize) -> WeightedGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(0.5) {
                edges.push((i, j, rng.gen_range(0.1..2.0)));
            }
        }
    }
    WeightedGraph::from_edges(n, &edges).expect("random edges are valid")
}

fn random_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn max_abs(m: &DenseMatrix) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Runs each identity on `instances` random graphs with `2 <= n <= 8`.
pub fn laplacian_identity_suite(instances: usize, seed: u64) -> Result<LaplacianIdentityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = LaplacianIdentityReport {
        centering_norm: IdentityResult::new(),
        centering_absorbs: IdentityResult::new(),
        swap_symmetry: IdentityResult::new(),
        norm_bound: IdentityResult::new(),
    };
    for _ in 0..instances {
        let n = rng.gen_range(2..=8);
        let g = random_graph(&mut rng, n);
        let lap = laplacian(&g);
        let l0 = centering_matrix(n);
        let b = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let lb = generalized_laplacian(&g, &b)?;

        report
            .centering_norm
            .record(spectral_norm(&l0) - 1.0, IDENTITY_TOL);

        let absorb = max_abs(&(&l0 * &lap - &lap)).max(max_abs(&(&lb * &l0 - &lb)));
        report.centering_absorbs.record(absorb, IDENTITY_TOL);

        let u = random_vec(&mut rng, n);
        let v = random_vec(&mut rng, n);
        let ones = dvec(&vec![1.0; n]);
        let lv = generalized_laplacian(&g, &(dvec(&v) * ones.transpose()))?;
        let lu = generalized_laplacian(&g, &(dvec(&u) * ones.transpose()))?;
        let lhs = (dvec(&u).transpose() * lv).transpose();
        let rhs = (dvec(&v).transpose() * lu).transpose();
        report
            .swap_symmetry
            .record((lhs - rhs).amax(), IDENTITY_TOL);

        let bound = (n as f64).sqrt() * spectral_norm(&lap) * rho(&b);
        report
            .norm_bound
            .record(spectral_norm(&lb) - bound, IDENTITY_TOL * bound.max(1.0));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonBoundReport {
    pub epsilon: f64,
    pub trials: usize,
    /// `min (u^T [int L] u) - epsilon` over the sampled `(u, t)`
    pub min_margin: f64,
    pub passed: bool,
}

/// Samples unit `u` orthogonal to `1` and window starts `t` in
/// `[t0, horizon - T]`, checking `u^T [int_t^{t+T} L] u >= epsilon`.
pub fn epsilon_bound_suite(
    sched: &SwitchSchedule,
    family: &GraphFamily,
    tau_a: f64,
    window: f64,
    horizon: f64,
    trials: usize,
    seed: u64,
) -> Result<EpsilonBoundReport> {
    let eps = epsilon_bound(family, tau_a)?.epsilon;
    let n = family.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = sched.t0();
    let hi = (horizon - window).max(lo);
    let mut min_margin = f64::INFINITY;
    for _ in 0..trials {
        let u = loop {
            let raw = random_vec(&mut rng, n);
            let mean = raw.iter().sum::<f64>() / n as f64;
            let c: Vec<f64> = raw.iter().map(|x| x - mean).collect();
            let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-6 {
                break c.iter().map(|x| x / norm).collect::<Vec<_>>();
            }
        };
        let t = if hi > lo { rng.gen_range(lo..hi) } else { lo };
        let gram = window_gramian(sched, family, t, window)?;
        let q = crate::graph::quad_form(&gram, &u);
        min_margin = min_margin.min(q - eps);
    }
    Ok(EpsilonBoundReport {
        epsilon: eps,
        trials,
        min_margin,
        passed: min_margin >= -IDENTITY_TOL * eps.max(1.0),
    })
}
