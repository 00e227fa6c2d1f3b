//! Boundary test for the zeroing-output candidates of the changed system.
//!
//! On the active block `[T + m T0/2, (m+1) T0/2)` a zeroing-output solution
//! has centered body-frame coordinate
//! `r sin((-1)^m int_0^{t - T - m T0/2} c + psi)`, and it must vanish at
//! both ends of the block because the motion freezes while `p = 0`.

use serde::Serialize;

use crate::dynamics::ExcitationProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseCandidate {
    /// Both boundary constraints hold within tolerance.
    pub boundary_consistent: bool,
    /// candidate value at the start of the block
    pub start_value: f64,
    /// candidate value at the end of the block
    pub end_value: f64,
}

/// Evaluates the candidate with amplitude `r`, phase `psi` and block index
/// parity `m` at the two block boundaries.
pub fn weak_obs_phase_check(prof: &ExcitationProfile, r: f64, psi: f64, m: u32) -> PhaseCandidate {
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    let total = prof.shape().integral(prof.active_len());
    let start_value = r * psi.sin();
    let end_value = r * (sign * total + psi).sin();
    let tol = 1e-9 * r.abs().max(1.0);
    PhaseCandidate {
        boundary_consistent: start_value.abs() <= tol && end_value.abs() <= tol,
        start_value,
        end_value,
    }
}
