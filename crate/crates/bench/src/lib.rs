//! Benchmark fixtures shared by the criterion targets.

use qsl_core::{build_swap_goal, ControlSystem, Result, Unitary};

/// The N-level chain with `m` projector controls and its SWAP goal.
pub fn instance(n: usize, m: usize) -> Result<(ControlSystem, Unitary)> {
    Ok((ControlSystem::n_level(n, m)?, build_swap_goal(n)?))
}

/// Deterministic smooth amplitudes, `m` rows of `slots` entries, flattened.
pub fn smooth_amplitudes(m: usize, slots: usize) -> Vec<f64> {
    (0..m * slots).map(|i| (0.37 * i as f64).sin()).collect()
}
