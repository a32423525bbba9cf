//! Quantum speed limits for gate synthesis.
//!
//! Two independent estimates of the minimum time needed to implement a gate
//! `G` on a controlled system `H(t) = H₀ + Σ_k f_k(t) H_k`:
//!
//! * [`bound`]: the lower bound `max_V ‖[G,V]‖ / ‖[H₀,V]‖` over unitaries
//!   that commute with every control Hamiltonian;
//! * [`grape`] and [`mintime`]: GRAPE pulse optimization inside a binary
//!   search over the gate duration.
//!
//! [`model`] builds the N-level chain with level-projector controls and the
//! SWAP goal between the first and last level; [`sweep`] runs both over an
//! `(N, M)` grid.

pub mod bound;
pub mod error;
pub mod grape;
pub mod lbfgs;
pub mod linalg;
pub mod mintime;
pub mod model;
pub mod selftest;
pub mod sweep;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use bound::{
    analytic_reference, feasible_unitary, maximize_bound, objective, previous_bound_reference,
    BoundConfig, BoundResult, FeasibleUnitaryParams, ObjectiveValue,
};
pub use error::{QslError, Result};
pub use grape::{
    gate_error, grape_gradient, grape_optimize, propagate, GrapeConfig, GrapeResult, PulseSchedule,
};
pub use linalg::{
    commutator, eig_hermitian, expm_hermitian, hs_norm, Hermitian, SquareComplexMatrix, Unitary,
};

pub use mintime::{find_min_time, find_min_time_until, MinTimeConfig, MinTimeResult, TimeProbe};
pub use model::{build_controls, build_drift, build_swap_goal, lie_rank, ControlSystem, LieRank};

/// Independent RNG stream for start `index` under `seed`; results do not
/// depend on how starts are scheduled across threads.
pub fn start_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Thread pool with `jobs` workers; 0 picks one per core.
pub fn worker_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| QslError::InvalidArgument(format!("cannot build worker pool: {e}")))
}
