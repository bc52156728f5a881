//! Exact-numerics simulation of many-body teleportation through the 2D
//! spin-1/2 XY model and of the measurement-feedback channel that prepares its
//! long-range Bell-pair ("rainbow") eigenstate.
//!
//! Module map:
//! - [`lattice`]: geometry, mirror partners, bonds, checkerboard labels.
//! - [`quantum`]: state vectors, density matrices, Bell states, measurements,
//!   partial traces and entropies.
//! - [`xy`]: the XY Hamiltonian, its rainbow eigenstates and time evolution.
//! - [`teleport`]: the Bell-measurement teleportation protocol.
//! - [`engineer`]: the Kraus channel, its spectral gap and exact iteration.
//! - [`trajectories`]: Monte Carlo trajectories of the feedback protocol.
//! - [`config`] and [`output`]: experiment configuration and CSV/JSON output.
//!
//! Qubit convention: flattened site index `k` is bit `k` of the basis-state
//! integer (little-endian). Kets are written with qubit 0 leftmost.

pub mod config;
pub mod engineer;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod output;
pub mod quantum;
pub mod teleport;
pub mod trajectories;
pub mod xy;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Applies `RAINBOW_THREADS` (if set) to the rayon and faer thread pools.
///
/// Safe to call more than once; only the first call configures rayon.
pub fn init_parallelism() {
    let threads = std::env::var("RAINBOW_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let n = rayon::current_num_threads();
    if n <= 1 {
        faer::set_global_parallelism(faer::Par::Seq);
    } else {
        faer::set_global_parallelism(faer::Par::rayon(n));
    }
}
