//! Pure-state and density-matrix numerics.

pub mod bell;
pub mod density;
pub mod split;
pub mod state;

pub use bell::{
    bell_amplitudes, bell_pair_product, bell_project, bell_state, collapse_z_pair, measure_z_pair,
    measure_z_pair_in_place, sample_outcome, project_bell_in_place, z_pair_probabilities, BranchResult, PairOutcome,
};
pub use density::{
    fidelity_pure, mutual_information, mutual_information_dm, reduced_density, renyi2, von_neumann_entropy,
    DensityMatrix, MAX_DENSE_QUBITS,
};
pub use state::{inner, BlochState, Gate2, PauliAxis, StateVector};
pub use split::PairSplit;
