//! The XY Hamiltonian, its rainbow eigenstates and time evolution.

pub mod eigen;
pub mod evolve;
pub mod hamiltonian;

pub use eigen::{eig_energy, eig_rest_state, eig_state, pair_labels, verify_eigenstate, EigVariant};
pub use evolve::{evolve, krylov_evolve, krylov_propagate, DenseSpectrum, EvolveOptions, EvolveStats, Evolver, SectorSpectrum};
pub use hamiltonian::{sector_basis, sector_position, sector_state, XYHamiltonian, DEFAULT_JX, DEFAULT_JY, MAX_DENSE_SITES};
