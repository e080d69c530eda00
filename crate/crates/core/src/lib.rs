//! Decoherence of a qubit coupled to one spin of an Ising, XY or XXZ chain.
//!
//! The qubit dephases at a rate set by the Loschmidt echo of the chain,
//! `L(t) = |⟨ψ₀| e^{−iH_e t} |ψ₀⟩|²`, where `ψ₀` is the bath ground state and
//! `H_e` the bath Hamiltonian seen by the excited qubit state. Three engines
//! compute it:
//!
//! * [`free_fermion`]: exact determinant formula for open XY-class chains,
//!   `O(N³)` per time point;
//! * [`exact`]: full Hilbert space, the reference for everything else;
//! * [`tebd`]: matrix-product states for XXZ chains of ~100 spins.
//!
//! [`analysis`] extracts Gaussian rates, plateaus and critical fits from echo
//! series, and [`gates`] compiles Trotter steps into lattice gate sequences.

pub mod analysis;
pub mod echo;
pub mod error;
pub mod exact;
pub mod free_fermion;
pub mod gates;
pub mod krylov;
pub mod linalg;
pub mod models;
pub mod sparse;
pub mod tebd;

pub use echo::{EchoMeta, EchoSeries, Method};
pub use error::{Error, Result};
pub use models::{BathSpec, Boundary, CouplingSpec, Family, Pauli, PauliTerm, QubitBranch};
