//! Divisibility of qubit and two-state classical dynamics in the Schrödinger
//! and Heisenberg pictures.
//!
//! A dynamical map `Φ_t` generates two time-local generators: the left one
//! `𝓛_t = Φ̇_t Φ_t⁻¹` and the right one `𝓡_t = Φ_t⁻¹ Φ̇_t`. Schrödinger
//! (C)P-divisibility is (complete) positivity of the left propagator
//! `Φ_t Φ_s⁻¹`; Heisenberg (C)P-divisibility is (complete) positivity of the
//! right propagator `Φ_s⁻¹ Φ_t`, equivalently of its dual. The two notions
//! are inequivalent, and this crate decides both, along with the associated
//! distinguishability revivals and POVM resource monotones.
//!
//! Module map:
//!
//! * [`smallmat`]: Jacobi eigenvalues, norms and Choi matrices at dimension 2 and 4.
//! * [`bloch`]: Bloch vectors for states, effects and affine qubit maps.
//! * [`dynmap`]: trajectories, generators, propagators and divisibility verdicts.
//! * [`models`]: built-in phase-covariant, dephasing+rotation and classical dynamics.
//! * [`witness`]: trace and operator distances, non-Markovianity measures, oracles.
//! * [`povm`]: joint measurability, incompatibility monotones and sharpness.
//! * [`cli`]: the `divimark` command-line front end.

pub mod bloch;
pub mod cli;
pub mod dynmap;
mod error;
pub mod models;
pub mod povm;
pub mod random;
pub mod smallmat;
pub mod tol;
pub mod witness;

pub use error::{Error, Result};
pub use tol::Tolerances;
