//! Truncated Fock-space linear algebra.

pub mod expm;
pub mod operator;
pub mod quadrature;
pub mod space;
pub mod state;

pub use operator::{
    displacement_guard, displacement_operator, mode_annihilation, number_operator, quadrature_operator, Matrix,
    Operator, GUARD_BAND, UNITARITY_TOL,
};
pub use quadrature::{quadrature_wavefunction, quadrature_wavefunctions};
pub use space::{policy_dim, ModeSpace, ATOM, CAVITY};
pub use state::{
    coherent_state, coherent_state_with_budget, fidelity, join_modes, number_state, parity_expectation, reduce_mode,
    DensityOperator, ReduceMode, StateVector, DEFAULT_LEAKAGE_BUDGET,
};

use nalgebra::{Dim, Matrix as NaMatrix, RawStorage};
use num_complex::Complex64;

/// Largest entry modulus of a complex matrix or vector.
pub fn max_entry_norm<R: Dim, C: Dim, S: RawStorage<Complex64, R, C>>(m: &NaMatrix<Complex64, R, C, S>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}
