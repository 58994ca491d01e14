//! Late-time (discrete GGE) description of the Trotterized XXZ chain
//! quenched from the Néel state, with exact-diagonalization and
//! free-fermion cross-checks.

pub mod error;
pub mod exact_small;
pub mod free_fermion;
pub mod kernels;
pub mod linsolve;
pub mod observables;
pub mod params;
pub mod tba_gapless;
pub mod tba_gapped;
pub mod ysystem;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
