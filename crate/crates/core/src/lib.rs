//! Strong-field quantum optics toolkit.
//!
//! Computes the classical SFA response of an atom to an intense sin² pulse,
//! the coherent displacements it imprints on the quantized field modes, the
//! conditioned cat-like field states that follow from HHG and ATI, and the
//! homodyne tomography and shot-correlation analysis used to verify them.
//! Everything is in atomic units.

// Parameter checks are written `!(x > 0.0)` on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ati;
pub mod conditioning;
pub mod displacement;
pub mod error;
pub mod fock;
pub mod interp;
pub mod pulse;
pub mod qspec;
pub mod quad;
pub mod sfa;
pub mod tomography;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Speed of light in atomic units.
pub const SPEED_OF_LIGHT: f64 = 137.035_999_084;
