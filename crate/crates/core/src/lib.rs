//! Numerical toolkit for the nonlocal maximum principle of dissipative active
//! scalars: moduli of continuity, the nonlocal dissipation functional, velocity
//! bounds, the key differential inequality, a pseudo-spectral solver for
//! fractional Burgers / SQG / modified SQG, and empirical modulus analysis.

pub mod analysis;
pub mod criterion;
pub mod dissipation;
pub mod error;
pub mod field;
pub mod moduli;
pub mod quad;
pub mod solver;
pub mod velocity;

pub use error::{Error, Result};
