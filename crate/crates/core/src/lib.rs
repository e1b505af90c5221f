//! Γ-calculus laboratory for left-invariant sub-Riemannian model spaces.
//!
//! Models are built from Lie-algebra structure constants. Functions are
//! carried as truncated Taylor jets, so every carré-du-champ quantity is a
//! finite frame computation. The heat semigroup is estimated by Monte Carlo
//! and, on the Heisenberg group, by an implicit finite-difference solver.

pub mod error;
pub mod gamma;
pub mod geometry;
pub mod heat;
pub mod jet;
pub mod model_zoo;
pub mod verify;

mod util;

pub use error::{Error, Result};
