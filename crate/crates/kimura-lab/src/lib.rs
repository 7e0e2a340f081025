//! Numerical laboratory for generalized Kimura diffusion operators.
//!
//! The crate solves the inhomogeneous initial-value problem `u_t - Lu = g`
//! on the truncated orthant-cylinder `[0, X]^n × [-Y, Y]^m`, where `L`
//! degenerates linearly at the faces `x_i = 0`, computes the anisotropic
//! Hölder norms adapted to that degeneracy, and runs reproducible
//! experiments that measure maximum principles, interpolation inequalities,
//! local and global Schauder-type ratios, and the smoothing of merely
//! continuous initial data.
//!
//! Modules follow the pipeline:
//!
//! * [`geometry`] — points, region decomposition, the anisotropic distance;
//! * [`exprlang`] — the coefficient/data expression language with exact
//!   symbolic differentiation;
//! * [`operator`] — the degenerate operator, assumption validation,
//!   coefficient freezing, the `Λ` constant;
//! * [`grid`], [`field`] — graded grids and sampled fields with derivative
//!   slots;
//! * [`holder`] — weighted Hölder norms, cutoff sequences, partitions of
//!   unity, calibrated inequality checks;
//! * [`solver`] — implicit time-stepping, the polynomial evolution oracle,
//!   derivative estimation;
//! * [`verify`] — the experiment registry producing pass/fail reports;
//! * [`config`], [`output`] — TOML run configuration and CSV emission.

pub mod config;
pub mod error;
pub mod exprlang;
pub mod field;
pub mod geometry;
pub mod grid;
pub mod holder;
pub mod linalg;
pub mod operator;
pub mod output;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
