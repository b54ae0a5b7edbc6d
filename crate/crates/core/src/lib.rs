//! Global-optimization test functions built by weighted composition of
//! smoothed multidimensional discrete random fields.
//!
//! A [`FieldSpec`] describes a virtual lattice of pseudo-random values over a
//! subset of the variables; [`CompositionSpec`] sums weighted fields into a
//! test function on the unit hypercube. The [`sensitivity`] and
//! [`calibration`] modules measure and tune the variance contributions of
//! the summands, and [`bench`] runs a genetic algorithm on generated
//! problems.

pub mod bench;
pub mod calibration;
pub mod composition;
pub mod error;
pub mod io;
pub mod mdrf;
pub mod sampling;
pub mod sensitivity;
pub mod smoothing;

pub use composition::{eval, eval_grad, CompositionSpec, TermSpec};
pub use error::{Error, Result};
pub use mdrf::{CodomainDistribution, FieldSpec, IndexVector};
