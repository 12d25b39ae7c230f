//! Exact fixed-point statistics of fixed-point-biased pattern-avoiding
//! involutions, their limiting laws, and a harness that compares the two.
//!
//! The crate is organised bottom-up:
//!
//! * [`perm`] holds permutations, pattern containment and the brute-force
//!   enumeration oracle.
//! * [`dist`] turns weight polynomials into biased fixed-point laws.
//! * [`series`] expands the bivariate generating functions of the two
//!   length-three pattern classes, plus the ballot-walk table.
//! * [`shape`] counts monotone-pattern avoiders through bounded Young shapes.
//! * [`limits`] evaluates the limiting distributions, samples traceless GOE
//!   spectra and measures TV/KS distances.
//! * [`harness`] runs the convergence experiments and emits reports.

pub mod dist;
pub mod error;
pub mod harness;
pub mod limits;
pub mod numeric;
pub mod perm;
pub mod series;
pub mod shape;

pub use dist::{biased_distribution, FpDistribution, Probabilities, Real, WeightPolynomial};
pub use error::{Error, Result};
pub use perm::{Pattern, Permutation};
pub use series::{SeriesTable, SigmaClass};
pub use shape::{Direction, Shape, ShapeBound};
