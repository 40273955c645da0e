//! Exact linear algebra for divide-and-color models on small ground sets.

pub mod asymptotics;
pub mod error;
pub mod ising;
pub mod linalg;
pub mod lp;
pub mod matrix;
pub mod operators;
pub mod partition;
pub mod rational;
pub mod solver;
pub mod verify;

pub use error::{DcError, Result};
pub use linalg::AffineSolutionSet;
pub use matrix::{Label, RationalMatrix};
pub use partition::{IntegerPartition, Outcome, SetPartition, Subset};
pub use rational::Rational;
pub use solver::{MeasureVector, SolutionReport};
