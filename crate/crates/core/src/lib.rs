//! Membrane-computing simulator for generalized Nash equilibria of
//! energy-market population games under Brown–von Neumann–Nash dynamics.
//!
//! * [`engine`] executes transition P systems with membrane polarization.
//! * [`pspec`] reads and writes the `.pspec` text format.
//! * [`builder`] compiles game instances (and stand-alone multipliers) into
//!   P systems.
//! * [`oracle`] integrates the same discretized dynamics directly.
//! * [`harness`] ties the pieces together for the command line and tests.

pub mod builder;
pub mod engine;
pub mod error;
pub mod harness;
pub mod multiset;
pub mod oracle;
pub mod pspec;
pub mod symbol;

#[cfg(test)]
mod proptests;

pub use error::{BuildError, EngineError, OracleError, PspecError, SpecFileError};
pub use multiset::Multiset;
pub use symbol::{Label, Symbol};
