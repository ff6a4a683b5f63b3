//! Parametric Markov chain analysis with arithmetic-circuit rational
//! functions.
//!
//! The pipeline: [`modelio`] parses a chain whose transition probabilities
//! are rational expressions over parameters, [`pmc`] holds the chain and its
//! underlying graph, and [`elim`] eliminates states one by one until the
//! quantity of interest (reachability probability, accumulated reward, or
//! long-run average reward) remains as a single root in an [`acir`] circuit
//! store. Circuits evaluate exactly, in floating point, or in outward-rounded
//! interval arithmetic, and canonicalize via random field evaluations.
//! [`oracle`] solves the same systems by dense rational elimination and
//! exists to cross-check the main path.

pub mod acir;
pub mod corpus;
pub mod elim;
pub mod modelio;
pub mod oracle;
pub mod pmc;
pub mod rational;

pub use rational::Rational;
