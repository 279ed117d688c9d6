//! Acyclicity analysis and chase engine for existential rule bases.

pub mod analyzer;
pub mod chase;
pub mod generators;
pub mod graphs;
pub mod logic;
pub mod markings;
pub mod oracles;
pub mod par;
pub mod parser;
pub mod unify;

pub use logic::*;
pub use par::Exec;
