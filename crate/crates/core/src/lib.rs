//! Natural-language understanding for human-robot dialog, built on
//! construction grammar.
//!
//! The pipeline runs utterance text through [`analyzer`] (tokenize, chart
//! analysis, anaphora resolution) into a [`analyzer::SemSpec`], through
//! [`specializer`] into an [`specializer::NTuple`], and through [`solver`],
//! which grounds referents in a [`world::SituationModel`], asks clarification
//! questions and plans [`cqi`] commands for the robot. [`session`] wires the
//! stages together with a robot link.

pub mod analyzer;
pub mod cqi;
pub mod grammar;
pub mod session;
pub mod solver;
pub mod specializer;
pub mod world;
