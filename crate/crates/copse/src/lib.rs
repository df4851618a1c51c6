//! Workbench for nominal subtyping with variance.
//!
//! The crate models class tables whose declarations carry per-parameter
//! variance annotations, decides subtyping queries on the fragments where
//! the problem is decidable, classifies tables by the features that govern
//! decidability, and converts between class tables and the grammar
//! formalisms whose derivations mirror subtyping derivations: regular tree
//! grammars, monadic context-free tree grammars, and plain string grammars.
//! A code generator turns terminal-headed grammars into fluent-API source
//! whose type checker replays the subtyping machine.

pub mod analysis;
pub mod codegen;
pub mod fixtures;
pub mod format;
pub mod grammars;
pub mod subtyping;
pub mod table;
pub mod term;
pub mod transforms;
