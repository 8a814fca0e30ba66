//! Core library for a higher-order polymorphic lambda calculus with
//! equirecursive types and context-free session types.
//!
//! The pieces:
//!
//! - [`syntax`], [`parser`], [`rename`]: renamed abstract syntax for kinds
//!   and types, with minimal alpha-conversion.
//! - [`reduce`], [`kind`]: deterministic reduction, weak head normal forms,
//!   pre-kinding and decidable kinding.
//! - [`lts`], [`bisim`]: the labelled transition system over types and a
//!   bounded bisimulation oracle.
//! - [`grammar`], [`gbisim`], [`fsa`], [`equiv`]: translation to simple
//!   grammars, complete grammar bisimilarity, the finite-automaton fast
//!   path, and the top-level equivalence dispatcher.
//! - [`fog`]: deterministic first-order grammars and their encoding into
//!   types.
//! - [`lang`]: the concurrent functional term language with linear
//!   typechecking and a deterministic evaluator.

pub mod bisim;
pub mod equiv;
pub mod fog;
pub mod fsa;
pub mod gbisim;
pub mod grammar;
pub mod kind;
pub mod lang;
pub mod lts;
pub mod parser;
pub mod reduce;
pub mod rename;
pub mod syntax;

pub use bisim::{bounded_bisim, Verdict};
pub use equiv::{classify, equivalent, EquivConfig, Fragment};
pub use kind::{kind_of, pre_kind, KindError};
pub use lts::{transitions, Label};
pub use parser::{parse_kind, parse_type, ParseError};
pub use reduce::{is_whnf, normalize, normalize_bd, step, NormError};
pub use rename::{first_avail, free_vars, rename, substitute};
pub use syntax::{KContext, Kind, Polarity, Type, TypeConst, VarName, View};
