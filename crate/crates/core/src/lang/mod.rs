//! The concurrent functional term language.

pub mod errors;
pub mod eval;
pub mod term;
pub mod tparser;
pub mod typing;

pub use errors::{detect_error, RuntimeErrorKind};
pub use eval::{observe, proc_step, run, term_step, Observation, Outcome};
pub use term::{Process, Term, TermConst};
pub use tparser::{parse_program, Program, TopLevel};
pub use typing::{synth, typecheck_program, TContext, TypeError};
