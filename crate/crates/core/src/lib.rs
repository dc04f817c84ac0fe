//! Instruction sequences with Boolean termination acting on service
//! families, stack functional units over `{0, 1, :}*`, and a laboratory for
//! the halting problem of such programs: an exact decider for the dup-only
//! fragment and a diagonal refutation of candidate reflexive solvers.

pub mod funit;
pub mod halting;
pub mod isa;
pub mod literal;
pub mod machine;
pub mod services;

pub use funit::{FunctionalUnit, MethodOperation, SbsState, Symbol};
pub use isa::{Focus, Instruction, InstructionSequence, MethodName};
pub use machine::{Configuration, Convergence, RunOutcome};
pub use services::{Reply, Service, ServiceFamily};
