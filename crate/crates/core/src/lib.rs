//! A small laboratory for eventually linearizable shared objects.
//!
//! Implementations run as deterministic step machines over atomic base
//! objects ([`runtime`], [`algorithms`]); the recorded histories are judged
//! for weak consistency, t-linearizability and eventual linearizability
//! ([`checker`]); and the execution tree can be enumerated at desk scale for
//! counterexamples and stable nodes ([`explorer`]).

pub mod algorithms;
pub mod checker;
pub mod error;
pub mod explorer;
pub mod history;
pub mod runtime;
pub mod spec;
pub mod trace;
pub mod value;

pub use checker::{CheckReport, Checker, Linearization};
pub use error::{CheckError, ExploreError, HistoryError, RuntimeError, SpecError};
pub use history::{Event, EventKind, History, OperationRecord};
pub use runtime::{run, AlgorithmInstance, Schedule, Token, Workload};
pub use spec::{Invocation, TypeSpec};
pub use trace::{format_trace, parse_trace};
pub use value::Value;
