use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("operation {op}/{arity} is not declared by spec `{spec}`")]
    UndeclaredOp { spec: String, op: String, arity: usize },
    #[error("history is not sequential")]
    NotSequential,
    #[error("unknown spec `{0}`")]
    UnknownSpec(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HistoryError {
    #[error("history is not well-formed")]
    MalformedHistory,
    #[error("suffix offset {t} out of range for history of length {len}")]
    OutOfRange { t: usize, len: usize },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("history is not well-formed")]
    MalformedHistory,
    #[error("history has {ops} operations, above the search cap of {cap}")]
    TooLarge { ops: usize, cap: usize },
    #[error("history mixes objects `{0}` and `{1}`; check one object at a time")]
    MixedObjects(String, String),
    #[error("t = {t} exceeds history length {len}")]
    OutOfRange { t: usize, len: usize },
    #[error(transparent)]
    Spec(#[from] SpecError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("invalid schedule token at tick {tick}: {reason}")]
    InvalidSchedule { tick: usize, reason: String },
    #[error("base command `{command}` does not apply to {object}")]
    KindMismatch { object: String, command: String },
    #[error("no base object named {0}")]
    UnknownObject(String),
    #[error("reorder_list left slot {slot} empty")]
    IncompleteView { slot: usize },
    #[error("response {response} does not end with offset list {offset}")]
    NotAPrefix { response: String, offset: String },
    #[error("malformed program state: {0}")]
    Program(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExploreError {
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error("{0}")]
    Setup(String),
}
