//! Deterministic shared-memory simulator.
//!
//! Processes are step machines over atomic base objects. One scheduler tick
//! executes exactly one [`BaseCommand`] of one process, so a [`Schedule`]
//! fully determines the interleaving. Only the implemented object's
//! invocation and response events are recorded in the resulting history.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::RuntimeError;
use crate::history::{Event, History};
use crate::spec::{Invocation, TypeSpec};
use crate::value::Value;

/// A base object cell: a named object, or one slot of a register array.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjRef {
    pub name: &'static str,
    pub slot: usize,
}

impl ObjRef {
    pub const fn scalar(name: &'static str) -> ObjRef {
        ObjRef { name, slot: 0 }
    }

    pub const fn cell(name: &'static str, slot: usize) -> ObjRef {
        ObjRef { name, slot }
    }
}

impl fmt::Display for ObjRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.name, self.slot)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum BaseObject {
    AtomicRegister(Value),
    AtomicFaa(i64),
    /// Stored oldest-first; accesses return newest-first.
    AtomicFac(Vec<Value>),
    ChaosFac(ChaosFac),
}

/// A fetch-and-cons object that misbehaves for a bounded prefix.
///
/// Accesses `1..k` are served from a private per-process fork, so each
/// process only sees its own earlier values. Access `k` merges the forks
/// into one canonical list (process id ascending, program order within a
/// process) and from then on the object is an ordinary atomic FAC.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ChaosFac {
    pub k: u64,
    pub accesses: u64,
    /// Oldest-first per process.
    pub forks: BTreeMap<usize, Vec<Value>>,
    /// Oldest-first once merged.
    pub merged: Option<Vec<Value>>,
}

impl ChaosFac {
    pub fn new(k: u64) -> Self {
        ChaosFac { k, accesses: 0, forks: BTreeMap::new(), merged: None }
    }

    pub fn is_merged(&self) -> bool {
        self.merged.is_some()
    }

    fn fac(&mut self, proc: usize, v: Value) -> Value {
        self.accesses += 1;
        if self.merged.is_none() && self.accesses < self.k {
            let fork = self.forks.entry(proc).or_default();
            let ret = newest_first(fork);
            fork.push(v);
            return ret;
        }
        let list = self.merged.get_or_insert_with(|| std::mem::take(&mut self.forks).into_values().flatten().collect());
        let ret = newest_first(list);
        list.push(v);
        ret
    }
}

fn newest_first(oldest_first: &[Value]) -> Value {
    Value::List(oldest_first.iter().rev().cloned().collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum BaseCommand {
    Read(ObjRef),
    Write(ObjRef, Value),
    Faa(ObjRef),
    Fac(ObjRef, Value),
    /// Completes the current high-level operation.
    Return(Value),
}

impl fmt::Display for BaseCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseCommand::Read(o) => write!(f, "read({o})"),
            BaseCommand::Write(o, v) => write!(f, "write({o},{v})"),
            BaseCommand::Faa(o) => write!(f, "faa({o})"),
            BaseCommand::Fac(o, v) => write!(f, "fac({o},{v})"),
            BaseCommand::Return(v) => write!(f, "return({v})"),
        }
    }
}

/// Applies one base command to one object. `proc` only matters for
/// [`ChaosFac`].
pub fn base_access(obj: &mut BaseObject, proc: usize, cmd: &BaseCommand) -> Result<Value, RuntimeError> {
    match (obj, cmd) {
        (BaseObject::AtomicRegister(v), BaseCommand::Read(_)) => Ok(v.clone()),
        (BaseObject::AtomicRegister(v), BaseCommand::Write(_, new)) => {
            *v = new.clone();
            Ok(Value::Null)
        }
        (BaseObject::AtomicFaa(n), BaseCommand::Faa(_)) => {
            let old = *n;
            *n += 1;
            Ok(Value::Int(old))
        }
        (BaseObject::AtomicFac(list), BaseCommand::Fac(_, v)) => {
            let ret = newest_first(list);
            list.push(v.clone());
            Ok(ret)
        }
        (BaseObject::ChaosFac(c), BaseCommand::Fac(_, v)) => Ok(c.fac(proc, v.clone())),
        (obj, cmd) => Err(RuntimeError::KindMismatch { object: format!("{obj:?}"), command: cmd.to_string() }),
    }
}

/// All base objects of one configuration.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Memory {
    cells: BTreeMap<ObjRef, BaseObject>,
    /// Register arrays: unwritten slots read as null.
    arrays: BTreeSet<&'static str>,
}

impl Memory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &'static str, obj: BaseObject) -> Self {
        self.cells.insert(ObjRef::scalar(name), obj);
        self
    }

    pub fn with_cell(mut self, at: ObjRef, obj: BaseObject) -> Self {
        self.cells.insert(at, obj);
        self
    }

    pub fn with_register_array(mut self, name: &'static str) -> Self {
        self.arrays.insert(name);
        self
    }

    pub fn get(&self, at: ObjRef) -> Option<&BaseObject> {
        self.cells.get(&at)
    }

    pub fn cells(&self) -> impl Iterator<Item = (&ObjRef, &BaseObject)> {
        self.cells.iter()
    }

    pub fn access(&mut self, proc: usize, cmd: &BaseCommand) -> Result<Value, RuntimeError> {
        let at = match cmd {
            BaseCommand::Read(o) | BaseCommand::Write(o, _) | BaseCommand::Faa(o) | BaseCommand::Fac(o, _) => *o,
            BaseCommand::Return(_) => return Err(RuntimeError::KindMismatch { object: "memory".into(), command: cmd.to_string() }),
        };
        if !self.cells.contains_key(&at) {
            if !self.arrays.contains(at.name) {
                return Err(RuntimeError::UnknownObject(at.to_string()));
            }
            if let BaseCommand::Read(_) = cmd {
                return Ok(Value::Null);
            }
            self.cells.insert(at, BaseObject::AtomicRegister(Value::Null));
        }
        base_access(self.cells.get_mut(&at).expect("cell present"), proc, cmd)
    }
}

/// Per-process step machine of an implementation.
///
/// Local state is a [`Value`] so that configurations compare and hash by
/// value. `persistent` survives across the operations of one process.
pub trait Program: Send + Sync {
    /// Local state at the start of an invocation.
    fn begin(&self, proc: usize, inv: &Invocation) -> Result<Value, RuntimeError>;

    /// Given the local state and the response to the previous base command
    /// (`None` on the first step), yields the next command and local state.
    fn step(
        &self,
        proc: usize,
        inv: &Invocation,
        persistent: &mut Value,
        local: &Value,
        last: Option<&Value>,
    ) -> Result<(BaseCommand, Value), RuntimeError>;
}

/// Declared upper bound on base accesses per operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepBound {
    Fixed(usize),
    /// `base + per_op * total_ops`, where `total_ops` is the workload size.
    Linear {
        base: usize,
        per_op: usize,
    },
}

impl StepBound {
    pub fn limit(self, total_ops: usize) -> usize {
        match self {
            StepBound::Fixed(n) => n,
            StepBound::Linear { base, per_op } => base + per_op * total_ops,
        }
    }
}

/// Shared objects plus per-process persistent local state.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Config {
    pub memory: Memory,
    pub persistent: Vec<Value>,
}

/// An implementation compiled to a [`Program`] over base objects.
#[derive(Clone)]
pub struct AlgorithmInstance {
    pub name: String,
    pub procs: usize,
    /// Object name used in recorded events.
    pub object: String,
    /// Type the implementation is supposed to provide.
    pub spec: TypeSpec,
    pub initial: Config,
    pub bound: StepBound,
    pub program: Arc<dyn Program>,
}

impl fmt::Debug for AlgorithmInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AlgorithmInstance")
            .field("name", &self.name)
            .field("procs", &self.procs)
            .field("spec", &self.spec.name())
            .field("bound", &self.bound)
            .finish_non_exhaustive()
    }
}

/// High-level invocations each process performs, in order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Workload {
    pub per_proc: Vec<Vec<Invocation>>,
}

impl Workload {
    pub fn new(per_proc: Vec<Vec<Invocation>>) -> Self {
        Workload { per_proc }
    }

    pub fn total_ops(&self) -> usize {
        self.per_proc.iter().map(Vec::len).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Token {
    Start(usize),
    Step(usize),
    Crash(usize),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Start(p) => write!(f, "start {p}"),
            Token::Step(p) => write!(f, "step {p}"),
            Token::Crash(p) => write!(f, "crash {p}"),
        }
    }
}

/// Parses a schedule file: one `start|step|crash <proc>` token per line,
/// `#` comments and blank lines ignored.
pub fn parse_schedule(text: &str) -> Result<Vec<Token>, String> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(kind), Some(p), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(format!("line {}: expected `<start|step|crash> <proc>`", n + 1));
        };
        let p: usize = p.parse().map_err(|_| format!("line {}: bad process id `{p}`", n + 1))?;
        out.push(match kind {
            "start" => Token::Start(p),
            "step" => Token::Step(p),
            "crash" => Token::Crash(p),
            other => return Err(format!("line {}: unknown token `{other}`", n + 1)),
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CrashPlan {
    pub proc: usize,
    /// Crash is applied before the token drawn at this tick.
    pub at_tick: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Schedule {
    Tokens(Vec<Token>),
    /// Cycle through processes, giving each enabled one a tick per round.
    RoundRobin,
    /// Uniform draws over the enabled tokens of live processes.
    Seeded {
        seed: u64,
        crash: Option<CrashPlan>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Frame {
    pub inv: Invocation,
    pub local: Value,
    pub last: Option<Value>,
    pub base_steps: usize,
    pub inv_index: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProcState {
    pub persistent: Value,
    /// Next workload position to start.
    pub next: usize,
    pub frame: Option<Frame>,
    pub crashed: bool,
}

/// Base-access count of one completed operation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpStats {
    pub proc: usize,
    pub inv_index: usize,
    pub res_index: usize,
    pub base_steps: usize,
}

/// A run in progress. Cloning forks the run.
#[derive(Clone)]
pub struct Execution<'a> {
    alg: &'a AlgorithmInstance,
    workload: &'a Workload,
    memory: Memory,
    procs: Vec<ProcState>,
    history: History,
    schedule: Vec<Token>,
    stats: Vec<OpStats>,
}

impl<'a> Execution<'a> {
    pub fn new(alg: &'a AlgorithmInstance, workload: &'a Workload) -> Self {
        Self::from_config(alg, workload, &alg.initial)
    }

    pub fn from_config(alg: &'a AlgorithmInstance, workload: &'a Workload, config: &Config) -> Self {
        let procs = (0..alg.procs)
            .map(|p| ProcState { persistent: config.persistent.get(p).cloned().unwrap_or_default(), next: 0, frame: None, crashed: false })
            .collect();
        Execution {
            alg,
            workload,
            memory: config.memory.clone(),
            procs,
            history: History::default(),
            schedule: Vec::new(),
            stats: Vec::new(),
        }
    }

    pub fn algorithm(&self) -> &'a AlgorithmInstance {
        self.alg
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn schedule(&self) -> &[Token] {
        &self.schedule
    }

    pub fn ticks(&self) -> usize {
        self.schedule.len()
    }

    pub fn memory(&self) -> &Memory {
        &self.memory
    }

    pub fn procs(&self) -> &[ProcState] {
        &self.procs
    }

    pub fn stats(&self) -> &[OpStats] {
        &self.stats
    }

    /// Shared memory and persistent process state; meaningful as a restart
    /// point when no operation is in flight.
    pub fn config(&self) -> Config {
        Config { memory: self.memory.clone(), persistent: self.procs.iter().map(|p| p.persistent.clone()).collect() }
    }

    pub fn is_idle(&self) -> bool {
        self.procs.iter().all(|p| p.frame.is_none())
    }

    /// Scheduler-visible state used for duplicate detection.
    pub fn state_key(&self) -> (Memory, Vec<ProcState>, History) {
        (self.memory.clone(), self.procs.clone(), self.history.clone())
    }

    fn workload_len(&self, p: usize) -> usize {
        self.workload.per_proc.get(p).map_or(0, Vec::len)
    }

    /// The token each live process can take next, in process order.
    pub fn enabled(&self) -> Vec<Token> {
        let mut out = Vec::new();
        for (p, st) in self.procs.iter().enumerate() {
            if st.crashed {
                continue;
            }
            if st.frame.is_some() {
                out.push(Token::Step(p));
            } else if st.next < self.workload_len(p) {
                out.push(Token::Start(p));
            }
        }
        out
    }

    fn invalid(&self, reason: String) -> RuntimeError {
        RuntimeError::InvalidSchedule { tick: self.schedule.len(), reason }
    }

    pub fn apply(&mut self, token: Token) -> Result<(), RuntimeError> {
        let p = match token {
            Token::Start(p) | Token::Step(p) | Token::Crash(p) => p,
        };
        if p >= self.procs.len() {
            return Err(self.invalid(format!("process {p} does not exist")));
        }
        if self.procs[p].crashed {
            return Err(self.invalid(format!("process {p} has crashed")));
        }
        match token {
            Token::Start(_) => self.start(p)?,
            Token::Step(_) => self.step(p)?,
            Token::Crash(_) => self.procs[p].crashed = true,
        }
        self.schedule.push(token);
        Ok(())
    }

    fn start(&mut self, p: usize) -> Result<(), RuntimeError> {
        let st = &self.procs[p];
        if st.frame.is_some() {
            return Err(self.invalid(format!("process {p} already has an operation running")));
        }
        let Some(inv) = self.workload.per_proc.get(p).and_then(|w| w.get(st.next)) else {
            return Err(self.invalid(format!("process {p} has no remaining workload")));
        };
        let local = self.alg.program.begin(p, inv)?;
        let inv_index = self.history.len();
        self.history.push(Event::inv(p, &self.alg.object, &inv.op, inv.args.clone()));
        let st = &mut self.procs[p];
        st.next += 1;
        st.frame = Some(Frame { inv: inv.clone(), local, last: None, base_steps: 0, inv_index });
        Ok(())
    }

    fn step(&mut self, p: usize) -> Result<(), RuntimeError> {
        let st = &mut self.procs[p];
        // idle process: no-op tick
        let Some(frame) = st.frame.as_mut() else { return Ok(()) };
        let (cmd, local) = self.alg.program.step(p, &frame.inv, &mut st.persistent, &frame.local, frame.last.as_ref())?;
        match cmd {
            BaseCommand::Return(v) => {
                let frame = st.frame.take().expect("frame present");
                let res_index = self.history.len();
                self.history.push(Event::res(p, &self.alg.object, &frame.inv.op, v));
                self.stats.push(OpStats { proc: p, inv_index: frame.inv_index, res_index, base_steps: frame.base_steps });
            }
            cmd => {
                let resp = self.memory.access(p, &cmd)?;
                frame.local = local;
                frame.last = Some(resp);
                frame.base_steps += 1;
            }
        }
        Ok(())
    }

    /// Runs `p` alone until its current operation returns.
    pub fn finish_solo(&mut self, p: usize) -> Result<(), RuntimeError> {
        let limit = self.alg.bound.limit(self.workload.total_ops()) + 1;
        for _ in 0..=limit {
            if self.procs[p].frame.is_none() {
                return Ok(());
            }
            self.apply(Token::Step(p))?;
        }
        Err(RuntimeError::Program(format!("process {p} exceeded its step bound running solo")))
    }
}

/// Result of one complete run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub history: History,
    /// Tokens actually applied.
    pub schedule: Vec<Token>,
    pub stats: Vec<OpStats>,
    pub crashed: Vec<usize>,
    pub config: Config,
}

const MAX_TICKS: usize = 1_000_000;

/// Executes `alg` on `workload` under `schedule`.
pub fn run(alg: &AlgorithmInstance, workload: &Workload, schedule: &Schedule) -> Result<RunOutput, RuntimeError> {
    let mut ex = Execution::new(alg, workload);
    match schedule {
        Schedule::Tokens(tokens) => {
            for &t in tokens {
                ex.apply(t)?;
            }
        }
        Schedule::RoundRobin => loop {
            let enabled = ex.enabled();
            if enabled.is_empty() {
                break;
            }
            for t in enabled {
                ex.apply(t)?;
            }
            if ex.ticks() > MAX_TICKS {
                return Err(RuntimeError::Program("run exceeded tick limit".into()));
            }
        },
        Schedule::Seeded { seed, crash } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            loop {
                if let Some(c) = crash {
                    if c.at_tick == ex.ticks() && c.proc < alg.procs {
                        ex.apply(Token::Crash(c.proc))?;
                    }
                }
                let enabled = ex.enabled();
                let Some(&t) = enabled.choose(&mut rng) else { break };
                ex.apply(t)?;
                if ex.ticks() > MAX_TICKS {
                    return Err(RuntimeError::Program("run exceeded tick limit".into()));
                }
            }
        }
    }
    Ok(RunOutput {
        config: ex.config(),
        crashed: ex.procs.iter().enumerate().filter(|(_, s)| s.crashed).map(|(p, _)| p).collect(),
        history: ex.history,
        schedule: ex.schedule,
        stats: ex.stats,
    })
}
