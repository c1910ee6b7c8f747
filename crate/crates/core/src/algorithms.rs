//! Implementations compiled to step machines over base objects.
//!
//! * [`ev_consensus`]: consensus from single-writer registers.
//! * [`ev_tas`]: test-and-set from one register.
//! * [`two_fac`]: two-process fetch-and-cons from fetch-and-add plus
//!   registers.
//! * [`universal`]: any type from one fetch-and-cons object by logging
//!   operations and replaying the log locally.
//! * [`direct_fac`]: one base FAC access per operation, for observing base
//!   objects through the same pipeline.
//!
//! Local program state is encoded as a `Value::List` whose first element is
//! a program counter.

use std::sync::Arc;

use crate::error::RuntimeError;
use crate::runtime::{AlgorithmInstance, BaseCommand, BaseObject, ChaosFac, Config, Memory, ObjRef, Program, StepBound, Workload};
use crate::spec::{Invocation, TypeSpec};
use crate::value::Value;

pub const OBJECT: &str = "O";

fn bad_state(what: &str, local: &Value) -> RuntimeError {
    RuntimeError::Program(format!("{what}: unexpected local state {local}"))
}

fn fields(local: &Value) -> &[Value] {
    local.as_list().unwrap_or(&[])
}

fn pc(local: &Value) -> i64 {
    fields(local).first().and_then(Value::as_int).unwrap_or(-1)
}

fn instance(
    name: String,
    procs: usize,
    spec: TypeSpec,
    memory: Memory,
    bound: StepBound,
    program: impl Program + 'static,
) -> AlgorithmInstance {
    AlgorithmInstance {
        name,
        procs,
        object: OBJECT.to_string(),
        spec,
        initial: Config { memory, persistent: vec![Value::Null; procs] },
        bound,
        program: Arc::new(program),
    }
}

// ---------------------------------------------------------------------------
// consensus from registers

const PROPOSAL: &str = "proposal";

struct EvConsensus {
    n: usize,
}

impl Program for EvConsensus {
    fn begin(&self, _proc: usize, inv: &Invocation) -> Result<Value, RuntimeError> {
        Ok(Value::list([Value::Int(0), inv.args[0].clone()]))
    }

    fn step(
        &self,
        proc: usize,
        _inv: &Invocation,
        persistent: &mut Value,
        local: &Value,
        last: Option<&Value>,
    ) -> Result<(BaseCommand, Value), RuntimeError> {
        let v = fields(local).get(1).cloned().unwrap_or_default();
        let next = |pc: i64| Value::list([Value::Int(pc), v.clone()]);
        match pc(local) {
            // own slot is single-writer: the emptiness guard only needs to
            // remember whether this process has written before
            0 if persistent.is_null() => {
                *persistent = Value::Bool(true);
                Ok((BaseCommand::Write(ObjRef::cell(PROPOSAL, proc), v.clone()), next(1)))
            }
            0 | 1 => Ok((BaseCommand::Read(ObjRef::cell(PROPOSAL, 0)), next(2))),
            pc if pc >= 2 => {
                let seen = last.cloned().unwrap_or_default();
                if !seen.is_null() {
                    return Ok((BaseCommand::Return(seen), local.clone()));
                }
                let k = (pc - 1) as usize;
                if k >= self.n {
                    return Err(RuntimeError::Program("proposal scan found no value".into()));
                }
                Ok((BaseCommand::Read(ObjRef::cell(PROPOSAL, k)), next(pc + 1)))
            }
            _ => Err(bad_state("ev-consensus", local)),
        }
    }
}

/// `propose(v)`: write `v` to the caller's slot unless an earlier proposal
/// already filled it, then return the first non-null slot scanning from
/// slot 0. At most `n + 1` base accesses.
pub fn ev_consensus(n: usize) -> AlgorithmInstance {
    let n = n.max(1);
    let memory = (0..n).fold(Memory::new(), |m, k| m.with_cell(ObjRef::cell(PROPOSAL, k), BaseObject::AtomicRegister(Value::Null)));
    instance("ev-consensus".into(), n, TypeSpec::consensus(), memory, StepBound::Fixed(n + 1), EvConsensus { n })
}

// ---------------------------------------------------------------------------
// test-and-set from a register

const TAS_REG: ObjRef = ObjRef::scalar("r");

struct EvTas {
    skip_write: bool,
}

impl Program for EvTas {
    fn begin(&self, _proc: usize, _inv: &Invocation) -> Result<Value, RuntimeError> {
        Ok(Value::list([Value::Int(0)]))
    }

    fn step(
        &self,
        _proc: usize,
        _inv: &Invocation,
        _persistent: &mut Value,
        local: &Value,
        last: Option<&Value>,
    ) -> Result<(BaseCommand, Value), RuntimeError> {
        let at = |pc: i64| Value::list([Value::Int(pc)]);
        match pc(local) {
            0 => Ok((BaseCommand::Read(TAS_REG), at(1))),
            1 if last == Some(&Value::Int(0)) => {
                if self.skip_write {
                    Ok((BaseCommand::Return(Value::Bool(true)), at(3)))
                } else {
                    Ok((BaseCommand::Write(TAS_REG, Value::Int(1)), at(2)))
                }
            }
            1 => Ok((BaseCommand::Return(Value::Bool(false)), at(3))),
            2 => Ok((BaseCommand::Return(Value::Bool(true)), at(3))),
            _ => Err(bad_state("ev-tas", local)),
        }
    }
}

/// `tas()`: read `r`; if 0, write 1 and return true, else return false.
/// At most 2 base accesses.
pub fn ev_tas(n: usize) -> AlgorithmInstance {
    ev_tas_with(n, false)
}

/// [`ev_tas`] without the write, used to check that the test harness
/// notices a broken implementation.
pub fn ev_tas_skip_write(n: usize) -> AlgorithmInstance {
    let mut alg = ev_tas_with(n, true);
    alg.name = "ev-tas-skip-write".into();
    alg
}

fn ev_tas_with(n: usize, skip_write: bool) -> AlgorithmInstance {
    let memory = Memory::new().with(TAS_REG.name, BaseObject::AtomicRegister(Value::Int(0)));
    instance("ev-tas".into(), n.max(1), TypeSpec::tas(), memory, StepBound::Fixed(2), EvTas { skip_write })
}

// ---------------------------------------------------------------------------
// two-process fetch-and-cons from fetch-and-add

const FAA_OBJ: ObjRef = ObjRef::scalar("F");
const SEQ: [&str; 2] = ["seq0", "seq1"];
const IDX: [&str; 2] = ["idx0", "idx1"];

/// Builds the FAC response for a process whose fetch-and-add returned `ind`.
///
/// Slots `0..ind` are filled with the caller's own values at their known
/// indices, then with the other process's values whose index snapshot is
/// below `ind`, and finally any empty slots in ascending order with the
/// other process's values that had no index yet, in array order. The result
/// is newest-first (slot `ind - 1` first).
///
/// `other_index[i]` and `other_sequence[i]` describe array position `i` of
/// the other process; the index snapshot may be shorter than the sequence
/// snapshot.
pub fn reorder_list(own: &[(Value, usize)], other_index: &[i64], other_sequence: &[Value], ind: usize) -> Result<Vec<Value>, RuntimeError> {
    let mut slots: Vec<Option<Value>> = vec![None; ind];
    for (v, j) in own {
        if *j < ind {
            slots[*j] = Some(v.clone());
        }
    }
    for (pos, &j) in other_index.iter().enumerate() {
        if j >= 0 && (j as usize) < ind {
            let v = other_sequence.get(pos).filter(|v| !v.is_null());
            let Some(v) = v else { return Err(RuntimeError::IncompleteView { slot: j as usize }) };
            slots[j as usize] = Some(v.clone());
        }
    }
    let mut unindexed = other_sequence.iter().skip(other_index.len()).take_while(|v| !v.is_null());
    for slot in slots.iter_mut().filter(|s| s.is_none()) {
        *slot = unindexed.next().cloned();
        if slot.is_none() {
            break;
        }
    }
    let mut out = Vec::with_capacity(ind);
    for (slot, v) in slots.into_iter().enumerate().rev() {
        out.push(v.ok_or(RuntimeError::IncompleteView { slot })?);
    }
    Ok(out)
}

struct TwoFac;

/// Persistent state: `[counter, [[v, ind], ...]]`.
fn two_fac_persistent(p: &Value) -> (usize, Vec<(Value, usize)>) {
    let f = fields(p);
    let counter = f.first().and_then(Value::as_int).unwrap_or(0) as usize;
    let own = f
        .get(1)
        .and_then(Value::as_list)
        .unwrap_or(&[])
        .iter()
        .filter_map(|pair| match pair.as_list() {
            Some([v, Value::Int(j)]) => Some((v.clone(), *j as usize)),
            _ => None,
        })
        .collect();
    (counter, own)
}

/// Local state: `[pc, v, ind, q, index_snapshot, sequence_snapshot]`.
struct FacLocal {
    pc: i64,
    v: Value,
    ind: i64,
    q: usize,
    idx: Vec<i64>,
    seq: Vec<Value>,
}

impl FacLocal {
    fn decode(local: &Value) -> Result<FacLocal, RuntimeError> {
        match fields(local) {
            [Value::Int(pc), v, Value::Int(ind), Value::Int(q), Value::List(idx), Value::List(seq)] => Ok(FacLocal {
                pc: *pc,
                v: v.clone(),
                ind: *ind,
                q: *q as usize,
                idx: idx.iter().filter_map(Value::as_int).collect(),
                seq: seq.clone(),
            }),
            _ => Err(bad_state("2fac", local)),
        }
    }

    fn encode(&self) -> Value {
        Value::list([
            Value::Int(self.pc),
            self.v.clone(),
            Value::Int(self.ind),
            Value::Int(self.q as i64),
            Value::list(self.idx.iter().map(|&j| Value::Int(j))),
            Value::List(self.seq.clone()),
        ])
    }
}

impl TwoFac {
    fn finish(&self, st: &FacLocal, persistent: &mut Value) -> Result<(BaseCommand, Value), RuntimeError> {
        let (counter, mut own) = two_fac_persistent(persistent);
        let ind = st.ind as usize;
        let list = reorder_list(&own, &st.idx, &st.seq, ind)?;
        own.push((st.v.clone(), ind));
        *persistent = Value::list([
            Value::Int(counter as i64 + 1),
            Value::list(own.into_iter().map(|(v, j)| Value::list([v, Value::Int(j as i64)]))),
        ]);
        Ok((BaseCommand::Return(Value::List(list)), Value::list([Value::Int(9)])))
    }

    /// Reads the other process's sequence array at positions `0..ind - counter`.
    fn read_sequence(&self, mut st: FacLocal, proc: usize, persistent: &mut Value) -> Result<(BaseCommand, Value), RuntimeError> {
        let (counter, _) = two_fac_persistent(persistent);
        let need = (st.ind as usize).saturating_sub(counter);
        if st.seq.len() >= need || st.seq.last().is_some_and(Value::is_null) {
            return self.finish(&st, persistent);
        }
        st.pc = 5;
        st.q = st.seq.len();
        let at = ObjRef::cell(SEQ[1 - proc], st.q);
        Ok((BaseCommand::Read(at), st.encode()))
    }
}

impl Program for TwoFac {
    fn begin(&self, _proc: usize, inv: &Invocation) -> Result<Value, RuntimeError> {
        Ok(FacLocal { pc: 0, v: inv.args[0].clone(), ind: -1, q: 0, idx: vec![], seq: vec![] }.encode())
    }

    fn step(
        &self,
        proc: usize,
        _inv: &Invocation,
        persistent: &mut Value,
        local: &Value,
        last: Option<&Value>,
    ) -> Result<(BaseCommand, Value), RuntimeError> {
        if proc > 1 {
            return Err(RuntimeError::Program("2fac runs on processes 0 and 1 only".into()));
        }
        let other = 1 - proc;
        let (counter, _) = two_fac_persistent(persistent);
        let mut st = FacLocal::decode(local)?;
        match st.pc {
            0 => {
                st.pc = 1;
                Ok((BaseCommand::Write(ObjRef::cell(SEQ[proc], counter), st.v.clone()), st.encode()))
            }
            1 => {
                st.pc = 2;
                Ok((BaseCommand::Faa(FAA_OBJ), st.encode()))
            }
            2 => {
                st.ind = last.and_then(Value::as_int).ok_or_else(|| bad_state("2fac faa", local))?;
                st.pc = 3;
                Ok((BaseCommand::Write(ObjRef::cell(IDX[proc], counter), Value::Int(st.ind)), st.encode()))
            }
            3 => {
                // at most ind - counter of the other's values can sit below ind
                let need = (st.ind as usize).saturating_sub(counter);
                if need == 0 {
                    return self.finish(&st, persistent);
                }
                st.pc = 4;
                st.q = 0;
                Ok((BaseCommand::Read(ObjRef::cell(IDX[other], 0)), st.encode()))
            }
            4 => {
                let need = (st.ind as usize).saturating_sub(counter);
                match last {
                    Some(Value::Int(j)) => {
                        st.idx.push(*j);
                        if *j < st.ind && st.idx.len() < need {
                            st.q = st.idx.len();
                            return Ok((BaseCommand::Read(ObjRef::cell(IDX[other], st.q)), st.encode()));
                        }
                        self.read_sequence(st, proc, persistent)
                    }
                    _ => self.read_sequence(st, proc, persistent),
                }
            }
            5 => {
                st.seq.push(last.cloned().unwrap_or_default());
                self.read_sequence(st, proc, persistent)
            }
            _ => Err(bad_state("2fac", local)),
        }
    }
}

/// Two-process fetch-and-cons. Each `fac(v)` writes `v` to its own sequence
/// array, takes a ticket from the shared fetch-and-add, publishes the ticket
/// in its own index array, snapshots the other process's index then
/// sequence arrays, and answers with [`reorder_list`]. Base accesses are
/// bounded by `3 + 2 * ticket`, declared as `3 + 2 * total_ops`.
pub fn two_fac() -> AlgorithmInstance {
    let memory = Memory::new()
        .with(FAA_OBJ.name, BaseObject::AtomicFaa(0))
        .with_register_array(SEQ[0])
        .with_register_array(SEQ[1])
        .with_register_array(IDX[0])
        .with_register_array(IDX[1]);
    let mut alg = instance("2fac".into(), 2, TypeSpec::fac(), memory, StepBound::Linear { base: 3, per_op: 2 }, TwoFac);
    alg.initial.persistent = vec![Value::list([Value::Int(0), Value::List(vec![])]); 2];
    alg
}

// ---------------------------------------------------------------------------
// universal construction and direct FAC access

pub const FAC_OBJ: ObjRef = ObjRef::scalar("L");

/// Which fetch-and-cons base object to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FacBase {
    Atomic,
    /// [`ChaosFac`] that merges at its k-th access.
    Chaos(u64),
}

impl FacBase {
    pub fn parse(s: &str) -> Result<FacBase, String> {
        match s {
            "atomic-fac" => Ok(FacBase::Atomic),
            _ => s
                .strip_prefix("chaos-fac:")
                .and_then(|k| k.parse().ok())
                .filter(|&k: &u64| k >= 1)
                .map(FacBase::Chaos)
                .ok_or_else(|| format!("unknown base `{s}` (expected atomic-fac or chaos-fac:<k>)")),
        }
    }

    fn object(self) -> BaseObject {
        match self {
            FacBase::Atomic => BaseObject::AtomicFac(Vec::new()),
            FacBase::Chaos(k) => BaseObject::ChaosFac(ChaosFac::new(k)),
        }
    }
}

impl std::fmt::Display for FacBase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FacBase::Atomic => f.write_str("atomic-fac"),
            FacBase::Chaos(k) => write!(f, "chaos-fac:{k}"),
        }
    }
}

struct Universal {
    spec: TypeSpec,
}

fn log_entry(inv: &Invocation) -> Value {
    Value::list([Value::sym(inv.op.clone()), Value::List(inv.args.clone())])
}

fn log_invocation(entry: &Value) -> Result<Invocation, RuntimeError> {
    match entry.as_list() {
        Some([Value::Sym(op), Value::List(args)]) => Ok(Invocation::new(op.clone(), args.clone())),
        _ => Err(RuntimeError::Program(format!("malformed log entry {entry}"))),
    }
}

impl Program for Universal {
    fn begin(&self, _proc: usize, inv: &Invocation) -> Result<Value, RuntimeError> {
        if !self.spec.declares(inv) {
            self.spec.step(self.spec.initial_state(), inv)?;
        }
        Ok(Value::list([Value::Int(0)]))
    }

    fn step(
        &self,
        _proc: usize,
        inv: &Invocation,
        _persistent: &mut Value,
        local: &Value,
        last: Option<&Value>,
    ) -> Result<(BaseCommand, Value), RuntimeError> {
        match pc(local) {
            0 => Ok((BaseCommand::Fac(FAC_OBJ, log_entry(inv)), Value::list([Value::Int(1)]))),
            1 => {
                let log = last.and_then(Value::as_list).ok_or_else(|| bad_state("universal", local))?;
                let invs = log.iter().rev().map(log_invocation).collect::<Result<Vec<_>, _>>()?;
                let (_, state) = self.spec.replay(&invs)?;
                let (ret, _) = self.spec.step(&state, inv)?;
                Ok((BaseCommand::Return(ret), Value::list([Value::Int(2)])))
            }
            _ => Err(bad_state("universal", local)),
        }
    }
}

/// Any type from one FAC object: append `(op, args)` to the shared log,
/// replay the returned log oldest-first on a fresh local copy, then apply
/// the operation itself. One base access per operation.
pub fn universal(spec: TypeSpec, base: FacBase, n: usize) -> AlgorithmInstance {
    let memory = Memory::new().with(FAC_OBJ.name, base.object());
    let name = format!("universal:{}", spec.name());
    instance(name, n.max(1), spec.clone(), memory, StepBound::Fixed(1), Universal { spec })
}

struct DirectFac;

impl Program for DirectFac {
    fn begin(&self, _proc: usize, _inv: &Invocation) -> Result<Value, RuntimeError> {
        Ok(Value::list([Value::Int(0)]))
    }

    fn step(
        &self,
        _proc: usize,
        inv: &Invocation,
        _persistent: &mut Value,
        local: &Value,
        last: Option<&Value>,
    ) -> Result<(BaseCommand, Value), RuntimeError> {
        match (pc(local), last) {
            (0, _) => Ok((BaseCommand::Fac(FAC_OBJ, inv.args[0].clone()), Value::list([Value::Int(1)]))),
            (1, Some(list)) => Ok((BaseCommand::Return(list.clone()), Value::list([Value::Int(2)]))),
            _ => Err(bad_state("direct-fac", local)),
        }
    }
}

/// Each `fac(v)` is a single access to the base FAC object.
pub fn direct_fac(base: FacBase, n: usize) -> AlgorithmInstance {
    let memory = Memory::new().with(FAC_OBJ.name, base.object());
    instance("direct-fac".into(), n.max(1), TypeSpec::fac(), memory, StepBound::Fixed(1), DirectFac)
}

// ---------------------------------------------------------------------------

/// `ops` invocations per process for the algorithm's type. Arguments are
/// distinct integers `p * ops + j + 1`; registers alternate write and read.
pub fn default_workload(alg: &AlgorithmInstance, ops: usize) -> Workload {
    let spec = alg.spec.name().to_string();
    Workload::new(
        (0..alg.procs)
            .map(|p| {
                (0..ops)
                    .map(|j| {
                        let v = Value::Int((p * ops + j + 1) as i64);
                        match spec.as_str() {
                            "consensus" => Invocation::unary("propose", v),
                            "fac" => Invocation::unary("fac", v),
                            "register" if j % 2 == 0 => Invocation::unary("write", v),
                            "register" => Invocation::nullary("read"),
                            "tas" => Invocation::nullary("tas"),
                            "faa" => Invocation::nullary("faa"),
                            _ => {
                                let d = &alg.spec.ops()[j % alg.spec.ops().len()];
                                Invocation::new(d.name.clone(), vec![v; d.arity])
                            }
                        }
                    })
                    .collect()
            })
            .collect(),
    )
}

/// Resolves a command-line algorithm name: `ev-consensus`, `ev-tas`,
/// `2fac`, `direct-fac` or `universal:<spec>`.
pub fn by_name(name: &str, procs: usize, base: Option<FacBase>) -> Result<AlgorithmInstance, String> {
    if procs == 0 {
        return Err("need at least one process".into());
    }
    let base_only_for_fac = || match base {
        Some(_) => Err(format!("--base does not apply to `{name}`")),
        None => Ok(()),
    };
    match name {
        "ev-consensus" => base_only_for_fac().map(|_| ev_consensus(procs)),
        "ev-tas" => base_only_for_fac().map(|_| ev_tas(procs)),
        "2fac" => {
            base_only_for_fac()?;
            if procs != 2 {
                return Err(format!("2fac requires exactly 2 processes, got {procs}"));
            }
            Ok(two_fac())
        }
        "direct-fac" => Ok(direct_fac(base.unwrap_or(FacBase::Atomic), procs)),
        _ => {
            let spec_name = name.strip_prefix("universal:").ok_or_else(|| format!("unknown algorithm `{name}`"))?;
            let spec = TypeSpec::builtin(spec_name).map_err(|e| e.to_string())?;
            Ok(universal(spec, base.unwrap_or(FacBase::Atomic), procs))
        }
    }
}
