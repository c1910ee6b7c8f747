//! Decision procedures for weak consistency, t-linearizability and eventual
//! linearizability of finite histories.
//!
//! Both searches extend a candidate sequential order one operation at a
//! time, replaying the type specification incrementally, and memoize failed
//! `(placed set, spec state)` pairs. Candidates are tried in
//! `(proc, inv_index)` order, which makes the first witness found the
//! lexicographically smallest one.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::error::CheckError;
use crate::history::{Event, History, OperationRecord};
use crate::spec::{Invocation, TypeSpec};
use crate::value::Value;

/// Default bound on the number of operations in a checked history.
pub const DEFAULT_CAP: usize = 12;

/// One operation placed in a sequential witness.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinEntry {
    /// Position of the operation in `History::match_operations`.
    pub op_index: usize,
    pub proc: usize,
    pub inv_index: usize,
    pub invocation: Invocation,
    /// Return assigned in the witness; may differ from the recorded one
    /// when the recorded response lies outside the constrained suffix.
    pub ret: Value,
}

/// A legal sequential ordering of (some of) a history's operations.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Linearization {
    pub entries: Vec<LinEntry>,
}

impl Linearization {
    /// The witness as a sequential history on object `obj`.
    pub fn to_history(&self, obj: &str) -> History {
        let mut events = Vec::with_capacity(self.entries.len() * 2);
        for e in &self.entries {
            events.push(Event::inv(e.proc, obj, &e.invocation.op, e.invocation.args.clone()));
            events.push(Event::res(e.proc, obj, &e.invocation.op, e.ret.clone()));
        }
        History::new(events)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `lin <k> <proc> <op>(<args>) -> <value>` lines.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, e) in self.entries.iter().enumerate() {
            let _ = writeln!(out, "lin {k} {} {} -> {}", e.proc, e.invocation, e.ret);
        }
        out
    }
}

/// Outcome of the weak consistency check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeakConsistency {
    pub consistent: bool,
    /// Explanation history for every completed operation that has one,
    /// keyed by operation index.
    pub explanations: Vec<(usize, Linearization)>,
    /// First completed operation (in invocation order) with no explanation.
    pub counterexample: Option<OperationRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckReport {
    pub weakly_consistent: bool,
    pub explanations: Vec<(usize, Linearization)>,
    pub counterexample: Option<OperationRecord>,
    pub minimal_t: usize,
    pub witness: Linearization,
}

impl CheckReport {
    /// Weakly consistent and t-linearizable for some t. Always has a finite
    /// `minimal_t`, so this reduces to weak consistency.
    pub fn eventually_linearizable(&self) -> bool {
        self.weakly_consistent
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let yn = if self.weakly_consistent { "yes" } else { "no" };
        let _ = writeln!(out, "WEAK_CONSISTENT: {yn}");
        if let Some(op) = &self.counterexample {
            let _ = writeln!(
                out,
                "UNEXPLAINED: {} {} -> {} @{}",
                op.proc,
                op.invocation(),
                op.ret.as_ref().unwrap_or(&Value::Null),
                op.inv_index
            );
        }
        let _ = writeln!(out, "MIN_T: {}", self.minimal_t);
        out.push_str(&self.witness.render());
        out
    }
}

#[derive(Clone, Debug)]
pub struct Checker {
    spec: TypeSpec,
    cap: usize,
}

/// A history broken into operations, ready for searching.
struct Prepared {
    ops: Vec<OperationRecord>,
    invs: Vec<Invocation>,
    /// Operation indices sorted by `(proc, inv_index)`.
    order: Vec<usize>,
    len: usize,
}

type Memo = HashSet<(u64, Value)>;

impl Checker {
    pub fn new(spec: TypeSpec) -> Self {
        Checker { spec, cap: DEFAULT_CAP }
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap.min(63);
        self
    }

    pub fn spec(&self) -> &TypeSpec {
        &self.spec
    }

    fn prepare(&self, h: &History) -> Result<Prepared, CheckError> {
        let ops = h.match_operations().map_err(|_| CheckError::MalformedHistory)?;
        let objs = h.objects();
        if objs.len() > 1 {
            return Err(CheckError::MixedObjects(objs[0].to_string(), objs[1].to_string()));
        }
        if ops.len() > self.cap {
            return Err(CheckError::TooLarge { ops: ops.len(), cap: self.cap });
        }
        let invs: Vec<Invocation> = ops.iter().map(OperationRecord::invocation).collect();
        for inv in &invs {
            self.spec.step(self.spec.initial_state(), inv)?;
        }
        let mut order: Vec<usize> = (0..ops.len()).collect();
        order.sort_by_key(|&i| (ops[i].proc, ops[i].inv_index));
        Ok(Prepared { ops, invs, order, len: h.len() })
    }

    fn to_linearization(&self, p: &Prepared, path: &[(usize, Value)]) -> Linearization {
        Linearization {
            entries: path
                .iter()
                .map(|(i, ret)| LinEntry {
                    op_index: *i,
                    proc: p.ops[*i].proc,
                    inv_index: p.ops[*i].inv_index,
                    invocation: p.invs[*i].clone(),
                    ret: ret.clone(),
                })
                .collect(),
        }
    }

    /// Searches for a t-linearization of `h`. `Ok(None)` means none exists.
    pub fn check_t_linearizable(&self, h: &History, t: usize) -> Result<Option<Linearization>, CheckError> {
        let p = self.prepare(h)?;
        self.t_search(&p, t)
    }

    fn t_search(&self, p: &Prepared, t: usize) -> Result<Option<Linearization>, CheckError> {
        if t > p.len {
            return Err(CheckError::OutOfRange { t, len: p.len });
        }
        let n = p.ops.len();
        let mut required = 0u64;
        let mut fixed: Vec<Option<Value>> = vec![None; n];
        let mut preds = vec![0u64; n];
        for (i, op) in p.ops.iter().enumerate() {
            if let Some(r) = op.res_index {
                required |= 1 << i;
                if r >= t {
                    fixed[i] = op.ret.clone();
                }
            }
        }
        // real-time order, restricted to events inside the suffix
        for (j, o1) in p.ops.iter().enumerate() {
            let Some(r1) = o1.res_index else { continue };
            if r1 < t {
                continue;
            }
            for (i, o2) in p.ops.iter().enumerate() {
                if o2.inv_index >= t && r1 < o2.inv_index {
                    preds[i] |= 1 << j;
                }
            }
        }
        let search = TSearch { spec: &self.spec, p, required, fixed, preds };
        let mut memo = Memo::new();
        let mut path = Vec::new();
        let found = search.dfs(0, self.spec.initial_state().clone(), &mut path, &mut memo)?;
        Ok(found.then(|| self.to_linearization(p, &path)))
    }

    /// Smallest t for which `h` is t-linearizable, with its witness.
    pub fn minimal_t(&self, h: &History) -> Result<(usize, Linearization), CheckError> {
        let p = self.prepare(h)?;
        self.minimal_t_prepared(&p)
    }

    fn minimal_t_prepared(&self, p: &Prepared) -> Result<(usize, Linearization), CheckError> {
        for t in 0..=p.len {
            if let Some(lin) = self.t_search(p, t)? {
                return Ok((t, lin));
            }
        }
        // t = |H| leaves no constraint beyond legality, which replay satisfies
        unreachable!("every well-formed history is |H|-linearizable under a total spec")
    }

    pub fn check_weak_consistency(&self, h: &History) -> Result<WeakConsistency, CheckError> {
        let p = self.prepare(h)?;
        self.weak_prepared(&p)
    }

    fn weak_prepared(&self, p: &Prepared) -> Result<WeakConsistency, CheckError> {
        let mut explanations = Vec::new();
        let mut counterexample = None;
        for (target, op) in p.ops.iter().enumerate() {
            let Some(res) = op.res_index else { continue };
            match self.explain(p, target, res)? {
                Some(lin) => explanations.push((target, lin)),
                None => {
                    if counterexample.is_none() {
                        counterexample = Some(op.clone());
                    }
                }
            }
        }
        Ok(WeakConsistency { consistent: counterexample.is_none(), explanations, counterexample })
    }

    fn explain(&self, p: &Prepared, target: usize, res: usize) -> Result<Option<Linearization>, CheckError> {
        let me = &p.ops[target];
        let mut candidates = 0u64;
        let mut required = 0u64;
        for (i, op) in p.ops.iter().enumerate() {
            if i == target || op.inv_index >= res {
                continue;
            }
            candidates |= 1 << i;
            if op.proc == me.proc && op.inv_index < me.inv_index {
                required |= 1 << i;
            }
        }
        let search = WeakSearch {
            spec: &self.spec,
            p,
            target,
            target_ret: me.ret.clone().expect("completed operation has a return"),
            candidates,
            required,
        };
        let mut memo = Memo::new();
        let mut path = Vec::new();
        if search.dfs(0, self.spec.initial_state().clone(), &mut path, &mut memo)? {
            path.push((target, search.target_ret.clone()));
            Ok(Some(self.to_linearization(p, &path)))
        } else {
            Ok(None)
        }
    }

    /// Weak consistency plus the minimal stabilization point.
    pub fn check_eventual(&self, h: &History) -> Result<CheckReport, CheckError> {
        let p = self.prepare(h)?;
        let weak = self.weak_prepared(&p)?;
        let (minimal_t, witness) = self.minimal_t_prepared(&p)?;
        Ok(CheckReport {
            weakly_consistent: weak.consistent,
            explanations: weak.explanations,
            counterexample: weak.counterexample,
            minimal_t,
            witness,
        })
    }
}

struct TSearch<'a> {
    spec: &'a TypeSpec,
    p: &'a Prepared,
    required: u64,
    fixed: Vec<Option<Value>>,
    preds: Vec<u64>,
}

impl TSearch<'_> {
    fn dfs(&self, placed: u64, state: Value, path: &mut Vec<(usize, Value)>, memo: &mut Memo) -> Result<bool, CheckError> {
        if placed & self.required == self.required {
            return Ok(true);
        }
        if memo.contains(&(placed, state.clone())) {
            return Ok(false);
        }
        for &i in &self.p.order {
            let bit = 1u64 << i;
            if placed & bit != 0 || self.preds[i] & !placed != 0 {
                continue;
            }
            let (ret, next) = self.spec.step(&state, &self.p.invs[i])?;
            if matches!(&self.fixed[i], Some(want) if *want != ret) {
                continue;
            }
            path.push((i, ret));
            if self.dfs(placed | bit, next, path, memo)? {
                return Ok(true);
            }
            path.pop();
        }
        memo.insert((placed, state));
        Ok(false)
    }
}

struct WeakSearch<'a> {
    spec: &'a TypeSpec,
    p: &'a Prepared,
    target: usize,
    target_ret: Value,
    candidates: u64,
    required: u64,
}

impl WeakSearch<'_> {
    fn dfs(&self, placed: u64, state: Value, path: &mut Vec<(usize, Value)>, memo: &mut Memo) -> Result<bool, CheckError> {
        if placed & self.required == self.required {
            let (ret, _) = self.spec.step(&state, &self.p.invs[self.target])?;
            if ret == self.target_ret {
                return Ok(true);
            }
        }
        if memo.contains(&(placed, state.clone())) {
            return Ok(false);
        }
        for &i in &self.p.order {
            let bit = 1u64 << i;
            if self.candidates & bit == 0 || placed & bit != 0 {
                continue;
            }
            let (ret, next) = self.spec.step(&state, &self.p.invs[i])?;
            path.push((i, ret));
            if self.dfs(placed | bit, next, path, memo)? {
                return Ok(true);
            }
            path.pop();
        }
        memo.insert((placed, state));
        Ok(false)
    }
}

/// Re-checks a claimed t-linearization against the definition directly:
/// legality, inclusion of completed operations, real-time order inside the
/// suffix, and preserved responses inside the suffix.
pub fn verify_t_linearization(h: &History, t: usize, spec: &TypeSpec, lin: &Linearization) -> bool {
    let Ok(ops) = h.match_operations() else { return false };
    let mut seen = vec![false; ops.len()];
    let mut position = vec![usize::MAX; ops.len()];
    for (k, e) in lin.entries.iter().enumerate() {
        let Some(op) = ops.get(e.op_index) else { return false };
        if seen[e.op_index] || op.inv_index != e.inv_index || op.invocation() != e.invocation {
            return false;
        }
        seen[e.op_index] = true;
        position[e.op_index] = k;
    }
    let obj = ops.first().map_or("O", |o| o.obj.as_str());
    if !matches!(spec.is_legal(&lin.to_history(obj)), Ok(true)) {
        return false;
    }
    for (i, op) in ops.iter().enumerate() {
        let Some(r) = op.res_index else { continue };
        if !seen[i] {
            return false;
        }
        if r >= t && op.ret.as_ref() != Some(&lin.entries[position[i]].ret) {
            return false;
        }
        for (j, o2) in ops.iter().enumerate() {
            if seen[j] && o2.inv_index >= t && r >= t && r < o2.inv_index && position[i] > position[j] {
                return false;
            }
        }
    }
    true
}

/// Re-checks an explanation history for operation `target`.
pub fn verify_explanation(h: &History, target: usize, spec: &TypeSpec, lin: &Linearization) -> bool {
    let Ok(ops) = h.match_operations() else { return false };
    let Some(me) = ops.get(target) else { return false };
    let (Some(res), Some(ret)) = (me.res_index, me.ret.as_ref()) else { return false };
    let Some(last) = lin.entries.last() else { return false };
    if last.op_index != target || &last.ret != ret {
        return false;
    }
    let mut seen = HashSet::new();
    for e in &lin.entries {
        let Some(op) = ops.get(e.op_index) else { return false };
        if !seen.insert(e.op_index) || op.inv_index >= res || op.invocation() != e.invocation {
            return false;
        }
    }
    let includes_own_prefix =
        ops.iter().enumerate().filter(|(_, o)| o.proc == me.proc && o.inv_index < me.inv_index).all(|(i, _)| seen.contains(&i));
    includes_own_prefix && matches!(spec.is_legal(&lin.to_history(&me.obj)), Ok(true))
}
