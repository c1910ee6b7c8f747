//! Bounded analysis of the execution tree.
//!
//! Nodes of the tree are scheduler prefixes; children extend a node by one
//! enabled token. Enumeration is depth-first in token order (process id
//! ascending). Nodes with an identical configuration, history and tick count
//! are visited once.
//!
//! Stable-node results are bounded-horizon approximations: a node is
//! reported as a candidate when every extension up to the horizon stays
//! linearizable after its prefix, which cannot certify the unbounded
//! property.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::Arc;

use crate::checker::Checker;
use crate::error::{ExploreError, RuntimeError};
use crate::history::History;
use crate::runtime::{AlgorithmInstance, BaseCommand, Config, Execution, Memory, ProcState, Program, Token, Workload};
use crate::spec::Invocation;
use crate::trace::format_trace;
use crate::value::Value;

type StateKey = (Memory, Vec<ProcState>, History, usize);

fn key(ex: &Execution<'_>) -> StateKey {
    let (m, p, h) = ex.state_key();
    (m, p, h, ex.ticks())
}

/// Visits every node reachable within `depth` ticks of `root`. The callback
/// receives the node and whether it is a leaf (depth reached or nothing
/// enabled).
fn walk<'a, F>(root: &Execution<'a>, depth: usize, prune: bool, f: &mut F) -> Result<usize, ExploreError>
where
    F: FnMut(&Execution<'a>, bool) -> Result<(), ExploreError>,
{
    let mut seen: HashSet<StateKey> = HashSet::new();
    let mut visited = 0;
    let mut stack = vec![root.clone()];
    while let Some(ex) = stack.pop() {
        if prune && !seen.insert(key(&ex)) {
            continue;
        }
        visited += 1;
        let enabled = if ex.ticks() < depth { ex.enabled() } else { Vec::new() };
        f(&ex, enabled.is_empty())?;
        // reversed so the lowest token is explored first
        for t in enabled.into_iter().rev() {
            let mut child = ex.clone();
            child.apply(t)?;
            stack.push(child);
        }
    }
    Ok(visited)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EnumStats {
    pub nodes: usize,
    pub leaves: usize,
}

/// Calls `visit` with the history and schedule of every leaf within `depth`
/// ticks, with duplicate nodes pruned.
pub fn enumerate_runs<F>(alg: &AlgorithmInstance, workload: &Workload, depth: usize, mut visit: F) -> Result<EnumStats, ExploreError>
where
    F: FnMut(&History, &[Token]),
{
    let root = Execution::new(alg, workload);
    let mut leaves = 0;
    let nodes = walk(&root, depth, true, &mut |ex, leaf| {
        if leaf {
            leaves += 1;
            visit(ex.history(), ex.schedule());
        }
        Ok(())
    })?;
    Ok(EnumStats { nodes, leaves })
}

/// Number of maximal schedules of at most `depth` ticks, without pruning.
pub fn count_schedules(alg: &AlgorithmInstance, workload: &Workload, depth: usize) -> Result<usize, ExploreError> {
    let root = Execution::new(alg, workload);
    let mut leaves = 0;
    walk(&root, depth, false, &mut |_, leaf| {
        leaves += usize::from(leaf);
        Ok(())
    })?;
    Ok(leaves)
}

/// Every distinct history at any node within `depth` ticks, with the first
/// schedule (in enumeration order) that produced it. Prefix-closed.
pub fn distinct_histories(alg: &AlgorithmInstance, workload: &Workload, depth: usize) -> Result<Vec<(History, Vec<Token>)>, ExploreError> {
    distinct_histories_from(&Execution::new(alg, workload), depth)
}

fn distinct_histories_from(root: &Execution<'_>, depth: usize) -> Result<Vec<(History, Vec<Token>)>, ExploreError> {
    let mut seen: HashSet<History> = HashSet::new();
    let mut out = Vec::new();
    walk(root, depth, true, &mut |ex, _| {
        if seen.insert(ex.history().clone()) {
            out.push((ex.history().clone(), ex.schedule().to_vec()));
        }
        Ok(())
    })?;
    Ok(out)
}

/// Memoized minimal stabilization points.
pub struct Verdicts {
    checker: Checker,
    min_t: HashMap<History, usize>,
}

impl Verdicts {
    pub fn new(checker: Checker) -> Self {
        Verdicts { checker, min_t: HashMap::new() }
    }

    pub fn minimal_t(&mut self, h: &History) -> Result<usize, ExploreError> {
        if let Some(&t) = self.min_t.get(h) {
            return Ok(t);
        }
        let (t, _) = self.checker.minimal_t(h)?;
        self.min_t.insert(h.clone(), t);
        Ok(t)
    }

    /// t-linearizability is monotone in t, so this is `minimal_t <= t`.
    pub fn is_t_linearizable(&mut self, h: &History, t: usize) -> Result<bool, ExploreError> {
        Ok(self.minimal_t(h)? <= t)
    }

    pub fn checker(&self) -> &Checker {
        &self.checker
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    pub history: History,
    pub schedule: Vec<Token>,
    pub minimal_t: usize,
}

/// Shortest history (by event count, then enumeration order) that is not
/// linearizable, if any.
pub fn find_non_linearizable(alg: &AlgorithmInstance, workload: &Workload, depth: usize) -> Result<Option<Counterexample>, ExploreError> {
    let mut verdicts = Verdicts::new(Checker::new(alg.spec.clone()));
    let mut best: Option<Counterexample> = None;
    for (h, schedule) in distinct_histories(alg, workload, depth)? {
        if best.as_ref().is_some_and(|b| b.history.len() <= h.len()) {
            continue;
        }
        let t = verdicts.minimal_t(&h)?;
        if t > 0 {
            best = Some(Counterexample { history: h, schedule, minimal_t: t });
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StableCandidate {
    pub schedule: Vec<Token>,
    pub history: History,
    /// Total ticks from the root explored below this node.
    pub horizon: usize,
    pub extensions_checked: usize,
}

impl StableCandidate {
    /// `|l(C)|`: events on the path to the node.
    pub fn length(&self) -> usize {
        self.history.len()
    }
}

/// Checks whether the node reached by `schedule` is a stable candidate:
/// every node below it within `horizon` total ticks has a history that is
/// `|l(C)|`-linearizable.
pub fn check_stable(
    alg: &AlgorithmInstance,
    workload: &Workload,
    schedule: &[Token],
    horizon: usize,
    verdicts: &mut Verdicts,
) -> Result<Option<StableCandidate>, ExploreError> {
    let mut node = Execution::new(alg, workload);
    for &t in schedule {
        node.apply(t)?;
    }
    stable_at(&node, horizon, verdicts)
}

fn stable_at(node: &Execution<'_>, horizon: usize, verdicts: &mut Verdicts) -> Result<Option<StableCandidate>, ExploreError> {
    let len = node.history().len();
    let mut checked = 0;
    for (h, _) in distinct_histories_from(node, horizon)? {
        checked += 1;
        if !verdicts.is_t_linearizable(&h, len)? {
            return Ok(None);
        }
    }
    Ok(Some(StableCandidate { schedule: node.schedule().to_vec(), history: node.history().clone(), horizon, extensions_checked: checked }))
}

/// All stable candidates among nodes within `depth` ticks, judged up to
/// `horizon` ticks. `limit` caps the number of candidates returned.
pub fn find_stable_node(
    alg: &AlgorithmInstance,
    workload: &Workload,
    depth: usize,
    horizon: usize,
    limit: usize,
) -> Result<Vec<StableCandidate>, ExploreError> {
    if horizon < depth {
        return Err(ExploreError::Setup(format!("horizon {horizon} is below depth {depth}")));
    }
    let mut verdicts = Verdicts::new(Checker::new(alg.spec.clone()));
    let mut out = Vec::new();
    let root = Execution::new(alg, workload);
    walk(&root, depth, true, &mut |ex, _| {
        if out.len() < limit {
            if let Some(c) = stable_at(ex, horizon, &mut verdicts)? {
                out.push(c);
            }
        }
        Ok(())
    })?;
    Ok(out)
}

/// A prefix that is not t-linearizable with an enumerated extension that is.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub prefix: History,
    pub extension: History,
    pub extension_schedule: Vec<Token>,
}

/// For every enumerated history that is t-linearizable, checks that none of
/// its prefixes fails t-linearizability: once a prefix fails, every
/// enumerated extension must fail too. Meaningful for FAC-typed objects.
pub fn prefix_safety_scan(alg: &AlgorithmInstance, workload: &Workload, depth: usize, t: usize) -> Result<Vec<Violation>, ExploreError> {
    let mut verdicts = Verdicts::new(Checker::new(alg.spec.clone()));
    let mut out = Vec::new();
    for (h, schedule) in distinct_histories(alg, workload, depth)? {
        if !verdicts.is_t_linearizable(&h, t)? {
            continue;
        }
        for m in 0..h.len() {
            let prefix = h.prefix(m);
            if !verdicts.is_t_linearizable(&prefix, t)? {
                out.push(Violation { prefix, extension: h.clone(), extension_schedule: schedule.clone() });
                break;
            }
        }
    }
    Ok(out)
}

struct OffsetProgram {
    inner: Arc<dyn Program>,
    offset: Vec<Value>,
}

impl Program for OffsetProgram {
    fn begin(&self, proc: usize, inv: &Invocation) -> Result<Value, RuntimeError> {
        self.inner.begin(proc, inv)
    }

    fn step(
        &self,
        proc: usize,
        inv: &Invocation,
        persistent: &mut Value,
        local: &Value,
        last: Option<&Value>,
    ) -> Result<(BaseCommand, Value), RuntimeError> {
        match self.inner.step(proc, inv, persistent, local, last)? {
            (BaseCommand::Return(v), next) => Ok((BaseCommand::Return(strip_offset(&v, &self.offset)?), next)),
            other => Ok(other),
        }
    }
}

/// Removes the suffix `offset` from a newest-first list response.
pub fn strip_offset(response: &Value, offset: &[Value]) -> Result<Value, RuntimeError> {
    let not_prefix = || RuntimeError::NotAPrefix { response: response.to_string(), offset: Value::List(offset.to_vec()).to_string() };
    let list = response.as_list().ok_or_else(not_prefix)?;
    let keep = list.len().checked_sub(offset.len()).ok_or_else(not_prefix)?;
    if list[keep..] != *offset {
        return Err(not_prefix());
    }
    Ok(Value::List(list[..keep].to_vec()))
}

/// Restarts `alg` from `stable_config` and answers every FAC response with
/// the `l0` suffix stripped.
pub fn stable_offset_wrapper(alg: &AlgorithmInstance, stable_config: Config, l0: Vec<Value>) -> AlgorithmInstance {
    let mut wrapped = alg.clone();
    wrapped.name = format!("{}+offset", alg.name);
    wrapped.initial = stable_config;
    wrapped.program = Arc::new(OffsetProgram { inner: alg.program.clone(), offset: l0 });
    wrapped
}

/// Drives `alg` to a restart point for [`stable_offset_wrapper`].
///
/// Runs `schedule`, lets every process finish its current operation solo,
/// then lets `proc` perform solo `fac` probes (arguments from `probes`) until
/// one returns exactly the set of values inserted before it. Returns the
/// configuration after that probe and the full list content at that point
/// (the probe's value consed onto its response).
pub fn settle_for_offset(
    alg: &AlgorithmInstance,
    workload: &Workload,
    schedule: &[Token],
    proc: usize,
    probes: &[Value],
) -> Result<(Config, Vec<Value>), ExploreError> {
    if alg.spec.name() != "fac" {
        return Err(ExploreError::Setup(format!("{} does not implement fac", alg.name)));
    }
    let mut ex = Execution::new(alg, workload);
    for &t in schedule {
        ex.apply(t)?;
    }
    for p in 0..alg.procs {
        if ex.procs()[p].crashed {
            return Err(ExploreError::Setup(format!("process {p} crashed before the restart point")));
        }
        ex.finish_solo(p)?;
    }
    let mut inserted: Vec<Value> = ex.history().events().iter().filter(|e| e.is_inv()).flat_map(|e| e.payload.iter().cloned()).collect();
    let mut config = ex.config();
    for v in probes {
        let probe =
            Workload::new((0..alg.procs).map(|p| if p == proc { vec![Invocation::unary("fac", v.clone())] } else { vec![] }).collect());
        let mut solo = Execution::from_config(alg, &probe, &config);
        solo.apply(Token::Start(proc))?;
        solo.finish_solo(proc)?;
        let response = solo.history().events().last().map(|e| e.payload[0].clone()).unwrap_or_default();
        config = solo.config();
        let list = response.as_list().unwrap_or(&[]).to_vec();
        let mut got = list.clone();
        got.sort();
        let mut want = inserted.clone();
        want.sort();
        inserted.push(v.clone());
        if got == want {
            let mut l0 = vec![v.clone()];
            l0.extend(list);
            return Ok((config, l0));
        }
    }
    Err(ExploreError::Setup("no probe returned the full list".into()))
}

/// Text rendering of exploration results.
#[derive(Clone, Debug, Default)]
pub struct ExplorationReport {
    pub algorithm: String,
    pub depth: usize,
    pub nodes: usize,
    pub histories_checked: usize,
    pub counterexamples: Vec<Counterexample>,
    pub stable: Vec<StableCandidate>,
    pub violations: Vec<Violation>,
    pub horizon: Option<usize>,
}

impl ExplorationReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "ALGORITHM: {}", self.algorithm);
        let _ = writeln!(out, "DEPTH: {}", self.depth);
        if let Some(h) = self.horizon {
            let _ = writeln!(out, "HORIZON: {h} (bounded approximation)");
        }
        let _ = writeln!(out, "NODES: {}", self.nodes);
        let _ = writeln!(out, "HISTORIES_CHECKED: {}", self.histories_checked);
        let _ = writeln!(out, "COUNTEREXAMPLES: {}", self.counterexamples.len());
        for c in &self.counterexamples {
            let _ = writeln!(out, "# counterexample events={} min_t={}", c.history.len(), c.minimal_t);
            let _ = writeln!(out, "# schedule: {}", join_tokens(&c.schedule));
            out.push_str(&format_trace(&c.history));
        }
        if self.horizon.is_some() {
            let _ = writeln!(out, "STABLE_CANDIDATES: {}", self.stable.len());
            for s in &self.stable {
                let _ = writeln!(
                    out,
                    "# stable |l(C)|={} extensions={} schedule: {}",
                    s.length(),
                    s.extensions_checked,
                    join_tokens(&s.schedule)
                );
            }
        }
        let _ = writeln!(out, "VIOLATIONS: {}", self.violations.len());
        for v in &self.violations {
            let _ = writeln!(out, "# failing prefix of {} events", v.prefix.len());
            out.push_str(&format_trace(&v.extension));
        }
        out
    }
}

fn join_tokens(ts: &[Token]) -> String {
    ts.iter().map(Token::to_string).collect::<Vec<_>>().join(", ")
}
