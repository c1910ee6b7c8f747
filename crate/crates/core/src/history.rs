//! Histories of invocation and response events.
//!
//! Events carry their position in the history they were recorded in. Derived
//! histories (projections, suffixes) keep the original positions so that
//! operations can be cross-referenced against the full history.

use std::collections::BTreeMap;

use crate::error::HistoryError;
use crate::spec::Invocation;
use crate::value::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    Inv,
    Res,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Event {
    pub kind: EventKind,
    pub proc: usize,
    pub obj: String,
    pub op: String,
    /// Arguments for an invocation, the single return value for a response.
    pub payload: Vec<Value>,
    pub index: usize,
}

impl Event {
    pub fn inv(proc: usize, obj: &str, op: &str, args: Vec<Value>) -> Event {
        Event { kind: EventKind::Inv, proc, obj: obj.to_string(), op: op.to_string(), payload: args, index: 0 }
    }

    pub fn res(proc: usize, obj: &str, op: &str, ret: Value) -> Event {
        Event { kind: EventKind::Res, proc, obj: obj.to_string(), op: op.to_string(), payload: vec![ret], index: 0 }
    }

    pub fn is_inv(&self) -> bool {
        self.kind == EventKind::Inv
    }

    pub fn invocation(&self) -> Invocation {
        Invocation::new(self.op.clone(), self.payload.clone())
    }

    fn pairs_with(&self, res: &Event) -> bool {
        self.kind == EventKind::Inv && res.kind == EventKind::Res && self.proc == res.proc && self.obj == res.obj && self.op == res.op
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct History {
    events: Vec<Event>,
}

/// One invocation and, if it completed, its matching response.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OperationRecord {
    pub proc: usize,
    pub obj: String,
    pub op: String,
    pub args: Vec<Value>,
    pub inv_index: usize,
    pub res_index: Option<usize>,
    pub ret: Option<Value>,
}

impl OperationRecord {
    pub fn is_complete(&self) -> bool {
        self.res_index.is_some()
    }

    pub fn invocation(&self) -> Invocation {
        Invocation::new(self.op.clone(), self.args.clone())
    }
}

impl History {
    /// Builds a history, numbering events consecutively from 0.
    pub fn new(mut events: Vec<Event>) -> History {
        for (i, e) in events.iter_mut().enumerate() {
            e.index = i;
        }
        History { events }
    }

    /// Keeps the `index` fields as given.
    pub fn from_indexed(events: Vec<Event>) -> History {
        History { events }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Appends an event at the next position.
    pub fn push(&mut self, mut event: Event) {
        event.index = self.events.last().map_or(0, |e| e.index + 1);
        self.events.push(event);
    }

    /// First `n` events.
    pub fn prefix(&self, n: usize) -> History {
        History { events: self.events[..n.min(self.events.len())].to_vec() }
    }

    pub fn starts_with(&self, other: &History) -> bool {
        self.events.starts_with(&other.events)
    }

    /// Process ids present, ascending.
    pub fn processes(&self) -> Vec<usize> {
        let mut ps: Vec<usize> = self.events.iter().map(|e| e.proc).collect();
        ps.sort_unstable();
        ps.dedup();
        ps
    }

    /// Sequential: starts with an invocation and every invocation except
    /// possibly the last event is immediately followed by its response.
    pub fn is_sequential(&self) -> bool {
        let mut i = 0;
        while i < self.events.len() {
            let inv = &self.events[i];
            if !inv.is_inv() {
                return false;
            }
            match self.events.get(i + 1) {
                None => return true,
                Some(res) if inv.pairs_with(res) && res.payload.len() == 1 => i += 2,
                Some(_) => return false,
            }
        }
        true
    }

    /// Every per-process projection is sequential.
    pub fn is_well_formed(&self) -> bool {
        let mut open: BTreeMap<usize, &Event> = BTreeMap::new();
        for e in &self.events {
            match e.kind {
                EventKind::Inv => {
                    if open.insert(e.proc, e).is_some() {
                        return false;
                    }
                }
                EventKind::Res => match open.remove(&e.proc) {
                    Some(inv) if inv.pairs_with(e) && e.payload.len() == 1 => {}
                    _ => return false,
                },
            }
        }
        true
    }

    pub fn project_process(&self, proc: usize) -> History {
        History { events: self.events.iter().filter(|e| e.proc == proc).cloned().collect() }
    }

    pub fn project_object(&self, obj: &str) -> History {
        History { events: self.events.iter().filter(|e| e.obj == obj).cloned().collect() }
    }

    /// One record per invocation, in invocation order. Each response is
    /// matched to the pending invocation of the same process.
    pub fn match_operations(&self) -> Result<Vec<OperationRecord>, HistoryError> {
        if !self.is_well_formed() {
            return Err(HistoryError::MalformedHistory);
        }
        let mut records: Vec<OperationRecord> = Vec::new();
        let mut open: BTreeMap<usize, usize> = BTreeMap::new();
        for e in &self.events {
            match e.kind {
                EventKind::Inv => {
                    open.insert(e.proc, records.len());
                    records.push(OperationRecord {
                        proc: e.proc,
                        obj: e.obj.clone(),
                        op: e.op.clone(),
                        args: e.payload.clone(),
                        inv_index: e.index,
                        res_index: None,
                        ret: None,
                    });
                }
                EventKind::Res => {
                    let k = open.remove(&e.proc).ok_or(HistoryError::MalformedHistory)?;
                    records[k].res_index = Some(e.index);
                    records[k].ret = e.payload.first().cloned();
                }
            }
        }
        Ok(records)
    }

    /// The events left after removing the first `t`.
    pub fn suffix_after(&self, t: usize) -> Result<History, HistoryError> {
        if t > self.events.len() {
            return Err(HistoryError::OutOfRange { t, len: self.events.len() });
        }
        Ok(History { events: self.events[t..].to_vec() })
    }

    /// Object names in order of first appearance.
    pub fn objects(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in &self.events {
            if !out.contains(&e.obj.as_str()) {
                out.push(&e.obj);
            }
        }
        out
    }
}
