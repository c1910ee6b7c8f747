//! Abstract data types as deterministic labelled transition systems.
//!
//! A [`TypeSpec`] maps `(state, invocation)` to `(return value, next state)`.
//! Five builtins are provided: `register`, `consensus`, `tas`, `faa` and
//! `fac`. Tests can define their own through [`TypeSpec::new`].

use std::fmt;
use std::sync::Arc;

use crate::error::SpecError;
use crate::history::{EventKind, History};
use crate::value::Value;

/// A high-level operation call: name plus arguments.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Invocation {
    pub op: String,
    pub args: Vec<Value>,
}

impl Invocation {
    pub fn new(op: impl Into<String>, args: Vec<Value>) -> Self {
        Invocation { op: op.into(), args }
    }

    /// A zero-argument invocation such as `tas()`.
    pub fn nullary(op: impl Into<String>) -> Self {
        Self::new(op, Vec::new())
    }

    pub fn unary(op: impl Into<String>, arg: Value) -> Self {
        Self::new(op, vec![arg])
    }
}

impl fmt::Display for Invocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.op)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

type Transition = dyn Fn(&Value, &Invocation) -> (Value, Value) + Send + Sync;

/// Declared operation of a type: name and arity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpDecl {
    pub name: String,
    pub arity: usize,
}

#[derive(Clone)]
pub struct TypeSpec {
    name: String,
    initial: Value,
    ops: Vec<OpDecl>,
    transition: Arc<Transition>,
}

impl fmt::Debug for TypeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TypeSpec").field("name", &self.name).field("initial", &self.initial).field("ops", &self.ops).finish_non_exhaustive()
    }
}

/// Names accepted by [`TypeSpec::builtin`].
pub const BUILTIN_NAMES: [&str; 5] = ["register", "consensus", "tas", "faa", "fac"];

impl TypeSpec {
    /// Defines a custom type. `transition` is only ever called with
    /// invocations that match one of `ops`.
    pub fn new<F>(name: impl Into<String>, initial: Value, ops: &[(&str, usize)], transition: F) -> Self
    where
        F: Fn(&Value, &Invocation) -> (Value, Value) + Send + Sync + 'static,
    {
        TypeSpec {
            name: name.into(),
            initial,
            ops: ops.iter().map(|(n, a)| OpDecl { name: n.to_string(), arity: *a }).collect(),
            transition: Arc::new(transition),
        }
    }

    pub fn builtin(name: &str) -> Result<TypeSpec, SpecError> {
        match name {
            "register" => Ok(Self::register()),
            "consensus" => Ok(Self::consensus()),
            "tas" => Ok(Self::tas()),
            "faa" => Ok(Self::faa()),
            "fac" => Ok(Self::fac()),
            other => Err(SpecError::UnknownSpec(other.to_string())),
        }
    }

    /// Read/write register, initially null. `write` returns null.
    pub fn register() -> TypeSpec {
        Self::new("register", Value::Null, &[("read", 0), ("write", 1)], |state, inv| match inv.op.as_str() {
            "read" => (state.clone(), state.clone()),
            _ => (Value::Null, inv.args[0].clone()),
        })
    }

    /// One-shot consensus: the first proposal decides, later proposals
    /// return the decision.
    pub fn consensus() -> TypeSpec {
        Self::new("consensus", Value::Null, &[("propose", 1)], |state, inv| {
            if state.is_null() {
                (inv.args[0].clone(), inv.args[0].clone())
            } else {
                (state.clone(), state.clone())
            }
        })
    }

    /// Test-and-set over an integer bit; the first `tas` wins.
    pub fn tas() -> TypeSpec {
        Self::new("tas", Value::Int(0), &[("tas", 0)], |state, _| {
            if *state == Value::Int(0) {
                (Value::Bool(true), Value::Int(1))
            } else {
                (Value::Bool(false), state.clone())
            }
        })
    }

    /// Fetch-and-add by exactly one.
    pub fn faa() -> TypeSpec {
        Self::new("faa", Value::Int(0), &[("faa", 0)], |state, _| {
            let n = state.as_int().unwrap_or(0);
            (Value::Int(n), Value::Int(n + 1))
        })
    }

    /// Fetch-and-cons. The list is stored newest-first; `fac(v)` returns the
    /// list before the call and prepends `v`.
    pub fn fac() -> TypeSpec {
        Self::new("fac", Value::List(Vec::new()), &[("fac", 1)], |state, inv| {
            let before = state.as_list().unwrap_or(&[]).to_vec();
            let mut after = Vec::with_capacity(before.len() + 1);
            after.push(inv.args[0].clone());
            after.extend(before.iter().cloned());
            (Value::List(before), Value::List(after))
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn initial_state(&self) -> &Value {
        &self.initial
    }

    pub fn ops(&self) -> &[OpDecl] {
        &self.ops
    }

    pub fn declares(&self, inv: &Invocation) -> bool {
        self.ops.iter().any(|d| d.name == inv.op && d.arity == inv.args.len())
    }

    /// Applies the transition once.
    pub fn step(&self, state: &Value, inv: &Invocation) -> Result<(Value, Value), SpecError> {
        if !self.declares(inv) {
            return Err(SpecError::UndeclaredOp { spec: self.name.clone(), op: inv.op.clone(), arity: inv.args.len() });
        }
        Ok((self.transition)(state, inv))
    }

    /// Folds [`step`](Self::step) over `invs` from the initial state.
    pub fn replay<'a, I>(&self, invs: I) -> Result<(Vec<Value>, Value), SpecError>
    where
        I: IntoIterator<Item = &'a Invocation>,
    {
        let mut state = self.initial.clone();
        let mut rets = Vec::new();
        for inv in invs {
            let (ret, next) = self.step(&state, inv)?;
            rets.push(ret);
            state = next;
        }
        Ok((rets, state))
    }

    /// True iff every response in the sequential history `seq` equals the
    /// return produced by replaying its invocation prefix. A trailing
    /// pending invocation is allowed and not replayed.
    pub fn is_legal(&self, seq: &History) -> Result<bool, SpecError> {
        if !seq.is_sequential() {
            return Err(SpecError::NotSequential);
        }
        let mut state = self.initial.clone();
        let events = seq.events();
        let mut i = 0;
        while i + 1 < events.len() {
            let inv_ev = &events[i];
            let res_ev = &events[i + 1];
            debug_assert_eq!(inv_ev.kind, EventKind::Inv);
            let inv = inv_ev.invocation();
            let (ret, next) = self.step(&state, &inv)?;
            if res_ev.payload.first() != Some(&ret) {
                return Ok(false);
            }
            state = next;
            i += 2;
        }
        if let Some(last) = events.get(i) {
            // lone trailing invocation: must still be a declared operation
            self.step(&state, &last.invocation())?;
        }
        Ok(true)
    }
}
