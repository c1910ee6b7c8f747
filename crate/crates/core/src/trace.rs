//! Line-oriented trace codec.
//!
//! ```text
//! # comment
//! inv 0 O fac 3
//! res 0 O fac [2,1]
//! ```
//!
//! Values are decimal integers, `T`, `F`, `_` (null), bare identifiers
//! (symbols) or bracketed comma-separated lists without spaces.

use std::fmt::Write as _;

use crate::error::HistoryError;
use crate::history::{Event, EventKind, History};
use crate::value::Value;

pub fn format_trace(history: &History) -> String {
    let mut out = String::new();
    for e in history.events() {
        let kind = match e.kind {
            EventKind::Inv => "inv",
            EventKind::Res => "res",
        };
        let _ = write!(out, "{kind} {} {} {}", e.proc, e.obj, e.op);
        for v in &e.payload {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_trace(text: &str) -> Result<History, HistoryError> {
    let mut events = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let err = |reason: String| HistoryError::Parse { line: line_no, reason };
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let kind = match fields[0] {
            "inv" => EventKind::Inv,
            "res" => EventKind::Res,
            other => return Err(err(format!("expected `inv` or `res`, found `{other}`"))),
        };
        if fields.len() < 4 {
            return Err(err("expected process, object and operation".into()));
        }
        let proc: usize = fields[1].parse().map_err(|_| err(format!("bad process id `{}`", fields[1])))?;
        for name in &fields[2..4] {
            if !is_ident(name) {
                return Err(err(format!("bad identifier `{name}`")));
            }
        }
        let payload = fields[4..].iter().map(|f| parse_value(f).map_err(&err)).collect::<Result<Vec<_>, _>>()?;
        if kind == EventKind::Res && payload.len() != 1 {
            return Err(err(format!("response needs exactly one value, found {}", payload.len())));
        }
        events.push(Event { kind, proc, obj: fields[2].to_string(), op: fields[3].to_string(), payload, index: 0 });
    }
    Ok(History::new(events))
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_') && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parses one value token.
pub fn parse_value(token: &str) -> Result<Value, String> {
    let mut p = ValueParser { s: token.as_bytes(), pos: 0 };
    let v = p.value()?;
    if p.pos != p.s.len() {
        return Err(format!("trailing characters in value `{token}`"));
    }
    Ok(v)
}

struct ValueParser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl ValueParser<'_> {
    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn value(&mut self) -> Result<Value, String> {
        match self.peek() {
            Some(b'[') => {
                self.pos += 1;
                let mut items = Vec::new();
                if self.peek() == Some(b']') {
                    self.pos += 1;
                    return Ok(Value::List(items));
                }
                loop {
                    items.push(self.value()?);
                    match self.peek() {
                        Some(b',') => self.pos += 1,
                        Some(b']') => {
                            self.pos += 1;
                            return Ok(Value::List(items));
                        }
                        _ => return Err("unterminated list".into()),
                    }
                }
            }
            Some(c) if c == b'-' || c.is_ascii_digit() => {
                let start = self.pos;
                self.pos += 1;
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1;
                }
                let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
                text.parse().map(Value::Int).map_err(|_| format!("bad integer `{text}`"))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_') {
                    self.pos += 1;
                }
                let word = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
                Ok(match word {
                    "T" => Value::Bool(true),
                    "F" => Value::Bool(false),
                    "_" => Value::Null,
                    w => Value::Sym(w.to_string()),
                })
            }
            Some(c) => Err(format!("unexpected character `{}`", c as char)),
            None => Err("missing value".into()),
        }
    }
}
