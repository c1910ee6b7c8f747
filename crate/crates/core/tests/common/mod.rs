//! Brute-force oracles, independent of the checker's search.
#![allow(dead_code)]

use evlin::{EventKind, History, Invocation, TypeSpec, Value};

#[derive(Clone, Debug)]
pub struct Op {
    pub proc: usize,
    pub inv: Invocation,
    pub inv_at: usize,
    pub res: Option<(usize, Value)>,
}

/// Pairs invocations with responses without going through the library.
pub fn ops_of(h: &History) -> Vec<Op> {
    let mut ops: Vec<Op> = Vec::new();
    for (i, e) in h.events().iter().enumerate() {
        match e.kind {
            EventKind::Inv => ops.push(Op { proc: e.proc, inv: Invocation::new(e.op.clone(), e.payload.clone()), inv_at: i, res: None }),
            EventKind::Res => {
                let op = ops.iter_mut().rev().find(|o| o.proc == e.proc).expect("response without invocation");
                assert!(op.res.is_none(), "double response");
                op.res = Some((i, e.payload[0].clone()));
            }
        }
    }
    ops
}

fn permutations(items: &[usize], f: &mut dyn FnMut(&[usize]) -> bool) -> bool {
    fn go(rest: &mut Vec<usize>, acc: &mut Vec<usize>, f: &mut dyn FnMut(&[usize]) -> bool) -> bool {
        if rest.is_empty() {
            return f(acc);
        }
        for i in 0..rest.len() {
            let x = rest.remove(i);
            acc.push(x);
            if go(rest, acc, f) {
                return true;
            }
            acc.pop();
            rest.insert(i, x);
        }
        false
    }
    go(&mut items.to_vec(), &mut Vec::new(), f)
}

/// Tries every subset of pending operations and every ordering.
pub fn naive_t_linearizable(h: &History, t: usize, spec: &TypeSpec) -> bool {
    let ops = ops_of(h);
    let completed: Vec<usize> = (0..ops.len()).filter(|&i| ops[i].res.is_some()).collect();
    let pending: Vec<usize> = (0..ops.len()).filter(|&i| ops[i].res.is_none()).collect();
    for mask in 0..(1u32 << pending.len()) {
        let mut chosen = completed.clone();
        for (b, &i) in pending.iter().enumerate() {
            if mask & (1 << b) != 0 {
                chosen.push(i);
            }
        }
        let found = permutations(&chosen, &mut |order| {
            let mut state = spec.initial_state().clone();
            for &i in order {
                let (ret, next) = spec.step(&state, &ops[i].inv).unwrap();
                if let Some((r, want)) = &ops[i].res {
                    if *r >= t && *want != ret {
                        return false;
                    }
                }
                state = next;
            }
            for (a, &i) in order.iter().enumerate() {
                for &j in &order[a + 1..] {
                    // j placed after i: forbidden if j's response precedes i's invocation inside the suffix
                    if let Some((rj, _)) = ops[j].res {
                        if rj >= t && ops[i].inv_at >= t && rj < ops[i].inv_at {
                            return false;
                        }
                    }
                }
            }
            true
        });
        if found {
            return true;
        }
    }
    false
}

pub fn naive_minimal_t(h: &History, spec: &TypeSpec) -> usize {
    (0..=h.len()).find(|&t| naive_t_linearizable(h, t, spec)).expect("t = |H| always succeeds")
}

/// Every completed operation has an explanation: some subset of earlier
/// invoked operations containing its own process's earlier ones, in some
/// order, followed by the operation with its recorded response.
pub fn naive_weakly_consistent(h: &History, spec: &TypeSpec) -> bool {
    let ops = ops_of(h);
    ops.iter().enumerate().all(|(target, me)| {
        let Some((res_at, want)) = &me.res else { return true };
        let cands: Vec<usize> = (0..ops.len()).filter(|&i| i != target && ops[i].inv_at < *res_at).collect();
        (0..(1u32 << cands.len())).any(|mask| {
            let chosen: Vec<usize> = cands.iter().enumerate().filter(|(b, _)| mask & (1 << b) != 0).map(|(_, &i)| i).collect();
            let has_own = (0..ops.len()).filter(|&i| ops[i].proc == me.proc && ops[i].inv_at < me.inv_at).all(|i| chosen.contains(&i));
            has_own
                && permutations(&chosen, &mut |order| {
                    let mut state = spec.initial_state().clone();
                    for &i in order {
                        state = spec.step(&state, &ops[i].inv).unwrap().1;
                    }
                    spec.step(&state, &me.inv).unwrap().0 == *want
                })
        })
    })
}

/// Hand-built histories with their expected classical linearizability.
pub fn corpus() -> Vec<(&'static str, TypeSpec, &'static str, bool)> {
    vec![
        ("tas seq win/lose", TypeSpec::tas(), "inv 0 O tas\nres 0 O tas T\ninv 1 O tas\nres 1 O tas F\n", true),
        ("tas first loses", TypeSpec::tas(), "inv 0 O tas\nres 0 O tas F\n", false),
        ("tas double true", TypeSpec::tas(), "inv 0 O tas\ninv 1 O tas\nres 0 O tas T\nres 1 O tas T\n", false),
        ("tas overlap p1 wins", TypeSpec::tas(), "inv 0 O tas\ninv 1 O tas\nres 1 O tas T\nres 0 O tas F\n", true),
        ("tas seq double true", TypeSpec::tas(), "inv 0 O tas\nres 0 O tas T\ninv 1 O tas\nres 1 O tas T\n", false),
        ("tas overlap loser first", TypeSpec::tas(), "inv 0 O tas\ninv 1 O tas\nres 0 O tas F\nres 1 O tas T\n", true),
        ("tas loser before winner", TypeSpec::tas(), "inv 0 O tas\nres 0 O tas F\ninv 1 O tas\nres 1 O tas T\n", false),
        ("tas pending winner", TypeSpec::tas(), "inv 0 O tas\ninv 1 O tas\nres 1 O tas F\n", true),
        ("reg write then read", TypeSpec::register(), "inv 0 O write 1\nres 0 O write _\ninv 1 O read\nres 1 O read 1\n", true),
        ("reg stale read", TypeSpec::register(), "inv 0 O write 1\nres 0 O write _\ninv 1 O read\nres 1 O read _\n", false),
        ("reg concurrent read old", TypeSpec::register(), "inv 0 O write 1\ninv 1 O read\nres 1 O read _\nres 0 O write _\n", true),
        ("reg pending write seen", TypeSpec::register(), "inv 0 O write 1\ninv 1 O read\nres 1 O read 1\n", true),
        ("reg phantom value", TypeSpec::register(), "inv 1 O read\nres 1 O read 2\n", false),
        (
            "reg overwritten read",
            TypeSpec::register(),
            "inv 0 O write 1\nres 0 O write _\ninv 0 O write 2\nres 0 O write _\ninv 1 O read\nres 1 O read 1\n",
            false,
        ),
        (
            "reg concurrent writes",
            TypeSpec::register(),
            "inv 0 O write 1\ninv 1 O write 2\nres 0 O write _\nres 1 O write _\ninv 2 O read\nres 2 O read 1\n",
            true,
        ),
        ("faa overlap", TypeSpec::faa(), "inv 0 O faa\ninv 1 O faa\nres 1 O faa 0\nres 0 O faa 1\n", true),
        ("faa duplicate", TypeSpec::faa(), "inv 0 O faa\nres 0 O faa 0\ninv 1 O faa\nres 1 O faa 0\n", false),
        ("faa skip", TypeSpec::faa(), "inv 0 O faa\nres 0 O faa 1\n", false),
        ("faa pending first", TypeSpec::faa(), "inv 0 O faa\ninv 1 O faa\nres 0 O faa 1\n", true),
        ("fac seq", TypeSpec::fac(), "inv 0 O fac 1\nres 0 O fac []\ninv 1 O fac 2\nres 1 O fac [1]\n", true),
        ("fac lost update", TypeSpec::fac(), "inv 0 O fac 1\nres 0 O fac []\ninv 1 O fac 2\nres 1 O fac []\n", false),
        ("fac overlap", TypeSpec::fac(), "inv 0 O fac 1\ninv 1 O fac 2\nres 1 O fac []\nres 0 O fac [2]\n", true),
        ("fac cycle", TypeSpec::fac(), "inv 0 O fac 1\ninv 1 O fac 2\nres 1 O fac [1]\nres 0 O fac [2]\n", false),
        ("consensus agree", TypeSpec::consensus(), "inv 0 O propose 1\ninv 1 O propose 2\nres 1 O propose 2\nres 0 O propose 2\n", true),
        ("consensus split", TypeSpec::consensus(), "inv 0 O propose 1\ninv 1 O propose 2\nres 1 O propose 2\nres 0 O propose 1\n", false),
        (
            "consensus seq split",
            TypeSpec::consensus(),
            "inv 0 O propose 1\nres 0 O propose 1\ninv 1 O propose 2\nres 1 O propose 2\n",
            false,
        ),
    ]
}
