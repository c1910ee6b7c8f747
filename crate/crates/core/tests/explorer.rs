use evlin::algorithms::{default_workload, direct_fac, ev_consensus, ev_tas, two_fac, universal, FacBase};
use evlin::explorer::{
    check_stable, count_schedules, distinct_histories, enumerate_runs, find_non_linearizable, find_stable_node, prefix_safety_scan,
    settle_for_offset, stable_offset_wrapper, ExplorationReport, Verdicts,
};
use evlin::runtime::Execution;
use evlin::{parse_trace, run, AlgorithmInstance, Checker, History, Schedule, Token, TypeSpec, Value, Workload};

use Token::{Start, Step};

/// Counts maximal token strings of at most `depth` tokens by brute force
/// over the alphabet `{start p, step p}`. A string is valid when every
/// `start` hits an idle process with work left and every `step` hits a
/// process with a pending operation; validity is judged from the recorded
/// history alone.
fn naive_count(alg: &AlgorithmInstance, w: &Workload, depth: usize) -> usize {
    let alphabet: Vec<Token> = (0..alg.procs).flat_map(|p| [Start(p), Step(p)]).collect();
    let valid = |s: &[Token]| -> bool {
        let mut started = vec![0usize; alg.procs];
        for (i, &t) in s.iter().enumerate() {
            let Ok(out) = run(alg, w, &Schedule::Tokens(s[..i].to_vec())) else { return false };
            let ops = out.history.match_operations().unwrap();
            match t {
                Start(p) => {
                    if ops.iter().any(|o| o.proc == p && !o.is_complete()) || started[p] >= w.per_proc[p].len() {
                        return false;
                    }
                    started[p] += 1;
                }
                Step(p) => {
                    if !ops.iter().any(|o| o.proc == p && !o.is_complete()) {
                        return false;
                    }
                }
                Token::Crash(_) => return false,
            }
        }
        true
    };
    fn go(prefix: &mut Vec<Token>, depth: usize, alphabet: &[Token], valid: &dyn Fn(&[Token]) -> bool) -> usize {
        if prefix.len() == depth {
            return 1;
        }
        let mut total = 0;
        let mut extended = false;
        for &t in alphabet {
            prefix.push(t);
            if valid(prefix) {
                extended = true;
                total += go(prefix, depth, alphabet, valid);
            }
            prefix.pop();
        }
        if extended {
            total
        } else {
            1
        }
    }
    go(&mut Vec::new(), depth, &alphabet, &valid)
}

#[test]
fn enumeration_matches_naive_count() {
    let algs = [ev_tas(2), ev_consensus(2), universal(TypeSpec::faa(), FacBase::Atomic, 2), two_fac()];
    for alg in &algs {
        let w = default_workload(alg, 1);
        for d in 0..=8 {
            assert_eq!(count_schedules(alg, &w, d).unwrap(), naive_count(alg, &w, d), "{} depth {d}", alg.name);
        }
    }
}

fn double_true() -> History {
    parse_trace("inv 0 O tas\ninv 1 O tas\nres 0 O tas T\nres 1 O tas T\n").unwrap()
}

#[test]
fn ev_tas_enumeration_contains_double_true() {
    let alg = ev_tas(2);
    let w = default_workload(&alg, 1);
    let mut found = false;
    let stats = enumerate_runs(&alg, &w, 8, |h, _| found |= *h == double_true()).unwrap();
    assert!(found);
    assert!(stats.leaves > 0 && stats.nodes >= stats.leaves);
}

/// Full scan: the reported counterexample is a shortest failing history,
/// and it replays to the same verdict.
fn assert_minimal(alg: &AlgorithmInstance, w: &Workload, depth: usize) -> History {
    let c = find_non_linearizable(alg, w, depth).unwrap().expect("counterexample");
    let checker = Checker::new(alg.spec.clone());
    for (h, _) in distinct_histories(alg, w, depth).unwrap() {
        if h.len() < c.history.len() {
            assert!(checker.check_t_linearizable(&h, 0).unwrap().is_some());
        }
    }
    let replay = run(alg, w, &Schedule::Tokens(c.schedule.clone())).unwrap();
    assert_eq!(replay.history, c.history);
    assert_eq!(checker.minimal_t(&c.history).unwrap().0, c.minimal_t);
    assert!(c.minimal_t > 0);
    c.history
}

#[test]
fn ev_tas_counterexample_is_double_true() {
    let alg = ev_tas(2);
    let h = assert_minimal(&alg, &default_workload(&alg, 1), 10);
    assert_eq!(h, double_true());
}

#[test]
fn ev_consensus_counterexample_is_split_decision() {
    let alg = ev_consensus(2);
    let h = assert_minimal(&alg, &default_workload(&alg, 1), 12);
    assert_eq!(h.len(), 4);
    let rets: Vec<Value> = h.match_operations().unwrap().into_iter().filter_map(|o| o.ret).collect();
    assert_eq!(rets.len(), 2);
    assert_ne!(rets[0], rets[1]);
}

#[test]
fn universal_atomic_has_no_counterexample() {
    let alg = universal(TypeSpec::faa(), FacBase::Atomic, 2);
    assert!(find_non_linearizable(&alg, &default_workload(&alg, 2), 16).unwrap().is_none());
}

#[test]
fn universal_root_is_stable() {
    let alg = universal(TypeSpec::faa(), FacBase::Atomic, 2);
    let w = default_workload(&alg, 2);
    for horizon in [6, 10, 14] {
        let mut v = Verdicts::new(Checker::new(alg.spec.clone()));
        let c = check_stable(&alg, &w, &[], horizon, &mut v).unwrap().expect("root is stable");
        assert_eq!(c.length(), 0);
        assert!(c.extensions_checked > 1);
    }
}

#[test]
fn double_read_window_is_not_stable() {
    let alg = ev_tas(2);
    let w = default_workload(&alg, 1);
    let mut v = Verdicts::new(Checker::new(alg.spec.clone()));
    let node = [Start(0), Step(0), Start(1), Step(1)];
    assert!(check_stable(&alg, &w, &node, 12, &mut v).unwrap().is_none());
}

#[test]
fn node_after_chaos_merge_is_stable() {
    let alg = direct_fac(FacBase::Chaos(3), 2);
    let w = default_workload(&alg, 3);
    // accesses 1 and 2 forked and returned, access 3 merges and returns
    let node = [Start(0), Step(0), Step(0), Start(1), Step(1), Step(1), Start(0), Step(0), Step(0)];
    let mut v = Verdicts::new(Checker::new(TypeSpec::fac()));
    let c = check_stable(&alg, &w, &node, 20, &mut v).unwrap().expect("post-merge node is stable");
    assert_eq!(c.length(), 6);
    // the root is not: forked views get fixed after it
    assert!(check_stable(&alg, &w, &[], 20, &mut v).unwrap().is_none());
}

#[test]
fn stable_search_reports_candidates() {
    let alg = direct_fac(FacBase::Chaos(3), 2);
    let w = default_workload(&alg, 2);
    let found = find_stable_node(&alg, &w, 6, 14, 5).unwrap();
    assert!(!found.is_empty());
    let mut v = Verdicts::new(Checker::new(TypeSpec::fac()));
    for c in &found {
        // certificates replay through the public API
        let again = check_stable(&alg, &w, &c.schedule, 14, &mut v).unwrap().unwrap();
        assert_eq!(again.history, c.history);
    }
}

#[test]
fn prefix_scans_find_nothing() {
    let alg = two_fac();
    assert!(prefix_safety_scan(&alg, &default_workload(&alg, 2), 16, 0).unwrap().is_empty());
    let alg = universal(TypeSpec::fac(), FacBase::Chaos(4), 2);
    assert!(prefix_safety_scan(&alg, &default_workload(&alg, 2), 14, 0).unwrap().is_empty());
    let alg = ev_tas(2);
    assert!(prefix_safety_scan(&alg, &default_workload(&alg, 1), 10, 10).unwrap().is_empty());
}

#[test]
fn empty_offset_is_identity() {
    let alg = direct_fac(FacBase::Atomic, 2);
    let w = default_workload(&alg, 2);
    let wrapped = stable_offset_wrapper(&alg, alg.initial.clone(), vec![]);
    let a: Vec<History> = distinct_histories(&alg, &w, 8).unwrap().into_iter().map(|x| x.0).collect();
    let b: Vec<History> = distinct_histories(&wrapped, &w, 8).unwrap().into_iter().map(|x| x.0).collect();
    assert_eq!(a, b);
}

#[test]
fn offset_wrapper_after_merge_is_linearizable() {
    let alg = direct_fac(FacBase::Chaos(3), 2);
    let w = default_workload(&alg, 2);
    let node = [Start(0), Step(0), Start(1), Step(1)];
    let probes: Vec<Value> = (100..110).map(Value::Int).collect();
    let (config, l0) = settle_for_offset(&alg, &w, &node, 0, &probes).unwrap();
    assert!(l0.len() >= 3);
    let fresh =
        Workload::new((0..2).map(|p| (0..2).map(|j| evlin::Invocation::unary("fac", Value::Int(200 + 10 * p + j))).collect()).collect());
    let wrapped = stable_offset_wrapper(&alg, config, l0);
    assert!(wrapped.name.ends_with("+offset"));
    let c = Checker::new(TypeSpec::fac());
    for (h, _) in distinct_histories(&wrapped, &fresh, 12).unwrap() {
        assert!(c.check_t_linearizable(&h, 0).unwrap().is_some(), "{h:?}");
    }
    // the wrapped algorithm starts where the settled run stopped
    let ex = Execution::from_config(&wrapped, &fresh, &wrapped.initial);
    assert!(ex.history().is_empty());
}

#[test]
fn report_lists_counterexamples() {
    let alg = ev_tas(2);
    let w = default_workload(&alg, 1);
    let c = find_non_linearizable(&alg, &w, 10).unwrap().unwrap();
    let report = ExplorationReport { algorithm: alg.name.clone(), depth: 10, counterexamples: vec![c], ..Default::default() };
    let text = report.render();
    assert!(text.starts_with("ALGORITHM: ev-tas\nDEPTH: 10\n"));
    assert!(text.contains("COUNTEREXAMPLES: 1\n"));
    assert!(text.contains("inv 0 O tas\ninv 1 O tas\nres 0 O tas T\nres 1 O tas T\n"));
    assert!(text.ends_with("VIOLATIONS: 0\n"));
}
