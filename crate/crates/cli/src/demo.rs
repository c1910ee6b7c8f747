//! End-to-end recipes, one per construction, each a smaller cut of the
//! acceptance suite.

use clap::ValueEnum;
use evlin::algorithms::{default_workload, ev_consensus, ev_tas, ev_tas_skip_write, two_fac, universal, FacBase};
use evlin::explorer::{distinct_histories, find_non_linearizable, prefix_safety_scan};
use evlin::{AlgorithmInstance, Checker, TypeSpec, Value};

use crate::{CmdResult, Failure};

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fault {
    /// test-and-set that never writes the register
    SkipWrite,
}

type Recipe = fn(Option<Fault>) -> Result<String, String>;

const RECIPES: [(&str, &str, Recipe); 4] = [
    ("Thm13", "universal construction over fetch-and-cons", universal_recipe),
    ("Thm14", "consensus from registers", consensus_recipe),
    ("Thm15", "test-and-set from a register", tas_recipe),
    ("Thm16", "2-process fetch-and-cons from fetch-and-add", two_fac_recipe),
];

pub fn run(list: bool, fault: Option<Fault>) -> CmdResult {
    if list {
        for (name, what, _) in RECIPES {
            println!("{name} {what}");
        }
        return Ok(());
    }
    let mut failed = false;
    for (name, what, recipe) in RECIPES {
        match recipe(fault) {
            Ok(detail) => println!("PASS {name} {what}: {detail}"),
            Err(detail) => {
                failed = true;
                println!("FAIL {name} {what}: {detail}");
            }
        }
    }
    if failed {
        Err(Failure::Negative)
    } else {
        Ok(())
    }
}

/// Checks every history within `depth`; returns (histories, count with
/// minimal_t > 0).
fn all_eventual(alg: &AlgorithmInstance, ops: usize, depth: usize) -> Result<(usize, usize), String> {
    let c = Checker::new(alg.spec.clone());
    let hs = distinct_histories(alg, &default_workload(alg, ops), depth).map_err(|e| e.to_string())?;
    let mut anomalies = 0;
    for (h, _) in &hs {
        let r = c.check_eventual(h).map_err(|e| e.to_string())?;
        if !r.weakly_consistent {
            return Err(format!("history of {} events is not weakly consistent", h.len()));
        }
        anomalies += usize::from(r.minimal_t > 0);
    }
    Ok((hs.len(), anomalies))
}

fn universal_recipe(_: Option<Fault>) -> Result<String, String> {
    let (n, bad) = all_eventual(&universal(TypeSpec::faa(), FacBase::Atomic, 2), 2, 20)?;
    if bad > 0 {
        return Err(format!("{bad} of {n} atomic-base histories not linearizable"));
    }
    let (m, anomalies) = all_eventual(&universal(TypeSpec::faa(), FacBase::Chaos(4), 2), 2, 20)?;
    if anomalies == 0 {
        return Err("chaos base produced no anomaly".into());
    }
    Ok(format!("{n} linearizable on atomic base, {m} eventually linearizable on chaos base"))
}

fn consensus_recipe(_: Option<Fault>) -> Result<String, String> {
    let (n, anomalies) = all_eventual(&ev_consensus(2), 1, 20)?;
    if anomalies == 0 {
        return Err("no split decision found".into());
    }
    Ok(format!("{n} histories eventually linearizable, {anomalies} not linearizable"))
}

fn tas_recipe(fault: Option<Fault>) -> Result<String, String> {
    let alg = match fault {
        Some(Fault::SkipWrite) => ev_tas_skip_write(2),
        None => ev_tas(2),
    };
    let (n, _) = all_eventual(&alg, 2, 16)?;
    let c = find_non_linearizable(&alg, &default_workload(&alg, 2), 16).map_err(|e| e.to_string())?.ok_or("no counterexample found")?;
    let winners = c.history.events().iter().filter(|e| !e.is_inv() && e.payload[0] == Value::Bool(true)).count();
    if c.history.len() != 4 || winners != 2 {
        return Err(format!("unexpected counterexample of {} events", c.history.len()));
    }
    Ok(format!("{n} histories eventually linearizable, double winner found"))
}

fn two_fac_recipe(_: Option<Fault>) -> Result<String, String> {
    let alg = two_fac();
    let (n, _) = all_eventual(&alg, 2, 24)?;
    let v = prefix_safety_scan(&alg, &default_workload(&alg, 2), 24, 0).map_err(|e| e.to_string())?;
    if !v.is_empty() {
        return Err(format!("{} prefix violations", v.len()));
    }
    Ok(format!("{n} histories eventually linearizable, no prefix violations"))
}
