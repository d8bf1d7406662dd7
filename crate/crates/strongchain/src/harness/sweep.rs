//! Seed sweeps: run the same scenario under many seeds and aggregate.
//! The parallel path fans runs out with rayon; the sequential path is
//! always available and is the fallback when the `parallel` feature is
//! off.

use super::report::{analyze, RunReport};
use super::scenario::Scenario;
use super::run_scenario;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub fn seeds(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| base.wrapping_add(i)).collect()
}

pub fn run_seed(sc: &Scenario, seed: u64) -> anyhow::Result<RunReport> {
    let mut sc = sc.clone();
    sc.seed = seed;
    analyze(&run_scenario(&sc)?)
}

pub fn sweep_sequential(sc: &Scenario, seeds: &[u64]) -> anyhow::Result<Vec<RunReport>> {
    seeds.iter().map(|&s| run_seed(sc, s)).collect()
}

#[cfg(feature = "parallel")]
pub fn sweep_parallel(sc: &Scenario, seeds: &[u64]) -> anyhow::Result<Vec<RunReport>> {
    seeds.par_iter().map(|&s| run_seed(sc, s)).collect()
}

/// Run one scenario across seeds, in parallel when compiled in.
pub fn sweep(sc: &Scenario, seeds: &[u64]) -> anyhow::Result<Vec<RunReport>> {
    #[cfg(feature = "parallel")]
    {
        sweep_parallel(sc, seeds)
    }
    #[cfg(not(feature = "parallel"))]
    {
        sweep_sequential(sc, seeds)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummary {
    pub runs: usize,
    pub invariant_failures: usize,
    pub violations_total: usize,
    pub attacks_evaluated: usize,
    pub attacks_succeeded: usize,
    pub all_ok: bool,
}

pub fn summarize(reports: &[RunReport]) -> SweepSummary {
    let invariant_failures = reports.iter().filter(|r| !r.invariants_ok()).count();
    SweepSummary {
        runs: reports.len(),
        invariant_failures,
        violations_total: reports.iter().map(|r| r.violations.len()).sum(),
        attacks_evaluated: reports.iter().filter(|r| r.attack.is_some()).count(),
        attacks_succeeded: reports
            .iter()
            .filter(|r| r.attack.as_ref().is_some_and(|a| a.success))
            .count(),
        all_ok: invariant_failures == 0,
    }
}
