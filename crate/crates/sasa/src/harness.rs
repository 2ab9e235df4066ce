//! Parallel replicate runs.
//!
//! Each `(replicate, method)` task regenerates its replicate from the seeded
//! stream, so tasks share nothing and may run in any order. Results come
//! back in replicate order, then method order.

use rayon::prelude::*;
use rayon::ThreadPool;
use sasa_core::metrics::{MetricReport, ReplicateMetrics};
use sasa_core::simgen::{evaluate, generate, MethodConfig, SimScenario};
use sasa_core::SasaError;

/// Outcome of one method on one replicate.
#[derive(Debug, Clone)]
pub struct TaskOutcome {
    pub replicate: usize,
    pub method: usize,
    pub result: Result<ReplicateMetrics, SasaError>,
}

pub fn pool(jobs: Option<usize>) -> Result<ThreadPool, rayon::ThreadPoolBuildError> {
    let threads = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build()
}

pub fn run_replicates(
    scenario: &SimScenario,
    methods: &[MethodConfig],
    seed: u64,
    replicates: usize,
    pool: &ThreadPool,
) -> Vec<TaskOutcome> {
    let tasks: Vec<(usize, usize)> = (0..replicates)
        .flat_map(|r| (0..methods.len()).map(move |m| (r, m)))
        .collect();
    pool.install(|| {
        tasks
            .par_iter()
            .map(|&(replicate, method)| TaskOutcome {
                replicate,
                method,
                result: generate(scenario, seed, replicate)
                    .and_then(|data| evaluate(&data, &methods[method], replicate)),
            })
            .collect()
    })
}

/// Aggregate for one method; `report` is `None` when every replicate failed.
#[derive(Debug, Clone)]
pub struct MethodSummary {
    pub report: Option<MetricReport>,
    pub failures: usize,
    /// First failure message, if any.
    pub first_error: Option<String>,
}

pub fn summarize(outcomes: &[TaskOutcome], method: usize, k_true: usize) -> MethodSummary {
    let mut rows = Vec::new();
    let mut failures = 0;
    let mut first_error = None;
    for o in outcomes.iter().filter(|o| o.method == method) {
        match &o.result {
            Ok(m) => rows.push(m.clone()),
            Err(e) => {
                failures += 1;
                first_error.get_or_insert_with(|| format!("replicate {}: {e}", o.replicate));
            }
        }
    }
    MethodSummary {
        report: MetricReport::from_replicates(&rows, k_true).ok(),
        failures,
        first_error,
    }
}
