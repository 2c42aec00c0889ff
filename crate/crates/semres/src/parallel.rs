//! Monte Carlo on worker threads.

use std::thread;

use semres_core::montecarlo::{self, merge_workers, run_worker, EstimateResult, TrialConfig};

/// Same result as [`montecarlo::estimate_with_workers`] with one thread per
/// worker.
pub fn estimate(config: &TrialConfig, workers: usize) -> semres_core::Result<EstimateResult> {
    if workers <= 1 {
        return montecarlo::estimate(config);
    }
    let tallies = thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| scope.spawn(move || run_worker(config, w, workers)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("monte carlo worker panicked"))
            .collect::<semres_core::Result<Vec<_>>>()
    })?;
    Ok(merge_workers(tallies).result(config.seed))
}
