//! Parallel replication driver. Each replication owns its RNG stream, so the
//! report does not depend on the worker count.

use policybound_core::sim::{aggregate, run_replication, Replication};
use policybound_core::{SimReport, StudyConfig};
use rayon::prelude::*;

use crate::error::{CliError, Result};

pub fn run_study(cfg: &StudyConfig, threads: usize) -> Result<SimReport> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {threads} workers: {e}")))?;
    let reps: Vec<Replication> = pool.install(|| {
        (0..cfg.reps).into_par_iter().map(|r| run_replication(cfg, r)).collect::<std::result::Result<Vec<_>, _>>()
    })?;
    Ok(aggregate(cfg, &reps)?)
}
