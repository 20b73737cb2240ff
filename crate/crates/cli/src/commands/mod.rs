//! Subcommand implementations.

pub mod annotate;
pub mod condition;
pub mod eval;
pub mod flowmask;
pub mod selftest;
pub mod swap;

use crate::report::RunReport;
use anyhow::{Context, Result};
use std::path::{Path, PathBuf};

/// How one batch entry ended.
pub enum EntryOutcome {
    Ok,
    Skipped(String),
}

/// Run `work` for every entry on a bounded rayon pool, collecting results in
/// input order so reports and logs are deterministic. One entry's failure
/// never aborts the batch.
pub fn run_batch<E: Sync>(
    entries: &[E],
    jobs: usize,
    id_of: impl Fn(&E) -> &str + Sync,
    work: impl Fn(&E) -> Result<EntryOutcome> + Sync,
    report: &mut RunReport,
) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("building worker pool")?;
    let results: Vec<Result<EntryOutcome>> = pool.install(|| {
        use rayon::prelude::*;
        entries.par_iter().map(&work).collect()
    });
    for (entry, result) in entries.iter().zip(results) {
        let id = id_of(entry);
        match result {
            Ok(EntryOutcome::Ok) => report.ok(id),
            Ok(EntryOutcome::Skipped(reason)) => report.skipped(id, reason),
            Err(err) => report.error(id, format!("{err:#}")),
        }
    }
    Ok(())
}

/// Build an entry's output directory atomically: work in `<out>/.tmp-<id>`,
/// then rename over the final `<out>/<id>`.
pub fn with_atomic_dir(
    out_root: &Path,
    id: &str,
    work: impl FnOnce(&Path) -> Result<()>,
) -> Result<()> {
    let tmp = out_root.join(format!(".tmp-{id}"));
    let final_dir = out_root.join(id);
    if tmp.exists() {
        std::fs::remove_dir_all(&tmp)?;
    }
    std::fs::create_dir_all(&tmp)?;
    if let Err(err) = work(&tmp) {
        let _ = std::fs::remove_dir_all(&tmp);
        return Err(err);
    }
    if final_dir.exists() {
        std::fs::remove_dir_all(&final_dir)?;
    }
    std::fs::rename(&tmp, &final_dir)?;
    Ok(())
}

pub fn ensure_out_dir(path: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(path)
        .with_context(|| format!("cannot create output directory {}", path.display()))?;
    Ok(path.to_path_buf())
}
