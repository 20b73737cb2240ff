//! `swap-negatives`: build the alignment training set from a manifest by
//! pairing each instruction with its own observation (positives) plus a
//! deranged pairing (negatives).

use crate::manifest::Manifest;
use crate::usage_error;
use anyhow::Result;
use navgeom::objectives::{swap_negatives, write_samples_jsonl, AlignmentSample};
use std::path::Path;

pub fn run(manifest: &Manifest, seed: u64, out: &Path) -> Result<usize> {
    if manifest.entries.len() < 2 {
        return usage_error("swap-negatives needs at least 2 manifest entries");
    }
    let positives: Vec<AlignmentSample> = manifest
        .entries
        .iter()
        .map(|e| AlignmentSample {
            instruction_id: e.id.clone(),
            observation_id: e.id.clone(),
            label: 1,
        })
        .collect();
    let samples = swap_negatives(&positives, seed)?;
    write_samples_jsonl(out, &samples)?;
    Ok(samples.len())
}
