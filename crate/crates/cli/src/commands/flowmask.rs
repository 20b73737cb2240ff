//! `flowmask`: magnitude + top-k salient mask per .flo file.

use super::EntryOutcome;
use crate::report::RunReport;
use anyhow::{Context, Result};
use navgeom::flowmask::{flow_magnitude, topk_mask, FlowField};
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Serialize)]
struct MaskSummary {
    ratio: f64,
    files: Vec<MaskFileSummary>,
}

#[derive(Serialize)]
struct MaskFileSummary {
    input: String,
    width: usize,
    height: usize,
    k: usize,
    mask: String,
}

/// Expand files and directories into a deterministic .flo list.
pub fn collect_inputs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut inner: Vec<PathBuf> = std::fs::read_dir(path)
                .with_context(|| format!("reading {}", path.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "flo"))
                .collect();
            inner.sort();
            files.extend(inner);
        } else {
            files.push(path.clone());
        }
    }
    Ok(files)
}

pub fn run(
    inputs: &[PathBuf],
    ratio: f64,
    out_root: &Path,
    jobs: usize,
    report: &mut RunReport,
) -> Result<()> {
    let ids: Vec<(String, PathBuf)> = inputs
        .iter()
        .map(|p| {
            let stem = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "flow".into());
            (stem, p.clone())
        })
        .collect();
    let results: std::sync::Mutex<Vec<Option<MaskFileSummary>>> =
        std::sync::Mutex::new((0..ids.len()).map(|_| None).collect());
    super::run_batch(
        &ids.iter().enumerate().collect::<Vec<_>>(),
        jobs,
        |(_, (id, _))| id.as_str(),
        |(index, (id, path))| {
            let flow =
                FlowField::read_flo(path).with_context(|| format!("reading {}", path.display()))?;
            let magnitude = flow_magnitude(&flow);
            let mask = topk_mask(&magnitude, ratio)?;
            let pbm = out_root.join(format!("{id}.pbm"));
            let json = out_root.join(format!("{id}.json"));
            mask.write_files(&pbm, &json, ratio)?;
            results.lock().unwrap()[*index] = Some(MaskFileSummary {
                input: path.display().to_string(),
                width: mask.width,
                height: mask.height,
                k: mask.k,
                mask: format!("{id}.pbm"),
            });
            Ok(EntryOutcome::Ok)
        },
        report,
    )?;
    let summary = MaskSummary {
        ratio,
        files: results
            .into_inner()
            .unwrap()
            .into_iter()
            .flatten()
            .collect(),
    };
    let file = std::io::BufWriter::new(std::fs::File::create(out_root.join("summary.json"))?);
    serde_json::to_writer_pretty(file, &summary)?;
    Ok(())
}
