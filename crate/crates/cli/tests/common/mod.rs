//! Shared helpers for the CLI integration and acceptance tests.
#![allow(dead_code)] // each test binary uses its own subset

use navgeom::occupancy::OccupancyGrid;
use navgeom::synthetic;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

/// Write `count` synthetic scenes (depth PFM + camera JSON) plus a batch
/// manifest referencing them. Returns the manifest path.
pub fn write_scene_inputs(
    dir: &Path,
    count: usize,
    seed: u64,
    width: usize,
    height: usize,
) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let mut entries = Vec::new();
    for i in 0..count {
        let scene = synthetic::scene(seed + i as u64, width, height);
        let depth_file = format!("scene_{i:03}_depth.pfm");
        let camera_file = format!("scene_{i:03}_camera.json");
        scene.depth.write_pfm(&dir.join(&depth_file)).unwrap();
        scene.camera.write_json(&dir.join(&camera_file)).unwrap();
        entries.push(serde_json::json!({
            "id": format!("scene_{i:03}"),
            "instruction": format!("go to the entrance of unit {i}"),
            "depth_file": depth_file,
            "camera_file": camera_file,
            "target_world": [scene.target_world.x, scene.target_world.y, scene.target_world.z],
        }));
    }
    let manifest_path = dir.join("manifest.json");
    let manifest = serde_json::json!({ "entries": entries });
    std::fs::write(
        &manifest_path,
        serde_json::to_vec_pretty(&manifest).unwrap(),
    )
    .unwrap();
    manifest_path
}

/// Build an episodes manifest from `annotate` output directories.
pub fn build_episode_manifest(annotations: &Path, ids: &[String], max_steps: usize) -> PathBuf {
    let mut episodes = Vec::new();
    for id in ids {
        let grid_pgm = annotations.join(id).join("grid.pgm");
        let grid_meta = annotations.join(id).join("grid.json");
        let trajectory = annotations.join(id).join("trajectory_agent.jsonl");
        if !trajectory.is_file() {
            continue;
        }
        let grid = OccupancyGrid::read_files(&grid_pgm, &grid_meta).unwrap();
        let (tx, tz) = grid.center_of(grid.target_cell());
        episodes.push(serde_json::json!({
            "id": id,
            "instruction": "go to the entrance",
            "grid_pgm": format!("{id}/grid.pgm"),
            "grid_meta": format!("{id}/grid.json"),
            "trajectory": format!("{id}/trajectory_agent.jsonl"),
            "target_entrance": [tx, tz],
            "max_steps": max_steps,
        }));
    }
    assert!(!episodes.is_empty(), "no annotated entries to evaluate");
    let path = annotations.join("episodes.json");
    let manifest = serde_json::json!({ "episodes": episodes });
    std::fs::write(&path, serde_json::to_vec_pretty(&manifest).unwrap()).unwrap();
    path
}

/// Relative path → file bytes for a whole directory tree.
pub fn snapshot_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

/// Run the pipeline binary; returns (exit code, stdout, stderr).
pub fn run_navgeom(args: &[&str]) -> (i32, String, String) {
    let output = Command::new(env!("CARGO_BIN_EXE_navgeom"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        output.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&output.stdout).into_owned(),
        String::from_utf8_lossy(&output.stderr).into_owned(),
    )
}

/// Ids of entries the annotate run reported as ok.
pub fn annotated_ok_ids(out_dir: &Path) -> Vec<String> {
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("run_report.json")).unwrap()).unwrap();
    report["entries"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|e| e["status"] == "ok")
        .map(|e| e["id"].as_str().unwrap().to_string())
        .collect()
}
