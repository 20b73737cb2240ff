//! `annotate`: depth → cloud → normals → segmentation → grid → anchored
//! target → inflation → A* → lift → resample → smooth → normalize, per
//! manifest entry.

use super::{with_atomic_dir, EntryOutcome};
use crate::manifest::{Manifest, ManifestEntry};
use crate::report::RunReport;
use anyhow::{Context, Result};
use nalgebra::Vector3;
use navgeom::camera::CameraModel;
use navgeom::cloud::{cloud_from_depth, DepthImage};
use navgeom::config::PipelineConfig;
use navgeom::normals::estimate_normals;
use navgeom::occupancy::{build_grid_with_heights, segment_cloud};
use navgeom::planner::{astar, inflate_obstacles};
use navgeom::trajectory::{lift_path, normalize_origin_with, resample, smooth};
use std::path::Path;

pub const WORLD_UP: Vector3<f64> = Vector3::new(0.0, -1.0, 0.0);

pub fn run(
    manifest: &Manifest,
    base: &Path,
    config: &PipelineConfig,
    out_root: &Path,
    jobs: usize,
    report: &mut RunReport,
) -> Result<()> {
    super::run_batch(
        &manifest.entries,
        jobs,
        |e| e.id.as_str(),
        |entry| annotate_entry(entry, base, config, out_root),
        report,
    )
}

fn annotate_entry(
    entry: &ManifestEntry,
    base: &Path,
    config: &PipelineConfig,
    out_root: &Path,
) -> Result<EntryOutcome> {
    entry.check_inputs(base)?;
    let depth = DepthImage::read_pfm(&entry.depth_path(base)).context("reading depth pfm")?;
    let camera = CameraModel::read_json(&entry.camera_path(base)).context("reading camera json")?;
    let target_world = Vector3::from(entry.target_world);

    let cloud = cloud_from_depth(&depth, &camera, config.stride)?;
    if cloud.len() < config.normal_neighbors + 1 {
        return Err(anyhow::anyhow!(
            "depth map yields only {} points; need at least {}",
            cloud.len(),
            config.normal_neighbors + 1
        ));
    }
    let cloud = estimate_normals(
        &cloud,
        config.normal_neighbors,
        &camera.center(),
        config.normal_hash_cell_m,
    )?;
    let seg = segment_cloud(&cloud, &WORLD_UP, &config.segment_params())?;
    let (mut grid, heights) = build_grid_with_heights(
        &cloud,
        &seg,
        &camera.pose,
        &target_world,
        &config.grid_build_params(),
    )?;
    let target_agent = grid.target_world();
    grid.anchor_target(&target_agent);
    let planning = inflate_obstacles(&grid, config.inflation_radius_cells);

    let path = astar(&planning, &config.planner_options());
    with_atomic_dir(out_root, &entry.id, |dir| {
        grid.write_files(&dir.join("grid.pgm"), &dir.join("grid.json"))?;
        let Some(path) = &path else {
            return Ok(());
        };
        let file = std::io::BufWriter::new(std::fs::File::create(dir.join("path.json"))?);
        serde_json::to_writer_pretty(file, path)?;
        if path.cells.len() < 2 {
            return Ok(());
        }
        let traj = lift_path(path, &planning, Some(&heights))?;
        let traj = resample(&traj, config.resample_len)?;
        let traj = smooth(&traj, Some(&planning));
        traj.write_jsonl(&dir.join("trajectory_agent.jsonl"))?;
        let normalized = normalize_origin_with(&traj, config.normalize_rotation);
        normalized.write_jsonl(&dir.join("trajectory.jsonl"))?;
        Ok(())
    })?;
    match &path {
        None => Ok(EntryOutcome::Skipped("unreachable".into())),
        Some(p) if p.cells.len() < 2 => Ok(EntryOutcome::Skipped("agent already at target".into())),
        Some(_) => Ok(EntryOutcome::Ok),
    }
}
