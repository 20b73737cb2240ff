//! `condition`: per annotated entry, emit the virtual camera poses along the
//! trajectory, a Plücker ray map per pose, and the z-buffered constraint
//! frames of the global cloud.

use super::{with_atomic_dir, EntryOutcome};
use crate::manifest::{Manifest, ManifestEntry};
use crate::report::RunReport;
use anyhow::{Context, Result};
use navgeom::camera::{plucker_embed, CameraModel};
use navgeom::cloud::{cloud_from_depth, DepthImage};
use navgeom::config::PipelineConfig;
use navgeom::reproject::{reproject_cloud, virtual_poses, write_frames, ReprojectOptions};
use navgeom::trajectory::Trajectory;
use serde::Serialize;
use std::path::Path;

#[derive(Serialize)]
struct ConditionManifest {
    pose_count: usize,
    plucker: Vec<String>,
    frames_manifest: String,
}

pub fn run(
    manifest: &Manifest,
    base: &Path,
    annotations: &Path,
    config: &PipelineConfig,
    out_root: &Path,
    jobs: usize,
    report: &mut RunReport,
) -> Result<()> {
    super::run_batch(
        &manifest.entries,
        jobs,
        |e| e.id.as_str(),
        |entry| condition_entry(entry, base, annotations, config, out_root),
        report,
    )
}

fn condition_entry(
    entry: &ManifestEntry,
    base: &Path,
    annotations: &Path,
    config: &PipelineConfig,
    out_root: &Path,
) -> Result<EntryOutcome> {
    let traj_path = annotations.join(&entry.id).join("trajectory_agent.jsonl");
    if !traj_path.is_file() {
        return Err(anyhow::anyhow!(
            "missing annotated trajectory {}",
            traj_path.display()
        ));
    }
    entry.check_inputs(base)?;
    let traj = Trajectory::read_jsonl(&traj_path).context("reading annotated trajectory")?;
    let depth = DepthImage::read_pfm(&entry.depth_path(base))?;
    let camera = CameraModel::read_json(&entry.camera_path(base))?;

    let cloud = cloud_from_depth(&depth, &camera, config.stride)?;
    let poses = virtual_poses(&traj, config.camera_height_m);
    let frames = reproject_cloud(
        &cloud,
        &camera,
        &poses,
        None,
        &ReprojectOptions {
            splat_radius: config.splat_radius_px,
        },
    )?;

    with_atomic_dir(out_root, &entry.id, |dir| {
        let mut plucker_files = Vec::with_capacity(poses.len());
        let plucker_dir = dir.join("plucker");
        std::fs::create_dir_all(&plucker_dir)?;
        for (i, pose) in poses.iter().enumerate() {
            let map = plucker_embed(&camera.with_pose(*pose));
            let name = format!("pose_{i:04}.plk");
            map.write(&plucker_dir.join(&name))?;
            plucker_files.push(format!("plucker/{name}"));
        }
        let frames_dir = dir.join("frames");
        write_frames(&frames_dir, &frames, &camera)?;
        let manifest = ConditionManifest {
            pose_count: poses.len(),
            plucker: plucker_files,
            frames_manifest: "frames/frames.json".into(),
        };
        let file = std::io::BufWriter::new(std::fs::File::create(dir.join("condition.json"))?);
        serde_json::to_writer_pretty(file, &manifest)?;
        Ok(())
    })?;
    Ok(EntryOutcome::Ok)
}
