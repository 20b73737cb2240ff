//! Z-buffered reprojection of a point cloud through virtual camera poses.
//!
//! Every waypoint of a planned trajectory becomes a virtual camera; the
//! global cloud is rendered into each one with a per-pixel depth test, so
//! the frame sequence carries the occlusions and field-of-view changes an
//! agent would see along the path.

use crate::camera::{CameraJson, CameraModel};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::io::{netpbm, pfm};
use crate::pose::{yaw_rotation, Pose};
use crate::trajectory::Trajectory;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Depth ties closer than this keep the earlier (lower-index) point.
const DEPTH_TIE_M: f64 = 1e-9;

/// One rendered view: per-pixel depth (0 = no point) and optional color.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintFrame {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
    pub color: Option<Vec<[u8; 3]>>,
    pub pose_index: usize,
}

impl ConstraintFrame {
    pub fn depth_at(&self, col: usize, row: usize) -> f64 {
        self.depth[row * self.width + col]
    }
}

/// One camera→world transform per trajectory pose: the camera sits
/// `camera_height` above the waypoint (−y is up) and faces along its yaw.
pub fn virtual_poses(traj: &Trajectory, camera_height: f64) -> Vec<Pose> {
    traj.poses
        .iter()
        .map(|p| {
            let rotation = yaw_rotation(p.yaw);
            let center = nalgebra::Vector3::new(p.x, p.y - camera_height, p.z);
            Pose::new(rotation, center).expect("yaw rotations are orthonormal")
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReprojectOptions {
    /// Square splat radius in pixels; 0 renders single-pixel points.
    pub splat_radius: usize,
}

/// Render the cloud into every pose with a z-buffer per frame.
///
/// `colors`, when given, must align 1:1 with the cloud points. Frames are
/// rendered independently (and in parallel); each output is deterministic.
pub fn reproject_cloud(
    cloud: &PointCloud,
    model: &CameraModel,
    poses: &[Pose],
    colors: Option<&[[u8; 3]]>,
    opts: &ReprojectOptions,
) -> Result<Vec<ConstraintFrame>> {
    if cloud.is_empty() {
        return Err(Error::domain("cannot reproject an empty cloud"));
    }
    if let Some(colors) = colors {
        if colors.len() != cloud.len() {
            return Err(Error::mismatch("color count != point count"));
        }
    }
    Ok(poses
        .par_iter()
        .enumerate()
        .map(|(pose_index, pose)| render_frame(cloud, model, pose, pose_index, colors, opts))
        .collect())
}

fn render_frame(
    cloud: &PointCloud,
    model: &CameraModel,
    pose: &Pose,
    pose_index: usize,
    colors: Option<&[[u8; 3]]>,
    opts: &ReprojectOptions,
) -> ConstraintFrame {
    let camera = model.with_pose(*pose);
    let (w, h) = (camera.width, camera.height);
    let mut depth = vec![0.0f64; w * h];
    let mut color = colors.map(|_| vec![[0u8; 3]; w * h]);
    let r = opts.splat_radius as i64;

    let to_camera = pose.inverse();
    for (i, point) in cloud.points.iter().enumerate() {
        let Some(hit) = camera.project_camera_point(&to_camera.transform_point(point)) else {
            continue;
        };
        let pu = hit.u.floor() as i64;
        let pv = hit.v.floor() as i64;
        for dv in -r..=r {
            for du in -r..=r {
                let (u, v) = (pu + du, pv + dv);
                if u < 0 || v < 0 || u >= w as i64 || v >= h as i64 {
                    continue;
                }
                let idx = v as usize * w + u as usize;
                let current = depth[idx];
                // First writer wins ties: later points must be strictly
                // (beyond the tie margin) closer to take the pixel.
                if current == 0.0 || hit.depth < current - DEPTH_TIE_M {
                    depth[idx] = hit.depth;
                    if let (Some(color), Some(colors)) = (&mut color, colors) {
                        color[idx] = colors[i];
                    }
                }
            }
        }
    }
    ConstraintFrame {
        width: w,
        height: h,
        depth,
        color,
        pose_index,
    }
}

/// Frame files on disk: numbered PFM depth, optional PPM color, and a JSON
/// manifest mapping pose indices to files alongside the camera model.
#[derive(Debug, Serialize, Deserialize)]
pub struct FrameManifest {
    pub camera: CameraJson,
    pub frames: Vec<FrameEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FrameEntry {
    pub pose_index: usize,
    pub depth: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
}

pub fn write_frames(
    dir: &Path,
    frames: &[ConstraintFrame],
    model: &CameraModel,
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(frames.len());
    for frame in frames {
        let depth_name = format!("depth_{:04}.pfm", frame.pose_index);
        let depth_f32: Vec<f32> = frame.depth.iter().map(|d| *d as f32).collect();
        pfm::write(
            &dir.join(&depth_name),
            frame.width,
            frame.height,
            &depth_f32,
        )?;
        let color_name = match &frame.color {
            Some(rgb) => {
                let name = format!("color_{:04}.ppm", frame.pose_index);
                netpbm::write_ppm(&dir.join(&name), frame.width, frame.height, rgb)?;
                Some(name)
            }
            None => None,
        };
        entries.push(FrameEntry {
            pose_index: frame.pose_index,
            depth: depth_name,
            color: color_name,
        });
    }
    let manifest = FrameManifest {
        camera: model.to_json(),
        frames: entries,
    };
    let path = dir.join("frames.json");
    let file = std::io::BufWriter::new(std::fs::File::create(&path)?);
    serde_json::to_writer_pretty(file, &manifest)?;
    Ok(path)
}
