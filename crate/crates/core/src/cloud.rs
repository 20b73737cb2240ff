//! Depth images and their unprojection into world-frame point clouds.

use crate::camera::CameraModel;
use crate::error::{Error, Result};
use crate::io::{pfm, ply};
use nalgebra::Vector3;
use std::path::Path;

/// Row-major depth map in meters. Zero marks an invalid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    depth: Vec<f32>,
}

impl DepthImage {
    pub fn new(width: usize, height: usize, depth: Vec<f32>) -> Result<Self> {
        if depth.len() != width * height {
            return Err(Error::mismatch(format!(
                "depth payload {} != {}x{}",
                depth.len(),
                width,
                height
            )));
        }
        if !depth.iter().all(|d| d.is_finite() && *d >= 0.0) {
            return Err(Error::invalid("depth values must be finite and >= 0"));
        }
        Ok(Self {
            width,
            height,
            depth,
        })
    }

    pub fn at(&self, col: usize, row: usize) -> f32 {
        self.depth[row * self.width + col]
    }

    pub fn data(&self) -> &[f32] {
        &self.depth
    }

    pub fn write_pfm(&self, path: &Path) -> Result<()> {
        pfm::write(path, self.width, self.height, &self.depth)
    }

    pub fn read_pfm(path: &Path) -> Result<Self> {
        let (width, height, depth) = pfm::read(path)?;
        Self::new(width, height, depth)
    }
}

/// World-frame points with optional unit normals aligned 1:1.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub normals: Option<Vec<Vector3<f64>>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Result<Self> {
        if !points.iter().all(|p| p.iter().all(|v| v.is_finite())) {
            return Err(Error::invalid("point coordinates must be finite"));
        }
        Ok(Self {
            points,
            normals: None,
        })
    }

    pub fn with_normals(points: Vec<Vector3<f64>>, normals: Vec<Vector3<f64>>) -> Result<Self> {
        if normals.len() != points.len() {
            return Err(Error::mismatch("normal count != point count"));
        }
        if !normals.iter().all(|n| (n.norm() - 1.0).abs() < 1e-6) {
            return Err(Error::invalid("normals must be unit length"));
        }
        let mut cloud = Self::new(points)?;
        cloud.normals = Some(normals);
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn write_ply(&self, path: &Path) -> Result<()> {
        let cloud = ply::PlyCloud {
            points: self
                .points
                .iter()
                .map(|p| [p.x as f32, p.y as f32, p.z as f32])
                .collect(),
            normals: self.normals.as_ref().map(|ns| {
                ns.iter()
                    .map(|n| [n.x as f32, n.y as f32, n.z as f32])
                    .collect()
            }),
        };
        ply::write(path, &cloud)
    }

    pub fn read_ply(path: &Path) -> Result<Self> {
        let raw = ply::read(path)?;
        let points = raw
            .points
            .iter()
            .map(|p| Vector3::new(p[0] as f64, p[1] as f64, p[2] as f64))
            .collect();
        match raw.normals {
            Some(ns) => {
                let normals = ns
                    .iter()
                    .map(|n| {
                        Vector3::new(n[0] as f64, n[1] as f64, n[2] as f64)
                            .try_normalize(0.0)
                            .unwrap_or_else(|| Vector3::new(0.0, -1.0, 0.0))
                    })
                    .collect();
                Self::with_normals(points, normals)
            }
            None => Self::new(points),
        }
    }
}

/// Unproject every sampled valid pixel of a depth map.
///
/// Pixels are visited row-major with the given stride in both axes; rays go
/// through pixel centers. Zero-depth pixels are skipped, so the point count
/// equals the number of sampled pixels with positive depth.
pub fn cloud_from_depth(
    depth: &DepthImage,
    model: &CameraModel,
    stride: usize,
) -> Result<PointCloud> {
    if stride == 0 {
        return Err(Error::invalid("stride must be >= 1"));
    }
    if depth.width != model.width || depth.height != model.height {
        return Err(Error::mismatch(format!(
            "depth {}x{} vs camera {}x{}",
            depth.width, depth.height, model.width, model.height
        )));
    }
    let mut points = Vec::new();
    for row in (0..depth.height).step_by(stride) {
        for col in (0..depth.width).step_by(stride) {
            let d = depth.at(col, row) as f64;
            if d > 0.0 {
                points.push(model.unproject(col as f64 + 0.5, row as f64 + 0.5, d)?);
            }
        }
    }
    PointCloud::new(points)
}
