//! Pinhole camera model, projection/unprojection, and Plücker ray maps.
//!
//! Camera frame convention: x right, y down, z forward. The world frame is
//! the canonical start camera frame, so world up is (0, −1, 0). Per-pixel
//! rays go through pixel centers at integer coordinates + 0.5.

use crate::error::{Error, Result};
use crate::pose::Pose;
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Pinhole intrinsics plus a camera→world rigid pose.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub pose: Pose,
}

/// Successful projection of a world point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelDepth {
    pub u: f64,
    pub v: f64,
    /// Depth along the camera z axis, meters.
    pub depth: f64,
}

impl CameraModel {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        pose: Pose,
    ) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::invalid(format!(
                "focal lengths must be positive, got ({fx}, {fy})"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if !(0.0 <= cx && cx < width as f64) || !(0.0 <= cy && cy < height as f64) {
            return Err(Error::invalid(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} frame"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            pose,
        })
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        self.pose.translation()
    }

    /// Same intrinsics, different pose.
    pub fn with_pose(&self, pose: Pose) -> Self {
        Self {
            pose,
            ..self.clone()
        }
    }

    /// Project a world point onto the image plane.
    ///
    /// Returns `None` when the point is behind the camera (depth ≤ 0) or the
    /// pixel falls outside `[0, width) × [0, height)`.
    pub fn project(&self, p_world: &Vector3<f64>) -> Option<PixelDepth> {
        self.project_camera_point(&self.pose.inverse().transform_point(p_world))
    }

    /// Project a point already expressed in the camera frame. Hot loops can
    /// cache the world→camera transform and call this directly.
    pub fn project_camera_point(&self, p_cam: &Vector3<f64>) -> Option<PixelDepth> {
        let z = p_cam.z;
        if z <= 0.0 {
            return None;
        }
        let u = self.fx * p_cam.x / z + self.cx;
        let v = self.fy * p_cam.y / z + self.cy;
        if u < 0.0 || u >= self.width as f64 || v < 0.0 || v >= self.height as f64 {
            return None;
        }
        Some(PixelDepth { u, v, depth: z })
    }

    /// Lift a pixel at a given depth back into the world frame.
    ///
    /// Exact right-inverse of [`CameraModel::project`] on in-frame pixels.
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Result<Vector3<f64>> {
        if !(depth > 0.0) {
            return Err(Error::domain(format!(
                "depth must be positive, got {depth}"
            )));
        }
        let p_cam = Vector3::new(
            (u - self.cx) / self.fx * depth,
            (v - self.cy) / self.fy * depth,
            depth,
        );
        Ok(self.pose.transform_point(&p_cam))
    }

    /// World-frame unit direction of the ray through pixel center (u, v).
    pub fn ray_direction(&self, u: f64, v: f64) -> Vector3<f64> {
        let dir_cam = Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0);
        self.pose.rotate_vector(&dir_cam).normalize()
    }

    pub fn to_json(&self) -> CameraJson {
        let r = self.pose.rotation();
        CameraJson {
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            width: self.width,
            height: self.height,
            r: [
                r[(0, 0)],
                r[(0, 1)],
                r[(0, 2)],
                r[(1, 0)],
                r[(1, 1)],
                r[(1, 2)],
                r[(2, 0)],
                r[(2, 1)],
                r[(2, 2)],
            ],
            t: self.pose.translation().into(),
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let file = BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(file, &self.to_json())?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let file = BufReader::new(std::fs::File::open(path)?);
        let json: CameraJson = serde_json::from_reader(file)?;
        json.try_into()
    }
}

/// On-disk camera layout: `{fx, fy, cx, cy, width, height, R: [9 row-major], t: [3]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CameraJson {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    #[serde(rename = "R")]
    pub r: [f64; 9],
    pub t: [f64; 3],
}

impl TryFrom<CameraJson> for CameraModel {
    type Error = Error;

    fn try_from(j: CameraJson) -> Result<Self> {
        let rotation = Matrix3::from_row_slice(&j.r);
        let pose = Pose::new(rotation, Vector3::from(j.t))?;
        CameraModel::new(j.fx, j.fy, j.cx, j.cy, j.width, j.height, pose)
    }
}

/// Per-pixel world-frame rays of one camera pose.
///
/// Each pixel stores `[dx, dy, dz, mx, my, mz]` where `d` is the unit ray
/// direction and `m = c × d` its moment about the origin (c = camera center).
#[derive(Debug, Clone, PartialEq)]
pub struct PluckerMap {
    pub width: usize,
    pub height: usize,
    /// Row-major, 6 values per pixel.
    pub rays: Vec<[f64; 6]>,
}

const PLK_MAGIC: &[u8; 4] = b"PLK1";

impl PluckerMap {
    pub fn ray(&self, col: usize, row: usize) -> &[f64; 6] {
        &self.rays[row * self.width + col]
    }

    /// Binary layout: magic "PLK1", u32 width, u32 height, then row-major
    /// 6×f32 per pixel, little-endian.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        w.write_all(PLK_MAGIC)?;
        w.write_u32::<LittleEndian>(self.width as u32)?;
        w.write_u32::<LittleEndian>(self.height as u32)?;
        for ray in &self.rays {
            for &v in ray {
                w.write_f32::<LittleEndian>(v as f32)?;
            }
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != PLK_MAGIC {
            return Err(Error::format("bad PLK1 magic"));
        }
        let width = r.read_u32::<LittleEndian>()? as usize;
        let height = r.read_u32::<LittleEndian>()? as usize;
        let mut rays = Vec::with_capacity(width * height);
        for _ in 0..width * height {
            let mut ray = [0.0f64; 6];
            for v in &mut ray {
                *v = r.read_f32::<LittleEndian>()? as f64;
            }
            rays.push(ray);
        }
        Ok(Self {
            width,
            height,
            rays,
        })
    }
}

/// Plücker embedding of a camera pose: one (direction, moment) pair per
/// pixel center, both in the world frame.
pub fn plucker_embed(model: &CameraModel) -> PluckerMap {
    let center = model.center();
    let mut rays = Vec::with_capacity(model.width * model.height);
    for row in 0..model.height {
        for col in 0..model.width {
            let d = model.ray_direction(col as f64 + 0.5, row as f64 + 0.5);
            let m = center.cross(&d);
            rays.push([d.x, d.y, d.z, m.x, m.y, m.z]);
        }
    }
    PluckerMap {
        width: model.width,
        height: model.height,
        rays,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn simple_model(pose: Pose) -> CameraModel {
        CameraModel::new(100.0, 100.0, 50.0, 50.0, 100, 100, pose).unwrap()
    }

    #[test]
    fn optical_axis_projects_to_principal_point() {
        let model = simple_model(Pose::identity());
        let hit = model.project(&Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!((hit.u, hit.v, hit.depth), (50.0, 50.0, 1.0));
    }

    #[test]
    fn point_behind_camera_is_none() {
        let model = simple_model(Pose::identity());
        assert!(model.project(&Vector3::new(0.0, 0.0, -1.0)).is_none());
    }

    #[test]
    fn hand_evaluated_projection() {
        // u = 100 * 0.5 / 1 + 50 = 100
        let model = simple_model(Pose::identity());
        let hit = model.project(&Vector3::new(0.5, 0.0, 1.0));
        // u = 100 lands exactly on the frame edge, which is out of frame.
        assert!(hit.is_none());
        let wide = CameraModel::new(100.0, 100.0, 50.0, 50.0, 101, 100, Pose::identity()).unwrap();
        let hit = wide.project(&Vector3::new(0.5, 0.0, 1.0)).unwrap();
        assert_eq!((hit.u, hit.v, hit.depth), (100.0, 50.0, 1.0));
    }

    #[test]
    fn unproject_examples() {
        let model = simple_model(Pose::identity());
        let p = model.unproject(50.0, 50.0, 2.0).unwrap();
        assert!((p - Vector3::new(0.0, 0.0, 2.0)).norm() < 1e-12);
        let p = model.unproject(100.0, 50.0, 1.0).unwrap();
        assert!((p - Vector3::new(0.5, 0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn unproject_rejects_nonpositive_depth() {
        let model = simple_model(Pose::identity());
        assert!(model.unproject(50.0, 50.0, 0.0).is_err());
        assert!(model.unproject(50.0, 50.0, -1.0).is_err());
    }

    #[test]
    fn project_unproject_roundtrip_random_poses() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let pose = crate::pose::tests::random_pose(&mut rng);
            let model = CameraModel::new(
                rng.gen_range(50.0..500.0),
                rng.gen_range(50.0..500.0),
                rng.gen_range(10.0..90.0),
                rng.gen_range(10.0..90.0),
                100,
                100,
                pose,
            )
            .unwrap();
            for _ in 0..50 {
                let u = rng.gen_range(0.0..100.0);
                let v = rng.gen_range(0.0..100.0);
                let d = rng.gen_range(0.01..100.0);
                let world = model.unproject(u, v, d).unwrap();
                let hit = model.project(&world).expect("in-frame by construction");
                assert!((hit.u - u).abs() < 1e-9, "u {} vs {}", hit.u, u);
                assert!((hit.v - v).abs() < 1e-9);
                assert!((hit.depth - d).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn plucker_zero_moment_at_origin() {
        let model = simple_model(Pose::identity());
        let map = plucker_embed(&model);
        for ray in &map.rays {
            assert_eq!(&ray[3..], &[0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn plucker_hand_checked_moment() {
        let pose = Pose::from_translation(Vector3::new(1.0, 0.0, 0.0));
        // 1x1 image with the principal ray through its single pixel center.
        let model = CameraModel::new(100.0, 100.0, 0.5, 0.5, 1, 1, pose).unwrap();
        let map = plucker_embed(&model);
        let ray = map.ray(0, 0);
        assert!(
            (Vector3::new(ray[0], ray[1], ray[2]) - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-12
        );
        assert!(
            (Vector3::new(ray[3], ray[4], ray[5]) - Vector3::new(0.0, -1.0, 0.0)).norm() < 1e-12
        );
    }

    #[test]
    fn plucker_invariants_random_pose() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let pose = crate::pose::tests::random_pose(&mut rng);
            let model = CameraModel::new(80.0, 90.0, 16.0, 12.0, 32, 24, pose).unwrap();
            let map = plucker_embed(&model);
            let c = model.center();
            for ray in &map.rays {
                let d = Vector3::new(ray[0], ray[1], ray[2]);
                let m = Vector3::new(ray[3], ray[4], ray[5]);
                assert!((d.norm() - 1.0).abs() < 1e-9);
                assert!(d.dot(&m).abs() < 1e-9);
                // Moment is invariant to sliding the origin point along the ray.
                for s in [-3.0, 0.7, 12.0] {
                    let p = c + d * s;
                    assert!((p.cross(&d) - m).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn camera_json_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pose = crate::pose::tests::random_pose(&mut rng);
        let model = CameraModel::new(320.0, 321.5, 160.0, 120.25, 320, 240, pose).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("camera.json");
        model.write_json(&path).unwrap();
        let back = CameraModel::read_json(&path).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn plucker_binary_roundtrip() {
        let model = simple_model(Pose::from_translation(Vector3::new(0.5, -1.0, 2.0)));
        let small = CameraModel::new(model.fx, model.fy, 4.0, 3.0, 8, 6, model.pose).unwrap();
        let map = plucker_embed(&small);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rays.plk");
        map.write(&path).unwrap();
        let back = PluckerMap::read(&path).unwrap();
        assert_eq!(back.width, map.width);
        assert_eq!(back.height, map.height);
        for (a, b) in map.rays.iter().zip(&back.rays) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-6, "f32 quantization only");
            }
        }
    }

    #[test]
    fn rejects_bad_intrinsics() {
        assert!(CameraModel::new(0.0, 1.0, 0.0, 0.0, 10, 10, Pose::identity()).is_err());
        assert!(CameraModel::new(1.0, 1.0, 10.0, 0.0, 10, 10, Pose::identity()).is_err());
    }
}
