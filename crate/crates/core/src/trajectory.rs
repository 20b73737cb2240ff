//! Trajectories as ordered [x, y, z, yaw] poses, with the preprocessing
//! applied to annotated paths: origin normalization, arc-length resampling,
//! and collision-checked corner smoothing.
//!
//! Yaw is measured about the up axis: 0 faces +Z, positive turns toward +X,
//! values wrapped into (−π, π]. Heading comes from direction vectors between
//! consecutive waypoints; zero-length steps carry the previous yaw forward
//! and the last pose copies its predecessor.

use crate::error::{Error, Result};
use crate::occupancy::{GroundHeightMap, OccupancyGrid};
use crate::planner::GridPath;
use crate::pose::wrap_angle;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    AgentRaw,
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub resampled_to: Option<usize>,
    pub smoothed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub poses: Vec<Waypoint>,
    pub frame: Frame,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn new(poses: Vec<Waypoint>, frame: Frame, meta: TrajectoryMeta) -> Result<Self> {
        if poses.len() < 2 {
            return Err(Error::domain("a trajectory needs at least 2 poses"));
        }
        for p in &poses {
            if ![p.x, p.y, p.z, p.yaw].iter().all(|v| v.is_finite()) {
                return Err(Error::invalid("non-finite pose component"));
            }
            if !(p.yaw > -std::f64::consts::PI - 1e-12 && p.yaw <= std::f64::consts::PI + 1e-12) {
                return Err(Error::invalid(format!("yaw {} outside (-pi, pi]", p.yaw)));
            }
        }
        if frame == Frame::Normalized {
            let first = &poses[0];
            if first.x.abs() > 1e-9
                || first.y.abs() > 1e-9
                || first.z.abs() > 1e-9
                || first.yaw.abs() > 1e-9
            {
                return Err(Error::invalid(
                    "normalized trajectory must start at the origin",
                ));
            }
        }
        Ok(Self { poses, frame, meta })
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn xz_points(&self) -> Vec<[f64; 2]> {
        self.poses.iter().map(|p| [p.x, p.z]).collect()
    }

    /// Total xz arc length, meters. Uses the same per-segment arithmetic as
    /// the resampler so station arithmetic is consistent to the last ulp.
    pub fn arc_length_xz(&self) -> f64 {
        self.poses
            .windows(2)
            .map(|w| (w[1].x - w[0].x).hypot(w[1].z - w[0].z))
            .sum()
    }

    /// Sum of absolute direction changes along the xz polyline, radians.
    /// Zero-length steps are skipped.
    pub fn turning_angle_sum(&self) -> f64 {
        turning_sum(&point_list(&self.poses))
    }

    /// JSONL: a header line `{frame, resampled_to, smoothed}` followed by
    /// one `{x, y, z, yaw}` object per pose.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_jsonl_to(&mut w)
    }

    pub fn write_jsonl_to(&self, w: &mut dyn Write) -> Result<()> {
        let header = JsonlHeader {
            frame: self.frame,
            resampled_to: self.meta.resampled_to,
            smoothed: self.meta.smoothed,
        };
        writeln!(w, "{}", serde_json::to_string(&header)?)?;
        for pose in &self.poses {
            writeln!(w, "{}", serde_json::to_string(pose)?)?;
        }
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut lines = reader.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::format("empty trajectory file"))??;
        let header: JsonlHeader = serde_json::from_str(&header_line)?;
        let mut poses = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            poses.push(serde_json::from_str(&line)?);
        }
        Trajectory::new(
            poses,
            header.frame,
            TrajectoryMeta {
                resampled_to: header.resampled_to,
                smoothed: header.smoothed,
            },
        )
    }
}

#[derive(Serialize, Deserialize)]
struct JsonlHeader {
    frame: Frame,
    resampled_to: Option<usize>,
    smoothed: bool,
}

#[derive(Clone, Copy)]
struct P3 {
    x: f64,
    y: f64,
    z: f64,
}

fn point_list(poses: &[Waypoint]) -> Vec<P3> {
    poses
        .iter()
        .map(|p| P3 {
            x: p.x,
            y: p.y,
            z: p.z,
        })
        .collect()
}

fn turning_sum(points: &[P3]) -> f64 {
    let mut headings = Vec::new();
    for w in points.windows(2) {
        let dx = w[1].x - w[0].x;
        let dz = w[1].z - w[0].z;
        if dx.hypot(dz) > 1e-12 {
            headings.push(dx.atan2(dz));
        }
    }
    headings
        .windows(2)
        .map(|h| wrap_angle(h[1] - h[0]).abs())
        .sum()
}

/// Yaw per point from the direction to the successor; duplicates carry the
/// previous yaw and the final pose copies its predecessor.
fn yaws_from_directions(points: &[P3], seed_yaw: f64) -> Vec<f64> {
    let mut yaws = Vec::with_capacity(points.len());
    let mut prev = wrap_angle(seed_yaw);
    for i in 0..points.len().saturating_sub(1) {
        let dx = points[i + 1].x - points[i].x;
        let dz = points[i + 1].z - points[i].z;
        if dx.hypot(dz) > 1e-12 {
            prev = wrap_angle(dx.atan2(dz));
        }
        yaws.push(prev);
    }
    yaws.push(prev);
    yaws
}

fn assemble(
    points: Vec<P3>,
    seed_yaw: f64,
    frame: Frame,
    meta: TrajectoryMeta,
) -> Result<Trajectory> {
    let yaws = yaws_from_directions(&points, seed_yaw);
    let poses = points
        .into_iter()
        .zip(yaws)
        .map(|(p, yaw)| Waypoint {
            x: p.x,
            y: p.y,
            z: p.z,
            yaw,
        })
        .collect();
    Trajectory::new(poses, frame, meta)
}

/// Lift a grid path to 3D agent-frame waypoints.
///
/// Waypoint (x, z) is the cell center; y is the cell's median ground height
/// where available, else 0.
pub fn lift_path(
    path: &GridPath,
    grid: &OccupancyGrid,
    ground: Option<&GroundHeightMap>,
) -> Result<Trajectory> {
    if path.cells.len() < 2 {
        return Err(Error::domain("path must have at least 2 cells to lift"));
    }
    let points: Vec<P3> = path
        .cells
        .iter()
        .map(|&cell| {
            let (x, z) = grid.center_of(cell);
            let y = ground.and_then(|g| g.get(cell)).unwrap_or(0.0);
            P3 { x, y, z }
        })
        .collect();
    assemble(points, 0.0, Frame::AgentRaw, TrajectoryMeta::default())
}

/// Rigidly move a trajectory so the first pose is (0, 0, 0) with yaw 0.
///
/// Rotation is about the up axis through the first pose, so pairwise
/// distances are preserved exactly up to rounding.
pub fn normalize_origin(traj: &Trajectory) -> Trajectory {
    normalize_origin_with(traj, true)
}

/// `rotate = false` only translates; the frame is tagged normalized only if
/// the first yaw already was zero.
pub fn normalize_origin_with(traj: &Trajectory, rotate: bool) -> Trajectory {
    let p0 = traj.poses[0];
    let yaw0 = if rotate { p0.yaw } else { 0.0 };
    let (sin0, cos0) = yaw0.sin_cos();
    let mut poses: Vec<Waypoint> = traj
        .poses
        .iter()
        .map(|p| {
            let dx = p.x - p0.x;
            let dy = p.y - p0.y;
            let dz = p.z - p0.z;
            Waypoint {
                x: dx * cos0 - dz * sin0,
                y: dy,
                z: dx * sin0 + dz * cos0,
                yaw: wrap_angle(p.yaw - yaw0),
            }
        })
        .collect();
    poses[0] = Waypoint {
        x: 0.0,
        y: 0.0,
        z: 0.0,
        yaw: wrap_angle(p0.yaw - yaw0),
    };
    let frame = if rotate || p0.yaw == 0.0 {
        Frame::Normalized
    } else {
        traj.frame
    };
    Trajectory {
        poses,
        frame,
        meta: traj.meta,
    }
}

/// Resample to `n` poses at arc-length-uniform stations along the xz path.
pub fn resample(traj: &Trajectory, n: usize) -> Result<Trajectory> {
    if n < 2 {
        return Err(Error::domain("resample target length must be >= 2"));
    }
    let total = traj.arc_length_xz();
    // Fraction first: the final station must equal `total` exactly.
    let stations: Vec<f64> = (0..n)
        .map(|i| total * (i as f64 / (n - 1) as f64))
        .collect();
    let mut out = resample_at_stations(traj, &stations)?;
    out.meta.resampled_to = Some(n);
    Ok(out)
}

/// Resample at explicit arc-length stations (meters along the xz polyline).
///
/// Stations at 0 and at the total length reproduce the endpoints exactly.
pub fn resample_at_stations(traj: &Trajectory, stations: &[f64]) -> Result<Trajectory> {
    if stations.len() < 2 {
        return Err(Error::domain("need at least 2 stations"));
    }
    let pts = point_list(&traj.poses);
    let mut cumulative = Vec::with_capacity(pts.len());
    cumulative.push(0.0);
    for w in pts.windows(2) {
        let step = (w[1].x - w[0].x).hypot(w[1].z - w[0].z);
        cumulative.push(cumulative.last().unwrap() + step);
    }
    let total = *cumulative.last().unwrap();

    let mut out = Vec::with_capacity(stations.len());
    for &s in stations {
        if s <= 0.0 {
            out.push(pts[0]);
            continue;
        }
        if s >= total {
            out.push(*pts.last().unwrap());
            continue;
        }
        // Last segment start with cumulative <= s.
        let seg = match cumulative.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i.min(pts.len() - 2),
            Err(i) => i - 1,
        };
        let seg_len = cumulative[seg + 1] - cumulative[seg];
        let t = if seg_len > 0.0 {
            (s - cumulative[seg]) / seg_len
        } else {
            0.0
        };
        let (a, b) = (pts[seg], pts[seg + 1]);
        out.push(P3 {
            x: a.x + t * (b.x - a.x),
            y: a.y + t * (b.y - a.y),
            z: a.z + t * (b.z - a.z),
        });
    }
    assemble(out, traj.poses[0].yaw, traj.frame, traj.meta)
}

/// Two corner-rounding passes over the interior waypoints, endpoints pinned.
///
/// Each interior vertex moves halfway toward the midpoint of its neighbors
/// (the chord of the classic corner cut). When a grid is supplied a vertex
/// only moves if both adjacent segments stay clear of Occupied cells, so
/// smoothing never introduces a collision the input did not already have. A
/// whole pass is reverted if it would increase the total turning angle.
pub fn smooth(traj: &Trajectory, grid: Option<&OccupancyGrid>) -> Trajectory {
    const ITERATIONS: usize = 2;
    let mut points = point_list(&traj.poses);
    if points.len() >= 3 {
        for _ in 0..ITERATIONS {
            let before = points.clone();
            let turning_before = turning_sum(&points);
            for i in 1..points.len() - 1 {
                let (prev, cur, next) = (points[i - 1], points[i], points[i + 1]);
                let candidate = P3 {
                    x: 0.25 * prev.x + 0.5 * cur.x + 0.25 * next.x,
                    y: 0.25 * prev.y + 0.5 * cur.y + 0.25 * next.y,
                    z: 0.25 * prev.z + 0.5 * cur.z + 0.25 * next.z,
                };
                if let Some(grid) = grid {
                    let clear = !grid
                        .segment_crosses_occupied((prev.x, prev.z), (candidate.x, candidate.z))
                        && !grid
                            .segment_crosses_occupied((candidate.x, candidate.z), (next.x, next.z));
                    if !clear {
                        continue;
                    }
                }
                points[i] = candidate;
            }
            if turning_sum(&points) > turning_before + 1e-12 {
                points = before;
            }
        }
    }
    let meta = TrajectoryMeta {
        smoothed: true,
        ..traj.meta
    };
    assemble(points, traj.poses[0].yaw, traj.frame, meta)
        .expect("smoothing preserves pose count and finiteness")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::occupancy::{Cell, CellState};
    use crate::planner::GridPath;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn traj_from_xz(points: &[(f64, f64)]) -> Trajectory {
        let pts: Vec<P3> = points.iter().map(|&(x, z)| P3 { x, y: 0.0, z }).collect();
        assemble(pts, 0.0, Frame::AgentRaw, TrajectoryMeta::default()).unwrap()
    }

    fn random_traj(rng: &mut impl Rng, n: usize) -> Trajectory {
        let mut x = 0.0;
        let mut z = 0.0;
        let mut pts = Vec::new();
        for _ in 0..n {
            pts.push(P3 {
                x,
                y: rng.gen_range(-0.2..0.2),
                z,
            });
            x += rng.gen_range(-0.5..0.5);
            z += rng.gen_range(0.05..0.5);
        }
        assemble(pts, 0.0, Frame::AgentRaw, TrajectoryMeta::default()).unwrap()
    }

    #[test]
    fn lift_straight_column() {
        let mut grid = OccupancyGrid::standard();
        grid.set_target_cell(Cell::new(25, 20));
        let cells: Vec<Cell> = (0..=20).map(|r| Cell::new(25, r)).collect();
        let path = GridPath { cells, cost: 20.0 };
        let traj = lift_path(&path, &grid, None).unwrap();
        assert_eq!(traj.len(), 21);
        for p in &traj.poses {
            assert!((p.x - 0.05).abs() < 1e-12);
            assert_eq!(p.y, 0.0);
            assert_eq!(p.yaw, 0.0);
        }
        let last = traj.poses.last().unwrap();
        assert!((last.z - 2.05).abs() < 1e-12);
    }

    #[test]
    fn yaw_examples() {
        // Pure +X step.
        let t = traj_from_xz(&[(0.0, 0.0), (1.0, 0.0)]);
        assert!((t.poses[0].yaw - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        // Equal +X, +Z diagonal.
        let t = traj_from_xz(&[(0.0, 0.0), (1.0, 1.0)]);
        assert!((t.poses[0].yaw - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        // Last pose copies the previous yaw.
        let t = traj_from_xz(&[(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]);
        assert_eq!(t.poses[1].yaw, t.poses[2].yaw);
    }

    #[test]
    fn yaw_reconstruction_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let traj = random_traj(&mut rng, 12);
            for i in 0..traj.len() - 1 {
                let dx = traj.poses[i + 1].x - traj.poses[i].x;
                let dz = traj.poses[i + 1].z - traj.poses[i].z;
                let len = dx.hypot(dz);
                if len < 1e-12 {
                    continue;
                }
                let (s, c) = traj.poses[i].yaw.sin_cos();
                assert!((s - dx / len).abs() < 1e-9);
                assert!((c - dz / len).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn normalize_is_idempotent_and_isometric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let traj = random_traj(&mut rng, 10);
            let norm = normalize_origin(&traj);
            assert_eq!(norm.frame, Frame::Normalized);
            assert_eq!(norm.poses[0].x, 0.0);
            assert_eq!(norm.poses[0].yaw, 0.0);
            let again = normalize_origin(&norm);
            for (a, b) in norm.poses.iter().zip(&again.poses) {
                assert!((a.x - b.x).abs() < 1e-12);
                assert!((a.z - b.z).abs() < 1e-12);
                assert!((a.yaw - b.yaw).abs() < 1e-12);
            }
            // Pairwise distance matrix preserved.
            for i in 0..traj.len() {
                for j in 0..traj.len() {
                    let d_orig = dist3(&traj.poses[i], &traj.poses[j]);
                    let d_norm = dist3(&norm.poses[i], &norm.poses[j]);
                    assert!((d_orig - d_norm).abs() < 1e-9);
                }
            }
        }
    }

    fn dist3(a: &Waypoint, b: &Waypoint) -> f64 {
        ((a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2)).sqrt()
    }

    #[test]
    fn normalize_translation_only_shifts() {
        let traj = traj_from_xz(&[(1.0, 2.0), (1.0, 3.0), (1.0, 4.0)]);
        // Heading is +Z so yaw0 = 0: translation-only equals full normalize.
        let norm = normalize_origin_with(&traj, false);
        assert_eq!(norm.frame, Frame::Normalized);
        assert_eq!((norm.poses[1].x, norm.poses[1].z), (0.0, 1.0));
        assert_eq!((norm.poses[2].x, norm.poses[2].z), (0.0, 2.0));
    }

    #[test]
    fn resample_uniform_stations() {
        let traj = traj_from_xz(&[(0.0, 0.0), (0.0, 2.0)]);
        let out = resample(&traj, 5).unwrap();
        for (i, p) in out.poses.iter().enumerate() {
            assert!((p.z - 0.5 * i as f64).abs() < 1e-12);
            assert_eq!(p.x, 0.0);
        }
        assert_eq!(out.meta.resampled_to, Some(5));
    }

    #[test]
    fn resample_at_original_stations_reproduces_waypoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let traj = random_traj(&mut rng, 9);
            let mut stations = vec![0.0];
            for w in traj.poses.windows(2) {
                let step = (w[1].x - w[0].x).hypot(w[1].z - w[0].z);
                stations.push(stations.last().unwrap() + step);
            }
            let out = resample_at_stations(&traj, &stations).unwrap();
            for (a, b) in out.poses.iter().zip(&traj.poses) {
                assert!((a.x - b.x).abs() < 1e-9);
                assert!((a.y - b.y).abs() < 1e-9);
                assert!((a.z - b.z).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn resample_preserves_endpoints_and_length() {
        // Corner-free path: arc length is exactly invariant.
        let straight = traj_from_xz(&[(0.0, 0.0), (0.0, 0.7), (0.0, 1.9), (0.0, 3.0)]);
        let out = resample(&straight, 17).unwrap();
        assert!((out.arc_length_xz() - straight.arc_length_xz()).abs() < 1e-9);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let traj = random_traj(&mut rng, 6);
            let out = resample(&traj, 60).unwrap();
            assert_eq!(out.poses[0].x, traj.poses[0].x);
            assert_eq!(out.poses.last().unwrap().z, traj.poses.last().unwrap().z);
            // Stations cut corners, so the length can only shrink, and with
            // dense sampling only slightly.
            let (a, b) = (out.arc_length_xz(), traj.arc_length_xz());
            assert!(a <= b + 1e-9);
            assert!(a >= b * 0.95, "resampled length {a} vs {b}");
        }
        assert!(resample(&traj_from_xz(&[(0.0, 0.0), (0.0, 1.0)]), 1).is_err());
    }

    #[test]
    fn smooth_keeps_collinear_geometry() {
        let traj = traj_from_xz(&[(0.0, 0.0), (0.0, 1.0), (0.0, 2.0), (0.0, 3.0)]);
        let out = smooth(&traj, None);
        for (a, b) in out.poses.iter().zip(&traj.poses) {
            assert!((a.x - b.x).abs() < 1e-9);
            assert!((a.z - b.z).abs() < 1e-9);
        }
        assert!(out.meta.smoothed);
    }

    #[test]
    fn smooth_reduces_single_corner_turning() {
        let traj = traj_from_xz(&[(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]);
        let before = traj.turning_angle_sum();
        let out = smooth(&traj, None);
        let after = out.turning_angle_sum();
        assert!(
            after < before - 1e-6,
            "turning {before} -> {after} did not strictly decrease"
        );
        // Endpoints pinned.
        assert_eq!(out.poses[0].x, 0.0);
        assert_eq!(out.poses.last().unwrap().x, 1.0);
    }

    #[test]
    fn smooth_never_increases_turning_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let traj = random_traj(&mut rng, 15);
            let out = smooth(&traj, None);
            assert!(out.turning_angle_sum() <= traj.turning_angle_sum() + 1e-9);
            // Endpoint positions are pinned (yaw is recomputed from the new
            // directions, so it may legitimately change).
            let (a, b) = (&out.poses[0], &traj.poses[0]);
            assert_eq!((a.x, a.y, a.z), (b.x, b.y, b.z));
            let (a, b) = (out.poses.last().unwrap(), traj.poses.last().unwrap());
            assert_eq!((a.x, a.y, a.z), (b.x, b.y, b.z));
        }
    }

    #[test]
    fn smooth_respects_obstacles() {
        let mut grid = OccupancyGrid::standard();
        for row in 0..50 {
            for col in 0..50 {
                grid.set_state(Cell::new(col, row), CellState::Free);
            }
        }
        // Obstacle hugging the inside of a corner.
        grid.set_state(Cell::new(26, 10), CellState::Occupied);
        let traj = traj_from_xz(&[(0.05, 0.05), (0.05, 1.45), (1.45, 1.45)]);
        assert!(!grid.segment_crosses_occupied((0.05, 0.05), (0.05, 1.45)));
        let out = smooth(&traj, Some(&grid));
        for w in out.poses.windows(2) {
            assert!(
                !grid.segment_crosses_occupied((w[0].x, w[0].z), (w[1].x, w[1].z)),
                "smoothed segment crosses the obstacle"
            );
        }
    }

    #[test]
    fn jsonl_roundtrip() {
        let mut traj = traj_from_xz(&[(0.0, 0.0), (0.3, 1.0), (0.1, 2.0)]);
        traj.meta.resampled_to = Some(3);
        traj.meta.smoothed = true;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.jsonl");
        traj.write_jsonl(&path).unwrap();
        let back = Trajectory::read_jsonl(&path).unwrap();
        assert_eq!(back, traj);
    }

    #[test]
    fn rejects_short_trajectory() {
        let poses = vec![Waypoint {
            x: 0.0,
            y: 0.0,
            z: 0.0,
            yaw: 0.0,
        }];
        assert!(Trajectory::new(poses, Frame::AgentRaw, TrajectoryMeta::default()).is_err());
    }
}
