//! Agent-centric local occupancy grid built from a segmented point cloud.
//!
//! The standard grid is 50×50 cells at 0.1 m over X ∈ [−2.5, 2.5] m and
//! Z ∈ [0, 5] m in the agent frame (agent at the origin facing +Z). Points
//! with normals close to the up axis are ground; steep or inconsistent
//! normals are obstacles. Targets beyond the perception range are anchored
//! to the nearest grid edge along Z.

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::io::netpbm;
use crate::normals::normal_inconsistency;
use crate::pose::Pose;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const STANDARD_COLS: usize = 50;
pub const STANDARD_ROWS: usize = 50;
pub const STANDARD_RESOLUTION_M: f64 = 0.1;
pub const STANDARD_X_MIN_M: f64 = -2.5;
pub const STANDARD_Z_MIN_M: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellState {
    Free,
    Occupied,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "[usize; 2]", from = "[usize; 2]")]
pub struct Cell {
    pub col: usize,
    pub row: usize,
}

impl Cell {
    pub fn new(col: usize, row: usize) -> Self {
        Self { col, row }
    }
}

impl From<[usize; 2]> for Cell {
    fn from(v: [usize; 2]) -> Self {
        Self {
            col: v[0],
            row: v[1],
        }
    }
}

impl From<Cell> for [usize; 2] {
    fn from(c: Cell) -> Self {
        [c.col, c.row]
    }
}

/// Disjoint ground/obstacle index sets into a point cloud. Points matching
/// neither rule stay unclassified.
#[derive(Debug, Clone, Default)]
pub struct Segmentation {
    pub ground: Vec<u32>,
    pub obstacle: Vec<u32>,
}

/// Ground/obstacle classification thresholds.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SegmentParams {
    /// Max angle from up (degrees) for ground points.
    pub theta_ground_deg: f64,
    /// Obstacles are steeper than 90° − margin from up.
    pub theta_wall_margin_deg: f64,
    /// Neighborhoods whose mean normal deviation exceeds this are obstacles.
    pub inconsistency_deg: f64,
    /// Neighbor count for the inconsistency statistic.
    pub inconsistency_neighbors: usize,
    /// Disable to classify on the angle rule alone.
    pub check_inconsistency: bool,
    /// Spatial hash cell for the neighborhood lookups, meters.
    pub hash_cell_m: f64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            theta_ground_deg: 25.0,
            theta_wall_margin_deg: 25.0,
            inconsistency_deg: 30.0,
            inconsistency_neighbors: 16,
            check_inconsistency: true,
            hash_cell_m: crate::normals::DEFAULT_HASH_CELL_M,
        }
    }
}

impl SegmentParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_ground_deg > 0.0 && self.theta_ground_deg < 90.0) {
            return Err(Error::invalid("theta_ground must be in (0, 90) degrees"));
        }
        if !(self.theta_wall_margin_deg > 0.0 && self.theta_wall_margin_deg < 90.0) {
            return Err(Error::invalid("wall margin must be in (0, 90) degrees"));
        }
        if self.theta_ground_deg + self.theta_wall_margin_deg > 90.0 {
            return Err(Error::invalid(
                "theta_ground + wall margin must not exceed 90 degrees (classes would overlap)",
            ));
        }
        if !(self.hash_cell_m > 0.0) {
            return Err(Error::invalid("hash cell must be positive"));
        }
        Ok(())
    }
}

/// Classify cloud points as ground or obstacle from their normals.
pub fn segment_cloud(
    cloud: &PointCloud,
    up: &Vector3<f64>,
    params: &SegmentParams,
) -> Result<Segmentation> {
    params.validate()?;
    let normals = cloud
        .normals
        .as_ref()
        .ok_or_else(|| Error::domain("segmentation needs normals"))?;
    if (up.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("up vector must be unit length"));
    }
    let inconsistency =
        if params.check_inconsistency && cloud.len() > params.inconsistency_neighbors {
            Some(normal_inconsistency(
                cloud,
                params.inconsistency_neighbors,
                params.hash_cell_m,
            )?)
        } else {
            None
        };
    let theta_ground = params.theta_ground_deg.to_radians();
    let theta_obstacle = (90.0 - params.theta_wall_margin_deg).to_radians();
    let inconsistency_limit = params.inconsistency_deg.to_radians();

    let mut seg = Segmentation::default();
    for (i, n) in normals.iter().enumerate() {
        let angle = n.dot(up).clamp(-1.0, 1.0).acos();
        let inconsistent = inconsistency
            .as_ref()
            .map(|dev| dev[i] > inconsistency_limit)
            .unwrap_or(false);
        if inconsistent || angle > theta_obstacle {
            seg.obstacle.push(i as u32);
        } else if angle <= theta_ground {
            seg.ground.push(i as u32);
        }
    }
    Ok(seg)
}

/// Parameters for projecting the segmented cloud into the grid.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridBuildParams {
    /// Obstacle points count only within this height band above local
    /// ground, meters.
    pub obstacle_band_min_m: f64,
    pub obstacle_band_max_m: f64,
    /// Assumed ground depth below the agent origin (agent-frame +y) when no
    /// ground points are observed anywhere.
    pub default_ground_y_m: f64,
}

impl Default for GridBuildParams {
    fn default() -> Self {
        Self {
            obstacle_band_min_m: 0.1,
            obstacle_band_max_m: 2.0,
            default_ground_y_m: 1.4,
        }
    }
}

impl GridBuildParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.obstacle_band_min_m < self.obstacle_band_max_m) {
            return Err(Error::invalid("obstacle band must be a non-empty interval"));
        }
        Ok(())
    }
}

/// Per-cell median ground height (agent-frame y, down-positive).
#[derive(Debug, Clone)]
pub struct GroundHeightMap {
    cols: usize,
    values: Vec<Option<f64>>,
}

impl GroundHeightMap {
    pub fn get(&self, cell: Cell) -> Option<f64> {
        self.values[cell.row * self.cols + cell.col]
    }
}

/// Free/Occupied/Unknown lattice over the agent-frame X–Z plane.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    cols: usize,
    rows: usize,
    resolution: f64,
    x_min: f64,
    z_min: f64,
    cells: Vec<CellState>,
    agent_cell: Cell,
    target_cell: Cell,
    /// Agent-frame target position before anchoring.
    target_world: Vector3<f64>,
}

impl OccupancyGrid {
    /// All-Unknown grid with the given shape. The agent sits at the center
    /// column of the nearest row and its cell is forced Free.
    pub fn new(cols: usize, rows: usize, resolution: f64, x_min: f64, z_min: f64) -> Result<Self> {
        if cols == 0 || rows == 0 {
            return Err(Error::invalid("grid must have at least one cell"));
        }
        if !(resolution > 0.0) {
            return Err(Error::invalid("resolution must be positive"));
        }
        let agent_cell = Cell::new(cols / 2, 0);
        let mut grid = Self {
            cols,
            rows,
            resolution,
            x_min,
            z_min,
            cells: vec![CellState::Unknown; cols * rows],
            agent_cell,
            target_cell: agent_cell,
            target_world: Vector3::zeros(),
        };
        grid.set_state(agent_cell, CellState::Free);
        Ok(grid)
    }

    /// The paper-range grid: 50×50 cells, 0.1 m/cell, X ∈ [−2.5, 2.5],
    /// Z ∈ [0, 5].
    pub fn standard() -> Self {
        Self::new(
            STANDARD_COLS,
            STANDARD_ROWS,
            STANDARD_RESOLUTION_M,
            STANDARD_X_MIN_M,
            STANDARD_Z_MIN_M,
        )
        .expect("standard constants are valid")
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.x_min, self.x_min + self.cols as f64 * self.resolution)
    }

    pub fn z_range(&self) -> (f64, f64) {
        (self.z_min, self.z_min + self.rows as f64 * self.resolution)
    }

    pub fn agent_cell(&self) -> Cell {
        self.agent_cell
    }

    pub fn target_cell(&self) -> Cell {
        self.target_cell
    }

    pub fn target_world(&self) -> Vector3<f64> {
        self.target_world
    }

    pub fn state(&self, cell: Cell) -> CellState {
        self.cells[cell.row * self.cols + cell.col]
    }

    /// State lookup tolerating out-of-grid coordinates (treated as Unknown).
    pub fn state_or_unknown(&self, col: i64, row: i64) -> CellState {
        if col < 0 || row < 0 || col >= self.cols as i64 || row >= self.rows as i64 {
            CellState::Unknown
        } else {
            self.state(Cell::new(col as usize, row as usize))
        }
    }

    pub fn set_state(&mut self, cell: Cell, state: CellState) {
        self.cells[cell.row * self.cols + cell.col] = state;
    }

    /// Move the agent; its cell is forced Free.
    pub fn set_agent_cell(&mut self, cell: Cell) {
        self.agent_cell = cell;
        self.set_state(cell, CellState::Free);
    }

    pub fn set_target_cell(&mut self, cell: Cell) {
        self.target_cell = cell;
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.col < self.cols && cell.row < self.rows
    }

    /// Cell containing an agent-frame (x, z) point, if inside the closed
    /// perception range. The exact upper boundary maps into the last cell.
    pub fn cell_of(&self, x: f64, z: f64) -> Option<Cell> {
        let col = self.axis_cell(x - self.x_min, self.cols)?;
        let row = self.axis_cell(z - self.z_min, self.rows)?;
        Some(Cell::new(col, row))
    }

    /// Floor-rule cell index along one axis with decimal-boundary repair, so
    /// e.g. rel = 2.5 at 0.1 m resolution lands in cell 25 even though
    /// 2.5/0.1 rounds below 25 in floating point.
    fn axis_cell(&self, rel: f64, count: usize) -> Option<usize> {
        let span = count as f64 * self.resolution;
        if !(0.0..=span).contains(&rel) {
            return None;
        }
        let mut c = (rel / self.resolution).floor() as i64;
        while (c + 1) as f64 * self.resolution <= rel {
            c += 1;
        }
        while c > 0 && c as f64 * self.resolution > rel {
            c -= 1;
        }
        Some((c.max(0) as usize).min(count - 1))
    }

    /// Agent-frame (x, z) of a cell center.
    pub fn center_of(&self, cell: Cell) -> (f64, f64) {
        (
            self.x_min + (cell.col as f64 + 0.5) * self.resolution,
            self.z_min + (cell.row as f64 + 0.5) * self.resolution,
        )
    }

    /// Anchor a (possibly out-of-range) agent-frame target into the grid.
    ///
    /// Out-of-range coordinates clamp to the nearest edge (the far Z row for
    /// targets beyond the perception range). The resulting cell is coerced
    /// Free; if it is Occupied, the nearest Free cell substitutes (ties:
    /// smaller row, then smaller col).
    pub fn anchor_target(&mut self, target_agent: &Vector3<f64>) -> Cell {
        self.target_world = *target_agent;
        let (x_min, x_max) = self.x_range();
        let (z_min, z_max) = self.z_range();
        let x = target_agent.x.clamp(x_min, x_max);
        let z = target_agent.z.clamp(z_min, z_max);
        let cell = self
            .cell_of(x, z)
            .expect("clamped coordinates are always inside");
        let anchored = if self.state(cell) == CellState::Occupied {
            self.nearest_free_cell(cell).unwrap_or(cell)
        } else {
            cell
        };
        self.set_state(anchored, CellState::Free);
        self.target_cell = anchored;
        anchored
    }

    fn nearest_free_cell(&self, from: Cell) -> Option<Cell> {
        let mut best: Option<(u64, Cell)> = None;
        for row in 0..self.rows {
            for col in 0..self.cols {
                let cell = Cell::new(col, row);
                if self.state(cell) != CellState::Free {
                    continue;
                }
                let dc = cell.col as i64 - from.col as i64;
                let dr = cell.row as i64 - from.row as i64;
                let d2 = (dc * dc + dr * dr) as u64;
                // Row-major iteration makes "first found" the smaller row,
                // then smaller col, which is the documented tie rule.
                if best.map(|(b, _)| d2 < b).unwrap_or(true) {
                    best = Some((d2, cell));
                }
            }
        }
        best.map(|(_, c)| c)
    }

    /// Cells a segment passes through (supercover: boundary and corner
    /// touches count on both sides). Endpoints are agent-frame (x, z);
    /// portions outside the grid are ignored.
    pub fn segment_cells(&self, a: (f64, f64), b: (f64, f64)) -> Vec<Cell> {
        let inv = 1.0 / self.resolution;
        let ax = (a.0 - self.x_min) * inv;
        let az = (a.1 - self.z_min) * inv;
        let bx = (b.0 - self.x_min) * inv;
        let bz = (b.1 - self.z_min) * inv;
        let dx = bx - ax;
        let dz = bz - az;

        let mut ts = vec![0.0f64, 1.0];
        for (p0, d) in [(ax, dx), (az, dz)] {
            if d.abs() < 1e-15 {
                continue;
            }
            let (lo, hi) = if d > 0.0 { (p0, p0 + d) } else { (p0 + d, p0) };
            let mut g = lo.ceil();
            while g <= hi {
                let t = (g - p0) / d;
                if (0.0..=1.0).contains(&t) {
                    ts.push(t);
                }
                g += 1.0;
            }
        }
        ts.sort_unstable_by(f64::total_cmp);
        ts.dedup_by(|x, y| (*x - *y).abs() < 1e-12);

        let mut cells: Vec<(usize, usize)> = Vec::new();
        let mut push = |cx: f64, cz: f64| {
            if cx >= 0.0 && cz >= 0.0 {
                let (c, r) = (cx as usize, cz as usize);
                if c < self.cols && r < self.rows {
                    cells.push((r, c));
                }
            }
        };
        for pair in ts.windows(2) {
            let tm = 0.5 * (pair[0] + pair[1]);
            push((ax + tm * dx).floor(), (az + tm * dz).floor());
        }
        // Corner hits: include all four adjacent cells so diagonals cannot
        // slip between two occupied corners.
        for &t in &ts {
            let px = ax + t * dx;
            let pz = az + t * dz;
            if (px - px.round()).abs() < 1e-9 && (pz - pz.round()).abs() < 1e-9 {
                let gx = px.round() as i64;
                let gz = pz.round() as i64;
                for (ox, oz) in [(-1, -1), (0, -1), (-1, 0), (0, 0)] {
                    let (cx, cz) = (gx + ox, gz + oz);
                    if cx >= 0 && cz >= 0 {
                        push(cx as f64, cz as f64);
                    }
                }
            }
        }
        cells.sort_unstable();
        cells.dedup();
        cells.into_iter().map(|(r, c)| Cell::new(c, r)).collect()
    }

    pub fn segment_crosses_occupied(&self, a: (f64, f64), b: (f64, f64)) -> bool {
        self.segment_cells(a, b)
            .iter()
            .any(|&c| self.state(c) == CellState::Occupied)
    }

    /// Grid PGM bytes: Free=0, Unknown=128, Occupied=255.
    pub fn write_files(&self, pgm_path: &Path, json_path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self
            .cells
            .iter()
            .map(|s| match s {
                CellState::Free => 0u8,
                CellState::Unknown => 128,
                CellState::Occupied => 255,
            })
            .collect();
        netpbm::write_pgm(pgm_path, self.cols, self.rows, &bytes)?;
        let sidecar = GridSidecar {
            resolution: self.resolution,
            x_range: [self.x_range().0, self.x_range().1],
            z_range: [self.z_range().0, self.z_range().1],
            agent_cell: self.agent_cell,
            target_cell: self.target_cell,
            target_world: self.target_world.into(),
        };
        let file = std::io::BufWriter::new(std::fs::File::create(json_path)?);
        serde_json::to_writer_pretty(file, &sidecar)?;
        Ok(())
    }

    pub fn read_files(pgm_path: &Path, json_path: &Path) -> Result<Self> {
        let (cols, rows, bytes) = netpbm::read_pgm(pgm_path)?;
        let file = std::io::BufReader::new(std::fs::File::open(json_path)?);
        let sidecar: GridSidecar = serde_json::from_reader(file)?;
        let cells = bytes
            .iter()
            .map(|b| match b {
                0 => Ok(CellState::Free),
                128 => Ok(CellState::Unknown),
                255 => Ok(CellState::Occupied),
                other => Err(Error::format(format!("bad grid pgm byte {other}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let grid = Self {
            cols,
            rows,
            resolution: sidecar.resolution,
            x_min: sidecar.x_range[0],
            z_min: sidecar.z_range[0],
            cells,
            agent_cell: sidecar.agent_cell,
            target_cell: sidecar.target_cell,
            target_world: Vector3::from(sidecar.target_world),
        };
        if !grid.contains(grid.agent_cell) || !grid.contains(grid.target_cell) {
            return Err(Error::format("sidecar cells outside grid"));
        }
        Ok(grid)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct GridSidecar {
    resolution: f64,
    x_range: [f64; 2],
    z_range: [f64; 2],
    agent_cell: Cell,
    target_cell: Cell,
    target_world: [f64; 3],
}

/// Project a segmented cloud into a standard grid around `agent_pose`.
///
/// Points transform into the agent frame; obstacle points within the height
/// band above local ground mark cells Occupied, ground points mark the rest
/// Free, untouched cells stay Unknown. Occupied evidence beats Free, so the
/// result is independent of point order. The target cell is initialized by
/// clamping but not anchored; call [`OccupancyGrid::anchor_target`] next.
pub fn build_grid(
    cloud: &PointCloud,
    seg: &Segmentation,
    agent_pose: &Pose,
    target_world: &Vector3<f64>,
    params: &GridBuildParams,
) -> Result<OccupancyGrid> {
    build_grid_with_heights(cloud, seg, agent_pose, target_world, params).map(|(g, _)| g)
}

/// [`build_grid`] plus the per-cell median ground heights used to lift grid
/// paths back to 3D.
pub fn build_grid_with_heights(
    cloud: &PointCloud,
    seg: &Segmentation,
    agent_pose: &Pose,
    target_world: &Vector3<f64>,
    params: &GridBuildParams,
) -> Result<(OccupancyGrid, GroundHeightMap)> {
    params.validate()?;
    let mut grid = OccupancyGrid::standard();
    let to_agent = agent_pose.inverse();

    let agent_points: Vec<Vector3<f64>> = cloud
        .points
        .iter()
        .map(|p| to_agent.transform_point(p))
        .collect();

    // Median ground height per cell, plus a global fallback.
    let mut cell_ground: Vec<Vec<f64>> = vec![Vec::new(); grid.cols * grid.rows];
    let mut all_ground: Vec<f64> = Vec::with_capacity(seg.ground.len());
    for &i in &seg.ground {
        let p = &agent_points[i as usize];
        all_ground.push(p.y);
        if let Some(cell) = grid.cell_of(p.x, p.z) {
            cell_ground[cell.row * grid.cols + cell.col].push(p.y);
        }
    }
    let global_ground = median(&mut all_ground);
    let heights: Vec<Option<f64>> = cell_ground.iter_mut().map(|ys| median(ys)).collect();
    let ground_map = GroundHeightMap {
        cols: grid.cols,
        values: heights,
    };

    for &i in &seg.obstacle {
        let p = &agent_points[i as usize];
        let Some(cell) = grid.cell_of(p.x, p.z) else {
            continue;
        };
        let ground_y = ground_map
            .get(cell)
            .or(global_ground)
            .unwrap_or(params.default_ground_y_m);
        // Agent frame is y-down: height above ground is ground_y − y.
        let height = ground_y - p.y;
        if height >= params.obstacle_band_min_m && height <= params.obstacle_band_max_m {
            grid.set_state(cell, CellState::Occupied);
        }
    }
    for &i in &seg.ground {
        let p = &agent_points[i as usize];
        if let Some(cell) = grid.cell_of(p.x, p.z) {
            if grid.state(cell) != CellState::Occupied {
                grid.set_state(cell, CellState::Free);
            }
        }
    }
    let agent = grid.agent_cell();
    grid.set_state(agent, CellState::Free);
    let target_agent = to_agent.transform_point(target_world);
    grid.target_world = target_agent;
    // Clamped, un-anchored initialization keeps the invariant that the
    // target cell is inside the grid.
    let (x_min, x_max) = grid.x_range();
    let (z_min, z_max) = grid.z_range();
    let cell = grid
        .cell_of(
            target_agent.x.clamp(x_min, x_max),
            target_agent.z.clamp(z_min, z_max),
        )
        .expect("clamped target always inside");
    grid.set_target_cell(cell);
    Ok((grid, ground_map))
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}
