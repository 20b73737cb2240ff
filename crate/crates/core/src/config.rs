//! Pipeline configuration: every documented default in one place.
//!
//! The config round-trips through JSON and supports `key=value` overrides
//! for the CLI's `--set` flag.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Depth sampling stride for unprojection, pixels.
    pub stride: usize,
    /// Neighbor count for normal estimation.
    pub normal_neighbors: usize,
    /// Spatial hash cell for neighbor searches, meters.
    pub normal_hash_cell_m: f64,
    /// Max angle from up for ground points, degrees.
    pub theta_ground_deg: f64,
    /// Obstacles are steeper than 90 − margin degrees from up.
    pub theta_wall_margin_deg: f64,
    /// Mean neighborhood normal deviation marking inconsistent points, degrees.
    pub normal_inconsistency_deg: f64,
    /// Classify inconsistent neighborhoods as obstacles.
    pub check_inconsistency: bool,
    /// Obstacle height band above local ground, meters.
    pub obstacle_band_min_m: f64,
    pub obstacle_band_max_m: f64,
    /// Camera height above ground, meters; also the assumed ground depth
    /// when a scene has no ground evidence.
    pub camera_height_m: f64,
    /// Obstacle inflation radius, cells.
    pub inflation_radius_cells: usize,
    /// Treat Unknown grid cells as blocked during planning.
    pub unknown_is_occupied: bool,
    /// Trajectory resampling target length.
    pub resample_len: usize,
    /// Rotate (not just translate) when normalizing trajectory origins.
    pub normalize_rotation: bool,
    /// Salient mask ratio of total pixels.
    pub mask_ratio: f64,
    /// Square splat radius for reprojection, pixels.
    pub splat_radius_px: usize,
    /// Simulator step budget per episode.
    pub max_steps: usize,
    /// Resample count for trajectory-deviation measurements.
    pub deviation_samples: usize,
    /// Base seed for all random substreams.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            stride: 4,
            normal_neighbors: 16,
            normal_hash_cell_m: 0.2,
            theta_ground_deg: 25.0,
            theta_wall_margin_deg: 25.0,
            normal_inconsistency_deg: 30.0,
            check_inconsistency: true,
            obstacle_band_min_m: 0.1,
            obstacle_band_max_m: 2.0,
            camera_height_m: 1.4,
            inflation_radius_cells: 1,
            unknown_is_occupied: false,
            resample_len: 20,
            normalize_rotation: true,
            mask_ratio: 0.10,
            splat_radius_px: 0,
            max_steps: 100,
            deviation_samples: 100,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 {
            return Err(Error::invalid("stride must be >= 1"));
        }
        if self.normal_neighbors < 3 {
            return Err(Error::invalid("normal_neighbors must be >= 3"));
        }
        if !(self.normal_hash_cell_m > 0.0) {
            return Err(Error::invalid("normal_hash_cell_m must be positive"));
        }
        self.segment_params().validate()?;
        self.grid_build_params().validate()?;
        if !(self.camera_height_m > 0.0) {
            return Err(Error::invalid("camera_height_m must be positive"));
        }
        if self.resample_len < 2 {
            return Err(Error::invalid("resample_len must be >= 2"));
        }
        if !(self.mask_ratio > 0.0 && self.mask_ratio <= 1.0) {
            return Err(Error::invalid("mask_ratio must be in (0, 1]"));
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("max_steps must be >= 1"));
        }
        if self.deviation_samples < 2 {
            return Err(Error::invalid("deviation_samples must be >= 2"));
        }
        Ok(())
    }

    pub fn segment_params(&self) -> crate::occupancy::SegmentParams {
        crate::occupancy::SegmentParams {
            theta_ground_deg: self.theta_ground_deg,
            theta_wall_margin_deg: self.theta_wall_margin_deg,
            inconsistency_deg: self.normal_inconsistency_deg,
            inconsistency_neighbors: self.normal_neighbors,
            check_inconsistency: self.check_inconsistency,
            hash_cell_m: self.normal_hash_cell_m,
        }
    }

    pub fn grid_build_params(&self) -> crate::occupancy::GridBuildParams {
        crate::occupancy::GridBuildParams {
            obstacle_band_min_m: self.obstacle_band_min_m,
            obstacle_band_max_m: self.obstacle_band_max_m,
            default_ground_y_m: self.camera_height_m,
        }
    }

    pub fn planner_options(&self) -> crate::planner::PlannerOptions {
        crate::planner::PlannerOptions {
            unknown_is_occupied: self.unknown_is_occupied,
        }
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let config: Self = serde_json::from_reader(file)?;
        config.validate()?;
        Ok(config)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(file, self)?;
        Ok(())
    }

    /// Apply one `key=value` override; keys are the JSON field names.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::invalid(format!("cannot parse {value:?} for {key}")))
        }
        match key {
            "stride" => self.stride = parse(key, value)?,
            "normal_neighbors" => self.normal_neighbors = parse(key, value)?,
            "normal_hash_cell_m" => self.normal_hash_cell_m = parse(key, value)?,
            "theta_ground_deg" => self.theta_ground_deg = parse(key, value)?,
            "theta_wall_margin_deg" => self.theta_wall_margin_deg = parse(key, value)?,
            "normal_inconsistency_deg" => self.normal_inconsistency_deg = parse(key, value)?,
            "check_inconsistency" => self.check_inconsistency = parse(key, value)?,
            "obstacle_band_min_m" => self.obstacle_band_min_m = parse(key, value)?,
            "obstacle_band_max_m" => self.obstacle_band_max_m = parse(key, value)?,
            "camera_height_m" => self.camera_height_m = parse(key, value)?,
            "inflation_radius_cells" => self.inflation_radius_cells = parse(key, value)?,
            "unknown_is_occupied" => self.unknown_is_occupied = parse(key, value)?,
            "resample_len" => self.resample_len = parse(key, value)?,
            "normalize_rotation" => self.normalize_rotation = parse(key, value)?,
            "mask_ratio" => self.mask_ratio = parse(key, value)?,
            "splat_radius_px" => self.splat_radius_px = parse(key, value)?,
            "max_steps" => self.max_steps = parse(key, value)?,
            "deviation_samples" => self.deviation_samples = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            other => return Err(Error::invalid(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }
}
