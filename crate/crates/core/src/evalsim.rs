//! Deterministic waypoint-following simulator and the navigation metric
//! suite (success rate at radius thresholds, trajectory deviation).
//!
//! Policies see a fixed-length history of observations (pose + local grid
//! crop) and answer with the next 5 waypoints in their current frame; the
//! simulator executes the first (receding horizon) unless configured to run
//! all 5. Episodes terminate on reach, collision, stop, or step budget.

use crate::error::{Error, Result};
use crate::occupancy::{CellState, OccupancyGrid};
use crate::pose::wrap_angle;
use crate::trajectory::Trajectory;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter};
use std::path::Path;

/// Observation history window (h).
pub const HISTORY_LEN: usize = 10;
/// Waypoints per action.
pub const ACTION_LEN: usize = 5;
/// Side of the square local grid crop handed to scripted policies.
pub const LOCAL_CROP: usize = 11;
/// An episode is reached when the agent is within this radius of the
/// target entrance, meters. Matches the tightest reported success radius.
pub const REACH_RADIUS_M: f64 = 0.1;
/// Emitted displacements below this stop the rollout, meters.
pub const STOP_EPSILON_M: f64 = 1e-3;
/// Hop length of the straight-to-target reference policy, meters.
const GREEDY_STEP_M: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub x: f64,
    pub z: f64,
    pub yaw: f64,
}

/// What a scripted policy sees each step. The upstream system consumes RGB
/// frames; this abstraction keeps the same interface shape (history window,
/// 5-waypoint action) with zero learned components.
#[derive(Debug, Clone)]
pub struct Observation {
    pub pose: AgentState,
    /// LOCAL_CROP × LOCAL_CROP crop centered on the agent cell, row-major;
    /// out-of-grid cells read Unknown.
    pub local_grid: Vec<CellState>,
}

pub trait Policy {
    /// Reseed internal randomness; called once per rollout.
    fn reset(&mut self, seed: u64);

    /// `history` holds exactly [`HISTORY_LEN`] observations, oldest first
    /// (front-padded by repeating the earliest). Returns [`ACTION_LEN`]
    /// waypoints (x right, z forward) relative to the newest pose.
    fn act(&mut self, history: &[Observation]) -> Vec<[f64; 2]>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Reached,
    MaxSteps,
    Collision,
    Stopped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub states: Vec<AgentState>,
    pub outcome: Outcome,
}

impl Rollout {
    pub fn final_state(&self) -> &AgentState {
        self.states
            .last()
            .expect("rollouts hold at least the start state")
    }

    pub fn xz_points(&self) -> Vec<[f64; 2]> {
        self.states.iter().map(|s| [s.x, s.z]).collect()
    }
}

/// One navigation task: local grid, instruction, target entrance, and the
/// annotated ground-truth trajectory, all in the grid's agent frame.
#[derive(Debug, Clone)]
pub struct Episode {
    pub grid: OccupancyGrid,
    pub instruction: String,
    pub target_entrance: [f64; 2],
    pub gt_trajectory: Trajectory,
    pub max_steps: usize,
}

impl Episode {
    pub fn new(
        grid: OccupancyGrid,
        instruction: String,
        target_entrance: [f64; 2],
        gt_trajectory: Trajectory,
        max_steps: usize,
    ) -> Result<Self> {
        if max_steps == 0 {
            return Err(Error::invalid("max_steps must be >= 1"));
        }
        let cell = grid
            .cell_of(target_entrance[0], target_entrance[1])
            .ok_or_else(|| Error::invalid("target entrance outside the grid"))?;
        let (cx, cz) = grid.center_of(cell);
        let last = gt_trajectory.poses.last().unwrap();
        let gap = (last.x - cx).hypot(last.z - cz);
        if gap > 0.05 + 1e-9 {
            return Err(Error::invalid(format!(
                "ground-truth endpoint is {gap:.3} m from the target cell center"
            )));
        }
        Ok(Self {
            grid,
            instruction,
            target_entrance,
            gt_trajectory,
            max_steps,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Execute all 5 predicted waypoints per policy call instead of only
    /// the first.
    pub execute_all: bool,
}

fn observe(grid: &OccupancyGrid, state: &AgentState) -> Observation {
    let half = (LOCAL_CROP / 2) as i64;
    let inv = 1.0 / grid.resolution();
    let icol = ((state.x - grid.x_range().0) * inv).floor() as i64;
    let irow = ((state.z - grid.z_range().0) * inv).floor() as i64;
    let mut local_grid = Vec::with_capacity(LOCAL_CROP * LOCAL_CROP);
    for dr in -half..=half {
        for dc in -half..=half {
            local_grid.push(grid.state_or_unknown(icol + dc, irow + dr));
        }
    }
    Observation {
        pose: *state,
        local_grid,
    }
}

fn history_window(observations: &[Observation]) -> Vec<Observation> {
    let mut window = Vec::with_capacity(HISTORY_LEN);
    let start = observations.len().saturating_sub(HISTORY_LEN);
    let pad = HISTORY_LEN - (observations.len() - start);
    for _ in 0..pad {
        window.push(observations[0].clone());
    }
    window.extend_from_slice(&observations[start..]);
    window
}

/// Roll a policy through an episode.
///
/// Each executed waypoint rotates the agent to face it, then translates;
/// the rollout ends on reach (within [`REACH_RADIUS_M`] of the target),
/// collision (the motion segment crosses an Occupied cell; the move is not
/// taken), stop (displacement under [`STOP_EPSILON_M`]), or the step budget.
pub fn run_episode(
    episode: &Episode,
    policy: &mut dyn Policy,
    seed: u64,
    opts: &RunOptions,
) -> Result<Rollout> {
    policy.reset(seed);
    let mut state = AgentState {
        x: 0.0,
        z: 0.0,
        yaw: 0.0,
    };
    let mut states = vec![state];
    let target = episode.target_entrance;
    let dist_to_target = |s: &AgentState| (s.x - target[0]).hypot(s.z - target[1]);
    if dist_to_target(&state) <= REACH_RADIUS_M {
        return Ok(Rollout {
            states,
            outcome: Outcome::Reached,
        });
    }
    let horizon = if opts.execute_all { ACTION_LEN } else { 1 };
    let mut observations: Vec<Observation> = Vec::new();
    let mut steps = 0usize;
    while steps < episode.max_steps {
        observations.push(observe(&episode.grid, &state));
        let window = history_window(&observations);
        let action = policy.act(&window);
        if action.len() != ACTION_LEN {
            return Err(Error::Protocol(format!(
                "policy emitted {} waypoints, expected {ACTION_LEN}",
                action.len()
            )));
        }
        // All 5 waypoints are relative to the pose at emission time, so the
        // frame is captured once per action, not per executed hop.
        let (sin_e, cos_e) = state.yaw.sin_cos();
        let emission = (state.x, state.z);
        for wp in action.iter().take(horizon) {
            let tx = emission.0 + wp[0] * cos_e + wp[1] * sin_e;
            let tz = emission.1 - wp[0] * sin_e + wp[1] * cos_e;
            let dx = tx - state.x;
            let dz = tz - state.z;
            let displacement = dx.hypot(dz);
            if displacement < STOP_EPSILON_M {
                return Ok(Rollout {
                    states,
                    outcome: Outcome::Stopped,
                });
            }
            let next = AgentState {
                x: state.x + dx,
                z: state.z + dz,
                yaw: wrap_angle(dx.atan2(dz)),
            };
            if episode
                .grid
                .segment_crosses_occupied((state.x, state.z), (next.x, next.z))
            {
                return Ok(Rollout {
                    states,
                    outcome: Outcome::Collision,
                });
            }
            state = next;
            states.push(state);
            steps += 1;
            if dist_to_target(&state) <= REACH_RADIUS_M {
                return Ok(Rollout {
                    states,
                    outcome: Outcome::Reached,
                });
            }
            if steps >= episode.max_steps {
                break;
            }
        }
    }
    Ok(Rollout {
        states,
        outcome: Outcome::MaxSteps,
    })
}

/// Tracks the annotated trajectory waypoint by waypoint, optionally with
/// seeded isotropic Gaussian noise on every emitted waypoint.
///
/// Progress is observation-based: if the agent sits on a waypoint at or
/// beyond the cursor (within [`WAYPOINT_SNAP_M`]), emission continues from
/// the one after it, so the policy tracks correctly whether the simulator
/// executes one waypoint per action or all five. The cursor still advances
/// at least one waypoint per action, so the plan is attempted once and the
/// rollout stops when the path is exhausted.
pub struct OraclePolicy {
    waypoints: Vec<[f64; 2]>,
    sigma: f64,
    cursor: usize,
    rng: ChaCha8Rng,
}

/// Distance at which the oracle counts a waypoint as visited, meters.
const WAYPOINT_SNAP_M: f64 = 0.05;

/// Noise-free oracle; equivalent to [`noisy_oracle`] with sigma 0.
pub fn oracle_policy(episode: &Episode) -> OraclePolicy {
    noisy_oracle(episode, 0.0)
}

pub fn noisy_oracle(episode: &Episode, sigma: f64) -> OraclePolicy {
    OraclePolicy {
        waypoints: episode
            .gt_trajectory
            .poses
            .iter()
            .map(|p| [p.x, p.z])
            .collect(),
        sigma,
        cursor: 0,
        rng: ChaCha8Rng::seed_from_u64(0),
    }
}

impl Policy for OraclePolicy {
    fn reset(&mut self, seed: u64) {
        self.cursor = 0;
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    fn act(&mut self, history: &[Observation]) -> Vec<[f64; 2]> {
        let pose = history.last().expect("history is never empty").pose;
        let mut action = Vec::with_capacity(ACTION_LEN);
        if self.cursor >= self.waypoints.len() {
            // Path exhausted: emit zero displacement so the rollout stops.
            return vec![[0.0, 0.0]; ACTION_LEN];
        }
        let noise = if self.sigma > 0.0 {
            Some(Normal::new(0.0, self.sigma).expect("finite sigma"))
        } else {
            None
        };
        for i in 0..ACTION_LEN {
            let idx = (self.cursor + i).min(self.waypoints.len() - 1);
            let mut wp = self.waypoints[idx];
            if let Some(noise) = &noise {
                wp[0] += noise.sample(&mut self.rng);
                wp[1] += noise.sample(&mut self.rng);
            }
            action.push(world_to_relative(&pose, wp));
        }
        self.cursor += 1;
        action
    }
}

/// Marches straight at the target entrance in fixed-length hops.
pub struct GreedyStraight {
    target: [f64; 2],
}

pub fn greedy_straight(episode: &Episode) -> GreedyStraight {
    GreedyStraight {
        target: episode.target_entrance,
    }
}

impl Policy for GreedyStraight {
    fn reset(&mut self, _seed: u64) {}

    fn act(&mut self, history: &[Observation]) -> Vec<[f64; 2]> {
        let pose = history.last().expect("history is never empty").pose;
        let dx = self.target[0] - pose.x;
        let dz = self.target[1] - pose.z;
        let dist = dx.hypot(dz);
        if dist < STOP_EPSILON_M {
            return vec![[0.0, 0.0]; ACTION_LEN];
        }
        let (ux, uz) = (dx / dist, dz / dist);
        (1..=ACTION_LEN)
            .map(|i| {
                let reach = (GREEDY_STEP_M * i as f64).min(dist);
                world_to_relative(&pose, [pose.x + ux * reach, pose.z + uz * reach])
            })
            .collect()
    }
}

fn world_to_relative(pose: &AgentState, wp: [f64; 2]) -> [f64; 2] {
    let dx = wp[0] - pose.x;
    let dz = wp[1] - pose.z;
    let (sin_yaw, cos_yaw) = pose.yaw.sin_cos();
    [dx * cos_yaw - dz * sin_yaw, dx * sin_yaw + dz * cos_yaw]
}

/// Fraction of rollouts whose final position lies within `radius` of the
/// episode target entrance.
pub fn success_rate(rollouts: &[Rollout], episodes: &[Episode], radius: f64) -> Result<f64> {
    if rollouts.len() != episodes.len() || rollouts.is_empty() {
        return Err(Error::mismatch(format!(
            "{} rollouts vs {} episodes",
            rollouts.len(),
            episodes.len()
        )));
    }
    let hits = rollouts
        .iter()
        .zip(episodes)
        .filter(|(r, e)| {
            let s = r.final_state();
            (s.x - e.target_entrance[0]).hypot(s.z - e.target_entrance[1]) <= radius
        })
        .count();
    Ok(hits as f64 / rollouts.len() as f64)
}

fn resample_polyline(points: &[[f64; 2]], m: usize) -> Vec<[f64; 2]> {
    if points.len() == 1 {
        return vec![points[0]; m];
    }
    let mut cumulative = vec![0.0];
    for w in points.windows(2) {
        let step = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
        cumulative.push(cumulative.last().unwrap() + step);
    }
    let total = *cumulative.last().unwrap();
    (0..m)
        .map(|i| {
            let s = if total == 0.0 {
                0.0
            } else {
                total * (i as f64 / (m - 1) as f64)
            };
            if s <= 0.0 {
                return points[0];
            }
            if s >= total {
                return *points.last().unwrap();
            }
            let seg = match cumulative.binary_search_by(|c| c.total_cmp(&s)) {
                Ok(i) => i.min(points.len() - 2),
                Err(i) => i - 1,
            };
            let seg_len = cumulative[seg + 1] - cumulative[seg];
            let t = if seg_len > 0.0 {
                (s - cumulative[seg]) / seg_len
            } else {
                0.0
            };
            [
                points[seg][0] + t * (points[seg + 1][0] - points[seg][0]),
                points[seg][1] + t * (points[seg + 1][1] - points[seg][1]),
            ]
        })
        .collect()
}

/// Mean pointwise distance between the rollout and ground-truth xz paths
/// after resampling both to `m` arc-length-uniform points.
pub fn trajectory_deviation(rollout: &Rollout, gt: &Trajectory, m: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::domain("deviation needs at least 2 sample points"));
    }
    let a = resample_polyline(&rollout.xz_points(), m);
    let b = resample_polyline(&gt.xz_points(), m);
    let total: f64 = a
        .iter()
        .zip(&b)
        .map(|(p, q)| (p[0] - q[0]).hypot(p[1] - q[1]))
        .sum();
    Ok(total / m as f64)
}

/// Batch metrics shaped like the published results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub sr_010: f64,
    pub sr_020: f64,
    pub sr_030: f64,
    pub tr_mean: f64,
    pub tr_best: f64,
    pub tr_worst: f64,
    pub episode_count: usize,
}

impl MetricReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let file = BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(file, self)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let file = BufReader::new(std::fs::File::open(path)?);
        Ok(serde_json::from_reader(file)?)
    }
}

/// Fold per-episode deviations and the three success rates into a report.
///
/// Deviations are summed in sorted order so the mean is independent of
/// episode ordering.
pub fn aggregate(
    deviations: &[f64],
    sr_010: f64,
    sr_020: f64,
    sr_030: f64,
) -> Result<MetricReport> {
    if deviations.is_empty() {
        return Err(Error::domain("cannot aggregate an empty batch"));
    }
    let mut sorted = deviations.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let tr_best = sorted[0];
    let tr_worst = *sorted.last().unwrap();
    let tr_mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    Ok(MetricReport {
        sr_010,
        sr_020,
        sr_030,
        tr_mean,
        tr_best,
        tr_worst,
        episode_count: deviations.len(),
    })
}

/// `success_rate` at the three reported radii plus deviation statistics.
pub fn evaluate_batch(
    episodes: &[Episode],
    rollouts: &[Rollout],
    deviation_samples: usize,
) -> Result<MetricReport> {
    let sr_010 = success_rate(rollouts, episodes, 0.1)?;
    let sr_020 = success_rate(rollouts, episodes, 0.2)?;
    let sr_030 = success_rate(rollouts, episodes, 0.3)?;
    let deviations = episodes
        .iter()
        .zip(rollouts)
        .map(|(e, r)| trajectory_deviation(r, &e.gt_trajectory, deviation_samples))
        .collect::<Result<Vec<_>>>()?;
    aggregate(&deviations, sr_010, sr_020, sr_030)
}

/// Episode manifest on disk: file references are resolved relative to the
/// manifest's own directory.
#[derive(Debug, Serialize, Deserialize)]
pub struct EpisodesManifest {
    pub episodes: Vec<EpisodeEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EpisodeEntry {
    pub id: String,
    pub instruction: String,
    pub grid_pgm: String,
    pub grid_meta: String,
    pub trajectory: String,
    pub target_entrance: [f64; 2],
    pub max_steps: usize,
}

pub fn load_episodes(manifest_path: &Path) -> Result<Vec<(String, Episode)>> {
    let file = BufReader::new(std::fs::File::open(manifest_path)?);
    let manifest: EpisodesManifest = serde_json::from_reader(file)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::with_capacity(manifest.episodes.len());
    for entry in manifest.episodes {
        let grid =
            OccupancyGrid::read_files(&base.join(&entry.grid_pgm), &base.join(&entry.grid_meta))?;
        let traj = Trajectory::read_jsonl(&base.join(&entry.trajectory))?;
        let episode = Episode::new(
            grid,
            entry.instruction,
            entry.target_entrance,
            traj,
            entry.max_steps,
        )?;
        out.push((entry.id, episode));
    }
    Ok(out)
}
