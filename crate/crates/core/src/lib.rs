//! Geometry toolkit for annotating and evaluating street-scene navigation data.
//!
//! The crate covers the full non-neural path from a single depth frame to an
//! evaluated navigation episode:
//!
//! - [`camera`]: pinhole projection, rigid pose algebra, per-pixel ray
//!   (Plücker) embeddings of camera poses.
//! - [`cloud`] / [`normals`]: depth-map unprojection into point clouds and
//!   PCA surface-normal estimation.
//! - [`occupancy`]: normal-based ground/obstacle segmentation and the
//!   agent-centric 50×50 local occupancy grid with target anchoring.
//! - [`planner`]: A* over the grid (with a Dijkstra reference used by the
//!   test suite) and obstacle inflation.
//! - [`trajectory`]: lifting grid paths to `[x, y, z, yaw]` waypoints,
//!   origin normalization, arc-length resampling, corner smoothing.
//! - [`flowmask`]: optical-flow magnitude and top-k salient binary masks.
//! - [`reproject`]: z-buffered reprojection of a point cloud through a
//!   sequence of virtual camera poses.
//! - [`objectives`]: reference loss functions and negative-sample
//!   construction for vision–instruction alignment.
//! - [`evalsim`]: deterministic waypoint-following simulator, scripted
//!   policies, and the success-rate / trajectory-deviation metric suite.
//! - [`config`]: the documented defaults shared by the command-line pipeline.
//! - [`synthetic`]: analytic scenes and episode suites used by tests and
//!   the self-test command.

// Validation sites use `!(x > 0.0)` on purpose: unlike `x <= 0.0` it also
// rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod cloud;
pub mod config;
pub mod error;
pub mod evalsim;
pub mod flowmask;
pub mod io;
pub mod normals;
pub mod objectives;
pub mod occupancy;
pub mod planner;
pub mod pose;
pub mod reproject;
pub mod rng;
pub mod synthetic;
pub mod trajectory;

pub use error::{Error, Result};
pub use pose::Pose;
