//! Reference training objectives as pure scalar functions, plus the
//! negative-sample construction for vision–instruction alignment.
//!
//! These exist for dataset tooling and cross-implementation checks; nothing
//! here computes gradients.

use crate::error::{Error, Result};
use crate::rng::substream;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Probabilities are clamped into [BCE_CLAMP, 1 − BCE_CLAMP] so boundary
/// predictions stay finite.
pub const BCE_CLAMP: f64 = 1e-7;

/// Normalized center/size box in the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&cx) || !(0.0..=1.0).contains(&cy) {
            return Err(Error::invalid("box center outside unit square"));
        }
        if !(w > 0.0 && w <= 1.0 && h > 0.0 && h <= 1.0) {
            return Err(Error::invalid("box size must be in (0, 1]"));
        }
        let eps = 1e-9;
        if cx - w / 2.0 < -eps
            || cx + w / 2.0 > 1.0 + eps
            || cy - h / 2.0 < -eps
            || cy + h / 2.0 > 1.0 + eps
        {
            return Err(Error::invalid("box extends outside the unit square"));
        }
        Ok(Self { cx, cy, w, h })
    }

    fn edges(&self) -> (f64, f64, f64, f64) {
        (
            (self.cx - self.w / 2.0).max(0.0),
            (self.cy - self.h / 2.0).max(0.0),
            (self.cx + self.w / 2.0).min(1.0),
            (self.cy + self.h / 2.0).min(1.0),
        )
    }
}

/// Axis-aligned intersection over union.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let (ax0, ay0, ax1, ay1) = a.edges();
    let (bx0, by0, bx1, by1) = b.edges();
    let ix = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let iy = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let inter = ix * iy;
    let union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Box regression loss: mean L1 over (cx, cy, w, h) plus (1 − IoU).
pub fn loss_bbox(pred: &BBox, gt: &BBox) -> f64 {
    let l1 = ((pred.cx - gt.cx).abs()
        + (pred.cy - gt.cy).abs()
        + (pred.w - gt.w).abs()
        + (pred.h - gt.h).abs())
        / 4.0;
    l1 + (1.0 - iou(pred, gt))
}

/// Mean absolute element-wise difference between two waypoint lists.
pub fn loss_wpts(pred: &[Vec<f64>], gt: &[Vec<f64>]) -> Result<f64> {
    if pred.is_empty() || pred.len() != gt.len() {
        return Err(Error::mismatch(format!(
            "waypoint lists of length {} vs {}",
            pred.len(),
            gt.len()
        )));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (p, g) in pred.iter().zip(gt) {
        if p.len() != g.len() {
            return Err(Error::mismatch("waypoint dimensionality"));
        }
        for (a, b) in p.iter().zip(g) {
            total += (a - b).abs();
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::mismatch("zero-dimensional waypoints"));
    }
    Ok(total / count as f64)
}

/// Mean absolute difference between two masked-value lists.
pub fn loss_recon(pred: &[f64], gt: &[f64]) -> Result<f64> {
    if pred.is_empty() || pred.len() != gt.len() {
        return Err(Error::mismatch(format!(
            "value lists of length {} vs {}",
            pred.len(),
            gt.len()
        )));
    }
    let total: f64 = pred.iter().zip(gt).map(|(a, b)| (a - b).abs()).sum();
    Ok(total / pred.len() as f64)
}

/// Binary cross-entropy with the probability clamped away from {0, 1}.
pub fn loss_flag(p: f64, label: bool) -> f64 {
    let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
    if label {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    One,
    Two,
}

/// Named loss terms; only the ones the stage requires must be present.
#[derive(Debug, Clone, Copy, Default)]
pub struct LossParts {
    pub bbox: Option<f64>,
    pub wpts: Option<f64>,
    pub recon: Option<f64>,
    pub flag: Option<f64>,
}

/// Per-term weights for the stage-two sum; all default to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub wpts: f64,
    pub recon: f64,
    pub flag: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            wpts: 1.0,
            recon: 1.0,
            flag: 1.0,
        }
    }
}

/// Stage-switched total: the box loss alone in stage one; the unweighted sum
/// of waypoint, reconstruction, and flag losses in stage two (the box term
/// is excluded even if supplied).
pub fn total_loss(stage: Stage, parts: &LossParts) -> Result<f64> {
    total_loss_weighted(stage, parts, &LossWeights::default())
}

pub fn total_loss_weighted(stage: Stage, parts: &LossParts, weights: &LossWeights) -> Result<f64> {
    let require = |part: Option<f64>, name: &str| {
        part.ok_or_else(|| Error::domain(format!("stage requires the {name} term")))
    };
    match stage {
        Stage::One => require(parts.bbox, "bbox"),
        Stage::Two => {
            let wpts = require(parts.wpts, "wpts")?;
            let recon = require(parts.recon, "recon")?;
            let flag = require(parts.flag, "flag")?;
            Ok(weights.wpts * wpts + weights.recon * recon + weights.flag * flag)
        }
    }
}

/// An (instruction, observation) pairing with a match label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentSample {
    pub instruction_id: String,
    pub observation_id: String,
    pub label: u8,
}

/// Positives plus an equal count of mismatched negatives.
///
/// The negative pairing reassigns observations by a seeded cyclic
/// permutation (Sattolo's shuffle), which has no fixed points, so every
/// negative is genuinely mismatched. Deterministic per seed.
pub fn swap_negatives(positives: &[AlignmentSample], seed: u64) -> Result<Vec<AlignmentSample>> {
    if positives.len() < 2 {
        return Err(Error::domain("need at least 2 samples to swap"));
    }
    if let Some(bad) = positives.iter().find(|s| s.label != 1) {
        return Err(Error::domain(format!(
            "input sample {} is not a positive",
            bad.instruction_id
        )));
    }
    let n = positives.len();
    let mut assignment: Vec<usize> = (0..n).collect();
    let mut rng = substream(seed, "swap-negatives");
    for i in (1..n).rev() {
        let j = rng.gen_range(0..i);
        assignment.swap(i, j);
    }
    let mut out = positives.to_vec();
    out.reserve(n);
    for (i, sample) in positives.iter().enumerate() {
        out.push(AlignmentSample {
            instruction_id: sample.instruction_id.clone(),
            observation_id: positives[assignment[i]].observation_id.clone(),
            label: 0,
        });
    }
    Ok(out)
}

pub fn write_samples_jsonl(path: &Path, samples: &[AlignmentSample]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for s in samples {
        writeln!(w, "{}", serde_json::to_string(s)?)?;
    }
    Ok(())
}

pub fn read_samples_jsonl(path: &Path) -> Result<Vec<AlignmentSample>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
