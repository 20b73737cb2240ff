//! Optical-flow magnitude maps and top-k salient binary masks.
//!
//! The mask keeps exactly `floor(ratio · H · W)` pixels (clamped to at least
//! one): those with the largest flow magnitude, ties resolved toward the
//! smaller row-major index. Selection is a partial quickselect, not a full
//! sort; magnitude maps here reach 1440x1080.

use crate::error::{Error, Result};
use crate::io::netpbm;
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter};
use std::path::Path;

const FLO_MAGIC: f32 = 202021.25;

/// Per-pixel (u, v) displacements in pixels, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub u: Vec<f32>,
    pub v: Vec<f32>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, u: Vec<f32>, v: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("flow field dimensions must be positive"));
        }
        if u.len() != width * height || v.len() != width * height {
            return Err(Error::mismatch("flow component size"));
        }
        if !u.iter().chain(v.iter()).all(|x| x.is_finite()) {
            return Err(Error::invalid("flow values must be finite"));
        }
        Ok(Self {
            width,
            height,
            u,
            v,
        })
    }

    /// Middlebury .flo: f32 magic 202021.25, i32 width, i32 height, then
    /// row-major interleaved (u, v) f32, all little-endian.
    pub fn read_flo(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        let magic = r.read_f32::<LittleEndian>()?;
        if magic != FLO_MAGIC {
            return Err(Error::format(format!("bad .flo magic {magic}")));
        }
        let width = r.read_i32::<LittleEndian>()?;
        let height = r.read_i32::<LittleEndian>()?;
        if width <= 0 || height <= 0 {
            return Err(Error::format("non-positive .flo dimensions"));
        }
        let (width, height) = (width as usize, height as usize);
        let mut u = vec![0.0f32; width * height];
        let mut v = vec![0.0f32; width * height];
        for i in 0..width * height {
            u[i] = r.read_f32::<LittleEndian>()?;
            v[i] = r.read_f32::<LittleEndian>()?;
        }
        Self::new(width, height, u, v)
    }

    pub fn write_flo(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        w.write_f32::<LittleEndian>(FLO_MAGIC)?;
        w.write_i32::<LittleEndian>(self.width as i32)?;
        w.write_i32::<LittleEndian>(self.height as i32)?;
        for i in 0..self.width * self.height {
            w.write_f32::<LittleEndian>(self.u[i])?;
            w.write_f32::<LittleEndian>(self.v[i])?;
        }
        Ok(())
    }
}

/// Per-pixel L2 flow magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

pub fn flow_magnitude(flow: &FlowField) -> MagnitudeMap {
    let data = flow
        .u
        .iter()
        .zip(&flow.v)
        .map(|(&u, &v)| (u as f64).hypot(v as f64))
        .collect();
    MagnitudeMap {
        width: flow.width,
        height: flow.height,
        data,
    }
}

/// Binary mask with exactly `k` set bits.
#[derive(Debug, Clone, PartialEq)]
pub struct SalientMask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
    pub k: usize,
}

impl SalientMask {
    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// PBM P4 plus a JSON sidecar `{k, ratio}`.
    pub fn write_files(&self, pbm_path: &Path, json_path: &Path, ratio: f64) -> Result<()> {
        netpbm::write_pbm(pbm_path, self.width, self.height, &self.bits)?;
        let sidecar = MaskSidecar { k: self.k, ratio };
        let file = BufWriter::new(std::fs::File::create(json_path)?);
        serde_json::to_writer_pretty(file, &sidecar)?;
        Ok(())
    }

    pub fn read_files(pbm_path: &Path, json_path: &Path) -> Result<(Self, f64)> {
        let (width, height, bits) = netpbm::read_pbm(pbm_path)?;
        let file = BufReader::new(std::fs::File::open(json_path)?);
        let sidecar: MaskSidecar = serde_json::from_reader(file)?;
        let mask = Self {
            width,
            height,
            k: bits.iter().filter(|b| **b).count(),
            bits,
        };
        if mask.k != sidecar.k {
            return Err(Error::format("mask popcount disagrees with sidecar k"));
        }
        Ok((mask, sidecar.ratio))
    }
}

#[derive(Serialize, Deserialize)]
struct MaskSidecar {
    k: usize,
    ratio: f64,
}

/// Mask of the `floor(ratio · H · W)` largest-magnitude pixels (at least 1).
///
/// Ties at the selection threshold keep the smaller row-major index, making
/// the mask a deterministic function of the map alone.
pub fn topk_mask(map: &MagnitudeMap, ratio: f64) -> Result<SalientMask> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::invalid(format!("ratio {ratio} outside (0, 1]")));
    }
    let n = map.width * map.height;
    if n == 0 {
        return Err(Error::invalid("empty magnitude map"));
    }
    let k = ((ratio * n as f64).floor() as usize).clamp(1, n);
    let mut order: Vec<u32> = (0..n as u32).collect();
    let rank = |a: &u32, b: &u32| {
        map.data[*b as usize]
            .total_cmp(&map.data[*a as usize])
            .then(a.cmp(b))
    };
    if k < n {
        order.select_nth_unstable_by(k - 1, rank);
    }
    let mut bits = vec![false; n];
    for &idx in &order[..k] {
        bits[idx as usize] = true;
    }
    Ok(SalientMask {
        width: map.width,
        height: map.height,
        bits,
        k,
    })
}

/// Values of masked pixels in row-major order; length equals `k`.
pub fn masked_extract<T: Copy>(values: &[T], mask: &SalientMask) -> Result<Vec<T>> {
    if values.len() != mask.width * mask.height {
        return Err(Error::mismatch(format!(
            "image has {} values, mask is {}x{}",
            values.len(),
            mask.width,
            mask.height
        )));
    }
    Ok(values
        .iter()
        .zip(&mask.bits)
        .filter_map(|(v, &bit)| bit.then_some(*v))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn map(width: usize, height: usize, data: Vec<f64>) -> MagnitudeMap {
        MagnitudeMap {
            width,
            height,
            data,
        }
    }

    #[test]
    fn three_four_five() {
        let flow = FlowField::new(1, 1, vec![3.0], vec![4.0]).unwrap();
        assert_eq!(flow_magnitude(&flow).data, vec![5.0]);
    }

    #[test]
    fn zero_field_zero_map() {
        let flow = FlowField::new(4, 2, vec![0.0; 8], vec![0.0; 8]).unwrap();
        assert!(flow_magnitude(&flow).data.iter().all(|m| *m == 0.0));
    }

    #[test]
    fn magnitude_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 64 * 48;
        let u: Vec<f32> = (0..n).map(|_| rng.gen_range(-30.0..30.0)).collect();
        let v: Vec<f32> = (0..n).map(|_| rng.gen_range(-30.0..30.0)).collect();
        let flow = FlowField::new(64, 48, u.clone(), v.clone()).unwrap();
        let mag = flow_magnitude(&flow);
        for i in 0..n {
            let expected = ((u[i] as f64).powi(2) + (v[i] as f64).powi(2)).sqrt();
            assert!((mag.data[i] - expected).abs() < 1e-6);
        }
        // Sign flips leave the magnitude untouched.
        let flipped = FlowField::new(
            64,
            48,
            u.iter().map(|x| -x).collect(),
            v.iter().map(|x| -x).collect(),
        )
        .unwrap();
        assert_eq!(flow_magnitude(&flipped).data, mag.data);
    }

    #[test]
    fn topk_two_by_two() {
        let m = map(2, 2, vec![9.0, 7.0, 5.0, 3.0]);
        let mask = topk_mask(&m, 0.5).unwrap();
        assert_eq!(mask.k, 2);
        assert_eq!(mask.bits, vec![true, true, false, false]);
    }

    #[test]
    fn uniform_ties_take_low_indices() {
        let m = map(4, 4, vec![1.0; 16]);
        let mask = topk_mask(&m, 0.25).unwrap();
        assert_eq!(mask.k, 4);
        for (i, bit) in mask.bits.iter().enumerate() {
            assert_eq!(*bit, i < 4);
        }
    }

    #[test]
    fn ratio_one_selects_all() {
        let m = map(3, 3, (0..9).map(|i| i as f64).collect());
        let mask = topk_mask(&m, 1.0).unwrap();
        assert_eq!(mask.popcount(), 9);
    }

    #[test]
    fn ratio_bounds() {
        let m = map(2, 2, vec![1.0; 4]);
        assert!(topk_mask(&m, 0.0).is_err());
        assert!(topk_mask(&m, 1.5).is_err());
        // Tiny ratios clamp k up to 1.
        assert_eq!(topk_mask(&m, 1e-9).unwrap().k, 1);
    }

    #[test]
    fn selection_matches_full_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..30 {
            let w = rng.gen_range(1..40);
            let h = rng.gen_range(1..40);
            let n = w * h;
            // Coarse quantization forces plenty of ties.
            let data: Vec<f64> = (0..n).map(|_| rng.gen_range(0..6) as f64).collect();
            let m = map(w, h, data.clone());
            let ratio = rng.gen_range(0.05..1.0);
            let mask = topk_mask(&m, ratio).unwrap();
            let k = ((ratio * n as f64).floor() as usize).clamp(1, n);
            assert_eq!(mask.popcount(), k);

            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| data[b].total_cmp(&data[a]).then(a.cmp(&b)));
            for (rank, &idx) in order.iter().enumerate() {
                assert_eq!(mask.bits[idx], rank < k, "rank {rank} idx {idx}");
            }
            // Scaling equivariance.
            let scaled = map(w, h, data.iter().map(|x| x * 17.5).collect());
            assert_eq!(topk_mask(&scaled, ratio).unwrap().bits, mask.bits);
        }
    }

    #[test]
    fn extract_follows_mask() {
        let m = map(2, 2, vec![9.0, 7.0, 5.0, 3.0]);
        let mask = topk_mask(&m, 0.5).unwrap();
        let values = ["a", "b", "c", "d"];
        assert_eq!(masked_extract(&values, &mask).unwrap(), vec!["a", "b"]);
        let full = topk_mask(&m, 1.0).unwrap();
        assert_eq!(
            masked_extract(&values, &full).unwrap(),
            vec!["a", "b", "c", "d"]
        );
        assert!(masked_extract(&values[..2], &mask).is_err());
    }

    #[test]
    fn flo_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 7 * 5;
        let flow = FlowField::new(
            7,
            5,
            (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect(),
            (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.flo");
        flow.write_flo(&path).unwrap();
        assert_eq!(FlowField::read_flo(&path).unwrap(), flow);
    }

    #[test]
    fn flo_rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.flo");
        std::fs::write(&path, [0u8; 12]).unwrap();
        assert!(FlowField::read_flo(&path).is_err());
    }

    #[test]
    fn mask_files_roundtrip() {
        let m = map(5, 3, (0..15).map(|i| (i % 4) as f64).collect());
        let mask = topk_mask(&m, 0.4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let pbm = dir.path().join("mask.pbm");
        let json = dir.path().join("mask.json");
        mask.write_files(&pbm, &json, 0.4).unwrap();
        let (back, ratio) = SalientMask::read_files(&pbm, &json).unwrap();
        assert_eq!(back, mask);
        assert_eq!(ratio, 0.4);
    }
}
