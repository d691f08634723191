//! Deterministic synthetic scenes: textured images of two stacked curved
//! bands separated by a thin dark gap, reference masks for both bands,
//! and controllable mask corruptions with a target overlap score.
//!
//! Everything is seeded; there is no global RNG.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{dice_score, Image, Mask};
use crate::pgm;

/// Tolerance on the achieved overlap score of a corruption.
pub const DSC_TOLERANCE: f64 = 0.05;

const BASE_BACKGROUND: f64 = 0.30;
const BASE_BAND_A: f64 = 0.72;
const BASE_BAND_B: f64 = 0.52;
const BASE_GAP: f64 = 0.08;
const MIN_COMPARTMENT_AREA: usize = 40;
const GEOMETRY_RETRIES: u64 = 8;

/// Scene geometry and appearance ranges; each sample draws from these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub height: usize,
    pub width: usize,
    /// Top row of the upper band.
    pub band_top: (usize, usize),
    /// Thickness of each band.
    pub band_thickness: (usize, usize),
    /// Vertical gap between the bands.
    pub gap: (usize, usize),
    /// Amplitude range of the shared band curve, in pixels.
    pub curve_amplitude: (f64, f64),
    pub texture_amplitude: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            band_top: (8, 16),
            band_thickness: (10, 14),
            gap: (2, 4),
            curve_amplitude: (0.5, 2.5),
            texture_amplitude: 0.12,
            noise_std: 0.02,
            seed: 0,
        }
    }
}

/// One synthetic sample: image plus the two compartment masks.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: Image,
    pub comp_a: Mask,
    pub comp_b: Mask,
}

impl Sample {
    /// Union of both compartments; this is the reference segmentation.
    pub fn reference_mask(&self) -> Mask {
        let (h, w) = (self.comp_a.height(), self.comp_a.width());
        Mask::from_fn(h, w, |y, x| self.comp_a.get(y, x) == 1 || self.comp_b.get(y, x) == 1)
    }
}

/// Smooth value noise: a coarse uniform grid interpolated bilinearly.
fn value_noise(rng: &mut ChaCha8Rng, h: usize, w: usize, cell: usize) -> Vec<f64> {
    let gh = h / cell + 2;
    let gw = w / cell + 2;
    let grid: Vec<f64> = (0..gh * gw).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        let fy = y as f64 / cell as f64;
        let gy = fy as usize;
        let ty = fy - gy as f64;
        for x in 0..w {
            let fx = x as f64 / cell as f64;
            let gx = fx as usize;
            let tx = fx - gx as f64;
            let v00 = grid[gy * gw + gx];
            let v01 = grid[gy * gw + gx + 1];
            let v10 = grid[(gy + 1) * gw + gx];
            let v11 = grid[(gy + 1) * gw + gx + 1];
            let top = v00 + (v01 - v00) * tx;
            let bot = v10 + (v11 - v10) * tx;
            out[y * w + x] = top + (bot - top) * ty;
        }
    }
    out
}

/// Generate one sample. Deterministic for a given `params.seed`; fails
/// with a generation error if the geometry ranges cannot be satisfied
/// after bounded retries.
pub fn gen_sample(params: &SceneParams) -> Result<Sample> {
    if params.height < 16 || params.width < 16 {
        return Err(Error::Param("scene must be at least 16x16".into()));
    }
    for attempt in 0..GEOMETRY_RETRIES {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9)));
        if let Some(sample) = try_scene(params, &mut rng) {
            return Ok(sample);
        }
    }
    Err(Error::Gen(format!(
        "no valid geometry for seed {} within {GEOMETRY_RETRIES} attempts",
        params.seed
    )))
}

fn try_scene(params: &SceneParams, rng: &mut ChaCha8Rng) -> Option<Sample> {
    let (h, w) = (params.height, params.width);
    let band_top = rng.gen_range(params.band_top.0..=params.band_top.1);
    let thickness_a = rng.gen_range(params.band_thickness.0..=params.band_thickness.1);
    let thickness_b = rng.gen_range(params.band_thickness.0..=params.band_thickness.1);
    let gap = rng.gen_range(params.gap.0..=params.gap.1);
    let amp1 = rng.gen_range(params.curve_amplitude.0..=params.curve_amplitude.1);
    let amp2 = rng.gen_range(params.curve_amplitude.0..=params.curve_amplitude.1) * 0.5;
    let freq1 = rng.gen_range(1..=2) as f64;
    let freq2 = rng.gen_range(2..=3) as f64;
    let phase1 = rng.gen_range(0.0..std::f64::consts::TAU);
    let phase2 = rng.gen_range(0.0..std::f64::consts::TAU);

    // Per-column vertical offset shared by both bands.
    let curve: Vec<i64> = (0..w)
        .map(|x| {
            let t = x as f64 / w as f64 * std::f64::consts::TAU;
            (amp1 * (freq1 * t + phase1).sin() + amp2 * (freq2 * t + phase2).sin()).round() as i64
        })
        .collect();

    let a_top: Vec<i64> = curve.iter().map(|c| band_top as i64 + c).collect();
    let a_bot: Vec<i64> = a_top.iter().map(|t| t + thickness_a as i64).collect();
    let b_top: Vec<i64> = a_bot.iter().map(|t| t + gap as i64).collect();
    let b_bot: Vec<i64> = b_top.iter().map(|t| t + thickness_b as i64).collect();

    // Geometry must stay strictly inside the frame.
    for x in 0..w {
        if a_top[x] < 1 || b_bot[x] >= h as i64 - 1 {
            return None;
        }
    }

    let comp_a = Mask::from_fn(h, w, |y, x| (y as i64) >= a_top[x] && (y as i64) < a_bot[x]);
    let comp_b = Mask::from_fn(h, w, |y, x| (y as i64) >= b_top[x] && (y as i64) < b_bot[x]);
    if comp_a.count_ones() < MIN_COMPARTMENT_AREA || comp_b.count_ones() < MIN_COMPARTMENT_AREA {
        return None;
    }
    debug_assert!((0..h * w).all(|i| comp_a.data()[i] & comp_b.data()[i] == 0));

    let coarse = value_noise(rng, h, w, 8);
    let fine = value_noise(rng, h, w, 4);
    let normal = Normal::new(0.0, params.noise_std).ok()?;
    let mut data = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let yy = y as i64;
            let base = if yy >= a_top[x] && yy < a_bot[x] {
                BASE_BAND_A
            } else if yy >= b_top[x] && yy < b_bot[x] {
                BASE_BAND_B
            } else if yy >= a_bot[x] && yy < b_top[x] {
                BASE_GAP
            } else {
                BASE_BACKGROUND
            };
            let texture = params.texture_amplitude * (coarse[y * w + x] + 0.5 * fine[y * w + x]);
            let noise: f64 = normal.sample(rng);
            data.push((base + texture + noise).clamp(0.0, 1.0));
        }
    }
    let image = Image::new(h, w, data).ok()?;
    Some(Sample { image, comp_a, comp_b })
}

/// How a reference mask is damaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorruptionMode {
    Dilate,
    Erode,
    Shift,
    Warp,
    DropRegion,
}

/// Requested corruption: the magnitude is searched unless fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub mode: CorruptionMode,
    /// Fixed magnitude; when absent the magnitude is found by bisection
    /// so that the achieved overlap lands within [`DSC_TOLERANCE`] of
    /// `target_dsc`.
    pub magnitude: Option<f64>,
    pub target_dsc: f64,
    pub seed: u64,
}

/// A corruption that met its target, with the magnitude that was used.
#[derive(Debug, Clone)]
pub struct CorruptionOutcome {
    pub mask: Mask,
    pub achieved_dsc: f64,
    pub magnitude: f64,
}

/// Structural draws that stay fixed while the magnitude is searched.
struct CorruptionLatent {
    angle: f64,
    warp_freq: f64,
    warp_phase: f64,
    drop_center: (usize, usize),
}

fn corruption_latent(mask: &Mask, seed: u64) -> CorruptionLatent {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
    let warp_freq = rng.gen_range(1..=2) as f64;
    let warp_phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let ones: Vec<usize> = mask
        .data()
        .iter()
        .enumerate()
        .filter_map(|(i, v)| (*v == 1).then_some(i))
        .collect();
    let pick = ones[rng.gen_range(0..ones.len())];
    let drop_center = (pick / mask.width(), pick % mask.width());
    CorruptionLatent { angle, warp_freq, warp_phase, drop_center }
}

fn dilate_mask(mask: &Mask) -> Mask {
    let (h, w) = (mask.height(), mask.width());
    Mask::from_fn(h, w, |y, x| {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let (ny, nx) = (y as i64 + dy, x as i64 + dx);
                if ny >= 0 && ny < h as i64 && nx >= 0 && nx < w as i64 && mask.get(ny as usize, nx as usize) == 1 {
                    return true;
                }
            }
        }
        false
    })
}

fn erode_mask(mask: &Mask) -> Mask {
    let (h, w) = (mask.height(), mask.width());
    Mask::from_fn(h, w, |y, x| {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let (ny, nx) = (y as i64 + dy, x as i64 + dx);
                if ny < 0 || ny >= h as i64 || nx < 0 || nx >= w as i64 || mask.get(ny as usize, nx as usize) == 0 {
                    return false;
                }
            }
        }
        true
    })
}

fn apply_corruption(mask: &Mask, mode: CorruptionMode, magnitude: f64, latent: &CorruptionLatent) -> Mask {
    let (h, w) = (mask.height(), mask.width());
    match mode {
        CorruptionMode::Dilate => {
            let mut m = mask.clone();
            for _ in 0..magnitude.round().max(0.0) as usize {
                m = dilate_mask(&m);
            }
            m
        }
        CorruptionMode::Erode => {
            let mut m = mask.clone();
            for _ in 0..magnitude.round().max(0.0) as usize {
                m = erode_mask(&m);
            }
            m
        }
        CorruptionMode::Shift => {
            let dy = (magnitude * latent.angle.sin()).round() as i64;
            let dx = (magnitude * latent.angle.cos()).round() as i64;
            Mask::from_fn(h, w, |y, x| {
                let (sy, sx) = (y as i64 - dy, x as i64 - dx);
                sy >= 0 && sy < h as i64 && sx >= 0 && sx < w as i64 && mask.get(sy as usize, sx as usize) == 1
            })
        }
        CorruptionMode::Warp => {
            // Column-wise vertical displacement.
            let shifts: Vec<i64> = (0..w)
                .map(|x| {
                    let t = x as f64 / w as f64 * std::f64::consts::TAU;
                    (magnitude * (latent.warp_freq * t + latent.warp_phase).sin()).round() as i64
                })
                .collect();
            Mask::from_fn(h, w, |y, x| {
                let sy = y as i64 - shifts[x];
                sy >= 0 && sy < h as i64 && mask.get(sy as usize, x) == 1
            })
        }
        CorruptionMode::DropRegion => {
            let (cy, cx) = latent.drop_center;
            let r2 = magnitude * magnitude;
            Mask::from_fn(h, w, |y, x| {
                if mask.get(y, x) == 0 {
                    return false;
                }
                let dy = y as f64 - cy as f64;
                let dx = x as f64 - cx as f64;
                dy * dy + dx * dx > r2
            })
        }
    }
}

/// Corrupt a mask so that its overlap with the original lands within
/// [`DSC_TOLERANCE`] of `spec.target_dsc`. Deterministic per seed; fails
/// with a corruption error when the mode cannot reach the target.
pub fn corrupt(mask: &Mask, spec: &CorruptionSpec) -> Result<Mask> {
    Ok(corrupt_with_report(mask, spec)?.mask)
}

/// As [`corrupt`], also reporting the achieved overlap and magnitude.
pub fn corrupt_with_report(mask: &Mask, spec: &CorruptionSpec) -> Result<CorruptionOutcome> {
    if mask.is_empty_mask() {
        return Err(Error::EmptyMask("cannot corrupt an empty mask".into()));
    }
    if !(spec.target_dsc > 0.0 && spec.target_dsc <= 1.0) {
        return Err(Error::Param(format!("target dsc {} outside (0, 1]", spec.target_dsc)));
    }
    if spec.target_dsc == 1.0 && spec.magnitude.is_none() {
        return Ok(CorruptionOutcome { mask: mask.clone(), achieved_dsc: 1.0, magnitude: 0.0 });
    }
    let latent = corruption_latent(mask, spec.seed);
    let eval = |mag: f64| -> Result<(Mask, f64)> {
        let m = apply_corruption(mask, spec.mode, mag, &latent);
        let d = dice_score(&m, mask)?;
        Ok((m, d))
    };

    if let Some(mag) = spec.magnitude {
        let (m, d) = eval(mag)?;
        return check_outcome(m, d, mag, spec);
    }

    match spec.mode {
        CorruptionMode::Dilate | CorruptionMode::Erode => {
            // Integer magnitudes: scan outward, keep the best.
            let mut best: Option<(Mask, f64, f64)> = None;
            for k in 1..=16u32 {
                let (m, d) = eval(k as f64)?;
                let better = best
                    .as_ref()
                    .map(|(_, bd, _)| (d - spec.target_dsc).abs() < (bd - spec.target_dsc).abs())
                    .unwrap_or(true);
                if better {
                    best = Some((m, d, k as f64));
                }
                if d < spec.target_dsc - DSC_TOLERANCE {
                    break; // monotone decreasing, no point going further
                }
            }
            let (m, d, mag) = best.expect("at least one magnitude evaluated");
            check_outcome(m, d, mag, spec)
        }
        CorruptionMode::Shift | CorruptionMode::Warp | CorruptionMode::DropRegion => {
            // Continuous magnitude: bisect on the overlap being above target.
            let mut lo = 0.0f64;
            let mut hi = (mask.height().max(mask.width())) as f64;
            for _ in 0..48 {
                let mid = 0.5 * (lo + hi);
                let (_, d) = eval(mid)?;
                if d > spec.target_dsc {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let (m_lo, d_lo) = eval(lo)?;
            let (m_hi, d_hi) = eval(hi)?;
            if (d_lo - spec.target_dsc).abs() <= (d_hi - spec.target_dsc).abs() {
                check_outcome(m_lo, d_lo, lo, spec)
            } else {
                check_outcome(m_hi, d_hi, hi, spec)
            }
        }
    }
}

fn check_outcome(mask: Mask, achieved: f64, magnitude: f64, spec: &CorruptionSpec) -> Result<CorruptionOutcome> {
    if (achieved - spec.target_dsc).abs() > DSC_TOLERANCE {
        return Err(Error::Corruption(format!(
            "{:?} reached dsc {achieved:.3}, target {} +/- {DSC_TOLERANCE}",
            spec.mode, spec.target_dsc
        )));
    }
    Ok(CorruptionOutcome { mask, achieved_dsc: achieved, magnitude })
}

/// Counts and corruption targets for one dataset split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSpec {
    pub name: String,
    /// Samples whose candidate segmentation is the reference itself.
    pub good: usize,
    /// (target overlap, count) pairs for corrupted candidates.
    pub corrupt: Vec<(f64, usize)>,
    pub seed: u64,
}

/// Full dataset recipe: scene ranges plus the split layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub scene: SceneParams,
    pub splits: Vec<SplitSpec>,
}

/// Corruption applied to one sample, as recorded in the split index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorruptionRecord {
    pub mode: CorruptionMode,
    pub target_dsc: f64,
    pub magnitude: f64,
    pub seed: u64,
}

/// One line of a split index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    pub scene_seed: u64,
    pub ref_dsc: f64,
    pub corruption: Option<CorruptionRecord>,
}

/// On-disk index of one split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitIndex {
    pub split: String,
    pub samples: Vec<IndexEntry>,
}

const CYCLE_MODES: [CorruptionMode; 5] = [
    CorruptionMode::Warp,
    CorruptionMode::Shift,
    CorruptionMode::Dilate,
    CorruptionMode::DropRegion,
    CorruptionMode::Erode,
];

/// Build the dataset under `root` as
/// `<root>/<split>/{img,ref,seg}/NNNN.pgm` plus `index.json`.
/// Deterministic: rebuilding with the same manifest is byte-identical.
pub fn build_dataset(root: &Path, manifest: &DatasetManifest) -> Result<Vec<SplitIndex>> {
    let mut indices = Vec::with_capacity(manifest.splits.len());
    for split in &manifest.splits {
        indices.push(build_split(root, &manifest.scene, split)?);
    }
    Ok(indices)
}

fn build_split(root: &Path, scene: &SceneParams, split: &SplitSpec) -> Result<SplitIndex> {
    let dir = root.join(&split.name);
    for sub in ["img", "ref", "seg"] {
        fs::create_dir_all(dir.join(sub))?;
    }

    // Plan the candidate segmentations: good entries first, then each
    // corruption target in listed order.
    let mut targets: Vec<Option<f64>> = vec![None; split.good];
    for (t, count) in &split.corrupt {
        targets.extend(std::iter::repeat(Some(*t)).take(*count));
    }

    let mut samples = Vec::with_capacity(targets.len());
    let mut corrupt_counter = 0usize;
    for (i, target) in targets.iter().enumerate() {
        let id = format!("{i:04}");
        let mut entry: Option<(Sample, Mask, f64, Option<CorruptionRecord>)> = None;
        // A corruption target can be unreachable on a particular scene;
        // retry with fresh scenes before giving up.
        let mut last_err: Option<Error> = None;
        for retry in 0..4u64 {
            let scene_seed = split
                .seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(i as u64)
                .wrapping_add(retry.wrapping_mul(7919));
            let sample = gen_sample(&SceneParams { seed: scene_seed, ..*scene })?;
            let reference = sample.reference_mask();
            match target {
                None => {
                    entry = Some((sample, reference, 1.0, None));
                    break;
                }
                Some(t) => {
                    let mut done = false;
                    for mode_try in 0..CYCLE_MODES.len() {
                        let mode = CYCLE_MODES[(corrupt_counter + mode_try) % CYCLE_MODES.len()];
                        let spec = CorruptionSpec {
                            mode,
                            magnitude: None,
                            target_dsc: *t,
                            seed: scene_seed.wrapping_add(mode_try as u64),
                        };
                        match corrupt_with_report(&reference, &spec) {
                            Ok(outcome) => {
                                let record = CorruptionRecord {
                                    mode,
                                    target_dsc: *t,
                                    magnitude: outcome.magnitude,
                                    seed: spec.seed,
                                };
                                entry = Some((sample.clone(), outcome.mask, outcome.achieved_dsc, Some(record)));
                                done = true;
                                break;
                            }
                            Err(e @ Error::Corruption(_)) => last_err = Some(e),
                            Err(e) => return Err(e),
                        }
                    }
                    if done {
                        break;
                    }
                }
            }
        }
        let (sample, seg, ref_dsc, corruption) = entry.ok_or_else(|| {
            last_err.unwrap_or_else(|| Error::Corruption(format!("sample {id}: no mode reached its target")))
        })?;
        if target.is_some() {
            corrupt_counter += 1;
        }

        pgm::write_image_pgm(&dir.join("img").join(format!("{id}.pgm")), &sample.image)?;
        pgm::write_mask_pgm(&dir.join("ref").join(format!("{id}.pgm")), &sample.reference_mask())?;
        pgm::write_mask_pgm(&dir.join("seg").join(format!("{id}.pgm")), &seg)?;
        samples.push(IndexEntry {
            id,
            scene_seed: split.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64),
            ref_dsc,
            corruption,
        });
    }

    let index = SplitIndex { split: split.name.clone(), samples };
    let mut text = serde_json::to_string_pretty(&index)
        .map_err(|e| Error::Format(format!("index encode: {e}")))?;
    text.push('\n');
    fs::write(dir.join("index.json"), text)?;
    Ok(index)
}

/// Read a split index written by [`build_dataset`].
pub fn load_split_index(root: &Path, split: &str) -> Result<SplitIndex> {
    let path = root.join(split).join("index.json");
    serde_json::from_slice(&fs::read(&path)?)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Paths of one sample's files.
pub fn sample_paths(root: &Path, split: &str, id: &str) -> (PathBuf, PathBuf, PathBuf) {
    let dir = root.join(split);
    (
        dir.join("img").join(format!("{id}.pgm")),
        dir.join("ref").join(format!("{id}.pgm")),
        dir.join("seg").join(format!("{id}.pgm")),
    )
}

/// Load one sample's image, reference mask, and candidate segmentation.
pub fn load_sample(root: &Path, split: &str, id: &str) -> Result<(Image, Mask, Mask)> {
    let (img, reference, seg) = sample_paths(root, split, id);
    Ok((pgm::read_image_pgm(&img)?, pgm::read_mask_pgm(&reference)?, pgm::read_mask_pgm(&seg)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::extract_roi;

    #[test]
    fn same_seed_bit_identical() {
        let params = SceneParams { seed: 123, ..SceneParams::default() };
        let a = gen_sample(&params).unwrap();
        let b = gen_sample(&params).unwrap();
        assert_eq!(a, b);
        let c = gen_sample(&SceneParams { seed: 124, ..params }).unwrap();
        assert_ne!(a.image, c.image);
    }

    #[test]
    fn compartments_valid_across_seeds() {
        for seed in 0..400 {
            let s = gen_sample(&SceneParams { seed, ..SceneParams::default() }).unwrap();
            let overlap = s
                .comp_a
                .data()
                .iter()
                .zip(s.comp_b.data())
                .filter(|(a, b)| **a == 1 && **b == 1)
                .count();
            assert_eq!(overlap, 0, "seed {seed}: compartments overlap");
            assert!(s.comp_a.count_ones() >= MIN_COMPARTMENT_AREA);
            assert!(s.comp_b.count_ones() >= MIN_COMPARTMENT_AREA);
            assert!(s.image.intensity_std() > 0.02, "seed {seed}: image nearly constant");
            extract_roi(&s.comp_a, &s.comp_b, 24, 48).unwrap();
        }
    }

    #[test]
    fn corrupt_identity_target() {
        let s = gen_sample(&SceneParams::default()).unwrap();
        let reference = s.reference_mask();
        let spec = CorruptionSpec { mode: CorruptionMode::Warp, magnitude: None, target_dsc: 1.0, seed: 5 };
        assert_eq!(corrupt(&reference, &spec).unwrap(), reference);
    }

    #[test]
    fn corrupt_hits_targets() {
        let s = gen_sample(&SceneParams { seed: 9, ..SceneParams::default() }).unwrap();
        let reference = s.reference_mask();
        for (mode, target) in [
            (CorruptionMode::Dilate, 0.7),
            (CorruptionMode::Warp, 0.55),
            (CorruptionMode::Shift, 0.4),
            (CorruptionMode::DropRegion, 0.8),
        ] {
            let spec = CorruptionSpec { mode, magnitude: None, target_dsc: target, seed: 11 };
            let out = corrupt_with_report(&reference, &spec).unwrap();
            let measured = dice_score(&out.mask, &reference).unwrap();
            assert!(
                (measured - target).abs() <= DSC_TOLERANCE,
                "{mode:?}: dsc {measured} for target {target}"
            );
            assert_eq!(measured, out.achieved_dsc);
        }
    }

    #[test]
    fn erode_thin_mask_errors_or_achieves() {
        let thin = Mask::from_fn(32, 32, |y, _| y == 10 || y == 11);
        let spec = CorruptionSpec { mode: CorruptionMode::Erode, magnitude: None, target_dsc: 0.3, seed: 1 };
        match corrupt_with_report(&thin, &spec) {
            Ok(out) => assert!((out.achieved_dsc - 0.3).abs() <= DSC_TOLERANCE),
            Err(Error::Corruption(_)) => {}
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn corrupt_empty_mask_is_error() {
        let empty = Mask::zeros(8, 8);
        let spec = CorruptionSpec { mode: CorruptionMode::Dilate, magnitude: None, target_dsc: 0.5, seed: 0 };
        assert!(matches!(corrupt(&empty, &spec), Err(Error::EmptyMask(_))));
    }

    fn tiny_manifest() -> DatasetManifest {
        DatasetManifest {
            scene: SceneParams::default(),
            splits: vec![
                SplitSpec { name: "train".into(), good: 3, corrupt: vec![], seed: 1 },
                SplitSpec { name: "eval".into(), good: 2, corrupt: vec![(0.5, 2), (0.8, 2)], seed: 2 },
            ],
        }
    }

    fn dir_bytes(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
        let mut files = Vec::new();
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in std::fs::read_dir(&d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    files.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
                }
            }
        }
        files.sort();
        files
    }

    #[test]
    fn dataset_rebuild_is_byte_identical() {
        let manifest = tiny_manifest();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        build_dataset(d1.path(), &manifest).unwrap();
        build_dataset(d2.path(), &manifest).unwrap();
        assert_eq!(dir_bytes(d1.path()), dir_bytes(d2.path()));
    }

    #[test]
    fn train_split_has_no_corruptions_and_loads_back() {
        let manifest = tiny_manifest();
        let dir = tempfile::tempdir().unwrap();
        let indices = build_dataset(dir.path(), &manifest).unwrap();
        assert!(indices[0].samples.iter().all(|s| s.corruption.is_none() && s.ref_dsc == 1.0));
        assert!(indices[1].samples.iter().any(|s| s.corruption.is_some()));

        let loaded = load_split_index(dir.path(), "eval").unwrap();
        assert_eq!(loaded.samples.len(), indices[1].samples.len());
        for entry in &loaded.samples {
            let (img, reference, seg) = load_sample(dir.path(), "eval", &entry.id).unwrap();
            assert_eq!((img.height(), img.width()), (64, 64));
            let measured = dice_score(&seg, &reference).unwrap();
            assert!((measured - entry.ref_dsc).abs() < 1e-12);
        }
    }
}
