//! The verification pipeline: mask the image around the candidate
//! segmentation boundary, reconstruct patchwise, score the reconstruction
//! against the original, and map the score to an Accept / Uncertain /
//! Reject verdict. Thresholds are calibrated so that no bad validation
//! sample is ever accepted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{apply_strip_mask, boundary_strip, l2_error, split_patches, stitch_patches, Image, Mask};
use crate::nnet::{generate, RecModel};
use crate::ssim::{ssim_score, SsimConfig};

/// Pipeline geometry: strip width, patch size, and the score config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub strip_width: usize,
    pub patch: usize,
    pub ssim: SsimConfig,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { strip_width: 3, patch: 16, ssim: SsimConfig::default() }
    }
}

/// Score thresholds; `t_reject <= t_accept`, enforced on construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawThresholds")]
pub struct Thresholds {
    t_accept: f64,
    t_reject: f64,
}

#[derive(Deserialize)]
struct RawThresholds {
    t_accept: f64,
    t_reject: f64,
}

impl TryFrom<RawThresholds> for Thresholds {
    type Error = Error;

    fn try_from(raw: RawThresholds) -> Result<Self> {
        Thresholds::new(raw.t_accept, raw.t_reject)
    }
}

impl Thresholds {
    pub fn new(t_accept: f64, t_reject: f64) -> Result<Self> {
        if !(t_accept.is_finite() && t_reject.is_finite()) || t_reject > t_accept {
            return Err(Error::Param(format!(
                "invalid thresholds: reject {t_reject} must not exceed accept {t_accept}"
            )));
        }
        Ok(Self { t_accept, t_reject })
    }

    pub fn accept(&self) -> f64 {
        self.t_accept
    }

    pub fn reject(&self) -> f64 {
        self.t_reject
    }
}

/// The three-way decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictLabel {
    Accept,
    Uncertain,
    Reject,
}

impl std::fmt::Display for VerdictLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VerdictLabel::Accept => write!(f, "accept"),
            VerdictLabel::Uncertain => write!(f, "uncertain"),
            VerdictLabel::Reject => write!(f, "reject"),
        }
    }
}

/// A decision with the scores and thresholds that produced it. The L2
/// baseline is carried for reporting only; the label depends solely on
/// the SSIM score and the thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdict {
    pub label: VerdictLabel,
    pub ssim: f64,
    pub l2: Option<f64>,
    pub thresholds: Thresholds,
}

/// Map a score to its verdict: Accept iff `ssim >= t_accept` (boundary
/// inclusive), Reject iff `ssim < t_reject`, Uncertain between.
pub fn verdict(ssim: f64, th: &Thresholds) -> Verdict {
    let label = if ssim >= th.t_accept {
        VerdictLabel::Accept
    } else if ssim < th.t_reject {
        VerdictLabel::Reject
    } else {
        VerdictLabel::Uncertain
    };
    Verdict { label, ssim, l2: None, thresholds: *th }
}

fn split_mask_patches(mask: &Mask, patch: usize) -> Vec<Mask> {
    let rows = mask.height() / patch;
    let cols = mask.width() / patch;
    let mut out = Vec::with_capacity(rows * cols);
    for gy in 0..rows {
        for gx in 0..cols {
            out.push(Mask::from_fn(patch, patch, |y, x| {
                mask.get(gy * patch + y, gx * patch + x) == 1
            }));
        }
    }
    out
}

/// Reconstruct the image from its strip-masked version: boundary strip,
/// mask, split into patches, generate each, stitch back. Pixels outside
/// the strip are re-synthesized too; only the output shape is guaranteed.
pub fn reconstruct(img: &Image, seg: &Mask, model: &RecModel, cfg: &VerifyConfig) -> Result<Image> {
    if img.height() != seg.height() || img.width() != seg.width() {
        return Err(Error::Shape("image and segmentation differ in shape".into()));
    }
    if !model.all_finite() {
        return Err(Error::Model("reconstructor has non-finite parameters".into()));
    }
    let strip = boundary_strip(seg, cfg.strip_width)?;
    let masked = apply_strip_mask(img, &strip)?;
    let (patches, grid) = split_patches(&masked, cfg.patch, cfg.patch)?;
    let strip_patches = split_mask_patches(&strip, cfg.patch);
    let outputs = patches
        .iter()
        .zip(&strip_patches)
        .map(|(m, s)| generate(model, m, s))
        .collect::<Result<Vec<_>>>()?;
    stitch_patches(&outputs, &grid)
}

/// The two verification scores: windowed SSIM and the L2 baseline.
pub fn verification_score(img: &Image, rec: &Image, cfg: &VerifyConfig) -> Result<(f64, f64)> {
    Ok((ssim_score(img, rec, &cfg.ssim)?, l2_error(img, rec)?))
}

/// Full per-sample verification: reconstruct, score, and (when
/// thresholds are given) decide.
pub fn verify_sample(
    img: &Image,
    seg: &Mask,
    model: &RecModel,
    cfg: &VerifyConfig,
    thresholds: Option<&Thresholds>,
) -> Result<(f64, f64, Option<Verdict>)> {
    let rec = reconstruct(img, seg, model, cfg)?;
    let (ssim, l2) = verification_score(img, &rec, cfg)?;
    let v = thresholds.map(|th| {
        let mut v = verdict(ssim, th);
        v.l2 = Some(l2);
        v
    });
    Ok((ssim, l2, v))
}

/// Calibration settings: the overlap score at which a segmentation
/// counts as good, and the margin added beyond the observed extremes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrateConfig {
    pub dsc_good: f64,
    pub margin: f64,
}

impl Default for CalibrateConfig {
    fn default() -> Self {
        Self { dsc_good: 0.7, margin: 1e-3 }
    }
}

/// Calibration result. `validation_fpr` is the fraction of good
/// validation samples that fail to reach Accept; false negatives on the
/// validation set are zero by construction of `t_accept`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CalibrationReport {
    pub thresholds: Thresholds,
    pub good_count: usize,
    pub bad_count: usize,
    pub validation_false_negatives: usize,
    pub validation_fpr: f64,
    pub uncertain_fraction: f64,
}

/// Choose thresholds from validation pairs of (ssim, reference dsc):
/// `t_accept` sits just above every bad sample's score, so no bad
/// validation sample can be accepted; `t_reject` sits just below every
/// good sample's score, floored at `t_accept`.
pub fn calibrate_thresholds(validation: &[(f64, f64)], cfg: &CalibrateConfig) -> Result<CalibrationReport> {
    if !(cfg.dsc_good > 0.0 && cfg.dsc_good <= 1.0) || cfg.margin < 0.0 {
        return Err(Error::Param("dsc_good must be in (0, 1] and margin >= 0".into()));
    }
    let bad: Vec<f64> = validation.iter().filter(|(_, d)| *d < cfg.dsc_good).map(|(s, _)| *s).collect();
    let good: Vec<f64> = validation.iter().filter(|(_, d)| *d >= cfg.dsc_good).map(|(s, _)| *s).collect();
    if bad.is_empty() {
        return Err(Error::Calibration("validation set has no bad samples".into()));
    }
    if good.is_empty() {
        return Err(Error::Calibration("validation set has no good samples".into()));
    }
    let max_bad = bad.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min_good = good.iter().cloned().fold(f64::INFINITY, f64::min);
    let t_accept = max_bad + cfg.margin;
    let t_reject = (min_good - cfg.margin).min(t_accept);
    let thresholds = Thresholds::new(t_accept, t_reject)?;

    let fn_count = bad.iter().filter(|s| verdict(**s, &thresholds).label == VerdictLabel::Accept).count();
    let fp_count = good.iter().filter(|s| verdict(**s, &thresholds).label != VerdictLabel::Accept).count();
    let uncertain = validation
        .iter()
        .filter(|(s, _)| verdict(*s, &thresholds).label == VerdictLabel::Uncertain)
        .count();
    Ok(CalibrationReport {
        thresholds,
        good_count: good.len(),
        bad_count: bad.len(),
        validation_false_negatives: fn_count,
        validation_fpr: fp_count as f64 / good.len() as f64,
        uncertain_fraction: uncertain as f64 / validation.len() as f64,
    })
}
