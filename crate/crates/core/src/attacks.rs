//! Sign-gradient (FGSM-family) attacks against the regression scorer and
//! against the reconstruction-based verifier.
//!
//! Attacks never mutate the model they are given; gradient plumbing runs
//! on an internal clone. The segmentation channel is treated as
//! continuous during a regressor attack; the verifier re-binarizes it at
//! 0.5 before extracting the boundary strip, which blocks gradients
//! through that channel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{apply_strip_mask, boundary_strip, plane_grid, split_plane, stitch_plane, Image, Mask};
use crate::nnet::{RecModel, RegModel, Tensor};
use crate::ssim::ssim_score_with_grad;
use crate::verify::{verdict, Thresholds, Verdict, VerifyConfig};

/// What the attacker ascends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackTarget {
    /// Ascend the training cost against the true label, `X + ε sign(∇J)`.
    UntargetedAscent,
    /// Ascend the predicted score itself.
    MaximizeScore,
}

/// Which input channels the perturbation may touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackChannels {
    Image,
    Segmentation,
    Both,
}

/// Perturbation budget and routing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub epsilon: f64,
    pub target: AttackTarget,
    pub channels: AttackChannels,
    /// Output range the perturbed inputs are clipped to.
    pub clip: (f64, f64),
}

impl Default for AttackSpec {
    fn default() -> Self {
        Self {
            epsilon: 0.5,
            target: AttackTarget::UntargetedAscent,
            channels: AttackChannels::Both,
            clip: (0.0, 1.0),
        }
    }
}

impl AttackSpec {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon < 0.0 {
            return Err(Error::Param("epsilon must be >= 0".into()));
        }
        if self.clip.0 > self.clip.1 {
            return Err(Error::Param("clip range is inverted".into()));
        }
        Ok(())
    }
}

/// Outcome of one attacked sample. `seg_after` is continuous (stored as
/// an image) because the perturbation treats the mask channel as real
/// valued. For verifier attacks `trajectory` holds the score after each
/// iteration and the verdicts are populated.
#[derive(Debug, Clone)]
pub struct AttackResult {
    pub image_after: Image,
    pub seg_after: Image,
    pub score_before: f64,
    pub score_after: f64,
    /// Best (highest) score the attacker reached at any iterate.
    pub score_best: f64,
    pub verdict_before: Option<Verdict>,
    pub verdict_after: Option<Verdict>,
    pub trajectory: Vec<f64>,
    /// Iterations skipped because the gradient was not finite.
    pub skipped_steps: usize,
}

/// One fast-gradient-sign step: `X + ε · sign(grad)`, then clip. The
/// sign of an exactly zero component is zero, so a zero gradient or a
/// zero ε leaves the input unchanged (up to clipping range).
pub fn fgsm_step(x: &Tensor, grad: &Tensor, eps: f64, clip: (f64, f64)) -> Result<Tensor> {
    if x.shape() != grad.shape() {
        return Err(Error::Shape("fgsm input and gradient shapes differ".into()));
    }
    if eps < 0.0 {
        return Err(Error::Param("epsilon must be >= 0".into()));
    }
    let data = x
        .data()
        .iter()
        .zip(grad.data())
        .map(|(v, g)| {
            let s = if *g > 0.0 {
                1.0
            } else if *g < 0.0 {
                -1.0
            } else {
                0.0
            };
            (v + eps * s).clamp(clip.0, clip.1)
        })
        .collect();
    Tensor::new(x.shape().to_vec(), data)
}

fn mask_channels(grad: &mut Tensor, channels: AttackChannels) {
    let plane = grad.len() / 2;
    match channels {
        AttackChannels::Both => {}
        AttackChannels::Image => grad.data_mut()[plane..].iter_mut().for_each(|g| *g = 0.0),
        AttackChannels::Segmentation => grad.data_mut()[..plane].iter_mut().for_each(|g| *g = 0.0),
    }
}

/// Single-step FGSM against the regression scorer. Builds the two-channel
/// input (image, segmentation), takes the sign-gradient step on the
/// selected channels, and records the predicted score before and after.
pub fn attack_regnet(
    model: &RegModel,
    img: &Image,
    seg: &Mask,
    ref_dsc: f64,
    spec: &AttackSpec,
) -> Result<AttackResult> {
    spec.validate()?;
    if !model.all_finite() {
        return Err(Error::Model("regressor has non-finite parameters".into()));
    }
    let size = model.image_size();
    if img.height() != size || img.width() != size || seg.height() != size || seg.width() != size {
        return Err(Error::Shape(format!("attack inputs must be {size}x{size}")));
    }
    let seg_plane: Vec<f64> = seg.data().iter().map(|v| *v as f64).collect();
    let x = Tensor::from_planes(&[img.data(), &seg_plane], size, size)?;

    let mut worker = model.clone();
    let (p_before, cache) = worker.forward(&x)?;
    // d(cost)/d(prediction); Eq-style ascent uses the squared error
    // against the reference score.
    let dpred = match spec.target {
        AttackTarget::UntargetedAscent => 2.0 * (p_before - ref_dsc),
        AttackTarget::MaximizeScore => 1.0,
    };
    let mut grad = worker.backward(&cache, dpred)?;
    if !grad.all_finite() {
        return Err(Error::Model("non-finite gradient from regressor".into()));
    }
    mask_channels(&mut grad, spec.channels);
    let x_adv = fgsm_step(&x, &grad, spec.epsilon, spec.clip)?;
    let p_after = model.predict_planes(x_adv.channel(0), x_adv.channel(1))?;

    Ok(AttackResult {
        image_after: Image::new(size, size, x_adv.channel(0).to_vec())?,
        seg_after: Image::new(size, size, x_adv.channel(1).to_vec())?,
        score_before: p_before,
        score_after: p_after,
        score_best: p_after,
        verdict_before: None,
        verdict_after: None,
        trajectory: vec![p_after],
        skipped_steps: 0,
    })
}

/// End-to-end verification score and its gradient with respect to the
/// input image: the image enters both as the SSIM reference and through
/// the masked generator input.
fn verifier_score_grad(
    worker: &mut RecModel,
    x_img: &[f64],
    x_seg: &[f64],
    h: usize,
    w: usize,
    cfg: &VerifyConfig,
) -> Result<(f64, Vec<f64>)> {
    let img = Image::new(h, w, x_img.to_vec())?;
    let seg = Mask::from_fn(h, w, |y, x| x_seg[y * w + x] >= 0.5);
    let strip = boundary_strip(&seg, cfg.strip_width)?;
    let masked = apply_strip_mask(&img, &strip)?;

    let grid = plane_grid(h, w, cfg.patch, cfg.patch)?;
    let masked_patches = split_plane(masked.data(), w, &grid);
    let strip_plane: Vec<f64> = strip.data().iter().map(|v| *v as f64).collect();
    let strip_patches = split_plane(&strip_plane, w, &grid);

    let mut outputs = Vec::with_capacity(masked_patches.len());
    let mut caches = Vec::with_capacity(masked_patches.len());
    for (m, s) in masked_patches.iter().zip(&strip_patches) {
        let x = Tensor::from_planes(&[m, s], cfg.patch, cfg.patch)?;
        let (y, cache) = worker.forward(&x)?;
        outputs.push(y);
        caches.push(cache);
    }
    let out_planes: Vec<&[f64]> = outputs.iter().map(|t| t.data()).collect();
    let (_, _, rec_plane) = stitch_plane(&out_planes, &grid);
    let rec = Image::new(h, w, rec_plane.iter().map(|v| v.clamp(0.0, 1.0)).collect())?;

    let (score, grad_ref, grad_rec) = ssim_score_with_grad(&img, &rec, &cfg.ssim)?;

    // Reference-side contribution.
    let mut grad_img = grad_ref;
    // Generator-side contribution: scatter the reconstruction gradient to
    // patches, push through the generator, and gate by the strip mask
    // (masked input pixel = image pixel where the strip is 0).
    let rec_patch_grads = split_plane(&grad_rec, w, &grid);
    for ((cache, gpatch), patch_idx) in caches.iter().zip(&rec_patch_grads).zip(0..) {
        let gout = Tensor::new(vec![1, cfg.patch, cfg.patch], gpatch.clone())?;
        let gin = worker.backward(cache, &gout)?;
        let gy = (patch_idx / grid.cols) * cfg.patch;
        let gx = (patch_idx % grid.cols) * cfg.patch;
        let ch0 = gin.channel(0);
        for py in 0..cfg.patch {
            for px in 0..cfg.patch {
                let full = (gy + py) * w + gx + px;
                if strip.data()[full] == 0 {
                    grad_img[full] += ch0[py * cfg.patch + px];
                }
            }
        }
    }
    Ok((score, grad_img))
}

/// Iterated sign-gradient ascent on the end-to-end verification score.
///
/// The step size is `ε / iters` and iterates stay inside the ε-ball of
/// the original input intersected with the clip range, so a single
/// iteration is exactly one FGSM step of size ε. The segmentation
/// channel receives no gradient (binarization blocks it) and therefore
/// never moves. The final verdict is taken at the attacker's best score.
pub fn attack_verifier(
    model: &RecModel,
    cfg: &VerifyConfig,
    thresholds: &Thresholds,
    img: &Image,
    seg: &Mask,
    spec: &AttackSpec,
    iters: usize,
) -> Result<AttackResult> {
    spec.validate()?;
    if !model.all_finite() {
        return Err(Error::Model("reconstructor has non-finite parameters".into()));
    }
    if img.height() != img.width() || img.height() != seg.height() || img.width() != seg.width() {
        return Err(Error::Shape("verifier attack expects square, equal-shaped inputs".into()));
    }
    let (h, w) = (img.height(), img.width());
    let mut worker = model.clone();

    let x0: Vec<f64> = img.data().to_vec();
    let mut x_img = x0.clone();
    let x_seg: Vec<f64> = seg.data().iter().map(|v| *v as f64).collect();

    let (score_before, mut grad) = verifier_score_grad(&mut worker, &x_img, &x_seg, h, w, cfg)?;
    let verdict_before = verdict(score_before, thresholds);

    let alpha = if iters == 0 { 0.0 } else { spec.epsilon / iters as f64 };
    let mut trajectory = Vec::with_capacity(iters);
    let mut skipped = 0usize;
    let mut current = score_before;
    for _ in 0..iters {
        if !grad.iter().all(|g| g.is_finite()) {
            // Non-differentiable point: the pipeline is deterministic, so
            // re-evaluating the same iterate cannot help. Record and stop.
            skipped += 1;
            break;
        }
        for (i, (v, g)) in x_img.iter_mut().zip(&grad).enumerate() {
            let s = if *g > 0.0 {
                1.0
            } else if *g < 0.0 {
                -1.0
            } else {
                0.0
            };
            let lo = (x0[i] - spec.epsilon).max(spec.clip.0);
            let hi = (x0[i] + spec.epsilon).min(spec.clip.1);
            *v = (*v + alpha * s).clamp(lo, hi);
        }
        let (after, next_grad) = verifier_score_grad(&mut worker, &x_img, &x_seg, h, w, cfg)?;
        current = after;
        grad = next_grad;
        trajectory.push(current);
    }

    let score_after = current;
    let score_best = trajectory.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let score_best = if trajectory.is_empty() { score_before } else { score_best };
    let verdict_after = verdict(if trajectory.is_empty() { score_after } else { score_best }, thresholds);

    Ok(AttackResult {
        image_after: Image::new(h, w, x_img)?,
        seg_after: Image::new(h, w, x_seg)?,
        score_before,
        score_after,
        score_best,
        verdict_before: Some(verdict_before),
        verdict_after: Some(verdict_after),
        trajectory,
        skipped_steps: skipped,
    })
}
