//! Training loops: alternating adversarial training for the patch
//! reconstructor and plain regression for the overlap scorer.
//!
//! Both loops are bit-deterministic for a fixed seed: batches are drawn
//! from a seeded stream and every reduction runs in sample order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{bce_logit_loss, mae_loss, mse_loss};
use super::models::{DiscModel, RecModel, RegModel};
use super::{Adam, Tensor};
use crate::error::{Error, Result};
use crate::image::{Image, Mask};
use crate::ssim::{ssim_loss, SsimConfig};

/// Which reconstruction objective drives the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReconLoss {
    Mae,
    Ssim,
}

/// Hyperparameters for reconstructor training.
///
/// The generator objective is `gan_weight * adversarial + reconstruction`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch: usize,
    pub steps: usize,
    pub gan_weight: f64,
    pub recon: ReconLoss,
    pub seed: u64,
    pub ssim: SsimConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 2e-4,
            batch: 4,
            steps: 1500,
            gan_weight: 0.01,
            recon: ReconLoss::Ssim,
            seed: 7,
            ssim: SsimConfig::default(),
        }
    }
}

/// One training example: a boundary-masked patch, its strip mask, and the
/// unmasked original patch.
#[derive(Debug, Clone)]
pub struct RecSample {
    pub masked: Image,
    pub strip: Mask,
    pub target: Image,
}

/// Per-step loss record.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StepStats {
    pub step: usize,
    pub disc_loss: f64,
    pub gen_adv: f64,
    pub gen_recon: f64,
}

/// A trained reconstructor plus its discriminator and loss history.
#[derive(Debug)]
pub struct RecTraining {
    pub model: RecModel,
    pub disc: DiscModel,
    pub history: Vec<StepStats>,
}

fn sample_input(s: &RecSample) -> Result<Tensor> {
    let strip_plane: Vec<f64> = s.strip.data().iter().map(|v| *v as f64).collect();
    Tensor::from_planes(&[s.masked.data(), &strip_plane], s.masked.height(), s.masked.width())
}

/// Train the patch reconstructor with the alternating scheme: one
/// discriminator step (cross-entropy on real/fake pairs) then one
/// generator step (weighted adversarial plus reconstruction loss).
pub fn train_recnet(samples: &[RecSample], cfg: &TrainConfig) -> Result<RecTraining> {
    if samples.is_empty() {
        return Err(Error::Param("reconstructor training set is empty".into()));
    }
    if cfg.batch == 0 || cfg.lr <= 0.0 || cfg.gan_weight < 0.0 {
        return Err(Error::Param("batch must be >= 1, lr > 0, gan_weight >= 0".into()));
    }
    let patch = samples[0].masked.height();
    for s in samples {
        let square = s.masked.height() == patch && s.masked.width() == patch;
        if !square || !s.target.same_shape(&s.masked) || s.strip.height() != patch || s.strip.width() != patch {
            return Err(Error::Shape("training patches must share one square shape".into()));
        }
    }
    if cfg.recon == ReconLoss::Ssim && patch < cfg.ssim.window {
        return Err(Error::Param(format!(
            "patch {patch} smaller than ssim window {}",
            cfg.ssim.window
        )));
    }

    let mut gen = RecModel::new(cfg.seed);
    let mut disc = DiscModel::new(cfg.seed.wrapping_add(1), patch)?;
    let mut opt_g = Adam::new(cfg.lr);
    let mut opt_d = Adam::new(cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));
    let mut history = Vec::with_capacity(cfg.steps);

    for step in 0..cfg.steps {
        let batch: Vec<&RecSample> =
            (0..cfg.batch).map(|_| &samples[rng.gen_range(0..samples.len())]).collect();

        // Discriminator step: real pairs toward 1, generated pairs toward 0.
        disc.zero_grads();
        let mut disc_loss = 0.0;
        let term_scale = 1.0 / (2 * cfg.batch) as f64;
        for s in &batch {
            let x = sample_input(s)?;
            let (fake_patch, _) = gen.forward(&x)?;

            let real_in = super::layers::concat_channels(
                &Tensor::from_planes(&[s.target.data()], patch, patch)?,
                &x,
            )?;
            let (logit, cache) = disc.forward(&real_in)?;
            let (l, g) = bce_logit_loss(&[logit], &[1.0])?;
            disc_loss += l;
            disc.backward(&cache, g[0] * term_scale)?;

            let fake_in = super::layers::concat_channels(&fake_patch, &x)?;
            let (logit, cache) = disc.forward(&fake_in)?;
            let (l, g) = bce_logit_loss(&[logit], &[0.0])?;
            disc_loss += l;
            disc.backward(&cache, g[0] * term_scale)?;
        }
        disc_loss *= term_scale;
        opt_d.step(&mut disc.params_mut())?;

        // Generator step: gan_weight * adversarial + reconstruction.
        gen.zero_grads();
        let mut forwards = Vec::with_capacity(cfg.batch);
        let mut rec_patches = Vec::with_capacity(cfg.batch);
        let mut gt_patches = Vec::with_capacity(cfg.batch);
        for s in &batch {
            let x = sample_input(s)?;
            let (out, cache) = gen.forward(&x)?;
            rec_patches.push(Image::new(patch, patch, out.data().to_vec())?);
            gt_patches.push(s.target.clone());
            forwards.push((x, out, cache));
        }

        // Reconstruction gradients per sample, in batch order.
        let (recon_loss, recon_grads): (f64, Vec<Vec<f64>>) = match cfg.recon {
            ReconLoss::Mae => {
                let mut grads = Vec::with_capacity(cfg.batch);
                let mut total = 0.0;
                for (rec, gt) in rec_patches.iter().zip(&gt_patches) {
                    let (l, g) = mae_loss(rec.data(), gt.data())?;
                    total += l;
                    grads.push(g.into_iter().map(|v| v / cfg.batch as f64).collect());
                }
                (total / cfg.batch as f64, grads)
            }
            ReconLoss::Ssim => ssim_loss(&rec_patches, &gt_patches, &cfg.ssim)?,
        };

        let mut gen_adv = 0.0;
        for ((x, out, cache), recon_grad) in forwards.into_iter().zip(recon_grads) {
            let fake_in = super::layers::concat_channels(&out, &x)?;
            let (logit, dcache) = disc.forward(&fake_in)?;
            let (l, g) = bce_logit_loss(&[logit], &[1.0])?;
            gen_adv += l / cfg.batch as f64;
            let adv_scale = cfg.gan_weight / cfg.batch as f64;
            let din = disc.backward_input(&dcache, g[0] * adv_scale)?;
            let (d_out, _) = super::layers::split_channels(&din, 1)?;

            let mut total_grad = Tensor::new(out.shape().to_vec(), recon_grad)?;
            for (t, a) in total_grad.data_mut().iter_mut().zip(d_out.data()) {
                *t += a;
            }
            gen.backward(&cache, &total_grad)?;
        }
        opt_g.step(&mut gen.params_mut())?;

        if !(disc_loss.is_finite() && gen_adv.is_finite() && recon_loss.is_finite()) {
            return Err(Error::Training(format!("non-finite loss at step {step}")));
        }
        history.push(StepStats { step, disc_loss, gen_adv, gen_recon: recon_loss });
    }

    if !gen.all_finite() {
        return Err(Error::Training("non-finite generator parameters".into()));
    }
    Ok(RecTraining { model: gen, disc, history })
}

/// One regression example: image, candidate segmentation, and the true
/// overlap score of that segmentation against the reference.
#[derive(Debug, Clone)]
pub struct RegSample {
    pub image: Image,
    pub seg: Mask,
    pub dsc: f64,
}

/// A trained regressor and its per-step MSE history.
#[derive(Debug)]
pub struct RegTraining {
    pub model: RegModel,
    pub history: Vec<(usize, f64)>,
}

/// Train the overlap-score regressor with squared error.
pub fn train_regnet(samples: &[RegSample], cfg: &TrainConfig) -> Result<RegTraining> {
    if samples.is_empty() {
        return Err(Error::Param("regressor training set is empty".into()));
    }
    if cfg.batch == 0 || cfg.lr <= 0.0 {
        return Err(Error::Param("batch must be >= 1 and lr > 0".into()));
    }
    let size = samples[0].image.height();
    for s in samples {
        if s.image.height() != size || s.image.width() != size || !(0.0..=1.0).contains(&s.dsc) {
            return Err(Error::Shape("regression samples must be square images with dsc in [0, 1]".into()));
        }
    }
    let mut model = RegModel::new(cfg.seed, size)?;
    let mut opt = Adam::new(cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(3));
    let mut history = Vec::with_capacity(cfg.steps);

    for step in 0..cfg.steps {
        model.zero_grads();
        let mut loss = 0.0;
        for _ in 0..cfg.batch {
            let s = &samples[rng.gen_range(0..samples.len())];
            let seg_plane: Vec<f64> = s.seg.data().iter().map(|v| *v as f64).collect();
            let x = Tensor::from_planes(&[s.image.data(), &seg_plane], size, size)?;
            let (p, cache) = model.forward(&x)?;
            let (l, g) = mse_loss(&[p], &[s.dsc])?;
            loss += l / cfg.batch as f64;
            model.backward(&cache, g[0] / cfg.batch as f64)?;
        }
        opt.step(&mut model.params_mut())?;
        if !loss.is_finite() {
            return Err(Error::Training(format!("non-finite loss at step {step}")));
        }
        history.push((step, loss));
    }
    if !model.all_finite() {
        return Err(Error::Training("non-finite regressor parameters".into()));
    }
    Ok(RegTraining { model, history })
}
