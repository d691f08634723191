use std::path::Path;

use segverify::attacks::{attack_verifier, AttackSpec};
use segverify::image::{apply_strip_mask, boundary_strip, dice_score, split_patches, Mask};
use segverify::nnet::{load_rec_model, save_rec_model, train_recnet, RecModel, RecSample, ReconLoss, TrainConfig};
use segverify::synthdata::{corrupt_with_report, gen_sample, CorruptionMode, CorruptionSpec, SceneParams};
use segverify::verify::{verify_sample, Thresholds, VerifyConfig};

const MODES: [CorruptionMode; 5] = [CorruptionMode::Warp, CorruptionMode::Shift, CorruptionMode::Dilate, CorruptionMode::DropRegion, CorruptionMode::Erode];

fn rec_training_set(n: u64, strip_width: usize) -> Vec<RecSample> {
    let mut out = Vec::new();
    for seed in 0..n {
        let s = gen_sample(&SceneParams { seed, ..SceneParams::default() }).unwrap();
        let reference = s.reference_mask();
        let strip = boundary_strip(&reference, strip_width).unwrap();
        let masked = apply_strip_mask(&s.image, &strip).unwrap();
        let (mp, _) = split_patches(&masked, 16, 16).unwrap();
        let (tp, _) = split_patches(&s.image, 16, 16).unwrap();
        for (i, (m, t)) in mp.into_iter().zip(tp).enumerate() {
            let sp = Mask::from_fn(16, 16, |y, x| strip.get((i / 4) * 16 + y, (i % 4) * 16 + x) == 1);
            out.push(RecSample { masked: m, strip: sp, target: t });
        }
    }
    out
}

fn cached_v2() -> RecModel {
    let stem = Path::new("/tmp/probe_rec");
    if let Ok(m) = load_rec_model(stem) {
        return m;
    }
    let samples = rec_training_set(48, 3);
    let cfg = TrainConfig { steps: 1200, batch: 4, recon: ReconLoss::Ssim, ..TrainConfig::default() };
    let out = train_recnet(&samples, &cfg).unwrap();
    save_rec_model(stem, &out.model).unwrap();
    out.model
}

#[test]
fn mode_scatter() {
    let model = cached_v2();
    let vcfg = VerifyConfig::default();
    println!("mode, target, achieved_dsc, ssim");
    for mode in MODES {
        for target in [0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95] {
            let mut scores = Vec::new();
            for seed in 3000..3008u64 {
                let s = gen_sample(&SceneParams { seed, ..SceneParams::default() }).unwrap();
                let reference = s.reference_mask();
                let spec = CorruptionSpec { mode, magnitude: None, target_dsc: target, seed: seed * 7 + 1 };
                if let Ok(o) = corrupt_with_report(&reference, &spec) {
                    let d = dice_score(&o.mask, &reference).unwrap();
                    let (ssim, _, _) = verify_sample(&s.image, &o.mask, &model, &vcfg, None).unwrap();
                    scores.push((d, ssim));
                }
            }
            if scores.is_empty() { println!("{mode:?} t={target}: unreachable"); continue; }
            let max = scores.iter().map(|(_, s)| *s).fold(f64::NEG_INFINITY, f64::max);
            let min = scores.iter().map(|(_, s)| *s).fold(f64::INFINITY, f64::min);
            println!("{mode:?} t={target}: n={} ssim [{min:.3}, {max:.3}]", scores.len());
        }
    }
    let mut good = Vec::new();
    for seed in 3000..3016u64 {
        let s = gen_sample(&SceneParams { seed, ..SceneParams::default() }).unwrap();
        let reference = s.reference_mask();
        let (ssim, _, _) = verify_sample(&s.image, &reference, &model, &vcfg, None).unwrap();
        good.push(ssim);
    }
    let gmin = good.iter().cloned().fold(f64::INFINITY, f64::min);
    println!("good (dsc=1): n={} min {gmin:.3}", good.len());
}

#[test]
fn single_step_attack() {
    let model = cached_v2();
    let vcfg = VerifyConfig::default();
    let th = Thresholds::new(0.65, 0.60).unwrap();
    let mut deltas = Vec::new();
    let mut flips = 0;
    for (i, seed) in (4000..4012u64).enumerate() {
        let s = gen_sample(&SceneParams { seed, ..SceneParams::default() }).unwrap();
        let reference = s.reference_mask();
        let mode = [CorruptionMode::Warp, CorruptionMode::Shift][i % 2];
        let spec_c = CorruptionSpec { mode, magnitude: None, target_dsc: 0.45, seed };
        let bad = corrupt_with_report(&reference, &spec_c).unwrap();
        for iters in [1usize, 3] {
            let res = attack_verifier(&model, &vcfg, &th, &s.image, &bad.mask, &AttackSpec::default(), iters).unwrap();
            if iters == 1 {
                deltas.push(res.score_best - res.score_before);
                if res.verdict_after.unwrap().label == segverify::verify::VerdictLabel::Accept { flips += 1; }
            }
            println!("seed {seed} iters {iters}: before {:.4} best {:.4} final {:.4}", res.score_before, res.score_best, res.score_after);
        }
    }
    deltas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!("single-step: flips {flips} median delta {:+.4} max delta {:+.4}", deltas[deltas.len()/2], deltas[deltas.len()-1]);
}
