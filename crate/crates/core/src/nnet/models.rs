//! The toy model zoo: a skip-connected encoder-decoder that inpaints
//! boundary-masked patches, the strided-conv discriminator used during
//! its adversarial training, and the two-channel regression scorer that
//! predicts overlap quality directly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{
    concat_channels, split_channels, Conv2d, ConvCache, LeakyRelu, LeakyReluCache, Linear,
    LinearCache, Sigmoid, SigmoidCache, Upsample2x, UpsampleCache,
};
use super::{DiffTensor, Tensor};
use crate::error::{Error, Result};
use crate::image::{Image, Mask};

const LEAKY_SLOPE: f64 = 0.2;

/// Patch reconstructor: three-level encoder-decoder (channels 16/32/64,
/// 3x3 kernels) with skip connections, two input channels (masked image
/// and strip mask), sigmoid output in (0, 1).
#[derive(Debug, Clone)]
pub struct RecModel {
    enc1: Conv2d,
    down1: Conv2d,
    down2: Conv2d,
    bottleneck: Conv2d,
    up1_pre: Conv2d,
    up1_post: Conv2d,
    up2_pre: Conv2d,
    up2_post: Conv2d,
    head: Conv2d,
    act: LeakyRelu,
    up: Upsample2x,
    sig: Sigmoid,
}

pub struct RecCache {
    enc1: (ConvCache, LeakyReluCache),
    down1: (ConvCache, LeakyReluCache),
    down2: (ConvCache, LeakyReluCache),
    bottleneck: (ConvCache, LeakyReluCache),
    up1: UpsampleCache,
    up1_pre: (ConvCache, LeakyReluCache),
    up1_post: (ConvCache, LeakyReluCache),
    up2: UpsampleCache,
    up2_pre: (ConvCache, LeakyReluCache),
    up2_post: (ConvCache, LeakyReluCache),
    head: ConvCache,
    sig: SigmoidCache,
}

impl RecModel {
    pub const IN_CHANNELS: usize = 2;

    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            enc1: Conv2d::new(&mut rng, 2, 16, 3, 1, 1),
            down1: Conv2d::new(&mut rng, 16, 32, 3, 2, 1),
            down2: Conv2d::new(&mut rng, 32, 64, 3, 2, 1),
            bottleneck: Conv2d::new(&mut rng, 64, 64, 3, 1, 1),
            up1_pre: Conv2d::new(&mut rng, 64, 32, 3, 1, 1),
            up1_post: Conv2d::new(&mut rng, 64, 32, 3, 1, 1),
            up2_pre: Conv2d::new(&mut rng, 32, 16, 3, 1, 1),
            up2_post: Conv2d::new(&mut rng, 32, 16, 3, 1, 1),
            head: Conv2d::new(&mut rng, 16, 1, 3, 1, 1),
            act: LeakyRelu::new(LEAKY_SLOPE),
            up: Upsample2x,
            sig: Sigmoid,
        }
    }

    /// Forward over a (2, P, P) input with P divisible by 4; returns the
    /// (1, P, P) reconstruction in (0, 1).
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, RecCache)> {
        match x.shape() {
            [c, h, w] if *c == Self::IN_CHANNELS && h == w && h % 4 == 0 && *h >= 4 => {}
            other => {
                return Err(Error::Shape(format!(
                    "reconstructor expects (2, P, P) with P % 4 == 0, got {other:?}"
                )))
            }
        }
        let step = |conv: &Conv2d, x: &Tensor| -> Result<(Tensor, (ConvCache, LeakyReluCache))> {
            let (y, cc) = conv.forward(x)?;
            let (y, rc) = self.act.forward(&y);
            Ok((y, (cc, rc)))
        };
        let (e1, c_e1) = step(&self.enc1, x)?;
        let (d1, c_d1) = step(&self.down1, &e1)?;
        let (d2, c_d2) = step(&self.down2, &d1)?;
        let (bt, c_bt) = step(&self.bottleneck, &d2)?;
        let (u1, c_up1) = self.up.forward(&bt)?;
        let (u1a, c_u1a) = step(&self.up1_pre, &u1)?;
        let (u1b, c_u1b) = step(&self.up1_post, &concat_channels(&u1a, &d1)?)?;
        let (u2, c_up2) = self.up.forward(&u1b)?;
        let (u2a, c_u2a) = step(&self.up2_pre, &u2)?;
        let (u2b, c_u2b) = step(&self.up2_post, &concat_channels(&u2a, &e1)?)?;
        let (z, c_head) = self.head.forward(&u2b)?;
        let (y, c_sig) = self.sig.forward(&z);
        let cache = RecCache {
            enc1: c_e1,
            down1: c_d1,
            down2: c_d2,
            bottleneck: c_bt,
            up1: c_up1,
            up1_pre: c_u1a,
            up1_post: c_u1b,
            up2: c_up2,
            up2_pre: c_u2a,
            up2_post: c_u2b,
            head: c_head,
            sig: c_sig,
        };
        Ok((y, cache))
    }

    /// Accumulate parameter gradients and return the input gradient.
    pub fn backward(&mut self, cache: &RecCache, gout: &Tensor) -> Result<Tensor> {
        let g = self.sig.backward(&cache.sig, gout);
        let g = self.head.backward(&cache.head, &g)?;
        let g = self.act.backward(&cache.up2_post.1, &g);
        let g = self.up2_post.backward(&cache.up2_post.0, &g)?;
        let (g, g_skip_e1) = split_channels(&g, 16)?;
        let g = self.act.backward(&cache.up2_pre.1, &g);
        let g = self.up2_pre.backward(&cache.up2_pre.0, &g)?;
        let g = self.up.backward(&cache.up2, &g)?;
        let g = self.act.backward(&cache.up1_post.1, &g);
        let g = self.up1_post.backward(&cache.up1_post.0, &g)?;
        let (g, g_skip_d1) = split_channels(&g, 32)?;
        let g = self.act.backward(&cache.up1_pre.1, &g);
        let g = self.up1_pre.backward(&cache.up1_pre.0, &g)?;
        let g = self.up.backward(&cache.up1, &g)?;
        let g = self.act.backward(&cache.bottleneck.1, &g);
        let g = self.bottleneck.backward(&cache.bottleneck.0, &g)?;
        let g = self.act.backward(&cache.down2.1, &g);
        let g = self.down2.backward(&cache.down2.0, &g)?;
        let g = add(&g, &g_skip_d1)?;
        let g = self.act.backward(&cache.down1.1, &g);
        let g = self.down1.backward(&cache.down1.0, &g)?;
        let g = add(&g, &g_skip_e1)?;
        let g = self.act.backward(&cache.enc1.1, &g);
        self.enc1.backward(&cache.enc1.0, &g)
    }

    pub fn named_params(&self) -> Vec<(String, &DiffTensor)> {
        conv_params(&[
            ("enc1", &self.enc1),
            ("down1", &self.down1),
            ("down2", &self.down2),
            ("bottleneck", &self.bottleneck),
            ("up1_pre", &self.up1_pre),
            ("up1_post", &self.up1_post),
            ("up2_pre", &self.up2_pre),
            ("up2_post", &self.up2_post),
            ("head", &self.head),
        ])
    }

    pub fn params_mut(&mut self) -> Vec<&mut DiffTensor> {
        let convs = [
            &mut self.enc1,
            &mut self.down1,
            &mut self.down2,
            &mut self.bottleneck,
            &mut self.up1_pre,
            &mut self.up1_post,
            &mut self.up2_pre,
            &mut self.up2_post,
            &mut self.head,
        ];
        convs
            .into_iter()
            .flat_map(|c| [&mut c.weight, &mut c.bias])
            .collect()
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn all_finite(&self) -> bool {
        self.named_params().iter().all(|(_, p)| p.all_finite())
    }
}

fn conv_params<'a>(convs: &[(&str, &'a Conv2d)]) -> Vec<(String, &'a DiffTensor)> {
    convs
        .iter()
        .flat_map(|(name, c)| {
            [(format!("{name}.weight"), &c.weight), (format!("{name}.bias"), &c.bias)]
        })
        .collect()
}

fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(Error::Shape("gradient add shape mismatch".into()));
    }
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    Tensor::new(a.shape().to_vec(), data)
}

/// Deterministic patch reconstruction: forward pass on (masked image,
/// strip mask), output clipped to [0, 1].
pub fn generate(model: &RecModel, masked: &Image, strip: &Mask) -> Result<Image> {
    if masked.height() != strip.height() || masked.width() != strip.width() {
        return Err(Error::Shape("masked image and strip differ in shape".into()));
    }
    let strip_plane: Vec<f64> = strip.data().iter().map(|v| *v as f64).collect();
    let x = Tensor::from_planes(&[masked.data(), &strip_plane], masked.height(), masked.width())?;
    let (y, _) = model.forward(&x)?;
    let data = y.data().iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Image::new(masked.height(), masked.width(), data)
}

/// Patch discriminator: strided convolutions over (candidate patch,
/// conditioning channels) ending in a single logit.
#[derive(Debug, Clone)]
pub struct DiscModel {
    conv1: Conv2d,
    conv2: Conv2d,
    out: Linear,
    act: LeakyRelu,
    patch: usize,
}

pub struct DiscCache {
    conv1: (ConvCache, LeakyReluCache),
    conv2: (ConvCache, LeakyReluCache),
    flat_shape: Vec<usize>,
    out: LinearCache,
}

impl DiscModel {
    pub const IN_CHANNELS: usize = 3;

    pub fn new(seed: u64, patch: usize) -> Result<Self> {
        if patch % 4 != 0 || patch < 4 {
            return Err(Error::Param(format!("discriminator patch {patch} must be a positive multiple of 4")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let quarter = patch / 4;
        Ok(Self {
            conv1: Conv2d::new(&mut rng, 3, 16, 3, 2, 1),
            conv2: Conv2d::new(&mut rng, 16, 32, 3, 2, 1),
            out: Linear::new(&mut rng, 32 * quarter * quarter, 1),
            act: LeakyRelu::new(LEAKY_SLOPE),
            patch,
        })
    }

    /// Single logit for a (3, P, P) input.
    pub fn forward(&self, x: &Tensor) -> Result<(f64, DiscCache)> {
        if x.shape() != [Self::IN_CHANNELS, self.patch, self.patch] {
            return Err(Error::Shape(format!(
                "discriminator expects (3, {0}, {0}), got {1:?}",
                self.patch,
                x.shape()
            )));
        }
        let (y, c1) = self.conv1.forward(x)?;
        let (y, r1) = self.act.forward(&y);
        let (y, c2) = self.conv2.forward(&y)?;
        let (y, r2) = self.act.forward(&y);
        let flat_shape = y.shape().to_vec();
        let flat = y.reshaped(vec![flat_shape.iter().product()])?;
        let (logit, lc) = self.out.forward(&flat)?;
        Ok((logit.data()[0], DiscCache { conv1: (c1, r1), conv2: (c2, r2), flat_shape, out: lc }))
    }

    /// Accumulate parameter gradients; returns the input gradient.
    pub fn backward(&mut self, cache: &DiscCache, dlogit: f64) -> Result<Tensor> {
        let g = Tensor::new(vec![1], vec![dlogit])?;
        let g = self.out.backward(&cache.out, &g)?;
        let g = g.reshaped(cache.flat_shape.clone())?;
        let g = self.act.backward(&cache.conv2.1, &g);
        let g = self.conv2.backward(&cache.conv2.0, &g)?;
        let g = self.act.backward(&cache.conv1.1, &g);
        self.conv1.backward(&cache.conv1.0, &g)
    }

    /// Input gradient only; parameter gradients are left untouched, so
    /// the generator can differentiate through a frozen discriminator.
    pub fn backward_input(&self, cache: &DiscCache, dlogit: f64) -> Result<Tensor> {
        let g = Tensor::new(vec![1], vec![dlogit])?;
        let g = self.out.backward_input(&cache.out, &g)?;
        let g = g.reshaped(cache.flat_shape.clone())?;
        let g = self.act.backward(&cache.conv2.1, &g);
        let g = self.conv2.backward_input(&cache.conv2.0, &g)?;
        let g = self.act.backward(&cache.conv1.1, &g);
        self.conv1.backward_input(&cache.conv1.0, &g)
    }

    pub fn named_params(&self) -> Vec<(String, &DiffTensor)> {
        let mut v = conv_params(&[("conv1", &self.conv1), ("conv2", &self.conv2)]);
        v.push(("out.weight".into(), &self.out.weight));
        v.push(("out.bias".into(), &self.out.bias));
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut DiffTensor> {
        vec![
            &mut self.conv1.weight,
            &mut self.conv1.bias,
            &mut self.conv2.weight,
            &mut self.conv2.bias,
            &mut self.out.weight,
            &mut self.out.bias,
        ]
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }
}

/// Overlap-score regressor: four strided convolutions over (image,
/// segmentation) channels, squashed to a single value in [0, 1].
#[derive(Debug, Clone)]
pub struct RegModel {
    conv1: Conv2d,
    conv2: Conv2d,
    conv3: Conv2d,
    conv4: Conv2d,
    out: Linear,
    act: LeakyRelu,
    sig: Sigmoid,
    image_size: usize,
}

pub struct RegCache {
    conv1: (ConvCache, LeakyReluCache),
    conv2: (ConvCache, LeakyReluCache),
    conv3: (ConvCache, LeakyReluCache),
    conv4: (ConvCache, LeakyReluCache),
    flat_shape: Vec<usize>,
    out: LinearCache,
    sig: SigmoidCache,
}

impl RegModel {
    pub const IN_CHANNELS: usize = 2;

    pub fn new(seed: u64, image_size: usize) -> Result<Self> {
        if image_size % 16 != 0 || image_size < 16 {
            return Err(Error::Param(format!(
                "regressor image size {image_size} must be a positive multiple of 16"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sixteenth = image_size / 16;
        Ok(Self {
            conv1: Conv2d::new(&mut rng, 2, 8, 3, 2, 1),
            conv2: Conv2d::new(&mut rng, 8, 16, 3, 2, 1),
            conv3: Conv2d::new(&mut rng, 16, 32, 3, 2, 1),
            conv4: Conv2d::new(&mut rng, 32, 32, 3, 2, 1),
            out: Linear::new(&mut rng, 32 * sixteenth * sixteenth, 1),
            act: LeakyRelu::new(LEAKY_SLOPE),
            sig: Sigmoid,
            image_size,
        })
    }

    pub fn image_size(&self) -> usize {
        self.image_size
    }

    /// Predicted score in [0, 1] for a (2, S, S) input.
    pub fn forward(&self, x: &Tensor) -> Result<(f64, RegCache)> {
        if x.shape() != [Self::IN_CHANNELS, self.image_size, self.image_size] {
            return Err(Error::Shape(format!(
                "regressor expects (2, {0}, {0}), got {1:?}",
                self.image_size,
                x.shape()
            )));
        }
        let step = |conv: &Conv2d, x: &Tensor| -> Result<(Tensor, (ConvCache, LeakyReluCache))> {
            let (y, cc) = conv.forward(x)?;
            let (y, rc) = self.act.forward(&y);
            Ok((y, (cc, rc)))
        };
        let (y, c1) = step(&self.conv1, x)?;
        let (y, c2) = step(&self.conv2, &y)?;
        let (y, c3) = step(&self.conv3, &y)?;
        let (y, c4) = step(&self.conv4, &y)?;
        let flat_shape = y.shape().to_vec();
        let flat = y.reshaped(vec![flat_shape.iter().product()])?;
        let (z, lc) = self.out.forward(&flat)?;
        let (p, sc) = self.sig.forward(&z);
        let cache = RegCache { conv1: c1, conv2: c2, conv3: c3, conv4: c4, flat_shape, out: lc, sig: sc };
        Ok((p.data()[0], cache))
    }

    /// Accumulate parameter gradients; returns the input gradient.
    pub fn backward(&mut self, cache: &RegCache, dpred: f64) -> Result<Tensor> {
        let g = Tensor::new(vec![1], vec![dpred])?;
        let g = self.sig.backward(&cache.sig, &g);
        let g = self.out.backward(&cache.out, &g)?;
        let g = g.reshaped(cache.flat_shape.clone())?;
        let g = self.act.backward(&cache.conv4.1, &g);
        let g = self.conv4.backward(&cache.conv4.0, &g)?;
        let g = self.act.backward(&cache.conv3.1, &g);
        let g = self.conv3.backward(&cache.conv3.0, &g)?;
        let g = self.act.backward(&cache.conv2.1, &g);
        let g = self.conv2.backward(&cache.conv2.0, &g)?;
        let g = self.act.backward(&cache.conv1.1, &g);
        self.conv1.backward(&cache.conv1.0, &g)
    }

    pub fn named_params(&self) -> Vec<(String, &DiffTensor)> {
        let mut v = conv_params(&[
            ("conv1", &self.conv1),
            ("conv2", &self.conv2),
            ("conv3", &self.conv3),
            ("conv4", &self.conv4),
        ]);
        v.push(("out.weight".into(), &self.out.weight));
        v.push(("out.bias".into(), &self.out.bias));
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut DiffTensor> {
        vec![
            &mut self.conv1.weight,
            &mut self.conv1.bias,
            &mut self.conv2.weight,
            &mut self.conv2.bias,
            &mut self.conv3.weight,
            &mut self.conv3.bias,
            &mut self.conv4.weight,
            &mut self.conv4.bias,
            &mut self.out.weight,
            &mut self.out.bias,
        ]
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn all_finite(&self) -> bool {
        self.named_params().iter().all(|(_, p)| p.all_finite())
    }

    /// Forward pass on raw (image, segmentation) planes. The segmentation
    /// channel may be continuous, as it is during attacks.
    pub fn predict_planes(&self, img: &[f64], seg: &[f64]) -> Result<f64> {
        let x = Tensor::from_planes(&[img, seg], self.image_size, self.image_size)?;
        Ok(self.forward(&x)?.0)
    }
}

/// Predicted overlap score for an (image, segmentation mask) pair.
pub fn predict_dsc(model: &RegModel, img: &Image, seg: &Mask) -> Result<f64> {
    if img.height() != seg.height() || img.width() != seg.width() {
        return Err(Error::Shape("image and segmentation differ in shape".into()));
    }
    let seg_plane: Vec<f64> = seg.data().iter().map(|v| *v as f64).collect();
    model.predict_planes(img.data(), &seg_plane)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_tensor(rng: &mut StdRng, shape: Vec<usize>) -> Tensor {
        let len = shape.iter().product();
        Tensor::new(shape, (0..len).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn rec_forward_shapes_and_range() {
        let model = RecModel::new(7);
        let mut rng = StdRng::seed_from_u64(1);
        let x = random_tensor(&mut rng, vec![2, 16, 16]);
        let (y, _) = model.forward(&x).unwrap();
        assert_eq!(y.shape(), &[1, 16, 16]);
        assert!(y.data().iter().all(|v| *v > 0.0 && *v < 1.0));

        // Same input twice: identical output.
        let (y2, _) = model.forward(&x).unwrap();
        assert_eq!(y.data(), y2.data());

        assert!(model.forward(&Tensor::zeros(vec![2, 15, 15])).is_err());
    }

    #[test]
    fn same_seed_same_model() {
        let a = RecModel::new(42);
        let b = RecModel::new(42);
        for ((_, pa), (_, pb)) in a.named_params().iter().zip(b.named_params()) {
            assert_eq!(pa.values, pb.values);
        }
        let c = RecModel::new(43);
        assert_ne!(a.named_params()[0].1.values, c.named_params()[0].1.values);
    }

    #[test]
    fn rec_input_gradient_matches_finite_differences() {
        let mut model = RecModel::new(3);
        let mut rng = StdRng::seed_from_u64(2);
        let x = random_tensor(&mut rng, vec![2, 8, 8]);
        let proj: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let objective = |m: &RecModel, x: &Tensor| -> f64 {
            let (y, _) = m.forward(x).unwrap();
            y.data().iter().zip(&proj).map(|(a, b)| a * b).sum()
        };
        let (y, cache) = model.forward(&x).unwrap();
        let gout = Tensor::new(y.shape().to_vec(), proj.clone()).unwrap();
        let gin = model.backward(&cache, &gout).unwrap();
        let h = 1e-4;
        for i in (0..x.len()).step_by(13) {
            let mut xp = x.clone();
            xp.data_mut()[i] += h;
            let fp = objective(&model, &xp);
            xp.data_mut()[i] -= 2.0 * h;
            let fm = objective(&model, &xp);
            let num = (fp - fm) / (2.0 * h);
            let denom = num.abs().max(gin.data()[i].abs()).max(1e-6);
            assert!((num - gin.data()[i]).abs() / denom < 1e-4, "input grad {i}");
        }
    }

    #[test]
    fn disc_and_reg_gradients_match_finite_differences() {
        let mut rng = StdRng::seed_from_u64(4);

        let mut disc = DiscModel::new(5, 8).unwrap();
        let x = random_tensor(&mut rng, vec![3, 8, 8]);
        let (_, cache) = disc.forward(&x).unwrap();
        let gin = disc.backward(&cache, 1.0).unwrap();
        let gin2 = disc.backward_input(&cache, 1.0).unwrap();
        assert_eq!(gin.data(), gin2.data());
        let h = 1e-4;
        for i in (0..x.len()).step_by(17) {
            let mut xp = x.clone();
            xp.data_mut()[i] += h;
            let fp = disc.forward(&xp).unwrap().0;
            xp.data_mut()[i] -= 2.0 * h;
            let fm = disc.forward(&xp).unwrap().0;
            let num = (fp - fm) / (2.0 * h);
            let denom = num.abs().max(gin.data()[i].abs()).max(1e-6);
            assert!((num - gin.data()[i]).abs() / denom < 1e-4, "disc input grad {i}");
        }

        let mut reg = RegModel::new(6, 16).unwrap();
        let x = random_tensor(&mut rng, vec![2, 16, 16]);
        let (p, cache) = reg.forward(&x).unwrap();
        assert!((0.0..=1.0).contains(&p));
        let gin = reg.backward(&cache, 1.0).unwrap();
        for i in (0..x.len()).step_by(23) {
            let mut xp = x.clone();
            xp.data_mut()[i] += h;
            let fp = reg.forward(&xp).unwrap().0;
            xp.data_mut()[i] -= 2.0 * h;
            let fm = reg.forward(&xp).unwrap().0;
            let num = (fp - fm) / (2.0 * h);
            let denom = num.abs().max(gin.data()[i].abs()).max(1e-6);
            assert!((num - gin.data()[i]).abs() / denom < 1e-4, "reg input grad {i}");
        }
    }

    #[test]
    fn generate_clips_and_is_deterministic() {
        let model = RecModel::new(11);
        let img = Image::from_fn(16, 16, |y, x| ((y + x) % 7) as f64 / 6.0).unwrap();
        let strip = Mask::from_fn(16, 16, |y, _| (6..10).contains(&y));
        let out1 = generate(&model, &img, &strip).unwrap();
        let out2 = generate(&model, &img, &strip).unwrap();
        assert_eq!(out1, out2);
        assert!(out1.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
