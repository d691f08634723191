//! Layer primitives with exact analytic backward passes.
//!
//! Each layer's `forward` is immutable and returns the cache its backward
//! pass needs, so inference on a shared model is safe concurrently.
//! `backward` accumulates parameter gradients; `backward_input` computes
//! only the input gradient and leaves the layer untouched (used by the
//! attack paths, which must not write to the model).

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{DiffTensor, Tensor};
use crate::error::{Error, Result};

/// Seeded uniform fan-in initialization on the f32 grid.
fn init_uniform(rng: &mut ChaCha8Rng, fan_in: usize, len: usize) -> Vec<f64> {
    let bound = (1.0 / fan_in as f64).sqrt();
    (0..len).map(|_| rng.gen_range(-bound..bound) as f32 as f64).collect()
}

/// 2D convolution over (C, H, W) tensors with square kernels, zero
/// padding and a per-output-channel bias.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub weight: DiffTensor,
    pub bias: DiffTensor,
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
}

/// Cached forward input for the backward pass.
pub struct ConvCache {
    input: Tensor,
}

impl Conv2d {
    pub fn new(rng: &mut ChaCha8Rng, in_ch: usize, out_ch: usize, kernel: usize, stride: usize, pad: usize) -> Self {
        let fan_in = in_ch * kernel * kernel;
        let weight = DiffTensor::new(
            vec![out_ch, in_ch, kernel, kernel],
            init_uniform(rng, fan_in, out_ch * fan_in),
        )
        .expect("weight shape");
        let bias = DiffTensor::new(vec![out_ch], vec![0.0; out_ch]).expect("bias shape");
        Self { weight, bias, in_ch, out_ch, kernel, stride, pad }
    }

    fn out_dims(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let span = |d: usize| -> Result<usize> {
            let padded = d + 2 * self.pad;
            if padded < self.kernel {
                return Err(Error::Shape(format!("conv input {d} smaller than kernel {}", self.kernel)));
            }
            Ok((padded - self.kernel) / self.stride + 1)
        };
        Ok((span(h)?, span(w)?))
    }

    /// Zero-padded copy of one input channel, (h + 2p) x (w + 2p).
    fn pad_channel(&self, xv: &[f64], ci: usize, h: usize, w: usize) -> Vec<f64> {
        let (hp, wp) = (h + 2 * self.pad, w + 2 * self.pad);
        let mut out = vec![0.0; hp * wp];
        for y in 0..h {
            let src = ci * h * w + y * w;
            let dst = (y + self.pad) * wp + self.pad;
            out[dst..dst + w].copy_from_slice(&xv[src..src + w]);
        }
        out
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, ConvCache)> {
        let [cin, h, w] = chw(x)?;
        if cin != self.in_ch {
            return Err(Error::Shape(format!("conv expects {} channels, got {cin}", self.in_ch)));
        }
        let (oh, ow) = self.out_dims(h, w)?;
        let wp = w + 2 * self.pad;
        let mut out = vec![0.0; self.out_ch * oh * ow];
        let xv = x.data();
        let wv = &self.weight.values;
        let k = self.kernel;
        for ci in 0..cin {
            let xpad = self.pad_channel(xv, ci, h, w);
            for co in 0..self.out_ch {
                let out_base = co * oh * ow;
                if ci == 0 {
                    out[out_base..out_base + oh * ow].fill(self.bias.values[co]);
                }
                let w_base = (co * cin + ci) * k * k;
                for oy in 0..oh {
                    for ky in 0..k {
                        let xrow = &xpad[(oy * self.stride + ky) * wp..];
                        let wrow = &wv[w_base + ky * k..w_base + ky * k + k];
                        let orow = &mut out[out_base + oy * ow..out_base + (oy + 1) * ow];
                        if self.stride == 1 {
                            for (kx, wk) in wrow.iter().enumerate() {
                                let xs = &xrow[kx..kx + ow];
                                for (o, xv) in orow.iter_mut().zip(xs) {
                                    *o += wk * xv;
                                }
                            }
                        } else {
                            for (kx, wk) in wrow.iter().enumerate() {
                                for (ox, o) in orow.iter_mut().enumerate() {
                                    *o += wk * xrow[ox * self.stride + kx];
                                }
                            }
                        }
                    }
                }
            }
        }
        let out = Tensor::new(vec![self.out_ch, oh, ow], out)?;
        Ok((out, ConvCache { input: x.clone() }))
    }

    /// Backward pass accumulating weight and bias gradients; returns the
    /// input gradient.
    pub fn backward(&mut self, cache: &ConvCache, gout: &Tensor) -> Result<Tensor> {
        let (gin, gw, gb) = self.backward_impl(cache, gout, true)?;
        for (dst, src) in self.weight.grad.iter_mut().zip(&gw) {
            *dst += src;
        }
        for (dst, src) in self.bias.grad.iter_mut().zip(&gb) {
            *dst += src;
        }
        Ok(gin)
    }

    /// Input gradient only; does not touch parameter gradients.
    pub fn backward_input(&self, cache: &ConvCache, gout: &Tensor) -> Result<Tensor> {
        Ok(self.backward_impl(cache, gout, false)?.0)
    }

    fn backward_impl(&self, cache: &ConvCache, gout: &Tensor, with_params: bool) -> Result<(Tensor, Vec<f64>, Vec<f64>)> {
        let x = &cache.input;
        let [cin, h, w] = chw(x)?;
        let [cout, oh, ow] = chw(gout)?;
        if cout != self.out_ch {
            return Err(Error::Shape("conv backward channel mismatch".into()));
        }
        let (hp, wp) = (h + 2 * self.pad, w + 2 * self.pad);
        let mut gin = vec![0.0; x.len()];
        let mut gw = vec![0.0; if with_params { self.weight.len() } else { 0 }];
        let mut gb = vec![0.0; if with_params { self.bias.len() } else { 0 }];
        let xv = x.data();
        let gv = gout.data();
        let wv = &self.weight.values;
        let k = self.kernel;
        if with_params {
            for co in 0..cout {
                let g_base = co * oh * ow;
                gb[co] += gv[g_base..g_base + oh * ow].iter().sum::<f64>();
            }
        }
        let mut gin_pad = vec![0.0; hp * wp];
        for ci in 0..cin {
            let xpad = self.pad_channel(xv, ci, h, w);
            gin_pad.fill(0.0);
            for co in 0..cout {
                let g_base = co * oh * ow;
                let w_base = (co * cin + ci) * k * k;
                for oy in 0..oh {
                    let grow = &gv[g_base + oy * ow..g_base + (oy + 1) * ow];
                    for ky in 0..k {
                        let row = (oy * self.stride + ky) * wp;
                        for kx in 0..k {
                            let wk = wv[w_base + ky * k + kx];
                            if self.stride == 1 {
                                let gslice = &mut gin_pad[row + kx..row + kx + ow];
                                for (gi, g) in gslice.iter_mut().zip(grow) {
                                    *gi += wk * g;
                                }
                                if with_params {
                                    let xs = &xpad[row + kx..row + kx + ow];
                                    gw[w_base + ky * k + kx] +=
                                        xs.iter().zip(grow).map(|(a, b)| a * b).sum::<f64>();
                                }
                            } else {
                                let mut dw = 0.0;
                                for (ox, g) in grow.iter().enumerate() {
                                    let xi = row + ox * self.stride + kx;
                                    gin_pad[xi] += wk * g;
                                    dw += xpad[xi] * g;
                                }
                                if with_params {
                                    gw[w_base + ky * k + kx] += dw;
                                }
                            }
                        }
                    }
                }
            }
            // Crop the padding back off.
            for y in 0..h {
                let src = (y + self.pad) * wp + self.pad;
                let dst = ci * h * w + y * w;
                gin[dst..dst + w].copy_from_slice(&gin_pad[src..src + w]);
            }
        }
        Ok((Tensor::new(vec![cin, h, w], gin)?, gw, gb))
    }
}

/// Fully connected layer over flattened inputs.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: DiffTensor, // (out, in)
    pub bias: DiffTensor,
    in_features: usize,
    out_features: usize,
}

pub struct LinearCache {
    input: Tensor,
}

impl Linear {
    pub fn new(rng: &mut ChaCha8Rng, in_features: usize, out_features: usize) -> Self {
        let weight = DiffTensor::new(
            vec![out_features, in_features],
            init_uniform(rng, in_features, in_features * out_features),
        )
        .expect("weight shape");
        let bias = DiffTensor::new(vec![out_features], vec![0.0; out_features]).expect("bias shape");
        Self { weight, bias, in_features, out_features }
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, LinearCache)> {
        if x.len() != self.in_features {
            return Err(Error::Shape(format!(
                "linear expects {} inputs, got {}",
                self.in_features,
                x.len()
            )));
        }
        let xv = x.data();
        let out = (0..self.out_features)
            .map(|j| {
                let row = &self.weight.values[j * self.in_features..(j + 1) * self.in_features];
                self.bias.values[j] + row.iter().zip(xv).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect();
        Ok((Tensor::new(vec![self.out_features], out)?, LinearCache { input: x.clone() }))
    }

    pub fn backward(&mut self, cache: &LinearCache, gout: &Tensor) -> Result<Tensor> {
        let gin = self.backward_input(cache, gout)?;
        let xv = cache.input.data();
        for (j, g) in gout.data().iter().enumerate() {
            self.bias.grad[j] += g;
            let row = &mut self.weight.grad[j * self.in_features..(j + 1) * self.in_features];
            for (dst, v) in row.iter_mut().zip(xv) {
                *dst += g * v;
            }
        }
        Ok(gin)
    }

    pub fn backward_input(&self, cache: &LinearCache, gout: &Tensor) -> Result<Tensor> {
        if gout.len() != self.out_features {
            return Err(Error::Shape("linear backward shape mismatch".into()));
        }
        let mut gin = vec![0.0; self.in_features];
        for (j, g) in gout.data().iter().enumerate() {
            let row = &self.weight.values[j * self.in_features..(j + 1) * self.in_features];
            for (dst, w) in gin.iter_mut().zip(row) {
                *dst += g * w;
            }
        }
        Tensor::new(cache.input.shape().to_vec(), gin)
    }
}

/// Leaky rectifier with a fixed negative slope.
#[derive(Debug, Clone)]
pub struct LeakyRelu {
    pub alpha: f64,
}

pub struct LeakyReluCache {
    input: Tensor,
}

impl LeakyRelu {
    pub fn new(alpha: f64) -> Self {
        Self { alpha }
    }

    pub fn forward(&self, x: &Tensor) -> (Tensor, LeakyReluCache) {
        let data = x.data().iter().map(|v| if *v > 0.0 { *v } else { self.alpha * v }).collect();
        let out = Tensor { shape: x.shape().to_vec(), data };
        (out, LeakyReluCache { input: x.clone() })
    }

    pub fn backward(&self, cache: &LeakyReluCache, gout: &Tensor) -> Tensor {
        let data = cache
            .input
            .data()
            .iter()
            .zip(gout.data())
            .map(|(v, g)| if *v > 0.0 { *g } else { self.alpha * g })
            .collect();
        Tensor { shape: gout.shape().to_vec(), data }
    }
}

/// Logistic squashing to (0, 1).
#[derive(Debug, Clone, Default)]
pub struct Sigmoid;

pub struct SigmoidCache {
    output: Vec<f64>,
}

impl Sigmoid {
    pub fn forward(&self, x: &Tensor) -> (Tensor, SigmoidCache) {
        let data: Vec<f64> = x.data().iter().map(|v| sigmoid(*v)).collect();
        let out = Tensor { shape: x.shape().to_vec(), data: data.clone() };
        (out, SigmoidCache { output: data })
    }

    pub fn backward(&self, cache: &SigmoidCache, gout: &Tensor) -> Tensor {
        let data = cache
            .output
            .iter()
            .zip(gout.data())
            .map(|(y, g)| g * y * (1.0 - y))
            .collect();
        Tensor { shape: gout.shape().to_vec(), data }
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Nearest-neighbor 2x spatial upsampling.
#[derive(Debug, Clone, Default)]
pub struct Upsample2x;

pub struct UpsampleCache {
    in_shape: Vec<usize>,
}

impl Upsample2x {
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, UpsampleCache)> {
        let [c, h, w] = chw(x)?;
        let mut out = vec![0.0; c * 4 * h * w];
        let (oh, ow) = (2 * h, 2 * w);
        for ci in 0..c {
            for y in 0..h {
                for x_ in 0..w {
                    let v = x.data()[(ci * h + y) * w + x_];
                    let base = ci * oh * ow;
                    out[base + (2 * y) * ow + 2 * x_] = v;
                    out[base + (2 * y) * ow + 2 * x_ + 1] = v;
                    out[base + (2 * y + 1) * ow + 2 * x_] = v;
                    out[base + (2 * y + 1) * ow + 2 * x_ + 1] = v;
                }
            }
        }
        Ok((Tensor::new(vec![c, oh, ow], out)?, UpsampleCache { in_shape: vec![c, h, w] }))
    }

    pub fn backward(&self, cache: &UpsampleCache, gout: &Tensor) -> Result<Tensor> {
        let [c, h, w] = [cache.in_shape[0], cache.in_shape[1], cache.in_shape[2]];
        let (oh, ow) = (2 * h, 2 * w);
        if gout.shape() != [c, oh, ow] {
            return Err(Error::Shape("upsample backward shape mismatch".into()));
        }
        let gv = gout.data();
        let mut gin = vec![0.0; c * h * w];
        for ci in 0..c {
            for y in 0..h {
                for x_ in 0..w {
                    let base = ci * oh * ow;
                    gin[(ci * h + y) * w + x_] = gv[base + (2 * y) * ow + 2 * x_]
                        + gv[base + (2 * y) * ow + 2 * x_ + 1]
                        + gv[base + (2 * y + 1) * ow + 2 * x_]
                        + gv[base + (2 * y + 1) * ow + 2 * x_ + 1];
                }
            }
        }
        Tensor::new(vec![c, h, w], gin)
    }
}

/// Stack two (C, H, W) tensors along the channel axis.
pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let [ca, h, w] = chw(a)?;
    let [cb, hb, wb] = chw(b)?;
    if (h, w) != (hb, wb) {
        return Err(Error::Shape("concat spatial dims differ".into()));
    }
    let mut data = Vec::with_capacity((ca + cb) * h * w);
    data.extend_from_slice(a.data());
    data.extend_from_slice(b.data());
    Tensor::new(vec![ca + cb, h, w], data)
}

/// Split a (C, H, W) tensor after `c_first` channels; inverse of
/// [`concat_channels`] and its gradient route.
pub fn split_channels(t: &Tensor, c_first: usize) -> Result<(Tensor, Tensor)> {
    let [c, h, w] = chw(t)?;
    if c_first > c {
        return Err(Error::Shape("split beyond channel count".into()));
    }
    let cut = c_first * h * w;
    let a = Tensor::new(vec![c_first, h, w], t.data()[..cut].to_vec())?;
    let b = Tensor::new(vec![c - c_first, h, w], t.data()[cut..].to_vec())?;
    Ok((a, b))
}

fn chw(t: &Tensor) -> Result<[usize; 3]> {
    match t.shape() {
        [c, h, w] => Ok([*c, *h, *w]),
        other => Err(Error::Shape(format!("expected (C, H, W) tensor, got {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor {
        let len = shape.iter().product();
        Tensor::new(shape, (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Scalar objective: sum of the output weighted by a fixed projection.
    fn project(out: &Tensor, proj: &[f64]) -> f64 {
        out.data().iter().zip(proj).map(|(a, b)| a * b).sum()
    }

    fn check_close(analytic: f64, numeric: f64, what: &str) {
        let denom = analytic.abs().max(numeric.abs()).max(1e-6);
        assert!(
            (analytic - numeric).abs() / denom < 1e-4,
            "{what}: analytic {analytic} vs fd {numeric}"
        );
    }

    #[test]
    fn conv_identity_kernel_passes_input_through() {
        let mut r = rng(0);
        let mut conv = Conv2d::new(&mut r, 1, 1, 1, 1, 0);
        conv.weight.values[0] = 1.0;
        conv.bias.values[0] = 0.0;
        let x = random_tensor(&mut r, vec![1, 5, 5]);
        let (y, _) = conv.forward(&x).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn conv_zero_input_zero_gradient() {
        let mut r = rng(1);
        let conv = Conv2d::new(&mut r, 2, 3, 3, 1, 1);
        let x = Tensor::zeros(vec![2, 6, 6]);
        let (y, cache) = conv.forward(&x).unwrap();
        assert!(y.data().iter().all(|v| *v == 0.0)); // zero bias by default
        let gin = conv.backward_input(&cache, &Tensor::zeros(vec![3, 6, 6])).unwrap();
        assert!(gin.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let mut r = rng(2);
        for (stride, pad) in [(1usize, 1usize), (2, 1), (1, 0)] {
            let mut conv = Conv2d::new(&mut r, 2, 3, 3, stride, pad);
            let x = random_tensor(&mut r, vec![2, 6, 6]);
            let (out, cache) = conv.forward(&x).unwrap();
            let proj: Vec<f64> = (0..out.len()).map(|_| r.gen_range(-1.0..1.0)).collect();
            let gout = Tensor::new(out.shape().to_vec(), proj.clone()).unwrap();
            let gin = conv.backward(&cache, &gout).unwrap();

            let h = 1e-4;
            // Input gradient.
            for i in (0..x.len()).step_by(7) {
                let mut xp = x.clone();
                xp.data_mut()[i] += h;
                let fp = project(&conv.forward(&xp).unwrap().0, &proj);
                xp.data_mut()[i] -= 2.0 * h;
                let fm = project(&conv.forward(&xp).unwrap().0, &proj);
                check_close(gin.data()[i], (fp - fm) / (2.0 * h), "conv dx");
            }
            // Weight and bias gradients.
            for i in (0..conv.weight.len()).step_by(11) {
                let orig = conv.weight.values[i];
                conv.weight.values[i] = orig + h;
                let fp = project(&conv.forward(&x).unwrap().0, &proj);
                conv.weight.values[i] = orig - h;
                let fm = project(&conv.forward(&x).unwrap().0, &proj);
                conv.weight.values[i] = orig;
                check_close(conv.weight.grad[i], (fp - fm) / (2.0 * h), "conv dw");
            }
            for i in 0..conv.bias.len() {
                let orig = conv.bias.values[i];
                conv.bias.values[i] = orig + h;
                let fp = project(&conv.forward(&x).unwrap().0, &proj);
                conv.bias.values[i] = orig - h;
                let fm = project(&conv.forward(&x).unwrap().0, &proj);
                conv.bias.values[i] = orig;
                check_close(conv.bias.grad[i], (fp - fm) / (2.0 * h), "conv db");
            }
            // backward_input agrees with backward and leaves grads alone.
            let before = conv.weight.grad.clone();
            let gin2 = conv.backward_input(&cache, &gout).unwrap();
            assert_eq!(gin.data(), gin2.data());
            assert_eq!(before, conv.weight.grad);
        }
    }

    #[test]
    fn linear_gradients_match_finite_differences() {
        let mut r = rng(3);
        let mut lin = Linear::new(&mut r, 12, 4);
        let x = random_tensor(&mut r, vec![12]);
        let (out, cache) = lin.forward(&x).unwrap();
        let proj: Vec<f64> = (0..out.len()).map(|_| r.gen_range(-1.0..1.0)).collect();
        let gout = Tensor::new(vec![4], proj.clone()).unwrap();
        let gin = lin.backward(&cache, &gout).unwrap();
        let h = 1e-4;
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp.data_mut()[i] += h;
            let fp = project(&lin.forward(&xp).unwrap().0, &proj);
            xp.data_mut()[i] -= 2.0 * h;
            let fm = project(&lin.forward(&xp).unwrap().0, &proj);
            check_close(gin.data()[i], (fp - fm) / (2.0 * h), "linear dx");
        }
        for i in (0..lin.weight.len()).step_by(5) {
            let orig = lin.weight.values[i];
            lin.weight.values[i] = orig + h;
            let fp = project(&lin.forward(&x).unwrap().0, &proj);
            lin.weight.values[i] = orig - h;
            let fm = project(&lin.forward(&x).unwrap().0, &proj);
            lin.weight.values[i] = orig;
            check_close(lin.weight.grad[i], (fp - fm) / (2.0 * h), "linear dw");
        }
    }

    #[test]
    fn activation_gradients_match_finite_differences() {
        let mut r = rng(4);
        let x = random_tensor(&mut r, vec![2, 4, 4]);
        let proj: Vec<f64> = (0..x.len()).map(|_| r.gen_range(-1.0..1.0)).collect();
        let gout = Tensor::new(x.shape().to_vec(), proj.clone()).unwrap();
        let h = 1e-4;

        let lrelu = LeakyRelu::new(0.2);
        let (_, cache) = lrelu.forward(&x);
        let gin = lrelu.backward(&cache, &gout);
        for i in 0..x.len() {
            if x.data()[i].abs() < 2.0 * h {
                continue; // kink at zero
            }
            let mut xp = x.clone();
            xp.data_mut()[i] += h;
            let fp = project(&lrelu.forward(&xp).0, &proj);
            xp.data_mut()[i] -= 2.0 * h;
            let fm = project(&lrelu.forward(&xp).0, &proj);
            check_close(gin.data()[i], (fp - fm) / (2.0 * h), "lrelu dx");
        }

        let sig = Sigmoid;
        let (_, cache) = sig.forward(&x);
        let gin = sig.backward(&cache, &gout);
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp.data_mut()[i] += h;
            let fp = project(&sig.forward(&xp).0, &proj);
            xp.data_mut()[i] -= 2.0 * h;
            let fm = project(&sig.forward(&xp).0, &proj);
            check_close(gin.data()[i], (fp - fm) / (2.0 * h), "sigmoid dx");
        }
    }

    #[test]
    fn upsample_gradient_matches_finite_differences() {
        let mut r = rng(5);
        let up = Upsample2x;
        let x = random_tensor(&mut r, vec![2, 3, 3]);
        let (out, cache) = up.forward(&x).unwrap();
        assert_eq!(out.shape(), &[2, 6, 6]);
        let proj: Vec<f64> = (0..out.len()).map(|_| r.gen_range(-1.0..1.0)).collect();
        let gout = Tensor::new(out.shape().to_vec(), proj.clone()).unwrap();
        let gin = up.backward(&cache, &gout).unwrap();
        let h = 1e-4;
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp.data_mut()[i] += h;
            let fp = project(&up.forward(&xp).unwrap().0, &proj);
            xp.data_mut()[i] -= 2.0 * h;
            let fm = project(&up.forward(&xp).unwrap().0, &proj);
            check_close(gin.data()[i], (fp - fm) / (2.0 * h), "upsample dx");
        }
    }

    #[test]
    fn concat_split_roundtrip() {
        let mut r = rng(6);
        let a = random_tensor(&mut r, vec![2, 4, 4]);
        let b = random_tensor(&mut r, vec![3, 4, 4]);
        let cat = concat_channels(&a, &b).unwrap();
        assert_eq!(cat.shape(), &[5, 4, 4]);
        let (a2, b2) = split_channels(&cat, 2).unwrap();
        assert_eq!(a2, a);
        assert_eq!(b2, b);
    }
}
