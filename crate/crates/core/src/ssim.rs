//! Windowed structural similarity: score maps, dissimilarity images, and
//! a differentiable reconstruction loss.
//!
//! The score compares luminance, contrast and structure over square
//! windows tiled at a fixed stride, and reports the arithmetic mean over
//! all windows. Statistics are population (1/N) moments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

/// Window geometry and stabilizing constants.
///
/// Defaults: 8x8 windows at stride 8 (non-overlapping), uniform weights,
/// `C1 = (0.01 L)^2`, `C2 = (0.03 L)^2`, `C3 = C2 / 2` at dynamic range
/// `L = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimConfig {
    pub window: usize,
    pub stride: usize,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub dynamic_range: f64,
}

impl SsimConfig {
    /// Derive the stabilizers from the conventional `K1`/`K2` factors.
    pub fn from_k(window: usize, stride: usize, k1: f64, k2: f64, dynamic_range: f64) -> Self {
        let c2 = (k2 * dynamic_range).powi(2);
        Self {
            window,
            stride,
            c1: (k1 * dynamic_range).powi(2),
            c2,
            c3: c2 / 2.0,
            dynamic_range,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::Param("ssim window must be >= 2".into()));
        }
        if self.stride == 0 {
            return Err(Error::Param("ssim stride must be >= 1".into()));
        }
        if !(self.c1 > 0.0 && self.c2 > 0.0 && self.c3 > 0.0) {
            return Err(Error::Param("ssim constants must be positive".into()));
        }
        Ok(())
    }
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self::from_k(8, 8, 0.01, 0.03, 1.0)
    }
}

/// First and second moments of a window pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats {
    pub mu_x: f64,
    pub mu_y: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub sigma_xy: f64,
}

/// Per-window SSIM values with the layout they were computed on.
#[derive(Debug, Clone, PartialEq)]
pub struct SsimMap {
    pub rows: usize,
    pub cols: usize,
    pub window: usize,
    pub stride: usize,
    pub values: Vec<f64>,
}

impl SsimMap {
    /// Mean over all windows; this is the reported score.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Raw per-window moments. `sig_prod` is `sqrt(var_x * var_y)`, kept in
/// product form so that SSIM(a, a) evaluates to exactly 1.
#[derive(Debug, Clone, Copy)]
struct Moments {
    n: f64,
    mu_x: f64,
    mu_y: f64,
    var_x: f64,
    var_y: f64,
    cov: f64,
    sig_prod: f64,
}

fn moments(x: &[f64], xw: usize, y: &[f64], yw: usize, top: usize, left: usize, win_h: usize, win_w: usize) -> Moments {
    let n = (win_h * win_w) as f64;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for dy in 0..win_h {
        let rx = (top + dy) * xw + left;
        let ry = (top + dy) * yw + left;
        for dx in 0..win_w {
            let a = x[rx + dx];
            let b = y[ry + dx];
            sx += a;
            sy += b;
            sxx += a * a;
            syy += b * b;
            sxy += a * b;
        }
    }
    let mu_x = sx / n;
    let mu_y = sy / n;
    let var_x = (sxx / n - mu_x * mu_x).max(0.0);
    let var_y = (syy / n - mu_y * mu_y).max(0.0);
    let cov = sxy / n - mu_x * mu_y;
    Moments { n, mu_x, mu_y, var_x, var_y, cov, sig_prod: (var_x * var_y).sqrt() }
}

fn ssim_from_moments(m: &Moments, cfg: &SsimConfig) -> f64 {
    let l = (2.0 * m.mu_x * m.mu_y + cfg.c1) / (m.mu_x * m.mu_x + m.mu_y * m.mu_y + cfg.c1);
    let c = (2.0 * m.sig_prod + cfg.c2) / (m.var_x + m.var_y + cfg.c2);
    let s = (m.cov + cfg.c3) / (m.sig_prod + cfg.c3);
    l * c * s
}

/// Population moments of two equal-shaped patches treated as one window.
pub fn window_stats(x: &Image, y: &Image) -> Result<WindowStats> {
    if !x.same_shape(y) {
        return Err(Error::Shape("window_stats operands differ in shape".into()));
    }
    if x.data().len() < 2 {
        return Err(Error::Param("window_stats needs at least 2 pixels".into()));
    }
    let m = moments(x.data(), x.width(), y.data(), y.width(), 0, 0, x.height(), x.width());
    Ok(WindowStats {
        mu_x: m.mu_x,
        mu_y: m.mu_y,
        sigma_x: m.var_x.sqrt(),
        sigma_y: m.var_y.sqrt(),
        sigma_xy: m.cov,
    })
}

/// Luminance similarity `(2 μx μy + C1) / (μx² + μy² + C1)`.
pub fn luminance(s: &WindowStats, c1: f64) -> f64 {
    (2.0 * s.mu_x * s.mu_y + c1) / (s.mu_x * s.mu_x + s.mu_y * s.mu_y + c1)
}

/// Contrast similarity `(2 σx σy + C2) / (σx² + σy² + C2)`.
pub fn contrast(s: &WindowStats, c2: f64) -> f64 {
    (2.0 * s.sigma_x * s.sigma_y + c2) / (s.sigma_x * s.sigma_x + s.sigma_y * s.sigma_y + c2)
}

/// Structure similarity `(σxy + C3) / (σx σy + C3)`.
pub fn structure(s: &WindowStats, c3: f64) -> f64 {
    (s.sigma_xy + c3) / (s.sigma_x * s.sigma_y + c3)
}

/// SSIM of two equal-shaped patches treated as a single window.
pub fn ssim_window(x: &Image, y: &Image, cfg: &SsimConfig) -> Result<f64> {
    if !x.same_shape(y) {
        return Err(Error::Shape("ssim_window operands differ in shape".into()));
    }
    if x.data().len() < 2 {
        return Err(Error::Param("ssim_window needs at least 2 pixels".into()));
    }
    let m = moments(x.data(), x.width(), y.data(), y.width(), 0, 0, x.height(), x.width());
    Ok(ssim_from_moments(&m, cfg))
}

/// Window origins for an image tiled at the configured stride.
fn window_origins(h: usize, w: usize, cfg: &SsimConfig) -> Result<(usize, usize, Vec<(usize, usize)>)> {
    cfg.validate()?;
    if h < cfg.window || w < cfg.window {
        return Err(Error::Param(format!(
            "image {h}x{w} smaller than ssim window {}",
            cfg.window
        )));
    }
    let rows = (h - cfg.window) / cfg.stride + 1;
    let cols = (w - cfg.window) / cfg.stride + 1;
    let mut origins = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            origins.push((r * cfg.stride, c * cfg.stride));
        }
    }
    Ok((rows, cols, origins))
}

/// Per-window SSIM map of two images.
pub fn ssim_map(a: &Image, b: &Image, cfg: &SsimConfig) -> Result<SsimMap> {
    if !a.same_shape(b) {
        return Err(Error::Shape("ssim_map operands differ in shape".into()));
    }
    let (rows, cols, origins) = window_origins(a.height(), a.width(), cfg)?;
    let values = origins
        .iter()
        .map(|(top, left)| {
            let m = moments(a.data(), a.width(), b.data(), b.width(), *top, *left, cfg.window, cfg.window);
            ssim_from_moments(&m, cfg)
        })
        .collect();
    Ok(SsimMap { rows, cols, window: cfg.window, stride: cfg.stride, values })
}

/// Mean windowed SSIM score.
pub fn ssim_score(a: &Image, b: &Image, cfg: &SsimConfig) -> Result<f64> {
    Ok(ssim_map(a, b, cfg)?.mean())
}

/// Structural dissimilarity image: per-window `(1 - SSIM) / 2` broadcast
/// to the pixels it covers (averaged where windows overlap), clipped to
/// `[0, 1]`. Pixels not covered by any window are 0.
pub fn dssim_image(a: &Image, b: &Image, cfg: &SsimConfig) -> Result<Image> {
    let map = ssim_map(a, b, cfg)?;
    let (h, w) = (a.height(), a.width());
    let mut sum = vec![0.0f64; h * w];
    let mut count = vec![0u32; h * w];
    for (i, v) in map.values.iter().enumerate() {
        let top = (i / map.cols) * map.stride;
        let left = (i % map.cols) * map.stride;
        let d = (1.0 - v) / 2.0;
        for dy in 0..map.window {
            let row = (top + dy) * w + left;
            for dx in 0..map.window {
                sum[row + dx] += d;
                count[row + dx] += 1;
            }
        }
    }
    let data = sum
        .iter()
        .zip(&count)
        .map(|(s, c)| if *c == 0 { 0.0 } else { (s / *c as f64).clamp(0.0, 1.0) })
        .collect();
    Image::new(h, w, data)
}

/// Accumulate the gradient of one window's SSIM into full-image planes.
#[allow(clippy::too_many_arguments)]
fn accumulate_window_grad(
    x: &[f64],
    y: &[f64],
    w: usize,
    top: usize,
    left: usize,
    win: usize,
    cfg: &SsimConfig,
    scale: f64,
    gx: Option<&mut [f64]>,
    gy: Option<&mut [f64]>,
) -> f64 {
    let m = moments(x, w, y, w, top, left, win, win);
    let a1 = 2.0 * m.mu_x * m.mu_y + cfg.c1;
    let b1 = m.mu_x * m.mu_x + m.mu_y * m.mu_y + cfg.c1;
    let a2 = 2.0 * m.sig_prod + cfg.c2;
    let b2 = m.var_x + m.var_y + cfg.c2;
    let a3 = m.cov + cfg.c3;
    let b3 = m.sig_prod + cfg.c3;
    let (l, c, s) = (a1 / b1, a2 / b2, a3 / b3);

    let dl_dmu_x = (2.0 * m.mu_y * b1 - 2.0 * m.mu_x * a1) / (b1 * b1);
    let dl_dmu_y = (2.0 * m.mu_x * b1 - 2.0 * m.mu_y * a1) / (b1 * b1);
    // d sig_prod / d var_x, guarded at the nonsmooth point var = 0.
    let dp_dvx = if m.sig_prod > 0.0 { m.var_y / (2.0 * m.sig_prod) } else { 0.0 };
    let dp_dvy = if m.sig_prod > 0.0 { m.var_x / (2.0 * m.sig_prod) } else { 0.0 };
    let dc_dp = 2.0 / b2;
    let dc_dv = -a2 / (b2 * b2); // per unit var_x or var_y
    let ds_dcov = 1.0 / b3;
    let ds_dp = -a3 / (b3 * b3);

    let apply = |plane: &mut [f64], own_mu: f64, other_mu: f64, dp_dv: f64, dl_dmu: f64, own: &[f64], other: &[f64]| {
        for dy in 0..win {
            let row = (top + dy) * w + left;
            for dx in 0..win {
                let i = row + dx;
                let dv = 2.0 * (own[i] - own_mu) / m.n;
                let dcov = (other[i] - other_mu) / m.n;
                let dp = dp_dv * dv;
                let dl = dl_dmu / m.n;
                let dc = dc_dp * dp + dc_dv * dv;
                let ds = ds_dcov * dcov + ds_dp * dp;
                plane[i] += scale * (dl * c * s + l * (dc * s + c * ds));
            }
        }
    };
    if let Some(gx) = gx {
        apply(gx, m.mu_x, m.mu_y, dp_dvx, dl_dmu_x, x, y);
    }
    if let Some(gy) = gy {
        apply(gy, m.mu_y, m.mu_x, dp_dvy, dl_dmu_y, y, x);
    }
    l * c * s
}

/// Mean windowed SSIM together with its analytic gradient with respect
/// to both images, as row-major planes.
pub fn ssim_score_with_grad(a: &Image, b: &Image, cfg: &SsimConfig) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if !a.same_shape(b) {
        return Err(Error::Shape("ssim_score_with_grad operands differ in shape".into()));
    }
    let (h, w) = (a.height(), a.width());
    let (_, _, origins) = window_origins(h, w, cfg)?;
    let scale = 1.0 / origins.len() as f64;
    let mut ga = vec![0.0; h * w];
    let mut gb = vec![0.0; h * w];
    let mut total = 0.0;
    for (top, left) in origins {
        total += accumulate_window_grad(
            a.data(),
            b.data(),
            w,
            top,
            left,
            cfg.window,
            cfg,
            scale,
            Some(&mut ga),
            Some(&mut gb),
        );
    }
    Ok((total * scale, ga, gb))
}

/// Reconstruction loss `1 - SSIM` over matched patch lists, with the
/// gradient with respect to the reconstructed patches.
///
/// The score is the mean over every window of every patch pair; the
/// returned gradient planes are aligned with `rec`.
pub fn ssim_loss(rec: &[Image], gt: &[Image], cfg: &SsimConfig) -> Result<(f64, Vec<Vec<f64>>)> {
    if rec.is_empty() {
        return Err(Error::Param("ssim_loss needs at least one patch".into()));
    }
    if rec.len() != gt.len() {
        return Err(Error::Shape("ssim_loss patch lists differ in length".into()));
    }
    let mut per_patch_origins = Vec::with_capacity(rec.len());
    let mut total_windows = 0usize;
    for (r, g) in rec.iter().zip(gt) {
        if !r.same_shape(g) {
            return Err(Error::Shape("ssim_loss patch pair differs in shape".into()));
        }
        let (_, _, origins) = window_origins(r.height(), r.width(), cfg)?;
        total_windows += origins.len();
        per_patch_origins.push(origins);
    }
    let scale = 1.0 / total_windows as f64;
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(rec.len());
    for ((r, g), origins) in rec.iter().zip(gt).zip(&per_patch_origins) {
        let mut grad = vec![0.0; r.data().len()];
        for (top, left) in origins {
            // d(1 - mean ssim)/d rec = -scale * d ssim/d rec.
            total += accumulate_window_grad(
                r.data(),
                g.data(),
                r.width(),
                *top,
                *left,
                cfg.window,
                cfg,
                -scale,
                Some(&mut grad),
                None,
            );
        }
        grads.push(grad);
    }
    Ok((1.0 - total * scale, grads))
}
