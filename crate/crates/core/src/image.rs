//! Image and mask primitives: overlap scoring, boundary strips, patch
//! tiling, ROI extraction.
//!
//! All operations are pure; nothing here keeps global state.

use crate::error::{Error, Result};

/// A grayscale image with row-major intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    /// Build an image, validating the `[0, 1]` intensity invariant.
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Shape(format!(
                "image data length {} != {}x{}",
                data.len(),
                height,
                width
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::Param(format!("image intensity {v} outside [0, 1]")));
        }
        Ok(Self { height, width, data })
    }

    /// All-zero image.
    pub fn zeros(height: usize, width: usize) -> Self {
        Self { height, width, data: vec![0.0; height * width] }
    }

    /// Build from a per-pixel function; values are validated, not clamped.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Self::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Population standard deviation of all intensities.
    pub fn intensity_std(&self) -> f64 {
        let n = self.data.len() as f64;
        let mean = self.data.iter().sum::<f64>() / n;
        let var = self.data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        var.sqrt()
    }

}

/// A binary mask with the same shape contract as the image it annotates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl Mask {
    /// Build a mask, validating that every value is 0 or 1.
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Shape(format!(
                "mask data length {} != {}x{}",
                data.len(),
                height,
                width
            )));
        }
        if data.iter().any(|v| *v > 1) {
            return Err(Error::Param("mask values must be 0 or 1".into()));
        }
        Ok(Self { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self { height, width, data: vec![0; height * width] }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(u8::from(f(y, x)));
            }
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn same_shape(&self, other: &Mask) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Number of foreground pixels.
    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|v| **v == 1).count()
    }

    pub fn is_empty_mask(&self) -> bool {
        self.data.iter().all(|v| *v == 0)
    }

}

/// Exact non-overlapping tiling of an image into `rows x cols` patches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGrid {
    pub patch_h: usize,
    pub patch_w: usize,
    pub rows: usize,
    pub cols: usize,
}

/// An axis-aligned window fully inside its source image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoiWindow {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

/// Dice similarity coefficient `2|A∩B| / (|A|+|B|)` between two masks.
///
/// Both masks empty is scored as 1.0 (identical sets).
pub fn dice_score(a: &Mask, b: &Mask) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::Shape("dice_score operands differ in shape".into()));
    }
    let mut inter = 0usize;
    let mut total = 0usize;
    for (va, vb) in a.data.iter().zip(&b.data) {
        inter += usize::from(va & vb);
        total += usize::from(va + vb);
    }
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / total as f64)
}

/// Pixels within Chebyshev distance `width` of the mask boundary, on both
/// sides of it.
///
/// A pixel belongs to the strip when the nearest pixel of the opposite
/// value (grid cells beyond the border count as background) is at most
/// `width` king moves away. The strip therefore covers the 4-connected
/// boundary ring of the mask plus `width`-deep bands inside and outside
/// of it, and an empty mask yields an empty strip.
pub fn boundary_strip(m: &Mask, width: usize) -> Result<Mask> {
    if width == 0 {
        return Err(Error::Param("strip width must be >= 1".into()));
    }
    let (h, w) = (m.height, m.width);
    // reach_bg: within `width` king moves of a background pixel or the
    // image border; reach_fg: within `width` of a foreground pixel.
    let mut reach_bg: Vec<bool> = m.data.iter().map(|v| *v == 0).collect();
    let mut reach_fg: Vec<bool> = m.data.iter().map(|v| *v == 1).collect();
    for _ in 0..width {
        reach_bg = dilate8(&reach_bg, h, w, true);
        reach_fg = dilate8(&reach_fg, h, w, false);
    }
    let data = m
        .data
        .iter()
        .enumerate()
        .map(|(i, v)| u8::from(if *v == 1 { reach_bg[i] } else { reach_fg[i] }))
        .collect();
    Mask::new(h, w, data)
}

/// One step of 8-connected dilation. Out-of-bounds neighbors contribute
/// `border` (true when the outside of the grid counts as set).
fn dilate8(src: &[bool], h: usize, w: usize, border: bool) -> Vec<bool> {
    let mut out = vec![false; src.len()];
    for y in 0..h {
        for x in 0..w {
            let mut hit = src[y * w + x];
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if hit {
                        break;
                    }
                    let (ny, nx) = (y as i64 + dy, x as i64 + dx);
                    if ny < 0 || ny >= h as i64 || nx < 0 || nx >= w as i64 {
                        hit = border;
                    } else {
                        hit = src[ny as usize * w + nx as usize];
                    }
                }
            }
            out[y * w + x] = hit;
        }
    }
    out
}

/// Zero out the pixels covered by `strip`, leaving the rest bit-identical.
pub fn apply_strip_mask(img: &Image, strip: &Mask) -> Result<Image> {
    if img.height != strip.height || img.width != strip.width {
        return Err(Error::Shape("image/strip shapes differ".into()));
    }
    let data = img
        .data
        .iter()
        .zip(&strip.data)
        .map(|(v, s)| if *s == 1 { 0.0 } else { *v })
        .collect();
    Image::new(img.height, img.width, data)
}

/// Split an image into row-major non-overlapping `patch_h x patch_w` tiles.
pub fn split_patches(img: &Image, patch_h: usize, patch_w: usize) -> Result<(Vec<Image>, PatchGrid)> {
    let grid = plane_grid(img.height, img.width, patch_h, patch_w)?;
    let patches = split_plane(&img.data, img.width, &grid)
        .into_iter()
        .map(|p| Image { height: patch_h, width: patch_w, data: p })
        .collect();
    Ok((patches, grid))
}

/// Reassemble tiles produced by [`split_patches`], by list order.
pub fn stitch_patches(patches: &[Image], grid: &PatchGrid) -> Result<Image> {
    if patches.len() != grid.rows * grid.cols {
        return Err(Error::Tiling(format!(
            "expected {} patches, got {}",
            grid.rows * grid.cols,
            patches.len()
        )));
    }
    for p in patches {
        if p.height != grid.patch_h || p.width != grid.patch_w {
            return Err(Error::Tiling("patch shape inconsistent with grid".into()));
        }
    }
    let planes: Vec<&[f64]> = patches.iter().map(|p| p.data.as_slice()).collect();
    let (h, w, data) = stitch_plane(&planes, grid);
    Ok(Image { height: h, width: w, data })
}

/// Window of size `roi_h x roi_w` centered on the row midway between the
/// bottom of `comp_a`'s support and the top of `comp_b`'s support,
/// clamped into bounds. Horizontal placement is the image center.
pub fn extract_roi(comp_a: &Mask, comp_b: &Mask, roi_h: usize, roi_w: usize) -> Result<RoiWindow> {
    if !comp_a.same_shape(comp_b) {
        return Err(Error::Shape("compartment masks differ in shape".into()));
    }
    let (h, w) = (comp_a.height, comp_a.width);
    if roi_h == 0 || roi_w == 0 || roi_h > h || roi_w > w {
        return Err(Error::Param(format!("roi {roi_h}x{roi_w} does not fit in {h}x{w}")));
    }
    let a_bottom = support_rows(comp_a)
        .map(|(_, max)| max)
        .ok_or_else(|| Error::EmptyMask("first compartment is empty".into()))?;
    let b_top = support_rows(comp_b)
        .map(|(min, _)| min)
        .ok_or_else(|| Error::EmptyMask("second compartment is empty".into()))?;
    // Parity ties round down.
    let middle = (a_bottom + b_top) / 2;
    let top = clamp_window(middle, roi_h, h);
    let left = clamp_window(w / 2, roi_w, w);
    Ok(RoiWindow { top, left, height: roi_h, width: roi_w })
}

/// Minimum and maximum row indices carrying foreground, if any.
fn support_rows(m: &Mask) -> Option<(usize, usize)> {
    let mut bounds: Option<(usize, usize)> = None;
    for y in 0..m.height {
        if m.data[y * m.width..(y + 1) * m.width].iter().any(|v| *v == 1) {
            bounds = Some(match bounds {
                None => (y, y),
                Some((min, _)) => (min, y),
            });
        }
    }
    bounds
}

/// Start index of a length-`span` window centered at `center`, clamped to
/// `[0, limit - span]`.
fn clamp_window(center: usize, span: usize, limit: usize) -> usize {
    let half = span / 2;
    let start = center.saturating_sub(half);
    start.min(limit - span)
}

/// Euclidean norm of the pixelwise difference.
pub fn l2_error(a: &Image, b: &Image) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::Shape("l2_error operands differ in shape".into()));
    }
    let sum: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(va, vb)| (va - vb) * (va - vb))
        .sum();
    Ok(sum.sqrt())
}

// Raw-plane tiling helpers shared with the gradient plumbing, where the
// tiles are not [0,1] images.

pub(crate) fn plane_grid(h: usize, w: usize, patch_h: usize, patch_w: usize) -> Result<PatchGrid> {
    if patch_h == 0 || patch_w == 0 {
        return Err(Error::Tiling("patch dimensions must be nonzero".into()));
    }
    if h % patch_h != 0 || w % patch_w != 0 {
        return Err(Error::Tiling(format!(
            "patches {patch_h}x{patch_w} do not tile {h}x{w} exactly"
        )));
    }
    Ok(PatchGrid { patch_h, patch_w, rows: h / patch_h, cols: w / patch_w })
}

pub(crate) fn split_plane(data: &[f64], w: usize, grid: &PatchGrid) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(grid.rows * grid.cols);
    for gy in 0..grid.rows {
        for gx in 0..grid.cols {
            let mut patch = Vec::with_capacity(grid.patch_h * grid.patch_w);
            for py in 0..grid.patch_h {
                let row = (gy * grid.patch_h + py) * w + gx * grid.patch_w;
                patch.extend_from_slice(&data[row..row + grid.patch_w]);
            }
            out.push(patch);
        }
    }
    out
}

pub(crate) fn stitch_plane(patches: &[&[f64]], grid: &PatchGrid) -> (usize, usize, Vec<f64>) {
    let (h, w) = (grid.rows * grid.patch_h, grid.cols * grid.patch_w);
    let mut data = vec![0.0; h * w];
    for (i, patch) in patches.iter().enumerate() {
        let (gy, gx) = (i / grid.cols, i % grid.cols);
        for py in 0..grid.patch_h {
            let dst = (gy * grid.patch_h + py) * w + gx * grid.patch_w;
            let src = py * grid.patch_w;
            data[dst..dst + grid.patch_w].copy_from_slice(&patch[src..src + grid.patch_w]);
        }
    }
    (h, w, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn block_mask(h: usize, w: usize, top: usize, left: usize, bh: usize, bw: usize) -> Mask {
        Mask::from_fn(h, w, |y, x| y >= top && y < top + bh && x >= left && x < left + bw)
    }

    /// Brute-force oracle for the strip rule: a pixel is in the strip iff
    /// the nearest opposite-valued cell (cells beyond the border count as
    /// background) is at most `width` away in Chebyshev distance.
    fn strip_oracle(m: &Mask, width: usize) -> Mask {
        let (h, w) = (m.height(), m.width());
        Mask::from_fn(h, w, |y, x| {
            let me = m.get(y, x);
            let mut best = usize::MAX;
            if me == 1 {
                // Distance to the outside of the grid.
                best = (y + 1).min(h - y).min(x + 1).min(w - x);
            }
            for qy in 0..h {
                for qx in 0..w {
                    if m.get(qy, qx) != me {
                        let d = qy.abs_diff(y).max(qx.abs_diff(x));
                        best = best.min(d);
                    }
                }
            }
            best <= width
        })
    }

    #[test]
    fn dice_basic_cases() {
        let a = block_mask(4, 4, 0, 0, 2, 2);
        assert_eq!(dice_score(&a, &a).unwrap(), 1.0);

        // |A|=4, |B|=4, |A∩B|=2.
        let b = block_mask(4, 4, 0, 1, 2, 2);
        assert_eq!(dice_score(&a, &b).unwrap(), 0.5);

        let c = block_mask(4, 4, 2, 2, 2, 2);
        assert_eq!(dice_score(&a, &c).unwrap(), 0.0);

        let empty = Mask::zeros(4, 4);
        assert_eq!(dice_score(&empty, &empty).unwrap(), 1.0);
        assert_eq!(dice_score(&a, &empty).unwrap(), 0.0);
    }

    #[test]
    fn dice_shape_mismatch() {
        let a = Mask::zeros(4, 4);
        let b = Mask::zeros(4, 5);
        assert!(matches!(dice_score(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn strip_rejects_zero_width() {
        let m = Mask::zeros(4, 4);
        assert!(matches!(boundary_strip(&m, 0), Err(Error::Param(_))));
    }

    #[test]
    fn strip_of_empty_mask_is_empty() {
        let m = Mask::zeros(6, 6);
        assert!(boundary_strip(&m, 3).unwrap().is_empty_mask());
    }

    #[test]
    fn strip_of_solid_block_matches_oracle() {
        // 3x3 block centered in a 5x5 grid, width 1: the 8-pixel boundary
        // ring of the block plus the adjacent exterior ring.
        let m = block_mask(5, 5, 1, 1, 3, 3);
        let strip = boundary_strip(&m, 1).unwrap();
        assert_eq!(strip, strip_oracle(&m, 1));
        assert_eq!(strip.count_ones(), 24);
        assert_eq!(strip.get(2, 2), 0); // block center excluded
        assert_eq!(strip.get(1, 1), 1); // block ring
        assert_eq!(strip.get(0, 0), 1); // exterior ring
    }

    #[test]
    fn strip_of_full_mask_is_border() {
        let m = Mask::from_fn(6, 6, |_, _| true);
        let strip = boundary_strip(&m, 1).unwrap();
        assert_eq!(strip, strip_oracle(&m, 1));
        for y in 0..6 {
            for x in 0..6 {
                let on_border = y == 0 || y == 5 || x == 0 || x == 5;
                assert_eq!(strip.get(y, x) == 1, on_border, "at ({y},{x})");
            }
        }
    }

    #[test]
    fn strip_contains_four_connected_boundary() {
        let m = block_mask(16, 16, 3, 4, 7, 6);
        for width in 1..=4 {
            let strip = boundary_strip(&m, width).unwrap();
            for y in 0..16usize {
                for x in 0..16usize {
                    if m.get(y, x) == 0 {
                        continue;
                    }
                    let on_boundary = [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)].iter().any(|(dy, dx)| {
                        let (ny, nx) = (y as i64 + dy, x as i64 + dx);
                        ny < 0 || ny >= 16 || nx < 0 || nx >= 16 || m.get(ny as usize, nx as usize) == 0
                    });
                    if on_boundary {
                        assert_eq!(strip.get(y, x), 1);
                    }
                }
            }
        }
    }

    #[test]
    fn apply_strip_cases() {
        let img = Image::from_fn(4, 4, |y, x| (y * 4 + x) as f64 / 16.0).unwrap();
        let empty = Mask::zeros(4, 4);
        assert_eq!(apply_strip_mask(&img, &empty).unwrap(), img);

        let full = Mask::from_fn(4, 4, |_, _| true);
        assert!(apply_strip_mask(&img, &full).unwrap().data().iter().all(|v| *v == 0.0));

        let single = Mask::from_fn(4, 4, |y, x| y == 2 && x == 3);
        let masked = apply_strip_mask(&img, &single).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                if y == 2 && x == 3 {
                    assert_eq!(masked.get(y, x), 0.0);
                } else {
                    assert_eq!(masked.get(y, x).to_bits(), img.get(y, x).to_bits());
                }
            }
        }
    }

    #[test]
    fn split_counts_and_errors() {
        let img = Image::zeros(64, 64);
        let (patches, grid) = split_patches(&img, 16, 16).unwrap();
        assert_eq!(patches.len(), 16);
        assert_eq!((grid.rows, grid.cols), (4, 4));

        let (one, grid1) = split_patches(&img, 64, 64).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0], img);
        assert_eq!((grid1.rows, grid1.cols), (1, 1));

        let odd = Image::zeros(64, 60);
        assert!(matches!(split_patches(&odd, 16, 16), Err(Error::Tiling(_))));
    }

    #[test]
    fn stitch_is_order_sensitive() {
        let img = Image::from_fn(4, 4, |y, x| (y * 4 + x) as f64 / 15.0).unwrap();
        let (mut patches, grid) = split_patches(&img, 2, 2).unwrap();
        patches.swap(0, 3);
        let stitched = stitch_patches(&patches, &grid).unwrap();
        assert_ne!(stitched, img);
    }

    #[test]
    fn stitch_count_mismatch_is_error() {
        let img = Image::zeros(4, 4);
        let (patches, grid) = split_patches(&img, 2, 2).unwrap();
        assert!(matches!(stitch_patches(&patches[..3], &grid), Err(Error::Tiling(_))));
    }

    #[test]
    fn roi_midpoint_and_touching() {
        // comp_a support ends at row 10, comp_b starts at row 20.
        let a = block_mask(32, 32, 5, 0, 6, 32);
        let b = block_mask(32, 32, 20, 0, 6, 32);
        let roi = extract_roi(&a, &b, 5, 8).unwrap();
        assert_eq!(roi.top + roi.height / 2, 15);

        // Touching compartments meeting at row 12.
        let a2 = block_mask(32, 32, 6, 0, 7, 32); // rows 6..=12
        let b2 = block_mask(32, 32, 12, 0, 5, 32); // rows 12..=16
        let roi2 = extract_roi(&a2, &b2, 5, 8).unwrap();
        assert_eq!(roi2.top + roi2.height / 2, 12);
    }

    #[test]
    fn roi_clamps_to_bounds() {
        // Midpoint near the top edge: brute-force clamp check.
        let a = block_mask(32, 32, 0, 0, 2, 32);
        let b = block_mask(32, 32, 3, 0, 2, 32);
        let roi = extract_roi(&a, &b, 12, 12).unwrap();
        let middle = (1 + 3) / 2;
        let expected_top = (middle as i64 - 6).clamp(0, 32 - 12) as usize;
        assert_eq!(roi.top, expected_top);
        assert!(roi.top + roi.height <= 32 && roi.left + roi.width <= 32);
    }

    #[test]
    fn roi_empty_compartment_is_error() {
        let a = Mask::zeros(16, 16);
        let b = block_mask(16, 16, 8, 0, 4, 16);
        assert!(matches!(extract_roi(&a, &b, 4, 4), Err(Error::EmptyMask(_))));
        assert!(matches!(extract_roi(&b, &a, 4, 4), Err(Error::EmptyMask(_))));
    }

    #[test]
    fn l2_cases() {
        let a = Image::from_fn(3, 3, |y, x| ((y + x) % 2) as f64).unwrap();
        assert_eq!(l2_error(&a, &a).unwrap(), 0.0);

        let ones = Image::from_fn(4, 4, |_, _| 1.0).unwrap();
        let zeros = Image::zeros(4, 4);
        assert!((l2_error(&ones, &zeros).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn image_validation() {
        assert!(Image::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Image::new(2, 2, vec![0.0, 0.5, 1.0, 1.5]).is_err());
        assert!(Image::new(2, 2, vec![0.0, 0.5, 1.0, f64::NAN]).is_err());
        assert!(Mask::new(2, 2, vec![0, 1, 2, 0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn dice_is_symmetric(bits in proptest::collection::vec(0u8..=1, 36),
                             bits2 in proptest::collection::vec(0u8..=1, 36)) {
            let a = Mask::new(6, 6, bits).unwrap();
            let b = Mask::new(6, 6, bits2).unwrap();
            let ab = dice_score(&a, &b).unwrap();
            let ba = dice_score(&b, &a).unwrap();
            prop_assert_eq!(ab.to_bits(), ba.to_bits());
            prop_assert_eq!(ab == 1.0, a == b);
        }

        #[test]
        fn split_stitch_roundtrip(vals in proptest::collection::vec(0.0f64..=1.0, 64),
                                  ph in prop::sample::select(vec![1usize, 2, 4, 8]),
                                  pw in prop::sample::select(vec![1usize, 2, 4, 8])) {
            let img = Image::new(8, 8, vals).unwrap();
            let (patches, grid) = split_patches(&img, ph, pw).unwrap();
            let back = stitch_patches(&patches, &grid).unwrap();
            prop_assert_eq!(back, img);
        }

        #[test]
        fn strip_matches_bruteforce(bits in proptest::collection::vec(0u8..=1, 100),
                                    width in 1usize..=3) {
            let m = Mask::new(10, 10, bits).unwrap();
            let strip = boundary_strip(&m, width).unwrap();
            prop_assert_eq!(strip, strip_oracle(&m, width));
        }
    }
}
