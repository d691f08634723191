//! Binary PGM (P5) readers and writers.
//!
//! Images are stored with 16-bit samples (most significant byte first,
//! `maxval` 65535) mapped linearly to `[0, 1]`; masks with 8-bit samples
//! and values `{0, 255}`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{Image, Mask};

const IMAGE_MAXVAL: u32 = 65535;

/// Write an image as a 16-bit binary PGM.
pub fn write_image_pgm(path: &Path, img: &Image) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{} {}\n{}\n", img.width(), img.height(), IMAGE_MAXVAL)?;
    for v in img.data() {
        let q = (v * IMAGE_MAXVAL as f64).round() as u16;
        w.write_all(&q.to_be_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Read a 16-bit binary PGM as an image with intensities in `[0, 1]`.
pub fn read_image_pgm(path: &Path) -> Result<Image> {
    let (width, height, maxval, raw) = read_p5(path)?;
    if maxval < 256 {
        return Err(Error::Format(format!("{}: expected 16-bit samples", path.display())));
    }
    let n = width * height;
    if raw.len() != 2 * n {
        return Err(Error::Format(format!("{}: truncated sample data", path.display())));
    }
    let scale = 1.0 / maxval as f64;
    let data = raw
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]) as f64 * scale)
        .map(|v| v.min(1.0))
        .collect();
    Image::new(height, width, data)
}

/// Write a mask as an 8-bit binary PGM with values `{0, 255}`.
pub fn write_mask_pgm(path: &Path, mask: &Mask) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{} {}\n255\n", mask.width(), mask.height())?;
    let bytes: Vec<u8> = mask.data().iter().map(|v| v * 255).collect();
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

/// Read an 8-bit binary PGM as a mask, thresholding at half of `maxval`.
pub fn read_mask_pgm(path: &Path) -> Result<Mask> {
    let (width, height, maxval, raw) = read_p5(path)?;
    if maxval > 255 {
        return Err(Error::Format(format!("{}: expected 8-bit samples", path.display())));
    }
    if raw.len() != width * height {
        return Err(Error::Format(format!("{}: truncated sample data", path.display())));
    }
    let half = (maxval / 2) as u8;
    let data = raw.iter().map(|v| u8::from(*v > half)).collect();
    Mask::new(height, width, data)
}

/// Parse a binary PGM header and return (width, height, maxval, samples).
fn read_p5(path: &Path) -> Result<(usize, usize, u32, Vec<u8>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;

    let mut pos = 0usize;
    let magic = next_token(&bytes, &mut pos)
        .ok_or_else(|| Error::Format(format!("{}: missing PGM magic", path.display())))?;
    if magic != b"P5" {
        return Err(Error::Format(format!("{}: not a binary PGM", path.display())));
    }
    let mut fields = [0usize; 3];
    for f in &mut fields {
        let tok = next_token(&bytes, &mut pos)
            .ok_or_else(|| Error::Format(format!("{}: truncated PGM header", path.display())))?;
        *f = std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("{}: bad PGM header field", path.display())))?;
    }
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("{}: unsupported maxval {maxval}", path.display())));
    }
    // Exactly one whitespace byte separates the header from the samples.
    Ok((width, height, maxval as u32, bytes[pos..].to_vec()))
}

/// Scan the next whitespace-delimited token, skipping `#` comments, and
/// leave `pos` one byte past its trailing delimiter.
fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    if *pos >= bytes.len() {
        return None;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let tok = &bytes[start..*pos];
    if *pos < bytes.len() {
        *pos += 1; // consume the single delimiter after the token
    }
    Some(tok)
}
