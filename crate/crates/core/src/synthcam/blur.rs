use crate::datapipe::{to_byte, Image};
use crate::error::{Error, Result};

pub const DEFAULT_RADIUS: usize = 5;
pub const DEFAULT_MAX_DELTA: u8 = 50;

/// Kernel weight at offset `(dx, dy)` for Gaussian width `sigma`.
#[inline]
pub fn gaussian_weight(dx: i64, dy: i64, sigma: f64) -> f64 {
    (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp()
}

/// Edge-preserving Gaussian blur.
///
/// Each output pixel is the Gaussian-weighted mean (sigma = radius / 2) of
/// the neighbours in its `(2r+1)^2` window, borders clamped to the edge,
/// whose value differs from the centre by at most `max_delta`. Channels are
/// filtered independently. A radius of 0 returns the input unchanged.
pub fn selective_gaussian_blur(img: &Image, radius: usize, max_delta: i32) -> Result<Image> {
    if !(0..=255).contains(&max_delta) {
        return Err(Error::InvalidArgument(format!("max_delta {max_delta} outside 0..=255")));
    }
    if radius == 0 {
        return Ok(img.clone());
    }
    let r = radius as i64;
    let sigma = radius as f64 / 2.0;
    let side = 2 * radius + 1;
    let mut kernel = Vec::with_capacity(side * side);
    for dy in -r..=r {
        for dx in -r..=r {
            kernel.push(gaussian_weight(dx, dy, sigma));
        }
    }
    let (w, h, ch) = (img.width() as i64, img.height() as i64, img.channels());
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let centre = img.get(x as usize, y as usize, c) as i32;
                let mut acc = 0.0;
                let mut norm = 0.0;
                let mut k = 0;
                for dy in -r..=r {
                    let sy = (y + dy).clamp(0, h - 1) as usize;
                    for dx in -r..=r {
                        let sx = (x + dx).clamp(0, w - 1) as usize;
                        let v = img.get(sx, sy, c) as i32;
                        if (v - centre).abs() <= max_delta {
                            acc += kernel[k] * v as f64;
                            norm += kernel[k];
                        }
                        k += 1;
                    }
                }
                out.set(x as usize, y as usize, c, to_byte(acc / norm));
            }
        }
    }
    Ok(out)
}
