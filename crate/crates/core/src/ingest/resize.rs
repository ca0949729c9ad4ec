use crate::error::{Error, Result};
use crate::raster::{Raster, RealRaster};

/// Bilinear resize to `side × side`.
pub fn resize_to(image: &Raster, side: usize) -> Result<Raster> {
    if side == 0 {
        return Err(Error::arg("resize side must be positive"));
    }
    resize(image, side, side)
}

/// Bilinear resize with half-pixel centres and edge clamping. Output values
/// are rounded to the nearest integer.
pub fn resize(image: &Raster, height: usize, width: usize) -> Result<Raster> {
    if height == 0 || width == 0 {
        return Err(Error::arg("resize target must be positive"));
    }
    if height == image.height() && width == image.width() {
        return Ok(image.clone());
    }
    let ch = image.channels();
    let mut out = Vec::with_capacity(height * width * ch);
    sample_bilinear(image.height(), image.width(), height, width, |y, x, wy, wx| {
        for c in 0..ch {
            let v = blend(
                [
                    f64::from(image.get(y.0, x.0, c)),
                    f64::from(image.get(y.0, x.1, c)),
                    f64::from(image.get(y.1, x.0, c)),
                    f64::from(image.get(y.1, x.1, c)),
                ],
                wy,
                wx,
            );
            out.push(v.round().clamp(0.0, 255.0) as u8);
        }
    });
    Raster::new(height, width, ch, out)
}

pub fn resize_real(image: &RealRaster, height: usize, width: usize) -> Result<RealRaster> {
    if height == 0 || width == 0 {
        return Err(Error::arg("resize target must be positive"));
    }
    if height == image.height() && width == image.width() {
        return Ok(image.clone());
    }
    let ch = image.channels();
    let mut out = Vec::with_capacity(height * width * ch);
    sample_bilinear(image.height(), image.width(), height, width, |y, x, wy, wx| {
        for c in 0..ch {
            out.push(blend(
                [
                    image.get(y.0, x.0, c),
                    image.get(y.0, x.1, c),
                    image.get(y.1, x.0, c),
                    image.get(y.1, x.1, c),
                ],
                wy,
                wx,
            ));
        }
    });
    RealRaster::new(height, width, ch, out)
}

#[inline]
fn blend(v: [f64; 4], wy: f64, wx: f64) -> f64 {
    let top = v[0] + (v[1] - v[0]) * wx;
    let bottom = v[2] + (v[3] - v[2]) * wx;
    top + (bottom - top) * wy
}

fn axis(src: usize, dst: usize, i: usize) -> (usize, usize, f64) {
    let scale = src as f64 / dst as f64;
    let pos = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(src - 1);
    (lo, hi, pos - lo as f64)
}

fn sample_bilinear(
    src_h: usize,
    src_w: usize,
    dst_h: usize,
    dst_w: usize,
    mut emit: impl FnMut((usize, usize), (usize, usize), f64, f64),
) {
    let cols: Vec<_> = (0..dst_w).map(|x| axis(src_w, dst_w, x)).collect();
    for y in 0..dst_h {
        let (y0, y1, wy) = axis(src_h, dst_h, y);
        for &(x0, x1, wx) in &cols {
            emit((y0, y1), (x0, x1), wy, wx);
        }
    }
}
