//! Interleaved (height × width × channels) image buffers.

use std::io::Cursor;

use image::{DynamicImage, ImageFormat, RgbImage};

use crate::error::{Error, Result};

/// An 8-bit raster stored row-major with interleaved channels.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Raster {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for Raster {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Raster({}x{}x{})", self.height, self.width, self.channels)
    }
}

impl Raster {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::arg(format!(
                "raster dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::arg(format!(
                "raster buffer has {} bytes, expected {}",
                data.len(),
                height * width * channels
            )));
        }
        Ok(Self { height, width, channels, data })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: u8) -> Self {
        Self::from_fn(height, width, channels, |_, _, _| value)
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> u8,
    ) -> Self {
        assert!(height > 0 && width > 0 && channels > 0, "empty raster");
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self { height, width, channels, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn is_square(&self) -> bool {
        self.height == self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Decode PNG/JPEG bytes into an RGB raster.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory(bytes)?.to_rgb8();
        let (w, h) = img.dimensions();
        Self::new(h as usize, w as usize, 3, img.into_raw())
    }

    /// Lossless PNG encoding. Only 3-channel rasters are supported.
    pub fn encode_png(&self) -> Result<Vec<u8>> {
        if self.channels != 3 {
            return Err(Error::arg(format!(
                "PNG export expects 3 channels, raster has {}",
                self.channels
            )));
        }
        let img = RgbImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
            .ok_or_else(|| Error::Internal("raster buffer size mismatch".into()))?;
        let mut out = Cursor::new(Vec::new());
        DynamicImage::ImageRgb8(img).write_to(&mut out, ImageFormat::Png)?;
        Ok(out.into_inner())
    }
}

/// Real-valued raster, same layout as [`Raster`].
#[derive(Clone, Debug, PartialEq)]
pub struct RealRaster {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl RealRaster {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * channels || data.is_empty() {
            return Err(Error::arg(format!(
                "real raster buffer has {} values, expected {}",
                data.len(),
                height * width * channels
            )));
        }
        Ok(Self { height, width, channels, data })
    }

    pub fn from_raster(r: &Raster) -> Self {
        Self {
            height: r.height,
            width: r.width,
            channels: r.channels,
            data: r.data.iter().map(|&v| f64::from(v)).collect(),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_is_lossless() {
        let r = Raster::from_fn(5, 7, 3, |y, x, c| (y * 31 + x * 7 + c * 101) as u8);
        let back = Raster::decode(&r.encode_png().unwrap()).unwrap();
        assert_eq!(r, back);
    }

    #[test]
    fn rejects_bad_buffers() {
        assert!(Raster::new(2, 2, 3, vec![0; 11]).is_err());
        assert!(Raster::new(0, 2, 3, vec![]).is_err());
    }
}
