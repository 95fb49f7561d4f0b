//! Float RGB images and PNG I/O.

use std::path::Path;

use image::{ImageBuffer, Rgb};

use crate::error::{Error, Result};

/// Row-major RGB image with values nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height * 3],
        }
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        let mut img = Self::new(width, height);
        for px in img.data.chunks_mut(3) {
            px.copy_from_slice(&rgb);
        }
        img
    }

    pub fn from_data(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::Shape(format!(
                "{} values for a {width}x{height} rgb image",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        let o = (y * self.width + x) * 3;
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let o = (y * self.width + x) * 3;
        self.data[o..o + 3].copy_from_slice(&rgb);
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Rounds every value to the nearest 8-bit level.
    pub fn quantized_8bit(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .map(|v| f32::from(to_u8(*v)) / 255.0)
                .collect(),
        }
    }

    /// Rounds every value to the nearest 16-bit level.
    pub fn quantized_16bit(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .map(|v| f32::from(to_u16(*v)) / 65535.0)
                .collect(),
        }
    }

    pub fn save_png8(&self, path: &Path) -> Result<()> {
        let buf: Vec<u8> = self.data.iter().map(|v| to_u8(*v)).collect();
        let img = ImageBuffer::<Rgb<u8>, _>::from_raw(self.width as u32, self.height as u32, buf)
            .expect("buffer length matches");
        img.save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })
    }

    pub fn save_png16(&self, path: &Path) -> Result<()> {
        let buf: Vec<u16> = self.data.iter().map(|v| to_u16(*v)).collect();
        let img = ImageBuffer::<Rgb<u16>, _>::from_raw(self.width as u32, self.height as u32, buf)
            .expect("buffer length matches");
        img.save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })
    }

    /// Loads an 8- or 16-bit PNG.
    pub fn load_png(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let dynimg = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let (w, h) = (dynimg.width() as usize, dynimg.height() as usize);
        let data = match dynimg {
            image::DynamicImage::ImageRgb16(b) => {
                b.into_raw().into_iter().map(|v| f32::from(v) / 65535.0).collect()
            }
            image::DynamicImage::ImageRgba16(_) | image::DynamicImage::ImageLuma16(_) => dynimg
                .to_rgb16()
                .into_raw()
                .into_iter()
                .map(|v| f32::from(v) / 65535.0)
                .collect(),
            other => other
                .to_rgb8()
                .into_raw()
                .into_iter()
                .map(|v| f32::from(v) / 255.0)
                .collect(),
        };
        Self::from_data(w, h, data)
    }
}

fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn to_u16(v: f32) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

/// Writes a scalar field as an 8-bit grayscale PNG, min-max normalised.
/// Returns `(min, max)`.
pub fn save_gray_normalized(values: &[f32], width: usize, height: usize, path: &Path) -> Result<(f32, f32)> {
    let lo = values.iter().copied().fold(f32::INFINITY, f32::min);
    let hi = values.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let span = hi - lo;
    let buf: Vec<u8> = values
        .iter()
        .map(|v| if span > 0.0 { to_u8((v - lo) / span) } else { 0 })
        .collect();
    let img = ImageBuffer::<image::Luma<u8>, _>::from_raw(width as u32, height as u32, buf)
        .ok_or_else(|| Error::Shape(format!("{} values for a {width}x{height} map", values.len())))?;
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
    Ok((lo, hi))
}
