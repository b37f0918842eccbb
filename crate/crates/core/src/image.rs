//! Grayscale and binary raster types plus the preprocessing steps applied
//! before feature extraction: quantization, thresholding and ROI cropping.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ImageError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("pixel buffer has {found} entries, expected {expected}")]
    BufferSize { expected: usize, found: usize },
    #[error("gray level count {0} outside [2, 256]")]
    InvalidLevels(u32),
    #[error("cannot quantize {source_levels} gray levels to {target}")]
    QuantizeLevels { target: u16, source_levels: u16 },
    #[error("pixel value {value} at index {index} is not below the level count {levels}")]
    PixelOutOfRange { index: usize, value: u8, levels: u16 },
    #[error("threshold {threshold} is not below the level count {levels}")]
    InvalidThreshold { threshold: u16, levels: u16 },
    #[error("ROI {roi:?} does not fit inside a {width}x{height} image")]
    InvalidRoi { roi: Rect, width: usize, height: usize },
}

/// Rectangular grid of quantized intensities in `[0, levels)`, row-major with
/// the origin at the top-left corner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    levels: u16,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, levels: u16, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions { width, height });
        }
        if !(2..=256).contains(&levels) {
            return Err(ImageError::InvalidLevels(u32::from(levels)));
        }
        if pixels.len() != width * height {
            return Err(ImageError::BufferSize { expected: width * height, found: pixels.len() });
        }
        if let Some((index, &value)) = pixels.iter().enumerate().find(|(_, &p)| u16::from(p) >= levels) {
            return Err(ImageError::PixelOutOfRange { index, value, levels });
        }
        Ok(Self { width, height, levels, pixels })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        levels: u16,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self, ImageError> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, levels, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn levels(&self) -> u16 {
        self.levels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Sum of all pixel intensities.
    pub fn total_intensity(&self) -> u64 {
        self.pixels.iter().map(|&p| u64::from(p)).sum()
    }

    pub fn histogram(&self) -> Vec<u64> {
        let mut hist = vec![0u64; usize::from(self.levels)];
        for &p in &self.pixels {
            hist[usize::from(p)] += 1;
        }
        hist
    }
}

/// Binary raster; `true` marks a set pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions { width, height });
        }
        if bits.len() != width * height {
            return Err(ImageError::BufferSize { expected: width * height, found: bits.len() });
        }
        Ok(Self { width, height, bits })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self, ImageError> {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self::new(width, height, bits)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// The same raster as a two-level gray image.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            levels: 2,
            pixels: self.bits.iter().map(|&b| u8::from(b)).collect(),
        }
    }

    /// Reinterprets a two-level gray image; any other level count is rejected.
    pub fn from_gray(img: &GrayImage) -> Result<Self, ImageError> {
        if img.levels != 2 {
            return Err(ImageError::InvalidLevels(u32::from(img.levels)));
        }
        Ok(Self {
            width: img.width,
            height: img.height,
            bits: img.pixels.iter().map(|&p| p == 1).collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.w >= 1 && self.h >= 1 && self.x + self.w <= width && self.y + self.h <= height
    }
}

/// Uniform re-binning: `p -> floor(p * target / levels)`.
pub fn quantize(img: &GrayImage, target_levels: u16) -> Result<GrayImage, ImageError> {
    if target_levels < 2 || target_levels > img.levels {
        return Err(ImageError::QuantizeLevels { target: target_levels, source_levels: img.levels });
    }
    let from = u32::from(img.levels);
    let to = u32::from(target_levels);
    let pixels = img
        .pixels
        .iter()
        .map(|&p| (u32::from(p) * to / from) as u8)
        .collect();
    Ok(GrayImage { width: img.width, height: img.height, levels: target_levels, pixels })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threshold {
    Value(u16),
    /// Otsu's between-class variance maximization.
    Auto,
}

/// Sets a bit wherever `pixel >= threshold`.
pub fn threshold_binarize(img: &GrayImage, threshold: Threshold) -> Result<BinaryImage, ImageError> {
    let t = match threshold {
        Threshold::Value(t) => {
            if t >= img.levels {
                return Err(ImageError::InvalidThreshold { threshold: t, levels: img.levels });
            }
            t
        }
        Threshold::Auto => otsu_threshold(img),
    };
    Ok(BinaryImage {
        width: img.width,
        height: img.height,
        bits: img.pixels.iter().map(|&p| u16::from(p) >= t).collect(),
    })
}

/// Threshold `t` in `1..levels` maximizing the between-class variance of the
/// split `{p < t}` / `{p >= t}`. Ties resolve to the smallest `t`.
pub fn otsu_threshold(img: &GrayImage) -> u16 {
    let hist = img.histogram();
    let total = img.pixels.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();

    let mut best_t = 1u16;
    let mut best_var = f64::NEG_INFINITY;
    let mut count_below = 0.0;
    let mut sum_below = 0.0;
    for t in 1..usize::from(img.levels) {
        count_below += hist[t - 1] as f64;
        sum_below += (t - 1) as f64 * hist[t - 1] as f64;
        let count_above = total - count_below;
        let var = if count_below == 0.0 || count_above == 0.0 {
            0.0
        } else {
            let mean_below = sum_below / count_below;
            let mean_above = (sum_all - sum_below) / count_above;
            let w0 = count_below / total;
            let w1 = count_above / total;
            w0 * w1 * (mean_below - mean_above).powi(2)
        };
        if var > best_var {
            best_var = var;
            best_t = t as u16;
        }
    }
    best_t
}

pub fn crop_roi(img: &GrayImage, roi: Rect) -> Result<GrayImage, ImageError> {
    if !roi.fits(img.width, img.height) {
        return Err(ImageError::InvalidRoi { roi, width: img.width, height: img.height });
    }
    let mut pixels = Vec::with_capacity(roi.w * roi.h);
    for y in roi.y..roi.y + roi.h {
        let start = y * img.width + roi.x;
        pixels.extend_from_slice(&img.pixels[start..start + roi.w]);
    }
    Ok(GrayImage { width: roi.w, height: roi.h, levels: img.levels, pixels })
}
