//! Box-counting dimension of binary images, Hölder exponent images and the
//! multifractal spectrum `f(alpha)` built from their level sets.
//!
//! All log-log fits regress `ln N` against `ln(1/size)` so the slope is the
//! dimension itself, with box sizes measured in pixels.

use crate::image::{BinaryImage, GrayImage};
use crate::regression::fit_line;
use rayon::prelude::*;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FractalError {
    #[error("box sizes must contain at least two distinct values in [1, {max}], got {sizes:?}")]
    InvalidBoxSizes { sizes: Vec<usize>, max: usize },
    #[error("image has no set pixels")]
    EmptySupport,
    #[error("fewer than two usable log-log points")]
    DegenerateRegression,
    #[error("window sizes must be odd, strictly ascending and at least two, got {0:?}")]
    InvalidWindows(Vec<usize>),
    #[error("image has zero total intensity")]
    ZeroMeasure,
    #[error("bin count must be at least 1")]
    InvalidBinCount,
    #[error("spectrum bins must be non-empty and strictly ascending in alpha")]
    InvalidSpectrum,
}

/// One `(box size, occupied boxes)` observation of a log-log fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLogPoint {
    pub box_size: usize,
    pub count: usize,
    /// `ln(1/box_size)`
    pub log_inv_scale: f64,
    /// `ln(count)`
    pub log_count: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FractalEstimate {
    pub dimension: f64,
    pub r_squared: f64,
    pub points: Vec<LogLogPoint>,
}

impl FractalEstimate {
    /// `lambda,count` rows followed by a `dimension,r2` record.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,count\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{}", p.box_size, p.count);
        }
        let _ = writeln!(out, "dimension,r2");
        let _ = writeln!(out, "{},{}", self.dimension, self.r_squared);
        out
    }
}

/// Number of `box_size`-sided cells of an origin-anchored grid holding at least
/// one set pixel. Partial cells along the right and bottom edges count.
pub fn box_count(img: &BinaryImage, box_size: usize) -> usize {
    assert!(box_size >= 1, "box size must be positive");
    let cols = img.width().div_ceil(box_size);
    let rows = img.height().div_ceil(box_size);
    let mut occupied = vec![false; cols * rows];
    for y in 0..img.height() {
        let row = &img.bits()[y * img.width()..(y + 1) * img.width()];
        let cell_row = (y / box_size) * cols;
        for (x, &bit) in row.iter().enumerate() {
            if bit {
                occupied[cell_row + x / box_size] = true;
            }
        }
    }
    occupied.into_iter().filter(|&o| o).count()
}

/// Powers of two from 1 up to half the shorter side (at least `[1, 2]` when
/// the shorter side allows it).
pub fn default_box_sizes(width: usize, height: usize) -> Vec<usize> {
    let limit = (width.min(height) / 2).max(2).min(width.min(height));
    std::iter::successors(Some(1usize), |s| Some(s * 2)).take_while(|&s| s <= limit).collect()
}

fn normalize_sizes(sizes: &[usize], max: usize) -> Result<Vec<usize>, FractalError> {
    let mut sorted = sizes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() < 2 || sorted[0] == 0 || *sorted.last().unwrap() > max {
        return Err(FractalError::InvalidBoxSizes { sizes: sizes.to_vec(), max });
    }
    Ok(sorted)
}

/// Least-squares slope of `ln N(size)` against `ln(1/size)`. Sizes with no
/// occupied box are left out of the fit.
pub fn box_counting_dimension(img: &BinaryImage, sizes: &[usize]) -> Result<FractalEstimate, FractalError> {
    let sizes = normalize_sizes(sizes, img.width().min(img.height()))?;
    if img.count_ones() == 0 {
        return Err(FractalError::EmptySupport);
    }
    let points: Vec<LogLogPoint> = sizes
        .iter()
        .map(|&s| (s, box_count(img, s)))
        .filter(|&(_, n)| n > 0)
        .map(|(s, n)| LogLogPoint {
            box_size: s,
            count: n,
            log_inv_scale: -(s as f64).ln(),
            log_count: (n as f64).ln(),
        })
        .collect();
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.log_inv_scale, p.log_count)).collect();
    let fit = fit_line(&xy).ok_or(FractalError::DegenerateRegression)?;
    Ok(FractalEstimate { dimension: fit.slope, r_squared: fit.r_squared, points })
}

/// Per-pixel Hölder exponents. Pixels whose measure vanishes at all but at
/// most one scale carry `f64::INFINITY`.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderImage {
    width: usize,
    height: usize,
    alpha: Vec<f64>,
}

impl HolderImage {
    pub fn new(width: usize, height: usize, alpha: Vec<f64>) -> Option<Self> {
        (width >= 1 && height >= 1 && alpha.len() == width * height && alpha.iter().all(|a| !a.is_nan()))
            .then_some(Self { width, height, alpha })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.alpha[y * self.width + x]
    }

    pub fn undefined_count(&self) -> usize {
        self.alpha.iter().filter(|a| a.is_infinite()).count()
    }
}

/// Summed-area table over the image extended by `pad` pixels on every side,
/// with out-of-range coordinates clamped to the nearest edge pixel.
struct PaddedIntegral {
    stride: usize,
    sums: Vec<u64>,
}

impl PaddedIntegral {
    fn new(img: &GrayImage, pad: usize) -> Self {
        let pw = img.width() + 2 * pad;
        let ph = img.height() + 2 * pad;
        let stride = pw + 1;
        let mut sums = vec![0u64; stride * (ph + 1)];
        for py in 0..ph {
            let y = py.saturating_sub(pad).min(img.height() - 1);
            let mut row_sum = 0u64;
            for px in 0..pw {
                let x = px.saturating_sub(pad).min(img.width() - 1);
                row_sum += u64::from(img.get(x, y));
                sums[(py + 1) * stride + px + 1] = sums[py * stride + px + 1] + row_sum;
            }
        }
        Self { stride, sums }
    }

    /// Sum over padded coordinates `[x0, x1) x [y0, y1)`.
    fn sum(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> u64 {
        let s = self.stride;
        self.sums[y1 * s + x1] + self.sums[y0 * s + x0] - self.sums[y0 * s + x1] - self.sums[y1 * s + x0]
    }
}

/// Hölder exponent image. The measure of a window is its intensity sum over
/// the total image intensity; windows reaching past the border read the
/// nearest edge pixel. Window side `s` maps to scale `s / max(width, height)`
/// and each exponent is the slope of `ln mu` against `ln scale`.
pub fn holder_image(img: &GrayImage, window_sizes: &[usize]) -> Result<HolderImage, FractalError> {
    let valid = window_sizes.len() >= 2
        && window_sizes.iter().all(|&w| w % 2 == 1)
        && window_sizes.windows(2).all(|p| p[0] < p[1]);
    if !valid {
        return Err(FractalError::InvalidWindows(window_sizes.to_vec()));
    }
    let total = img.total_intensity();
    if total == 0 {
        return Err(FractalError::ZeroMeasure);
    }
    let total = total as f64;
    let pad = window_sizes.last().unwrap() / 2;
    let integral = PaddedIntegral::new(img, pad);
    let extent = img.width().max(img.height()) as f64;
    let log_scales: Vec<f64> = window_sizes.iter().map(|&s| (s as f64 / extent).ln()).collect();

    let width = img.width();
    let mut alpha = vec![0.0; width * img.height()];
    alpha.par_chunks_mut(width).enumerate().for_each(|(y, row)| {
        let mut points = Vec::with_capacity(window_sizes.len());
        for (x, a) in row.iter_mut().enumerate() {
            points.clear();
            for (&s, &ls) in window_sizes.iter().zip(&log_scales) {
                let r = s / 2;
                // pixel (x, y) sits at padded (x + pad, y + pad)
                let x0 = x + pad - r;
                let y0 = y + pad - r;
                let mass = integral.sum(x0, y0, x0 + s, y0 + s);
                if mass > 0 {
                    points.push((ls, (mass as f64 / total).ln()));
                }
            }
            *a = fit_line(&points).map_or(f64::INFINITY, |f| f.slope);
        }
    });
    Ok(HolderImage { width, height: img.height(), alpha })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumBin {
    pub alpha_center: f64,
    pub f_alpha: f64,
    /// Cardinality of the level set assigned to this bin.
    pub pixels: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultifractalSpectrum {
    bins: Vec<SpectrumBin>,
    bin_width: f64,
    undefined_pixels: usize,
}

impl MultifractalSpectrum {
    pub fn new(bins: Vec<SpectrumBin>, bin_width: f64) -> Result<Self, FractalError> {
        let sorted = bins.windows(2).all(|p| p[0].alpha_center < p[1].alpha_center);
        if bins.is_empty() || !sorted || !(bin_width > 0.0) {
            return Err(FractalError::InvalidSpectrum);
        }
        Ok(Self { bins, bin_width, undefined_pixels: 0 })
    }

    pub fn bins(&self) -> &[SpectrumBin] {
        &self.bins
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    /// Pixels excluded from binning because their exponent is undefined.
    pub fn undefined_pixels(&self) -> usize {
        self.undefined_pixels
    }
}

/// Bins the finite exponents into `n_bins` equal-width intervals and assigns
/// each non-empty bin the box-counting dimension of its level set. A zero
/// alpha range collapses to one bin of width 1.
pub fn multifractal_spectrum(
    h: &HolderImage,
    n_bins: usize,
    sizes: &[usize],
) -> Result<MultifractalSpectrum, FractalError> {
    if n_bins == 0 {
        return Err(FractalError::InvalidBinCount);
    }
    normalize_sizes(sizes, h.width.min(h.height))?;
    let (lo, hi) = h
        .alpha
        .iter()
        .filter(|a| a.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &a| (lo.min(a), hi.max(a)));
    if lo > hi {
        return Err(FractalError::EmptySupport);
    }
    let undefined_pixels = h.undefined_count();
    let range = hi - lo;
    let (n_bins, bin_width) = if range > 0.0 { (n_bins, range / n_bins as f64) } else { (1, 1.0) };

    let bin_of = |a: f64| -> Option<usize> {
        if !a.is_finite() {
            return None;
        }
        if range == 0.0 {
            return Some(0);
        }
        Some((((a - lo) / bin_width) as usize).min(n_bins - 1))
    };
    let assignment: Vec<Option<usize>> = h.alpha.iter().map(|&a| bin_of(a)).collect();
    let mut cardinality = vec![0usize; n_bins];
    for k in assignment.iter().flatten() {
        cardinality[*k] += 1;
    }

    let occupied: Vec<usize> = (0..n_bins).filter(|&k| cardinality[k] > 0).collect();
    let bins = occupied
        .par_iter()
        .map(|&k| {
            let level_set = BinaryImage::new(h.width, h.height, assignment.iter().map(|&b| b == Some(k)).collect())
                .expect("level set matches holder image dimensions");
            let estimate = box_counting_dimension(&level_set, sizes)?;
            let alpha_center = if range == 0.0 { lo } else { lo + (k as f64 + 0.5) * bin_width };
            Ok(SpectrumBin { alpha_center, f_alpha: estimate.dimension, pixels: cardinality[k] })
        })
        .collect::<Result<Vec<_>, FractalError>>()?;
    Ok(MultifractalSpectrum { bins, bin_width, undefined_pixels })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumSummary {
    pub alpha_peak: f64,
    pub f_max: f64,
    pub width: f64,
}

/// Peak location, peak height and alpha extent of a spectrum. On equal peak
/// heights the smallest alpha wins.
pub fn spectrum_summary(s: &MultifractalSpectrum) -> SpectrumSummary {
    let mut peak = s.bins[0];
    for b in &s.bins[1..] {
        if b.f_alpha > peak.f_alpha {
            peak = *b;
        }
    }
    let width = s.bins.last().unwrap().alpha_center - s.bins[0].alpha_center;
    SpectrumSummary { alpha_peak: peak.alpha_center, f_max: peak.f_alpha, width }
}
