//! Gray-level co-occurrence matrices and the contrast / correlation / energy /
//! homogeneity statistics computed from them.
//!
//! Offsets use image coordinates with `y` growing downward, so the 45° and
//! 135° directions at distance `d` are `(d, -d)` and `(-d, -d)`.

use crate::image::{quantize, GrayImage, ImageError};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GlcmError {
    #[error("offset (0, 0) pairs every pixel with itself")]
    ZeroOffset,
    #[error("offset ({dx}, {dy}) leaves no pixel pairs inside a {width}x{height} image")]
    NoValidPairs { dx: i32, dy: i32, width: usize, height: usize },
    #[error("matrix entries must be non-negative and sum to 1 (sum = {sum})")]
    NotNormalized { sum: f64 },
    #[error("matrix must be symmetric for single-mean statistics")]
    NotSymmetric,
    #[error("distance must be at least 1")]
    InvalidDistance,
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Offset {
    dx: i32,
    dy: i32,
}

impl Offset {
    pub fn new(dx: i32, dy: i32) -> Result<Self, GlcmError> {
        if dx == 0 && dy == 0 {
            return Err(GlcmError::ZeroOffset);
        }
        Ok(Self { dx, dy })
    }

    pub fn dx(&self) -> i32 {
        self.dx
    }

    pub fn dy(&self) -> i32 {
        self.dy
    }

    pub fn reversed(&self) -> Self {
        Self { dx: -self.dx, dy: -self.dy }
    }

    /// 0°, 45°, 90° and 135° at `distance`.
    pub fn four_directions(distance: u32) -> Result<[Offset; 4], GlcmError> {
        if distance == 0 {
            return Err(GlcmError::InvalidDistance);
        }
        let d = distance as i32;
        Ok([
            Offset { dx: d, dy: 0 },
            Offset { dx: d, dy: -d },
            Offset { dx: 0, dy: -d },
            Offset { dx: -d, dy: -d },
        ])
    }
}

/// Raw co-occurrence counts, `levels x levels`, row index = reference pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlcmCounts {
    levels: usize,
    counts: Vec<u64>,
}

impl GlcmCounts {
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.levels + j]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn normalize(&self) -> Glcm {
        let total = self.total() as f64;
        Glcm { levels: self.levels, probs: self.counts.iter().map(|&c| c as f64 / total).collect() }
    }
}

/// Normalized co-occurrence probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm {
    levels: usize,
    probs: Vec<f64>,
}

impl Glcm {
    /// Row-major `levels x levels` matrix. Not validated here;
    /// [`haralick_features`] checks normalization.
    pub fn from_probs(levels: usize, probs: Vec<f64>) -> Option<Self> {
        (levels >= 1 && probs.len() == levels * levels).then_some(Self { levels, probs })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.levels + j]
    }

    pub fn transpose(&self) -> Self {
        let n = self.levels;
        let probs = (0..n * n).map(|k| self.probs[(k % n) * n + k / n]).collect();
        Self { levels: n, probs }
    }
}

/// Counts pairs `(img[p], img[p + off])` over every `p` whose partner lies in
/// the image. `symmetric` also accumulates the reversed offset.
pub fn compute_glcm(img: &GrayImage, off: Offset, symmetric: bool) -> Result<GlcmCounts, GlcmError> {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let (dx, dy) = (i64::from(off.dx), i64::from(off.dy));
    if dx.abs() >= w || dy.abs() >= h {
        return Err(GlcmError::NoValidPairs { dx: off.dx, dy: off.dy, width: img.width(), height: img.height() });
    }
    let levels = usize::from(img.levels());
    let mut counts = vec![0u64; levels * levels];
    // reference pixels whose partner stays in bounds
    let x_range = (-dx).max(0)..(w - dx).min(w);
    let y_range = (-dy).max(0)..(h - dy).min(h);
    for y in y_range {
        for x in x_range.clone() {
            let i = usize::from(img.get(x as usize, y as usize));
            let j = usize::from(img.get((x + dx) as usize, (y + dy) as usize));
            counts[i * levels + j] += 1;
            if symmetric {
                counts[j * levels + i] += 1;
            }
        }
    }
    Ok(GlcmCounts { levels, counts })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlcmFeatures {
    pub contrast: f64,
    /// `None` when the gray-level variance is zero.
    pub correlation: Option<f64>,
    pub energy: f64,
    pub homogeneity: f64,
}

const NORMALIZATION_TOLERANCE: f64 = 1e-9;
const VARIANCE_FLOOR: f64 = 1e-12;

pub fn haralick_features(m: &Glcm) -> Result<GlcmFeatures, GlcmError> {
    let sum: f64 = m.probs.iter().sum();
    if m.probs.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(GlcmError::NotNormalized { sum });
    }
    let n = m.levels;
    for i in 0..n {
        for j in i + 1..n {
            if (m.get(i, j) - m.get(j, i)).abs() > NORMALIZATION_TOLERANCE {
                return Err(GlcmError::NotSymmetric);
            }
        }
    }

    let mut mean = 0.0;
    for i in 0..n {
        for j in 0..n {
            mean += i as f64 * m.get(i, j);
        }
    }
    let mut variance = 0.0;
    let mut contrast = 0.0;
    let mut energy = 0.0;
    let mut homogeneity = 0.0;
    let mut covariance = 0.0;
    for i in 0..n {
        for j in 0..n {
            let p = m.get(i, j);
            let d = i as f64 - j as f64;
            variance += p * (i as f64 - mean).powi(2);
            contrast += p * d * d;
            energy += p * p;
            homogeneity += p / (1.0 + d * d);
            covariance += p * (i as f64 - mean) * (j as f64 - mean);
        }
    }
    let correlation = (variance > VARIANCE_FLOOR).then(|| covariance / variance);
    Ok(GlcmFeatures { contrast, correlation, energy, homogeneity })
}

/// Quantizes to `levels` (or keeps the image's own levels if it has fewer), then averages the features of the four symmetric directional matrices.
/// One undefined correlation makes the average undefined.
pub fn averaged_features(img: &GrayImage, distance: u32, levels: u16) -> Result<GlcmFeatures, GlcmError> {
    let offsets = Offset::four_directions(distance)?;
    let q = quantize(img, levels.min(img.levels()))?;
    let mut acc = GlcmFeatures { contrast: 0.0, correlation: Some(0.0), energy: 0.0, homogeneity: 0.0 };
    for off in offsets {
        let f = haralick_features(&compute_glcm(&q, off, true)?.normalize())?;
        acc.contrast += f.contrast;
        acc.energy += f.energy;
        acc.homogeneity += f.homogeneity;
        acc.correlation = acc.correlation.zip(f.correlation).map(|(a, b)| a + b);
    }
    Ok(GlcmFeatures {
        contrast: acc.contrast / 4.0,
        correlation: acc.correlation.map(|c| c / 4.0),
        energy: acc.energy / 4.0,
        homogeneity: acc.homogeneity / 4.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn averaged_features_keeps_coarse_images() {
        let img = GrayImage::from_fn(6, 6, 4, |x, y| ((x + 2 * y) % 4) as u8).unwrap();
        assert_eq!(averaged_features(&img, 1, 8).unwrap(), averaged_features(&img, 1, 4).unwrap());
    }

    /// Visits every ordered pixel pair and keeps those at the offset.
    fn naive_counts(img: &GrayImage, off: Offset, symmetric: bool) -> Vec<u64> {
        let l = usize::from(img.levels());
        let mut c = vec![0u64; l * l];
        for y1 in 0..img.height() {
            for x1 in 0..img.width() {
                for y2 in 0..img.height() {
                    for x2 in 0..img.width() {
                        let dx = x2 as i32 - x1 as i32;
                        let dy = y2 as i32 - y1 as i32;
                        let i = usize::from(img.get(x1, y1));
                        let j = usize::from(img.get(x2, y2));
                        if (dx, dy) == (off.dx(), off.dy()) {
                            c[i * l + j] += 1;
                        }
                        if symmetric && (dx, dy) == (-off.dx(), -off.dy()) {
                            c[i * l + j] += 1;
                        }
                    }
                }
            }
        }
        c
    }

    fn two_by_two() -> GrayImage {
        GrayImage::new(2, 2, 2, vec![0, 1, 1, 1]).unwrap()
    }

    #[test]
    fn horizontal_pairs() {
        let g = compute_glcm(&two_by_two(), Offset::new(1, 0).unwrap(), false).unwrap();
        assert_eq!((g.get(0, 0), g.get(0, 1), g.get(1, 0), g.get(1, 1)), (0, 1, 0, 1));
        let s = compute_glcm(&two_by_two(), Offset::new(1, 0).unwrap(), true).unwrap();
        assert_eq!((s.get(0, 0), s.get(0, 1), s.get(1, 0), s.get(1, 1)), (0, 1, 1, 2));
    }

    #[test]
    fn constant_image_single_entry() {
        let img = GrayImage::from_fn(5, 4, 8, |_, _| 3).unwrap();
        let g = compute_glcm(&img, Offset::new(1, 0).unwrap(), false).unwrap();
        assert_eq!(g.get(3, 3), 16);
        assert_eq!(g.total(), 16);
    }

    #[test]
    fn offset_errors() {
        assert_eq!(Offset::new(0, 0), Err(GlcmError::ZeroOffset));
        let img = two_by_two();
        assert!(matches!(compute_glcm(&img, Offset::new(2, 0).unwrap(), false), Err(GlcmError::NoValidPairs { .. })));
        assert!(matches!(compute_glcm(&img, Offset::new(0, -2).unwrap(), true), Err(GlcmError::NoValidPairs { .. })));
        assert_eq!(Offset::four_directions(0), Err(GlcmError::InvalidDistance));
    }

    #[test]
    fn constant_features() {
        let img = GrayImage::from_fn(6, 6, 4, |_, _| 2).unwrap();
        let f = haralick_features(&compute_glcm(&img, Offset::new(1, 0).unwrap(), true).unwrap().normalize()).unwrap();
        assert_eq!(f, GlcmFeatures { contrast: 0.0, correlation: None, energy: 1.0, homogeneity: 1.0 });
    }

    #[test]
    fn anti_diagonal_features() {
        let m = Glcm::from_probs(2, vec![0.0, 0.5, 0.5, 0.0]).unwrap();
        let f = haralick_features(&m).unwrap();
        assert!((f.contrast - 1.0).abs() < 1e-15);
        assert!((f.energy - 0.5).abs() < 1e-15);
        assert!((f.homogeneity - 0.5).abs() < 1e-15);
        assert!((f.correlation.unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal_features() {
        let m = Glcm::from_probs(2, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let f = haralick_features(&m).unwrap();
        assert_eq!(f.contrast, 0.0);
        assert_eq!(f.homogeneity, 1.0);
        assert!((f.correlation.unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_matrices() {
        let m = Glcm::from_probs(2, vec![0.5, 0.5, 0.5, 0.0]).unwrap();
        assert!(matches!(haralick_features(&m), Err(GlcmError::NotNormalized { .. })));
        let m = Glcm::from_probs(2, vec![0.5, 0.6, -0.1, 0.0]).unwrap();
        assert!(matches!(haralick_features(&m), Err(GlcmError::NotNormalized { .. })));
        let m = Glcm::from_probs(2, vec![0.2, 0.5, 0.0, 0.3]).unwrap();
        assert_eq!(haralick_features(&m), Err(GlcmError::NotSymmetric));
    }

    #[test]
    fn averaged_constant() {
        let img = GrayImage::from_fn(16, 16, 256, |_, _| 90).unwrap();
        let f = averaged_features(&img, 2, 8).unwrap();
        assert_eq!(f, GlcmFeatures { contrast: 0.0, correlation: None, energy: 1.0, homogeneity: 1.0 });
    }

    /// Contrast of one direction from a direct pair scan.
    fn directional_contrast(img: &GrayImage, dx: i32, dy: i32) -> f64 {
        let mut sum = 0.0;
        let mut n = 0.0;
        for y in 0..img.height() as i32 {
            for x in 0..img.width() as i32 {
                for (ex, ey) in [(dx, dy), (-dx, -dy)] {
                    let (x2, y2) = (x + ex, y + ey);
                    if x2 >= 0 && y2 >= 0 && x2 < img.width() as i32 && y2 < img.height() as i32 {
                        let d = f64::from(img.get(x as usize, y as usize)) - f64::from(img.get(x2 as usize, y2 as usize));
                        sum += d * d;
                        n += 1.0;
                    }
                }
            }
        }
        sum / n
    }

    #[test]
    fn averaged_vertical_stripes() {
        let img = GrayImage::from_fn(8, 8, 2, |x, _| (x % 2) as u8).unwrap();
        let dirs = [(1, 0), (1, -1), (0, -1), (-1, -1)];
        let per_dir: Vec<f64> = dirs.iter().map(|&(dx, dy)| directional_contrast(&img, dx, dy)).collect();
        assert_eq!(per_dir[0], 1.0);
        assert_eq!(per_dir[2], 0.0);
        let f = averaged_features(&img, 1, 2).unwrap();
        let expected = per_dir.iter().sum::<f64>() / 4.0;
        assert!((f.contrast - expected).abs() < 1e-12);
        assert!((f.contrast - 0.75).abs() < 1e-12);
    }

    #[test]
    fn averaged_checkerboard() {
        let img = GrayImage::from_fn(8, 8, 2, |x, y| ((x + y) % 2) as u8).unwrap();
        let per_dir: Vec<f64> =
            [(1, 0), (1, -1), (0, -1), (-1, -1)].iter().map(|&(dx, dy)| directional_contrast(&img, dx, dy)).collect();
        // horizontal/vertical neighbours always differ, diagonal ones never do
        assert_eq!(per_dir, vec![1.0, 0.0, 1.0, 0.0]);
        let f = averaged_features(&img, 1, 2).unwrap();
        assert!((f.contrast - 0.5).abs() < 1e-12);
        let f2 = averaged_features(&img, 2, 2).unwrap();
        assert_eq!(f2.contrast, 0.0);
    }

    fn arb_small() -> impl Strategy<Value = GrayImage> {
        (1usize..=8, 1usize..=8, 2u16..=4).prop_flat_map(|(w, h, l)| {
            proptest::collection::vec(0..l, w * h)
                .prop_map(move |px| GrayImage::new(w, h, l, px.into_iter().map(|p| p as u8).collect()).unwrap())
        })
    }

    fn arb_offset() -> impl Strategy<Value = Offset> {
        (-3i32..=3, -3i32..=3).prop_filter_map("non-zero", |(dx, dy)| Offset::new(dx, dy).ok())
    }

    proptest! {
        #[test]
        fn counts_match_naive(img in arb_small(), off in arb_offset(), symmetric: bool) {
            match compute_glcm(&img, off, symmetric) {
                Ok(g) => {
                    let naive = naive_counts(&img, off, symmetric);
                    prop_assert_eq!(&g.counts, &naive);
                    let m = g.normalize();
                    prop_assert!((m.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9 || g.total() == 0);
                }
                Err(e) => prop_assert!(matches!(e, GlcmError::NoValidPairs { .. }), "unexpected error {:?}", e),
            }
        }

        #[test]
        fn symmetric_is_sum_of_both_offsets(img in arb_small(), off in arb_offset()) {
            prop_assume!(compute_glcm(&img, off, false).is_ok());
            let a = compute_glcm(&img, off, false).unwrap();
            let b = compute_glcm(&img, off.reversed(), false).unwrap();
            let s = compute_glcm(&img, off, true).unwrap();
            let summed: Vec<u64> = a.counts.iter().zip(&b.counts).map(|(x, y)| x + y).collect();
            prop_assert_eq!(&s.counts, &summed);
        }

        #[test]
        fn feature_ranges_and_invariances(img in arb_small(), off in arb_offset()) {
            let Ok(g) = compute_glcm(&img, off, true) else { return Ok(()); };
            prop_assume!(g.total() > 0);
            let m = g.normalize();
            let f = haralick_features(&m).unwrap();
            let l = m.levels() as f64;
            prop_assert!(f.energy > 0.0 && f.energy <= 1.0 + 1e-12);
            prop_assert!(f.homogeneity > 0.0 && f.homogeneity <= 1.0 + 1e-12);
            prop_assert!(f.contrast >= 0.0 && f.contrast <= (l - 1.0).powi(2) + 1e-12);
            if let Some(c) = f.correlation {
                prop_assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&c));
            }
            prop_assert_eq!(haralick_features(&m.transpose()).unwrap(), f);

            let levels = img.levels();
            let flipped = GrayImage::from_fn(img.width(), img.height(), levels, |x, y| (levels - 1) as u8 - img.get(x, y)).unwrap();
            let ff = haralick_features(&compute_glcm(&flipped, off, true).unwrap().normalize()).unwrap();
            prop_assert!((ff.contrast - f.contrast).abs() < 1e-12);
            prop_assert!((ff.energy - f.energy).abs() < 1e-12);
            prop_assert!((ff.homogeneity - f.homogeneity).abs() < 1e-12);
        }
    }
}
