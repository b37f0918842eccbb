//! Per-image feature extraction: ROI thresholding, box counting on the
//! binarized ROI, Hölder image and spectrum, then the averaged GLCM features.

use crate::classify::{fuse_features, ClassifyError, FeatureMask, FeatureVector};
use crate::fractal::{
    box_counting_dimension, default_box_sizes, holder_image, multifractal_spectrum, FractalError, FractalEstimate,
    MultifractalSpectrum,
};
use crate::glcm::{averaged_features, GlcmError, GlcmFeatures};
use crate::image::{threshold_binarize, GrayImage, ImageError, Threshold};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("thresholding failed")]
    Image(#[from] ImageError),
    #[error("fractal features failed")]
    Fractal(#[from] FractalError),
    #[error("GLCM features failed")]
    Glcm(#[from] GlcmError),
    #[error("feature fusion failed")]
    Fusion(#[from] ClassifyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FusionMode {
    /// One SVM on the concatenated vector.
    #[default]
    Early,
    /// One SVM per feature family, combined by vote.
    Vote,
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FusionMode::Early => "early",
            FusionMode::Vote => "vote",
        })
    }
}

impl FromStr for FusionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "early" => Ok(FusionMode::Early),
            "vote" => Ok(FusionMode::Vote),
            other => Err(format!("unknown fusion mode {other:?}")),
        }
    }
}

/// Every tunable of the pipeline in one place.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub glcm_distance: u32,
    pub glcm_levels: u16,
    /// `None` selects powers of two up to half the shorter image side.
    pub box_sizes: Option<Vec<usize>>,
    pub holder_windows: Vec<usize>,
    pub spectrum_bins: usize,
    pub svm_c: f64,
    pub svm_iterations: usize,
    pub fusion_mode: FusionMode,
    pub feature_mask: FeatureMask,
    pub seed: u64,
    pub split_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            glcm_distance: 2,
            glcm_levels: 8,
            box_sizes: None,
            holder_windows: vec![3, 5, 7, 9],
            spectrum_bins: 10,
            svm_c: 1.0,
            svm_iterations: 100_000,
            fusion_mode: FusionMode::Early,
            feature_mask: FeatureMask::Combined,
            seed: 0,
            split_fraction: 0.5,
        }
    }
}

impl RunConfig {
    /// `key=value` lines used as provenance comments in output files.
    pub fn provenance(&self) -> Vec<String> {
        let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        vec![
            format!("glcm_distance={}", self.glcm_distance),
            format!("glcm_levels={}", self.glcm_levels),
            format!("box_sizes={}", self.box_sizes.as_deref().map_or_else(|| "auto".to_string(), list)),
            format!("holder_windows={}", list(&self.holder_windows)),
            format!("spectrum_bins={}", self.spectrum_bins),
            format!("svm_c={}", self.svm_c),
            format!("svm_iterations={}", self.svm_iterations),
            format!("fusion_mode={}", self.fusion_mode),
            format!("feature_mask={}", self.feature_mask),
            format!("seed={}", self.seed),
            format!("split_fraction={}", self.split_fraction),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageFeatures {
    pub vector: FeatureVector,
    pub box_dimension: FractalEstimate,
    pub spectrum: MultifractalSpectrum,
    pub glcm: GlcmFeatures,
}

pub fn extract_features(img: &GrayImage, config: &RunConfig) -> Result<ImageFeatures, ExtractError> {
    let sizes = config.box_sizes.clone().unwrap_or_else(|| default_box_sizes(img.width(), img.height()));
    let roi = threshold_binarize(img, Threshold::Auto)?;
    let box_dimension = box_counting_dimension(&roi, &sizes)?;
    let holder = holder_image(img, &config.holder_windows)?;
    let spectrum = multifractal_spectrum(&holder, config.spectrum_bins, &sizes)?;
    let glcm = averaged_features(img, config.glcm_distance, config.glcm_levels)?;
    let vector = fuse_features(&box_dimension, &spectrum, &glcm)?;
    Ok(ImageFeatures { vector, box_dimension, spectrum, glcm })
}
