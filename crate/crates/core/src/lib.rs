//! Texture classification from fractal and gray-level co-occurrence features.
//!
//! The pipeline thresholds a region of interest, measures its box-counting
//! dimension, builds a Hölder exponent image and its multifractal spectrum,
//! computes four GLCM statistics averaged over four directions, and feeds the
//! fused descriptor to a linear SVM. [`evaluate`] reports the confusion
//! matrix with sensitivity, specificity and correct classification rate.

pub mod classify;
pub mod cli;
pub mod evaluate;
pub mod fractal;
pub mod glcm;
pub mod image;
pub mod pgm;
pub mod pipeline;
pub mod regression;
pub mod synth;

pub use classify::{FeatureMask, FeatureVector, Label, LabeledSample, SvmModel};
pub use evaluate::{ConfusionMatrix, Metrics};
pub use fractal::{FractalEstimate, HolderImage, MultifractalSpectrum};
pub use glcm::{GlcmFeatures, Offset};
pub use image::{BinaryImage, GrayImage, Rect};
pub use pipeline::RunConfig;
