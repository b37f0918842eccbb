//! Deterministic texture generators with known geometry, and two-class
//! synthetic datasets built from them.

use crate::classify::Label;
use crate::evaluate::SplitMix64;
use crate::image::{GrayImage, ImageError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid texture spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TextureKind {
    /// `3^depth` surviving cells of side `size / 2^depth`.
    Sierpinski { depth: u32 },
    /// Foreground rectangle anchored at the origin.
    FilledRect { width: usize, height: usize },
    /// Single foreground row.
    HLine { row: usize },
    /// Alternating `cell x cell` squares, foreground at the origin cell's neighbours.
    Checkerboard { cell: usize },
    /// Vertical stripes: columns with `x % period >= period / 2` are foreground.
    Stripes { period: usize },
    /// Midpoint-displacement surface with Hurst-like roughness `h`, plus an
    /// optional vertical stripe overlay of relative strength `stripe_gain`.
    RoughField { roughness: f64, stripe_gain: f64, stripe_period: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TextureSpec {
    pub kind: TextureKind,
    pub size: usize,
    pub levels: u16,
}

impl TextureSpec {
    pub fn new(kind: TextureKind, size: usize) -> Self {
        Self { kind, size, levels: 256 }
    }

    pub fn with_levels(mut self, levels: u16) -> Self {
        self.levels = levels;
        self
    }

    /// Same spec with its random seed replaced (no-op for deterministic kinds).
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let TextureKind::RoughField { seed: s, .. } = &mut self.kind {
            *s = seed;
        }
        self
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            TextureKind::Sierpinski { .. } => "sierpinski",
            TextureKind::FilledRect { .. } => "filled_rect",
            TextureKind::HLine { .. } => "hline",
            TextureKind::Checkerboard { .. } => "checkerboard",
            TextureKind::Stripes { .. } => "stripes",
            TextureKind::RoughField { .. } => "rough_field",
        }
    }

    /// Parameters as `key=value` pairs separated by `;`.
    pub fn params(&self) -> String {
        let body = match self.kind {
            TextureKind::Sierpinski { depth } => format!("depth={depth}"),
            TextureKind::FilledRect { width, height } => format!("width={width};height={height}"),
            TextureKind::HLine { row } => format!("row={row}"),
            TextureKind::Checkerboard { cell } => format!("cell={cell}"),
            TextureKind::Stripes { period } => format!("period={period}"),
            TextureKind::RoughField { roughness, stripe_gain, stripe_period, seed } => {
                format!("h={roughness};stripe_gain={stripe_gain};stripe_period={stripe_period};seed={seed}")
            }
        };
        format!("size={};levels={};{body}", self.size, self.levels)
    }

    fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if !(2..=256).contains(&self.levels) {
            return bad(format!("levels {} outside [2, 256]", self.levels));
        }
        if self.size < 2 {
            return bad(format!("size {} below 2", self.size));
        }
        match self.kind {
            TextureKind::Sierpinski { depth } => {
                if !self.size.is_power_of_two() || depth > self.size.trailing_zeros() {
                    return bad(format!("sierpinski needs a power-of-two size of at least 2^{depth}"));
                }
            }
            TextureKind::FilledRect { width, height } => {
                if width == 0 || height == 0 || width > self.size || height > self.size {
                    return bad(format!("rectangle {width}x{height} does not fit in {}", self.size));
                }
            }
            TextureKind::HLine { row } => {
                if row >= self.size {
                    return bad(format!("row {row} outside image of size {}", self.size));
                }
            }
            TextureKind::Checkerboard { cell } => {
                if cell == 0 {
                    return bad("checkerboard cell must be positive".into());
                }
            }
            TextureKind::Stripes { period } => {
                if period < 2 {
                    return bad("stripe period must be at least 2".into());
                }
            }
            TextureKind::RoughField { roughness, stripe_gain, stripe_period, .. } => {
                if self.size < 8 || !self.size.is_power_of_two() {
                    return bad("rough_field needs a power-of-two size of at least 8".into());
                }
                if !(roughness > 0.0 && roughness < 1.0) {
                    return bad(format!("roughness {roughness} outside (0, 1)"));
                }
                if !(stripe_gain >= 0.0 && stripe_gain.is_finite()) {
                    return bad(format!("stripe gain {stripe_gain} must be finite and non-negative"));
                }
                if stripe_period < 2 {
                    return bad("stripe period must be at least 2".into());
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for TextureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.kind_name(), self.params())
    }
}

pub fn generate(spec: &TextureSpec) -> Result<GrayImage, SynthError> {
    spec.validate()?;
    let n = spec.size;
    let fg = (spec.levels - 1) as u8;
    let img = match spec.kind {
        TextureKind::Sierpinski { depth } => {
            let shift = n.trailing_zeros() - depth;
            GrayImage::from_fn(n, n, spec.levels, |x, y| if (x >> shift) & (y >> shift) == 0 { fg } else { 0 })?
        }
        TextureKind::FilledRect { width, height } => {
            GrayImage::from_fn(n, n, spec.levels, |x, y| if x < width && y < height { fg } else { 0 })?
        }
        TextureKind::HLine { row } => GrayImage::from_fn(n, n, spec.levels, |_, y| if y == row { fg } else { 0 })?,
        TextureKind::Checkerboard { cell } => {
            GrayImage::from_fn(n, n, spec.levels, |x, y| if (x / cell + y / cell) % 2 == 1 { fg } else { 0 })?
        }
        TextureKind::Stripes { period } => {
            GrayImage::from_fn(n, n, spec.levels, |x, _| if x % period >= period / 2 { fg } else { 0 })?
        }
        TextureKind::RoughField { roughness, stripe_gain, stripe_period, seed } => {
            let mut field = midpoint_displacement(n, roughness, seed);
            let mean = field.iter().sum::<f64>() / field.len() as f64;
            let sd = (field.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / field.len() as f64).sqrt();
            for (i, v) in field.iter_mut().enumerate() {
                let x = i % n;
                let wave = if x % stripe_period >= stripe_period / 2 { 1.0 } else { -1.0 };
                *v += stripe_gain * sd * wave;
            }
            to_levels(&field, n, spec.levels)?
        }
    };
    Ok(img)
}

/// Diamond-square on an `(n+1)^2` lattice with zero corners; the displacement
/// amplitude shrinks by `2^-h` per octave. Returns the top-left `n x n` block.
fn midpoint_displacement(n: usize, h: f64, seed: u64) -> Vec<f64> {
    let m = n + 1;
    let mut g = vec![0.0f64; m * m];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let decay = 2f64.powf(-h);
    let mut amplitude = 1.0;
    let mut step = n;
    while step > 1 {
        let half = step / 2;
        // diamond: centres of squares
        for y in (half..n).step_by(step) {
            for x in (half..n).step_by(step) {
                let avg = (g[(y - half) * m + x - half]
                    + g[(y - half) * m + x + half]
                    + g[(y + half) * m + x - half]
                    + g[(y + half) * m + x + half])
                    / 4.0;
                g[y * m + x] = avg + amplitude * rng.gen_range(-1.0..1.0);
            }
        }
        // square: edge midpoints
        for y in (0..m).step_by(half) {
            let x_start = if (y / half) % 2 == 0 { half } else { 0 };
            for x in (x_start..m).step_by(step) {
                let mut sum = 0.0;
                let mut count = 0.0;
                if y >= half {
                    sum += g[(y - half) * m + x];
                    count += 1.0;
                }
                if y + half < m {
                    sum += g[(y + half) * m + x];
                    count += 1.0;
                }
                if x >= half {
                    sum += g[y * m + x - half];
                    count += 1.0;
                }
                if x + half < m {
                    sum += g[y * m + x + half];
                    count += 1.0;
                }
                g[y * m + x] = sum / count + amplitude * rng.gen_range(-1.0..1.0);
            }
        }
        amplitude *= decay;
        step = half;
    }
    (0..n * n).map(|i| g[(i / n) * m + i % n]).collect()
}

/// Affine map of `[min, max]` onto `[0, levels-1]`, rounded.
fn to_levels(field: &[f64], n: usize, levels: u16) -> Result<GrayImage, ImageError> {
    let lo = field.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = field.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let top = f64::from(levels - 1);
    let scale = if hi > lo { top / (hi - lo) } else { 0.0 };
    let pixels = field.iter().map(|v| ((v - lo) * scale).round().clamp(0.0, top) as u8).collect();
    GrayImage::new(n, n, levels, pixels)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub image: GrayImage,
    pub label: Label,
    pub spec: TextureSpec,
}

/// `n_per_class` images from each template, class A labelled `Normal` and
/// class B `Abnormal`. Image seeds come from one SplitMix64 stream seeded by
/// `seed`, drawn in output order.
pub fn make_dataset(
    class_a: &TextureSpec,
    class_b: &TextureSpec,
    n_per_class: usize,
    seed: u64,
) -> Result<Vec<SyntheticSample>, SynthError> {
    if n_per_class < 2 {
        return Err(SynthError::InvalidSpec(format!("need at least 2 images per class, got {n_per_class}")));
    }
    let mut rng = SplitMix64::new(seed);
    let mut out = Vec::with_capacity(2 * n_per_class);
    for (template, label) in [(class_a, Label::Normal), (class_b, Label::Abnormal)] {
        for _ in 0..n_per_class {
            let spec = template.with_seed(rng.next_u64());
            out.push(SyntheticSample { image: generate(&spec)?, label, spec });
        }
    }
    Ok(out)
}

/// Default seed for the preset datasets.
pub const FUSION_SEED: u64 = 7;

fn rough_template(size: usize, roughness: f64, stripe_gain: f64) -> TextureSpec {
    TextureSpec::new(TextureKind::RoughField { roughness, stripe_gain, stripe_period: 4, seed: 0 }, size)
}

/// Two rough-field classes separated by a small roughness shift and a small
/// stripe-contrast shift, so neither feature family alone separates them
/// cleanly.
pub fn fusion_templates(size: usize) -> (TextureSpec, TextureSpec) {
    (rough_template(size, FUSION_A.0, FUSION_A.1), rough_template(size, FUSION_B.0, FUSION_B.1))
}

const FUSION_A: (f64, f64) = (0.3, 0.0);
const FUSION_B: (f64, f64) = (0.8, 0.6);

/// Two rough-field classes far apart in both roughness and stripe contrast.
pub fn separable_templates(size: usize) -> (TextureSpec, TextureSpec) {
    (rough_template(size, 0.2, 0.0), rough_template(size, 0.8, 1.5))
}
