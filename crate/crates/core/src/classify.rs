//! Feature fusion, z-score normalization, the linear SVM and decision voting.

use crate::fractal::{spectrum_summary, FractalEstimate, MultifractalSpectrum};
use crate::glcm::GlcmFeatures;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

pub const FEATURE_ARITY: usize = 8;

pub const FEATURE_NAMES: [&str; FEATURE_ARITY] = [
    "fractal_dim",
    "alpha_peak",
    "f_max",
    "spectrum_width",
    "contrast",
    "correlation",
    "energy",
    "homogeneity",
];

const CORRELATION_SLOT: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("training data must contain both classes")]
    DegenerateLabels,
    #[error("regularization constant must be a positive finite number, got {0}")]
    InvalidC(f64),
    #[error("model has {weights} weights but its mask selects {mask} features")]
    ShapeError { weights: usize, mask: usize },
    #[error("cannot fuse an empty decision list")]
    NoVoters,
    #[error("feature values must be finite")]
    NonFinite,
    #[error("model file line {line}: {reason}")]
    ModelFormat { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    /// +1
    Normal,
    /// -1
    Abnormal,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Normal => 1.0,
            Label::Abnormal => -1.0,
        }
    }

    pub fn from_score(score: f64) -> Self {
        if score >= 0.0 {
            Label::Normal
        } else {
            Label::Abnormal
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Normal => Label::Abnormal,
            Label::Abnormal => Label::Normal,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Normal => "1",
            Label::Abnormal => "-1",
        })
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "1" | "+1" => Ok(Label::Normal),
            "-1" => Ok(Label::Abnormal),
            other => Err(format!("label must be 1 or -1, got {other:?}")),
        }
    }
}

/// Fixed-order fused descriptor. The correlation slot holds 0.0 when the
/// GLCM correlation was undefined; `correlation_defined` remembers which.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    values: [f64; FEATURE_ARITY],
    correlation_defined: bool,
}

impl FeatureVector {
    pub fn new(values: [f64; FEATURE_ARITY], correlation_defined: bool) -> Result<Self, ClassifyError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ClassifyError::NonFinite);
        }
        let mut values = values;
        if !correlation_defined {
            values[CORRELATION_SLOT] = 0.0;
        }
        Ok(Self { values, correlation_defined })
    }

    pub fn values(&self) -> &[f64; FEATURE_ARITY] {
        &self.values
    }

    pub fn correlation_defined(&self) -> bool {
        self.correlation_defined
    }

    /// The correlation slot as an optional value.
    pub fn correlation(&self) -> Option<f64> {
        self.correlation_defined.then_some(self.values[CORRELATION_SLOT])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureMask {
    Fractal,
    Glcm,
    Combined,
}

impl FeatureMask {
    pub fn indices(self) -> &'static [usize] {
        match self {
            FeatureMask::Fractal => &[0, 1, 2, 3],
            FeatureMask::Glcm => &[4, 5, 6, 7],
            FeatureMask::Combined => &[0, 1, 2, 3, 4, 5, 6, 7],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureMask::Fractal => "fractal",
            FeatureMask::Glcm => "glcm",
            FeatureMask::Combined => "combined",
        }
    }
}

impl fmt::Display for FeatureMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureMask {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fractal" => Ok(FeatureMask::Fractal),
            "glcm" => Ok(FeatureMask::Glcm),
            "combined" => Ok(FeatureMask::Combined),
            other => Err(format!("unknown feature mask {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledSample {
    pub features: FeatureVector,
    pub label: Label,
}

pub fn fuse_features(
    fractal: &FractalEstimate,
    spectrum: &MultifractalSpectrum,
    glcm: &GlcmFeatures,
) -> Result<FeatureVector, ClassifyError> {
    let s = spectrum_summary(spectrum);
    FeatureVector::new(
        [
            fractal.dimension,
            s.alpha_peak,
            s.f_max,
            s.width,
            glcm.contrast,
            glcm.correlation.unwrap_or(0.0),
            glcm.energy,
            glcm.homogeneity,
        ],
        glcm.correlation.is_some(),
    )
}

/// Per-dimension z-score statistics (population standard deviation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalizer {
    mean: [f64; FEATURE_ARITY],
    stddev: [f64; FEATURE_ARITY],
}

impl Normalizer {
    pub fn from_parts(mean: [f64; FEATURE_ARITY], stddev: [f64; FEATURE_ARITY]) -> Result<Self, ClassifyError> {
        if mean.iter().chain(&stddev).any(|v| !v.is_finite()) || stddev.iter().any(|&s| s <= 0.0) {
            return Err(ClassifyError::NonFinite);
        }
        Ok(Self { mean, stddev })
    }

    pub fn mean(&self) -> &[f64; FEATURE_ARITY] {
        &self.mean
    }

    pub fn stddev(&self) -> &[f64; FEATURE_ARITY] {
        &self.stddev
    }

    /// Undefined correlations land on 0, the normalized mean.
    pub fn apply(&self, x: &FeatureVector) -> [f64; FEATURE_ARITY] {
        let mut out = [0.0; FEATURE_ARITY];
        for k in 0..FEATURE_ARITY {
            out[k] = (x.values[k] - self.mean[k]) / self.stddev[k];
        }
        if !x.correlation_defined {
            out[CORRELATION_SLOT] = 0.0;
        }
        out
    }
}

/// Fits z-score statistics. Undefined correlations are left out of their
/// slot's statistics; a constant slot gets stddev 1.
pub fn fit_normalizer(samples: &[LabeledSample]) -> Result<Normalizer, ClassifyError> {
    if samples.len() < 2 {
        return Err(ClassifyError::TooFewSamples { needed: 2, got: samples.len() });
    }
    let mut mean = [0.0; FEATURE_ARITY];
    let mut stddev = [1.0; FEATURE_ARITY];
    for k in 0..FEATURE_ARITY {
        let column: Vec<f64> = samples
            .iter()
            .filter(|s| k != CORRELATION_SLOT || s.features.correlation_defined)
            .map(|s| s.features.values[k])
            .collect();
        if column.is_empty() {
            continue;
        }
        let n = column.len() as f64;
        let m = column.iter().sum::<f64>() / n;
        let var = column.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        mean[k] = m;
        stddev[k] = if sd > 1e-12 * m.abs().max(1.0) { sd } else { 1.0 };
    }
    Ok(Normalizer { mean, stddev })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    mask: FeatureMask,
    weights: Vec<f64>,
    bias: f64,
    c_param: f64,
    normalizer: Normalizer,
}

impl SvmModel {
    pub fn new(
        mask: FeatureMask,
        weights: Vec<f64>,
        bias: f64,
        c_param: f64,
        normalizer: Normalizer,
    ) -> Result<Self, ClassifyError> {
        if weights.len() != mask.indices().len() {
            return Err(ClassifyError::ShapeError { weights: weights.len(), mask: mask.indices().len() });
        }
        if !(c_param > 0.0 && c_param.is_finite()) {
            return Err(ClassifyError::InvalidC(c_param));
        }
        Ok(Self { mask, weights, bias, c_param, normalizer })
    }

    pub fn mask(&self) -> FeatureMask {
        self.mask
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn c_param(&self) -> f64 {
        self.c_param
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    /// `w . x + b` on normalized, masked features.
    pub fn decision(&self, x: &FeatureVector) -> f64 {
        let z = self.normalizer.apply(x);
        self.bias + self.mask.indices().iter().zip(&self.weights).map(|(&k, w)| w * z[k]).sum::<f64>()
    }

    /// Plain-text model file, six lines; floats use 17 significant digits.
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| fmt_exact(*x)).collect::<Vec<_>>().join(",");
        format!(
            "texfrac-svm v1\n{}\n{}\n{}\n{}\n{},{}\n",
            self.mask,
            join(&self.normalizer.mean),
            join(&self.normalizer.stddev),
            join(&self.weights),
            fmt_exact(self.bias),
            fmt_exact(self.c_param),
        )
    }

    pub fn from_text(text: &str) -> Result<Self, ClassifyError> {
        let err = |line: usize, reason: &str| ClassifyError::ModelFormat { line, reason: reason.to_string() };
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() != 6 {
            return Err(err(lines.len().min(6) + 1, "expected exactly six lines"));
        }
        if lines[0] != "texfrac-svm v1" {
            return Err(err(1, "missing texfrac-svm v1 header"));
        }
        let mask: FeatureMask = lines[1].parse().map_err(|e: String| err(2, &e))?;
        let parse_list = |line: usize| -> Result<Vec<f64>, ClassifyError> {
            lines[line - 1]
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| err(line, "invalid number")))
                .collect()
        };
        let to_array = |v: Vec<f64>, line: usize| -> Result<[f64; FEATURE_ARITY], ClassifyError> {
            v.try_into().map_err(|_| err(line, "expected eight values"))
        };
        let mean = to_array(parse_list(3)?, 3)?;
        let stddev = to_array(parse_list(4)?, 4)?;
        let weights = parse_list(5)?;
        let tail = parse_list(6)?;
        let [bias, c_param] = tail[..] else {
            return Err(err(6, "expected bias,C"));
        };
        let normalizer = Normalizer::from_parts(mean, stddev).map_err(|_| err(3, "invalid normalizer"))?;
        Self::new(mask, weights, bias, c_param, normalizer)
    }
}

fn fmt_exact(x: f64) -> String {
    format!("{x:.16e}")
}

/// Labels a sample; a score of exactly zero goes to `Normal`.
pub fn predict(model: &SvmModel, x: &FeatureVector) -> Result<(Label, f64), ClassifyError> {
    if model.weights.len() != model.mask.indices().len() {
        return Err(ClassifyError::ShapeError { weights: model.weights.len(), mask: model.mask.indices().len() });
    }
    let score = model.decision(x);
    Ok((Label::from_score(score), score))
}

/// Deterministic primal subgradient trainer for the soft-margin objective
/// `0.5 |w|^2 + C sum_i max(0, 1 - y_i (w . x_i + b))`.
///
/// Each iteration takes a full-batch subgradient step of size `1/(lambda t)`
/// on the equivalent `lambda = 1/(C n)` scaled objective, starting from zero.
/// The returned model is the iterate with the lowest objective seen.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmTrainer {
    pub c_param: f64,
    pub iterations: usize,
    /// Iterations between objective checkpoints in the trace.
    pub trace_every: usize,
}

impl Default for SvmTrainer {
    fn default() -> Self {
        Self { c_param: 1.0, iterations: 100_000, trace_every: 1000 }
    }
}

/// Objective values recorded while training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    /// `(iteration, objective)` of the current iterate, first entry at iteration 1.
    pub checkpoints: Vec<(usize, f64)>,
    pub best_objective: f64,
}

pub fn primal_objective(rows: &[Vec<f64>], labels: &[f64], weights: &[f64], bias: f64, c_param: f64) -> f64 {
    let reg = 0.5 * weights.iter().map(|w| w * w).sum::<f64>();
    let hinge: f64 = rows
        .iter()
        .zip(labels)
        .map(|(x, &y)| (1.0 - y * (dot(weights, x) + bias)).max(0.0))
        .sum();
    reg + c_param * hinge
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl SvmTrainer {
    pub fn new(c_param: f64) -> Self {
        Self { c_param, ..Self::default() }
    }

    pub fn fit(&self, samples: &[LabeledSample], mask: FeatureMask) -> Result<SvmModel, ClassifyError> {
        self.fit_with_trace(samples, mask).map(|(m, _)| m)
    }

    pub fn fit_with_trace(
        &self,
        samples: &[LabeledSample],
        mask: FeatureMask,
    ) -> Result<(SvmModel, TrainTrace), ClassifyError> {
        if !(self.c_param > 0.0 && self.c_param.is_finite()) {
            return Err(ClassifyError::InvalidC(self.c_param));
        }
        let has_pos = samples.iter().any(|s| s.label == Label::Normal);
        let has_neg = samples.iter().any(|s| s.label == Label::Abnormal);
        if !(has_pos && has_neg) {
            return Err(ClassifyError::DegenerateLabels);
        }
        let normalizer = fit_normalizer(samples)?;
        let rows: Vec<Vec<f64>> = samples
            .iter()
            .map(|s| {
                let z = normalizer.apply(&s.features);
                mask.indices().iter().map(|&k| z[k]).collect()
            })
            .collect();
        let labels: Vec<f64> = samples.iter().map(|s| s.label.sign()).collect();
        let (weights, bias, trace) = self.solve(&rows, &labels);
        let model = SvmModel::new(mask, weights, bias, self.c_param, normalizer)?;
        Ok((model, trace))
    }

    fn solve(&self, rows: &[Vec<f64>], labels: &[f64]) -> (Vec<f64>, f64, TrainTrace) {
        let n = rows.len() as f64;
        let dim = rows[0].len();
        let lambda = 1.0 / (self.c_param * n);
        let mut w = vec![0.0; dim];
        let mut b = 0.0;
        let mut grad = vec![0.0; dim];
        let mut best = (w.clone(), b, primal_objective(rows, labels, &w, b, self.c_param));
        let mut checkpoints = Vec::new();
        let trace_every = self.trace_every.max(1);

        for t in 1..=self.iterations {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut grad_b = 0.0;
            for (x, &y) in rows.iter().zip(labels) {
                if y * (dot(&w, x) + b) < 1.0 {
                    for (g, xi) in grad.iter_mut().zip(x) {
                        *g += y * xi;
                    }
                    grad_b += y;
                }
            }
            let eta = 1.0 / (lambda * t as f64);
            let shrink = 1.0 - 1.0 / t as f64;
            for (wk, g) in w.iter_mut().zip(&grad) {
                *wk = shrink * *wk + eta * g / n;
            }
            b += eta * grad_b / n;

            let objective = primal_objective(rows, labels, &w, b, self.c_param);
            if objective < best.2 {
                best = (w.clone(), b, objective);
            }
            if t == 1 || t % trace_every == 0 || t == self.iterations {
                checkpoints.push((t, objective));
            }
        }
        let (w, b, best_objective) = best;
        (w, b, TrainTrace { checkpoints, best_objective })
    }
}

/// Trains with the default schedule at regularization `c_param`.
pub fn fit_linear_svm(samples: &[LabeledSample], c_param: f64, mask: FeatureMask) -> Result<SvmModel, ClassifyError> {
    SvmTrainer::new(c_param).fit(samples, mask)
}

/// Majority vote. A split vote follows the sign of the label-signed score
/// sum, with a zero sum going to `Normal`. Confidence is `|sum| / count`.
pub fn vote_fusion(decisions: &[(Label, f64)]) -> Result<(Label, f64), ClassifyError> {
    if decisions.is_empty() {
        return Err(ClassifyError::NoVoters);
    }
    let votes: i64 = decisions.iter().map(|(l, _)| l.sign() as i64).sum();
    let score_sum: f64 = decisions.iter().map(|(l, s)| l.sign() * s.abs()).sum();
    let label = match votes.cmp(&0) {
        std::cmp::Ordering::Greater => Label::Normal,
        std::cmp::Ordering::Less => Label::Abnormal,
        std::cmp::Ordering::Equal => Label::from_score(score_sum),
    };
    Ok((label, score_sum.abs() / decisions.len() as f64))
}
