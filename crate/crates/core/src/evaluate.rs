//! Confusion matrices, sensitivity / specificity / CCR and stratified splits.

use crate::classify::{Label, LabeledSample};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvaluateError {
    #[error("{truth} true labels but {predicted} predictions")]
    ShapeError { truth: usize, predicted: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("class {label} has {count} samples, at least 2 are needed to split")]
    TooFewSamples { label: Label, count: usize },
}

/// 2x2 table with `Normal` as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fn_: u64, fp: u64, tn: u64) -> Self {
        Self { tp, fn_, fp, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.fp + self.tn
    }

    /// The same outcomes with the class roles exchanged.
    pub fn swapped(&self) -> Self {
        Self { tp: self.tn, fn_: self.fp, fp: self.fn_, tn: self.tp }
    }

    /// Rows are the true class (Normal, Abnormal), columns the predicted class,
    /// each cell a percentage of its row.
    pub fn row_percentages(&self) -> [[Option<f64>; 2]; 2] {
        let row = |a: u64, b: u64| {
            let n = a + b;
            if n == 0 {
                [None, None]
            } else {
                [Some(100.0 * a as f64 / n as f64), Some(100.0 * b as f64 / n as f64)]
            }
        };
        [row(self.tp, self.fn_), row(self.fp, self.tn)]
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = |v: Option<f64>| v.map_or_else(|| "   -  ".to_string(), |p| format!("{p:6.2}"));
        let rows = self.row_percentages();
        writeln!(f, "                 predicted 1      predicted 0")?;
        writeln!(f, "true 1 (Normal)  TP {:>4} {}%  FN {:>4} {}%", self.tp, pct(rows[0][0]), self.fn_, pct(rows[0][1]))?;
        write!(f, "true 0 (Abnorm.) FP {:>4} {}%  TN {:>4} {}%", self.fp, pct(rows[1][0]), self.tn, pct(rows[1][1]))
    }
}

pub fn confusion(truth: &[Label], predicted: &[Label]) -> Result<ConfusionMatrix, EvaluateError> {
    if truth.len() != predicted.len() {
        return Err(EvaluateError::ShapeError { truth: truth.len(), predicted: predicted.len() });
    }
    let mut cm = ConfusionMatrix::default();
    for (t, p) in truth.iter().zip(predicted) {
        match (t, p) {
            (Label::Normal, Label::Normal) => cm.tp += 1,
            (Label::Normal, Label::Abnormal) => cm.fn_ += 1,
            (Label::Abnormal, Label::Normal) => cm.fp += 1,
            (Label::Abnormal, Label::Abnormal) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// Percentages; `None` where the denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub ccr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpecificityFormula {
    /// `TN / (TN + FP)`
    #[default]
    Standard,
    /// `TN / (TN + FN)`, kept for side-by-side comparison with reports that use it.
    TnOverTnPlusFn,
}

fn percent(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| (100 * num) as f64 / den as f64)
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics, EvaluateError> {
    metrics_with(cm, SpecificityFormula::Standard)
}

pub fn metrics_with(cm: &ConfusionMatrix, formula: SpecificityFormula) -> Result<Metrics, EvaluateError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvaluateError::EmptyMatrix);
    }
    let specificity = match formula {
        SpecificityFormula::Standard => percent(cm.tn, cm.tn + cm.fp),
        SpecificityFormula::TnOverTnPlusFn => percent(cm.tn, cm.tn + cm.fn_),
    };
    Ok(Metrics {
        sensitivity: percent(cm.tp, cm.tp + cm.fn_),
        specificity,
        ccr: percent(cm.tp + cm.tn, total).expect("total is positive"),
    })
}

/// SplitMix64 generator. Split shuffles are defined in terms of it so they
/// can be reproduced from a seed alone.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Fisher-Yates from the back: position `i` swaps with `next_u64() % (i + 1)`.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = (self.next_u64() % (i as u64 + 1)) as usize;
            items.swap(i, j);
        }
    }
}

/// Stratified split into `(train, test)` index lists.
///
/// Indices of each class (Normal first) are shuffled with one SplitMix64
/// stream seeded by `seed`; the first `round(fraction * n)` go to training,
/// clamped so both sides keep at least one sample.
pub fn split_indices(labels: &[Label], train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), EvaluateError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(EvaluateError::InvalidFraction(train_fraction));
    }
    let mut rng = SplitMix64::new(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [Label::Normal, Label::Abnormal] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let n = members.len();
        if n < 2 {
            return Err(EvaluateError::TooFewSamples { label: class, count: n });
        }
        rng.shuffle(&mut members);
        let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    Ok((train, test))
}

pub fn split(
    samples: &[LabeledSample],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>), EvaluateError> {
    let labels: Vec<Label> = samples.iter().map(|s| s.label).collect();
    let (train, test) = split_indices(&labels, train_fraction, seed)?;
    Ok((train.iter().map(|&i| samples[i]).collect(), test.iter().map(|&i| samples[i]).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Label::{Abnormal as N, Normal as P};

    #[test]
    fn confusion_examples() {
        assert_eq!(confusion(&[P, P, N, N], &[P, N, P, N]).unwrap(), ConfusionMatrix::new(1, 1, 1, 1));
        let truth: Vec<Label> = [P; 10].into_iter().chain([N; 10]).collect();
        assert_eq!(confusion(&truth, &truth).unwrap(), ConfusionMatrix::new(10, 0, 0, 10));
        let truth: Vec<Label> = [P; 3].into_iter().chain([N; 5]).collect();
        assert_eq!(confusion(&truth, &[P; 8]).unwrap(), ConfusionMatrix::new(3, 0, 5, 0));
        assert_eq!(confusion(&[P], &[P, N]), Err(EvaluateError::ShapeError { truth: 1, predicted: 2 }));
    }

    #[test]
    fn metrics_examples() {
        let m = metrics(&ConfusionMatrix::new(10, 0, 0, 10)).unwrap();
        assert_eq!(m, Metrics { sensitivity: Some(100.0), specificity: Some(100.0), ccr: 100.0 });
        let m = metrics(&ConfusionMatrix::new(1, 1, 1, 1)).unwrap();
        assert_eq!(m, Metrics { sensitivity: Some(50.0), specificity: Some(50.0), ccr: 50.0 });
        let m = metrics(&ConfusionMatrix::new(9, 1, 2, 8)).unwrap();
        assert_eq!(m, Metrics { sensitivity: Some(90.0), specificity: Some(80.0), ccr: 85.0 });
        assert_eq!(metrics(&ConfusionMatrix::default()), Err(EvaluateError::EmptyMatrix));
    }

    #[test]
    fn undefined_denominators() {
        let m = metrics(&ConfusionMatrix::new(0, 0, 1, 3)).unwrap();
        assert_eq!(m.sensitivity, None);
        assert_eq!(m.specificity, Some(75.0));
    }

    #[test]
    fn printed_variant() {
        let m = metrics_with(&ConfusionMatrix::new(9, 1, 2, 8), SpecificityFormula::TnOverTnPlusFn).unwrap();
        assert_eq!(m.specificity, Some(800.0 / 9.0));
    }

    #[test]
    fn row_percent_layout() {
        let rows = ConfusionMatrix::new(9, 1, 2, 8).row_percentages();
        assert_eq!(rows, [[Some(90.0), Some(10.0)], [Some(20.0), Some(80.0)]]);
    }

    #[test]
    fn splitmix_reference_values() {
        // published SplitMix64 outputs for seed 0
        let mut r = SplitMix64::new(0);
        assert_eq!(r.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(r.next_u64(), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn split_examples() {
        let labels: Vec<Label> = [P; 20].into_iter().chain([N; 20]).collect();
        let (train, test) = split_indices(&labels, 0.5, 3).unwrap();
        let count = |idx: &[usize], l| idx.iter().filter(|&&i| labels[i] == l).count();
        assert_eq!((count(&train, P), count(&train, N)), (10, 10));
        assert_eq!((count(&test, P), count(&test, N)), (10, 10));
        assert_eq!(split_indices(&labels, 0.5, 3).unwrap(), (train, test));

        let small = [P, P, N, N];
        let (train, test) = split_indices(&small, 0.9, 1).unwrap();
        assert_eq!((train.len(), test.len()), (2, 2));

        assert_eq!(split_indices(&[P, N, N], 0.5, 0), Err(EvaluateError::TooFewSamples { label: P, count: 1 }));
        assert_eq!(split_indices(&small, 1.0, 0), Err(EvaluateError::InvalidFraction(1.0)));
    }

    fn arb_cm() -> impl Strategy<Value = ConfusionMatrix> {
        (0u64..50, 0u64..50, 0u64..50, 0u64..50)
            .prop_filter("non-empty", |c| c.0 + c.1 + c.2 + c.3 > 0)
            .prop_map(|(a, b, c, d)| ConfusionMatrix::new(a, b, c, d))
    }

    fn close(a: Option<f64>, b: Option<f64>) -> bool {
        match (a, b) {
            (Some(x), Some(y)) => (x - y).abs() < 1e-9,
            (None, None) => true,
            _ => false,
        }
    }

    proptest! {
        #[test]
        fn counts_sum_to_length(pairs in proptest::collection::vec((any::<bool>(), any::<bool>()), 0..60)) {
            let to = |b: bool| if b { P } else { N };
            let truth: Vec<Label> = pairs.iter().map(|p| to(p.0)).collect();
            let pred: Vec<Label> = pairs.iter().map(|p| to(p.1)).collect();
            prop_assert_eq!(confusion(&truth, &pred).unwrap().total() as usize, pairs.len());

            if !pairs.is_empty() {
                let flipped_t: Vec<Label> = truth.iter().map(|l| l.flipped()).collect();
                let flipped_p: Vec<Label> = pred.iter().map(|l| l.flipped()).collect();
                let a = metrics(&confusion(&truth, &pred).unwrap()).unwrap();
                let b = metrics(&confusion(&flipped_t, &flipped_p).unwrap()).unwrap();
                prop_assert!(close(a.sensitivity, b.specificity) && close(a.specificity, b.sensitivity));
                prop_assert!((a.ccr - b.ccr).abs() < 1e-9);
            }
        }

        #[test]
        fn metrics_scale_invariant(cm in arb_cm(), k in 1u64..20) {
            let a = metrics(&cm).unwrap();
            let b = metrics(&ConfusionMatrix::new(cm.tp * k, cm.fn_ * k, cm.fp * k, cm.tn * k)).unwrap();
            prop_assert!(close(a.sensitivity, b.sensitivity) && close(a.specificity, b.specificity));
            prop_assert!((a.ccr - b.ccr).abs() < 1e-9);
            for v in [a.sensitivity, a.specificity, Some(a.ccr)].into_iter().flatten() {
                prop_assert!((0.0..=100.0).contains(&v));
            }
            let s = metrics(&cm.swapped()).unwrap();
            prop_assert!(close(a.sensitivity, s.specificity));
        }

        #[test]
        fn split_is_partition(n_pos in 2usize..30, n_neg in 2usize..30, frac in 0.05f64..0.95, seed: u64) {
            let labels: Vec<Label> = (0..n_pos).map(|_| P).chain((0..n_neg).map(|_| N)).collect();
            let (train, test) = split_indices(&labels, frac, seed).unwrap();
            let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            for class in [P, N] {
                prop_assert!(train.iter().any(|&i| labels[i] == class));
                prop_assert!(test.iter().any(|&i| labels[i] == class));
            }
        }
    }
}
