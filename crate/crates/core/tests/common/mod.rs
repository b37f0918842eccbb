//! Shared fixtures and reference solvers for the integration suites.
#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use texfrac::classify::{FeatureVector, Label, LabeledSample};

pub const BLOB_SEED: u64 = 20_240_601;

/// 20 points per class around `+-[1, 1]` with isotropic sigma 0.3, placed in
/// the first two feature slots. The remaining slots are zero.
pub fn two_blobs(seed: u64, per_class: usize, sigma: f64) -> Vec<LabeledSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut out = Vec::new();
    for (label, centre) in [(Label::Normal, 1.0), (Label::Abnormal, -1.0)] {
        for _ in 0..per_class {
            let mut v = [0.0; 8];
            v[0] = centre + noise.sample(&mut rng);
            v[1] = centre + noise.sample(&mut rng);
            out.push(LabeledSample { features: FeatureVector::new(v, true).unwrap(), label });
        }
    }
    out
}

/// Exact soft-margin solution by SMO on the dual with maximal violating pair
/// selection, run until the KKT gap falls below `tol`. Returns `(w, b)`.
pub fn smo_reference(rows: &[Vec<f64>], y: &[f64], c: f64, tol: f64) -> (Vec<f64>, f64) {
    let n = rows.len();
    let k = |i: usize, j: usize| rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum::<f64>();
    let kernel: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| k(i, j)).collect()).collect();
    let mut alpha = vec![0.0; n];
    // gradient of the dual objective 0.5 a'Qa - e'a
    let mut grad = vec![-1.0; n];
    for _ in 0..1_000_000 {
        let mut i_up = None;
        let mut g_max = f64::NEG_INFINITY;
        let mut i_low = None;
        let mut g_min = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
            if in_up && v > g_max {
                g_max = v;
                i_up = Some(t);
            }
            if in_low && v < g_min {
                g_min = v;
                i_low = Some(t);
            }
        }
        if g_max - g_min < tol {
            break;
        }
        let (i, j) = (i_up.unwrap(), i_low.unwrap());
        let eta = (kernel[i][i] + kernel[j][j] - 2.0 * kernel[i][j]).max(1e-12);
        // step along y_i e_i - y_j e_j
        let mut step = (g_max - g_min) / eta;
        let bound_i = if y[i] > 0.0 { c - alpha[i] } else { alpha[i] };
        let bound_j = if y[j] > 0.0 { alpha[j] } else { c - alpha[j] };
        step = step.min(bound_i).min(bound_j);
        alpha[i] += y[i] * step;
        alpha[j] -= y[j] * step;
        for t in 0..n {
            grad[t] += y[t] * (kernel[t][i] * step - kernel[t][j] * step);
        }
    }
    let dim = rows[0].len();
    let mut w = vec![0.0; dim];
    for t in 0..n {
        for d in 0..dim {
            w[d] += alpha[t] * y[t] * rows[t][d];
        }
    }
    let free: Vec<usize> = (0..n).filter(|&t| alpha[t] > 1e-9 && alpha[t] < c - 1e-9).collect();
    let b = if free.is_empty() {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for t in 0..n {
            let v = -y[t] * grad[t];
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            if in_up { lo = lo.max(v) } else { hi = hi.min(v) }
        }
        0.5 * (lo + hi)
    } else {
        free.iter().map(|&t| y[t] - rows[t].iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()).sum::<f64>()
            / free.len() as f64
    };
    (w, b)
}
