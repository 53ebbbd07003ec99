//! Fixtures shared by the integration tests.

#![allow(dead_code)]

use mrp::catalog::{sufficient_stats, SequenceData, TransitionStats};
use mrp::simulate::TrueModel;
use mrp::Matrix;

/// Three-class model with rows close to the posterior transition matrix of
/// the Apennine sequence, shapes between 0.8 and 2.1, scales of 200 to 350
/// days.
pub fn apennine_like_model() -> TrueModel {
    let p = Matrix::from_rows(vec![
        vec![0.57, 0.27, 0.16],
        vec![0.58, 0.28, 0.14],
        vec![0.52, 0.32, 0.16],
    ])
    .unwrap();
    let alpha = Matrix::from_rows(vec![
        vec![1.18, 1.98, 0.83],
        vec![1.32, 1.22, 1.72],
        vec![1.03, 1.00, 2.10],
    ])
    .unwrap();
    let theta = Matrix::from_rows(vec![
        vec![250.0, 280.0, 340.0],
        vec![270.0, 320.0, 300.0],
        vec![210.0, 240.0, 330.0],
    ])
    .unwrap();
    TrueModel::new(p, alpha, theta, 0).unwrap()
}

pub fn stats_of(states: Vec<usize>, times: Vec<f64>, censored: f64, s: usize) -> TransitionStats {
    sufficient_stats(&SequenceData::new(states, times, censored, s).unwrap())
}

/// Regularized lower incomplete gamma for integer shape `k` (Erlang CDF).
pub fn erlang_cdf(k: usize, rate: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let lx = rate * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..k {
        term *= lx / n as f64;
        sum += term;
    }
    1.0 - (-lx).exp() * sum
}

/// CDF on `[lo, hi]` of an unnormalized density, by composite Simpson
/// quadrature on `panels` (even) panels, returned as a lookup with linear
/// interpolation.
pub fn quadrature_cdf(density: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> impl Fn(f64) -> f64 {
    let h = (hi - lo) / panels as f64;
    let mut cum = vec![0.0; panels / 2 + 1];
    for k in 0..panels / 2 {
        let a = lo + 2.0 * k as f64 * h;
        let piece = h / 3.0 * (density(a) + 4.0 * density(a + h) + density(a + 2.0 * h));
        cum[k + 1] = cum[k] + piece;
    }
    let total = *cum.last().unwrap();
    let step = 2.0 * h;
    move |x: f64| {
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let pos = (x - lo) / step;
        let k = (pos.floor() as usize).min(cum.len() - 2);
        let frac = pos - k as f64;
        (cum[k] + frac * (cum[k + 1] - cum[k])) / total
    }
}
