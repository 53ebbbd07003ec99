//! Small numerical helpers shared by the summaries, the tests and the
//! backtest calibration check.

/// `ln Σ exp(v)` over the slice; `-inf` for an empty slice or all `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `ln(1 - exp(x))` for `x <= 0`, accurate near both ends.
pub fn log1m_exp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation with the `n - 1` denominator; 0 for fewer than
/// two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Empirical quantile of an ascending sample with linear interpolation
/// between order statistics at one-based position `(n - 1) q + 1`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn sorted_copy(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Effective sample size of a single chain by Geyer's initial monotone
/// sequence estimator, capped at the chain length.
pub fn ess(chain: &[f64]) -> f64 {
    let n = chain.len();
    if n < 4 {
        return n as f64;
    }
    let m = mean(chain);
    let centered: Vec<f64> = chain.iter().map(|x| x - m).collect();
    let c0 = centered.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if c0 <= 0.0 || !c0.is_finite() {
        return n as f64;
    }
    let autocorr = |lag: usize| -> f64 {
        let s: f64 = centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum();
        s / n as f64 / c0
    };
    let mut sum_pairs = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = autocorr(2 * k) + autocorr(2 * k + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        sum_pairs += pair;
        prev_pair = pair;
        k += 1;
    }
    // tau = -1 + 2 * sum of pairs; the k = 0 pair includes rho_0 = 1.
    let tau = (2.0 * sum_pairs - 1.0).max(1.0 / n as f64);
    (n as f64 / tau).min(n as f64)
}

/// One-sample Kolmogorov-Smirnov distance against a continuous CDF.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let sorted = sorted_copy(sample);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = cdf(x);
            let above = (k + 1) as f64 / n - f;
            let below = f - k as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of a KS distance `d` at sample size `n`, with
/// Stephens' small-sample correction.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        p += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * p).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.5), 3.0);
        assert_eq!(quantile_sorted(&[1.0, 3.0], 0.5), 2.0);
        assert_eq!(quantile_sorted(&[7.0], 0.9), 7.0);
        assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0, 4.0], 0.25), 1.75);
    }

    #[test]
    fn lse_handles_extremes() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!((log1m_exp(-1e-20) - (1e-20f64).ln()).abs() < 1e-9);
        assert!((log1m_exp(-50.0) - (-(-50f64).exp())).abs() < 1e-30);
    }

    #[test]
    fn ess_of_constant_and_alternating() {
        assert_eq!(ess(&[2.0; 50]), 50.0);
        // Antithetic chains would exceed n; the cap holds.
        let alt: Vec<f64> = (0..100).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(ess(&alt) <= 100.0);
    }

    #[test]
    fn ks_p_value_matches_known_critical_value() {
        // 5% critical value for large n is about 1.358 / sqrt(n).
        let n = 10_000;
        let p = ks_p_value(1.358 / (n as f64).sqrt(), n);
        assert!((p - 0.05).abs() < 0.005, "p = {p}");
    }
}
