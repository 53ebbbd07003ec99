//! Weibull helpers, parameterised by shape `alpha` and scale `theta`:
//! `F(x) = 1 - exp(-(x / theta)^alpha)`.

use rand::Rng;
use statrs::function::gamma::ln_gamma;

/// `ln S(x) = -(x / theta)^alpha`, evaluated as `-exp(alpha (ln x - ln theta))`.
pub fn log_survival(x: f64, alpha: f64, theta: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x == f64::INFINITY {
        f64::NEG_INFINITY
    } else {
        -(alpha * (x.ln() - theta.ln())).exp()
    }
}

pub fn survival(x: f64, alpha: f64, theta: f64) -> f64 {
    log_survival(x, alpha, theta).exp()
}

pub fn cdf(x: f64, alpha: f64, theta: f64) -> f64 {
    -log_survival(x, alpha, theta).exp_m1()
}

pub fn quantile(p: f64, alpha: f64, theta: f64) -> f64 {
    theta * (-(-p).ln_1p()).powf(1.0 / alpha)
}

/// Mean holding time `theta * Gamma(1 + 1/alpha)`.
pub fn mean(alpha: f64, theta: f64) -> f64 {
    theta * ln_gamma(1.0 + 1.0 / alpha).exp()
}

/// Inverse-CDF draw `theta * (-ln U)^(1/alpha)`.
pub fn sample<R: Rng + ?Sized>(rng: &mut R, alpha: f64, theta: f64) -> f64 {
    // U in (0, 1]: 1 - [0, 1).
    let u: f64 = 1.0 - rng.random::<f64>();
    theta * (-u.ln()).powf(1.0 / alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_special_case() {
        assert!((cdf(2f64.ln(), 1.0, 1.0) - 0.5).abs() < 1e-15);
        assert_eq!(survival(0.0, 3.0, 2.0), 1.0);
        assert_eq!(survival(f64::INFINITY, 3.0, 2.0), 0.0);
        assert!((quantile(0.5, 1.0, 1.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn mean_values() {
        assert!((mean(1.0, 250.0) - 250.0).abs() < 1e-9);
        let half_sqrt_pi = std::f64::consts::PI.sqrt() / 2.0;
        assert!((mean(2.0, 1.0) - half_sqrt_pi).abs() < 1e-12);
        assert!((mean(1e3, 7.0) - 7.0).abs() < 7e-3);
    }
}
