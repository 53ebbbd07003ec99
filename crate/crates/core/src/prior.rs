//! Prior elicitation from a historical prefix of the catalog.
//!
//! For each transition `(i, j)` the Weibull scale has a generalized inverse
//! Gamma prior: `theta^-alpha | alpha ~ Gamma(shape m, rate 1/b(alpha))` with
//!
//! ```text
//! b(alpha) = t_q^alpha / ((1 - q)^(-1/m) - 1)
//! ```
//!
//! so that `t_q` is the prior predictive quantile of order `q`. The shape has
//! the log-concave density
//!
//! ```text
//! pi(alpha) ∝ alpha^(m-1-c) (alpha - alpha0)^c exp(-m alpha (ln t_q - mean_log))
//! ```
//!
//! on `[alpha0, alpha1]`, where `mean_log` is the mean log historical time.
//! Hyperparameters depend on the historical visit count `m`:
//!
//! | m    | t_q                 | c     | alpha0 | alpha1 |
//! |------|---------------------|-------|--------|--------|
//! | > 2  | empirical quantile  | m - 1 | 2 / m  | inf    |
//! | 2    | empirical quantile  | 1     | 2 / 3  | inf    |
//! | 1    | the single time     | 1     | 2 / 3  | 10     |
//! | 0    | fictitious, uniform | 1     | 2 / 3  | 10     |
//!
//! A transition with `m = 0` behaves as `m = 1` with a random quantile drawn
//! from the range of all historical holding times.

use serde::{Deserialize, Serialize};

use crate::catalog::TransitionStats;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::stats;

/// Default quantile order used for every transition.
pub const DEFAULT_Q: f64 = 0.5;
/// Step by which `q` is raised when the shape prior is improper.
pub const Q_STEP: f64 = 0.05;
/// Largest `q` tried by the propriety repair.
pub const Q_MAX: f64 = 0.95;
/// Upper shape bound for transitions with at most one historical visit.
pub const SCARCE_ALPHA1: f64 = 10.0;
pub const SCARCE_ALPHA0: f64 = 2.0 / 3.0;
pub const DEFAULT_DIRICHLET_FLOOR: f64 = 1.0;

/// Where the quantile `t_q` comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuantileSpec {
    /// Known constant, in days.
    Fixed(f64),
    /// Random fictitious observation, uniform a priori on `[min, max]`.
    Fictitious { min: f64, max: f64 },
}

/// Elicited hyperparameters of one transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransitionPriorWire", into = "TransitionPriorWire")]
pub struct TransitionPrior {
    pub m: usize,
    pub c: f64,
    pub alpha0: f64,
    /// `None` means no upper bound.
    pub alpha1: Option<f64>,
    pub q: f64,
    pub quantile: QuantileSpec,
    /// Mean log historical holding time; `None` when `m = 0`.
    pub mean_log: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct TransitionPriorWire {
    m: usize,
    c: f64,
    alpha0: f64,
    alpha1: Option<f64>,
    q: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t_q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t_range: Option<[f64; 2]>,
    mean_log: Option<f64>,
}

impl TryFrom<TransitionPriorWire> for TransitionPrior {
    type Error = Error;
    fn try_from(w: TransitionPriorWire) -> Result<Self> {
        let quantile = match (w.t_q, w.t_range) {
            (Some(t), None) => QuantileSpec::Fixed(t),
            (None, Some([min, max])) => QuantileSpec::Fictitious { min, max },
            _ => {
                return Err(Error::InvalidPrior(
                    "exactly one of t_q and t_range must be given".into(),
                ))
            }
        };
        let p = TransitionPrior {
            m: w.m,
            c: w.c,
            alpha0: w.alpha0,
            alpha1: w.alpha1,
            q: w.q,
            quantile,
            mean_log: w.mean_log,
        };
        p.validate()?;
        Ok(p)
    }
}

impl From<TransitionPrior> for TransitionPriorWire {
    fn from(p: TransitionPrior) -> Self {
        let (t_q, t_range) = match p.quantile {
            QuantileSpec::Fixed(t) => (Some(t), None),
            QuantileSpec::Fictitious { min, max } => (None, Some([min, max])),
        };
        TransitionPriorWire {
            m: p.m,
            c: p.c,
            alpha0: p.alpha0,
            alpha1: p.alpha1,
            q: p.q,
            t_q,
            t_range,
            mean_log: p.mean_log,
        }
    }
}

impl TransitionPrior {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidPrior(msg));
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::InvalidQuantileOrder(self.q));
        }
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return bad(format!("alpha0 must be positive, got {}", self.alpha0));
        }
        if let Some(a1) = self.alpha1 {
            if !(a1 > self.alpha0) {
                return bad(format!("alpha1 {a1} must exceed alpha0 {}", self.alpha0));
            }
        }
        if !(self.c >= 0.0) {
            return bad(format!("c must be non-negative, got {}", self.c));
        }
        match self.quantile {
            QuantileSpec::Fixed(t) if !(t > 0.0 && t.is_finite()) => {
                return bad(format!("t_q must be positive, got {t}"))
            }
            QuantileSpec::Fictitious { min, max } if !(min > 0.0 && min <= max && max.is_finite()) => {
                return bad(format!("invalid t_range [{min}, {max}]"))
            }
            _ => {}
        }
        if self.m == 0 && !matches!(self.quantile, QuantileSpec::Fictitious { .. }) {
            return bad("m = 0 requires a fictitious t_range".into());
        }
        if self.m > 0 && !matches!(self.quantile, QuantileSpec::Fixed(_)) {
            return bad("m > 0 requires a fixed t_q".into());
        }
        if self.m <= 1 && self.alpha1.is_none() {
            return bad("m <= 1 requires a finite alpha1".into());
        }
        if self.m > 1 {
            let Some(d) = self.log_gap() else {
                return bad("m > 1 requires mean_log".into());
            };
            if !(d > 0.0) {
                return bad(format!("improper shape prior: ln t_q - mean_log = {d}"));
            }
        }
        Ok(())
    }

    /// Visit count used in the Gamma shape and in `b(alpha)`; `m = 0` is
    /// promoted to 1.
    pub fn effective_m(&self) -> usize {
        self.m.max(1)
    }

    /// `ln t_q - mean_log` when both are known.
    pub fn log_gap(&self) -> Option<f64> {
        match (self.quantile, self.mean_log) {
            (QuantileSpec::Fixed(t), Some(ml)) => Some(t.ln() - ml),
            _ => None,
        }
    }

    pub fn fixed_quantile(&self) -> Option<f64> {
        match self.quantile {
            QuantileSpec::Fixed(t) => Some(t),
            QuantileSpec::Fictitious { .. } => None,
        }
    }

    /// `-ln((1 - q)^(-1/m) - 1)`, so that `ln b(alpha) = alpha ln t_q + this`.
    pub fn log_multiplier(&self) -> Result<f64> {
        log_b_multiplier(self.q, self.effective_m())
    }

    pub fn in_support(&self, alpha: f64) -> bool {
        alpha >= self.alpha0 && self.alpha1.map_or(alpha < f64::INFINITY, |a1| alpha <= a1)
    }
}

fn log_b_multiplier(q: f64, m: usize) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidQuantileOrder(q));
    }
    if m == 0 {
        return Err(Error::InvalidPrior("b(alpha) needs m >= 1".into()));
    }
    let exponent = -(-q).ln_1p() / m as f64;
    let denom = exponent.exp_m1();
    if !denom.is_finite() || denom <= 0.0 {
        return Err(Error::QuantileOverflow { q, m });
    }
    Ok(-denom.ln())
}

/// `ln b_q(alpha) = alpha ln t_q - ln((1 - q)^(-1/m) - 1)`.
pub fn log_b_hat(alpha: f64, t_q: f64, q: f64, m: usize) -> Result<f64> {
    Ok(alpha * t_q.ln() + log_b_multiplier(q, m)?)
}

/// `b_q(alpha) = t_q^alpha [(1 - q)^(-1/m) - 1]^-1`.
pub fn b_hat(alpha: f64, t_q: f64, q: f64, m: usize) -> Result<f64> {
    let lb = log_b_hat(alpha, t_q, q, m)?;
    let b = lb.exp();
    if !b.is_finite() {
        return Err(Error::QuantileOverflow { q, m });
    }
    Ok(b)
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn estimate_quantile(times: &[f64], q: f64) -> Result<f64> {
    if times.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidQuantileOrder(q));
    }
    Ok(stats::quantile_sorted(&stats::sorted_copy(times), q))
}

/// Record of a quantile order raised to make the shape prior proper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileRepair {
    pub from: usize,
    pub to: usize,
    pub requested_q: f64,
    pub used_q: f64,
}

/// Elicits the prior of transition `(i, j)` from its historical times.
/// Returns the prior and the repaired `q`, if any.
pub fn elicit_transition_prior(
    transition: (usize, usize),
    times: &[f64],
    q_target: f64,
    all_historical_times: &[f64],
) -> Result<(TransitionPrior, Option<f64>)> {
    if !(q_target > 0.0 && q_target < 1.0) {
        return Err(Error::InvalidQuantileOrder(q_target));
    }
    let m = times.len();
    let (i, j) = transition;
    match m {
        0 => {
            let sorted = stats::sorted_copy(all_historical_times);
            let (Some(&min), Some(&max)) = (sorted.first(), sorted.last()) else {
                return Err(Error::EmptySample);
            };
            let prior = TransitionPrior {
                m,
                c: 1.0,
                alpha0: SCARCE_ALPHA0,
                alpha1: Some(SCARCE_ALPHA1),
                q: DEFAULT_Q,
                quantile: QuantileSpec::Fictitious { min, max },
                mean_log: None,
            };
            Ok((prior, None))
        }
        1 => {
            let prior = TransitionPrior {
                m,
                c: 1.0,
                alpha0: SCARCE_ALPHA0,
                alpha1: Some(SCARCE_ALPHA1),
                q: DEFAULT_Q,
                quantile: QuantileSpec::Fixed(times[0]),
                mean_log: Some(times[0].ln()),
            };
            Ok((prior, None))
        }
        _ => {
            let mean_log = times.iter().map(|x| x.ln()).sum::<f64>() / m as f64;
            let (c, alpha0) = if m == 2 {
                (1.0, SCARCE_ALPHA0)
            } else {
                ((m - 1) as f64, 2.0 / m as f64)
            };
            let mut q = q_target;
            let mut t_q = estimate_quantile(times, q)?;
            while !(t_q.ln() - mean_log > 0.0) {
                // Work in hundredths so repeated steps land on 0.55, 0.60, ...
                let next = ((q + Q_STEP) * 100.0).round() / 100.0;
                if next > Q_MAX + 1e-12 {
                    return Err(Error::ImproperPrior { i, j });
                }
                q = next;
                t_q = estimate_quantile(times, q)?;
            }
            let prior = TransitionPrior {
                m,
                c,
                alpha0,
                alpha1: None,
                q,
                quantile: QuantileSpec::Fixed(t_q),
                mean_log: Some(mean_log),
            };
            let repaired = (q != q_target).then_some(q);
            Ok((prior, repaired))
        }
    }
}

/// `ln pi(alpha)` up to an additive constant; `-inf` outside the support.
pub fn log_prior_alpha(alpha: f64, prior: &TransitionPrior) -> f64 {
    if !prior.in_support(alpha) {
        return f64::NEG_INFINITY;
    }
    let m = prior.effective_m() as f64;
    let mut lp = (m - 1.0 - prior.c) * alpha.ln();
    if prior.c > 0.0 {
        lp += prior.c * (alpha - prior.alpha0).ln();
    }
    if let Some(gap) = prior.log_gap() {
        lp -= prior.m as f64 * alpha * gap;
    }
    lp
}

/// Derivative of [`log_prior_alpha`] in the interior of the support.
pub fn dlog_prior_alpha(alpha: f64, prior: &TransitionPrior) -> f64 {
    let m = prior.effective_m() as f64;
    let mut d = (m - 1.0 - prior.c) / alpha;
    if prior.c > 0.0 {
        d += prior.c / (alpha - prior.alpha0);
    }
    if let Some(gap) = prior.log_gap() {
        d -= prior.m as f64 * gap;
    }
    d
}

/// Dirichlet weights for the rows of the transition matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletPrior {
    pub gamma: Matrix<f64>,
}

impl DirichletPrior {
    pub fn new(gamma: Matrix<f64>) -> Result<Self> {
        if gamma.as_slice().iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return Err(Error::InvalidPrior("Dirichlet weights must be positive".into()));
        }
        Ok(Self { gamma })
    }

    /// Total mass `c_i` of row `i`.
    pub fn row_total(&self, i: usize) -> f64 {
        self.gamma.row(i).iter().sum()
    }

    /// Prior mean of each row.
    pub fn mean(&self) -> Matrix<f64> {
        let s = self.gamma.dim();
        Matrix::from_fn(s, |i, j| self.gamma[(i, j)] / self.row_total(i))
    }
}

/// `gamma_ij = max(count_ij, floor)`.
pub fn elicit_dirichlet_prior(counts: &Matrix<usize>, floor: f64) -> Result<DirichletPrior> {
    if !(floor > 0.0 && floor.is_finite()) {
        return Err(Error::InvalidFloor(floor));
    }
    DirichletPrior::new(counts.map(|&c| (c as f64).max(floor)))
}

/// Complete prior: one [`TransitionPrior`] per transition plus the Dirichlet
/// row weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSet {
    pub num_states: usize,
    pub q_target: f64,
    pub dirichlet_floor: f64,
    pub dirichlet: DirichletPrior,
    pub transitions: Matrix<TransitionPrior>,
    #[serde(default)]
    pub repairs: Vec<QuantileRepair>,
}

impl PriorSet {
    pub fn get(&self, i: usize, j: usize) -> &TransitionPrior {
        &self.transitions[(i, j)]
    }

    pub fn validate(&self) -> Result<()> {
        if self.transitions.dim() != self.num_states || self.dirichlet.gamma.dim() != self.num_states {
            return Err(Error::InvalidPrior("dimension mismatch".into()));
        }
        for (_, p) in self.transitions.iter_indexed() {
            p.validate()?;
        }
        Ok(())
    }
}

/// Elicits every transition prior and the Dirichlet prior from the
/// historical statistics.
pub fn elicit_priors(historical: &TransitionStats, q_target: f64, floor: f64) -> Result<PriorSet> {
    let s = historical.num_states();
    let all = historical.all_times();
    let mut repairs = Vec::new();
    let mut rows = Vec::with_capacity(s);
    for i in 0..s {
        let mut row = Vec::with_capacity(s);
        for j in 0..s {
            let (prior, repaired) = elicit_transition_prior((i, j), &historical.times[(i, j)], q_target, &all)?;
            if let Some(used_q) = repaired {
                repairs.push(QuantileRepair {
                    from: i + 1,
                    to: j + 1,
                    requested_q: q_target,
                    used_q,
                });
            }
            row.push(prior);
        }
        rows.push(row);
    }
    Ok(PriorSet {
        num_states: s,
        q_target,
        dirichlet_floor: floor,
        dirichlet: elicit_dirichlet_prior(&historical.counts, floor)?,
        transitions: Matrix::from_rows(rows).expect("square by construction"),
        repairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_examples() {
        assert_eq!(estimate_quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.5).unwrap(), 3.0);
        assert_eq!(estimate_quantile(&[3.0, 1.0], 0.5).unwrap(), 2.0);
        for q in [0.1, 0.5, 0.9] {
            assert_eq!(estimate_quantile(&[7.0], q).unwrap(), 7.0);
        }
        assert!(matches!(estimate_quantile(&[], 0.5), Err(Error::EmptySample)));
        assert!(estimate_quantile(&[1.0], 1.0).is_err());
    }

    #[test]
    fn b_hat_examples() {
        assert!((b_hat(1.0, 2.0, 0.5, 1).unwrap() - 2.0).abs() < 1e-15);
        let expected = 1.0 / (2f64.sqrt() - 1.0);
        assert!((b_hat(3.0, 1.0, 0.5, 2).unwrap() - expected).abs() < 1e-12);
        assert!((b_hat(2.0, 2.0, 0.5, 1).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn b_hat_overflow_rejected() {
        // (1 - q)^-1 - 1 = 1/eps: the multiplier itself is fine, but the
        // order must stay inside (0, 1).
        assert!(matches!(b_hat(1.0, 2.0, 1.0, 1), Err(Error::InvalidQuantileOrder(_))));
        // A huge t_q^alpha overflows the final value.
        assert!(matches!(
            b_hat(400.0, 1e10, 0.5, 1),
            Err(Error::QuantileOverflow { .. })
        ));
        // (1 - q)^(-1/m) with q = 1 - 1e-300 overflows the multiplier at m = 1.
        assert!(log_b_hat(1.0, 2.0, 1.0 - 1e-16, 1).is_ok());
    }

    #[test]
    fn log_space_agrees_with_direct() {
        for &(a, t, q, m) in &[
            (0.7f64, 3.0f64, 0.3f64, 4usize),
            (2.5, 120.0, 0.5, 10),
            (1.2, 0.4, 0.8, 2),
        ] {
            let direct = t.powf(a) / ((1.0 - q).powf(-1.0 / m as f64) - 1.0);
            let logspace = b_hat(a, t, q, m).unwrap();
            assert!(((logspace - direct) / direct).abs() < 1e-12);
        }
    }

    #[test]
    fn table_mapping() {
        let all = [3.0, 50.0, 800.0];
        let five = [10.0, 20.0, 30.0, 40.0, 50.0];
        let (p, _) = elicit_transition_prior((0, 0), &five, 0.5, &all).unwrap();
        assert_eq!((p.m, p.c, p.alpha0, p.alpha1), (5, 4.0, 0.4, None));
        assert_eq!(p.quantile, QuantileSpec::Fixed(30.0));
        assert_eq!(p.alpha0 * p.m as f64, 2.0);

        let (p, _) = elicit_transition_prior((0, 1), &[10.0, 40.0], 0.5, &all).unwrap();
        assert_eq!((p.c, p.alpha0, p.alpha1), (1.0, 2.0 / 3.0, None));
        assert_eq!(p.quantile, QuantileSpec::Fixed(25.0));

        let (p, _) = elicit_transition_prior((0, 2), &[17.0], 0.8, &all).unwrap();
        assert_eq!((p.c, p.alpha0, p.alpha1, p.q), (1.0, 2.0 / 3.0, Some(10.0), 0.5));
        assert_eq!(p.quantile, QuantileSpec::Fixed(17.0));

        let (p, _) = elicit_transition_prior((1, 0), &[], 0.5, &all).unwrap();
        assert_eq!(
            (p.m, p.c, p.alpha0, p.alpha1, p.q),
            (0, 1.0, 2.0 / 3.0, Some(10.0), 0.5)
        );
        assert_eq!(p.quantile, QuantileSpec::Fictitious { min: 3.0, max: 800.0 });
        assert_eq!(p.effective_m(), 1);
        assert!(matches!(
            elicit_transition_prior((1, 0), &[], 0.5, &[]),
            Err(Error::EmptySample)
        ));
    }

    #[test]
    fn propriety_repair_raises_q() {
        // Median 2 equals the geometric mean of (1, 2, 4): ln t_q - mean_log = 0.
        let (p, repaired) = elicit_transition_prior((0, 0), &[1.0, 2.0, 4.0], 0.5, &[1.0]).unwrap();
        assert_eq!(repaired, Some(0.55));
        assert_eq!(p.q, 0.55);
        assert!(p.log_gap().unwrap() > 0.0);
        // Identical times can never be repaired.
        let err = elicit_transition_prior((1, 2), &[5.0; 4], 0.5, &[5.0]).unwrap_err();
        assert!(matches!(err, Error::ImproperPrior { i: 1, j: 2 }));
        assert!(err.to_string().contains("(2,3)"));
    }

    #[test]
    fn log_prior_examples() {
        let p = TransitionPrior {
            m: 4,
            c: 3.0,
            alpha0: 0.5,
            alpha1: None,
            q: 0.5,
            quantile: QuantileSpec::Fixed(100f64.exp()),
            mean_log: Some(99.0),
        };
        assert_eq!(log_prior_alpha(0.4, &p), f64::NEG_INFINITY);
        let a = 1.7;
        let expected = 3.0 * (a - 0.5f64).ln() - 4.0 * a * 1.0;
        assert!((log_prior_alpha(a, &p) - expected).abs() < 1e-9);

        let scarce = TransitionPrior {
            m: 1,
            c: 1.0,
            alpha0: 2.0 / 3.0,
            alpha1: Some(10.0),
            q: 0.5,
            quantile: QuantileSpec::Fixed(12.0),
            mean_log: Some(12f64.ln()),
        };
        assert_eq!(log_prior_alpha(2.0 / 3.0, &scarce), f64::NEG_INFINITY);
        assert_eq!(log_prior_alpha(10.5, &scarce), f64::NEG_INFINITY);
        let ratio = (log_prior_alpha(2.0, &scarce) - log_prior_alpha(4.0, &scarce)).exp();
        let expected = (1.0 - (2.0 / 3.0) / 2.0) / (1.0 - (2.0 / 3.0) / 4.0);
        assert!((ratio - expected).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_examples() {
        let counts = Matrix::from_rows(vec![vec![27, 14, 4], vec![0, 0, 0], vec![4, 3, 3]]).unwrap();
        let d = elicit_dirichlet_prior(&counts, 1.0).unwrap();
        assert_eq!(d.gamma.row(0), &[27.0, 14.0, 4.0]);
        assert_eq!(d.gamma.row(1), &[1.0, 1.0, 1.0]);
        assert_eq!(d.row_total(2), 10.0);
        assert!(matches!(
            elicit_dirichlet_prior(&counts, 0.0),
            Err(Error::InvalidFloor(_))
        ));
    }

    #[test]
    fn prior_json_round_trip_and_validation() {
        let (p, _) = elicit_transition_prior((0, 0), &[], 0.5, &[2.0, 9.0]).unwrap();
        let js = serde_json::to_value(&p).unwrap();
        assert_eq!(js["t_range"], serde_json::json!([2.0, 9.0]));
        assert!(js.get("t_q").is_none());
        assert_eq!(serde_json::from_value::<TransitionPrior>(js).unwrap(), p);

        let bad = serde_json::json!({"m": 3, "c": 2.0, "alpha0": 0.66, "alpha1": null,
            "q": 0.5, "t_q": 1.0, "mean_log": 1.0});
        assert!(serde_json::from_value::<TransitionPrior>(bad).is_err());
    }

    #[test]
    fn shape_prior_is_log_concave() {
        for m in 2..12usize {
            for &gap in &[0.01f64, 0.3, 2.0] {
                let c = if m == 2 { 1.0 } else { (m - 1) as f64 };
                let alpha0 = if m == 2 { 2.0 / 3.0 } else { 2.0 / m as f64 };
                let p = TransitionPrior {
                    m,
                    c,
                    alpha0,
                    alpha1: None,
                    q: 0.5,
                    quantile: QuantileSpec::Fixed(gap.exp()),
                    mean_log: Some(0.0),
                };
                let h = 1e-3;
                for k in 1..200 {
                    let a = alpha0 + 0.01 + 0.05 * k as f64;
                    let d2 = log_prior_alpha(a + h, &p) - 2.0 * log_prior_alpha(a, &p) + log_prior_alpha(a - h, &p);
                    assert!(d2 <= 1e-8, "m={m} gap={gap} a={a} d2={d2}");
                }
            }
        }
    }
}
