//! Crossing-state probabilities, their ratios, and retrospective backtests.
//!
//! The crossing-state probability `P^{ij}(t0, dx)` is the chance that the
//! next event comes within `dx` days and lands in state `j`, given that the
//! process entered `i` and has stayed there for `t0` days:
//!
//! ```text
//! p_ij [S_ij(t0) - S_ij(t0 + dx)] / sum_k p_ik S_ik(t0)
//! ```
//!
//! Everything is evaluated in log space so long elapsed times do not
//! underflow the denominator.

use std::io::Write;

use chrono::NaiveDateTime;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{
    build_sequence_until, days_between, format_date, split_catalog, sufficient_stats, EventCatalog, SequenceData,
    Split, StateSpace, TransitionStats,
};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::prior::{elicit_priors, PriorSet, DEFAULT_DIRICHLET_FLOOR, DEFAULT_Q};
use crate::sampler::{run_gibbs, ChainOutput, ChainState, GibbsConfig};
use crate::stats::{self, log1m_exp, log_sum_exp};
use crate::weibull::log_survival;

pub const DAYS_PER_MONTH: f64 = 30.44;
pub const DAYS_PER_YEAR: f64 = 365.25;

/// Ratios with a denominator below this are reported as missing.
pub const RATIO_FLOOR: f64 = 1e-300;

/// One to six months, then one to four years, in days.
pub fn standard_horizons() -> Vec<f64> {
    (1..=6)
        .map(|k| k as f64 * DAYS_PER_MONTH)
        .chain((1..=4).map(|k| k as f64 * DAYS_PER_YEAR))
        .collect()
}

/// Human label for a horizon from [`standard_horizons`], or the day count.
pub fn horizon_label(days: f64) -> String {
    for k in 1..=6 {
        if days == k as f64 * DAYS_PER_MONTH {
            return format!("{k}m");
        }
    }
    for k in 1..=4 {
        if days == k as f64 * DAYS_PER_YEAR {
            return format!("{k}y");
        }
    }
    if days.is_infinite() {
        return "inf".into();
    }
    format!("{days:.2}d")
}

/// `ln P^{ij}(t0, dx)` for every destination `j`, from source `i`.
pub fn log_csp(
    p: &Matrix<f64>,
    alpha: &Matrix<f64>,
    theta: &Matrix<f64>,
    i: usize,
    t0: f64,
    dx: f64,
) -> Result<Vec<f64>> {
    let s = p.dim();
    let log_s0: Vec<f64> = (0..s).map(|j| log_survival(t0, alpha[(i, j)], theta[(i, j)])).collect();
    let terms: Vec<f64> = (0..s).map(|j| p[(i, j)].ln() + log_s0[j]).collect();
    let log_den = log_sum_exp(&terms);
    if log_den == f64::NEG_INFINITY {
        return Err(Error::ElapsedIncompatible);
    }
    Ok((0..s)
        .map(|j| {
            if terms[j] == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            let log_s1 = log_survival(t0 + dx, alpha[(i, j)], theta[(i, j)]);
            terms[j] + log1m_exp(log_s1 - log_s0[j]) - log_den
        })
        .collect())
}

/// `P^{ij}(t0, dx)` for every destination `j`, from source `i`.
pub fn csp(p: &Matrix<f64>, alpha: &Matrix<f64>, theta: &Matrix<f64>, i: usize, t0: f64, dx: f64) -> Result<Vec<f64>> {
    Ok(log_csp(p, alpha, theta, i, t0, dx)?.into_iter().map(f64::exp).collect())
}

fn draw_log_csp(d: &ChainState, i: usize, t0: f64, dx: f64) -> Result<Vec<f64>> {
    log_csp(&d.p, &d.alpha, &d.theta, i, t0, dx)
}

/// Posterior mean, median and equal-tailed band of one probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandStats {
    pub mean: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
}

impl BandStats {
    fn from_values(values: &[f64], level: f64) -> Self {
        let sorted = stats::sorted_copy(values);
        let tail = 0.5 * (1.0 - level);
        Self {
            mean: stats::mean(values),
            median: stats::quantile_sorted(&sorted, 0.5),
            lower: stats::quantile_sorted(&sorted, tail),
            upper: stats::quantile_sorted(&sorted, 1.0 - tail),
        }
    }
}

/// Posterior of `P^{ij}(t0, dx)` over a grid of destinations and horizons.
#[derive(Debug, Clone, PartialEq)]
pub struct CspTable {
    /// Zero-based source state.
    pub state: usize,
    pub elapsed: f64,
    pub level: f64,
    pub horizons: Vec<f64>,
    /// Indexed `[j][h]`.
    pub cells: Vec<Vec<BandStats>>,
}

/// Flat, one-based row of a [`CspTable`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CspRow {
    pub from: usize,
    pub to: usize,
    pub elapsed_days: f64,
    pub horizon: String,
    pub horizon_days: f64,
    pub mean: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
}

impl CspTable {
    pub fn rows(&self) -> Vec<CspRow> {
        let mut out = Vec::new();
        for (j, row) in self.cells.iter().enumerate() {
            for (h, b) in row.iter().enumerate() {
                out.push(CspRow {
                    from: self.state + 1,
                    to: j + 1,
                    elapsed_days: self.elapsed,
                    horizon: horizon_label(self.horizons[h]),
                    horizon_days: self.horizons[h],
                    mean: b.mean,
                    median: b.median,
                    lower: b.lower,
                    upper: b.upper,
                });
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for r in self.rows() {
            wtr.serialize(r)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Posterior means `[j][h]`.
    pub fn means(&self) -> Vec<Vec<f64>> {
        self.cells.iter().map(|r| r.iter().map(|b| b.mean).collect()).collect()
    }
}

/// Posterior of the crossing-state probabilities from `state` after
/// `elapsed` days, for every destination and each horizon.
pub fn csp_posterior(
    output: &ChainOutput,
    state: usize,
    elapsed: f64,
    horizons: &[f64],
    level: f64,
) -> Result<CspTable> {
    let s = output.num_states();
    if state >= s {
        return Err(Error::InvalidConfig(format!("state {} outside 1..={s}", state + 1)));
    }
    if !(elapsed >= 0.0) || horizons.iter().any(|h| !(*h >= 0.0)) {
        return Err(Error::InvalidConfig(
            "elapsed time and horizons must be non-negative".into(),
        ));
    }
    if output.draws.is_empty() {
        return Err(Error::TooFewDraws { needed: 1, got: 0 });
    }
    // values[j][h][draw]
    let mut values = vec![vec![Vec::with_capacity(output.draws.len()); horizons.len()]; s];
    for d in &output.draws {
        for (h, &dx) in horizons.iter().enumerate() {
            for (j, lp) in draw_log_csp(d, state, elapsed, dx)?.into_iter().enumerate() {
                values[j][h].push(lp.exp());
            }
        }
    }
    Ok(CspTable {
        state,
        elapsed,
        level,
        horizons: horizons.to_vec(),
        cells: values
            .iter()
            .map(|row| row.iter().map(|v| BandStats::from_values(v, level)).collect())
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioKind {
    /// `P^{ij} / P^{ik}`: one source, two destinations.
    SourceFixed,
    /// `P^{ij} / P^{kj}`: two sources, one destination.
    DestinationFixed,
}

/// Posterior mean of one ratio across horizons. `numerator` and
/// `denominator` are (source, destination) pairs, zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioCurve {
    pub kind: RatioKind,
    pub numerator: (usize, usize),
    pub denominator: (usize, usize),
    pub horizons: Vec<f64>,
    /// `None` where no draw had a usable denominator.
    pub values: Vec<Option<f64>>,
    /// Draws that contributed to each value.
    pub used: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub kind: RatioKind,
    pub numerator: String,
    pub denominator: String,
    pub horizon: String,
    pub horizon_days: f64,
    pub value: Option<f64>,
    pub used_draws: usize,
}

pub fn ratio_rows(curves: &[RatioCurve]) -> Vec<RatioRow> {
    let pair = |(i, j): (usize, usize)| format!("P{}{}", i + 1, j + 1);
    curves
        .iter()
        .flat_map(|c| {
            c.horizons.iter().enumerate().map(move |(h, &dx)| RatioRow {
                kind: c.kind,
                numerator: pair(c.numerator),
                denominator: pair(c.denominator),
                horizon: horizon_label(dx),
                horizon_days: dx,
                value: c.values[h],
                used_draws: c.used[h],
            })
        })
        .collect()
}

/// Posterior means of every ratio of the given kind. Each draw contributes
/// `exp(ln P_num - ln P_den)`; draws whose denominator is below
/// [`RATIO_FLOOR`] are skipped.
pub fn csp_ratios(output: &ChainOutput, elapsed: f64, horizons: &[f64], kind: RatioKind) -> Result<Vec<RatioCurve>> {
    let s = output.num_states();
    let mut pairs = Vec::new();
    for fixed in 0..s {
        for a in 0..s {
            for b in 0..s {
                if a == b {
                    continue;
                }
                pairs.push(match kind {
                    RatioKind::SourceFixed => ((fixed, a), (fixed, b)),
                    RatioKind::DestinationFixed => ((a, fixed), (b, fixed)),
                });
            }
        }
    }
    let floor = RATIO_FLOOR.ln();
    let mut sums = vec![vec![0.0; horizons.len()]; pairs.len()];
    let mut used = vec![vec![0usize; horizons.len()]; pairs.len()];
    for d in &output.draws {
        for (h, &dx) in horizons.iter().enumerate() {
            let by_source: Vec<Vec<f64>> = (0..s).map(|i| draw_log_csp(d, i, elapsed, dx)).collect::<Result<_>>()?;
            for (k, &((i1, j1), (i2, j2))) in pairs.iter().enumerate() {
                let den = by_source[i2][j2];
                if den < floor {
                    continue;
                }
                sums[k][h] += (by_source[i1][j1] - den).exp();
                used[k][h] += 1;
            }
        }
    }
    Ok(pairs
        .into_iter()
        .enumerate()
        .map(|(k, (num, den))| RatioCurve {
            kind,
            numerator: num,
            denominator: den,
            horizons: horizons.to_vec(),
            values: (0..horizons.len())
                .map(|h| (used[k][h] > 0).then(|| sums[k][h] / used[k][h] as f64))
                .collect(),
            used: used[k].clone(),
        })
        .collect())
}

/// Everything needed to go from a sequence to posterior draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitSettings {
    pub q_target: f64,
    pub dirichlet_floor: f64,
    pub min_count: usize,
    pub gibbs: GibbsConfig,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            q_target: DEFAULT_Q,
            dirichlet_floor: DEFAULT_DIRICHLET_FLOOR,
            min_count: 3,
            gibbs: GibbsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub split: Split,
    pub historical: TransitionStats,
    pub priors: PriorSet,
    pub current: TransitionStats,
    pub output: ChainOutput,
}

/// Splits the sequence, elicits priors from the historical part, and runs
/// the sampler on the current part.
pub fn fit_sequence(seq: &SequenceData, settings: &FitSettings) -> Result<Fit> {
    let split = split_catalog(seq, settings.min_count)?;
    let historical = sufficient_stats(&split.historical);
    let priors = elicit_priors(&historical, settings.q_target, settings.dirichlet_floor)?;
    let current = sufficient_stats(&split.current);
    let output = run_gibbs(&current, &priors, &settings.gibbs)?;
    Ok(Fit {
        split,
        historical,
        priors,
        current,
        output,
    })
}

/// What actually happened after a backtest date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realized {
    /// Zero-based class of the next event.
    pub state: usize,
    pub delay_days: f64,
    /// Posterior of `P^{ij}(t0, delay)` for the realized class.
    pub csp: BandStats,
    /// `sum_{k<j} P^{ik}(t0, inf) + P^{ij}(t0, delay)` at the posterior
    /// mean; uniform on (0, 1) when the model is calibrated.
    pub pit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestTable {
    pub end: NaiveDateTime,
    /// Zero-based index, in the truncated sequence, of the event that closes
    /// the historical sample.
    pub cut: usize,
    pub table: CspTable,
    pub realized: Option<Realized>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestEntry {
    pub end: NaiveDateTime,
    pub outcome: std::result::Result<BacktestTable, String>,
}

/// Posterior of the realized cell and its PIT value.
pub fn realized_cell(
    output: &ChainOutput,
    state: usize,
    elapsed: f64,
    next: usize,
    delay: f64,
    level: f64,
) -> Result<Realized> {
    let t = csp_posterior(output, state, elapsed, &[delay, f64::INFINITY], level)?;
    let below: f64 = (0..next).map(|k| t.cells[k][1].mean).sum();
    Ok(Realized {
        state: next,
        delay_days: delay,
        csp: t.cells[next][0],
        pit: below + t.cells[next][0].mean,
    })
}

/// Fits the catalog truncated at `end` and tabulates the crossing-state
/// probabilities from its last state. When a later event exists its class
/// and delay give the realized cell.
pub fn backtest_one(
    catalog: &EventCatalog,
    space: &StateSpace,
    end: &NaiveDateTime,
    settings: &FitSettings,
    horizons: &[f64],
    level: f64,
) -> Result<BacktestTable> {
    let truncated = catalog.truncated(end);
    let seq = build_sequence_until(&truncated, space, end)?;
    let fit = fit_sequence(&seq, settings)?;
    let state = seq.last_state();
    let elapsed = seq.censored();
    let table = csp_posterior(&fit.output, state, elapsed, horizons, level)?;
    let realized = match catalog.next_after(end) {
        Some(ev) => {
            let j = space.classify(ev.magnitude)?;
            Some(realized_cell(
                &fit.output,
                state,
                elapsed,
                j,
                days_between(end, &ev.time),
                level,
            )?)
        }
        None => None,
    };
    Ok(BacktestTable {
        end: *end,
        cut: fit.split.cut,
        table,
        realized,
    })
}

/// Runs [`backtest_one`] for each end date; dates that cannot be fitted are
/// kept with the reason.
pub fn backtest(
    catalog: &EventCatalog,
    space: &StateSpace,
    ends: &[NaiveDateTime],
    settings: &FitSettings,
    horizons: &[f64],
    level: f64,
) -> Vec<BacktestEntry> {
    ends.par_iter()
        .map(|end| BacktestEntry {
            end: *end,
            outcome: backtest_one(catalog, space, end, settings, horizons, level).map_err(|e| e.to_string()),
        })
        .collect()
}

/// Table 6 layout: one row per destination, one column of posterior means
/// per horizon.
pub fn write_csp_wide<W: Write>(table: &CspTable, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["from".to_string(), "to".to_string(), "elapsed_days".to_string()];
    header.extend(table.horizons.iter().map(|&h| horizon_label(h)));
    wtr.write_record(&header)?;
    for (j, row) in table.cells.iter().enumerate() {
        let mut rec = vec![
            (table.state + 1).to_string(),
            (j + 1).to_string(),
            table.elapsed.to_string(),
        ];
        rec.extend(row.iter().map(|b| b.mean.to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Table 7 layout: the Table 6 block for each end date, with the realized
/// delay and CSP filled on the realized destination's row. Skipped dates
/// get a single row carrying the reason.
pub fn write_backtest_wide<W: Write>(entries: &[BacktestEntry], horizons: &[f64], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header: Vec<String> = ["end", "status", "cut_event", "from", "elapsed_days", "to"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(horizons.iter().map(|&h| horizon_label(h)));
    header.extend(
        ["realized_days", "realized_csp", "pit", "reason"]
            .iter()
            .map(|s| s.to_string()),
    );
    wtr.write_record(&header)?;
    let blank = |n: usize| vec![String::new(); n];
    for e in entries {
        let end = format_date(&e.end);
        match &e.outcome {
            Ok(bt) => {
                for (j, row) in bt.table.cells.iter().enumerate() {
                    let mut rec = vec![
                        end.clone(),
                        "ok".into(),
                        (bt.cut + 1).to_string(),
                        (bt.table.state + 1).to_string(),
                        bt.table.elapsed.to_string(),
                        (j + 1).to_string(),
                    ];
                    rec.extend(row.iter().map(|b| b.mean.to_string()));
                    match bt.realized.as_ref().filter(|r| r.state == j) {
                        Some(r) => rec.extend([r.delay_days.to_string(), r.csp.mean.to_string(), r.pit.to_string()]),
                        None => rec.extend(blank(3)),
                    }
                    rec.push(String::new());
                    wtr.write_record(&rec)?;
                }
            }
            Err(reason) => {
                let mut rec = vec![end, "skipped".into()];
                rec.extend(blank(4 + horizons.len() + 3));
                rec.push(reason.clone());
                wtr.write_record(&rec)?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Long-format rows with credible bands, for any table.
pub fn write_rows_csv<W: Write, T: Serialize>(rows: &[T], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> (Matrix<f64>, Matrix<f64>, Matrix<f64>) {
        let p = Matrix::from_rows(vec![vec![0.3, 0.7], vec![0.6, 0.4]]).unwrap();
        let a = Matrix::from_rows(vec![vec![0.8, 1.6], vec![1.2, 2.0]]).unwrap();
        let t = Matrix::from_rows(vec![vec![100.0, 300.0], vec![50.0, 500.0]]).unwrap();
        (p, a, t)
    }

    #[test]
    fn zero_and_infinite_horizon() {
        let (p, a, t) = params();
        for t0 in [0.0, 10.0, 400.0] {
            for i in 0..2 {
                let zero = csp(&p, &a, &t, i, t0, 0.0).unwrap();
                assert!(zero.iter().all(|&v| v == 0.0));
                let full = csp(&p, &a, &t, i, t0, f64::INFINITY).unwrap();
                assert!((full.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matches_direct_formula() {
        let (p, a, t) = params();
        let (i, t0, dx) = (1, 30.0, 90.0);
        let s = |j: usize, x: f64| (-(x / t[(i, j)]).powf(a[(i, j)])).exp();
        let den: f64 = (0..2).map(|k| p[(i, k)] * s(k, t0)).sum();
        let got = csp(&p, &a, &t, i, t0, dx).unwrap();
        for j in 0..2 {
            let want = p[(i, j)] * (s(j, t0) - s(j, t0 + dx)) / den;
            assert!((got[j] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn long_elapsed_stays_finite() {
        let (p, a, t) = params();
        // Plain survival products underflow here; log space does not.
        let got = csp(&p, &a, &t, 1, 1e5, f64::INFINITY).unwrap();
        assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(got[0] > 0.999);
    }

    #[test]
    fn incompatible_elapsed() {
        let p = Matrix::from_rows(vec![vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        let a = Matrix::filled(2, 5.0);
        let t = Matrix::filled(2, 1.0);
        assert!(matches!(csp(&p, &a, &t, 0, 1e80, 1.0), Err(Error::ElapsedIncompatible)));
    }

    #[test]
    fn horizons_and_labels() {
        let h = standard_horizons();
        assert_eq!(h.len(), 10);
        assert_eq!(horizon_label(h[2]), "3m");
        assert_eq!(horizon_label(h[9]), "4y");
        assert_eq!(horizon_label(12.5), "12.50d");
    }
}
