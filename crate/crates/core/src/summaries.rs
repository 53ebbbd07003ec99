//! Posterior summaries of the chains and posterior-predictive checks of the
//! observed holding times.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::sampler::{ChainOutput, ChainState};
use crate::stats;
use crate::weibull;

/// Fewest draws accepted by [`chain_summary`].
pub const MIN_DRAWS: usize = 10;
/// Bayesian p-values below this flag an observation as a suspect outlier.
pub const OUTLIER_THRESHOLD: f64 = 0.025;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub level: f64,
    pub n_draws: usize,
    pub params: Vec<ParamSummary>,
}

impl PosteriorSummary {
    pub fn get(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for p in &self.params {
            wtr.serialize(p)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Summarizes one scalar given its draws split by chain. The interval is
/// equal-tailed at `level`; ESS is the sum of per-chain ESS.
pub fn summarize_scalar(name: &str, chains: &[Vec<f64>], level: f64) -> ParamSummary {
    let all: Vec<f64> = chains.iter().flatten().copied().collect();
    let sorted = stats::sorted_copy(&all);
    let tail = 0.5 * (1.0 - level);
    let ess = chains.iter().map(|c| stats::ess(c)).sum::<f64>().min(all.len() as f64);
    ParamSummary {
        name: name.to_string(),
        mean: stats::mean(&all),
        sd: stats::std_dev(&all),
        median: stats::quantile_sorted(&sorted, 0.5),
        lower: stats::quantile_sorted(&sorted, tail),
        upper: stats::quantile_sorted(&sorted, 1.0 - tail),
        ess,
    }
}

fn split_by_chain(output: &ChainOutput, f: impl Fn(&ChainState) -> f64) -> Vec<Vec<f64>> {
    let mut chains: Vec<Vec<f64>> = vec![Vec::new(); output.n_chains()];
    for d in &output.draws {
        chains[d.chain].push(f(d));
    }
    chains.retain(|c| !c.is_empty());
    chains
}

/// Posterior summary of every `p[i,j]`, `alpha[i,j]`, `theta[i,j]` and of the
/// mean holding time `mean_time[i,j] = theta Gamma(1 + 1/alpha)`. Names are
/// one-based.
pub fn chain_summary(output: &ChainOutput, level: f64) -> Result<PosteriorSummary> {
    let n = output.draws.len();
    if n < MIN_DRAWS {
        return Err(Error::TooFewDraws {
            needed: MIN_DRAWS,
            got: n,
        });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!("credible level {level} outside (0, 1)")));
    }
    let s = output.num_states();
    let mut params = Vec::with_capacity(4 * s * s);
    for (kind, get) in [
        (
            "p",
            (|d: &ChainState, ij| d.p[ij]) as fn(&ChainState, (usize, usize)) -> f64,
        ),
        ("alpha", |d, ij| d.alpha[ij]),
        ("theta", |d, ij| d.theta[ij]),
        ("mean_time", |d, ij| mean_interoccurrence(d.alpha[ij], d.theta[ij])),
    ] {
        for i in 0..s {
            for j in 0..s {
                let chains = split_by_chain(output, |d| get(d, (i, j)));
                params.push(summarize_scalar(
                    &format!("{kind}[{},{}]", i + 1, j + 1),
                    &chains,
                    level,
                ));
            }
        }
    }
    Ok(PosteriorSummary {
        level,
        n_draws: n,
        params,
    })
}

/// Posterior mean of the transition matrix.
pub fn posterior_mean_p(output: &ChainOutput) -> Matrix<f64> {
    let s = output.num_states();
    let n = output.draws.len() as f64;
    Matrix::from_fn(s, |i, j| output.draws.iter().map(|d| d.p[(i, j)]).sum::<f64>() / n)
}

/// Mean of a Weibull holding time, `theta Gamma(1 + 1/alpha)`.
pub fn mean_interoccurrence(alpha: f64, theta: f64) -> f64 {
    weibull::mean(alpha, theta)
}

/// One Weibull draw per retained iteration for every transition.
pub fn predictive_draws<R: Rng + ?Sized>(output: &ChainOutput, rng: &mut R) -> Matrix<Vec<f64>> {
    let s = output.num_states();
    let mut out: Matrix<Vec<f64>> = Matrix::filled(s, Vec::with_capacity(output.draws.len()));
    for d in &output.draws {
        for i in 0..s {
            for j in 0..s {
                let x = weibull::sample(rng, d.alpha[(i, j)], d.theta[(i, j)]);
                out[(i, j)].push(x);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationCheck {
    pub time: f64,
    /// Fraction of predictive draws at or below the observation.
    pub tail_fraction: f64,
    pub p_value: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionPredictive {
    pub from: usize,
    pub to: usize,
    pub n_draws: usize,
    pub mean: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
    pub observations: Vec<ObservationCheck>,
    /// Share of observations flagged, in `[0, 1]`.
    pub flagged_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveReport {
    pub level: f64,
    pub threshold: f64,
    pub transitions: Vec<TransitionPredictive>,
}

/// Two-sided predictive tail probability `min(r, 1 - r)`, with `r` the
/// share of the (sorted) predictive sample at or below `observed`.
pub fn bayes_p_value(observed: f64, sorted_predictive: &[f64]) -> (f64, f64) {
    let below = sorted_predictive.partition_point(|&x| x <= observed);
    let r = below as f64 / sorted_predictive.len() as f64;
    (r, r.min(1.0 - r))
}

/// Compares observed times with their predictive samples, transition by
/// transition. Transitions with no predictive draws are skipped.
pub fn bayes_p_values(
    observed: &Matrix<Vec<f64>>,
    predictive: &Matrix<Vec<f64>>,
    level: f64,
    threshold: f64,
) -> PredictiveReport {
    let s = observed.dim();
    let tail = 0.5 * (1.0 - level);
    let mut transitions = Vec::new();
    for i in 0..s {
        for j in 0..s {
            let pred = &predictive[(i, j)];
            if pred.is_empty() {
                continue;
            }
            let sorted = stats::sorted_copy(pred);
            let observations: Vec<ObservationCheck> = observed[(i, j)]
                .iter()
                .map(|&t| {
                    let (r, p) = bayes_p_value(t, &sorted);
                    ObservationCheck {
                        time: t,
                        tail_fraction: r,
                        p_value: p,
                        flagged: p < threshold,
                    }
                })
                .collect();
            let flagged = observations.iter().filter(|o| o.flagged).count();
            transitions.push(TransitionPredictive {
                from: i + 1,
                to: j + 1,
                n_draws: sorted.len(),
                mean: stats::mean(&sorted),
                median: stats::quantile_sorted(&sorted, 0.5),
                lower: stats::quantile_sorted(&sorted, tail),
                upper: stats::quantile_sorted(&sorted, 1.0 - tail),
                flagged_fraction: if observations.is_empty() {
                    0.0
                } else {
                    flagged as f64 / observations.len() as f64
                },
                observations,
            });
        }
    }
    PredictiveReport {
        level,
        threshold,
        transitions,
    }
}

#[derive(Serialize)]
struct TransitionRow {
    from: usize,
    to: usize,
    n_obs: usize,
    predictive_mean: f64,
    lower: f64,
    median: f64,
    upper: f64,
    flagged_pct: f64,
}

#[derive(Serialize)]
struct ObservationRow {
    from: usize,
    to: usize,
    time: f64,
    p_value: f64,
    flagged: bool,
    lower: f64,
    median: f64,
    mean: f64,
    upper: f64,
}

impl PredictiveReport {
    /// One row per transition: predictive interval and share of outliers.
    pub fn write_transitions_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for t in &self.transitions {
            wtr.serialize(TransitionRow {
                from: t.from,
                to: t.to,
                n_obs: t.observations.len(),
                predictive_mean: t.mean,
                lower: t.lower,
                median: t.median,
                upper: t.upper,
                flagged_pct: 100.0 * t.flagged_fraction,
            })?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// One row per observation with its transition's interval; the table
    /// behind an interval-and-points plot.
    pub fn write_observations_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for t in &self.transitions {
            for o in &t.observations {
                wtr.serialize(ObservationRow {
                    from: t.from,
                    to: t.to,
                    time: o.time,
                    p_value: o.p_value,
                    flagged: o.flagged,
                    lower: t.lower,
                    median: t.median,
                    mean: t.mean,
                    upper: t.upper,
                })?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}
