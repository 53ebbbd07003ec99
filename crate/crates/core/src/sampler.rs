//! Gibbs sampler over the transition matrix `p`, the Weibull shapes `alpha`
//! and scales `theta`, the unobserved state `J_{tau+1}` entered after the
//! censored tail, and the fictitious quantiles of transitions with no
//! historical visits.
//!
//! Every update is an exact draw from its full conditional:
//!
//! * `p_i ~ Dirichlet(Ñ_i + gamma_i)` where `Ñ` counts the latent transition.
//! * `theta^-alpha ~ Gamma(m + N, b(alpha) + M̃(alpha))` with
//!   `M̃(alpha) = Σ x^alpha + u_T^alpha [censored tail assigned here]`.
//! * `alpha` from its log-concave conditional by adaptive rejection sampling.
//! * `J_{tau+1}` with weights `p_{j_tau j} exp(-(u_T / theta_{j_tau j})^alpha)`.
//! * the fictitious quantile `t` of an `m = 0` transition from the density
//!   `∝ t^alpha exp(-b(alpha) / theta^alpha)` on the historical time range.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::function::gamma::{gamma_lr, gamma_ur};

use crate::ars::{ars_sample, ArsOptions};
use crate::catalog::TransitionStats;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::prior::{dlog_prior_alpha, log_prior_alpha, DirichletPrior, PriorSet, QuantileSpec, TransitionPrior};
use crate::stats::log_sum_exp;

/// Holding times of one transition in the form the conditionals need.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransitionData {
    pub log_times: Vec<f64>,
    pub sum_log: f64,
}

impl TransitionData {
    pub fn from_times(times: &[f64]) -> Self {
        let log_times: Vec<f64> = times.iter().map(|x| x.ln()).collect();
        let sum_log = log_times.iter().sum();
        Self { log_times, sum_log }
    }

    pub fn count(&self) -> usize {
        self.log_times.len()
    }
}

/// `ln(b(alpha) + M̃(alpha))` given `ln t_q` and the log multiplier of `b`.
fn log_rate(alpha: f64, data: &TransitionData, censored: Option<f64>, log_tq: f64, log_mult: f64) -> f64 {
    let mut terms = Vec::with_capacity(data.count() + 2);
    terms.push(alpha * log_tq + log_mult);
    terms.extend(data.log_times.iter().map(|lx| alpha * lx));
    if let Some(u) = censored {
        terms.push(alpha * u.ln());
    }
    log_sum_exp(&terms)
}

/// Log of the shape full conditional and its derivative, up to a constant.
///
/// ```text
/// ln pi(alpha) + alpha (m ln t_q + Σ ln x - (m + N) ln theta)
///     + (N + 1) ln alpha - (b(alpha) + M̃(alpha)) theta^-alpha
/// ```
///
/// `censored` is `Some(u_T)` when the censored tail is assigned to this
/// transition. `tq_eff` is the fixed quantile, or the current fictitious one
/// when `m = 0`.
pub fn alpha_conditional(
    alpha: f64,
    data: &TransitionData,
    theta: f64,
    censored: Option<f64>,
    prior: &TransitionPrior,
    tq_eff: f64,
) -> (f64, f64) {
    if !prior.in_support(alpha) || !(alpha > 0.0) {
        return (f64::NEG_INFINITY, f64::NAN);
    }
    let m = prior.effective_m() as f64;
    let n = data.count() as f64;
    let log_theta = theta.ln();
    let log_tq = tq_eff.ln();
    let log_mult = prior.log_multiplier().unwrap_or(f64::NAN);

    let lin = m * log_tq + data.sum_log - (m + n) * log_theta;
    let mut h = log_prior_alpha(alpha, prior) + alpha * lin + (n + 1.0) * alpha.ln();
    let mut dh = dlog_prior_alpha(alpha, prior) + lin + (n + 1.0) / alpha;

    let mut subtract = |log_scale: f64, log_ratio: f64| {
        // term = exp(log_scale + alpha * log_ratio), d/dalpha = log_ratio * term
        let term = (log_scale + alpha * log_ratio).exp();
        h -= term;
        dh -= log_ratio * term;
    };
    subtract(log_mult, log_tq - log_theta);
    for &lx in &data.log_times {
        subtract(0.0, lx - log_theta);
    }
    if let Some(u) = censored {
        subtract(0.0, u.ln() - log_theta);
    }
    (h, dh)
}

/// Value part of [`alpha_conditional`].
pub fn log_alpha_full_conditional(
    alpha: f64,
    data: &TransitionData,
    theta: f64,
    censored: Option<f64>,
    prior: &TransitionPrior,
    tq_eff: f64,
) -> f64 {
    alpha_conditional(alpha, data, theta, censored, prior, tq_eff).0
}

pub fn sample_alpha<R: Rng + ?Sized>(
    data: &TransitionData,
    theta: f64,
    censored: Option<f64>,
    prior: &TransitionPrior,
    tq_eff: f64,
    opts: &ArsOptions,
    rng: &mut R,
) -> Result<f64> {
    let hi = prior.alpha1.unwrap_or(f64::INFINITY);
    ars_sample(
        |a| alpha_conditional(a, data, theta, censored, prior, tq_eff),
        prior.alpha0,
        hi,
        opts,
        rng,
    )
}

/// Natural log of a `Gamma(shape, 1)` draw, accurate for small shapes.
fn log_gamma_draw<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        Gamma::new(shape, 1.0).expect("positive shape").sample(rng).ln()
    } else {
        let g = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng);
        let u: f64 = 1.0 - rng.random::<f64>();
        g.ln() + u.ln() / shape
    }
}

/// Draws `theta` from its conditional: `theta^-alpha ~ Gamma(m + N, rate)`
/// with `rate = b(alpha) + M̃(alpha)`; returns `theta = g^(-1/alpha)`.
pub fn sample_theta<R: Rng + ?Sized>(
    alpha: f64,
    data: &TransitionData,
    censored: Option<f64>,
    prior: &TransitionPrior,
    tq_eff: f64,
    rng: &mut R,
) -> Result<f64> {
    let shape = (prior.effective_m() + data.count()) as f64;
    let lr = log_rate(alpha, data, censored, tq_eff.ln(), prior.log_multiplier()?);
    let log_g = log_gamma_draw(shape, rng);
    let theta = ((lr - log_g) / alpha).exp();
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "scale draw out of range (alpha = {alpha}, log rate = {lr})"
        )));
    }
    Ok(theta)
}

/// Updated Dirichlet parameters `Ñ_i + gamma_i` for every row.
pub fn posterior_dirichlet(stats: &TransitionStats, j_next: Option<usize>, prior: &DirichletPrior) -> Matrix<f64> {
    let s = stats.num_states();
    Matrix::from_fn(s, |i, j| {
        let latent = (j_next == Some(j) && stats.last_state == i) as usize;
        (stats.counts[(i, j)] + latent) as f64 + prior.gamma[(i, j)]
    })
}

/// One Dirichlet draw per row, normalized in log space.
pub fn sample_p_rows<R: Rng + ?Sized>(
    stats: &TransitionStats,
    j_next: Option<usize>,
    prior: &DirichletPrior,
    rng: &mut R,
) -> Matrix<f64> {
    let post = posterior_dirichlet(stats, j_next, prior);
    let s = post.dim();
    let mut p = Matrix::filled(s, 0.0);
    for i in 0..s {
        let logs: Vec<f64> = post.row(i).iter().map(|&a| log_gamma_draw(a, rng)).collect();
        let total = log_sum_exp(&logs);
        for (dst, l) in p.row_mut(i).iter_mut().zip(&logs) {
            *dst = (l - total).exp();
        }
    }
    p
}

/// Draws the state entered after the censored tail.
pub fn sample_latent_next_state<R: Rng + ?Sized>(
    p: &Matrix<f64>,
    alpha: &Matrix<f64>,
    theta: &Matrix<f64>,
    last_state: usize,
    censored: f64,
    rng: &mut R,
) -> Result<usize> {
    let i = last_state;
    let s = p.dim();
    let log_u = censored.ln();
    let logw: Vec<f64> = (0..s)
        .map(|j| {
            let pij = p[(i, j)];
            if pij <= 0.0 {
                return f64::NEG_INFINITY;
            }
            pij.ln() - (alpha[(i, j)] * (log_u - theta[(i, j)].ln())).exp()
        })
        .collect();
    let total = log_sum_exp(&logw);
    if !total.is_finite() {
        return Err(Error::CensoredIncompatible);
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, lw) in logw.iter().enumerate() {
        acc += (lw - total).exp();
        if u < acc {
            return Ok(j);
        }
    }
    // Rounding left u above the final cumulative sum; take the last
    // state with positive weight.
    Ok(logw.iter().rposition(|w| w.is_finite()).expect("finite total"))
}

/// Draws the fictitious quantile of an `m = 0` transition. With
/// `g = K (t / theta)^alpha` (`K` the `b(alpha)` multiplier), `g` follows a
/// `Gamma(1 + 1/alpha, 1)` law truncated to the image of `[min, max]`; the
/// draw inverts its regularized incomplete gamma function.
pub fn sample_fictitious_tq<R: Rng + ?Sized>(
    alpha: f64,
    theta: f64,
    range: (f64, f64),
    log_mult: f64,
    rng: &mut R,
) -> f64 {
    let (min, max) = range;
    let u: f64 = rng.random();
    if !(max > min) {
        return min;
    }
    let a = 1.0 + 1.0 / alpha;
    let to_g = |t: f64| (log_mult + alpha * (t.ln() - theta.ln())).exp();
    let (g_lo, g_hi) = (to_g(min), to_g(max));
    // Work with whichever tail keeps precision.
    let upper_tail = g_lo > a;
    let cdf = |g: f64| if upper_tail { gamma_ur(a, g) } else { gamma_lr(a, g) };
    let (c_lo, c_hi) = (cdf(g_lo), cdf(g_hi));
    let mass = (c_hi - c_lo).abs();
    if !(mass > 1e-300) || !mass.is_finite() {
        log::warn!(
            "fictitious quantile: truncated mass underflows (alpha = {alpha}, theta = {theta}); \
             drawing uniformly on [{min}, {max}]"
        );
        return min + u * (max - min);
    }
    let target = c_lo + u * (c_hi - c_lo);
    // Bisection on ln t: cdf is monotone in t (increasing for P, decreasing
    // for Q; the target interpolates between the end values either way).
    let (mut lo, mut hi) = (min.ln(), max.ln());
    let increasing = c_hi > c_lo;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let c = cdf(to_g(mid.exp()));
        if (c < target) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    (0.5 * (lo + hi)).exp().clamp(min, max)
}

/// Which coordinates the sampler updates each sweep. Disabled coordinates
/// stay at their initial values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct UpdateFlags {
    pub latent: bool,
    pub fictitious: bool,
    pub alpha: bool,
    pub theta: bool,
    pub p: bool,
}

impl Default for UpdateFlags {
    fn default() -> Self {
        Self {
            latent: true,
            fictitious: true,
            alpha: true,
            theta: true,
            p: true,
        }
    }
}

/// Optional starting values overriding the default initialization.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitialValues {
    pub p: Option<Matrix<f64>>,
    pub alpha: Option<Matrix<f64>>,
    pub theta: Option<Matrix<f64>>,
    /// Zero-based.
    pub j_next: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GibbsConfig {
    pub n_iter: usize,
    pub n_burnin: usize,
    pub thin: usize,
    pub n_chains: usize,
    pub seed: u64,
    pub ars_init_points: usize,
    pub max_rejections: usize,
    pub updates: UpdateFlags,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<InitialValues>,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            n_iter: 20_000,
            n_burnin: 5_000,
            thin: 5,
            n_chains: 4,
            seed: 0,
            ars_init_points: 3,
            max_rejections: 200,
            updates: UpdateFlags::default(),
            init: None,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_iter <= self.n_burnin {
            return bad("n_iter must exceed n_burnin");
        }
        if self.thin == 0 {
            return bad("thin must be at least 1");
        }
        if self.n_chains == 0 {
            return bad("n_chains must be at least 1");
        }
        if self.ars_init_points < 3 {
            return bad("ars_init_points must be at least 3");
        }
        Ok(())
    }

    /// Retained draws per chain.
    pub fn draws_per_chain(&self) -> usize {
        (self.n_iter - self.n_burnin) / self.thin
    }

    fn ars_options(&self) -> ArsOptions {
        ArsOptions {
            init_points: self.ars_init_points,
            max_rejections: self.max_rejections,
            ..ArsOptions::default()
        }
    }
}

/// One configuration of the sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub chain: usize,
    pub sweep: usize,
    pub p: Matrix<f64>,
    pub alpha: Matrix<f64>,
    pub theta: Matrix<f64>,
    /// Zero-based latent state; `None` without a censored tail.
    pub j_next: Option<usize>,
    /// Current fictitious quantile for `m = 0` transitions.
    pub tq_fict: Matrix<Option<f64>>,
}

#[derive(Serialize, Deserialize)]
struct DrawWire {
    chain: usize,
    sweep: usize,
    p: Vec<f64>,
    alpha: Vec<f64>,
    theta: Vec<f64>,
    j_next: Option<usize>,
    tq_fict: Vec<Option<f64>>,
}

fn square(v: Vec<f64>, what: &str) -> Result<Matrix<f64>> {
    let s = (v.len() as f64).sqrt().round() as usize;
    if s * s != v.len() {
        return Err(Error::InvalidConfig(format!(
            "{what} has {} entries, not a square",
            v.len()
        )));
    }
    Ok(Matrix::from_fn(s, |i, j| v[i * s + j]))
}

impl ChainState {
    fn to_wire(&self) -> DrawWire {
        DrawWire {
            chain: self.chain,
            sweep: self.sweep,
            p: self.p.as_slice().to_vec(),
            alpha: self.alpha.as_slice().to_vec(),
            theta: self.theta.as_slice().to_vec(),
            j_next: self.j_next.map(|j| j + 1),
            tq_fict: self.tq_fict.as_slice().to_vec(),
        }
    }

    fn from_wire(w: DrawWire) -> Result<Self> {
        let s = (w.tq_fict.len() as f64).sqrt().round() as usize;
        if s * s != w.tq_fict.len() {
            return Err(Error::InvalidConfig("tq_fict is not square".into()));
        }
        Ok(Self {
            chain: w.chain,
            sweep: w.sweep,
            p: square(w.p, "p")?,
            alpha: square(w.alpha, "alpha")?,
            theta: square(w.theta, "theta")?,
            j_next: match w.j_next {
                Some(0) => return Err(Error::InvalidConfig("j_next is one-based".into())),
                other => other.map(|j| j - 1),
            },
            tq_fict: Matrix::from_fn(s, |i, j| w.tq_fict[i * s + j]),
        })
    }
}

/// Run metadata stored next to the draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub config: GibbsConfig,
    pub num_states: usize,
    pub prior_digest: String,
    pub data_digest: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub draws: Vec<ChainState>,
    pub meta: ChainMeta,
}

impl ChainOutput {
    pub fn num_states(&self) -> usize {
        self.meta.num_states
    }

    /// Draws of a single chain, in sweep order.
    pub fn chain(&self, chain: usize) -> impl Iterator<Item = &ChainState> {
        self.draws.iter().filter(move |d| d.chain == chain)
    }

    pub fn n_chains(&self) -> usize {
        self.draws.iter().map(|d| d.chain + 1).max().unwrap_or(0)
    }

    /// Concatenates the draws of two outputs; chains of `other` are
    /// renumbered after those of `self`.
    pub fn merge(mut self, other: ChainOutput) -> ChainOutput {
        let offset = self.n_chains();
        self.draws.extend(other.draws.into_iter().map(|mut d| {
            d.chain += offset;
            d
        }));
        self
    }

    /// One JSON object per retained draw, flattened row-major.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for d in &self.draws {
            serde_json::to_writer(&mut w, &d.to_wire())?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R, meta: ChainMeta) -> Result<Self> {
        let mut draws = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            draws.push(ChainState::from_wire(serde_json::from_str(&line)?)?);
        }
        Ok(Self { draws, meta })
    }
}

/// SHA-256 of the compact JSON encoding.
pub fn json_digest<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable");
    hex::encode(Sha256::digest(&bytes))
}

/// Per-transition data prepared once per run.
struct Prepared<'a> {
    stats: &'a TransitionStats,
    priors: &'a PriorSet,
    data: Matrix<TransitionData>,
    log_mult: Matrix<f64>,
}

impl Prepared<'_> {
    fn censored_for(&self, j_next: Option<usize>, i: usize, j: usize) -> Option<f64> {
        (self.stats.has_censored_tail() && self.stats.last_state == i && j_next == Some(j))
            .then_some(self.stats.censored)
    }
}

fn initial_state(prep: &Prepared, config: &GibbsConfig, chain: usize, rng: &mut ChaCha8Rng) -> Result<ChainState> {
    let s = prep.stats.num_states();
    let priors = prep.priors;
    let tq_fict = Matrix::from_fn(s, |i, j| match priors.get(i, j).quantile {
        QuantileSpec::Fictitious { min, max } => Some(0.5 * (min + max)),
        QuantileSpec::Fixed(_) => None,
    });
    let init = config.init.clone().unwrap_or_default();
    let p = init.p.unwrap_or_else(|| priors.dirichlet.mean());
    let alpha = init.alpha.unwrap_or_else(|| {
        Matrix::from_fn(s, |i, j| {
            let pr = priors.get(i, j);
            let a = (pr.alpha0 + 0.01).max(1.0);
            pr.alpha1.map_or(a, |a1| a.min(0.5 * (pr.alpha0 + a1)))
        })
    });
    let theta = init.theta.unwrap_or_else(|| {
        Matrix::from_fn(s, |i, j| {
            priors.get(i, j).fixed_quantile().or(tq_fict[(i, j)]).expect("quantile")
        })
    });
    for m in [&p, &alpha, &theta] {
        if m.dim() != s {
            return Err(Error::InvalidConfig("initial value has wrong dimension".into()));
        }
    }
    let j_next = if prep.stats.has_censored_tail() {
        let drawn = rng.random_range(0..s);
        Some(init.j_next.unwrap_or(drawn))
    } else {
        None
    };
    if j_next.is_some_and(|j| j >= s) {
        return Err(Error::InvalidConfig("initial j_next out of range".into()));
    }
    Ok(ChainState {
        chain,
        sweep: 0,
        p,
        alpha,
        theta,
        j_next,
        tq_fict,
    })
}

fn sweep(
    prep: &Prepared,
    state: &mut ChainState,
    flags: &UpdateFlags,
    opts: &ArsOptions,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let s = prep.stats.num_states();
    let abort = |coordinate: String, e: Error| Error::ChainAborted {
        chain: state.chain,
        sweep: state.sweep,
        coordinate,
        source: Box::new(e),
    };

    if flags.latent && prep.stats.has_censored_tail() {
        let j = sample_latent_next_state(
            &state.p,
            &state.alpha,
            &state.theta,
            prep.stats.last_state,
            prep.stats.censored,
            rng,
        )
        .map_err(|e| abort("j_next".into(), e))?;
        state.j_next = Some(j);
    }
    if flags.fictitious {
        for i in 0..s {
            for j in 0..s {
                if let QuantileSpec::Fictitious { min, max } = prep.priors.get(i, j).quantile {
                    let t = sample_fictitious_tq(
                        state.alpha[(i, j)],
                        state.theta[(i, j)],
                        (min, max),
                        prep.log_mult[(i, j)],
                        rng,
                    );
                    state.tq_fict[(i, j)] = Some(t);
                }
            }
        }
    }
    let tq_eff = |st: &ChainState, i: usize, j: usize| {
        prep.priors
            .get(i, j)
            .fixed_quantile()
            .or(st.tq_fict[(i, j)])
            .expect("quantile")
    };
    if flags.alpha {
        for i in 0..s {
            for j in 0..s {
                let a = sample_alpha(
                    &prep.data[(i, j)],
                    state.theta[(i, j)],
                    prep.censored_for(state.j_next, i, j),
                    prep.priors.get(i, j),
                    tq_eff(state, i, j),
                    opts,
                    rng,
                )
                .map_err(|e| abort(format!("alpha[{},{}]", i + 1, j + 1), e))?;
                state.alpha[(i, j)] = a;
            }
        }
    }
    if flags.theta {
        for i in 0..s {
            for j in 0..s {
                let t = sample_theta(
                    state.alpha[(i, j)],
                    &prep.data[(i, j)],
                    prep.censored_for(state.j_next, i, j),
                    prep.priors.get(i, j),
                    tq_eff(state, i, j),
                    rng,
                )
                .map_err(|e| abort(format!("theta[{},{}]", i + 1, j + 1), e))?;
                state.theta[(i, j)] = t;
            }
        }
    }
    if flags.p {
        state.p = sample_p_rows(prep.stats, state.j_next, &prep.priors.dirichlet, rng);
    }
    Ok(())
}

fn run_chain(prep: &Prepared, config: &GibbsConfig, chain: usize) -> Result<Vec<ChainState>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(chain as u64);
    let opts = config.ars_options();
    let mut state = initial_state(prep, config, chain, &mut rng)?;
    let mut kept = Vec::with_capacity(config.draws_per_chain());
    for t in 0..config.n_iter {
        state.sweep = t;
        sweep(prep, &mut state, &config.updates, &opts, &mut rng)?;
        if t >= config.n_burnin && (t - config.n_burnin + 1).is_multiple_of(config.thin) {
            kept.push(state.clone());
        }
    }
    Ok(kept)
}

/// Runs `n_chains` independent chains (in parallel) and concatenates their
/// retained draws in chain order. Chain `k` uses stream `k` of a ChaCha8
/// generator seeded with `config.seed`, so output does not depend on the
/// thread count.
pub fn run_gibbs(stats: &TransitionStats, priors: &PriorSet, config: &GibbsConfig) -> Result<ChainOutput> {
    config.validate()?;
    priors.validate()?;
    let s = stats.num_states();
    if priors.num_states != s {
        return Err(Error::InvalidConfig(format!(
            "priors cover {} states, data has {s}",
            priors.num_states
        )));
    }
    let prep = Prepared {
        stats,
        priors,
        data: stats.times.map(|t| TransitionData::from_times(t)),
        log_mult: priors
            .transitions
            .as_slice()
            .iter()
            .map(|p| p.log_multiplier())
            .collect::<Result<Vec<f64>>>()
            .map(|v| Matrix::from_fn(s, |i, j| v[i * s + j]))?,
    };
    let chains: Vec<Vec<ChainState>> = (0..config.n_chains)
        .into_par_iter()
        .map(|c| run_chain(&prep, config, c))
        .collect::<Result<_>>()?;
    Ok(ChainOutput {
        draws: chains.into_iter().flatten().collect(),
        meta: ChainMeta {
            config: config.clone(),
            num_states: s,
            prior_digest: json_digest(priors),
            data_digest: json_digest(stats),
        },
    })
}
