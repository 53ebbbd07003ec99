//! Adaptive rejection sampling for log-concave densities (Gilks & Wild).
//!
//! The log-density `h` is bounded above by the piecewise-linear hull of its
//! tangents at a sorted set of abscissae and below by the chords joining
//! them. A candidate drawn from the exponentiated upper hull is accepted by
//! the squeeze test when possible; otherwise `h` is evaluated and the point
//! joins the abscissae, tightening both bounds. Draws are exact.

use rand::Rng;

use crate::error::{Error, Result};
use crate::stats::log_sum_exp;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArsOptions {
    /// Number of initial abscissae (at least 3).
    pub init_points: usize,
    /// Rejections tolerated for a single draw before giving up.
    pub max_rejections: usize,
    /// Upper limit on hull size; further rejections stop refining.
    pub max_points: usize,
    /// First offset from a finite bound when the other bound is infinite.
    pub initial_step: f64,
}

impl Default for ArsOptions {
    fn default() -> Self {
        Self {
            init_points: 3,
            max_rejections: 200,
            max_points: 64,
            initial_step: 1.0,
        }
    }
}

const MAX_NUDGES: usize = 10;
const MAX_DOUBLINGS: usize = 80;

#[derive(Debug, Clone, Copy)]
struct Knot {
    x: f64,
    h: f64,
    dh: f64,
}

struct Hull {
    lo: f64,
    hi: f64,
    knots: Vec<Knot>,
    /// Segment boundaries: `z[0] = lo`, `z[k] = hi`, tangent `k` lives on
    /// `[z[k], z[k + 1]]`.
    z: Vec<f64>,
    /// Normalized cumulative segment masses.
    cum: Vec<f64>,
}

impl Hull {
    fn new(lo: f64, hi: f64, mut knots: Vec<Knot>) -> Result<Self> {
        knots.sort_by(|a, b| a.x.total_cmp(&b.x));
        knots.dedup_by(|a, b| a.x == b.x);
        let mut hull = Hull {
            lo,
            hi,
            knots,
            z: Vec::new(),
            cum: Vec::new(),
        };
        hull.rebuild()?;
        Ok(hull)
    }

    fn insert(&mut self, knot: Knot) -> Result<()> {
        let pos = self.knots.partition_point(|k| k.x < knot.x);
        if self.knots.get(pos).is_some_and(|k| k.x == knot.x) {
            return Ok(());
        }
        self.knots.insert(pos, knot);
        self.rebuild()
    }

    fn rebuild(&mut self) -> Result<()> {
        let k = &self.knots;
        for w in k.windows(2) {
            let tol = 1e-9 * (1.0 + w[0].dh.abs().max(w[1].dh.abs()));
            if w[1].dh > w[0].dh + tol {
                return Err(Error::NotLogConcave { x: w[1].x });
            }
        }
        let first = k.first().ok_or_else(|| Error::ArsSetup("no abscissae".into()))?;
        let last = k.last().expect("non-empty");
        if self.lo == f64::NEG_INFINITY && !(first.dh > 0.0) {
            return Err(Error::ArsSetup(
                "leftmost tangent must rise on an unbounded left tail".into(),
            ));
        }
        if self.hi == f64::INFINITY && !(last.dh < 0.0) {
            return Err(Error::ArsSetup(
                "rightmost tangent must fall on an unbounded right tail".into(),
            ));
        }

        let mut z = Vec::with_capacity(k.len() + 1);
        z.push(self.lo);
        for w in k.windows(2) {
            let (a, b) = (w[0], w[1]);
            let zi = if (a.dh - b.dh).abs() > 1e-12 * (1.0 + a.dh.abs()) {
                (b.h - a.h - b.x * b.dh + a.x * a.dh) / (a.dh - b.dh)
            } else {
                0.5 * (a.x + b.x)
            };
            let zi = if zi.is_finite() {
                zi.clamp(a.x, b.x)
            } else {
                0.5 * (a.x + b.x)
            };
            z.push(zi);
        }
        z.push(self.hi);

        let log_mass: Vec<f64> = k
            .iter()
            .enumerate()
            .map(|(s, knot)| segment_log_mass(knot, z[s], z[s + 1]))
            .collect::<Result<_>>()?;
        let total = log_sum_exp(&log_mass);
        if !total.is_finite() {
            return Err(Error::ArsSetup("envelope mass is not finite".into()));
        }
        let mut acc = 0.0;
        self.cum = log_mass
            .iter()
            .map(|lm| {
                acc += (lm - total).exp();
                acc
            })
            .collect();
        self.z = z;
        Ok(())
    }

    fn upper(&self, x: f64) -> f64 {
        // Segment s covers [z[s], z[s+1]].
        let s = (self.z[1..self.z.len() - 1].partition_point(|&zz| zz < x)).min(self.knots.len() - 1);
        let k = self.knots[s];
        k.h + k.dh * (x - k.x)
    }

    fn lower(&self, x: f64) -> f64 {
        let k = &self.knots;
        if x < k[0].x || x > k[k.len() - 1].x {
            return f64::NEG_INFINITY;
        }
        let pos = k.partition_point(|kn| kn.x < x);
        if pos == 0 {
            return k[0].h;
        }
        let (a, b) = (k[pos - 1], k[pos]);
        ((b.x - x) * a.h + (x - a.x) * b.h) / (b.x - a.x)
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let s = self.cum.partition_point(|&c| c < u).min(self.knots.len() - 1);
        let v: f64 = rng.random();
        let x = sample_segment(&self.knots[s], self.z[s], self.z[s + 1], v);
        x.clamp(self.z[s], self.z[s + 1])
    }
}

/// `ln ∫ exp(h + dh (x - x_k))` over `[zl, zr]`.
fn segment_log_mass(k: &Knot, zl: f64, zr: f64) -> Result<f64> {
    let w = zr - zl;
    if !(w > 0.0) {
        return Ok(f64::NEG_INFINITY);
    }
    let d = k.dh;
    if w.is_finite() && (d * w).abs() < 1e-10 {
        return Ok(k.h + d * (0.5 * (zl + zr) - k.x) + w.ln());
    }
    if d > 0.0 {
        if zr == f64::INFINITY {
            return Err(Error::ArsSetup("rising tangent on unbounded segment".into()));
        }
        let u_r = k.h + d * (zr - k.x);
        Ok(u_r + (-(-d * w).exp_m1()).ln() - d.ln())
    } else if d < 0.0 {
        if zl == f64::NEG_INFINITY {
            return Err(Error::ArsSetup("falling tangent on unbounded segment".into()));
        }
        let u_l = k.h + d * (zl - k.x);
        Ok(u_l + (-(d * w).exp_m1()).ln() - (-d).ln())
    } else {
        Err(Error::ArsSetup("flat tangent on unbounded segment".into()))
    }
}

/// Inverse CDF of the truncated exponential `exp(dh x)` on `[zl, zr]`.
fn sample_segment(k: &Knot, zl: f64, zr: f64, v: f64) -> f64 {
    let w = zr - zl;
    let d = k.dh;
    if w.is_finite() && (d * w).abs() < 1e-10 {
        return zl + v * w;
    }
    if d > 0.0 {
        // Anchored at the right end to avoid overflow of exp(d w).
        zr + (v + (1.0 - v) * (-d * w).exp()).ln() / d
    } else {
        zl + (v * (d * w).exp_m1()).ln_1p() / d
    }
}

fn eval<F: FnMut(f64) -> (f64, f64)>(f: &mut F, x: f64) -> Option<Knot> {
    let (h, dh) = f(x);
    (h.is_finite() && dh.is_finite()).then_some(Knot { x, h, dh })
}

/// Evaluates at `x`, moving the point into the interior up to ten times when
/// the log-density or its slope is not finite there.
fn eval_nudged<F: FnMut(f64) -> (f64, f64)>(f: &mut F, mut x: f64, lo: f64, hi: f64) -> Result<Knot> {
    let start = x;
    for _ in 0..=MAX_NUDGES {
        if let Some(k) = eval(f, x) {
            return Ok(k);
        }
        x = match (lo.is_finite(), hi.is_finite()) {
            (true, true) => x + 0.5 * (0.5 * (lo + hi) - x),
            (true, false) => lo + 2.0 * (x - lo),
            (false, true) => hi - 2.0 * (hi - x),
            (false, false) => 0.5 * x,
        };
    }
    Err(Error::ArsSetup(format!(
        "log-density not finite near initial abscissa {start}"
    )))
}

/// Finds a point with a falling tangent by walking from `start` towards
/// `hi`: doubling steps on an unbounded side, halving the remaining gap on a
/// bounded one, and bisecting back when the density underflows. Every
/// rising point met on the way is pushed to `seen`.
fn search_up<F: FnMut(f64) -> (f64, f64)>(
    f: &mut F,
    start: Knot,
    hi: f64,
    step: f64,
    seen: &mut Vec<Knot>,
) -> Option<Knot> {
    let mut good = start;
    let mut bad: Option<f64> = None;
    let mut offset = step;
    for _ in 0..4 * MAX_DOUBLINGS {
        let x = match bad {
            Some(b) => 0.5 * (good.x + b),
            None if hi.is_finite() => good.x + 0.5 * (hi - good.x),
            None => good.x + offset,
        };
        offset *= 2.0;
        if !(x > good.x && x < hi) {
            return None;
        }
        match eval(f, x) {
            Some(k) if k.dh < 0.0 => return Some(k),
            Some(k) => {
                seen.push(k);
                good = k;
            }
            None => bad = Some(x),
        }
    }
    None
}

/// Mirror image of [`search_up`].
fn search_down<F: FnMut(f64) -> (f64, f64)>(
    f: &mut F,
    start: Knot,
    lo: f64,
    step: f64,
    seen: &mut Vec<Knot>,
) -> Option<Knot> {
    let mut mirrored = |x: f64| {
        let (h, dh) = f(-x);
        (h, -dh)
    };
    let flip = |k: Knot| Knot {
        x: -k.x,
        h: k.h,
        dh: -k.dh,
    };
    let mut seen_m = Vec::new();
    let found = search_up(&mut mirrored, flip(start), -lo, step, &mut seen_m);
    seen.extend(seen_m.into_iter().map(flip));
    found.map(flip)
}

/// Narrows a bracket `a.dh > 0 > b.dh` around the mode until it spans about
/// one curvature scale. Secant steps, with bisection while the slopes are
/// too lopsided for a secant to make progress.
fn refine_mode<F: FnMut(f64) -> (f64, f64)>(f: &mut F, mut a: Knot, mut b: Knot) -> (Knot, Knot) {
    for _ in 0..100 {
        let w = b.x - a.x;
        let curvature = (a.dh - b.dh) / w;
        let sigma = curvature.sqrt().recip();
        if !(w > sigma) || !(w > 1e-12 * (1.0 + a.x.abs())) {
            break;
        }
        let ratio = a.dh / -b.dh;
        let x = if (1e-3..=1e3).contains(&ratio) {
            let x = a.x + a.dh / curvature;
            x.clamp(a.x + 0.01 * w, b.x - 0.01 * w)
        } else {
            0.5 * (a.x + b.x)
        };
        match eval(f, x) {
            Some(k) if k.dh < 0.0 => b = k,
            Some(k) if k.dh > 0.0 => a = k,
            Some(k) => return (k, k),
            None => break,
        }
    }
    (a, b)
}

fn initial_knots<F: FnMut(f64) -> (f64, f64)>(f: &mut F, lo: f64, hi: f64, opts: &ArsOptions) -> Result<Vec<Knot>> {
    let n = opts.init_points.max(3);
    let step = opts.initial_step;
    let x0 = match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo + step,
        (false, true) => hi - step,
        (false, false) => 0.0,
    };
    let k0 = eval_nudged(f, x0, lo, hi)?;
    let mut seen = vec![k0];
    let (rising, falling) = if k0.dh > 0.0 {
        (Some(k0), search_up(f, k0, hi, step, &mut seen))
    } else if k0.dh < 0.0 {
        (search_down(f, k0, lo, step, &mut seen), Some(k0))
    } else {
        (Some(k0), Some(k0))
    };
    if rising.is_none() && lo == f64::NEG_INFINITY {
        return Err(Error::ArsSetup("no mode found on the left tail".into()));
    }
    if falling.is_none() && hi == f64::INFINITY {
        return Err(Error::ArsSetup("no mode found on the right tail".into()));
    }
    let (Some(a), Some(b)) = (rising, falling) else {
        // Monotone up to a finite bound: the points met on the way suffice.
        seen.extend(rising.or(falling));
        seen.sort_by(|p, q| p.x.total_cmp(&q.x));
        let near_bound = if rising.is_some() {
            seen.split_off(seen.len().saturating_sub(n))
        } else {
            seen.truncate(n);
            seen
        };
        return Ok(near_bound);
    };
    let (a, b) = if a.x < b.x { refine_mode(f, a, b) } else { (a, b) };

    // Knots spread over +-2 sd of a quadratic fit at the mode.
    let (mode, sigma) = if a.x < b.x {
        let curvature = (a.dh - b.dh) / (b.x - a.x);
        (a.x + a.dh / curvature, curvature.sqrt().recip())
    } else {
        // Exact stationary point; probe for the local scale.
        let probe = step.min(if hi.is_finite() { 0.5 * (hi - a.x) } else { step });
        let c = eval(f, a.x + probe).map_or(1.0, |k| -k.dh / probe);
        (a.x, if c > 0.0 { c.sqrt().recip() } else { probe })
    };
    let mut knots = Vec::with_capacity(n + 2);
    for k in 0..n {
        let t = -2.0 + 4.0 * k as f64 / (n - 1) as f64;
        let mut x = mode + t * sigma;
        if !(x > lo) {
            x = lo + 0.5 * (a.x.min(mode) - lo);
        }
        if !(x < hi) {
            x = hi - 0.5 * (hi - b.x.max(mode));
        }
        knots.extend(eval(f, x));
    }
    // Unbounded tails need a rising knot on the left and a falling one on
    // the right.
    if !knots.iter().any(|k| k.dh > 0.0) {
        knots.push(a);
    }
    if !knots.iter().any(|k| k.dh < 0.0) {
        knots.push(b);
    }
    Ok(knots)
}

/// Draws one exact sample from the density proportional to `exp(h)` on
/// `(lo, hi)`. `log_density` returns `(h(x), h'(x))`; `h` must be concave
/// and finite in the interior. Either bound may be infinite.
pub fn ars_sample<F, R>(mut log_density: F, lo: f64, hi: f64, opts: &ArsOptions, rng: &mut R) -> Result<f64>
where
    F: FnMut(f64) -> (f64, f64),
    R: Rng + ?Sized,
{
    if !(lo < hi) || lo.is_nan() || hi.is_nan() {
        return Err(Error::ArsSetup(format!("empty support ({lo}, {hi})")));
    }
    let knots = initial_knots(&mut log_density, lo, hi, opts)?;
    let mut hull = Hull::new(lo, hi, knots)?;
    let mut rejections = 0;
    loop {
        let x = hull.draw(rng);
        let log_w = rng.random::<f64>().ln();
        let upper = hull.upper(x);
        if log_w <= hull.lower(x) - upper {
            return Ok(x);
        }
        let (h, dh) = log_density(x);
        if h.is_finite() && h > upper + 1e-9 * upper.abs().max(1.0) {
            return Err(Error::NotLogConcave { x });
        }
        if log_w <= h - upper {
            return Ok(x);
        }
        rejections += 1;
        if rejections > opts.max_rejections {
            return Err(Error::TooManyRejections {
                limit: opts.max_rejections,
            });
        }
        if h.is_finite() && dh.is_finite() && hull.knots.len() < opts.max_points && x > lo && x < hi {
            hull.insert(Knot { x, h, dh })?;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_on_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let opts = ArsOptions::default();
        let xs: Vec<f64> = (0..20_000)
            .map(|_| ars_sample(|_| (0.0, 0.0), 2.0, 4.0, &opts, &mut rng).unwrap())
            .collect();
        assert!(xs.iter().all(|x| (2.0..=4.0).contains(x)));
        assert!((crate::stats::mean(&xs) - 3.0).abs() < 0.02);
    }

    #[test]
    fn standard_normal_unbounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let opts = ArsOptions::default();
        let xs: Vec<f64> = (0..20_000)
            .map(|_| {
                ars_sample(
                    |x| (-0.5 * x * x, -x),
                    f64::NEG_INFINITY,
                    f64::INFINITY,
                    &opts,
                    &mut rng,
                )
                .unwrap()
            })
            .collect();
        assert!(crate::stats::mean(&xs).abs() < 0.03);
        assert!((crate::stats::std_dev(&xs) - 1.0).abs() < 0.03);
    }

    #[test]
    fn left_unbounded_tail() {
        // Reflected exponential on (-inf, 0): mean -1.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let opts = ArsOptions::default();
        let xs: Vec<f64> = (0..20_000)
            .map(|_| ars_sample(|x| (x, 1.0), f64::NEG_INFINITY, 0.0, &opts, &mut rng).unwrap())
            .collect();
        assert!((crate::stats::mean(&xs) + 1.0).abs() < 0.03);
    }

    #[test]
    fn convex_log_density_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let opts = ArsOptions::default();
        let mut failed = false;
        for _ in 0..50 {
            if let Err(e) = ars_sample(|x| (3.0 * x * x, 6.0 * x), -1.0, 1.0, &opts, &mut rng) {
                assert!(matches!(e, Error::NotLogConcave { .. }), "{e}");
                failed = true;
                break;
            }
        }
        assert!(failed);
    }

    #[test]
    fn non_finite_everywhere_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let err = ars_sample(|_| (f64::NAN, 0.0), 0.0, 1.0, &ArsOptions::default(), &mut rng).unwrap_err();
        assert!(matches!(err, Error::ArsSetup(_)));
    }

    #[test]
    fn boundary_singularity_is_nudged() {
        // ln x on (0, 1): -inf at 0 but fine inside; Beta(2, 1) has mean 2/3.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let opts = ArsOptions::default();
        let xs: Vec<f64> = (0..20_000)
            .map(|_| ars_sample(|x| (x.ln(), 1.0 / x), 0.0, 1.0, &opts, &mut rng).unwrap())
            .collect();
        assert!((crate::stats::mean(&xs) - 2.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn rising_density_without_right_bound_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let err = ars_sample(|x| (x, 1.0), 0.0, f64::INFINITY, &ArsOptions::default(), &mut rng).unwrap_err();
        assert!(matches!(err, Error::ArsSetup(_)));
    }
}
