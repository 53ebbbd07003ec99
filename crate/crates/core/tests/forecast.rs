mod common;

use common::apennine_like_model;
use mrp::catalog::{add_days, build_sequence_until, parse_date, StateSpace};
use mrp::forecast::{
    backtest, backtest_one, csp, csp_posterior, fit_sequence, standard_horizons, FitSettings, DAYS_PER_YEAR,
};
use mrp::sampler::GibbsConfig;
use mrp::simulate::{generate_mrp, sequence_to_catalog};
use mrp::Matrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_settings(seed: u64) -> FitSettings {
    FitSettings {
        min_count: 1,
        gibbs: GibbsConfig {
            n_iter: 600,
            n_burnin: 200,
            thin: 2,
            n_chains: 2,
            seed,
            ..GibbsConfig::default()
        },
        ..FitSettings::default()
    }
}

/// Rejection sampling of the next transition given that none happened in
/// the first `t0` days.
#[test]
fn matches_conditional_simulation() {
    let m = apennine_like_model();
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let (i, t0) = (1, 180.0);
    let horizons = [30.44, 365.25, 1000.0];
    let n = 200_000;
    let mut hits = vec![vec![0usize; horizons.len()]; 3];
    let mut kept = 0;
    while kept < n {
        let u: f64 = rng.random();
        let j = if u < m.p[(i, 0)] {
            0
        } else if u < m.p[(i, 0)] + m.p[(i, 1)] {
            1
        } else {
            2
        };
        let e: f64 = -(1.0 - rng.random::<f64>()).ln();
        let x = m.theta[(i, j)] * e.powf(1.0 / m.alpha[(i, j)]);
        if x <= t0 {
            continue;
        }
        kept += 1;
        for (h, &dx) in horizons.iter().enumerate() {
            if x <= t0 + dx {
                hits[j][h] += 1;
            }
        }
    }
    for (h, &dx) in horizons.iter().enumerate() {
        let exact = csp(&m.p, &m.alpha, &m.theta, i, t0, dx).unwrap();
        for j in 0..3 {
            let f = hits[j][h] as f64 / n as f64;
            let se = (exact[j] * (1.0 - exact[j]) / n as f64).sqrt();
            assert!((f - exact[j]).abs() < 4.0 * se, "j={j} dx={dx}: {f} vs {}", exact[j]);
        }
    }
}

#[test]
fn backtest_equals_a_direct_fit() {
    let model = apennine_like_model();
    let seq = generate_mrp(&model, 80_000.0, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let space = StateSpace::new(vec![4.5, 4.9, 5.3]).unwrap();
    let origin = parse_date("1950-01-01").unwrap();
    let catalog = sequence_to_catalog(&seq, &space, &origin).unwrap();
    let end = add_days(&origin, 60_000.0);
    let settings = small_settings(3);
    let horizons = standard_horizons();

    let bt = backtest_one(&catalog, &space, &end, &settings, &horizons, 0.9).unwrap();
    let direct_seq = build_sequence_until(&catalog.truncated(&end), &space, &end).unwrap();
    let fit = fit_sequence(&direct_seq, &settings).unwrap();
    let table = csp_posterior(
        &fit.output,
        direct_seq.last_state(),
        direct_seq.censored(),
        &horizons,
        0.9,
    )
    .unwrap();
    assert_eq!(bt.table, table);
    assert_eq!(bt.cut, fit.split.cut);

    let realized = bt.realized.expect("events continue past the end date");
    let next = catalog.next_after(&end).unwrap();
    assert_eq!(realized.state, space.classify(next.magnitude).unwrap());
    assert!(realized.delay_days > 0.0);
    assert!((0.0..=1.0).contains(&realized.pit));

    // The parallel driver returns the same table, in date order.
    let early = add_days(&origin, 1_000.0);
    let entries = backtest(&catalog, &space, &[end, early], &settings, &horizons, 0.9);
    assert_eq!(entries[0].end, end);
    assert_eq!(entries[0].outcome.as_ref().unwrap().table, table);
    assert_eq!(entries[1].end, early);
    assert!(entries[1].outcome.as_ref().unwrap_err().contains("visits"));
}

#[test]
fn posterior_table_is_consistent() {
    let model = apennine_like_model();
    let seq = generate_mrp(&model, 30_000.0, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    let fit = fit_sequence(&seq, &small_settings(4)).unwrap();
    let mut horizons = standard_horizons();
    horizons.push(f64::INFINITY);
    let t = csp_posterior(&fit.output, 0, 100.0, &horizons, 0.9).unwrap();
    assert_eq!(t.cells.len(), 3);
    let last = horizons.len() - 1;
    let total: f64 = (0..3).map(|j| t.cells[j][last].mean).sum();
    assert!((total - 1.0).abs() < 1e-9, "sum at infinity = {total}");
    for row in &t.cells {
        for w in row.windows(2) {
            assert!(w[1].mean >= w[0].mean - 1e-15);
        }
        for b in row {
            assert!(b.lower <= b.median && b.median <= b.upper);
            assert!(b.lower <= b.mean && b.mean <= b.upper);
        }
    }
    assert_eq!(t.rows().len(), 3 * horizons.len());
}

fn random_params(rng: &mut ChaCha8Rng, s: usize) -> (Matrix<f64>, Matrix<f64>, Matrix<f64>) {
    let p = Matrix::from_rows(
        (0..s)
            .map(|_| {
                let w: Vec<f64> = (0..s).map(|_| rng.random_range(0.05..1.0)).collect();
                let t: f64 = w.iter().sum();
                w.into_iter().map(|x| x / t).collect()
            })
            .collect(),
    )
    .unwrap();
    let alpha = Matrix::from_fn(s, |_, _| rng.random_range(0.5..3.0));
    let theta = Matrix::from_fn(s, |_, _| rng.random_range(50.0..2_000.0));
    (p, alpha, theta)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Rescaling every time by the same factor leaves the probabilities
    /// unchanged.
    #[test]
    fn scale_equivariance(seed in any::<u64>(), c in 0.01f64..100.0, t0 in 0.0f64..3_000.0, dx in 0.0f64..5_000.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, alpha, theta) = random_params(&mut rng, 3);
        let scaled = theta.map(|t| t * c);
        for i in 0..3 {
            let a = csp(&p, &alpha, &theta, i, t0, dx).unwrap();
            let b = csp(&p, &alpha, &scaled, i, c * t0, c * dx).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-12 + 1e-9 * x.abs(), "{} vs {}", x, y);
            }
        }
    }

    #[test]
    fn bounded_and_normalized(seed in any::<u64>(), t0 in 0.0f64..5.0 * DAYS_PER_YEAR, dx in 0.0f64..1e5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, alpha, theta) = random_params(&mut rng, 4);
        for i in 0..4 {
            let finite = csp(&p, &alpha, &theta, i, t0, dx).unwrap();
            let inf = csp(&p, &alpha, &theta, i, t0, f64::INFINITY).unwrap();
            prop_assert!((inf.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for (f, g) in finite.iter().zip(&inf) {
                prop_assert!(*f >= 0.0 && *f <= *g + 1e-15);
            }
        }
    }
}
