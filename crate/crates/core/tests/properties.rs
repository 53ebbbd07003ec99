//! Structural invariants of the data pipeline on random inputs.

mod common;

use common::apennine_like_model;
use mrp::catalog::{split_catalog, sufficient_stats, SequenceData, StateSpace};
use mrp::prior::{elicit_priors, estimate_quantile};
use mrp::simulate::generate_mrp;
use mrp::weibull;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn path_strategy() -> impl Strategy<Value = SequenceData> {
    (2usize..5, 1usize..120, 0.0f64..500.0).prop_flat_map(|(s, n, cens)| {
        (
            prop::collection::vec(0..s, n + 1),
            prop::collection::vec(0.5f64..1_000.0, n),
        )
            .prop_map(move |(states, times)| SequenceData::new(states, times, cens, s).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn sufficient_statistics_add_up(seq in path_strategy()) {
        let st = sufficient_stats(&seq);
        prop_assert_eq!(st.total_transitions(), seq.num_transitions());
        let total_log: f64 = st.sum_log.as_slice().iter().sum();
        let direct: f64 = seq.times().iter().map(|x| x.ln()).sum();
        prop_assert!((total_log - direct).abs() < 1e-9 * (1.0 + direct.abs()));
        for ((i, j), times) in st.times.iter_indexed() {
            prop_assert_eq!(times.len(), st.counts[(i, j)]);
        }
        prop_assert_eq!(st.last_state, seq.last_state());
    }

    #[test]
    fn split_partitions_the_path(seq in path_strategy(), min_count in 1usize..3) {
        let Ok(split) = split_catalog(&seq, min_count) else {
            return Ok(());
        };
        let h = sufficient_stats(&split.historical);
        let c = sufficient_stats(&split.current);
        prop_assert!(h.counts.as_slice().iter().all(|&n| n >= min_count));
        prop_assert_eq!(h.total_transitions() + c.total_transitions(), seq.num_transitions());
        prop_assert_eq!(split.current.states()[0], *split.historical.states().last().unwrap());
        prop_assert_eq!(split.historical.censored(), 0.0);
        prop_assert_eq!(split.current.censored(), seq.censored());
        // The cut is the earliest possible: one event fewer is not enough.
        let shorter = SequenceData::new(
            seq.states()[..split.cut].to_vec(),
            seq.times()[..split.cut - 1].to_vec(),
            0.0,
            seq.num_states(),
        ).unwrap();
        let counts = sufficient_stats(&shorter).counts;
        prop_assert!(counts.as_slice().iter().any(|&n| n < min_count));
    }

    #[test]
    fn elicited_priors_are_proper(seed in any::<u64>()) {
        let model = apennine_like_model();
        let seq = generate_mrp(&model, 60_000.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let Ok(split) = split_catalog(&seq, 1) else {
            return Ok(());
        };
        let pr = elicit_priors(&sufficient_stats(&split.historical), 0.5, 1.0).unwrap();
        prop_assert!(pr.validate().is_ok());
        for r in &pr.repairs {
            prop_assert!(r.used_q > r.requested_q && r.used_q <= 0.95 + 1e-12);
        }
        for (_, row_total) in (0..3).map(|i| (i, pr.dirichlet.row_total(i))) {
            prop_assert!(row_total >= 3.0);
        }
    }

    #[test]
    fn classification_is_monotone(a in 4.5f64..8.0, b in 4.5f64..8.0) {
        let space = StateSpace::new(vec![4.5, 4.9, 5.3]).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(space.classify(lo).unwrap() <= space.classify(hi).unwrap());
    }

    #[test]
    fn weibull_quantile_inverts_cdf(p in 1e-9f64..0.999_999, alpha in 0.2f64..8.0, theta in 1.0f64..1e4) {
        let x = weibull::quantile(p, alpha, theta);
        prop_assert!((weibull::cdf(x, alpha, theta) - p).abs() < 1e-9);
    }

    #[test]
    fn empirical_quantile_within_range(mut xs in prop::collection::vec(0.1f64..1e4, 1..50), q in 0.01f64..0.99) {
        let t = estimate_quantile(&xs, q).unwrap();
        xs.sort_by(f64::total_cmp);
        prop_assert!(t >= xs[0] && t <= xs[xs.len() - 1]);
    }
}
