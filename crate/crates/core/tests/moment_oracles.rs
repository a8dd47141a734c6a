use mvchain::moments::{
    brute_force_moment, dirichlet_moment, exact_sum_moment, monte_carlo_moments, polya_mixed_moment, BruteForceMode, Compositions,
};
use mvchain::{BigRational, ExactMomentQuery, MomentQuery, StreamRng};
use num_bigint::BigInt;
use proptest::prelude::*;

const MASS_SETS: [&[f64]; 4] = [&[1.0, 1.0], &[0.5, 3.0], &[1.0, 2.0, 0.25], &[4.0, 4.0, 4.0]];

fn orders_up_to(k: usize, max: usize) -> Vec<Vec<usize>> {
    (0..=max * k).flat_map(|t| Compositions::new(k, t)).filter(|o| o.iter().all(|&r| r <= max)).collect()
}

#[test]
fn closed_form_agrees_with_monte_carlo_over_a_grid() {
    let samples = 1_000_000;
    for (i, masses) in MASS_SETS.iter().enumerate() {
        let orders = orders_up_to(masses.len(), 2);
        for n in [1, 4, 9] {
            let est = monte_carlo_moments(n, masses, &orders, samples, &StreamRng::new(300 + 10 * i as u64 + n as u64)).unwrap();
            for (o, e) in orders.iter().zip(est) {
                let q = MomentQuery::new(n, masses.to_vec(), o.clone()).unwrap();
                let exact = polya_mixed_moment(&q).unwrap();
                // zero-variance cases (e.g. n = 1 with orders on two cells) need an absolute floor
                assert!((e.value - exact).abs() <= 3.0 * e.std_error + 1e-12, "{masses:?} n={n} {o:?}: {} ± {} vs {exact}", e.value, e.std_error);
            }
        }
    }
}

#[test]
fn dirichlet_limit_is_approached_monotonically() {
    for masses in MASS_SETS {
        for o in orders_up_to(masses.len(), 3) {
            if o.iter().sum::<usize>() < 2 {
                // orders of total degree ≤ 1 do not depend on n
                continue;
            }
            let q = MomentQuery::new(20, masses.to_vec(), o.clone()).unwrap();
            let limit = dirichlet_moment(masses, &o).unwrap();
            let at20 = (polya_mixed_moment(&q).unwrap() - limit).abs();
            let at200 = (polya_mixed_moment(&q.with_n(200)).unwrap() - limit).abs();
            assert!(at200 < at20, "{masses:?} {o:?}: {at200} vs {at20}");
        }
    }
}

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

#[test]
fn exact_arithmetic_confirms_the_decomposition() {
    // masses chosen as exact binary fractions so f64 and rationals describe the same law
    for masses in MASS_SETS {
        let exact_masses: Vec<BigRational> = masses.iter().map(|&m| rational(m)).collect();
        for n in [2, 5, 8] {
            for o in orders_up_to(masses.len(), 2) {
                let q = ExactMomentQuery::new(n, exact_masses.clone(), o.clone()).unwrap();
                assert_eq!(polya_mixed_moment(&q).unwrap(), exact_sum_moment(&q).unwrap(), "{masses:?} n={n} {o:?}");
            }
        }
    }
    let q = ExactMomentQuery::new(3, vec![rational(1.0), rational(1.0)], vec![1, 1]).unwrap();
    assert_eq!(
        polya_mixed_moment(&q).unwrap(),
        BigRational::new(BigInt::from(1), BigInt::from(12))
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn closed_form_matches_exact_sum(
        n in 1usize..=12,
        masses in prop::collection::vec(0.05f64..10.0, 2..=3),
        raw_orders in prop::collection::vec(0usize..=4, 3),
    ) {
        let orders = raw_orders[..masses.len()].to_vec();
        let q = MomentQuery::new(n, masses, orders).unwrap();
        let closed = polya_mixed_moment(&q).unwrap();
        let sum = brute_force_moment(&q, BruteForceMode::ExactSum, &StreamRng::new(0)).unwrap().value;
        prop_assert!((closed - sum).abs() <= 1e-10 * closed.abs().max(1e-300) + 1e-14, "{} vs {}", closed, sum);
    }
}
