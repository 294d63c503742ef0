use nmcrc::corrections::{bootstrap_stability, hoeffding_correction, BootstrapConfig};
use nmcrc::harness::decomposition_probe;
use nmcrc::risk::{crc_condition, loss_monotonized_risk, weighted_empirical_risk};
use nmcrc::{
    crc_scan, empirical_risk, loss_monotonize, plain_scan, risk_monotonize, select, weighted_select,
    Grid, LossMatrix, Method, MethodConfig, RiskCurve, RiskKind, WeightVector,
};
use proptest::prelude::*;

fn entry() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(1.0), 0.0..=1.0f64]
}

prop_compose! {
    fn small_matrix(max_n: usize, max_m: usize)
        (n in 1..=max_n, m in 1..=max_m)
        (entries in prop::collection::vec(entry(), n * m), m in Just(m))
        -> LossMatrix
    {
        LossMatrix::from_flat(Grid::uniform(0.0, 1.0, m).unwrap(), 1.0, entries).unwrap()
    }
}

fn first_index(values: &[f64], pass: impl Fn(f64) -> bool) -> (usize, bool) {
    match values.iter().position(|&v| pass(v)) {
        Some(j) => (j, true),
        None => (values.len() - 1, false),
    }
}

fn brute_means(m: &LossMatrix) -> Vec<f64> {
    (0..m.n_cols())
        .map(|j| m.column(j).sum::<f64>() / m.n_rows() as f64)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn scans_match_linear_search(m in small_matrix(20, 8), alpha in 0.01..0.99f64) {
        let n = m.n_rows();
        let curve = empirical_risk(&m);
        let brute = brute_means(&m);
        prop_assert_eq!(curve.values(), brute.as_slice());

        let s = crc_scan(&curve, n, 1.0, alpha);
        let want = first_index(curve.values(), |r| crc_condition(r, n, 1.0, alpha));
        prop_assert_eq!((s.index, s.feasible), want);
        prop_assert_eq!(s.lambda, m.grid().value(s.index));

        let s = plain_scan(&curve, alpha);
        prop_assert_eq!((s.index, s.feasible), first_index(curve.values(), |r| r <= alpha));
    }

    #[test]
    fn ordering_and_term_two(m in small_matrix(21, 8), alpha in 0.01..0.99f64) {
        prop_assume!(m.n_rows() >= 2);
        let p = decomposition_probe(&m, alpha).unwrap();
        prop_assert!(p.ordering_holds(), "{:?}", p);
        prop_assert!(p.term_two_holds(), "{:?}", p);
    }

    #[test]
    fn envelope_dominance(m in small_matrix(20, 8)) {
        let up = risk_monotonize(&empirical_risk(&m));
        let tilde = loss_monotonized_risk(&m);
        for (a, b) in up.values().iter().zip(tilde.values()) {
            prop_assert!(a <= b);
        }
    }

    #[test]
    fn monotonization_is_idempotent(m in small_matrix(20, 8)) {
        let once = loss_monotonize(&m);
        prop_assert_eq!(&loss_monotonize(&once), &once);
        for row in once.rows() {
            prop_assert!(row.windows(2).all(|w| w[1] <= w[0]));
        }
        let up = risk_monotonize(&empirical_risk(&m));
        let twice = risk_monotonize(&up);
        prop_assert_eq!(twice.values(), up.values());
    }

    #[test]
    fn zero_bound_is_plain_scan_of_scaled_curve(
        values in prop::collection::vec(0.0..=1.0f64, 1..=8),
        n in 1usize..50,
        alpha in 0.01..0.99f64,
    ) {
        let grid = Grid::uniform(0.0, 1.0, values.len()).unwrap();
        let curve = RiskCurve::new(grid.clone(), values.clone(), RiskKind::Empirical).unwrap();
        let nf = n as f64;
        let scaled: Vec<f64> = values.iter().map(|r| nf / (nf + 1.0) * r + 0.0 / (nf + 1.0)).collect();
        let scaled = RiskCurve::new(grid, scaled, RiskKind::Empirical).unwrap();
        let a = crc_scan(&curve, n, 0.0, alpha);
        let b = plain_scan(&scaled, alpha);
        prop_assert_eq!((a.index, a.feasible), (b.index, b.feasible));
    }

    #[test]
    fn stricter_level_never_selects_earlier(m in small_matrix(20, 8), alpha in 0.01..0.99f64) {
        let crc = select(&m, &MethodConfig::new(Method::Crc, alpha), None).unwrap();
        let nm = select(&m, &MethodConfig::new(Method::CrcNm, alpha), None).unwrap();
        prop_assert!(nm.effective_level <= crc.effective_level);
        if crc.feasible && nm.feasible {
            prop_assert!(nm.index >= crc.index);
        }
    }

    #[test]
    fn loss_mono_equals_crc_on_monotone_rows(m in small_matrix(20, 8), alpha in 0.01..0.99f64) {
        let mono = loss_monotonize(&m);
        let a = select(&mono, &MethodConfig::new(Method::LossMono, alpha), None).unwrap();
        let b = select(&mono, &MethodConfig::new(Method::Crc, alpha), None).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn unit_weights_are_bit_equal_to_crc(m in small_matrix(20, 8), alpha in 0.01..0.99f64) {
        let n = m.n_rows();
        let weighted = weighted_select(&m, &WeightVector::unit(n), alpha).unwrap();
        let plain = select(&m, &MethodConfig::new(Method::Crc, alpha), None).unwrap();
        prop_assert_eq!(weighted, plain);
        let w = weighted_empirical_risk(&m, &vec![1.0; n]).unwrap();
        let r = empirical_risk(&m);
        prop_assert_eq!(w.values(), r.values());
    }

    #[test]
    fn hoeffding_strictly_monotone(m in 1usize..5000, n in 1usize..100_000) {
        let base = hoeffding_correction(m, n, 1.0).unwrap().amount;
        prop_assert!(hoeffding_correction(m, n + 1, 1.0).unwrap().amount < base);
        prop_assert!(hoeffding_correction(m + 1, n, 1.0).unwrap().amount > base);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bootstrap_is_seed_deterministic(m in small_matrix(20, 8), alpha in 0.05..0.95f64, seed in any::<u64>()) {
        prop_assume!(m.n_rows() >= 2);
        let config = BootstrapConfig { resamples: 50, percentile: 90.0 };
        let a = bootstrap_stability(&m, alpha, &config, seed).unwrap();
        let b = bootstrap_stability(&m, alpha, &config, seed).unwrap();
        prop_assert_eq!(a.amount.to_bits(), b.amount.to_bits());
        prop_assert!(a.amount >= 0.0 && a.amount <= 1.0);
    }
}
