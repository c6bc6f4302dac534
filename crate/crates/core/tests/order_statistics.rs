//! Order-statistic heuristic checked by simulating i.i.d. betas.

use nbcd_core::hyperparam::solve_order_stat_shapes;
use nbcd_oracles::order_stat_medians;

#[test]
fn extreme_medians_match_targets() {
    for &(lo, hi, k) in &[(0.04, 0.34, 16usize), (0.05, 0.5, 20), (0.05, 0.3, 6)] {
        let (a, b) = solve_order_stat_shapes(lo, hi, k).unwrap();
        let (min_med, max_med) = order_stat_medians(a, b, k, 100_000, 11);
        assert!((min_med - lo).abs() < 0.005, "K={k}: median of minimum {min_med}");
        assert!((max_med - hi).abs() < 0.005, "K={k}: median of maximum {max_med}");
    }
}
