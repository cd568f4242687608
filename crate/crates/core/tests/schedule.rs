use kdp_core::kappa::KappaParams;
use kdp_core::schedule::{
    contraction_rate, iterations_for_accuracy, make_schedule, make_split_schedule, naive_schedule,
};
use proptest::prelude::*;

proptest! {
    #[test]
    fn iterations_non_increasing_in_kappa(gamma in 0.5f64..0.999, c_fa in 0.001f64..0.9, a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(iterations_for_accuracy(gamma, hi, c_fa) <= iterations_for_accuracy(gamma, lo, c_fa));
    }

    #[test]
    fn ceil_reaches_accuracy_minimally(gamma in 0.5f64..0.999, c_fa in 0.001f64..0.9, kappa in 0.0f64..0.999) {
        let xi = contraction_rate(gamma, kappa);
        prop_assert!((0.0..=gamma).contains(&xi));
        let n = iterations_for_accuracy(gamma, kappa, c_fa) as i32;
        prop_assert!(xi.powi(n) <= c_fa * (1.0 + 1e-9));
        if n > 1 {
            prop_assert!(xi.powi(n - 1) > c_fa * (1.0 - 1e-9));
        }
    }

    #[test]
    fn budget_is_conserved(gamma in 0.5f64..0.999, c_fa in 0.001f64..0.9, kappa in 0.0f64..=1.0, total in 1u64..10_000_000) {
        match make_schedule(gamma, kappa, c_fa, total) {
            Ok(s) => {
                prop_assert_eq!(s.n_iterations * s.samples_per_iter + s.remainder, total);
                prop_assert!(s.remainder < s.n_iterations);
                let spent: u64 = (0..s.n_iterations).map(|i| s.samples_in(i)).sum();
                prop_assert_eq!(spent, total);
            }
            Err(_) => prop_assert!(iterations_for_accuracy(gamma, kappa, c_fa) > total),
        }
    }

    #[test]
    fn split_schedule_on_diagonal_matches(gamma in 0.5f64..0.999, kappa in 0.0f64..=1.0) {
        let a = make_schedule(gamma, kappa, 0.05, 1_000_000).unwrap();
        let b = make_split_schedule(gamma, KappaParams::split(kappa, kappa).unwrap(), 0.05, 1_000_000).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn naive_mode_is_one_sample_per_iteration() {
    let s = naive_schedule(0.99, KappaParams::standard(0.68).unwrap(), 12_345).unwrap();
    assert_eq!((s.n_iterations, s.samples_per_iter, s.remainder), (12_345, 1, 0));
}
