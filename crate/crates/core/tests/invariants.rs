use num_complex::Complex64;
use proptest::prelude::*;
use quadnet_core::semicircle;
use quadnet_core::thresholds::{
    interpolation_threshold_noiseless, small_rank_noiseless_error, strong_recovery_threshold,
    weak_recovery_small_rank,
};
use quadnet_core::{JEvaluator, SpectralLaw};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn density_is_nonnegative_and_vanishes_outside_bulks(
        ks in 0.05f64..3.0,
        delta in 0.01f64..2.0,
        t in 0.0f64..1.0,
    ) {
        let law = SpectralLaw::new(ks, delta).unwrap();
        let lo = law.bulks().first().unwrap().lo;
        let hi = law.bulks().last().unwrap().hi;
        let x = lo - 0.5 + (hi - lo + 1.0) * t;
        let rho = law.density(x);
        prop_assert!(rho >= 0.0);
        if !law.bulks().iter().any(|b| b.contains(x)) {
            prop_assert!(rho < 1e-6, "{x} {rho}");
        }
    }

    #[test]
    fn stieltjes_maps_upper_to_lower_half_plane(
        ks in 0.05f64..3.0,
        delta in 0.01f64..2.0,
        re in -3.0f64..8.0,
        im in 0.01f64..5.0,
    ) {
        let law = SpectralLaw::new(ks, delta).unwrap();
        let g = law.stieltjes(Complex64::new(re, im)).unwrap().value;
        prop_assert!(g.im < 0.0);
        prop_assert!(g.norm() <= 1.0 / im + 1e-9);
    }

    #[test]
    fn truncated_moment_is_decreasing_and_convex_in_threshold(
        ks in 0.1f64..2.5,
        delta in 0.02f64..1.5,
        b in -1.0f64..4.0,
    ) {
        let mut ev = JEvaluator::new(ks).unwrap();
        let p = ev.partials(delta, b).unwrap();
        prop_assert!(p.value >= 0.0);
        prop_assert!(p.d_b <= 1e-12);
        prop_assert!(p.d_a_over_a >= -1e-9);
        let later = ev.partials(delta, b + 0.1).unwrap();
        prop_assert!(later.value <= p.value + 1e-12);
        prop_assert!(later.d_b >= p.d_b - 1e-9);
    }

    #[test]
    fn noiseless_interpolation_threshold_is_bounded(ks in 0.0001f64..5.0) {
        let a = interpolation_threshold_noiseless(ks);
        prop_assert!((0.25..=0.5).contains(&a));
        let s = strong_recovery_threshold(ks).unwrap();
        prop_assert!(s.alpha > 0.0 && s.alpha <= 0.5);
        prop_assert!(s.alpha <= a + 1e-12);
        prop_assert!(s.residual < 1e-10);
    }

    #[test]
    fn small_rank_error_is_monotone(a in 0.05f64..5.0, step in 0.0f64..0.5) {
        let e0 = small_rank_noiseless_error(a);
        let e1 = small_rank_noiseless_error(a + step);
        prop_assert!(e1 <= e0 + 1e-12);
        prop_assert!((0.0..=1.0).contains(&e0));
    }

    #[test]
    fn weak_threshold_is_at_least_the_noise_floor(lb in 0.0f64..30.0, noise in 0.0f64..4.0) {
        let w = weak_recovery_small_rank(lb, noise).alpha;
        prop_assert!(w >= (1.0 + noise / 2.0) / 2.0);
    }

    #[test]
    fn semicircle_moments_are_consistent(x in -2.0f64..2.0) {
        prop_assert!((0.0..=1.0).contains(&semicircle::m0(x)));
        prop_assert!(semicircle::m1(x) <= 0.0);
        prop_assert!(semicircle::lower_square(x) >= 0.0);
    }
}

#[test]
fn small_rank_joints_are_continuous() {
    for joint in [0.5, 3.0] {
        let l = small_rank_noiseless_error(joint - 1e-12);
        let r = small_rank_noiseless_error(joint + 1e-12);
        assert!((l - r).abs() < 1e-9, "{joint}: {l} {r}");
    }
    assert!((small_rank_noiseless_error(1.0) - 8.0 / 9.0).abs() < 1e-12);
}
