use mmwi::blockage::{
    active_count_pgf, active_count_pmf, analyze, BlockageParams, MixingConvention,
};
use mmwi::experiment::composed_active_pmf;
use mmwi::geometry::{distance_cdf, is_link_blocked, Disk, ReceiverAnchor, ShadowInterval};
use mmwi::numerics::QuadratureSpec;
use proptest::prelude::*;

/// Intervals with endpoints on a 0.01 lattice in [-1.2, 1.2].
fn lattice_intervals() -> impl Strategy<Value = Vec<ShadowInterval<f64>>> {
    prop::collection::vec((-120i32..120, 1i32..80), 0..12).prop_map(|v| {
        v.into_iter()
            .map(|(lo, len)| ShadowInterval {
                lo: lo as f64 / 100.0,
                hi: (lo + len) as f64 / 100.0,
            })
            .collect()
    })
}

proptest! {
    // Grid points sit at odd multiples of 1e-4, never on the lattice, so
    // grid coverage decides coverage of [-1, 1] exactly.
    #[test]
    fn coverage_matches_dense_grid(ivs in lattice_intervals()) {
        let n = 10_000;
        let covered = (0..n).all(|i| {
            let x = -1.0 + (2 * i + 1) as f64 / n as f64;
            ivs.iter().any(|iv| iv.lo <= x && x <= iv.hi)
        });
        prop_assert_eq!(is_link_blocked(&ivs, 1.0), covered);
    }

    #[test]
    fn binomial_matches_bernoulli_composition(n in 0u32..=10, p in 0.0f64..=1.0, pb in 0.0f64..=1.0) {
        let composed = composed_active_pmf(n, p, pb);
        for (k, c) in composed.iter().enumerate() {
            prop_assert!((active_count_pmf(k as u32, n, p, pb) - c).abs() <= 1e-12);
        }
    }

    #[test]
    fn pgf_at_one_and_mean(n in 1u32..200, p in 0.0f64..=1.0, pb in 0.0f64..=1.0) {
        prop_assert!((active_count_pgf(1.0, n, p, pb) - 1.0).abs() < 1e-12);
        let h = 1e-6;
        let slope = (active_count_pgf(1.0 + h, n, p, pb) - active_count_pgf(1.0 - h, n, p, pb)) / (2.0 * h);
        let mean = n as f64 * p * (1.0 - pb);
        prop_assert!((slope - mean).abs() <= 1e-4 * mean.max(1.0));
    }

    #[test]
    fn distance_cdf_is_a_cdf(r in 5.0f64..50.0, frac in 0.0f64..0.95, x in 0.0f64..1.0) {
        let disk = Disk::new(r).unwrap();
        let anchor = ReceiverAnchor::new(frac * r, 0.0).unwrap();
        let top = r + anchor.v0_norm;
        let a = distance_cdf(x * top, &disk, &anchor).unwrap();
        let b = distance_cdf((x * top + 0.1).min(top), &disk, &anchor).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b >= a - 1e-15);
        prop_assert!((distance_cdf(top, &disk, &anchor).unwrap() - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn blockage_result_is_a_probability_interval(
        rho in 0.0f64..0.5,
        theta_deg in 4.0f64..35.0,
        radius in 15.0f64..40.0,
        v0_frac in 0.0f64..0.5,
    ) {
        let params = BlockageParams::new(rho, theta_deg.to_radians(), 0.2, 0.8, radius, v0_frac * radius).unwrap();
        for conv in [MixingConvention::ProbabilityConsistent, MixingConvention::ReciprocalLength] {
            let r = analyze(&params, conv, &QuadratureSpec::default()).unwrap();
            prop_assert!(0.0 <= r.pb_lower && r.pb_lower <= r.pb_upper && r.pb_upper <= 1.0);
            prop_assert!(r.n_res_lower <= r.n_res_upper);
            prop_assert!((0.0..=1.0).contains(&r.pb1));
        }
    }
}
