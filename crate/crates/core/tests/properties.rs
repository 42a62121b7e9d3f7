use anova_rgs::kernels::{anova_gram, enumerate_groups, BaseKernel, GroupIndex, KernelSpec};
use anova_rgs::linalg::sym_eigenvalues;
use anova_rgs::noise::NoiseSpec;
use anova_rgs::probes::{covering_number, PointSet};
use anova_rgs::rates::{critical_radius, q_function};
use anova_rgs::rng;
use proptest::prelude::*;

fn kernel() -> impl Strategy<Value = BaseKernel> {
    prop_oneof![
        Just(BaseKernel::Brownian),
        (0.1f64..2.0).prop_map(|bandwidth| BaseKernel::Gaussian { bandwidth }),
        (0.1f64..2.0).prop_map(|length_scale| BaseKernel::Matern32 { length_scale }),
        Just(BaseKernel::Sobolev1),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn group_grams_are_psd(k in kernel(), d in 1usize..4, n in 2usize..40, seed in any::<u64>()) {
        let spec = KernelSpec::uniform(d, k);
        let x = spec.sample_design(n, &mut rng::stream(seed, 0));
        let grams = anova_gram(&spec, &x, &enumerate_groups(d, d).unwrap()).unwrap();
        for (g, spectrum) in grams.grams.iter().zip(&grams.spectra) {
            let min = sym_eigenvalues(g).unwrap().into_iter().fold(f64::INFINITY, f64::min);
            prop_assert!(min >= -1e-8 * g.trace());
            prop_assert!(spectrum.windows(2).all(|w| w[0] >= w[1]));
            let sum: f64 = spectrum.iter().sum();
            prop_assert!((sum - g.trace() / n as f64).abs() <= 1e-8 * (1.0 + sum));
        }
    }

    #[test]
    fn centered_components_sum_to_zero_in_mean(k in kernel(), seed in any::<u64>()) {
        // Group Gram rows of a centered kernel average to ~0 under a large uniform design.
        let spec = KernelSpec::uniform(1, k);
        let x = spec.sample_design(400, &mut rng::stream(seed, 1));
        let grams = anova_gram(&spec, &x, &[GroupIndex::singleton(1)]).unwrap();
        let g = &grams.grams[0];
        let scale = g.trace() / 400.0;
        let mean = g.as_slice().iter().sum::<f64>() / (400.0 * 400.0);
        prop_assert!(mean.abs() < 0.1 * scale);
    }

    #[test]
    fn q_is_monotone_and_radius_shrinks(
        omega in prop::collection::vec(0.0f64..2.0, 1..12),
        n in 2usize..400,
        t in 0.0f64..3.0,
        dt in 0.0f64..1.0,
    ) {
        prop_assert!(q_function(&omega, n, t).unwrap() <= q_function(&omega, n, t + dt).unwrap());
        if omega.iter().any(|w| *w > 0.0) {
            let a = critical_radius(&omega, n, 1.0).unwrap();
            let b = critical_radius(&omega, 4 * n, 1.0).unwrap();
            prop_assert!(b <= a * (1.0 + 1e-12));
            let q = q_function(&omega, n, a).unwrap();
            prop_assert!(q <= a * a * (1.0 + 1e-9));
        }
    }

    #[test]
    fn noise_density_is_symmetric_and_cdf_monotone(alpha in 2.05f64..8.0, e in -5.0f64..5.0, de in 0.0f64..2.0) {
        let spec = NoiseSpec::new(alpha, 1.0).unwrap();
        prop_assert!((spec.error_density(e) - spec.error_density(-e)).abs() <= 1e-14);
        prop_assert!(spec.error_cdf(e) <= spec.error_cdf(e + de) + 1e-15);
    }

    #[test]
    fn covering_sandwich_and_monotonicity(
        dim in 1usize..10,
        count in 1usize..200,
        seed in any::<u64>(),
        d1 in 0.01f64..2.0,
        d2 in 0.01f64..2.0,
    ) {
        let mut r = rng::stream(seed, 2);
        let t = PointSet::new(
            (0..count).map(|_| (0..dim).map(|_| rand::Rng::random::<f64>(&mut r)).collect()).collect(),
        ).unwrap();
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let a = covering_number(&t, lo).unwrap();
        let b = covering_number(&t, hi).unwrap();
        prop_assert!(a.lower <= a.proper);
        prop_assert!(b.proper <= a.proper);
        prop_assert!(b.lower <= a.lower);
        let half = covering_number(&t, lo / 2.0).unwrap();
        // lower(δ) ≤ N(δ) ≤ N(δ/2) ≤ proper(δ/2).
        prop_assert!(a.lower <= half.proper);
        if let Some(e) = a.exact_proper {
            prop_assert!(a.lower <= e && e <= a.proper);
        }
    }
}
