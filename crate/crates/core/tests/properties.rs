use proptest::prelude::*;

use lightcast::linalg::{solve_spd, DenseMatrix};
use lightcast::poly::{enumerate_monomials, fit, PolynomialModel};
use lightcast::rbf::{self, grow_until_target, RbfNetwork, RbfTrainConfig};
use lightcast::series::{make_windows, TimeSeries, WindowedDataset};
use lightcast::stats::{paired_t_test, wilcoxon_exact_p, wilcoxon_normal_p, wilcoxon_signed_rank};
use lightcast::synth::SynthSpec;

fn windows(values: Vec<f64>, d: usize) -> WindowedDataset {
    make_windows(&TimeSeries::new("p", values).unwrap(), d).unwrap()
}

fn sse_of(model: &PolynomialModel, data: &WindowedDataset) -> f64 {
    model.sse(data).unwrap()
}

fn distinct_values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, n)
}

fn synth_spec() -> impl Strategy<Value = SynthSpec> {
    prop_oneof![
        (
            10usize..200,
            2.0f64..30.0,
            -5.0f64..5.0,
            -0.1f64..0.1,
            0.0f64..2.0,
            any::<u64>()
        )
            .prop_map(|(n, period, amplitude, trend, noise_sd, seed)| SynthSpec::Seasonal {
                n,
                period,
                amplitude,
                trend,
                level: 10.0,
                noise_sd,
                seed
            }),
        (2usize..200, -1.0f64..1.0, 0.0f64..2.0, any::<u64>()).prop_map(|(n, drift, noise_sd, seed)| SynthSpec::Walk {
            n,
            start: 0.0,
            drift,
            noise_sd,
            seed
        }),
        (
            prop::collection::vec(-0.4f64..0.4, 1..3),
            10usize..200,
            0.0f64..1.0,
            any::<u64>()
        )
            .prop_map(|(coeffs, n, noise_sd, seed)| SynthSpec::Ar {
                coeffs,
                n,
                noise_sd,
                seed
            }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn synthesis_is_pure(spec in synth_spec()) {
        let a = spec.generate().unwrap();
        let b = spec.generate().unwrap();
        prop_assert_eq!(a.values(), b.values());
    }

    #[test]
    fn solve_spd_residual(n in 1usize..40, seed in any::<u64>(), lambda in 0.0f64..1.0) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..2 * n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let m = DenseMatrix::from_rows(&rows).unwrap();
        let mut a = lightcast::linalg::gram(&m).unwrap();
        for i in 0..n {
            a[(i, i)] += 0.5;
        }
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let x = solve_spd(&a, &b, lambda).unwrap();
        let ax = a.mul_vec(&x).unwrap();
        let bmax = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            let r = (ax[i] + lambda * x[i] - b[i]).abs();
            prop_assert!(r <= 1e-8 * (1.0 + bmax), "row {}: residual {}", i, r);
        }
    }

    #[test]
    fn fit_is_a_stationary_minimum(values in distinct_values(80), d in 1usize..4, k in 1u32..3) {
        let data = windows(values, d);
        let model = fit(&data, k, 0.0).unwrap();
        let base = sse_of(&model, &data);
        // single-weight perturbations never lower the training SSE
        for i in 0..model.weights().len() {
            for step in [-1e-3, 1e-3] {
                let mut w = model.weights().to_vec();
                w[i] += step;
                let moved = PolynomialModel::new(model.basis().clone(), w, 0.0).unwrap();
                prop_assert!(sse_of(&moved, &data) >= base - 1e-9 * (1.0 + base));
            }
        }
        // analytic SSE gradient 2·Mᵀ(Mw − t) vanishes
        let design = model.basis().design_matrix(data.inputs()).unwrap();
        let resid: Vec<f64> = design.mul_vec(model.weights()).unwrap().iter().zip(data.targets()).map(|(p, t)| p - t).collect();
        let grad = design.tr_mul_vec(&resid).unwrap();
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(2.0 * g.abs()));
        prop_assert!(gmax <= 1e-5 * (1.0 + base), "gradient {}", gmax);
    }

    #[test]
    fn training_sse_is_monotone_in_degree(values in distinct_values(120), d in 1usize..4) {
        let data = windows(values, d);
        let mut prev = f64::INFINITY;
        for k in 1..=3 {
            let model = fit(&data, k, 0.0).unwrap();
            let sse = sse_of(&model, &data);
            prop_assert!(sse <= prev + 1e-8, "K={}: {} > {}", k, sse, prev);
            prev = sse;
        }
    }

    #[test]
    fn fit_is_bitwise_deterministic(values in distinct_values(50), d in 1usize..4) {
        let data = windows(values, d);
        let a = fit(&data, 2, 0.1).unwrap();
        let b = fit(&data, 2, 0.1).unwrap();
        let bits = |m: &PolynomialModel| m.weights().iter().map(|w| w.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn activations_are_bounded(
        center in prop::collection::vec(-3.0f64..3.0, 3),
        x in prop::collection::vec(-3.0f64..3.0, 3),
        width in 0.5f64..5.0,
    ) {
        let net = RbfNetwork::new(DenseMatrix::from_rows(std::slice::from_ref(&center)).unwrap(), vec![width], vec![1.0], 0.0).unwrap();
        let r = net.hidden_activations(&x).unwrap()[0];
        prop_assert!(r > 0.0 && r <= 1.0);
        prop_assert_eq!(r == 1.0, x == center);
        prop_assert_eq!(net.hidden_activations(&center).unwrap()[0], 1.0);
    }

    #[test]
    fn rbf_fit_is_deterministic(values in distinct_values(60), seed in any::<u64>()) {
        let data = windows(values, 3);
        let cfg = RbfTrainConfig { units: 6, batch_size: 8, epochs: 10, learning_rate: 0.01, seed, ..Default::default() };
        let a = rbf::fit(data.inputs(), data.targets(), &cfg).unwrap();
        let b = rbf::fit(data.inputs(), data.targets(), &cfg).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn growth_is_monotone_and_capped(values in distinct_values(40), cap in 1usize..12, target in 0.0f64..0.5) {
        let data = windows(values, 2);
        let cfg = RbfTrainConfig {
            batch_size: 8,
            epochs: 5,
            learning_rate: 0.02,
            target_mse: Some(target),
            max_units: cap,
            ..Default::default()
        };
        let (net, trace) = grow_until_target(data.inputs(), data.targets(), &cfg).unwrap();
        prop_assert!(trace.units_per_round.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(net.units() <= cap);
        prop_assert_eq!(trace.final_units, net.units());
    }

    #[test]
    fn paired_tests_are_antisymmetric(
        pairs in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 3..40)
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        if let (Ok(ab), Ok(ba)) = (paired_t_test(&a, &b), paired_t_test(&b, &a)) {
            prop_assert!((ab.statistic + ba.statistic).abs() <= 1e-12 * (1.0 + ab.statistic.abs()));
            prop_assert!((ab.p_value - ba.p_value).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab.p_value));
        }
        if let (Ok(ab), Ok(ba)) = (wilcoxon_signed_rank(&a, &b), wilcoxon_signed_rank(&b, &a)) {
            let (p1, m1) = ab.rank_sums.unwrap();
            let (p2, m2) = ba.rank_sums.unwrap();
            prop_assert_eq!((p1, m1), (m2, p2));
            prop_assert!((ab.p_value - ba.p_value).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab.p_value));
        }
    }

    #[test]
    fn normal_approximation_tracks_exact(n in 15usize..=20, frac in 0.0f64..=1.0) {
        let total = (n * (n + 1) / 2) as u64;
        let w = ((total as f64) * frac).round() as u64;
        let exact = wilcoxon_exact_p(n, w.min(total - w)).to_f64();
        let ranks: Vec<f64> = (1..=n).map(|r| r as f64).collect();
        let approx = wilcoxon_normal_p(w as f64, &ranks);
        prop_assert!((exact - approx).abs() <= 0.01, "n={} w={}: exact {} approx {}", n, w, exact, approx);
    }
}

#[test]
fn basis_cardinality_all_small_cases() {
    for d in 1..=6 {
        for k in 1..=5u32 {
            let b = enumerate_monomials(d, k).unwrap();
            let expect = (1..=k as u64).fold(1u64, |acc, i| acc * (d as u64 + i) / i);
            assert_eq!(b.len() as u64, expect, "d={d} K={k}");
        }
    }
}
