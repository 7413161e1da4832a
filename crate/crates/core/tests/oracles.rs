#![allow(clippy::excessive_precision)]

mod common;

use common::{bound_oracle, brute_force_mean, grid_minimum, phi_quadrature, xt_atoms};
use proptest::prelude::*;
use spiderstick::{
    std_normal_cdf, BoundInputs, DiscreteSpiderDistribution, Spider, SpiderPoint, SpiderSample,
    StreamKey,
};

const PHI_POINTS: [f64; 9] = [-8.0, -4.0, -1.96, -0.5, 0.0, 0.5, 1.96, 4.0, 8.0];

#[test]
fn phi_agrees_with_quadrature() {
    for z in PHI_POINTS {
        let (a, b) = (std_normal_cdf(z), phi_quadrature(z));
        assert!((a - b).abs() <= 1e-12, "z = {z}: {a} vs {b}");
    }
    // frozen 40-digit reference
    assert!((phi_quadrature(1.96) - 0.97500210485177956586).abs() < 1e-13);
    assert!((std_normal_cdf(1.96) - 0.97500210485177956586).abs() < 1e-15);
}

#[test]
fn phi_is_monotone() {
    let mut prev = 0.0;
    for i in -4000..=4000 {
        let v = std_normal_cdf(i as f64 * 0.0025);
        assert!(v >= prev);
        prev = v;
    }
}

#[test]
fn bound_values_match_direct_formula() {
    let dist = DiscreteSpiderDistribution::example_xt(3, 0.01).unwrap();
    let inputs = BoundInputs::new(&dist).unwrap();
    let atoms = xt_atoms(3, 0.01);
    for n in [1u64, 100, 10_000] {
        let (p, pk, b) = bound_oracle(&atoms, 3, 3, n as f64, phi_quadrature);
        let row = inputs.row(n);
        assert!((row.p_upper - p).abs() < 1e-11, "n={n}");
        assert!((row.p_lower - pk).abs() < 1e-11, "n={n}");
        assert!((row.bound - b).abs() < 1e-9, "n={n}");
    }
}

#[test]
fn sample_mean_matches_brute_force_on_fixed_cases() {
    let spider = Spider::new(3).unwrap();
    let pt = |l, x| SpiderPoint::on_leg(l, x).unwrap();
    let sym = SpiderSample::new(spider, vec![pt(1, 1.0), pt(2, 1.0), pt(3, 1.0)]).unwrap();
    assert_eq!(brute_force_mean(&sym).0, 0);
    assert!(sym.frechet_mean().is_origin());
    assert!(sym.frechet_function(&sym.frechet_mean()).unwrap() <= grid_minimum(&sym, 1e-3));

    let two = SpiderSample::new(spider, vec![pt(1, 3.0), pt(2, 1.0)]).unwrap();
    let (leg, x, _) = brute_force_mean(&two);
    assert_eq!((leg, x), (1, 1.0));
    assert_eq!(two.frechet_mean(), pt(1, 1.0));
    assert!(two.frechet_function(&two.frechet_mean()).unwrap() <= grid_minimum(&two, 1e-3));
}

#[test]
fn xt_sampler_frequencies_pass_chi_square() {
    let dist = DiscreteSpiderDistribution::example_xt(3, 0.01).unwrap();
    let sampler = dist.sampler();
    let n = 300_000usize;
    let mut counts = vec![0u64; 3];
    sampler.draw_counts(n, StreamKey::new(2024, 0), &mut counts);
    let expected = n as f64 / 3.0;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    // upper 1e-4 quantile of chi-square with 2 degrees of freedom: -2 ln(1e-4)
    assert!(
        chi2 < -2.0 * 1e-4f64.ln(),
        "chi2 = {chi2}, counts = {counts:?}"
    );
    let sd = (n as f64 / 3.0 * 2.0 / 3.0).sqrt();
    for c in counts {
        assert!((c as f64 - expected).abs() < 4.0 * sd);
    }
}

#[test]
fn folded_means_obey_law_of_large_numbers() {
    let dist = DiscreteSpiderDistribution::example_xt(3, 0.01).unwrap();
    let summary = dist.folded_summary();
    let n = 1_000_000usize;
    let sample = dist
        .sampler()
        .draw_sample(n, StreamKey::new(99, 3))
        .unwrap();
    let f = sample.folded_summary();
    for k in 0..3 {
        let tol = 5.0 * summary.sigma2[k].sqrt() / (n as f64).sqrt();
        assert!((f.eta[k] - summary.m[k]).abs() < tol, "leg {}", k + 1);
    }
}

fn arb_point(legs: usize) -> impl Strategy<Value = SpiderPoint> {
    prop_oneof![
        1 => Just(SpiderPoint::ORIGIN),
        9 => (1..=legs, 0.001f64..10.0).prop_map(|(l, x)| SpiderPoint::on_leg(l, x).unwrap()),
    ]
}

fn arb_sample() -> impl Strategy<Value = SpiderSample> {
    (3usize..=5).prop_flat_map(|legs| {
        prop::collection::vec(arb_point(legs), 1..=20)
            .prop_map(move |pts| SpiderSample::new(Spider::new(legs).unwrap(), pts).unwrap())
    })
}

fn arb_distribution() -> impl Strategy<Value = DiscreteSpiderDistribution> {
    (3usize..=6).prop_flat_map(|legs| {
        prop::collection::vec((arb_point(legs), 0.01f64..1.0), 1..=12).prop_map(move |atoms| {
            let total: f64 = atoms.iter().map(|a| a.1).sum();
            let mut scaled: Vec<(SpiderPoint, f64)> =
                atoms.into_iter().map(|(p, w)| (p, w / total)).collect();
            let rest: f64 = 1.0 - scaled[1..].iter().map(|a| a.1).sum::<f64>();
            scaled[0].1 = rest;
            DiscreteSpiderDistribution::new(Spider::new(legs).unwrap(), scaled).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn metric_axioms(a in arb_point(4), b in arb_point(4), c in arb_point(4)) {
        let s = Spider::new(4).unwrap();
        let d = |p: &SpiderPoint, q: &SpiderPoint| s.distance(p, q).unwrap();
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert_eq!(d(&a, &b) == 0.0, a == b);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
    }

    #[test]
    fn mean_matches_brute_force(sample in arb_sample()) {
        let mean = sample.frechet_mean();
        let (leg, x, value) = brute_force_mean(&sample);
        prop_assert_eq!(mean.leg().unwrap_or(0), leg);
        prop_assert!((mean.radius() - x).abs() <= 1e-9);
        let at_mean = sample.frechet_function(&mean).unwrap();
        prop_assert!(at_mean <= value + 1e-12);
        prop_assert!(at_mean <= grid_minimum(&sample, 1e-3) + 1e-12);
    }

    #[test]
    fn folded_summary_invariants(sample in arb_sample()) {
        let f = sample.folded_summary();
        let legs = sample.spider().legs();
        prop_assert!(f.h.iter().all(|&h| h >= 0.0));
        prop_assert!(f.eta.iter().filter(|&&e| e > 0.0).count() <= 1);
        let total_h: f64 = f.h.iter().sum();
        for k in 0..legs {
            let from_h = 2.0 * f.h[k] - total_h;
            prop_assert!((f.eta[k] - from_h).abs() < 1e-9);
            let direct: f64 = sample.points().iter().map(|p| p.fold(k + 1)).sum::<f64>() / sample.len() as f64;
            prop_assert!((f.eta[k] - direct).abs() < 1e-9);
        }
        let sum_eta: f64 = f.eta.iter().sum();
        prop_assert!((sum_eta - (2.0 - legs as f64) * total_h).abs() < 1e-9);
    }

    #[test]
    fn sample_mean_relations(sample in arb_sample()) {
        let f = sample.folded_summary();
        let mean = f.mean();
        for k in 1..=sample.spider().legs() {
            let eta = f.eta[k - 1];
            prop_assert_eq!(eta > 0.0, mean.leg() == Some(k));
            prop_assert_eq!(eta > 0.0, mean.fold(k) > 0.0);
            if eta >= 0.0 {
                prop_assert_eq!(mean.fold(k), eta);
            }
            if eta == 0.0 {
                prop_assert!(mean.is_origin());
            }
        }
    }

    // the strict inequality for negative eta needs mass on three legs
    #[test]
    fn negative_eta_lies_below_fold_of_mean(sample in arb_sample()) {
        let charged = (1..=sample.spider().legs())
            .filter(|&l| sample.points().iter().any(|p| p.leg() == Some(l)))
            .count();
        prop_assume!(charged >= 3);
        let f = sample.folded_summary();
        let mean = f.mean();
        for k in 1..=sample.spider().legs() {
            let eta = f.eta[k - 1];
            if eta < 0.0 {
                prop_assert!(eta < mean.fold(k));
            }
        }
    }

    #[test]
    fn mean_never_farther_than_eta(sample in arb_sample(), m in 0.001f64..5.0, k in 1usize..=3) {
        let f = sample.folded_summary();
        let mean = f.mean();
        prop_assert!((mean.fold(k) - m).abs() <= (f.eta[k - 1] - m).abs());
    }

    #[test]
    fn population_invariants(dist in arb_distribution()) {
        let s = dist.folded_summary();
        let legs = dist.legs();
        prop_assert!(s.m.iter().filter(|&&m| m > 0.0).count() <= 1);
        for k in 0..legs {
            for j in 0..legs {
                if j != k {
                    prop_assert!(s.m[k] + s.m[j] <= 1e-12);
                }
            }
            let h: Vec<f64> = (1..=legs)
                .map(|l| dist.atoms().iter().filter(|a| a.point.leg() == Some(l)).map(|a| a.prob * a.point.radius()).sum())
                .collect();
            let from_h = h[k] - h.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, v)| v).sum::<f64>();
            prop_assert!((s.m[k] - from_h).abs() < 1e-12);
            let second: f64 = dist.atoms().iter().map(|a| a.prob * a.point.fold(k + 1).powi(2)).sum();
            prop_assert!((s.sigma2[k] - (second - s.m[k] * s.m[k])).abs() < 1e-9);
            prop_assert!(s.sigma2[k] >= 0.0);
        }
        if let Some(k) = s.mean_leg() {
            prop_assert!((dist.variance_about_mean() - s.sigma2[k - 1]).abs() < 1e-9);
            let mu = dist.frechet_mean();
            prop_assert_eq!(mu.leg(), Some(k));
        } else {
            prop_assert!(dist.frechet_mean().is_origin());
        }
    }
}
