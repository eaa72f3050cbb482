use approx::assert_abs_diff_eq;
use mastlab::harness::arcsine_cdf;
use mastlab::harness::stats::{ks_one_sample, mean_stderr};
use mastlab::randkit::{
    aggregate, derive_seed, half_split, sample_dirichlet, sample_symmetric_dirichlet, size_biased_index, stream,
    substream, DirichletVector,
};
use proptest::prelude::*;
use rand::Rng;

const DRAWS: usize = 100_000;

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    mean_stderr(&v).0
}

#[test]
fn half_dirichlet_marginals() {
    let mut rng = stream(1);
    let draws: Vec<DirichletVector> =
        (0..DRAWS).map(|_| sample_symmetric_dirichlet(0.5, 3, &mut rng).unwrap()).collect();
    for i in 0..3 {
        assert_abs_diff_eq!(mean(draws.iter().map(|w| w.weights[i])), 1.0 / 3.0, epsilon = 0.005);
    }
    // W_1 ~ Beta(1/2, 1): E[W] = 1/3, E[W^2] = 1/5, E[sqrt W] = 1/2.
    assert_abs_diff_eq!(mean(draws.iter().map(|w| w.weights[0].powi(2))), 0.2, epsilon = 0.01);
    assert_abs_diff_eq!(mean(draws.iter().map(|w| w.weights[0].sqrt())), 0.5, epsilon = 0.005);
}

#[test]
fn squared_normal_split_has_the_same_moments() {
    let mut rng = stream(2);
    let draws: Vec<[f64; 3]> = (0..DRAWS).map(|_| half_split(&mut rng)).collect();
    for i in 0..3 {
        assert_abs_diff_eq!(mean(draws.iter().map(|w| w[i])), 1.0 / 3.0, epsilon = 0.005);
    }
    assert_abs_diff_eq!(mean(draws.iter().map(|w| w[1].powi(2))), 0.2, epsilon = 0.01);
    assert_abs_diff_eq!(mean(draws.iter().map(|w| w[2].sqrt())), 0.5, epsilon = 0.005);
}

#[test]
fn general_parameters() {
    let mut rng = stream(3);
    let params = [2.0, 3.0, 5.0];
    let draws: Vec<DirichletVector> = (0..20_000).map(|_| sample_dirichlet(&params, &mut rng).unwrap()).collect();
    for (i, a) in params.iter().enumerate() {
        assert_abs_diff_eq!(mean(draws.iter().map(|w| w.weights[i])), a / 10.0, epsilon = 0.005);
    }
    assert_eq!(sample_dirichlet(&[1.0], &mut rng).unwrap().weights, vec![1.0]);
    for bad in [&[0.5, 0.0][..], &[-1.0], &[f64::NAN], &[]] {
        assert!(sample_dirichlet(bad, &mut rng).is_err());
    }
}

#[test]
fn aggregation_arithmetic() {
    let w = DirichletVector { params: vec![0.5; 3], weights: vec![0.2, 0.3, 0.5] };
    let agg = aggregate(&w, 2).unwrap();
    assert_abs_diff_eq!(agg.head_mass, 0.5, epsilon = 1e-15);
    assert_abs_diff_eq!(agg.head.weights[0], 0.4, epsilon = 1e-15);
    assert_abs_diff_eq!(agg.head.weights[1], 0.6, epsilon = 1e-15);
    assert_eq!(agg.tail.weights, vec![1.0]);
    assert_eq!(agg.head.params, vec![0.5, 0.5]);
    assert!(aggregate(&w, 0).is_err());
    assert!(aggregate(&w, 3).is_err());
}

#[test]
fn aggregation_laws() {
    let mut rng = stream(4);
    let aggs: Vec<_> =
        (0..DRAWS).map(|_| aggregate(&sample_symmetric_dirichlet(0.5, 3, &mut rng).unwrap(), 1).unwrap()).collect();
    assert_abs_diff_eq!(mean(aggs.iter().map(|a| a.head_mass)), 1.0 / 3.0, epsilon = 0.01);
    assert_abs_diff_eq!(mean(aggs.iter().map(|a| a.tail.weights[0])), 0.5, epsilon = 0.01);
    // The normalized tail is Dir(1/2, 1/2), that is arcsine.
    let tails: Vec<f64> = aggs.iter().map(|a| a.tail.weights[0]).collect();
    assert!(ks_one_sample(&tails, arcsine_cdf) < 0.01);
    // Head mass and normalized tail are independent.
    let (mh, mt) = (mean(aggs.iter().map(|a| a.head_mass)), mean(tails.iter().copied()));
    let cov = mean(aggs.iter().map(|a| (a.head_mass - mh) * (a.tail.weights[0] - mt)));
    assert!(cov.abs() < 0.002, "cov = {cov}");
}

#[test]
fn beta_half_half_is_arcsine() {
    let mut rng = stream(5);
    let xs: Vec<f64> = (0..DRAWS).map(|_| sample_dirichlet(&[0.5, 0.5], &mut rng).unwrap().weights[0]).collect();
    assert!(ks_one_sample(&xs, arcsine_cdf) < 0.01);
    let ys: Vec<f64> = (0..DRAWS)
        .map(|_| {
            let w = half_split(&mut rng);
            w[1] / (w[1] + w[2])
        })
        .collect();
    assert!(ks_one_sample(&ys, arcsine_cdf) < 0.01);
}

#[test]
fn size_biasing() {
    let mut rng = stream(6);
    assert_eq!(size_biased_index(&[1.0, 0.0, 0.0], &mut rng), 0);
    assert_eq!(size_biased_index(&[0.0, 0.0, 1.0], &mut rng), 2);
    let mut freq = [0.0; 3];
    let mut selected = 0.0;
    let (mut own, mut other, mut given) = (0.0, 0.0, 0.0);
    for _ in 0..DRAWS {
        let w = half_split(&mut rng);
        let i = size_biased_index(&w, &mut rng);
        freq[i] += 1.0 / DRAWS as f64;
        selected += w[i] / DRAWS as f64;
        if i == 0 {
            own += w[0];
            other += w[1];
            given += 1.0;
        }
    }
    for f in freq {
        assert_abs_diff_eq!(f, 1.0 / 3.0, epsilon = 0.005);
    }
    // Given I = 1 the split is Dir(3/2, 1/2, 1/2).
    assert_abs_diff_eq!(selected, 0.6, epsilon = 0.01);
    assert_abs_diff_eq!(own / given, 0.6, epsilon = 0.01);
    assert_abs_diff_eq!(other / given, 0.2, epsilon = 0.01);
}

#[test]
fn substreams_are_reproducible_and_distinct() {
    let draw = |key| {
        let mut r = substream(42, key);
        (0..8).map(|_| r.gen()).collect::<Vec<u64>>()
    };
    assert_eq!(draw(3), draw(3));
    assert_ne!(draw(3), draw(4));
    let seeds: std::collections::HashSet<u64> = (0..10_000).map(|i| derive_seed(42, i)).collect();
    assert_eq!(seeds.len(), 10_000);
    assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
}

proptest! {
    #[test]
    fn weights_sum_to_one(seed: u64, len in 1usize..130, a in 0.05f64..5.0) {
        let w = sample_symmetric_dirichlet(a, len, &mut stream(seed)).unwrap();
        prop_assert!((w.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(w.weights.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn half_split_sums_to_one(seed: u64) {
        let w = half_split(&mut stream(seed));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(w.iter().all(|&x| x > 0.0));
    }
}
