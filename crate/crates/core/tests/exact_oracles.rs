//! Null-model values against exact rational arithmetic.

mod common;

use common::{binomial_numerators, choose, ratio, rel_err};
use num_bigint::BigUint;
use num_traits::Zero;
use selfreq::{
    datagen::{gen_independent, IndepGenConfig},
    expected_false_positives, per_tree_inclusion_prob, pmf_vector, solve_threshold, strategy1_pmf,
    strategy2_per_tree_pmf, strategy2_pmf_convolution, strategy2_pmf_partitions, tail_prob, train_forest,
    ForestConfig, NullModelParams, Strategy,
};

fn params(f: usize, fnn: usize, t: usize, k: f64, s: Strategy) -> NullModelParams {
    NullModelParams::new(f, fnn, t, k, s).unwrap()
}

#[test]
fn binomial_pmf_at_31_matches_rational() {
    let p = params(20, 5, 20, 31.0, Strategy::PerNode);
    let (nums, den) = binomial_numerators(620, 20, 31);
    let exact = ratio(&nums[31], &den);
    let got = strategy1_pmf(&p, 31).unwrap();
    assert!(rel_err(got, exact) < 1e-12, "got {got}, exact {exact}");
}

#[test]
fn tail_and_expected_fp_at_31_match_rational() {
    let p = params(20, 5, 20, 31.0, Strategy::PerNode);
    let (nums, den) = binomial_numerators(620, 20, 31);
    let cdf: BigUint = nums.iter().sum();
    let exact = ratio(&(&den - cdf), &den);
    let tail = tail_prob(&p, 31);
    assert!((tail - exact).abs() < 1e-12, "tail {tail}, exact {exact}");
    assert!((expected_false_positives(&p, 31) - 20.0 * exact).abs() < 20.0 * 1e-12);
}

#[test]
fn inclusion_probability_5000_250() {
    let exact = ratio(&choose(4999, 249), &choose(5000, 250));
    let got = per_tree_inclusion_prob(5000, 250).unwrap();
    assert!(rel_err(got, exact) < 1e-14);
    assert!(rel_err(got, 0.05) < 1e-14);
}

/// Per-tree count distribution by enumerating every subset and every winner
/// sequence; returns exact numerators over `C(F, F_n) * F_n^K`.
fn enumerate_per_tree(f: usize, fnn: usize, k: usize) -> (Vec<u64>, u64) {
    let mut counts = vec![0u64; k + 1];
    let mut subsets = 0u64;
    for mask in 0u32..(1 << f) {
        if mask.count_ones() as usize != fnn {
            continue;
        }
        subsets += 1;
        let members: Vec<usize> = (0..f).filter(|&j| mask & (1 << j) != 0).collect();
        let sequences = (fnn as u64).pow(k as u32);
        for mut code in 0..sequences {
            let mut hits = 0;
            for _ in 0..k {
                if members[(code % fnn as u64) as usize] == 0 {
                    hits += 1;
                }
                code /= fnn as u64;
            }
            counts[hits] += 1;
        }
    }
    (counts, subsets * (fnn as u64).pow(k as u32))
}

#[test]
fn per_tree_pmf_4_2_2_by_enumeration() {
    let (counts, total) = enumerate_per_tree(4, 2, 2);
    let p = params(4, 2, 1, 2.0, Strategy::PerTree);
    for xi in 0..=2u64 {
        let exact = counts[xi as usize] as f64 / total as f64;
        let got = strategy2_per_tree_pmf(&p, xi).unwrap();
        assert!((got - exact).abs() < 1e-15, "xi={xi}: {got} vs {exact}");
    }
    assert_eq!(counts[1] as f64 / total as f64, 0.25);
}

#[test]
fn three_trees_match_brute_force_triple_sum() {
    for &(f, fnn, k) in &[(4usize, 2usize, 2usize), (5, 3, 3), (6, 2, 4), (3, 3, 2)] {
        let (counts, total) = enumerate_per_tree(f, fnn, k);
        let per_tree: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
        let p = params(f, fnn, 3, k as f64, Strategy::PerTree);
        let conv = strategy2_pmf_convolution(&p, 3 * k as u64).unwrap();
        for target in 0..=3 * k {
            let mut want = 0.0;
            for a in 0..=k {
                for b in 0..=k {
                    if a + b <= target && target - a - b <= k {
                        want += per_tree[a] * per_tree[b] * per_tree[target - a - b];
                    }
                }
            }
            let part = strategy2_pmf_partitions(&p, target as u64).unwrap();
            assert!((part - want).abs() < 1e-14, "{f},{fnn},{k} k={target}: {part} vs {want}");
            assert!((conv[target] - want).abs() < 1e-14);
        }
    }
}

#[test]
fn threshold_matches_exact_scan_for_trained_forest() {
    let data = gen_independent(&IndepGenConfig::new(60, 5000, 0, 0.0).with_seed(17)).unwrap();
    let config = ForestConfig::new(40, 250, Strategy::PerNode).with_seed(4);
    let forest = train_forest(&config, &data.dataset).unwrap();
    let p = forest.null_params().unwrap();
    assert_eq!(p.avg_internal_nodes(), forest.avg_internal_nodes());
    let n = p.node_budget();
    let (nums, den) = binomial_numerators(n, 5000, n);
    for &alpha in &[0.05, 0.01, 1e-3, 1e-4] {
        // smallest kappa with den - cdf(kappa) <= alpha * den, scaled to integers
        let scale = 1_000_000u64;
        let alpha_num = BigUint::from((alpha * scale as f64).round() as u64);
        let mut cdf = BigUint::zero();
        let mut want = None;
        for (kappa, num) in nums.iter().enumerate() {
            cdf += num;
            if (&den - &cdf) * scale <= &alpha_num * &den {
                want = Some(kappa as u64);
                break;
            }
        }
        let got = solve_threshold(&p, alpha).unwrap();
        assert_eq!(Some(got.kappa_star), want, "alpha={alpha}, n={n}");
    }
}

#[test]
fn per_tree_full_subset_vector_matches_binomial() {
    let p = params(6, 6, 4, 3.0, Strategy::PerTree);
    let v = pmf_vector(&p, 12);
    let (nums, den) = binomial_numerators(12, 6, 12);
    for k in 0..=12 {
        assert!(rel_err(v[k], ratio(&nums[k], &den)) < 1e-10);
    }
}
