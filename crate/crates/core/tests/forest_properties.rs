use proptest::prelude::*;
use selfreq::datagen::{gen_independent, IndepGenConfig};
use selfreq::forest::{Node, Tree};
use selfreq::stats::chi_square_gof;
use selfreq::{train_forest, Dataset, ForestConfig, Strategy};

fn check_tree(tree: &Tree, bag: usize, strategy: Strategy, subset_size: usize) -> Result<(), TestCaseError> {
    let mut leaves = 0;
    let mut leaf_samples = 0;
    for node in tree.nodes() {
        match node {
            Node::Leaf { counts } => {
                leaves += 1;
                leaf_samples += counts[0] + counts[1];
            }
            Node::Split { gain, .. } => prop_assert!(*gain > 0.0),
        }
    }
    prop_assert_eq!(tree.internal_node_count() + 1, leaves);
    prop_assert_eq!(leaf_samples, bag);
    match strategy {
        Strategy::PerTree => {
            let subset = tree.feature_subset().expect("per-tree subset recorded");
            prop_assert_eq!(subset.len(), subset_size);
            for stump in tree.stumps() {
                prop_assert!(subset.contains(&stump.feature));
            }
        }
        Strategy::PerNode => prop_assert!(tree.feature_subset().is_none()),
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn structure_and_conservation(
        samples in 10usize..80,
        features in 1usize..15,
        frac in 0.05f64..1.0,
        trees in 0usize..8,
        per_tree in any::<bool>(),
        relevant in 0usize..3,
        seed in any::<u64>(),
    ) {
        let relevant = relevant.min(features);
        let data = gen_independent(&IndepGenConfig::new(samples, features, relevant, 0.5).with_seed(seed)).unwrap();
        let subset_size = ((features as f64 * frac).ceil() as usize).clamp(1, features);
        let strategy = if per_tree { Strategy::PerTree } else { Strategy::PerNode };
        let config = ForestConfig::new(trees, subset_size, strategy).with_seed(seed ^ 0xabc);
        let forest = train_forest(&config, &data.dataset).unwrap();
        prop_assert_eq!(forest.trees().len(), trees);
        let bag = config.bag_size(samples);
        for tree in forest.trees() {
            check_tree(tree, bag, strategy, subset_size)?;
        }
        let total: u64 = forest.selection_counts().iter().sum();
        let internal: usize = forest.internal_node_counts().iter().sum();
        prop_assert_eq!(total, internal as u64);
        let p = forest.null_params().unwrap();
        prop_assert_eq!(p.avg_internal_nodes(), forest.avg_internal_nodes());
    }

    #[test]
    fn serial_equals_parallel(seed in any::<u64>(), per_tree in any::<bool>()) {
        let data = gen_independent(&IndepGenConfig::new(50, 12, 2, 0.4).with_seed(seed)).unwrap();
        let strategy = if per_tree { Strategy::PerTree } else { Strategy::PerNode };
        let mut config = ForestConfig::new(12, 4, strategy).with_seed(seed);
        let par = train_forest(&config, &data.dataset).unwrap();
        config.parallel = false;
        let ser = train_forest(&config, &data.dataset).unwrap();
        prop_assert_eq!(par.trees(), ser.trees());
        prop_assert_eq!(par.selection_counts(), ser.selection_counts());
    }
}

#[test]
fn null_selection_is_uniform_across_features() {
    let f = 10;
    let mut pooled = vec![0u64; f];
    for run in 0..100u64 {
        let data = gen_independent(&IndepGenConfig::new(60, f, 0, 0.0).with_seed(run)).unwrap();
        let config = ForestConfig::new(10, 3, Strategy::PerNode).with_seed(1000 + run);
        let forest = train_forest(&config, &data.dataset).unwrap();
        for (acc, c) in pooled.iter_mut().zip(forest.selection_counts()) {
            *acc += c;
        }
    }
    let outcome = chi_square_gof(&pooled, &vec![1.0 / f as f64; f], 5.0);
    assert!(outcome.p_value > 0.001, "pooled counts {pooled:?}, p = {}", outcome.p_value);
}

#[test]
fn separable_data_is_predicted() {
    let train = gen_independent(&IndepGenConfig::new(200, 20, 5, 0.9).with_seed(1)).unwrap();
    let test = gen_independent(&IndepGenConfig::new(200, 20, 5, 0.9).with_seed(2)).unwrap();
    let forest = train_forest(&ForestConfig::new(30, 5, Strategy::PerNode).with_seed(3), &train.dataset).unwrap();
    let correct = (0..200)
        .filter(|&i| forest.predict(test.dataset.row(i)).unwrap() == test.dataset.labels()[i])
        .count();
    assert!(correct >= 180, "accuracy {correct}/200");
}

#[test]
fn relevant_features_are_selected_more_often() {
    let data = gen_independent(&IndepGenConfig::new(200, 50, 3, 0.7).with_seed(9)).unwrap();
    let forest = train_forest(&ForestConfig::new(100, 25, Strategy::PerNode).with_seed(9), &data.dataset).unwrap();
    let counts = forest.selection_counts();
    let relevant: Vec<f64> = data.relevant.iter().map(|&j| counts[j] as f64).collect();
    let noise: Vec<f64> = (0..50).filter(|j| !data.relevant.contains(j)).map(|j| counts[j] as f64).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&relevant) > 2.0 * mean(&noise), "{counts:?}");
}

#[test]
fn empty_and_invalid_configs() {
    let data = Dataset::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]], vec![0, 0, 1, 1]).unwrap();
    let forest = train_forest(&ForestConfig::new(0, 1, Strategy::PerNode), &data).unwrap();
    assert_eq!(forest.avg_internal_nodes(), 0.0);
    assert!(forest.predict(&[1.0]).is_err());
    assert!(train_forest(&ForestConfig::new(3, 2, Strategy::PerNode), &data).is_err());
}
