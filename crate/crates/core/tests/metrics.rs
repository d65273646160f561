//! ROC-AUC against pairwise counting; injection and generator properties.

mod common;

use common::random_graph;
use grasped_core::bench::{inject_contextual, inject_structural, make_synthetic, modularity, roc_auc, SyntheticConfig};
use grasped_core::rng::{stream, Purpose};
use proptest::prelude::*;
use rand::Rng;

fn brute_force_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li == 1 && lj == 0 {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

fn tied_instance(seed: u64) -> (Vec<f64>, Vec<u8>) {
    let mut rng = stream(seed, Purpose::Synthetic);
    let n = rng.random_range(2..=100);
    // Few distinct levels force many ties.
    let levels = rng.random_range(1..=10);
    let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 * 0.5).collect();
    let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
    labels[0] = 0;
    labels[1] = 1;
    (scores, labels)
}

#[test]
fn matches_pairwise_counting() {
    for seed in 0..200 {
        let (scores, labels) = tied_instance(seed);
        let r = roc_auc(&scores, &labels).unwrap();
        assert_eq!(r.auc, brute_force_auc(&scores, &labels), "instance {seed}");
        assert_eq!(r.n_pos + r.n_neg, scores.len());
    }
}

#[test]
fn negation_is_complementary() {
    for seed in 0..200 {
        let (scores, labels) = tied_instance(seed);
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        assert_eq!(
            roc_auc(&scores, &labels).unwrap().auc + roc_auc(&neg, &labels).unwrap().auc,
            1.0
        );
    }
}

proptest! {
    #[test]
    fn invariant_under_increasing_transforms(
        scores in prop::collection::vec(-5.0f64..5.0, 2..60),
        flips in prop::collection::vec(any::<bool>(), 60),
    ) {
        let mut labels: Vec<u8> = flips[..scores.len()].iter().map(|&b| b as u8).collect();
        labels[0] = 0;
        labels[1] = 1;
        let base = roc_auc(&scores, &labels).unwrap().auc;
        let cubed: Vec<f64> = scores.iter().map(|s| s * s * s + 2.0 * s).collect();
        let exped: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
        prop_assert_eq!(roc_auc(&cubed, &labels).unwrap().auc, base);
        prop_assert_eq!(roc_auc(&exped, &labels).unwrap().auc, base);
        prop_assert!((0.0..=1.0).contains(&base));
    }
}

#[test]
fn injection_is_deterministic_and_preserves_the_other_half() {
    let g = random_graph(200, 5, 0.05, 1);
    let a = inject_contextual(&g, 0.05, 50, 7).unwrap();
    assert_eq!(a, inject_contextual(&g, 0.05, 50, 7).unwrap());
    assert_eq!(a.graph.edges(), g.edges());
    assert_eq!(a.labels.iter().filter(|&&l| l == 1).count(), 10);
    for &t in &a.targets {
        let row = a.graph.features().row(t);
        assert!((0..200).any(|v| g.features().row(v) == row));
    }

    let s = inject_structural(&g, 0.05, 15, 7).unwrap();
    assert_eq!(s, inject_structural(&g, 0.05, 15, 7).unwrap());
    assert_eq!(s.graph.features(), g.features());
    for &t in &s.targets {
        assert!(s.graph.degree(t) >= 9);
    }
    // 10 targets form a single group of 10.
    let new_edges = s.graph.num_edges() - g.num_edges();
    assert_eq!(new_edges, s.added_edges);
    assert!(new_edges <= 45);
    let pre_existing = s
        .targets
        .iter()
        .enumerate()
        .flat_map(|(i, &u)| s.targets[i + 1..].iter().map(move |&v| (u, v)))
        .filter(|&(u, v)| g.has_edge(u, v))
        .count();
    assert_eq!(new_edges + pre_existing, 45);
}

#[test]
fn cora_sized_rate_rounds_up() {
    let g = random_graph(2708, 2, 0.0005, 3);
    let inj = inject_contextual(&g, 0.01, 50, 1).unwrap();
    assert_eq!(inj.labels.iter().filter(|&&l| l == 1).count(), 28);
}

#[test]
fn different_seeds_differ() {
    let g = random_graph(100, 3, 0.05, 4);
    assert_ne!(
        inject_contextual(&g, 0.1, 50, 1).unwrap().targets,
        inject_contextual(&g, 0.1, 50, 2).unwrap().targets
    );
}

#[test]
fn single_community_has_one_feature_cluster() {
    let cfg = SyntheticConfig {
        n: 300,
        communities: 1,
        mean_scale: 5.0,
        seed: 2,
        ..SyntheticConfig::default()
    };
    let (g, member) = make_synthetic(&cfg).unwrap();
    assert!(member.iter().all(|&c| c == 0));
    // Column means sit near the single community mean, column spread near 1.
    for j in 0..g.feature_dim() {
        let col: Vec<f64> = (0..300).map(|i| g.features()[(i, j)]).collect();
        let mean = col.iter().sum::<f64>() / 300.0;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 299.0;
        assert!((var - 1.0).abs() < 0.3, "{var}");
    }
    assert!(modularity(&g, &member).abs() < 1e-12);
}

#[test]
fn planted_partition_modularity() {
    let cfg = SyntheticConfig {
        p_in: 0.2,
        p_out: 0.01,
        ..SyntheticConfig::default()
    };
    let (g, member) = make_synthetic(&cfg).unwrap();
    let mut rng = stream(9, Purpose::Init);
    let random: Vec<usize> = (0..500).map(|_| rng.random_range(0..4)).collect();
    assert!(modularity(&g, &member) > modularity(&g, &random) + 0.3);
}
