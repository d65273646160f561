//! Loss terms, scoring properties and permutation equivariance.

mod common;

use common::{connected_graph, random_graph};
use grasped_core::graph::{eigendecompose, normalized_laplacian};
use grasped_core::linalg::{cholesky, log_det_spd};
use grasped_core::model::{
    attribute_loss, encode_with, gdn_decode, kl_loss, neighborhood_stats, GaussianPrediction, Propagation,
};
use grasped_core::rng::{stream, Purpose};
use grasped_core::train::{initial_params, score_with_context, TrainingContext};
use grasped_core::{score_nodes, Graph, HyperParams, Matrix};
use proptest::prelude::*;
use rand::Rng;

/// Node 0 joined to `rows.len()` leaves carrying `rows` as features.
fn star(rows: &[Vec<f64>]) -> Graph {
    let p = rows[0].len();
    let mut all = vec![vec![0.0; p]];
    all.extend_from_slice(rows);
    let edges: Vec<_> = (1..all.len()).map(|v| (0, v)).collect();
    Graph::build_undirected(&edges, all.len(), Matrix::from_rows(&all).unwrap(), None).unwrap()
}

#[test]
fn kl_zero_for_identical_gaussians() {
    let g = star(&[vec![0.3, -1.2, 2.5]]);
    let eps = 0.37;
    let emp = neighborhood_stats(&g, 0, 10, eps, None).unwrap();
    let pred = GaussianPrediction::from_raw(emp.mu.clone(), &[eps.ln(); 3]);
    assert!(kl_loss(&pred, &emp).unwrap().abs() < 1e-12);
}

#[test]
fn kl_identity_covariances_is_half_squared_distance() {
    let mut rng = stream(11, Purpose::Init);
    for _ in 0..50 {
        let mu: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mu_hat: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
        // A single neighbor leaves Σ = εI = I.
        let emp = neighborhood_stats(&star(std::slice::from_ref(&mu)), 0, 10, 1.0, None).unwrap();
        let pred = GaussianPrediction::from_raw(mu_hat.clone(), &[0.0; 5]);
        let half_sq: f64 = 0.5 * mu.iter().zip(&mu_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        assert!((kl_loss(&pred, &emp).unwrap() - half_sq).abs() < 1e-12);
    }
}

/// KL between N(μ, Σ) and N(μ̂, diag(σ̂²)) from dense determinants and inverse.
fn direct_kl(mu: &[f64], sigma: &Matrix, mu_hat: &[f64], log_sigma_hat: &[f64]) -> f64 {
    let p = mu.len();
    let log_det_hat: f64 = log_sigma_hat.iter().sum();
    let l = cholesky(sigma).unwrap();
    let log_det = (0..p).map(|i| 2.0 * l[(i, i)].ln()).sum::<f64>();
    let mut trace = 0.0;
    let mut quad = 0.0;
    for j in 0..p {
        let inv = (-log_sigma_hat[j]).exp();
        trace += inv * sigma[(j, j)];
        quad += inv * (mu[j] - mu_hat[j]).powi(2);
    }
    0.5 * (log_det_hat - log_det - p as f64 + trace + quad)
}

#[test]
fn kl_matches_direct_evaluation() {
    let mut rng = stream(12, Purpose::Init);
    for case in 0..100 {
        let p = 2 + case % 7;
        // Fewer neighbors than dimensions exercises the Gram-form determinant.
        let count = 2 + (case * 5) % 12;
        let rows: Vec<Vec<f64>> = (0..count)
            .map(|_| (0..p).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let eps = 10f64.powf(rng.random_range(-4.0..-1.0));
        let emp = neighborhood_stats(&star(&rows), 0, count, eps, None).unwrap();
        let mu_hat: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let raw: Vec<f64> = (0..p).map(|_| rng.random_range(-3.0..3.0)).collect();
        let pred = GaussianPrediction::from_raw(mu_hat.clone(), &raw);
        let want = direct_kl(&emp.mu, &emp.sigma(), &mu_hat, &raw);
        let got = kl_loss(&pred, &emp).unwrap();
        assert!(
            (got - want).abs() < 1e-10 * want.abs().max(1.0),
            "case {case}: {got} vs {want}"
        );
        assert!((emp.log_det().unwrap() - log_det_spd(&emp.sigma()).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn clamped_log_variance_is_flagged() {
    let pred = GaussianPrediction::from_raw(vec![0.0, 0.0], &[45.0, -2.0]);
    assert!(pred.clamped);
    assert_eq!(pred.log_sigma, vec![30.0, -2.0]);
    assert!(pred.sigma_hat_diag.iter().all(|v| v.is_finite()));
}

proptest! {
    #[test]
    fn kl_is_non_negative(
        rows in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 4), 1..8),
        mu_hat in prop::collection::vec(-3.0f64..3.0, 4),
        raw in prop::collection::vec(-6.0f64..6.0, 4),
        eps in 1e-4f64..1.0,
    ) {
        let emp = neighborhood_stats(&star(&rows), 0, 20, eps, None).unwrap();
        let pred = GaussianPrediction::from_raw(mu_hat, &raw);
        prop_assert!(kl_loss(&pred, &emp).unwrap() >= -1e-10);
    }

    #[test]
    fn attribute_loss_is_a_metric(
        a in prop::collection::vec(-10.0f64..10.0, 6),
        b in prop::collection::vec(-10.0f64..10.0, 6),
        c in prop::collection::vec(-10.0f64..10.0, 6),
    ) {
        prop_assert!(attribute_loss(&a, &c) <= attribute_loss(&a, &b) + attribute_loss(&b, &c) + 1e-12);
        prop_assert_eq!(attribute_loss(&a, &b), attribute_loss(&b, &a));
        prop_assert_eq!(attribute_loss(&a, &a), 0.0);
    }
}

fn hyp() -> HyperParams {
    HyperParams {
        lambda_d: 0.2,
        lambda_n: 0.4,
        lambda_x: 3.0,
        bins: 8,
        hidden: 8,
        ..HyperParams::default()
    }
}

#[test]
fn encoder_output_is_non_negative_and_decoder_deterministic() {
    let g = connected_graph(25, 5, 0.2, 1);
    let h = hyp();
    let params = initial_params(&g, &h).unwrap();
    let l = normalized_laplacian(&g);
    let dec = eigendecompose(&l).unwrap();
    let z = encode_with(g.features(), &params.encoder, Propagation::Spectral(&dec)).unwrap();
    assert!(z.latent().as_slice().iter().all(|&v| v >= 0.0));
    let layers = match &params.attr {
        grasped_core::model::AttrDecoder::Gdn(layers) => layers,
        _ => unreachable!(),
    };
    let a = gdn_decode(z.latent(), &l, layers).unwrap();
    let b = gdn_decode(z.latent(), &l, layers).unwrap();
    assert_eq!(a.as_slice(), b.as_slice());
}

#[test]
fn scores_non_negative_and_scale_with_weights() {
    let g = connected_graph(30, 4, 0.2, 2);
    let h = hyp();
    let params = initial_params(&g, &h).unwrap();
    let base = score_nodes(&g, &params, &h).unwrap();
    assert!(base.iter().all(|&s| s >= 0.0));
    let c = 2.5;
    let scaled_hyp = HyperParams {
        lambda_d: c * h.lambda_d,
        lambda_n: c * h.lambda_n,
        lambda_x: c * h.lambda_x,
        ..h.clone()
    };
    let scaled = score_nodes(&g, &params, &scaled_hyp).unwrap();
    for (a, b) in base.iter().zip(&scaled) {
        assert!((b - c * a).abs() <= 1e-12 * b.abs().max(1.0));
    }
}

#[test]
fn attribute_only_score_is_attribute_loss() {
    let g = connected_graph(20, 3, 0.2, 3);
    let h = HyperParams {
        lambda_d: 0.0,
        lambda_n: 0.0,
        lambda_x: 1.0,
        ..hyp()
    };
    let params = initial_params(&g, &h).unwrap();
    let ctx = TrainingContext::new(&g, &h).unwrap();
    let eval = score_with_context(&ctx, &params, &h).unwrap();
    for (s, l) in eval.scores.iter().zip(&eval.per_node) {
        assert_eq!(*s, l.attribute);
    }
}

#[test]
fn twin_nodes_score_equally() {
    // Nodes 0 and 1 share neighbors {2, 3} and features; neither links to the other.
    let x = Matrix::from_rows(&[
        vec![1.0, 0.5],
        vec![1.0, 0.5],
        vec![0.2, -0.3],
        vec![-0.4, 0.9],
        vec![0.7, 0.7],
    ])
    .unwrap();
    let g = Graph::build_undirected(&[(0, 2), (0, 3), (1, 2), (1, 3), (2, 4), (3, 4)], 5, x, None).unwrap();
    let h = HyperParams {
        hidden: 6,
        bins: 4,
        ..hyp()
    };
    let scores = score_nodes(&g, &initial_params(&g, &h).unwrap(), &h).unwrap();
    assert!((scores[0] - scores[1]).abs() < 1e-9, "{scores:?}");
}

#[test]
fn encoder_and_decoder_are_permutation_equivariant() {
    for seed in 0..5 {
        let g = random_graph(20, 4, 0.25, 50 + seed);
        let mut rng = stream(seed, Purpose::Init);
        let mut perm: Vec<usize> = (0..20).collect();
        for i in (1..20).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let gp = g.permuted(&perm).unwrap();
        let h = hyp();
        let mut params = initial_params(&g, &h).unwrap();
        // Move θ off the identity so the graph actually matters.
        params.visit_tensors_mut(&mut |name, _, data, _| {
            if name.ends_with("theta") {
                data.iter_mut()
                    .enumerate()
                    .for_each(|(k, t)| *t = 0.5 + 0.3 * (k as f64).sin());
            }
        });
        let run = |g: &Graph| {
            let l = normalized_laplacian(g);
            let dec = eigendecompose(&l).unwrap();
            let z = encode_with(g.features(), &params.encoder, Propagation::Spectral(&dec)).unwrap();
            let layers = match &params.attr {
                grasped_core::model::AttrDecoder::Gdn(layers) => layers,
                _ => unreachable!(),
            };
            (z.latent().clone(), gdn_decode(z.latent(), &l, layers).unwrap())
        };
        let (z, x_hat) = run(&g);
        let (zp, x_hat_p) = run(&gp);
        for i in 0..20 {
            for j in 0..z.cols() {
                assert!((z[(i, j)] - zp[(perm[i], j)]).abs() < 1e-9);
            }
            for j in 0..x_hat.cols() {
                assert!((x_hat[(i, j)] - x_hat_p[(perm[i], j)]).abs() < 1e-9);
            }
        }
    }
}
