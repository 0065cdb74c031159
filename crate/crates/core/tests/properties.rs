mod common;

use common::{brute_ap, brute_auc, rng};
use gram::eval::{auc, average_precision, build_split, SplitSpec};
use gram::graph::{gen_binary_tree, gen_double_ring, Graph, GraphDataset, Wiring};
use gram::nn::{Activation, Matrix};
use gram::oracle::{propagate_identity, score_distribution};
use gram::scorer::{attention_coefficients, score_graph, NoiseMode};
use gram::vgae::{kl_loss, reparameterize, VgaeModel};
use proptest::prelude::*;

fn matrix(r: usize, c: usize, lo: f64, hi: f64) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(lo..hi, r * c).prop_map(move |d| Matrix::from_vec(r, c, d).unwrap())
}

fn scored(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (2..=max).prop_flat_map(|n| {
        (
            prop::collection::vec(prop_oneof![(-5i32..5).prop_map(f64::from), -5.0..5.0f64], n),
            prop::collection::vec(0u8..=1, n),
        )
    })
}

fn synthetic_graph() -> impl Strategy<Value = Graph> {
    (any::<u64>(), 5usize..=12, any::<bool>()).prop_map(|(seed, n, ring)| {
        let mut r = rng(seed);
        if ring {
            gen_double_ring(n, &mut r, Wiring::Random).unwrap()
        } else {
            gen_binary_tree(n, &mut r, Wiring::Random).unwrap()
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kl_is_nonnegative(mu in matrix(3, 2, -3.0, 3.0), ls in matrix(3, 2, -3.0, 3.0)) {
        prop_assert!(kl_loss(&mu, &ls).unwrap() >= 0.0);
    }

    #[test]
    fn kl_vanishes_only_at_the_prior(mu in matrix(2, 2, -1.0, 1.0), ls in matrix(2, 2, -1.0, 1.0)) {
        let kl = kl_loss(&mu, &ls).unwrap();
        let at_prior = mu.data().iter().chain(ls.data()).all(|&v| v == 0.0);
        prop_assert_eq!(kl == 0.0, at_prior);
    }

    #[test]
    fn zero_noise_reparameterization_is_the_mean(mu in matrix(3, 3, -2.0, 2.0), ls in matrix(3, 3, -2.0, 2.0)) {
        prop_assert_eq!(reparameterize(&mu, &ls, &Matrix::zeros(3, 3), 1.0).unwrap(), mu);
    }

    #[test]
    fn auc_matches_pairwise_count((s, l) in scored(10)) {
        prop_assume!(l.contains(&0) && l.contains(&1));
        prop_assert!((auc(&s, &l).unwrap() - brute_auc(&s, &l)).abs() < 1e-12);
    }

    #[test]
    fn auc_is_invariant_under_increasing_maps((s, l) in scored(12), a in 0.1..5.0f64, b in -3.0..3.0f64) {
        prop_assume!(l.contains(&0) && l.contains(&1));
        let t: Vec<f64> = s.iter().map(|x| (a * x + b).exp()).collect();
        prop_assert!((auc(&s, &l).unwrap() - auc(&t, &l).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn negating_scores_complements_auc(s in prop::collection::hash_set(-1000i32..1000, 2..12), seed in any::<u64>()) {
        let s: Vec<f64> = s.into_iter().map(f64::from).collect();
        let l: Vec<u8> = (0..s.len()).map(|i| ((seed >> (i % 64)) & 1) as u8).collect();
        prop_assume!(l.contains(&0) && l.contains(&1));
        let neg: Vec<f64> = s.iter().map(|x| -x).collect();
        prop_assert!((auc(&s, &l).unwrap() + auc(&neg, &l).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ap_matches_precision_at_k((s, l) in scored(10)) {
        prop_assume!(l.contains(&1));
        prop_assert!((average_precision(&s, &l).unwrap() - brute_ap(&s, &l)).abs() < 1e-12);
    }

    #[test]
    fn split_parts_are_disjoint(seed in any::<u64>(), normals in 2usize..30, anomalies in 1usize..30) {
        let g = |l| Graph::from_edges(2, vec![(0, 1)]).unwrap().with_label(Some(l));
        let graphs = (0..normals).map(|_| g(0)).chain((0..anomalies).map(|_| g(1))).collect();
        let ds = GraphDataset::new("p", graphs).unwrap();
        let split = build_split(&ds, &SplitSpec { seed, ..SplitSpec::default() }).unwrap();
        prop_assert!(split.train.iter().all(|i| !split.test.contains(i)));
        prop_assert!(split.train.iter().all(|&i| i < normals));
        let zeros = split.test_labels.iter().filter(|&&l| l == 0).count();
        prop_assert_eq!(2 * zeros, split.test.len());
    }

    #[test]
    fn normalized_adjacency_is_symmetric_and_bounded(g in synthetic_graph()) {
        let s = g.normalized_adjacency();
        prop_assert!(s.matrix().is_symmetric());
        prop_assert!(s.matrix().data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn identity_scores_equal_the_pooled_form(g in synthetic_graph()) {
        let n = g.num_nodes();
        let model = VgaeModel::identity_debug(n).unwrap();
        let map = attention_coefficients(&model, &g, NoiseMode::Deterministic).unwrap();
        let (nodes, total) = score_graph(&map, Activation::Relu).unwrap();
        prop_assert_eq!(total, nodes.iter().sum::<f64>());
        let alpha = map.alphas.sum_rows();
        let pooled: f64 = map.embedding.matmul_nt(&alpha).unwrap().sum();
        prop_assert!((total - pooled).abs() < 1e-10);
        let oracle = score_distribution(&propagate_identity(&g, 4).unwrap(), 0.1).unwrap();
        prop_assert!((total - oracle.graph.mean).abs() < 1e-9);
        for (s, o) in nodes.iter().zip(&oracle.nodes) {
            prop_assert!((s - o.mean).abs() < 1e-9);
        }
    }

    #[test]
    fn spreads_scale_linearly_in_epsilon(g in synthetic_graph(), eps in 0.0..2.0f64) {
        let h = propagate_identity(&g, 4).unwrap();
        let unit = score_distribution(&h, 1.0).unwrap();
        let scaled = score_distribution(&h, eps).unwrap();
        prop_assert_eq!(unit.graph.mean, scaled.graph.mean);
        prop_assert!((eps * unit.graph.std - scaled.graph.std).abs() <= 1e-12 * (1.0 + unit.graph.std));
        for (u, s) in unit.nodes.iter().zip(&scaled.nodes) {
            prop_assert_eq!(u.mean, s.mean);
            prop_assert!((eps * u.std - s.std).abs() <= 1e-12 * (1.0 + u.std));
        }
    }
}
