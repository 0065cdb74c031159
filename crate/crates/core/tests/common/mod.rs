//! Helpers shared by the integration tests: graph generators, finite
//! differences and brute-force metric oracles.
#![allow(dead_code)]

use std::sync::Arc;

use gram::graph::{default_node_features, FeaturePolicy, Graph};
use gram::nn::{forward, init_params, ForwardCtx, InitScheme, LayerSpec, Matrix, Params};
use gram::vgae::{Profile, VgaeConfig, VgaeModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;
/// Denominator floor so that near-zero gradients are compared absolutely.
pub const FD_FLOOR: f64 = 1e-3;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(FD_FLOOR)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(r: usize, c: usize, rng: &mut impl Rng) -> Matrix {
    let data = (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect();
    Matrix::from_vec(r, c, data).unwrap()
}

/// Connected graph: a random spanning tree plus a few extra edges.
pub fn random_connected_graph(n: usize, rng: &mut impl Rng) -> Graph {
    let mut edges = Vec::new();
    for k in 1..n {
        edges.push((rng.random_range(0..k), k));
    }
    for _ in 0..n / 2 {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        let e = (a.min(b), a.max(b));
        if a != b && !edges.iter().any(|&(x, y)| (x.min(y), x.max(y)) == e) {
            edges.push(e);
        }
    }
    Graph::from_edges(n, edges).unwrap()
}

/// Largest per-entry relative error between `analytic` and central
/// differences of `f` over every entry of `x`.
pub fn fd_matrix(x: &Matrix, analytic: &Matrix, mut f: impl FnMut(&Matrix) -> f64) -> f64 {
    let mut worst = 0.0f64;
    let mut probe = x.clone();
    for k in 0..x.len() {
        let orig = probe.data()[k];
        probe.data_mut()[k] = orig + FD_STEP;
        let up = f(&probe);
        probe.data_mut()[k] = orig - FD_STEP;
        let down = f(&probe);
        probe.data_mut()[k] = orig;
        worst = worst.max(rel_err(analytic.data()[k], (up - down) / (2.0 * FD_STEP)));
    }
    worst
}

/// Same, over every parameter matrix of a [`Params`] set.
pub fn fd_params(params: &Params, analytic: &[Matrix], mut f: impl FnMut(&Params) -> f64) -> f64 {
    let mut worst = 0.0f64;
    let mut probe = params.clone();
    for (idx, grad) in analytic.iter().enumerate() {
        for k in 0..grad.len() {
            let orig = probe.get(idx).data()[k];
            probe.get_mut(idx).data_mut()[k] = orig + FD_STEP;
            let up = f(&probe);
            probe.get_mut(idx).data_mut()[k] = orig - FD_STEP;
            let down = f(&probe);
            probe.get_mut(idx).data_mut()[k] = orig;
            worst = worst.max(rel_err(grad.data()[k], (up - down) / (2.0 * FD_STEP)));
        }
    }
    worst
}

pub fn layer_kinds(d: usize) -> Vec<(&'static str, Vec<LayerSpec>)> {
    vec![
        ("gcn", vec![LayerSpec::gcn(d, d + 1)]),
        ("affine", vec![LayerSpec::affine(d, d + 2)]),
        ("gelu", vec![LayerSpec::gelu(d)]),
        ("relu", vec![LayerSpec::relu(d)]),
        ("dropout", vec![LayerSpec::dropout(d, 0.3)]),
        ("global_add_pool", vec![LayerSpec::global_add_pool(d)]),
    ]
}

/// Worst FD relative error for each single-layer network, with respect to
/// both its parameters and its input, on a random graph and a random
/// linear readout. Dropout runs in train mode with a fixed mask seed.
pub fn layer_gradient_errors(seed: u64) -> Vec<(&'static str, f64)> {
    let mut r = rng(seed);
    let n = r.random_range(3..8);
    let d = r.random_range(2..5);
    let g = random_connected_graph(n, &mut r);
    let s: Arc<Matrix> = g.normalized_adjacency().shared().clone();
    let x = random_matrix(n, d, &mut r);
    let mask_seed = seed.wrapping_mul(31).wrapping_add(7);

    layer_kinds(d)
        .into_iter()
        .map(|(name, specs)| {
            let (net, params) = init_params(&specs, &mut r, InitScheme::GlorotUniform).unwrap();
            let run = |p: &Params, input: &Matrix| {
                let mut mask_rng = rng(mask_seed);
                let mut ctx = if name == "dropout" {
                    ForwardCtx::train(Some(&s), &mut mask_rng)
                } else {
                    ForwardCtx::eval(Some(&s))
                };
                forward(&net, p, input, &mut ctx).unwrap()
            };
            let probe = run(&params, &x);
            let (rows, cols) = probe.tape.value(probe.output).shape();
            let readout = random_matrix(rows, cols, &mut rng(seed ^ 0xabc));
            let objective = |p: &Params, input: &Matrix| {
                let out = run(p, input);
                out.tape.value(out.output).hadamard(&readout).unwrap().sum()
            };

            let mut out = run(&params, &x);
            let grads = out.tape.backward(out.output, &readout).unwrap();
            let pgrads: Vec<Matrix> = out
                .params
                .iter()
                .zip(params.shapes())
                .map(|(v, sh)| grads.get_or_zeros(*v, sh))
                .collect();
            let gx = grads.get_or_zeros(out.input, x.shape());
            let e_params = fd_params(&params, &pgrads, |p| objective(p, &x));
            let e_input = fd_matrix(&x, &gx, |xi| objective(&params, xi));
            (name, e_params.max(e_input))
        })
        .collect()
}

/// Worst FD relative errors of the full VGAE loss with fixed noise at a
/// jittered parameter point: `(parameters, H)`.
pub fn vgae_gradient_errors(seed: u64, profile: Profile) -> (f64, f64) {
    let mut r = rng(seed);
    let n = r.random_range(4..7);
    let g = default_node_features(&random_connected_graph(n, &mut r), FeaturePolicy::DegreeOneHot { cap: 3 });
    let cfg = VgaeConfig {
        gcn_layers: 2,
        hidden_dim: 4,
        latent_dim: 3,
        profile,
        dropout_rate: 0.0,
        beta: 0.6,
        seed,
        ..VgaeConfig::default()
    };
    let mut model = VgaeModel::new(&cfg, 4, &mut r).unwrap();
    // Zero biases can park a ReLU input exactly on its kink; move off it.
    for w in model.params_mut().values_mut() {
        for v in w.data_mut() {
            *v += r.random_range(-0.1..0.1);
        }
    }
    let noise = random_matrix(n, 3, &mut r).scale(0.5);
    let (_, grads) = model.loss_and_grads(&g, Some(&noise)).unwrap();
    let params = model.params().clone();
    let e_params = fd_params(&params, &grads, |p| {
        *model.params_mut() = p.clone();
        model.loss_and_grads(&g, Some(&noise)).unwrap().0.total
    });
    *model.params_mut() = params;

    let (h, gh) = model.embedding_and_loss_grad(&g, Some(&noise)).unwrap();
    let e_h = fd_matrix(&h, &gh, |hp| model.loss_and_grad_wrt_embedding(&g, hp, Some(&noise)).unwrap().0);
    (e_params, e_h)
}

/// `P(anomaly > normal) + ½ P(tie)` over all pairs.
pub fn brute_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                if si > sj {
                    wins += 1.0;
                } else if si == sj {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// Precision at each positive's rank, averaged, with the ranking defined
/// by counting how many items precede each one (stable for ties).
pub fn brute_ap(scores: &[f64], labels: &[u8]) -> f64 {
    let n = scores.len();
    let rank = |i: usize| {
        (0..n)
            .filter(|&j| scores[j] > scores[i] || (scores[j] == scores[i] && j < i))
            .count()
            + 1
    };
    let positives: Vec<usize> = (0..n).filter(|&i| labels[i] == 1).collect();
    let mut total = 0.0;
    for &i in &positives {
        let k = rank(i);
        let hits = (0..n).filter(|&j| labels[j] == 1 && rank(j) <= k).count();
        total += hits as f64 / k as f64;
    }
    total / positives.len() as f64
}

/// Four propagation steps of `A` written as the explicit five-fold sum
/// `h_nj = Σ_{k1..k4} â_{n k1} â_{k1 k2} â_{k2 k3} â_{k3 k4} a_{k4 j} /
/// (√d̂_n d̂_{k1} d̂_{k2} d̂_{k3} √d̂_{k4})`.
pub fn nested_sum_propagation(g: &Graph) -> Matrix {
    let n = g.num_nodes();
    let a = g.adjacency_matrix();
    let ah = |i: usize, j: usize| a[(i, j)] + if i == j { 1.0 } else { 0.0 };
    let d: Vec<f64> = (0..n).map(|i| (0..n).map(|j| ah(i, j)).sum()).collect();
    let mut h = Matrix::zeros(n, n);
    for row in 0..n {
        for col in 0..n {
            let mut total = 0.0;
            for k1 in 0..n {
                for k2 in 0..n {
                    for k3 in 0..n {
                        for k4 in 0..n {
                            let num = ah(row, k1) * ah(k1, k2) * ah(k2, k3) * ah(k3, k4) * a[(k4, col)];
                            if num != 0.0 {
                                total += num / (d[row].sqrt() * d[k1] * d[k2] * d[k3] * d[k4].sqrt());
                            }
                        }
                    }
                }
            }
            h[(row, col)] = total;
        }
    }
    h
}
