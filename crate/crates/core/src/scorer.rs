//! Gradient attention maps and the node- and graph-level anomaly scores.
//!
//! For a latent code `Z` pooled to `z = Σ_n Z_n`, the attention vector of
//! latent dimension `i` is the node-averaged gradient `α_i = (1/N) Σ_n ∂z_i/∂h_n`
//! taken at the encoder output `H`. Node scores are `s_n = Σ_i φ(α_iᵀ h_n)` and
//! the graph score is `Σ_n s_n`.

use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GramError, Result};
use crate::graph::Graph;
use crate::nn::{Activation, Matrix};
use crate::vgae::{reparameterize_on_tape, sample_standard_normal, VgaeModel};

/// How `E` is chosen when scoring.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum NoiseMode {
    /// `E = 0`, so `Z = Mu`.
    #[default]
    Deterministic,
    /// `E = noise_scale · ξ` with `ξ` standard normal drawn from `seed`.
    Sampled { seed: u64, noise_scale: f64 },
}

impl NoiseMode {
    fn noise(self, rows: usize, cols: usize) -> Result<Option<Matrix>> {
        match self {
            NoiseMode::Deterministic => Ok(None),
            NoiseMode::Sampled { seed, noise_scale } => {
                if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
                    return Err(GramError::Domain(format!(
                        "noise_scale {noise_scale} must be finite and nonnegative"
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok(Some(sample_standard_normal(rows, cols, &mut rng).scale(noise_scale)))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionMap {
    /// `I × J`; row `i` is `α_i`.
    pub alphas: Matrix,
    /// Pooled latent vector `z` (length `I`).
    pub latent: Vec<f64>,
    /// Node embeddings `H` (`N × J`).
    pub embedding: Matrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub graph_id: usize,
    pub label: Option<i64>,
    pub node_scores: Vec<f64>,
    pub graph_score: f64,
    pub noise_mode: NoiseMode,
}

/// Pooled latent `z` for an explicit noise matrix (`None` means `E = 0`).
pub fn latent_vector_with_noise(model: &VgaeModel, g: &Graph, noise: Option<&Matrix>) -> Result<Vec<f64>> {
    Ok(attention_with_noise(model, g, noise)?.latent)
}

pub fn latent_vector(model: &VgaeModel, g: &Graph, mode: NoiseMode) -> Result<Vec<f64>> {
    let noise = mode.noise(g.num_nodes(), model.latent_dim())?;
    latent_vector_with_noise(model, g, noise.as_ref())
}

/// Attention map for an explicit noise matrix (`None` means `E = 0`).
pub fn attention_with_noise(model: &VgaeModel, g: &Graph, noise: Option<&Matrix>) -> Result<AttentionMap> {
    let mut enc = model.encode(g)?;
    let tape = &mut enc.tape;
    let z = reparameterize_on_tape(tape, enc.mu, enc.log_sigma, noise)?;
    let pooled = tape.sum_rows(z);
    let latent = tape.value(pooled).data().to_vec();
    let embedding = tape.value(enc.h).clone();
    let (n, j) = embedding.shape();
    let dim = latent.len();

    let seeds: Vec<Matrix> = (0..dim).map(|i| Matrix::basis_row(dim, i)).collect();
    let grads = tape.backward_multi(pooled, &seeds)?;
    let mut alphas = Matrix::zeros(dim, j);
    for (i, gr) in grads.iter().enumerate() {
        let dh = gr.get_or_zeros(enc.h, (n, j));
        let mean = dh.sum_rows().scale(1.0 / n as f64);
        alphas.row_mut(i).copy_from_slice(mean.data());
    }
    if !alphas.is_finite() {
        return Err(GramError::Numeric("attention coefficients".into()));
    }
    Ok(AttentionMap {
        alphas,
        latent,
        embedding,
    })
}

pub fn attention_coefficients(model: &VgaeModel, g: &Graph, mode: NoiseMode) -> Result<AttentionMap> {
    let noise = mode.noise(g.num_nodes(), model.latent_dim())?;
    attention_with_noise(model, g, noise.as_ref())
}

/// `s_n = Σ_i φ(α_iᵀ h_n)` for every node, and their sum.
pub fn score_graph(map: &AttentionMap, phi: Activation) -> Result<(Vec<f64>, f64)> {
    let projected = map.embedding.matmul_nt(&map.alphas)?;
    let node_scores: Vec<f64> = (0..projected.rows())
        .map(|n| projected.row(n).iter().map(|&v| phi.apply(v)).sum())
        .collect();
    let graph_score = node_scores.iter().sum();
    Ok((node_scores, graph_score))
}

/// Attention map plus scores for one graph.
pub fn score(model: &VgaeModel, g: &Graph, phi: Activation, mode: NoiseMode, graph_id: usize) -> Result<ScoreReport> {
    let map = attention_coefficients(model, g, mode)?;
    let (node_scores, graph_score) = score_graph(&map, phi)?;
    Ok(ScoreReport {
        graph_id,
        label: g.label(),
        node_scores,
        graph_score,
        noise_mode: mode,
    })
}

/// Mean graph score over `samples` independent noise draws of scale
/// `noise_scale`, seeded from `seed`.
pub fn sampled_mean_score(
    model: &VgaeModel,
    g: &Graph,
    phi: Activation,
    samples: usize,
    seed: u64,
    noise_scale: f64,
) -> Result<f64> {
    if samples == 0 {
        return Err(GramError::Domain("noise sample count must be positive".into()));
    }
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..samples {
        let mode = NoiseMode::Sampled {
            seed: seeds.next_u64(),
            noise_scale,
        };
        total += score(model, g, phi, mode, 0)?.graph_score;
    }
    Ok(total / samples as f64)
}

/// Threshold at the `q`-quantile of reference (normal) scores, nearest-rank.
/// Graphs scoring above it are flagged.
pub fn threshold_at_quantile(scores: &[f64], q: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(GramError::Domain("no scores to threshold".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(GramError::Domain(format!("quantile {q} outside [0, 1]")));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Ok(sorted[rank - 1])
}

/// CSV with one row per graph; `sampled_means` adds a `sampled_mean_score`
/// column when present.
pub fn reports_csv(reports: &[ScoreReport], sampled_means: Option<&[f64]>) -> String {
    let mut out = String::from("graph_id,graph_score,label");
    if sampled_means.is_some() {
        out.push_str(",sampled_mean_score");
    }
    out.push('\n');
    for (k, r) in reports.iter().enumerate() {
        let label = r.label.map(|l| l.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}", r.graph_id, r.graph_score, label));
        if let Some(m) = sampled_means {
            out.push_str(&format!(",{}", m[k]));
        }
        out.push('\n');
    }
    out
}

pub fn write_reports(reports: &[ScoreReport], sampled_means: Option<&[f64]>, csv: &Path, json: &Path) -> Result<()> {
    std::fs::write(csv, reports_csv(reports, sampled_means)).map_err(|e| GramError::io(csv, e))?;
    let text = serde_json::to_string_pretty(reports)?;
    std::fs::write(json, text).map_err(|e| GramError::io(json, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{default_node_features, gen_binary_tree, gen_double_ring, FeaturePolicy, Wiring};
    use crate::vgae::VgaeConfig;

    fn canonical(ring: bool) -> Graph {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        if ring {
            gen_double_ring(7, &mut rng, Wiring::Canonical).unwrap()
        } else {
            gen_binary_tree(7, &mut rng, Wiring::Canonical).unwrap()
        }
    }

    fn s4a(g: &Graph) -> Matrix {
        let s = g.normalized_adjacency().matrix().clone();
        let mut h = g.adjacency_matrix();
        for _ in 0..4 {
            h = s.matmul(&h).unwrap();
        }
        h
    }

    #[test]
    fn identity_pipeline_has_unit_attention() {
        let g = canonical(false);
        let model = VgaeModel::identity_debug(7).unwrap();
        let map = attention_coefficients(&model, &g, NoiseMode::Deterministic).unwrap();
        assert_eq!(map.alphas, Matrix::identity(7));
        let h = s4a(&g);
        let col_sums = h.sum_rows();
        for (z, c) in map.latent.iter().zip(col_sums.data()) {
            assert!((z - c).abs() < 1e-12);
        }
    }

    #[test]
    fn single_node_latent_is_the_row() {
        let g = default_node_features(&Graph::from_edges(1, vec![]).unwrap(), FeaturePolicy::ConstantOne);
        let model = VgaeModel::identity_debug(1).unwrap();
        assert_eq!(latent_vector(&model, &g, NoiseMode::Deterministic).unwrap(), vec![1.0]);
    }

    #[test]
    fn reference_means_from_the_scorer() {
        let model = VgaeModel::identity_debug(7).unwrap();
        let tree = score(&model, &canonical(false), Activation::Relu, NoiseMode::Deterministic, 0).unwrap();
        assert!((tree.graph_score - 12.65).abs() < 0.01);
        let ring = score(&model, &canonical(true), Activation::Relu, NoiseMode::Deterministic, 1).unwrap();
        assert!((ring.graph_score - 16.32).abs() < 0.01);
        assert!((ring.node_scores[3] - 2.91).abs() < 0.01);
        assert_eq!(ring.graph_score, ring.node_scores.iter().sum::<f64>());
    }

    #[test]
    fn unit_attention_gives_row_sums() {
        let h = Matrix::from_rows(&[[0.5, 1.0], [2.0, 0.0]]);
        let map = AttentionMap {
            alphas: Matrix::identity(2),
            latent: vec![2.5, 1.0],
            embedding: h,
        };
        let (s, total) = score_graph(&map, Activation::Relu).unwrap();
        assert_eq!(s, vec![1.5, 2.0]);
        assert_eq!(total, 3.5);
    }

    #[test]
    fn deterministic_mode_is_repeatable() {
        let g = default_node_features(&canonical(true), FeaturePolicy::default());
        let cfg = VgaeConfig {
            hidden_dim: 8,
            latent_dim: 4,
            ..VgaeConfig::default()
        };
        let model = VgaeModel::new(&cfg, 11, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let a = attention_coefficients(&model, &g, NoiseMode::Deterministic).unwrap();
        let b = attention_coefficients(&model, &g, NoiseMode::Deterministic).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.alphas.shape(), (4, 8));
        let s1 = NoiseMode::Sampled { seed: 9, noise_scale: 1.0 };
        assert_eq!(
            attention_coefficients(&model, &g, s1).unwrap(),
            attention_coefficients(&model, &g, s1).unwrap()
        );
    }

    #[test]
    fn zero_scale_sampling_equals_deterministic() {
        let g = canonical(false);
        let model = VgaeModel::identity_debug(7).unwrap();
        let det = score(&model, &g, Activation::Relu, NoiseMode::Deterministic, 0).unwrap();
        let zero = score(&model, &g, Activation::Relu, NoiseMode::Sampled { seed: 1, noise_scale: 0.0 }, 0).unwrap();
        assert_eq!(det.node_scores, zero.node_scores);
    }

    #[test]
    fn quantile_threshold() {
        let s = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(threshold_at_quantile(&s, 0.5).unwrap(), 2.0);
        assert_eq!(threshold_at_quantile(&s, 1.0).unwrap(), 4.0);
        assert_eq!(threshold_at_quantile(&s, 0.0).unwrap(), 1.0);
        assert!(threshold_at_quantile(&[], 0.5).is_err());
    }

    #[test]
    fn csv_schema() {
        let r = ScoreReport {
            graph_id: 3,
            label: Some(1),
            node_scores: vec![1.0],
            graph_score: 1.0,
            noise_mode: NoiseMode::Deterministic,
        };
        assert_eq!(reports_csv(std::slice::from_ref(&r), None), "graph_id,graph_score,label\n3,1,1\n");
        assert_eq!(
            reports_csv(&[r], Some(&[0.5])),
            "graph_id,graph_score,label,sampled_mean_score\n3,1,1,0.5\n"
        );
    }
}
