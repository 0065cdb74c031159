//! Empirical score spread versus the closed forms, under both noise models.
//!
//! `cargo run --release --example monte_carlo [-- <trials>]`

use gram::oracle::{monte_carlo_score, propagate_identity, reference_graphs, score_distribution, NoiseModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> gram::Result<()> {
    let trials = std::env::args().nth(1).map_or(10_000, |t| t.parse().expect("trials must be an integer"));
    let eps = 0.1;
    let (tree, ring) = reference_graphs();
    for (name, g) in [("binary tree", &tree), ("double ring", &ring)] {
        let analytic = score_distribution(&propagate_identity(g, 4)?, eps)?;
        println!(
            "{name}: closed form N({:.4}, {:.4}), attention-noise std {:.4}",
            analytic.graph.mean, analytic.graph.std, analytic.graph_std_from_attention_model
        );
        for model in [NoiseModel::AttentionPerturbation, NoiseModel::Reparameterized] {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let mc = monte_carlo_score(g, eps, trials, &mut rng, model)?;
            println!("  {model:?}: N({:.4}, {:.4}) over {trials} trials", mc.graph.mean, mc.graph.std);
        }
    }
    Ok(())
}
