//! Compare analytic gradients of the VGAE loss with central finite
//! differences on a few parameter entries.
//!
//! `cargo run --example gradient_check`

use gram::graph::{gen_double_ring, default_node_features, FeaturePolicy, Wiring};
use gram::nn::Matrix;
use gram::vgae::{VgaeConfig, VgaeModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> gram::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let g = default_node_features(&gen_double_ring(9, &mut rng, Wiring::Random)?, FeaturePolicy::default());
    let cfg = VgaeConfig { hidden_dim: 8, latent_dim: 4, ..VgaeConfig::default() };
    let mut model = VgaeModel::new(&cfg, g.feature_dim(), &mut rng)?;
    let noise = Matrix::from_fn(g.num_nodes(), 4, |r, c| ((r * 7 + c * 3) % 5) as f64 * 0.1 - 0.2);

    let (_, grads) = model.loss_and_grads(&g, Some(&noise))?;
    let step = 1e-5;
    let mut worst: f64 = 0.0;
    for (idx, grad) in grads.iter().enumerate() {
        let name = model.params().name(idx).to_string();
        let analytic = grad[(0, 0)];
        let original = model.params().get(idx)[(0, 0)];
        model.params_mut().get_mut(idx)[(0, 0)] = original + step;
        let up = model.loss_and_grads(&g, Some(&noise))?.0.total;
        model.params_mut().get_mut(idx)[(0, 0)] = original - step;
        let down = model.loss_and_grads(&g, Some(&noise))?.0.total;
        model.params_mut().get_mut(idx)[(0, 0)] = original;
        let numeric = (up - down) / (2.0 * step);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3);
        worst = worst.max(rel);
        println!("{name:<28} analytic {analytic:>12.6e}  numeric {numeric:>12.6e}  rel {rel:.1e}");
    }
    println!("largest relative error {worst:.1e}");
    Ok(())
}
