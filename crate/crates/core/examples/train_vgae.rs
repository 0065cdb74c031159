//! Train the variational graph autoencoder on random binary trees and
//! save a checkpoint.
//!
//! `cargo run --release --example train_vgae [-- <epochs>]`

use gram::graph::{make_synthetic_dataset, FeaturePolicy, Wiring};
use gram::vgae::{train, VgaeConfig, VgaeModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> gram::Result<()> {
    let epochs = std::env::args().nth(1).map_or(50, |e| e.parse().expect("epochs must be an integer"));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let ds = make_synthetic_dataset(40, 7, 15, &mut rng, Wiring::Random)?.with_features(FeaturePolicy::default());
    let trees: Vec<_> = ds.graphs().iter().filter(|g| g.label() == Some(0)).cloned().collect();

    let cfg = VgaeConfig { epochs, dropout_rate: 0.0, ..VgaeConfig::default() };
    let (model, report) = train(&trees, &cfg)?;
    for e in report.epochs.iter().step_by((epochs / 10).max(1)) {
        println!(
            "epoch {:>4}  total {:.4}  features {:.4}  structure {:.4}  kl {:.4}",
            e.epoch, e.total, e.feature_recon, e.structure_recon, e.kl
        );
    }
    println!("{} optimizer steps in {:.2}s", report.optimizer_steps, report.wall_clock_secs);

    let path = std::env::temp_dir().join("gram-example-checkpoint.json");
    model.save(&path)?;
    let reloaded = VgaeModel::load(&path)?;
    println!(
        "checkpoint {} reloads with {} parameter tensors",
        path.display(),
        reloaded.params().len()
    );
    Ok(())
}
