//! Trees-versus-double-rings experiment: train on trees, score held-out
//! trees and double rings, report AUC and AP over three seeds.
//!
//! `cargo run --release --example evaluate_synthetic [-- <epochs>]`

use gram::eval::{run_experiment, ExperimentConfig, Method};

fn main() -> gram::Result<()> {
    let mut cfg = ExperimentConfig::default();
    if let Some(epochs) = std::env::args().nth(1) {
        cfg.model.epochs = epochs.parse().expect("epochs must be an integer");
    }
    let start = std::time::Instant::now();
    let out = run_experiment(&cfg)?;
    print!("{}", out.table.to_text());
    for c in &out.table.cells {
        println!(
            "  {} {} seed {}: auc {:?} ap {:?}",
            c.dataset,
            c.method.name(),
            c.seed,
            c.auc,
            c.ap
        );
    }
    let gram = out.table.row("synthetic", Method::Gram).expect("gram row");
    println!("gram AUC {:.4}, AP {:.4} in {:.1}s", gram.auc_mean, gram.ap_mean, start.elapsed().as_secs_f64());
    Ok(())
}
