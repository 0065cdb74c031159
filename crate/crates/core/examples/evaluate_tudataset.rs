//! One-class evaluation on a TUDataset corpus such as MUTAG.
//!
//! `cargo run --release --example evaluate_tudataset -- <dir> <name> [normal-class]`

use gram::eval::{run_experiment, DataSource, DatasetSpec, ExperimentConfig};

fn main() -> gram::Result<()> {
    let mut args = std::env::args().skip(1);
    let (Some(dir), Some(name)) = (args.next(), args.next()) else {
        eprintln!("usage: evaluate_tudataset <dir> <name> [normal-class]");
        std::process::exit(1);
    };
    let normal_class = args.next().map(|c| c.parse().expect("normal class must be an integer"));
    let cfg = ExperimentConfig {
        datasets: vec![DatasetSpec {
            name: name.clone(),
            source: DataSource::TuDataset { path: dir.into(), name },
            features: None,
            normal_class,
        }],
        ..ExperimentConfig::default()
    };
    let out = run_experiment(&cfg)?;
    print!("{}", out.table.to_text());
    for c in out.table.cells.iter().filter(|c| c.anomalies_with_replacement) {
        println!("note: seed {} drew anomalies with replacement", c.seed);
    }
    Ok(())
}
