//! Closed-form score distributions of the two seven-node reference graphs
//! under the identity-weight model.
//!
//! `cargo run --example table1_oracle [-- <epsilon>]`

use gram::oracle::{propagate_identity, reference_graphs, reproduce_table1_at, score_distribution, TABLE1_EPSILON};

fn main() -> gram::Result<()> {
    let eps = std::env::args().nth(1).map_or(TABLE1_EPSILON, |e| e.parse().expect("epsilon must be a number"));
    let report = reproduce_table1_at(eps)?;
    print!("{}", report.to_text());

    // Propagated embeddings of the double ring, row by row.
    let (_, ring) = reference_graphs();
    let h = propagate_identity(&ring, 4)?;
    for n in 0..h.rows() {
        let row: Vec<String> = h.row(n).iter().map(|v| format!("{v:.3}")).collect();
        println!("h[{}] = [{}]", n + 1, row.join(", "));
    }
    let dist = score_distribution(&h, eps)?;
    println!(
        "ring score N({:.4}, {:.4}); attention-noise std {:.4}",
        dist.graph.mean, dist.graph.std, dist.graph_std_from_attention_model
    );
    Ok(())
}
