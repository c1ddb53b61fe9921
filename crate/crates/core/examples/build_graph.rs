//! Thresholded cosine graph over the patches of a planted instance.
//!
//! ```bash
//! cargo run -p patchseg --example build_graph -- 0.5
//! ```

use patchseg::graph::{build_adjacency, normalize_features, normalized_adjacency};
use patchseg::synthetic::{planted_instance, PlantedSpec};

fn main() -> patchseg::Result<()> {
    let tau: f64 = std::env::args().nth(1).map_or(0.5, |s| s.parse().expect("tau must be a number"));
    let inst = planted_instance(&PlantedSpec::default(), 0);
    let features = normalize_features(&inst.features)?;
    let graph = build_adjacency(&features, tau)?;

    let n = graph.n();
    let within = (0..n)
        .flat_map(|i| graph.neighbors(i).iter().map(move |&j| (i, j)))
        .filter(|&(i, j)| inst.patch_labels[i] == inst.patch_labels[j])
        .count();
    let total: usize = graph.degrees().iter().sum();
    println!("{n} patches, {} edges at tau = {tau}", graph.edge_count());
    println!("degree range {}..={}", graph.degrees().iter().min().unwrap(), graph.degrees().iter().max().unwrap());
    println!("{:.2}% of edge endpoints stay inside a planted region", 100.0 * within as f64 / total as f64);

    let a_hat = normalized_adjacency(&graph);
    println!("normalized adjacency: {} stored entries", a_hat.nnz());
    Ok(())
}
