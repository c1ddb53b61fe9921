//! Hard and relaxed modularity, and the training loss, on two triangles.

use patchseg::graph::{modularity_hard, modularity_quadratic, one_hot, PatchGraph, SelfLoops};
use patchseg::loss::loss_terms;
use patchseg::nn::DenseMatrix;

fn main() -> patchseg::Result<()> {
    let edges = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)];
    let g = PatchGraph::from_edges(6, &edges, SelfLoops::Strip)?;

    for labels in [[0, 0, 0, 1, 1, 1], [0; 6], [0, 1, 0, 1, 0, 1]] {
        println!(
            "{labels:?}: pairwise {:+.4}, trace {:+.4}",
            modularity_hard(&g, &labels),
            modularity_quadratic(&g, &one_hot(&labels, 2))
        );
    }

    let soft = DenseMatrix::from_fn(6, 2, |i, k| if (i < 3) == (k == 0) { 0.8 } else { 0.2 });
    let terms = loss_terms(&g, &soft);
    println!(
        "soft split: modularity {:.4}, regularizer {:.4}, loss {:.4}",
        terms.modularity,
        terms.regularizer,
        terms.total()
    );
    Ok(())
}
