use patchseg::eval::score;
use patchseg::graph::{modularity_hard, modularity_quadratic, one_hot, PatchGraph, SelfLoops};
use patchseg::io::{decode_features, encode_features};
use patchseg::loss::{loss_grad, loss_value};
use patchseg::nn::{softmax_rows, DenseMatrix};
use patchseg::pipeline::upsample_mask;
use patchseg::{PatchFeatureGrid, SegmentationMask, SoftAssignment};
use proptest::prelude::*;

fn graph_strategy() -> impl Strategy<Value = PatchGraph> {
    (3usize..12).prop_flat_map(|n| {
        proptest::collection::vec(any::<bool>(), n * (n - 1) / 2).prop_filter_map("needs an edge", move |bits| {
            let mut edges = Vec::new();
            let mut it = bits.into_iter();
            for i in 0..n {
                for j in i + 1..n {
                    if it.next().unwrap() {
                        edges.push((i, j));
                    }
                }
            }
            let g = PatchGraph::from_edges(n, &edges, SelfLoops::Strip).ok()?;
            (g.edge_count() > 0.0).then_some(g)
        })
    })
}

fn relabel(g: &PatchGraph, perm: &[usize]) -> PatchGraph {
    let n = g.n();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if g.has_edge(i, j) {
                edges.push((perm[i], perm[j]));
            }
        }
    }
    PatchGraph::from_edges(n, &edges, SelfLoops::Strip).unwrap()
}

proptest! {
    #[test]
    fn modularity_is_node_permutation_invariant(g in graph_strategy(), seed in any::<u64>()) {
        let n = g.n();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let labels: Vec<usize> = (0..n).map(|i| (seed >> (i % 64)) as usize & 1).collect();
        let mut moved = vec![0; n];
        for i in 0..n {
            moved[perm[i]] = labels[i];
        }
        let q = modularity_hard(&g, &labels);
        let q_moved = modularity_hard(&relabel(&g, &perm), &moved);
        prop_assert!((q - q_moved).abs() < 1e-12);
        prop_assert!((q - modularity_quadratic(&g, &one_hot(&labels, 2))).abs() < 1e-12);
    }

    #[test]
    fn modularity_is_cluster_relabel_invariant(g in graph_strategy(), bits in any::<u64>()) {
        let labels: Vec<usize> = (0..g.n()).map(|i| (bits >> i) as usize & 1).collect();
        let flipped: Vec<usize> = labels.iter().map(|l| 1 - l).collect();
        prop_assert!((modularity_hard(&g, &labels) - modularity_hard(&g, &flipped)).abs() < 1e-12);
    }

    #[test]
    fn softmax_rows_are_distributions(vals in proptest::collection::vec(-50.0f64..50.0, 12)) {
        let m = DenseMatrix::from_vec(4, 3, vals).unwrap();
        let s = softmax_rows(&m);
        for r in 0..4 {
            let row = s.row(r);
            prop_assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_gradient_rows_sum_under_uniform_shift(g in graph_strategy(), vals in proptest::collection::vec(0.0f64..1.0, 24)) {
        // L(C + t 1 1ᵀ) is smooth in t; the directional derivative along the
        // all-ones matrix must match the gradient's total sum
        let n = g.n();
        let c = DenseMatrix::from_fn(n, 2, |r, k| vals[(2 * r + k) % vals.len()] + 0.1);
        let grad = loss_grad(&g, &c).unwrap();
        let h = 1e-6;
        let shift = |t: f64| loss_value(&g, &c.map(|v| v + t));
        let numeric = (shift(h) - shift(-h)) / (2.0 * h);
        let analytic: f64 = grad.as_slice().iter().sum();
        prop_assert!((numeric - analytic).abs() < 1e-6 * analytic.abs().max(1.0));
    }

    #[test]
    fn feature_files_round_trip(gh in 1usize..5, gw in 1usize..5, dim in 1usize..6, seed in any::<u32>()) {
        let data = DenseMatrix::from_fn(gh * gw, dim, |r, c| ((r * 31 + c * 7) as f64 + seed as f64 * 1e-3).sin() as f32 as f64);
        let f = PatchFeatureGrid::new(gh, gw, data, 8 * gw as u32, 8 * gh as u32, 8).unwrap();
        let bytes = encode_features(&f);
        prop_assert_eq!(bytes.len(), 32 + 4 * gh * gw * dim);
        prop_assert_eq!(decode_features(&bytes).unwrap(), f);
    }

    #[test]
    fn iou_is_symmetric_and_bounded(a in proptest::collection::vec(0u8..2, 64), b in proptest::collection::vec(0u8..2, 64)) {
        let pa = SegmentationMask::new(8, 8, a).unwrap();
        let pb = SegmentationMask::new(8, 8, b).unwrap();
        let ab = score(&pa, &pb).unwrap();
        let ba = score(&pb, &pa).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab.miou));
        prop_assert_eq!(score(&pa, &pa).unwrap().miou, 1.0);
    }

    #[test]
    fn block_constant_upsampling_round_trips(labels in proptest::collection::vec(0usize..2, 30), patch in 2usize..9) {
        let (gh, gw) = (5, 6);
        let c = SoftAssignment::from_labels(&labels, 2).unwrap();
        let mask = upsample_mask(&c, 1, gh, gw, gw * patch, gh * patch).unwrap();
        for r in 0..gh {
            for col in 0..gw {
                let mut on = 0;
                for y in r * patch..(r + 1) * patch {
                    for x in col * patch..(col + 1) * patch {
                        on += mask.get(x, y) as usize;
                    }
                }
                let recovered = usize::from(2 * on > patch * patch);
                prop_assert_eq!(recovered, labels[r * gw + col]);
            }
        }
    }
}
