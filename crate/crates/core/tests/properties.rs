use gnodeformer::autodiff::ParamSet;
use gnodeformer::fed::{dirichlet_partition, fedavg, induce_subgraph};
use gnodeformer::graph::{
    build_normalized_laplacian, load_dataset, split_masks, write_dataset, GraphDataset,
    LoadOptions, SplitFractions,
};
use gnodeformer::spectral::sym_eig;
use gnodeformer::Tensor;
use proptest::prelude::*;

fn symmetric(n: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-5.0f64..5.0, n * n).prop_map(move |v| {
        let mut m = Tensor::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, v[i * n + j]);
                m.set(j, i, v[i * n + j]);
            }
        }
        m
    })
}

fn graph(max_n: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (2..=max_n).prop_flat_map(|n| {
        let pairs = prop::collection::vec((0..n, 0..n), 0..3 * n);
        (
            Just(n),
            pairs.prop_map(|p| p.into_iter().filter(|(a, b)| a != b).collect()),
        )
    })
}

fn dataset(
    n: usize,
    edges: &[(usize, usize)],
    labels: Vec<usize>,
    features: Vec<f64>,
) -> GraphDataset {
    let adj = GraphDataset::adjacency_from_edges(n, edges).unwrap();
    let classes = labels.iter().max().unwrap() + 1;
    let masks = split_masks(&labels, SplitFractions::default(), 0).unwrap();
    GraphDataset::new(
        "prop",
        adj,
        Tensor::from_vec(n, 2, features).unwrap(),
        labels,
        classes,
        masks,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigendecomposition_is_orthonormal_and_exact(m in (1usize..=30).prop_flat_map(symmetric)) {
        let b = sym_eig(&m).unwrap();
        prop_assert!(b.orthonormality_error() <= 1e-8);
        prop_assert!(b.reconstruction_error(&m) <= 1e-8);
        prop_assert!(b.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
        let trace: f64 = (0..m.rows()).map(|i| m.get(i, i)).sum();
        let sum: f64 = b.eigenvalues().iter().sum();
        prop_assert!((trace - sum).abs() <= 1e-9 * (1.0 + trace.abs()) * m.rows() as f64);
    }

    #[test]
    fn laplacian_spectrum_lies_in_zero_two((n, edges) in graph(25)) {
        let adj = GraphDataset::adjacency_from_edges(n, &edges).unwrap();
        let lap = build_normalized_laplacian(&adj);
        let b = sym_eig(&lap).unwrap();
        let ev = b.eigenvalues();
        prop_assert!(ev[0] >= -1e-6 && ev[n - 1] <= 2.0 + 1e-6, "{ev:?}");
        if !edges.is_empty() {
            prop_assert!(ev[0].abs() <= 1e-8);
        }
    }

    #[test]
    fn fedavg_stays_inside_elementwise_range(
        sets in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 5), 1..6),
        raw_weights in prop::collection::vec(1u32..1000, 6),
    ) {
        let params: Vec<ParamSet> = sets
            .iter()
            .map(|v| {
                let mut p = ParamSet::new();
                p.insert("x", Tensor::from_vec(1, 5, v.clone()).unwrap()).unwrap();
                p
            })
            .collect();
        let weights: Vec<f64> = raw_weights[..sets.len()].iter().map(|&w| w as f64).collect();
        let refs: Vec<&ParamSet> = params.iter().collect();
        let out = fedavg(&refs, &weights).unwrap().flatten();
        let total: f64 = weights.iter().sum();
        for i in 0..5 {
            let lo = sets.iter().map(|s| s[i]).fold(f64::INFINITY, f64::min);
            let hi = sets.iter().map(|s| s[i]).fold(f64::NEG_INFINITY, f64::max);
            let mean: f64 = sets.iter().zip(&weights).map(|(s, w)| s[i] * w).sum::<f64>() / total;
            prop_assert!(lo <= out[i] && out[i] <= hi);
            prop_assert!((out[i] - mean).abs() <= 1e-9);
        }
    }

    #[test]
    fn partition_covers_every_node_once(
        labels in prop::collection::vec(0usize..4, 5..120),
        m in 1usize..6,
        alpha in prop::sample::select(vec![0.01, 0.3, 1.0, 50.0, 1e6]),
        seed in any::<u64>(),
    ) {
        prop_assume!(labels.len() >= m);
        let p = dirichlet_partition(&labels, m, alpha, seed).unwrap();
        prop_assert_eq!(p.clients.len(), m);
        prop_assert!(p.clients.iter().all(|c| !c.is_empty()));
        let mut all: Vec<usize> = p.clients.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        prop_assert_eq!(&p, &dirichlet_partition(&labels, m, alpha, seed).unwrap());
    }

    #[test]
    fn split_masks_are_disjoint_and_exhaustive(labels in prop::collection::vec(0usize..5, 1..200), seed in any::<u64>()) {
        let m = split_masks(&labels, SplitFractions::default(), seed).unwrap();
        for i in 0..labels.len() {
            prop_assert_eq!(m.train[i] as u8 + m.val[i] as u8 + m.test[i] as u8, 1);
        }
    }

    #[test]
    fn induced_subgraph_keeps_exactly_inner_edges(
        (n, edges) in graph(20),
        keep in prop::collection::vec(any::<bool>(), 20),
    ) {
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let ds = dataset(n, &edges, labels, vec![0.5; 2 * n]);
        let nodes: Vec<usize> = (0..n).filter(|&i| keep[i]).collect();
        prop_assume!(!nodes.is_empty());
        let sub = induce_subgraph(&ds, &nodes, SplitFractions::default(), 1).unwrap();
        let inside = ds.edges().iter().filter(|(a, b)| nodes.contains(a) && nodes.contains(b)).count();
        prop_assert_eq!(sub.num_edges(), inside);
        prop_assert_eq!(sub.num_nodes(), nodes.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn dataset_directory_round_trips(
        (n, edges) in graph(15),
        feats in prop::collection::vec(-1e6f64..1e6, 30),
        label_seed in any::<u64>(),
    ) {
        let labels: Vec<usize> = (0..n).map(|i| ((label_seed >> (i % 60)) & 1) as usize).collect();
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let ds = dataset(n, &edges, labels, feats[..2 * n].to_vec());
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &ds).unwrap();
        let back = load_dataset(dir.path(), &LoadOptions::default()).unwrap();
        prop_assert_eq!(back.adjacency(), ds.adjacency());
        prop_assert_eq!(back.features(), ds.features());
        prop_assert_eq!(back.labels(), ds.labels());
    }
}
