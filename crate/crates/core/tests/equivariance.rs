mod common;

use flashgan_core::evalsuite::Classifier;
use flashgan_core::hetgraph::{build_graph, NodeTable};
use flashgan_core::neural::{MessageGraph, ParamStore, RelGnn, Tape, Tensor};
use flashgan_core::HeteroGraph;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Relabels every node type: new id of old node `i` is `perm[t][i]`.
fn permute(g: &HeteroGraph, perm: &[Vec<usize>]) -> HeteroGraph {
    let tables: Vec<NodeTable> = (0..g.num_node_types())
        .map(|t| {
            let old = g.node_table(t);
            let mut inv = vec![0; old.len()];
            for (i, &p) in perm[t].iter().enumerate() {
                inv[p] = i;
            }
            let mut table = NodeTable::new(old.dim);
            for &i in &inv {
                table.push(old.row(i), old.labels[i], old.splits[i]);
            }
            table
        })
        .collect();
    let edges = (0..g.num_edge_types())
        .map(|et| {
            let (st, dt) = (g.schema().edge_src(et), g.schema().edge_dst(et));
            g.canonical_edges(et).into_iter().map(|(s, d)| (perm[st][s], perm[dt][d])).collect()
        })
        .collect();
    build_graph(g.schema().clone(), tables, edges).unwrap()
}

fn shuffled(g: &HeteroGraph, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    (0..g.num_node_types())
        .map(|t| {
            let mut p: Vec<usize> = (0..g.num_nodes(t)).collect();
            p.shuffle(rng);
            p
        })
        .collect()
}

fn hidden(gnn: &RelGnn, params: &ParamStore, g: &HeteroGraph) -> Vec<Tensor> {
    let mg = MessageGraph::of_graph(g).unwrap();
    let mut tape = Tape::new(params);
    let xs: Vec<_> = (0..g.num_node_types())
        .map(|t| tape.constant(Tensor::from_vec(g.num_nodes(t), g.feature_dim(t), g.features(t).to_vec())))
        .collect();
    let h = gnn.forward(&mut tape, &mg, &xs).unwrap();
    h.iter().map(|&v| tape.value(v).clone()).collect()
}

#[test]
fn relgnn_outputs_permute_with_nodes() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = common::random_graph(&mut rng, 14, 6, 0.3);
        let perm = shuffled(&g, &mut rng);
        let pg = permute(&g, &perm);
        let mut params = ParamStore::new();
        let gnn = RelGnn::register(&mut params, "m", "m", g.schema(), &[5, 3]);
        params.initialize(seed);
        let (a, b) = (hidden(&gnn, &params, &g), hidden(&gnn, &params, &pg));
        for t in 0..2 {
            for (i, &p) in perm[t].iter().enumerate() {
                for (x, y) in a[t].row(i).iter().zip(b[t].row(p)) {
                    assert!((x - y).abs() <= 1e-12, "seed {seed} type {t} node {i}: {x} vs {y}");
                }
            }
        }
    }
}

#[test]
fn classifier_scores_permute_with_nodes() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let g = common::random_graph(&mut rng, 20, 5, 0.25);
    let perm = shuffled(&g, &mut rng);
    let pg = permute(&g, &perm);
    let clf = Classifier::new(g.schema(), &[6, 4], 3).unwrap();
    let nodes: Vec<usize> = (0..20).collect();
    let a = clf.predict_scores(&g, &nodes).unwrap();
    let moved: Vec<usize> = nodes.iter().map(|&i| perm[0][i]).collect();
    let b = clf.predict_scores(&pg, &moved).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-12);
    }
}
