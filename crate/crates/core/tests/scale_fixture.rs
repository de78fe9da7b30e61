//! Review-graph shape at the scale of the larger public benchmark, used only
//! to exercise construction, accounting and sampling at size.

use std::collections::HashSet;

use flashgan_core::hetgraph::{build_graph, imbalance_ratio, sample_one_hop, NodeTable};
use flashgan_core::{Schema, Split};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const USERS: usize = 7_017;
const PRODUCTS: usize = 4_684;
const UU_EDGES: usize = 535_244;

#[test]
fn builds_and_samples_at_benchmark_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let minority = (USERS as f64 * 0.097).round() as usize;
    let mut users = NodeTable::new(4);
    for i in 0..USERS {
        let row: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        users.push(&row, Some(u32::from(i < minority)), Some(Split::Train));
    }
    let products = NodeTable::unlabeled(2, (0..PRODUCTS * 2).map(|_| rng.random_range(-1.0..1.0)).collect());
    let mut seen = HashSet::with_capacity(UU_EDGES);
    while seen.len() < UU_EDGES {
        let (a, b) = (rng.random_range(0..USERS), rng.random_range(0..USERS));
        if a != b {
            seen.insert((a.min(b), a.max(b)));
        }
    }
    let mut uu: Vec<(usize, usize)> = seen.into_iter().collect();
    uu.sort_unstable();
    let up: Vec<(usize, usize)> = (0..USERS).map(|u| (u, rng.random_range(0..PRODUCTS))).collect();
    let g = build_graph(Schema::review_graph(4, 2), vec![users, products], vec![uu, up, vec![]]).unwrap();

    assert_eq!(g.num_nodes(0), USERS);
    assert_eq!(g.num_nodes(1), PRODUCTS);
    assert_eq!(g.num_canonical_edges(0), UU_EDGES);
    assert_eq!(g.num_edges(0), 2 * UU_EDGES);
    assert_eq!(g.class_counts(None), vec![USERS - minority, minority]);
    assert_eq!(minority, 681);
    let ir = imbalance_ratio(&g, None).unwrap();
    assert!((ir - 681.0 / 6336.0).abs() < 1e-15);

    let sub = sample_one_hop(&g, &mut rng, "user").unwrap();
    let (_, c) = sub.center().unwrap();
    assert_eq!(sub.num_nodes(0), g.out_neighbors(0, c).len() + 1);
}
