#![allow(dead_code)]

use flashgan_core::hetgraph::{build_graph, NodeTable};
use flashgan_core::{HeteroGraph, Schema, Split};
use rand::Rng;

/// Random review-layout graph: `nu` users (dim 3), `np` products (dim 2),
/// each possible edge present with probability `p`. Users 0 and 1 are
/// minority; the rest alternate train/val/test.
pub fn random_graph<R: Rng>(rng: &mut R, nu: usize, np: usize, p: f64) -> HeteroGraph {
    let schema = Schema::review_graph(3, 2);
    let mut users = NodeTable::new(3);
    for i in 0..nu {
        let row: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let split = match i % 5 {
            0..=2 => Split::Train,
            3 => Split::Val,
            _ => Split::Test,
        };
        users.push(&row, Some(u32::from(i < 2 || i % 7 == 3)), Some(split));
    }
    let pf: Vec<f64> = (0..np * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
    let products = NodeTable::unlabeled(2, pf);
    let mut uu = Vec::new();
    for a in 0..nu {
        for b in a + 1..nu {
            if rng.random_bool(p) {
                uu.push((a, b));
            }
        }
    }
    let mut up = Vec::new();
    for a in 0..nu {
        for b in 0..np {
            if rng.random_bool(p) {
                up.push((a, b));
            }
        }
    }
    let mut pp = Vec::new();
    for a in 0..np {
        for b in a + 1..np {
            if rng.random_bool(p) {
                pp.push((a, b));
            }
        }
    }
    build_graph(schema, vec![users, products], vec![uu, up, pp]).unwrap()
}
