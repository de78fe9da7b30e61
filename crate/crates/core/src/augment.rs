//! Growing the minority class of the training split to a target ratio, with
//! the trained generator or with the classic baselines.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flashgan::{attach_full, drop_edges, surviving_nodes, FlashGan};
use crate::hetgraph::{minority_and_majority, HeteroGraph, NewEdge, NewNode, OneHopSampler, Split};
use crate::neural::Tape;

pub const DEFAULT_SMOTE_NEIGHBORS: usize = 5;
pub const DEFAULT_IDLE_ATTEMPTS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    FlashGan,
    Oversample,
    Smote,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::FlashGan => "flashgan",
            Method::Oversample => "oversample",
            Method::Smote => "smote",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "flashgan" => Some(Method::FlashGan),
            "oversample" => Some(Method::Oversample),
            "smote" => Some(Method::Smote),
            _ => None,
        }
    }
}

/// Where one synthetic node came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub new_id: usize,
    pub method: Method,
    /// Source node ids: the clone/interpolation sources, or the subgraph center.
    pub sources: Vec<usize>,
    /// Sampling attempt that produced the node (generator method only).
    pub subgraph: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct Augmented {
    pub graph: HeteroGraph,
    pub provenance: Vec<Provenance>,
}

impl Augmented {
    pub fn provenance_csv(&self) -> String {
        let mut out = String::from("new_id,method,sources,subgraph\n");
        for p in &self.provenance {
            let sources: Vec<String> = p.sources.iter().map(usize::to_string).collect();
            let sub = p.subgraph.map(|s| s.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", p.new_id, p.method.as_str(), sources.join(";"), sub));
        }
        out
    }
}

/// Synthetic nodes needed to lift `minority / majority` to `alpha`:
/// `round(alpha · majority) − minority`.
pub fn plan_synthetic_count(majority: usize, minority: usize, alpha: f64) -> Result<usize> {
    let target = alpha * majority as f64;
    if !alpha.is_finite() || alpha < 0.0 || target < minority as f64 {
        return Err(Error::NothingToAdd { alpha, target, current: minority });
    }
    Ok(target.round() as usize - minority)
}

/// Budget computed from the training split of `g`.
pub fn plan_for(g: &HeteroGraph, alpha: f64) -> Result<usize> {
    let counts = g.class_counts(Some(Split::Train));
    let (m, big) = minority_and_majority(g, &counts);
    plan_synthetic_count(big, m, alpha)
}

fn minority_train(g: &HeteroGraph) -> Vec<usize> {
    let t = g.schema().classified_index();
    let minority = g.minority_class();
    g.labeled_nodes(Some(Split::Train)).into_iter().filter(|&i| g.label(t, i) == Some(minority)).collect()
}

/// Edges that give a new node of type `t` the same neighbors as `src`.
pub fn copy_edges(g: &HeteroGraph, t: usize, src: usize) -> Vec<NewEdge> {
    let schema = g.schema();
    let mut out = Vec::new();
    for et in 0..g.num_edge_types() {
        if schema.edge_src(et) == t {
            out.extend(g.out_neighbors(et, src).iter().map(|&other| NewEdge { edge_type: et, other, new_is_src: true }));
        }
        if schema.edge_dst(et) == t && !schema.edge_types[et].undirected {
            out.extend(g.in_neighbors(et, src).iter().map(|&other| NewEdge { edge_type: et, other, new_is_src: false }));
        }
    }
    out
}

/// Merges surviving generator nodes from fresh one-hop subgraphs until the
/// budget for `alpha` is met. The last subgraph's excess survivors are
/// dropped from the highest local index down.
pub fn flashgan_augment<R: Rng + ?Sized>(
    g: &HeteroGraph,
    net: &FlashGan,
    eta: &[f64],
    alpha: f64,
    rng: &mut R,
    max_idle_attempts: usize,
) -> Result<Augmented> {
    let budget = plan_for(g, alpha)?;
    if budget == 0 {
        return Ok(Augmented { graph: g.clone(), provenance: Vec::new() });
    }
    let t = g.schema().classified_index();
    let sampler = OneHopSampler::new(g, &g.schema().node_types[t].name)?;
    let k = net.config.synthetic_per_subgraph;
    let base = g.num_nodes(t);
    let mut nodes: Vec<NewNode> = Vec::with_capacity(budget);
    let mut provenance = Vec::with_capacity(budget);
    let (mut attempt, mut idle) = (0usize, 0usize);
    while nodes.len() < budget {
        if idle >= max_idle_attempts {
            return Err(Error::AugmentationStall { attempts: attempt });
        }
        let sub = sampler.sample(g, rng)?;
        let center = sub.center().map(|(_, c)| c);
        let noise = net.sample_noise(rng, k);
        let aug = attach_full(sub, k)?;
        let mut tape = Tape::new(&net.params);
        let pass = net.generator_pass(&mut tape, &aug, &noise)?;
        let mask = drop_edges(&aug, &pass.keep_values(&tape), eta)?;
        let survivors = surviving_nodes(&aug, &mask, tape.value(pass.x_synth));
        if survivors.is_empty() {
            idle += 1;
        } else {
            idle = 0;
            let take = survivors.len().min(budget - nodes.len());
            for node in survivors.into_iter().take(take) {
                provenance.push(Provenance {
                    new_id: base + nodes.len(),
                    method: Method::FlashGan,
                    sources: center.into_iter().collect(),
                    subgraph: Some(attempt),
                });
                nodes.push(node);
            }
        }
        attempt += 1;
    }
    Ok(Augmented { graph: g.with_new_nodes(t, &nodes)?, provenance })
}

/// Random duplication of minority training nodes together with all their edges.
pub fn oversample<R: Rng + ?Sized>(g: &HeteroGraph, alpha: f64, rng: &mut R) -> Result<Augmented> {
    let budget = plan_for(g, alpha)?;
    let pool = minority_train(g);
    if budget > 0 && pool.is_empty() {
        return Err(Error::UndefinedRatio("no minority training nodes to duplicate".into()));
    }
    let t = g.schema().classified_index();
    let base = g.num_nodes(t);
    let minority = g.minority_class();
    let mut nodes = Vec::with_capacity(budget);
    let mut provenance = Vec::with_capacity(budget);
    for j in 0..budget {
        let src = pool[rng.random_range(0..pool.len())];
        nodes.push(NewNode {
            features: g.feature_row(t, src).to_vec(),
            label: Some(minority),
            split: Some(Split::Train),
            edges: copy_edges(g, t, src),
        });
        provenance.push(Provenance { new_id: base + j, method: Method::Oversample, sources: vec![src], subgraph: None });
    }
    Ok(Augmented { graph: g.with_new_nodes(t, &nodes)?, provenance })
}

/// `x_src + u · (x_nb − x_src)`.
pub fn interpolate(x_src: &[f64], x_nb: &[f64], u: f64) -> Vec<f64> {
    x_src.iter().zip(x_nb).map(|(&a, &b)| a + u * (b - a)).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `k` nearest other members of `pool` to `pool[i]`, ties by id.
fn nearest(g: &HeteroGraph, t: usize, pool: &[usize], i: usize, k: usize) -> Vec<usize> {
    let x = g.feature_row(t, pool[i]);
    let mut d: Vec<(f64, usize)> = pool
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &p)| (sq_dist(x, g.feature_row(t, p)), p))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.truncate(k);
    d.into_iter().map(|(_, p)| p).collect()
}

/// SMOTE interpolation between a minority training node and one of its
/// `k_nn` nearest minority neighbors; the new node inherits the source's
/// neighbors.
pub fn smote<R: Rng + ?Sized>(g: &HeteroGraph, alpha: f64, k_nn: usize, rng: &mut R) -> Result<Augmented> {
    let budget = plan_for(g, alpha)?;
    let pool = minority_train(g);
    if budget > 0 && pool.len() < 2 {
        return Err(Error::SmoteDegenerate(pool.len()));
    }
    if k_nn == 0 {
        return Err(Error::Config("smote needs k_nn >= 1".into()));
    }
    let t = g.schema().classified_index();
    let base = g.num_nodes(t);
    let minority = g.minority_class();
    let mut knn: Vec<Option<Vec<usize>>> = vec![None; pool.len()];
    let mut nodes = Vec::with_capacity(budget);
    let mut provenance = Vec::with_capacity(budget);
    for j in 0..budget {
        let i = rng.random_range(0..pool.len());
        let nbs = knn[i].get_or_insert_with(|| nearest(g, t, &pool, i, k_nn));
        let nb = nbs[rng.random_range(0..nbs.len())];
        let u: f64 = rng.random();
        let src = pool[i];
        nodes.push(NewNode {
            features: interpolate(g.feature_row(t, src), g.feature_row(t, nb), u),
            label: Some(minority),
            split: Some(Split::Train),
            edges: copy_edges(g, t, src),
        });
        provenance.push(Provenance { new_id: base + j, method: Method::Smote, sources: vec![src, nb], subgraph: None });
    }
    Ok(Augmented { graph: g.with_new_nodes(t, &nodes)?, provenance })
}

/// `n / (C · n_c)` for per-class counts.
pub fn class_weights(counts: &[usize]) -> Result<Vec<f64>> {
    if counts.contains(&0) {
        return Err(Error::UndefinedRatio(format!("empty class among {counts:?}")));
    }
    let n: usize = counts.iter().sum();
    let c = counts.len() as f64;
    Ok(counts.iter().map(|&k| n as f64 / (c * k as f64)).collect())
}

/// Loss weights from the training-split class counts of `g`.
pub fn reweight_weights(g: &HeteroGraph) -> Result<Vec<f64>> {
    class_weights(&g.class_counts(Some(Split::Train)))
}
