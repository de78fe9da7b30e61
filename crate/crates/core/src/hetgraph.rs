//! Typed heterogeneous attributed graphs.
//!
//! A [`HeteroGraph`] holds one feature table per node type and one sorted,
//! duplicate-free list of directed `(src, dst)` pairs per edge type. Undirected
//! edge types store both orientations so every consumer can treat adjacency as
//! plain directed lists. Directed edge types additionally expose a derived
//! reverse [`Relation`] for message passing.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_CENTER_RETRIES: usize = 32;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeTypeDef {
    pub name: String,
    pub feature_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeTypeDef {
    pub name: String,
    pub src: String,
    pub dst: String,
    pub undirected: bool,
}

/// Which node type carries labels, and which class is the minority.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub node_type: String,
    pub num_classes: u32,
    pub minority_class: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub node_types: Vec<NodeTypeDef>,
    pub edge_types: Vec<EdgeTypeDef>,
    pub classified: ClassSpec,
}

impl Schema {
    pub fn validate(&self) -> Result<()> {
        for (i, nt) in self.node_types.iter().enumerate() {
            if self.node_types[..i].iter().any(|o| o.name == nt.name) {
                return Err(Error::Schema(format!("duplicate node type `{}`", nt.name)));
            }
        }
        for (i, et) in self.edge_types.iter().enumerate() {
            if self.edge_types[..i].iter().any(|o| o.name == et.name) {
                return Err(Error::Schema(format!("duplicate edge type `{}`", et.name)));
            }
            for end in [&et.src, &et.dst] {
                if self.node_type_index(end).is_none() {
                    return Err(Error::Schema(format!(
                        "edge type `{}` references unknown node type `{end}`",
                        et.name
                    )));
                }
            }
            if et.undirected && et.src != et.dst {
                return Err(Error::Schema(format!(
                    "undirected edge type `{}` must connect a node type to itself",
                    et.name
                )));
            }
        }
        if self.node_type_index(&self.classified.node_type).is_none() {
            return Err(Error::Schema(format!(
                "classified node type `{}` is not declared",
                self.classified.node_type
            )));
        }
        if self.classified.num_classes < 2 || self.classified.minority_class >= self.classified.num_classes {
            return Err(Error::Schema(format!(
                "class spec needs >= 2 classes and a minority class in range, got {:?}",
                self.classified
            )));
        }
        Ok(())
    }

    pub fn node_type_index(&self, name: &str) -> Option<usize> {
        self.node_types.iter().position(|t| t.name == name)
    }

    pub fn edge_type_index(&self, name: &str) -> Option<usize> {
        self.edge_types.iter().position(|t| t.name == name)
    }

    pub fn classified_index(&self) -> usize {
        self.node_type_index(&self.classified.node_type)
            .expect("validated schema")
    }

    pub fn edge_src(&self, et: usize) -> usize {
        self.node_type_index(&self.edge_types[et].src).expect("validated schema")
    }

    pub fn edge_dst(&self, et: usize) -> usize {
        self.node_type_index(&self.edge_types[et].dst).expect("validated schema")
    }

    /// Edge types with at least one endpoint of the classified node type.
    pub fn scored_edge_types(&self) -> Vec<usize> {
        let c = self.classified_index();
        (0..self.edge_types.len())
            .filter(|&et| self.edge_src(et) == c || self.edge_dst(et) == c)
            .collect()
    }

    /// The two-node-type, three-edge-type review-graph layout: users and
    /// products with `uu` (undirected), `up` (directed) and `pp` (undirected).
    pub fn review_graph(user_dim: usize, product_dim: usize) -> Schema {
        Schema {
            node_types: vec![
                NodeTypeDef { name: "user".into(), feature_dim: user_dim },
                NodeTypeDef { name: "product".into(), feature_dim: product_dim },
            ],
            edge_types: vec![
                EdgeTypeDef { name: "uu".into(), src: "user".into(), dst: "user".into(), undirected: true },
                EdgeTypeDef { name: "up".into(), src: "user".into(), dst: "product".into(), undirected: false },
                EdgeTypeDef { name: "pp".into(), src: "product".into(), dst: "product".into(), undirected: true },
            ],
            classified: ClassSpec { node_type: "user".into(), num_classes: 2, minority_class: 1 },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// Row-major feature matrix plus optional label and split per row.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct NodeTable {
    pub dim: usize,
    pub features: Vec<f64>,
    pub labels: Vec<Option<u32>>,
    pub splits: Vec<Option<Split>>,
}

impl NodeTable {
    pub fn new(dim: usize) -> Self {
        NodeTable { dim, ..Default::default() }
    }

    /// Unlabeled table with the given rows.
    pub fn unlabeled(dim: usize, features: Vec<f64>) -> Self {
        let n = features.len().checked_div(dim).unwrap_or(0);
        NodeTable {
            dim,
            features,
            labels: vec![None; n],
            splits: vec![None; n],
        }
    }

    pub fn push(&mut self, row: &[f64], label: Option<u32>, split: Option<Split>) {
        self.features.extend_from_slice(row);
        self.labels.push(label);
        self.splits.push(split);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }
}

/// A message-passing relation: an edge type, possibly traversed dst→src.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Relation {
    pub edge_type: usize,
    pub reversed: bool,
}

#[derive(Clone, Debug, Default)]
struct Csr {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl Csr {
    fn build(n: usize, pairs: impl Iterator<Item = (usize, usize)>) -> Csr {
        let pairs: Vec<(usize, usize)> = pairs.collect();
        let mut offsets = vec![0usize; n + 1];
        for &(s, _) in &pairs {
            offsets[s + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut targets = vec![0usize; pairs.len()];
        for (s, d) in pairs {
            targets[cursor[s]] = d;
            cursor[s] += 1;
        }
        for i in 0..n {
            targets[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        Csr { offsets, targets }
    }

    fn row(&self, i: usize) -> &[usize] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }
}

/// Immutable heterogeneous graph. Safe to share across threads.
#[derive(Clone, Debug)]
pub struct HeteroGraph {
    schema: Schema,
    nodes: Vec<NodeTable>,
    edges: Vec<Vec<(usize, usize)>>,
    out_adj: Vec<Csr>,
    in_adj: Vec<Csr>,
}

impl PartialEq for HeteroGraph {
    fn eq(&self, other: &Self) -> bool {
        self.schema == other.schema && self.nodes == other.nodes && self.edges == other.edges
    }
}

/// Builds a graph from per-type node tables and per-type edge lists (both in
/// schema order). Undirected edge types take each pair once, in either
/// orientation, and are symmetrized here.
pub fn build_graph(
    schema: Schema,
    node_tables: Vec<NodeTable>,
    edge_tables: Vec<Vec<(usize, usize)>>,
) -> Result<HeteroGraph> {
    schema.validate()?;
    if edge_tables.len() != schema.edge_types.len() {
        return Err(Error::dim("edge tables", schema.edge_types.len(), edge_tables.len()));
    }
    let mut directed = Vec::with_capacity(edge_tables.len());
    for (et, list) in edge_tables.into_iter().enumerate() {
        if schema.edge_types[et].undirected {
            let mut sym = Vec::with_capacity(list.len() * 2);
            for (s, d) in list {
                sym.push((s, d));
                if s != d {
                    sym.push((d, s));
                }
            }
            directed.push(sym);
        } else {
            directed.push(list);
        }
    }
    HeteroGraph::from_directed(schema, node_tables, directed)
}

impl HeteroGraph {
    /// Validates and indexes fully directed edge lists (undirected types must
    /// already contain both orientations).
    pub(crate) fn from_directed(
        schema: Schema,
        nodes: Vec<NodeTable>,
        mut edges: Vec<Vec<(usize, usize)>>,
    ) -> Result<HeteroGraph> {
        schema.validate()?;
        if nodes.len() != schema.node_types.len() {
            return Err(Error::dim("node tables", schema.node_types.len(), nodes.len()));
        }
        for (t, table) in nodes.iter().enumerate() {
            let def = &schema.node_types[t];
            if table.dim != def.feature_dim {
                return Err(Error::dim(format!("feature dim of `{}`", def.name), def.feature_dim, table.dim));
            }
            let n = table.labels.len();
            if table.features.len() != n * table.dim {
                return Err(Error::dim(format!("feature rows of `{}`", def.name), n * table.dim, table.features.len()));
            }
            if table.splits.len() != n {
                return Err(Error::dim(format!("split column of `{}`", def.name), n, table.splits.len()));
            }
            let classified = def.name == schema.classified.node_type;
            for (i, label) in table.labels.iter().enumerate() {
                if let Some(c) = label {
                    if !classified {
                        return Err(Error::Schema(format!("node {i} of unlabeled type `{}` has a label", def.name)));
                    }
                    if *c >= schema.classified.num_classes {
                        return Err(Error::Schema(format!("node {i} of `{}` has out-of-range class {c}", def.name)));
                    }
                }
            }
        }
        for (et, list) in edges.iter_mut().enumerate() {
            let def = &schema.edge_types[et];
            let ns = nodes[schema.edge_src(et)].len();
            let nd = nodes[schema.edge_dst(et)].len();
            for &(s, d) in list.iter() {
                if s >= ns || d >= nd {
                    return Err(Error::Schema(format!(
                        "edge ({s}, {d}) of `{}` out of range ({ns} x {nd} nodes)",
                        def.name
                    )));
                }
            }
            list.sort_unstable();
            if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::DuplicateEdge { edge_type: def.name.clone(), src: w[0].0, dst: w[0].1 });
            }
            if def.undirected {
                for &(s, d) in list.iter() {
                    if list.binary_search(&(d, s)).is_err() {
                        return Err(Error::Schema(format!(
                            "undirected edge type `{}` has ({s}, {d}) without its reverse",
                            def.name
                        )));
                    }
                }
            }
        }
        let mut out_adj = Vec::with_capacity(edges.len());
        let mut in_adj = Vec::with_capacity(edges.len());
        for (et, list) in edges.iter().enumerate() {
            let ns = nodes[schema.edge_src(et)].len();
            let nd = nodes[schema.edge_dst(et)].len();
            out_adj.push(Csr::build(ns, list.iter().copied()));
            in_adj.push(Csr::build(nd, list.iter().map(|&(s, d)| (d, s))));
        }
        Ok(HeteroGraph { schema, nodes, edges, out_adj, in_adj })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn node_table(&self, t: usize) -> &NodeTable {
        &self.nodes[t]
    }

    pub fn num_node_types(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edge_types(&self) -> usize {
        self.edges.len()
    }

    pub fn num_nodes(&self, t: usize) -> usize {
        self.nodes[t].len()
    }

    pub fn feature_dim(&self, t: usize) -> usize {
        self.nodes[t].dim
    }

    pub fn features(&self, t: usize) -> &[f64] {
        &self.nodes[t].features
    }

    pub fn feature_row(&self, t: usize, i: usize) -> &[f64] {
        self.nodes[t].row(i)
    }

    pub fn label(&self, t: usize, i: usize) -> Option<u32> {
        self.nodes[t].labels[i]
    }

    pub fn split(&self, t: usize, i: usize) -> Option<Split> {
        self.nodes[t].splits[i]
    }

    /// All stored directed pairs of an edge type, sorted.
    pub fn edges(&self, et: usize) -> &[(usize, usize)] {
        &self.edges[et]
    }

    pub fn num_edges(&self, et: usize) -> usize {
        self.edges[et].len()
    }

    /// One entry per logical edge: undirected types keep only `src <= dst`.
    pub fn canonical_edges(&self, et: usize) -> Vec<(usize, usize)> {
        if self.schema.edge_types[et].undirected {
            self.edges[et].iter().copied().filter(|&(s, d)| s <= d).collect()
        } else {
            self.edges[et].clone()
        }
    }

    pub fn num_canonical_edges(&self, et: usize) -> usize {
        if self.schema.edge_types[et].undirected {
            self.edges[et].iter().filter(|&&(s, d)| s <= d).count()
        } else {
            self.edges[et].len()
        }
    }

    pub fn out_neighbors(&self, et: usize, src: usize) -> &[usize] {
        self.out_adj[et].row(src)
    }

    pub fn in_neighbors(&self, et: usize, dst: usize) -> &[usize] {
        self.in_adj[et].row(dst)
    }

    /// Message-passing relations: every edge type forward, plus a derived
    /// reverse for each directed type.
    pub fn relations(&self) -> Vec<Relation> {
        relations_of(&self.schema)
    }

    /// Number of incident edges of node `i` of type `t` across all edge types
    /// (undirected edges counted once).
    pub fn degree(&self, t: usize, i: usize) -> usize {
        let mut deg = 0;
        for et in 0..self.edges.len() {
            let undirected = self.schema.edge_types[et].undirected;
            if self.schema.edge_src(et) == t {
                deg += self.out_neighbors(et, i).len();
            }
            if self.schema.edge_dst(et) == t && !undirected {
                deg += self.in_neighbors(et, i).len();
            }
        }
        deg
    }

    /// Labeled nodes of the classified type, optionally restricted to a split.
    pub fn labeled_nodes(&self, split: Option<Split>) -> Vec<usize> {
        let t = self.schema.classified_index();
        let table = &self.nodes[t];
        (0..table.len())
            .filter(|&i| table.labels[i].is_some() && (split.is_none() || table.splits[i] == split))
            .collect()
    }

    pub fn class_counts(&self, split: Option<Split>) -> Vec<usize> {
        let t = self.schema.classified_index();
        let mut counts = vec![0usize; self.schema.classified.num_classes as usize];
        for i in self.labeled_nodes(split) {
            counts[self.nodes[t].labels[i].unwrap() as usize] += 1;
        }
        counts
    }

    pub fn minority_class(&self) -> u32 {
        self.schema.classified.minority_class
    }

    /// Returns a copy of the graph with extra nodes of type `t` appended
    /// (new ids continue from the current count) and their edges merged.
    pub fn with_new_nodes(&self, t: usize, new_nodes: &[NewNode]) -> Result<HeteroGraph> {
        let mut nodes = self.nodes.clone();
        let mut edges = self.edges.clone();
        let base = nodes[t].len();
        for (j, node) in new_nodes.iter().enumerate() {
            if node.features.len() != nodes[t].dim {
                return Err(Error::dim("new node features", nodes[t].dim, node.features.len()));
            }
            let id = base + j;
            nodes[t].push(&node.features, node.label, node.split);
            for e in &node.edges {
                let et = e.edge_type;
                let (s, d) = if e.new_is_src { (id, e.other) } else { (e.other, id) };
                let expected = if e.new_is_src { self.schema.edge_src(et) } else { self.schema.edge_dst(et) };
                if expected != t {
                    return Err(Error::Schema(format!(
                        "new node of type {t} cannot sit on that side of edge type `{}`",
                        self.schema.edge_types[et].name
                    )));
                }
                edges[et].push((s, d));
                if self.schema.edge_types[et].undirected && s != d {
                    edges[et].push((d, s));
                }
            }
        }
        HeteroGraph::from_directed(self.schema.clone(), nodes, edges)
    }
}

pub(crate) fn relations_of(schema: &Schema) -> Vec<Relation> {
    let mut rels = Vec::new();
    for (et, def) in schema.edge_types.iter().enumerate() {
        rels.push(Relation { edge_type: et, reversed: false });
        if !def.undirected {
            rels.push(Relation { edge_type: et, reversed: true });
        }
    }
    rels
}

impl Relation {
    pub fn src_type(&self, schema: &Schema) -> usize {
        if self.reversed { schema.edge_dst(self.edge_type) } else { schema.edge_src(self.edge_type) }
    }

    pub fn dst_type(&self, schema: &Schema) -> usize {
        if self.reversed { schema.edge_src(self.edge_type) } else { schema.edge_dst(self.edge_type) }
    }

    pub fn name(&self, schema: &Schema) -> String {
        let base = &schema.edge_types[self.edge_type].name;
        if self.reversed { format!("rev_{base}") } else { base.clone() }
    }
}

/// A node to be merged into a graph by [`HeteroGraph::with_new_nodes`].
#[derive(Clone, Debug, PartialEq)]
pub struct NewNode {
    pub features: Vec<f64>,
    pub label: Option<u32>,
    pub split: Option<Split>,
    pub edges: Vec<NewEdge>,
}

/// Edge from a new node to an existing node. Undirected types are
/// symmetrized on merge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NewEdge {
    pub edge_type: usize,
    pub other: usize,
    pub new_is_src: bool,
}

/// Induced subgraph with local (dense, per type) ids.
#[derive(Clone, Debug)]
pub struct Subgraph<'g> {
    graph: &'g HeteroGraph,
    nodes: Vec<Vec<usize>>,
    local: Vec<HashMap<usize, usize>>,
    edges: Vec<Vec<(usize, usize)>>,
    center: Option<(usize, usize)>,
}

/// Extracts the subgraph induced by `selection` (global ids per node type).
/// Duplicates in the selection are ignored.
pub fn induced_subgraph<'g>(g: &'g HeteroGraph, selection: &[Vec<usize>]) -> Result<Subgraph<'g>> {
    if selection.len() != g.num_node_types() {
        return Err(Error::dim("selection node types", g.num_node_types(), selection.len()));
    }
    let mut nodes = Vec::with_capacity(selection.len());
    for (t, sel) in selection.iter().enumerate() {
        let mut ids = sel.clone();
        ids.sort_unstable();
        ids.dedup();
        if let Some(&bad) = ids.iter().find(|&&i| i >= g.num_nodes(t)) {
            return Err(Error::Schema(format!(
                "selected node {bad} of type `{}` out of range",
                g.schema.node_types[t].name
            )));
        }
        nodes.push(ids);
    }
    if nodes.iter().all(Vec::is_empty) {
        return Err(Error::EmptySubgraph);
    }
    let local: Vec<HashMap<usize, usize>> = nodes
        .iter()
        .map(|ids| ids.iter().enumerate().map(|(l, &gid)| (gid, l)).collect())
        .collect();
    let mut edges = Vec::with_capacity(g.num_edge_types());
    for et in 0..g.num_edge_types() {
        let st = g.schema.edge_src(et);
        let dt = g.schema.edge_dst(et);
        let mut list = Vec::new();
        for (ls, &gs) in nodes[st].iter().enumerate() {
            for &gd in g.out_neighbors(et, gs) {
                if let Some(&ld) = local[dt].get(&gd) {
                    list.push((ls, ld));
                }
            }
        }
        list.sort_unstable();
        edges.push(list);
    }
    Ok(Subgraph { graph: g, nodes, local, edges, center: None })
}

/// Draws one-hop subgraphs around random centers of one node type.
#[derive(Clone, Debug)]
pub struct OneHopSampler {
    node_type: usize,
    pool: Vec<usize>,
    pub max_retries: usize,
}

impl OneHopSampler {
    /// Centers come from the training split when `center_type` is the
    /// classified type, otherwise from every node of that type.
    pub fn new(g: &HeteroGraph, center_type: &str) -> Result<Self> {
        let t = g
            .schema
            .node_type_index(center_type)
            .ok_or_else(|| Error::Schema(format!("unknown node type `{center_type}`")))?;
        let pool: Vec<usize> = if t == g.schema.classified_index() {
            g.labeled_nodes(Some(Split::Train))
        } else {
            (0..g.num_nodes(t)).collect()
        };
        Self::with_pool(g, t, pool)
    }

    pub fn with_pool(g: &HeteroGraph, node_type: usize, pool: Vec<usize>) -> Result<Self> {
        if pool.is_empty() {
            return Err(Error::Schema(format!(
                "no candidate centers of type `{}`",
                g.schema.node_types[node_type].name
            )));
        }
        Ok(OneHopSampler { node_type, pool, max_retries: DEFAULT_CENTER_RETRIES })
    }

    pub fn node_type(&self) -> usize {
        self.node_type
    }

    pub fn sample<'g, R: Rng + ?Sized>(&self, g: &'g HeteroGraph, rng: &mut R) -> Result<Subgraph<'g>> {
        for _ in 0..self.max_retries {
            let center = self.pool[rng.random_range(0..self.pool.len())];
            if let Some(sub) = one_hop_at(g, self.node_type, center)? {
                return Ok(sub);
            }
        }
        Err(Error::IsolatedCenter {
            node_type: g.schema.node_types[self.node_type].name.clone(),
            attempts: self.max_retries,
        })
    }
}

/// Convenience wrapper over [`OneHopSampler`].
pub fn sample_one_hop<'g, R: Rng + ?Sized>(
    g: &'g HeteroGraph,
    rng: &mut R,
    center_type: &str,
) -> Result<Subgraph<'g>> {
    OneHopSampler::new(g, center_type)?.sample(g, rng)
}

/// One-hop induced subgraph around a fixed center; `None` if it is isolated.
pub fn one_hop_at(g: &HeteroGraph, t: usize, center: usize) -> Result<Option<Subgraph<'_>>> {
    let mut selection = vec![Vec::new(); g.num_node_types()];
    selection[t].push(center);
    let mut found = false;
    for et in 0..g.num_edge_types() {
        if g.schema.edge_src(et) == t {
            let nb = g.out_neighbors(et, center);
            found |= !nb.is_empty();
            selection[g.schema.edge_dst(et)].extend_from_slice(nb);
        }
        if g.schema.edge_dst(et) == t {
            let nb = g.in_neighbors(et, center);
            found |= !nb.is_empty();
            selection[g.schema.edge_src(et)].extend_from_slice(nb);
        }
    }
    if !found {
        return Ok(None);
    }
    let mut sub = induced_subgraph(g, &selection)?;
    sub.center = Some((t, center));
    Ok(Some(sub))
}

impl<'g> Subgraph<'g> {
    pub fn graph(&self) -> &'g HeteroGraph {
        self.graph
    }

    pub fn center(&self) -> Option<(usize, usize)> {
        self.center
    }

    pub fn num_nodes(&self, t: usize) -> usize {
        self.nodes[t].len()
    }

    pub fn total_nodes(&self) -> usize {
        self.nodes.iter().map(Vec::len).sum()
    }

    pub fn global_ids(&self, t: usize) -> &[usize] {
        &self.nodes[t]
    }

    pub fn global(&self, t: usize, local: usize) -> usize {
        self.nodes[t][local]
    }

    pub fn local_of(&self, t: usize, global: usize) -> Option<usize> {
        self.local[t].get(&global).copied()
    }

    /// Local directed pairs of an edge type, sorted.
    pub fn edges(&self, et: usize) -> &[(usize, usize)] {
        &self.edges[et]
    }

    pub fn num_edges(&self, et: usize) -> usize {
        self.edges[et].len()
    }

    /// Gathered feature rows of type `t`, row-major.
    pub fn features(&self, t: usize) -> Vec<f64> {
        let d = self.graph.feature_dim(t);
        let mut out = Vec::with_capacity(self.nodes[t].len() * d);
        for &gid in &self.nodes[t] {
            out.extend_from_slice(self.graph.feature_row(t, gid));
        }
        out
    }

    /// Labels are only visible for training-split nodes.
    pub fn visible_label(&self, t: usize, local: usize) -> Option<u32> {
        let gid = self.nodes[t][local];
        match self.graph.split(t, gid) {
            Some(Split::Train) => self.graph.label(t, gid),
            _ => None,
        }
    }
}

/// `|C_min| / |C_maj|` over the smallest and largest class counts in scope.
pub fn imbalance_ratio(g: &HeteroGraph, split: Option<Split>) -> Result<f64> {
    let counts = g.class_counts(split);
    let min = *counts.iter().min().unwrap();
    let max = *counts.iter().max().unwrap();
    if min == 0 {
        return Err(Error::UndefinedRatio(format!("empty class in scope {split:?}: counts {counts:?}")));
    }
    Ok(min as f64 / max as f64)
}

/// Designated-minority count over the largest other class, the `m/M`
/// quantity that augmentation targets. May exceed 1 after augmentation.
pub fn minority_ratio(g: &HeteroGraph, split: Option<Split>) -> Result<f64> {
    let counts = g.class_counts(split);
    let (m, big) = minority_and_majority(g, &counts);
    if big == 0 {
        return Err(Error::UndefinedRatio(format!("no majority nodes in scope {split:?}")));
    }
    Ok(m as f64 / big as f64)
}

pub(crate) fn minority_and_majority(g: &HeteroGraph, counts: &[usize]) -> (usize, usize) {
    let minority = g.minority_class() as usize;
    let big = counts
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != minority)
        .map(|(_, &n)| n)
        .max()
        .unwrap_or(0);
    (counts[minority], big)
}
