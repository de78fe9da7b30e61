//! Dense MLPs and the relation-typed message-passing network.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::params::{leaky_gain, Init, ParamId, ParamStore};
use super::tape::{Aggregation, Tape, Var};
use crate::error::{Error, Result};
use crate::hetgraph::{relations_of, HeteroGraph, Relation, Schema, Subgraph};

pub const LEAKY_SLOPE: f64 = 0.2;

/// Fully connected stack: LeakyReLU between layers, linear output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub dims: Vec<usize>,
    pub layers: Vec<(ParamId, ParamId)>,
    pub slope: f64,
}

impl Mlp {
    pub fn register(store: &mut ParamStore, prefix: &str, group: &str, dims: &[usize]) -> Mlp {
        assert!(dims.len() >= 2, "an MLP needs input and output widths");
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let gain = if l == last { 1.0 } else { leaky_gain(LEAKY_SLOPE) };
                let wid = store.register(format!("{prefix}.l{l}.w"), group, w[0], w[1], Init::KaimingUniform { fan_in: w[0], gain });
                let bid = store.register(format!("{prefix}.l{l}.b"), group, 1, w[1], Init::Zeros);
                (wid, bid)
            })
            .collect();
        Mlp { dims: dims.to_vec(), layers, slope: LEAKY_SLOPE }
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(|&(w, b)| [w, b]).collect()
    }

    pub fn forward(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        self.forward_with(tape, x, false)
    }

    /// Forward pass reading the weights as frozen leaves.
    pub fn forward_frozen(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        self.forward_with(tape, x, true)
    }

    fn forward_with(&self, tape: &mut Tape<'_>, x: Var, frozen: bool) -> Result<Var> {
        let cols = tape.shape(x).1;
        if cols != self.input_dim() {
            return Err(Error::dim("MLP input", self.input_dim(), cols));
        }
        let mut h = x;
        for (l, &(w, b)) in self.layers.iter().enumerate() {
            let (wv, bv) = if frozen { (tape.param_frozen(w), tape.param_frozen(b)) } else { (tape.param(w), tape.param(b)) };
            h = tape.matmul(h, wv)?;
            h = tape.add_bias(h, bv)?;
            if l + 1 < self.layers.len() {
                h = tape.leaky_relu(h, self.slope)?;
            }
        }
        Ok(h)
    }
}

/// Node counts per type and, per relation, the local edge lists that a
/// [`RelGnn`] aggregates over.
#[derive(Clone, Debug)]
pub struct MessageGraph {
    pub num_nodes: Vec<usize>,
    pub relations: Vec<Relation>,
    pub aggregations: Vec<Arc<Aggregation>>,
}

impl MessageGraph {
    /// `edges[r]` holds the forward `(src, dst)` pairs of edge type `r`;
    /// derived reverse relations are generated here.
    pub fn from_edge_types(schema: &Schema, num_nodes: Vec<usize>, edges: &[Vec<(usize, usize)>]) -> Result<MessageGraph> {
        if edges.len() != schema.edge_types.len() {
            return Err(Error::Schema(format!(
                "expected {} edge types, got {}",
                schema.edge_types.len(),
                edges.len()
            )));
        }
        let relations = relations_of(schema);
        let aggregations = relations
            .iter()
            .map(|rel| {
                let list = &edges[rel.edge_type];
                let (src, dst): (Vec<usize>, Vec<usize>) = if rel.reversed {
                    list.iter().map(|&(s, d)| (d, s)).unzip()
                } else {
                    list.iter().copied().unzip()
                };
                Arc::new(Aggregation::new(src, dst, num_nodes[rel.dst_type(schema)]))
            })
            .collect();
        Ok(MessageGraph { num_nodes, relations, aggregations })
    }

    pub fn of_graph(g: &HeteroGraph) -> Result<MessageGraph> {
        let edges: Vec<Vec<(usize, usize)>> = (0..g.num_edge_types()).map(|et| g.edges(et).to_vec()).collect();
        let counts = (0..g.num_node_types()).map(|t| g.num_nodes(t)).collect();
        Self::from_edge_types(g.schema(), counts, &edges)
    }

    pub fn of_subgraph(sub: &Subgraph<'_>) -> Result<MessageGraph> {
        let g = sub.graph();
        let edges: Vec<Vec<(usize, usize)>> = (0..g.num_edge_types()).map(|et| sub.edges(et).to_vec()).collect();
        let counts = (0..g.num_node_types()).map(|t| sub.num_nodes(t)).collect();
        Self::from_edge_types(g.schema(), counts, &edges)
    }
}

/// Relation-typed mean-aggregation GNN:
/// `H_v' = act(H_v W_self[t] + b[t] + sum_r mean_{u in N_r(v)} H_u W_r)`,
/// with LeakyReLU between layers and a linear last layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelGnn {
    pub input_dims: Vec<usize>,
    pub dims: Vec<usize>,
    pub relation_names: Vec<String>,
    relation_types: Vec<(usize, usize)>,
    /// `[layer][node type] -> (W_self, b)`
    self_params: Vec<Vec<(ParamId, ParamId)>>,
    /// `[layer][relation] -> W_r`
    rel_params: Vec<Vec<ParamId>>,
    pub slope: f64,
}

impl RelGnn {
    pub fn register(store: &mut ParamStore, prefix: &str, group: &str, schema: &Schema, dims: &[usize]) -> RelGnn {
        assert!(!dims.is_empty());
        let input_dims: Vec<usize> = schema.node_types.iter().map(|t| t.feature_dim).collect();
        let relations = relations_of(schema);
        let relation_names: Vec<String> = relations.iter().map(|r| r.name(schema)).collect();
        let relation_types = relations.iter().map(|r| (r.src_type(schema), r.dst_type(schema))).collect();
        let mut self_params = Vec::new();
        let mut rel_params = Vec::new();
        for (l, &out) in dims.iter().enumerate() {
            let in_dim = |t: usize| if l == 0 { input_dims[t] } else { dims[l - 1] };
            let gain = if l + 1 == dims.len() { 1.0 } else { leaky_gain(LEAKY_SLOPE) };
            let mut per_type = Vec::new();
            for (t, nt) in schema.node_types.iter().enumerate() {
                let w = store.register(
                    format!("{prefix}.l{l}.self.{}.w", nt.name),
                    group,
                    in_dim(t),
                    out,
                    Init::KaimingUniform { fan_in: in_dim(t), gain },
                );
                let b = store.register(format!("{prefix}.l{l}.self.{}.b", nt.name), group, 1, out, Init::Zeros);
                per_type.push((w, b));
            }
            let mut per_rel = Vec::new();
            for (r, rel) in relations.iter().enumerate() {
                let st = rel.src_type(schema);
                per_rel.push(store.register(
                    format!("{prefix}.l{l}.rel.{}.w", relation_names[r]),
                    group,
                    in_dim(st),
                    out,
                    Init::KaimingUniform { fan_in: in_dim(st), gain },
                ));
            }
            self_params.push(per_type);
            rel_params.push(per_rel);
        }
        RelGnn {
            input_dims,
            dims: dims.to_vec(),
            relation_names,
            relation_types,
            self_params,
            rel_params,
            slope: LEAKY_SLOPE,
        }
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = Vec::new();
        for (st, rp) in self.self_params.iter().zip(&self.rel_params) {
            ids.extend(st.iter().flat_map(|&(w, b)| [w, b]));
            ids.extend(rp.iter().copied());
        }
        ids
    }

    /// `xs[t]` is the n_t × d_t feature matrix of node type `t`.
    pub fn forward(&self, tape: &mut Tape<'_>, mg: &MessageGraph, xs: &[Var]) -> Result<Vec<Var>> {
        if mg.relations.len() != self.relation_names.len() {
            return Err(Error::Schema(format!(
                "message graph has {} relations, network expects {}",
                mg.relations.len(),
                self.relation_names.len()
            )));
        }
        if xs.len() != self.input_dims.len() {
            return Err(Error::dim("node types", self.input_dims.len(), xs.len()));
        }
        for (t, &x) in xs.iter().enumerate() {
            let (rows, cols) = tape.shape(x);
            if cols != self.input_dims[t] {
                return Err(Error::dim(format!("layer-0 input of node type {t}"), self.input_dims[t], cols));
            }
            if rows != mg.num_nodes[t] {
                return Err(Error::dim(format!("rows of node type {t}"), mg.num_nodes[t], rows));
            }
        }
        let mut h: Vec<Var> = xs.to_vec();
        let n_layers = self.dims.len();
        for l in 0..n_layers {
            let mut next = Vec::with_capacity(h.len());
            for t in 0..h.len() {
                let (w, b) = self.self_params[l][t];
                let wv = tape.param(w);
                let bv = tape.param(b);
                let mut acc = tape.matmul(h[t], wv)?;
                acc = tape.add_bias(acc, bv)?;
                for (r, &(st, dt)) in self.relation_types.iter().enumerate() {
                    let agg = &mg.aggregations[r];
                    if dt != t || agg.num_edges() == 0 {
                        continue;
                    }
                    // mean then project: equal to projecting then averaging
                    let mean = tape.neighbor_mean(h[st], Arc::clone(agg))?;
                    let wr = tape.param(self.rel_params[l][r]);
                    let msg = tape.matmul(mean, wr)?;
                    acc = tape.add(acc, msg)?;
                }
                if l + 1 < n_layers {
                    acc = tape.leaky_relu(acc, self.slope)?;
                }
                next.push(acc);
            }
            h = next;
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hetgraph::{build_graph, NodeTable, Split};
    use crate::neural::tensor::Tensor;

    fn set(store: &mut ParamStore, id: ParamId, data: &[f64]) {
        store.get_mut(id).data.copy_from_slice(data);
    }

    #[test]
    fn zero_mlp_outputs_zero() {
        let mut s = ParamStore::new();
        let mlp = Mlp::register(&mut s, "m", "g", &[3, 5, 2]);
        let mut tape = Tape::new(&s);
        let x = tape.constant(Tensor::from_vec(2, 3, vec![1.0, -2.0, 3.0, 0.5, 0.5, 0.5]));
        let y = mlp.forward(&mut tape, x).unwrap();
        assert!(tape.value(y).data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_mlp_passes_through() {
        let mut s = ParamStore::new();
        let mlp = Mlp::register(&mut s, "m", "g", &[3, 3]);
        set(&mut s, mlp.layers[0].0, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let mut tape = Tape::new(&s);
        let data = vec![1.5, -2.0, 0.25];
        let x = tape.constant(Tensor::from_vec(1, 3, data.clone()));
        let y = mlp.forward(&mut tape, x).unwrap();
        assert_eq!(tape.value(y).data, data);
    }

    #[test]
    fn hand_set_mlp_matches_manual() {
        // 3 -> 2 (leaky) -> 2
        let mut s = ParamStore::new();
        let mlp = Mlp::register(&mut s, "m", "g", &[3, 2, 2]);
        set(&mut s, mlp.layers[0].0, &[1.0, 2.0, 0.5, -1.0, -1.0, 1.0]);
        set(&mut s, mlp.layers[0].1, &[0.1, -0.2]);
        set(&mut s, mlp.layers[1].0, &[1.0, -1.0, 2.0, 0.5]);
        set(&mut s, mlp.layers[1].1, &[0.0, 1.0]);
        let mut tape = Tape::new(&s);
        let x = tape.constant(Tensor::from_vec(1, 3, vec![1.0, 0.0, -1.0]));
        let y = mlp.forward(&mut tape, x).unwrap();
        // hidden pre = [1*1 + 0*0.5 + -1*-1 + 0.1, 1*2 + 0*-1 + -1*1 - 0.2] = [2.1, 0.8]
        // out = [2.1*1 + 0.8*2, 2.1*-1 + 0.8*0.5 + 1] = [3.7, -0.7]
        let out = &tape.value(y).data;
        assert!((out[0] - 3.7).abs() < 1e-12 && (out[1] + 0.7).abs() < 1e-12, "{out:?}");

        let x = tape.constant(Tensor::from_vec(1, 2, vec![1.0, 0.0]));
        assert!(matches!(mlp.forward(&mut tape, x), Err(Error::Dimension { .. })));
    }

    fn tiny_graph(uu: Vec<(usize, usize)>, up: Vec<(usize, usize)>) -> HeteroGraph {
        let schema = Schema::review_graph(2, 2);
        let mut users = NodeTable::new(2);
        users.push(&[1.0, 2.0], Some(0), Some(Split::Train));
        users.push(&[3.0, -1.0], Some(1), Some(Split::Train));
        users.push(&[0.5, 0.5], Some(0), Some(Split::Train));
        let products = NodeTable::unlabeled(2, vec![2.0, 0.0]);
        build_graph(schema, vec![users, products], vec![uu, up, vec![]]).unwrap()
    }

    fn zero_params_except_identity(s: &mut ParamStore, prefix: &str, names: &[&str]) {
        for name in names {
            let id = s.id(&format!("{prefix}.{name}")).unwrap();
            let (r, _) = s.get(id).shape();
            let t = s.get_mut(id);
            for i in 0..r {
                t.data[i * t.cols + i] = 1.0;
            }
        }
    }

    #[test]
    fn edgeless_graph_uses_self_transform_only() {
        let g = tiny_graph(vec![], vec![]);
        let mut s = ParamStore::new();
        let gnn = RelGnn::register(&mut s, "mix", "g", g.schema(), &[2]);
        s.initialize(1);
        zero_params_except_identity(&mut s, "mix", &[]);
        let mg = MessageGraph::of_graph(&g).unwrap();
        let mut tape = Tape::new(&s);
        let xu = tape.constant(Tensor::from_vec(3, 2, g.features(0).to_vec()));
        let xp = tape.constant(Tensor::from_vec(1, 2, g.features(1).to_vec()));
        let h = gnn.forward(&mut tape, &mg, &[xu, xp]).unwrap();
        let w = s.get(s.id("mix.l0.self.user.w").unwrap());
        let expected = |r: usize| -> Vec<f64> {
            let x = g.feature_row(0, r);
            (0..2).map(|c| x[0] * w.get(0, c) + x[1] * w.get(1, c)).collect()
        };
        for r in 0..3 {
            let got = tape.value(h[0]).row(r).to_vec();
            let want = expected(r);
            for c in 0..2 {
                assert!((got[c] - want[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_edge_swaps_features() {
        let g = tiny_graph(vec![(0, 1)], vec![]);
        let mut s = ParamStore::new();
        let gnn = RelGnn::register(&mut s, "mix", "g", g.schema(), &[2]);
        zero_params_except_identity(&mut s, "mix", &["l0.rel.uu.w"]);
        let mg = MessageGraph::of_graph(&g).unwrap();
        let mut tape = Tape::new(&s);
        let xu = tape.constant(Tensor::from_vec(3, 2, g.features(0).to_vec()));
        let xp = tape.constant(Tensor::from_vec(1, 2, g.features(1).to_vec()));
        let h = gnn.forward(&mut tape, &mg, &[xu, xp]).unwrap();
        let out = tape.value(h[0]);
        assert_eq!(out.row(0), g.feature_row(0, 1));
        assert_eq!(out.row(1), g.feature_row(0, 0));
        assert_eq!(out.row(2), &[0.0, 0.0]);
    }

    #[test]
    fn two_relation_toy_matches_manual_propagation() {
        // users 0-1 (uu), 1-2 (uu); user 0 -> product 0, user 2 -> product 0.
        let g = tiny_graph(vec![(0, 1), (1, 2)], vec![(0, 0), (2, 0)]);
        let mut s = ParamStore::new();
        let gnn = RelGnn::register(&mut s, "mix", "g", g.schema(), &[1]);
        let set_named = |s: &mut ParamStore, n: &str, d: &[f64]| {
            let id = s.id(n).unwrap();
            s.get_mut(id).data.copy_from_slice(d);
        };
        set_named(&mut s, "mix.l0.self.user.w", &[1.0, 0.0]);
        set_named(&mut s, "mix.l0.self.user.b", &[0.5]);
        set_named(&mut s, "mix.l0.self.product.w", &[0.0, 1.0]);
        set_named(&mut s, "mix.l0.rel.uu.w", &[0.0, 2.0]);
        set_named(&mut s, "mix.l0.rel.up.w", &[1.0, 1.0]);
        set_named(&mut s, "mix.l0.rel.rev_up.w", &[-1.0, 0.0]);
        let mg = MessageGraph::of_graph(&g).unwrap();
        let mut tape = Tape::new(&s);
        let xu = tape.constant(Tensor::from_vec(3, 2, g.features(0).to_vec()));
        let xp = tape.constant(Tensor::from_vec(1, 2, g.features(1).to_vec()));
        let h = gnn.forward(&mut tape, &mg, &[xu, xp]).unwrap();
        // users x: u0=(1,2) u1=(3,-1) u2=(0.5,0.5); product p0=(2,0)
        // u0: self 1 + .5 ; uu mean(u1)=(3,-1)->2*-1=-2 ; rev_up(p0)->-2 ; total -2.5
        // u1: self 3 + .5 ; uu mean(u0,u2)=(.75,1.25)->2.5 ; total 6.0
        // u2: self .5 + .5 ; uu mean(u1)-> -2 ; rev_up -> -2 ; total -3.0
        // p0: self 0 ; up mean(u0,u2)=(.75,1.25)->2.0 ; total 2.0
        let hu = &tape.value(h[0]).data;
        let hp = &tape.value(h[1]).data;
        let want = [-2.5, 6.0, -3.0];
        for i in 0..3 {
            assert!((hu[i] - want[i]).abs() < 1e-12, "{hu:?}");
        }
        assert!((hp[0] - 2.0).abs() < 1e-12);
    }
}
