//! The generator triple (noise MLP, subgraph mixer, per-edge-type edge
//! droppers), the per-edge-type discriminators, and the adversarial losses.
//!
//! Synthetic nodes always have the classified node type. Before dropping,
//! each synthetic node is a candidate neighbor of every real node it could
//! share an edge type with; a candidate pair is scored once in its canonical
//! orientation and both orientations are kept or dropped together.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hetgraph::{NewEdge, NewNode, Schema, Split, Subgraph};
use crate::neural::{MessageGraph, Mlp, ParamStore, RelGnn, Tape, Tensor, Var};

pub const GENERATOR_GROUP: &str = "generator";
pub const DISCRIMINATOR_GROUP: &str = "discriminator";

/// Column of the dropper softmax holding the keep probability.
pub const KEEP: usize = 0;
/// Column of the discriminator softmax holding the "real edge" probability.
pub const REAL: usize = 0;
pub const FAKE: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossMode {
    /// Each retained edge's generator term is weighted by its keep
    /// probability, giving the droppers a gradient path.
    Surrogate,
    /// Unweighted mean over retained edges.
    Literal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlashGanConfig {
    pub noise_dim: usize,
    pub generator_hidden: usize,
    /// Number of linear layers in the noise MLP.
    pub generator_layers: usize,
    pub mixer_dims: Vec<usize>,
    pub dropper_hidden: usize,
    pub discriminator_hidden: usize,
    pub synthetic_per_subgraph: usize,
    pub loss_mode: LossMode,
}

impl Default for FlashGanConfig {
    fn default() -> Self {
        FlashGanConfig {
            noise_dim: 32,
            generator_hidden: 1024,
            generator_layers: 8,
            mixer_dims: vec![64, 32],
            dropper_hidden: 512,
            discriminator_hidden: 512,
            synthetic_per_subgraph: 5,
            loss_mode: LossMode::Surrogate,
        }
    }
}

impl FlashGanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.noise_dim == 0 || self.generator_layers == 0 || self.mixer_dims.is_empty() {
            return Err(Error::Config("network widths and depths must be positive".into()));
        }
        if self.synthetic_per_subgraph == 0 {
            return Err(Error::Config("synthetic_per_subgraph (k) must be >= 1".into()));
        }
        Ok(())
    }

    /// Width of an edge embedding: two concatenated mixer outputs.
    pub fn edge_dim(&self) -> usize {
        2 * self.mixer_dims.last().copied().unwrap_or(0)
    }
}

/// Networks plus their parameters.
#[derive(Clone, Debug)]
pub struct FlashGan {
    pub config: FlashGanConfig,
    pub schema: Schema,
    pub params: ParamStore,
    pub generator: Mlp,
    pub mixer: RelGnn,
    /// Scored edge types, aligned with `droppers` and `discriminators`.
    pub scored: Vec<usize>,
    pub droppers: Vec<Mlp>,
    pub discriminators: Vec<Mlp>,
}

impl FlashGan {
    pub fn new(schema: &Schema, config: FlashGanConfig, seed: u64) -> Result<FlashGan> {
        schema.validate()?;
        config.validate()?;
        let mut params = ParamStore::new();
        let ct = schema.classified_index();
        let feat = schema.node_types[ct].feature_dim;
        let mut dims = vec![config.noise_dim];
        dims.extend(std::iter::repeat_n(config.generator_hidden, config.generator_layers - 1));
        dims.push(feat);
        let generator = Mlp::register(&mut params, "gen", GENERATOR_GROUP, &dims);
        let mixer = RelGnn::register(&mut params, "mixer", GENERATOR_GROUP, schema, &config.mixer_dims);
        let scored = schema.scored_edge_types();
        let edge_dim = config.edge_dim();
        let droppers: Vec<Mlp> = scored
            .iter()
            .map(|&et| {
                let name = &schema.edge_types[et].name;
                Mlp::register(&mut params, &format!("drop_{name}"), GENERATOR_GROUP, &[edge_dim, config.dropper_hidden, 2])
            })
            .collect();
        let discriminators = scored
            .iter()
            .map(|&et| {
                let name = &schema.edge_types[et].name;
                Mlp::register(
                    &mut params,
                    &format!("disc_{name}"),
                    DISCRIMINATOR_GROUP,
                    &[edge_dim, config.discriminator_hidden, 2],
                )
            })
            .collect();
        params.initialize(seed);
        // An untrained dropper is indifferent: every keep probability is 0.5.
        for d in &droppers {
            let (w, _) = *d.layers.last().expect("dropper has layers");
            params.get_mut(w).data.fill(0.0);
        }
        Ok(FlashGan { config, schema: schema.clone(), params, generator, mixer, scored, droppers, discriminators })
    }

    pub fn scored_names(&self) -> Vec<String> {
        self.scored.iter().map(|&et| self.schema.edge_types[et].name.clone()).collect()
    }

    /// Standard-normal noise, `k × noise_dim`.
    pub fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R, k: usize) -> Tensor {
        let data = (0..k * self.config.noise_dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        Tensor::from_vec(k, self.config.noise_dim, data)
    }

    /// Synthetic feature rows `M(Z)`, recorded on the tape.
    pub fn generate_synthetic_nodes(&self, tape: &mut Tape<'_>, noise: &Tensor) -> Result<Var> {
        if noise.rows == 0 {
            return Err(Error::Contract("k must be >= 1".into()));
        }
        let z = tape.constant(noise.clone());
        self.generator.forward(tape, z)
    }

    /// Full generator forward: synthetic features, mixer states over the
    /// fully attached subgraph, candidate edge embeddings and keep
    /// probabilities.
    pub fn generator_pass(&self, tape: &mut Tape<'_>, aug: &AugmentedSubgraph<'_>, noise: &Tensor) -> Result<GeneratorPass> {
        if noise.rows != aug.k {
            return Err(Error::dim("noise rows", aug.k, noise.rows));
        }
        let x_synth = self.generate_synthetic_nodes(tape, noise)?;
        let g = aug.base.graph();
        let mut xs = Vec::with_capacity(g.num_node_types());
        for t in 0..g.num_node_types() {
            let n = aug.base.num_nodes(t);
            let real = tape.constant(Tensor::from_vec(n, g.feature_dim(t), aug.base.features(t)));
            xs.push(if t == aug.synth_type { tape.concat_rows(real, x_synth)? } else { real });
        }
        let mg = aug.message_graph(None)?;
        let hidden = self.mixer.forward(tape, &mg, &xs)?;
        let mut edge_embed = Vec::with_capacity(aug.candidates.len());
        let mut keep_prob = Vec::with_capacity(aug.candidates.len());
        for (r, set) in aug.candidates.iter().enumerate() {
            let h = aug.embed_pairs(tape, &hidden, set, &set.pairs)?;
            let logits = self.droppers[r].forward(tape, h)?;
            let probs = tape.softmax_rows(logits)?;
            keep_prob.push(tape.column(probs, KEEP)?);
            edge_embed.push(h);
        }
        Ok(GeneratorPass { x_synth, hidden, edge_embed, keep_prob })
    }

    /// Keep probability of each row of `h` under dropper `r`.
    pub fn edge_preservation(&self, r: usize, h: &Tensor) -> Result<Vec<f64>> {
        self.softmax_column(&self.droppers[r], h, KEEP)
    }

    /// Probability that each row of `h` is a real edge under discriminator `r`.
    pub fn discriminate(&self, r: usize, h: &Tensor) -> Result<Vec<f64>> {
        self.softmax_column(&self.discriminators[r], h, REAL)
    }

    fn softmax_column(&self, mlp: &Mlp, h: &Tensor, col: usize) -> Result<Vec<f64>> {
        if h.cols != mlp.input_dim() {
            return Err(Error::dim("edge embedding", mlp.input_dim(), h.cols));
        }
        let mut tape = Tape::new(&self.params);
        let x = tape.constant(h.clone());
        let logits = mlp.forward_frozen(&mut tape, x)?;
        let p = tape.softmax_rows(logits)?;
        let c = tape.column(p, col)?;
        Ok(tape.value(c).data.clone())
    }

    /// Generator loss over retained edges with the discriminators frozen.
    /// `None` when nothing was retained.
    pub fn generator_loss(&self, tape: &mut Tape<'_>, pass: &GeneratorPass, mask: &EdgeMask) -> Result<Option<Var>> {
        let mut terms = Vec::new();
        for (r, kept) in mask.retained.iter().enumerate() {
            if kept.is_empty() {
                continue;
            }
            let h = tape.gather_rows(pass.edge_embed[r], kept.clone())?;
            let logits = self.discriminators[r].forward_frozen(tape, h)?;
            let weights = match self.config.loss_mode {
                LossMode::Surrogate => Some(tape.gather_rows(pass.keep_prob[r], kept.clone())?),
                LossMode::Literal => None,
            };
            terms.push(fake_term(tape, logits, weights)?);
        }
        average_terms(tape, terms)
    }

    /// Discriminator objective (to be maximized) on detached embeddings.
    /// `real[r]` and `fake[r]` are per-scored-type embedding matrices (zero
    /// rows allowed). `None` when either side is empty everywhere.
    pub fn discriminator_loss(&self, tape: &mut Tape<'_>, real: &[Tensor], fake: &[Tensor]) -> Result<Option<Var>> {
        let mut real_terms = Vec::new();
        let mut fake_terms = Vec::new();
        for r in 0..self.discriminators.len() {
            if real[r].rows > 0 {
                let x = tape.constant(real[r].clone());
                let logits = self.discriminators[r].forward(tape, x)?;
                real_terms.push(real_term(tape, logits)?);
            }
            if fake[r].rows > 0 {
                let x = tape.constant(fake[r].clone());
                let logits = self.discriminators[r].forward(tape, x)?;
                fake_terms.push(fake_term(tape, logits, None)?);
            }
        }
        let (Some(a), Some(b)) = (average_terms(tape, real_terms)?, average_terms(tape, fake_terms)?) else {
            return Ok(None);
        };
        Ok(Some(tape.add(a, b)?))
    }
}

/// `mean_e w_e * log(1 - D(h_e))` from discriminator logits.
pub fn fake_term(tape: &mut Tape<'_>, logits: Var, weights: Option<Var>) -> Result<Var> {
    let lsm = tape.log_softmax_rows(logits)?;
    let log_fake = tape.column(lsm, FAKE)?;
    let term = match weights {
        Some(w) => tape.mul(w, log_fake)?,
        None => log_fake,
    };
    tape.mean(term)
}

/// `mean_e log D(h_e)` from discriminator logits.
pub fn real_term(tape: &mut Tape<'_>, logits: Var) -> Result<Var> {
    let lsm = tape.log_softmax_rows(logits)?;
    let log_real = tape.column(lsm, REAL)?;
    tape.mean(log_real)
}

/// Equal-weight mean of per-edge-type terms.
pub fn average_terms(tape: &mut Tape<'_>, terms: Vec<Var>) -> Result<Option<Var>> {
    let n = terms.len();
    let mut it = terms.into_iter();
    let Some(mut acc) = it.next() else { return Ok(None) };
    for t in it {
        acc = tape.add(acc, t)?;
    }
    if n > 1 {
        acc = tape.scale(acc, 1.0 / n as f64)?;
    }
    Ok(Some(acc))
}

/// Tape handles produced by [`FlashGan::generator_pass`].
#[derive(Clone, Debug)]
pub struct GeneratorPass {
    pub x_synth: Var,
    /// Mixer output per node type (synthetic rows appended to their type).
    pub hidden: Vec<Var>,
    /// Per candidate set: `pairs × edge_dim` embeddings.
    pub edge_embed: Vec<Var>,
    /// Per candidate set: `pairs × 1` keep probabilities.
    pub keep_prob: Vec<Var>,
}

impl GeneratorPass {
    pub fn keep_values(&self, tape: &Tape<'_>) -> Vec<Vec<f64>> {
        self.keep_prob.iter().map(|&v| tape.value(v).data.clone()).collect()
    }
}

/// Candidate synthetic↔real pairs for one scored edge type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateSet {
    pub edge_type: usize,
    /// Node type of the real endpoint.
    pub real_type: usize,
    /// Whether the synthetic node is the source in the canonical orientation.
    pub synthetic_is_src: bool,
    /// Both orientations live in this edge type (same-type endpoints).
    pub same_type: bool,
    /// `(synthetic index, real local id)`.
    pub pairs: Vec<(usize, usize)>,
}

/// A subgraph plus `k` synthetic nodes attached to every compatible real node.
#[derive(Clone, Debug)]
pub struct AugmentedSubgraph<'g> {
    pub base: Subgraph<'g>,
    pub k: usize,
    pub synth_type: usize,
    pub candidates: Vec<CandidateSet>,
}

/// Attaches `k` synthetic nodes of the classified type to `sub`.
pub fn attach_full<'g>(sub: Subgraph<'g>, k: usize) -> Result<AugmentedSubgraph<'g>> {
    if k == 0 {
        return Err(Error::Contract("attach_full needs at least one synthetic node".into()));
    }
    let schema = sub.graph().schema();
    let st = schema.classified_index();
    let mut candidates = Vec::new();
    for et in schema.scored_edge_types() {
        let (src, dst) = (schema.edge_src(et), schema.edge_dst(et));
        let synthetic_is_src = src == st;
        let real_type = if synthetic_is_src { dst } else { src };
        let n_real = sub.num_nodes(real_type);
        let mut pairs = Vec::with_capacity(k * n_real);
        for j in 0..k {
            for v in 0..n_real {
                pairs.push((j, v));
            }
        }
        candidates.push(CandidateSet { edge_type: et, real_type, synthetic_is_src, same_type: src == dst, pairs });
    }
    Ok(AugmentedSubgraph { base: sub, k, synth_type: st, candidates })
}

impl<'g> AugmentedSubgraph<'g> {
    /// Local id of synthetic node `j` within its node type.
    pub fn synthetic_local(&self, j: usize) -> usize {
        self.base.num_nodes(self.synth_type) + j
    }

    pub fn node_counts(&self) -> Vec<usize> {
        let g = self.base.graph();
        (0..g.num_node_types())
            .map(|t| self.base.num_nodes(t) + if t == self.synth_type { self.k } else { 0 })
            .collect()
    }

    /// Directed candidate edges `|E|`, counting both orientations.
    pub fn candidate_count(&self) -> usize {
        2 * self.candidates.iter().map(|c| c.pairs.len()).sum::<usize>()
    }

    fn oriented(&self, set: &CandidateSet, (j, v): (usize, usize)) -> (usize, usize) {
        let s = self.synthetic_local(j);
        if set.synthetic_is_src { (s, v) } else { (v, s) }
    }

    /// Per edge type, the forward `(src, dst)` lists of real edges plus the
    /// chosen candidates (`None` = all of them). Same-type candidates add both
    /// orientations; cross-type ones rely on the derived reverse relation.
    pub fn edge_lists(&self, mask: Option<&EdgeMask>) -> Vec<Vec<(usize, usize)>> {
        let g = self.base.graph();
        let mut edges: Vec<Vec<(usize, usize)>> = (0..g.num_edge_types()).map(|et| self.base.edges(et).to_vec()).collect();
        for (r, set) in self.candidates.iter().enumerate() {
            let chosen: Box<dyn Iterator<Item = usize>> = match mask {
                None => Box::new(0..set.pairs.len()),
                Some(m) => Box::new(m.retained[r].iter().copied()),
            };
            for i in chosen {
                let (s, d) = self.oriented(set, set.pairs[i]);
                edges[set.edge_type].push((s, d));
                if set.same_type {
                    edges[set.edge_type].push((d, s));
                }
            }
        }
        for list in &mut edges {
            list.sort_unstable();
        }
        edges
    }

    pub fn message_graph(&self, mask: Option<&EdgeMask>) -> Result<MessageGraph> {
        MessageGraph::from_edge_types(self.base.graph().schema(), self.node_counts(), &self.edge_lists(mask))
    }

    /// `h_src ⊕ h_dst` for each pair in `set`'s canonical orientation.
    fn embed_pairs(&self, tape: &mut Tape<'_>, hidden: &[Var], set: &CandidateSet, pairs: &[(usize, usize)]) -> Result<Var> {
        let syn: Vec<usize> = pairs.iter().map(|&(j, _)| self.synthetic_local(j)).collect();
        let real: Vec<usize> = pairs.iter().map(|&(_, v)| v).collect();
        let hs = tape.gather_rows(hidden[self.synth_type], syn)?;
        let hr = tape.gather_rows(hidden[set.real_type], real)?;
        if set.synthetic_is_src { tape.concat_cols(hs, hr) } else { tape.concat_cols(hr, hs) }
    }

    /// Real edges of the base subgraph with at least one endpoint visibly
    /// labeled minority, per candidate set, in canonical orientation (the
    /// minority endpoint first for same-type edges).
    pub fn real_minority_edges(&self) -> Vec<Vec<(usize, usize)>> {
        real_minority_edges(&self.base, &self.candidates)
    }

    /// Row-wise `h_src ⊕ h_dst` values for real local edges of `set`.
    pub fn embed_real_values(&self, tape: &Tape<'_>, hidden: &[Var], set: &CandidateSet, edges: &[(usize, usize)]) -> Tensor {
        let schema = self.base.graph().schema();
        let hs = tape.value(hidden[schema.edge_src(set.edge_type)]);
        let hd = tape.value(hidden[schema.edge_dst(set.edge_type)]);
        concat_rows_of(hs, hd, edges)
    }
}

fn concat_rows_of(hs: &Tensor, hd: &Tensor, edges: &[(usize, usize)]) -> Tensor {
    let cols = hs.cols + hd.cols;
    let mut data = Vec::with_capacity(edges.len() * cols);
    for &(s, d) in edges {
        data.extend_from_slice(hs.row(s));
        data.extend_from_slice(hd.row(d));
    }
    Tensor::from_vec(edges.len(), cols, data)
}

/// The Γ set: real subgraph edges touching a visibly-minority node.
pub fn real_minority_edges(sub: &Subgraph<'_>, sets: &[CandidateSet]) -> Vec<Vec<(usize, usize)>> {
    let g = sub.graph();
    let schema = g.schema();
    let ct = schema.classified_index();
    let minority = g.minority_class();
    let is_min = |t: usize, l: usize| t == ct && sub.visible_label(t, l) == Some(minority);
    sets.iter()
        .map(|set| {
            let et = set.edge_type;
            let (st, dt) = (schema.edge_src(et), schema.edge_dst(et));
            let undirected = schema.edge_types[et].undirected;
            sub.edges(et)
                .iter()
                .copied()
                .filter(|&(s, d)| {
                    let (ms, md) = (is_min(st, s), is_min(dt, d));
                    if undirected {
                        // keep exactly one orientation: minority first, ties by id
                        ms && (!md || s <= d)
                    } else {
                        ms || md
                    }
                })
                .collect()
        })
        .collect()
}

/// Retained candidates per set and the surviving synthetic nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeMask {
    /// Indices into each candidate set's `pairs`.
    pub retained: Vec<Vec<usize>>,
    /// Synthetic indices with at least one retained edge, ascending.
    pub survivors: Vec<usize>,
}

impl EdgeMask {
    pub fn retained_count(&self) -> usize {
        self.retained.iter().map(Vec::len).sum()
    }

    pub fn is_success(&self) -> bool {
        self.retained_count() > 0
    }
}

/// Keeps a candidate iff its keep probability strictly exceeds its edge
/// type's threshold. Real edges are never touched.
pub fn drop_edges(aug: &AugmentedSubgraph<'_>, keep: &[Vec<f64>], eta: &[f64]) -> Result<EdgeMask> {
    if keep.len() != aug.candidates.len() || eta.len() != aug.candidates.len() {
        return Err(Error::dim("scored edge types", aug.candidates.len(), keep.len().min(eta.len())));
    }
    let mut alive = vec![false; aug.k];
    let mut retained = Vec::with_capacity(keep.len());
    for (r, set) in aug.candidates.iter().enumerate() {
        if keep[r].len() != set.pairs.len() {
            return Err(Error::dim("keep probabilities", set.pairs.len(), keep[r].len()));
        }
        let kept: Vec<usize> = (0..set.pairs.len()).filter(|&i| keep[r][i] > eta[r]).collect();
        for &i in &kept {
            alive[set.pairs[i].0] = true;
        }
        retained.push(kept);
    }
    let survivors = (0..aug.k).filter(|&j| alive[j]).collect();
    Ok(EdgeMask { retained, survivors })
}

/// Surviving synthetic nodes as mergeable nodes with global neighbor ids,
/// labeled minority and placed in the training split.
pub fn surviving_nodes(aug: &AugmentedSubgraph<'_>, mask: &EdgeMask, x_synth: &Tensor) -> Vec<NewNode> {
    let g = aug.base.graph();
    let minority = g.minority_class();
    mask.survivors
        .iter()
        .map(|&j| {
            let mut edges = Vec::new();
            for (r, set) in aug.candidates.iter().enumerate() {
                for &i in &mask.retained[r] {
                    let (pj, v) = set.pairs[i];
                    if pj != j {
                        continue;
                    }
                    let other = aug.base.global(set.real_type, v);
                    edges.push(NewEdge { edge_type: set.edge_type, other, new_is_src: set.synthetic_is_src });
                    let undirected = g.schema().edge_types[set.edge_type].undirected;
                    if set.same_type && !undirected {
                        edges.push(NewEdge { edge_type: set.edge_type, other, new_is_src: !set.synthetic_is_src });
                    }
                }
            }
            NewNode { features: x_synth.row(j).to_vec(), label: Some(minority), split: Some(Split::Train), edges }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hetgraph::{build_graph, induced_subgraph, HeteroGraph, NodeTable};
    use crate::neural::{grad_check, GradCheckConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn small_config() -> FlashGanConfig {
        FlashGanConfig {
            noise_dim: 4,
            generator_hidden: 6,
            generator_layers: 3,
            mixer_dims: vec![5, 3],
            dropper_hidden: 7,
            discriminator_hidden: 7,
            synthetic_per_subgraph: 2,
            loss_mode: LossMode::Surrogate,
        }
    }

    /// 7 users, 3 products; user 0 is minority (train), user 6 minority but
    /// hidden in the test split.
    fn graph() -> HeteroGraph {
        let schema = Schema::review_graph(3, 2);
        let mut users = NodeTable::new(3);
        for i in 0..7 {
            let label = u32::from(i == 0 || i == 6);
            let split = if i == 6 { Split::Test } else { Split::Train };
            users.push(&[i as f64 * 0.1, 1.0 - i as f64 * 0.2, (i % 3) as f64], Some(label), Some(split));
        }
        let products = NodeTable::unlabeled(2, vec![0.5, -0.5, 1.0, 0.0, -1.0, 0.25]);
        let uu = vec![(0, 1), (0, 2), (0, 3), (1, 2), (4, 5), (5, 6), (3, 6)];
        let up = vec![(0, 1), (2, 0), (4, 2), (6, 2)];
        let pp = vec![(0, 1)];
        build_graph(schema, vec![users, products], vec![uu, up, pp]).unwrap()
    }

    fn full_sub(g: &HeteroGraph) -> Subgraph<'_> {
        induced_subgraph(g, &[(0..7).collect(), (0..3).collect()]).unwrap()
    }

    #[test]
    fn candidate_counts() {
        let g = graph();
        let aug = attach_full(full_sub(&g), 2).unwrap();
        assert_eq!(aug.candidates[0].pairs.len(), 14);
        assert_eq!(aug.candidates[1].pairs.len(), 6);
        assert_eq!(aug.candidate_count(), 28 + 12);
        let lists = aug.edge_lists(None);
        // no synthetic-synthetic pairs
        for &(s, d) in &lists[0] {
            assert!(s < 7 || d < 7);
        }
        let one = induced_subgraph(&g, &[vec![3], vec![]]).unwrap();
        assert_eq!(attach_full(one, 1).unwrap().candidate_count(), 2);
    }

    #[test]
    fn gamma_definition() {
        let g = graph();
        let aug = attach_full(full_sub(&g), 1).unwrap();
        let gamma = aug.real_minority_edges();
        // user 0 minority: uu neighbors 1,2,3 ; up product 1. User 6 hidden.
        assert_eq!(gamma[0], vec![(0, 1), (0, 2), (0, 3)]);
        assert_eq!(gamma[1], vec![(0, 1)]);

        let none = induced_subgraph(&g, &[vec![1, 2, 4, 5], vec![0, 2]]).unwrap();
        let aug = attach_full(none, 1).unwrap();
        assert!(aug.real_minority_edges().iter().all(Vec::is_empty));
    }

    #[test]
    fn threshold_extremes_and_strictness() {
        let g = graph();
        let aug = attach_full(full_sub(&g), 2).unwrap();
        let keep: Vec<Vec<f64>> = aug.candidates.iter().map(|c| vec![0.7; c.pairs.len()]).collect();
        let none = drop_edges(&aug, &keep, &[1.0, 1.0]).unwrap();
        assert_eq!(none.retained_count(), 0);
        assert!(none.survivors.is_empty());
        let all = drop_edges(&aug, &keep, &[0.0, 0.0]).unwrap();
        assert_eq!(all.retained_count() * 2, aug.candidate_count());
        assert_eq!(aug.edge_lists(Some(&all)), aug.edge_lists(None));

        let one = induced_subgraph(&g, &[vec![0, 1, 2], vec![]]).unwrap();
        let aug = attach_full(one, 1).unwrap();
        let keep = vec![vec![0.6, 0.5, 0.4], vec![]];
        let m = drop_edges(&aug, &keep, &[0.5, 0.5]).unwrap();
        assert_eq!(m.retained, vec![vec![0], vec![]]);
        assert_eq!(m.survivors, vec![0]);
    }

    #[test]
    fn real_edges_survive_dropping() {
        let g = graph();
        let aug = attach_full(full_sub(&g), 2).unwrap();
        let keep: Vec<Vec<f64>> = aug.candidates.iter().map(|c| (0..c.pairs.len()).map(|i| (i % 10) as f64 / 10.0).collect()).collect();
        let m = drop_edges(&aug, &keep, &[0.55, 0.35]).unwrap();
        let lists = aug.edge_lists(Some(&m));
        for et in 0..3 {
            for e in aug.base.edges(et) {
                assert!(lists[et].contains(e));
            }
        }
    }

    #[test]
    fn loss_arithmetic() {
        let s = ParamStore::new();
        let mut tape = Tape::new(&s);
        // D(h) = 0.5 for 4 edges, weights 1
        let logits = tape.constant(Tensor::from_vec(4, 2, vec![0.0; 8]));
        let t = fake_term(&mut tape, logits, None).unwrap();
        assert!((tape.scalar(t) - 0.5f64.ln()).abs() < 1e-15);

        // surrogate: p = (0.8, 0.6), D = (0.3, 0.7)
        let logits = tape.constant(Tensor::from_vec(2, 2, vec![0.3f64.ln(), 0.7f64.ln(), 0.7f64.ln(), 0.3f64.ln()]));
        let w = tape.constant(Tensor::column(vec![0.8, 0.6]));
        let t = fake_term(&mut tape, logits, Some(w)).unwrap();
        let want = 0.5 * (0.8 * 0.7f64.ln() + 0.6 * 0.3f64.ln());
        assert!((tape.scalar(t) - want).abs() < 1e-12);
        assert!((tape.scalar(t) - (-0.5039)).abs() < 1e-4);

        // L_D: Γ with D = (0.9, 0.8), one fake with D = 0.2
        let real = tape.constant(Tensor::from_vec(2, 2, vec![0.9f64.ln(), 0.1f64.ln(), 0.8f64.ln(), 0.2f64.ln()]));
        let fake = tape.constant(Tensor::from_vec(1, 2, vec![0.2f64.ln(), 0.8f64.ln()]));
        let a = real_term(&mut tape, real).unwrap();
        let b = fake_term(&mut tape, fake, None).unwrap();
        let l = tape.add(a, b).unwrap();
        let want = 0.9f64.ln() / 2.0 + 0.8f64.ln() / 2.0 + 0.8f64.ln();
        assert!((tape.scalar(l) - want).abs() < 1e-12);
        assert!((tape.scalar(l) - (-0.3874)).abs() < 1e-4);

        // D = 0.5 everywhere => 2 log 0.5
        let r = tape.constant(Tensor::from_vec(3, 2, vec![1.0; 6]));
        let f = tape.constant(Tensor::from_vec(2, 2, vec![-2.0; 4]));
        let a = real_term(&mut tape, r).unwrap();
        let b = fake_term(&mut tape, f, None).unwrap();
        let l = tape.add(a, b).unwrap();
        assert!((tape.scalar(l) - 2.0 * 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn zero_generator_and_determinism() {
        let g = graph();
        let mut net = FlashGan::new(g.schema(), small_config(), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let z1 = net.sample_noise(&mut rng, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let z2 = net.sample_noise(&mut rng, 5);
        assert_eq!(z1, z2);
        let mut tape = Tape::new(&net.params);
        let a = net.generate_synthetic_nodes(&mut tape, &z1).unwrap();
        let mut tape2 = Tape::new(&net.params);
        let b = net.generate_synthetic_nodes(&mut tape2, &z2).unwrap();
        assert_eq!(tape.value(a), tape2.value(b));
        assert_eq!(tape.shape(a), (5, 3));
        drop((tape, tape2));
        for id in net.generator.param_ids() {
            net.params.get_mut(id).data.iter_mut().for_each(|x| *x = 0.0);
        }
        let mut tape = Tape::new(&net.params);
        let a = net.generate_synthetic_nodes(&mut tape, &z1).unwrap();
        assert!(tape.value(a).data.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn dropper_and_discriminator_probabilities() {
        let g = graph();
        let mut net = FlashGan::new(g.schema(), small_config(), 3).unwrap();
        let h = Tensor::from_vec(2, 6, vec![0.3, -1.0, 2.0, 0.0, 0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        for id in net.discriminators[0].param_ids() {
            net.params.get_mut(id).data.iter_mut().for_each(|x| *x = 0.0);
        }
        assert_eq!(net.discriminate(0, &h).unwrap(), vec![0.5, 0.5]);
        let p = net.edge_preservation(1, &h).unwrap();
        assert!(p.iter().all(|&x| x > 0.0 && x < 1.0));
        assert!(matches!(net.edge_preservation(0, &Tensor::zeros(1, 5)), Err(Error::Dimension { .. })));

        // keep-logit pushed far up => p -> 1
        let (_, b) = net.droppers[0].layers[1];
        net.params.get_mut(b).data.copy_from_slice(&[1e3, -1e3]);
        assert!(net.edge_preservation(0, &h).unwrap().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn hand_set_dropper_matches_manual() {
        let g = graph();
        let mut net = FlashGan::new(g.schema(), small_config(), 3).unwrap();
        // edge dim 6 -> hidden 7 -> 2. Only hidden unit 0 = h[0] + h[1], out logits = (2*u0, -u0)
        let (w0, b0) = net.droppers[0].layers[0];
        let (w1, b1) = net.droppers[0].layers[1];
        for id in [w0, b0, w1, b1] {
            net.params.get_mut(id).data.iter_mut().for_each(|x| *x = 0.0);
        }
        {
            let w = net.params.get_mut(w0);
            w.data[0] = 1.0; // row 0, col 0
            w.data[7] = 1.0; // row 1, col 0
        }
        {
            let w = net.params.get_mut(w1);
            w.data[0] = 2.0;
            w.data[1] = -1.0;
        }
        let h = Tensor::from_vec(2, 6, vec![0.3, 0.2, 9.0, 9.0, 9.0, 9.0, -1.0, 0.5, 0.0, 0.0, 0.0, 0.0]);
        let p = net.edge_preservation(0, &h).unwrap();
        // row 0: u0 = 0.5 > 0 -> logits (1.0, -0.5) -> sigmoid(1.5)
        // row 1: u0 = -0.5 -> leaky -0.1 -> logits (-0.2, 0.1) -> sigmoid(-0.3)
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        assert!((p[0] - sig(1.5)).abs() < 1e-12);
        assert!((p[1] - sig(-0.3)).abs() < 1e-12);
    }

    #[test]
    fn losses_pass_gradient_check() {
        let g = graph();
        for mode in [LossMode::Surrogate, LossMode::Literal] {
            let cfg = FlashGanConfig { loss_mode: mode, ..small_config() };
            let net = FlashGan::new(g.schema(), cfg, 5).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let noise = net.sample_noise(&mut rng, 2);
            let aug = attach_full(full_sub(&g), 2).unwrap();
            let mask = {
                let mut tape = Tape::new(&net.params);
                let pass = net.generator_pass(&mut tape, &aug, &noise).unwrap();
                let keep = pass.keep_values(&tape);
                let mut m = drop_edges(&aug, &keep, &[0.3, 0.3]).unwrap();
                if !m.is_success() {
                    m = drop_edges(&aug, &keep, &[0.0, 0.0]).unwrap();
                }
                m
            };
            let ids: Vec<_> = net.params.group_ids(GENERATOR_GROUP);
            let report = grad_check(
                &net.params,
                &ids,
                |tape| {
                    let pass = net.generator_pass(tape, &aug, &noise)?;
                    Ok(net.generator_loss(tape, &pass, &mask)?.expect("retained edges"))
                },
                GradCheckConfig::default(),
            )
            .unwrap();
            assert!(report.max_rel_error <= 1e-4, "{mode:?}: {report:?}");
        }
    }
}
