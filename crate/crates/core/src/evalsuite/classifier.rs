use serde::{Deserialize, Serialize};

use super::metrics::auc_prc;
use crate::error::{Error, Result};
use crate::hetgraph::{HeteroGraph, Schema, Split};
use crate::neural::{AdamConfig, AdamState, MessageGraph, Mlp, ParamStore, RelGnn, Tape, Tensor, Var, LEAKY_SLOPE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Keep the parameters with the best validation AUC-PRC.
    ValAucPrc,
    LastEpoch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub dims: Vec<usize>,
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// Per-class loss weights; `None` means unweighted.
    pub class_weights: Option<Vec<f64>>,
    pub selection: Selection,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            dims: vec![64, 32],
            epochs: 200,
            lr: 0.01,
            weight_decay: 0.0,
            class_weights: None,
            selection: Selection::ValAucPrc,
        }
    }
}

/// Relational GNN encoder, LeakyReLU, then a linear head to class logits.
#[derive(Clone, Debug)]
pub struct Classifier {
    pub schema: Schema,
    pub params: ParamStore,
    pub gnn: RelGnn,
    pub head: Mlp,
}

impl Classifier {
    pub fn new(schema: &Schema, dims: &[usize], seed: u64) -> Result<Classifier> {
        if dims.is_empty() {
            return Err(Error::Config("classifier needs at least one GNN layer".into()));
        }
        let mut params = ParamStore::new();
        let gnn = RelGnn::register(&mut params, "clf.gnn", "classifier", schema, dims);
        let classes = schema.classified.num_classes as usize;
        let head = Mlp::register(&mut params, "clf.head", "classifier", &[gnn.output_dim(), classes]);
        params.initialize(seed);
        Ok(Classifier { schema: schema.clone(), params, gnn, head })
    }

    fn check_schema(&self, g: &HeteroGraph) -> Result<()> {
        if g.schema() != &self.schema {
            return Err(Error::Schema("graph schema differs from the classifier's".into()));
        }
        Ok(())
    }

    /// Logits for every node of the classified type.
    pub fn logits(&self, tape: &mut Tape<'_>, g: &HeteroGraph, mg: &MessageGraph) -> Result<Var> {
        let xs: Vec<Var> = (0..g.num_node_types())
            .map(|t| tape.constant(Tensor::from_vec(g.num_nodes(t), g.feature_dim(t), g.features(t).to_vec())))
            .collect();
        let h = self.gnn.forward(tape, mg, &xs)?;
        let ct = self.schema.classified_index();
        let a = tape.leaky_relu(h[ct], LEAKY_SLOPE)?;
        self.head.forward(tape, a)
    }

    /// Minority-class probability for `nodes` of the classified type.
    pub fn predict_scores(&self, g: &HeteroGraph, nodes: &[usize]) -> Result<Vec<f64>> {
        self.check_schema(g)?;
        let mg = MessageGraph::of_graph(g)?;
        let all = self.all_scores(g, &mg)?;
        nodes
            .iter()
            .map(|&i| all.get(i).copied().ok_or_else(|| Error::Contract(format!("node {i} out of range"))))
            .collect()
    }

    fn all_scores(&self, g: &HeteroGraph, mg: &MessageGraph) -> Result<Vec<f64>> {
        let mut tape = Tape::new(&self.params);
        let logits = self.logits(&mut tape, g, mg)?;
        let p = tape.softmax_rows(logits)?;
        let col = tape.column(p, self.schema.classified.minority_class as usize)?;
        Ok(tape.value(col).data.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub selected_epoch: usize,
    pub best_val_auc_prc: Option<f64>,
    /// Training loss and validation AUC-PRC after each epoch.
    pub trace: Vec<(f64, Option<f64>)>,
}

/// Weighted cross-entropy `−Σ w_i log p_i / Σ w_i` over training nodes.
pub fn cross_entropy(tape: &mut Tape<'_>, logits: Var, rows: &[usize], labels: &[usize], weights: &[f64]) -> Result<Var> {
    let picked = tape.gather_rows(logits, rows.to_vec())?;
    let lsm = tape.log_softmax_rows(picked)?;
    let lp = tape.pick_per_row(lsm, labels.to_vec())?;
    let w = tape.constant(Tensor::column(weights.to_vec()));
    let wl = tape.mul(lp, w)?;
    let s = tape.sum(wl)?;
    let total: f64 = weights.iter().sum();
    tape.scale(s, -1.0 / total)
}

/// Full-batch training on the training split with validation-based
/// snapshot selection. The returned classifier holds the selected weights.
pub fn train_classifier(g: &HeteroGraph, cfg: &ClassifierConfig, seed: u64) -> Result<(Classifier, TrainedClassifier)> {
    let mut model = Classifier::new(g.schema(), &cfg.dims, seed)?;
    let train = g.labeled_nodes(Some(Split::Train));
    let val = g.labeled_nodes(Some(Split::Val));
    if train.is_empty() {
        return Err(Error::Contract("graph has no labeled training nodes".into()));
    }
    if cfg.selection == Selection::ValAucPrc && val.is_empty() {
        return Err(Error::Contract("graph has no labeled validation nodes".into()));
    }
    let ct = g.schema().classified_index();
    let classes = g.schema().classified.num_classes as usize;
    let class_w = match &cfg.class_weights {
        Some(w) if w.len() != classes => return Err(Error::dim("class weights", classes, w.len())),
        Some(w) => w.clone(),
        None => vec![1.0; classes],
    };
    let labels: Vec<usize> = train.iter().map(|&i| g.label(ct, i).unwrap() as usize).collect();
    let weights: Vec<f64> = labels.iter().map(|&c| class_w[c]).collect();
    let minority = g.minority_class();
    let val_labels: Vec<bool> = val.iter().map(|&i| g.label(ct, i) == Some(minority)).collect();

    let mg = MessageGraph::of_graph(g)?;
    let ids: Vec<_> = model.params.ids().collect();
    let adam_cfg = AdamConfig { lr: cfg.lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 };
    let mut adam = AdamState::new(adam_cfg, &model.params, ids.clone());
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let (loss, mut grads) = {
            let mut tape = Tape::new(&model.params);
            let logits = model.logits(&mut tape, g, &mg)?;
            let loss = cross_entropy(&mut tape, logits, &train, &labels, &weights)?;
            (tape.scalar(loss), tape.backward(loss)?)
        };
        if cfg.weight_decay > 0.0 {
            for &id in &ids {
                let mut p = model.params.get(id).clone();
                p.scale(cfg.weight_decay);
                grads.accumulate(id, &p);
            }
        }
        adam.step(&mut model.params, &grads)?;
        let val_auc = if val.is_empty() {
            None
        } else {
            let all = model.all_scores(g, &mg)?;
            let scores: Vec<f64> = val.iter().map(|&i| all[i]).collect();
            auc_prc(&scores, &val_labels).ok()
        };
        // ties go to the later, longer-trained snapshot
        if let (Selection::ValAucPrc, Some(a)) = (cfg.selection, val_auc) {
            if best.as_ref().is_none_or(|(b, _, _)| a >= *b) {
                best = Some((a, epoch, model.params.clone()));
            }
        }
        trace.push((loss, val_auc));
    }
    let (selected_epoch, best_val) = match best {
        Some((a, e, params)) => {
            model.params = params;
            (e, Some(a))
        }
        None => (cfg.epochs, None),
    };
    Ok((model, TrainedClassifier { selected_epoch, best_val_auc_prc: best_val, trace }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{generate, SynthConfig};
    use crate::evalsuite::metrics::threshold_metrics;

    fn planted() -> HeteroGraph {
        generate(&SynthConfig { n_users: 300, n_products: 30, fraud_fraction: 0.3, mu: 6.0, seed: 1, ..Default::default() }).unwrap()
    }

    #[test]
    fn zero_model_scores_half() {
        let g = planted();
        let mut clf = Classifier::new(g.schema(), &[4], 0).unwrap();
        let ids: Vec<_> = clf.params.ids().collect();
        for id in ids {
            clf.params.get_mut(id).data.fill(0.0);
        }
        let s = clf.predict_scores(&g, &[0, 5, 9]).unwrap();
        assert_eq!(s, vec![0.5; 3]);
    }

    #[test]
    fn unit_weights_match_unweighted() {
        let g = planted();
        let clf = Classifier::new(g.schema(), &[4], 0).unwrap();
        let mg = MessageGraph::of_graph(&g).unwrap();
        let train = g.labeled_nodes(Some(Split::Train));
        let labels: Vec<usize> = train.iter().map(|&i| g.label(0, i).unwrap() as usize).collect();
        let mut tape = Tape::new(&clf.params);
        let logits = clf.logits(&mut tape, &g, &mg).unwrap();
        let a = cross_entropy(&mut tape, logits, &train, &labels, &vec![1.0; train.len()]).unwrap();
        // unweighted mean computed independently
        let picked = tape.gather_rows(logits, train.clone()).unwrap();
        let lsm = tape.log_softmax_rows(picked).unwrap();
        let lp = tape.pick_per_row(lsm, labels).unwrap();
        let s = tape.sum(lp).unwrap();
        let b = tape.scale(s, -1.0 / train.len() as f64).unwrap();
        assert_eq!(tape.scalar(a).to_bits(), tape.scalar(b).to_bits());
    }

    #[test]
    fn separable_planted_graph_is_learned() {
        let g = planted();
        let cfg = ClassifierConfig { dims: vec![16, 8], epochs: 200, ..Default::default() };
        let (clf, info) = train_classifier(&g, &cfg, 0).unwrap();
        let test = g.labeled_nodes(Some(Split::Test));
        let scores = clf.predict_scores(&g, &test).unwrap();
        let labels: Vec<bool> = test.iter().map(|&i| g.label(0, i) == Some(1)).collect();
        let m = threshold_metrics(&scores, &labels, 0.5).unwrap();
        assert!(m.accuracy > 0.95, "{m:?}");
        assert!(info.selected_epoch >= 1 && info.selected_epoch <= 200);

        let (clf2, info2) = train_classifier(&g, &cfg, 0).unwrap();
        assert_eq!(info, info2);
        assert_eq!(clf.params.export_group("classifier"), clf2.params.export_group("classifier"));
    }

    #[test]
    fn scores_are_probabilities_and_schema_checked() {
        let g = planted();
        let clf = Classifier::new(g.schema(), &[4, 3], 2).unwrap();
        let all: Vec<usize> = (0..g.num_nodes(0)).collect();
        assert!(clf.predict_scores(&g, &all).unwrap().iter().all(|p| (0.0..=1.0).contains(p)));
        let other = generate(&SynthConfig { n_users: 50, user_dim: 5, seed: 0, ..Default::default() }).unwrap();
        assert!(matches!(clf.predict_scores(&other, &[0]), Err(Error::Schema(_))));
    }
}
