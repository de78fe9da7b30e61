//! Downstream node classification and its metric suite.

mod classifier;
mod metrics;

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use classifier::{cross_entropy, train_classifier, Classifier, ClassifierConfig, Selection, TrainedClassifier};
pub use metrics::{auc_prc, auc_roc, from_confusion, threshold_metrics, ThresholdMetrics};

use crate::dataio::GraphStats;
use crate::error::{Error, Result};
use crate::hetgraph::{HeteroGraph, Split};

pub const DEFAULT_TAU: f64 = 0.5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub auc_prc: f64,
    pub auc_roc: f64,
    pub f_score: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

impl Metrics {
    pub const NAMES: [&'static str; 6] = ["auc_prc", "auc_roc", "f_score", "accuracy", "precision", "recall"];

    pub fn values(&self) -> [f64; 6] {
        [self.auc_prc, self.auc_roc, self.f_score, self.accuracy, self.precision, self.recall]
    }

    fn from_values(v: [f64; 6]) -> Metrics {
        Metrics { auc_prc: v[0], auc_roc: v[1], f_score: v[2], accuracy: v[3], precision: v[4], recall: v[5] }
    }

    pub fn compute(scores: &[f64], labels: &[bool], tau: f64) -> Result<Metrics> {
        let t = threshold_metrics(scores, labels, tau)?;
        Ok(Metrics {
            auc_prc: auc_prc(scores, labels)?,
            auc_roc: auc_roc(scores, labels)?,
            f_score: t.f_score,
            accuracy: t.accuracy,
            precision: t.precision,
            recall: t.recall,
        })
    }
}

/// Test-split metrics of a trained classifier.
pub fn evaluate_on(clf: &Classifier, g: &HeteroGraph, split: Split) -> Result<Metrics> {
    let nodes = g.labeled_nodes(Some(split));
    let ct = g.schema().classified_index();
    let minority = g.minority_class();
    let labels: Vec<bool> = nodes.iter().map(|&i| g.label(ct, i) == Some(minority)).collect();
    let scores = clf.predict_scores(g, &nodes)?;
    Metrics::compute(&scores, &labels, DEFAULT_TAU)
}

/// One graph to evaluate, with optional class weights for the loss.
#[derive(Clone, Debug)]
pub struct Variant {
    pub name: String,
    pub graph: HeteroGraph,
    pub class_weights: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub variant: String,
    pub seed: u64,
    pub metrics: Option<Metrics>,
    pub selected_epoch: Option<usize>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub name: String,
    pub stats: GraphStats,
    pub mean: Option<Metrics>,
    pub stdev: Option<Metrics>,
    pub completed_seeds: usize,
    /// Byte growth relative to the first variant, as a fraction.
    pub size_increment: f64,
    /// Mean AUC-PRC minus the first variant's.
    pub auc_prc_gain: Option<f64>,
    /// `auc_prc_gain / size_increment`; absent when the size did not grow.
    pub gain_per_size: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classifier: ClassifierConfig,
    pub seeds: Vec<u64>,
    pub tau: f64,
    pub prc_integration: String,
    pub variants: Vec<VariantSummary>,
    pub cells: Vec<Cell>,
    pub partial: bool,
    /// Published AUC-PRC values on the full review graphs, kept for context.
    pub reference: Vec<(String, f64)>,
}

fn mean_std(xs: &[Metrics]) -> (Metrics, Metrics) {
    let n = xs.len() as f64;
    let mut mean = [0.0; 6];
    for m in xs {
        for (a, v) in mean.iter_mut().zip(m.values()) {
            *a += v;
        }
    }
    mean.iter_mut().for_each(|a| *a /= n);
    let mut var = [0.0; 6];
    if xs.len() > 1 {
        for m in xs {
            for ((a, v), mu) in var.iter_mut().zip(m.values()).zip(mean) {
                *a += (v - mu) * (v - mu);
            }
        }
        var.iter_mut().for_each(|a| *a = (*a / (n - 1.0)).sqrt());
    }
    (Metrics::from_values(mean), Metrics::from_values(var))
}

/// Trains and tests a classifier for every (variant, seed) cell. `jobs`
/// caps the worker threads; results do not depend on it.
pub fn run_experiment(variants: &[Variant], seeds: &[u64], cfg: &ClassifierConfig, jobs: usize) -> Result<EvalReport> {
    if variants.is_empty() || seeds.is_empty() {
        return Err(Error::Config("need at least one variant and one seed".into()));
    }
    let work: Vec<(usize, u64)> = variants.iter().enumerate().flat_map(|(v, _)| seeds.iter().map(move |&s| (v, s))).collect();
    let run = |&(v, seed): &(usize, u64)| -> Cell {
        let variant = &variants[v];
        let cfg = ClassifierConfig { class_weights: variant.class_weights.clone(), ..cfg.clone() };
        let out = train_classifier(&variant.graph, &cfg, seed)
            .and_then(|(clf, info)| Ok((evaluate_on(&clf, &variant.graph, Split::Test)?, info.selected_epoch)));
        match out {
            Ok((m, e)) => Cell { variant: variant.name.clone(), seed, metrics: Some(m), selected_epoch: Some(e), error: None },
            Err(e) => Cell { variant: variant.name.clone(), seed, metrics: None, selected_epoch: None, error: Some(e.to_string()) },
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let cells: Vec<Cell> = pool.install(|| work.par_iter().map(run).collect());
    let partial = cells.iter().any(|c| c.error.is_some());

    let mut summaries: Vec<VariantSummary> = Vec::with_capacity(variants.len());
    for v in variants {
        let done: Vec<Metrics> = cells.iter().filter(|c| c.variant == v.name).filter_map(|c| c.metrics).collect();
        let (mean, stdev) = if done.is_empty() { (None, None) } else { let (m, s) = mean_std(&done); (Some(m), Some(s)) };
        summaries.push(VariantSummary {
            name: v.name.clone(),
            stats: GraphStats::of(&v.graph)?,
            mean,
            stdev,
            completed_seeds: done.len(),
            size_increment: 0.0,
            auc_prc_gain: None,
            gain_per_size: None,
        });
    }
    let base_bytes = summaries[0].stats.bytes as f64;
    let base_prc = summaries[0].mean.map(|m| m.auc_prc);
    for s in &mut summaries {
        s.size_increment = (s.stats.bytes as f64 - base_bytes) / base_bytes;
        s.auc_prc_gain = match (s.mean, base_prc) {
            (Some(m), Some(b)) => Some(m.auc_prc - b),
            _ => None,
        };
        s.gain_per_size = match s.auc_prc_gain {
            Some(g) if s.size_increment > 0.0 => Some(g / s.size_increment),
            _ => None,
        };
    }
    Ok(EvalReport {
        classifier: cfg.clone(),
        seeds: seeds.to_vec(),
        tau: DEFAULT_TAU,
        prc_integration: "step".into(),
        variants: summaries,
        cells,
        partial,
        reference: vec![
            ("amazon_original_auc_prc".into(), 0.4139),
            ("amazon_flashgan_auc_prc".into(), 0.4578),
            ("yelp_original_auc_prc".into(), 0.3657),
            ("yelp_flashgan_auc_prc".into(), 0.4002),
        ],
    })
}

impl EvalReport {
    pub fn csv_header(&self) -> String {
        let mut h = String::from("variant,seeds");
        for n in Metrics::NAMES {
            let _ = write!(h, ",{n}_mean,{n}_std");
        }
        if let Some(v) = self.variants.first() {
            for (t, _) in &v.stats.nodes {
                let _ = write!(h, ",nodes_{t}");
            }
            for (e, _) in &v.stats.edges {
                let _ = write!(h, ",edges_{e}");
            }
        }
        h.push_str(",bytes,size_increment,auc_prc_gain,gain_per_size");
        h
    }

    pub fn to_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let mut out = self.csv_header();
        out.push('\n');
        for v in &self.variants {
            let _ = write!(out, "{},{}", v.name, v.completed_seeds);
            for i in 0..6 {
                let _ = write!(out, ",{},{}", opt(v.mean.map(|m| m.values()[i])), opt(v.stdev.map(|m| m.values()[i])));
            }
            for (_, n) in &v.stats.nodes {
                let _ = write!(out, ",{n}");
            }
            for (_, n) in &v.stats.edges {
                let _ = write!(out, ",{n}");
            }
            let _ = writeln!(
                out,
                ",{},{},{},{}",
                v.stats.bytes,
                v.size_increment,
                opt(v.auc_prc_gain),
                opt(v.gain_per_size)
            );
        }
        out
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = dir.join("report.json");
        std::fs::write(&json, serde_json::to_vec_pretty(self)?).map_err(|e| Error::io(&json, e))?;
        let csv = dir.join("report.csv");
        std::fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))
    }

    pub fn load(path: &Path) -> Result<EvalReport> {
        let text = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&text)?)
    }
}
