//! Planted review-graph generator and the on-disk graph container.
//!
//! A container directory holds `manifest.json` (schema and file list),
//! `nodes_<type>.csv` with columns `id,f0..f{d-1},label,split`, and
//! `edges_<type>.csv` with columns `src,dst`. Undirected edge types list each
//! edge once with `src <= dst`. Floats are written with 17 significant digits
//! so loading reproduces every bit.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hetgraph::{build_graph, HeteroGraph, NodeTable, Schema, Split};

pub const CONTAINER_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_products: usize,
    pub fraud_fraction: f64,
    pub user_dim: usize,
    pub product_dim: usize,
    /// Shift of minority user features along a random unit direction.
    pub mu: f64,
    pub p_minority_minority: f64,
    pub p_majority_majority: f64,
    pub p_inter: f64,
    /// Mean number of rated products per user, by class.
    pub rate_majority: f64,
    pub rate_minority: f64,
    /// Fraction of products forming the minority's preferred pool.
    pub targeted_fraction: f64,
    /// Probability that a minority rating lands in the preferred pool.
    pub minority_preference: f64,
    pub p_product_product: f64,
    /// Train / validation / test fractions.
    pub split: [f64; 3],
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 1000,
            n_products: 200,
            fraud_fraction: 0.1,
            user_dim: 16,
            product_dim: 8,
            mu: 1.0,
            p_minority_minority: 0.05,
            p_majority_majority: 0.01,
            p_inter: 0.002,
            rate_majority: 3.0,
            rate_minority: 3.0,
            targeted_fraction: 0.1,
            minority_preference: 0.8,
            p_product_product: 0.02,
            split: [0.7, 0.2, 0.1],
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let probs = [
            self.p_minority_minority,
            self.p_majority_majority,
            self.p_inter,
            self.targeted_fraction,
            self.minority_preference,
            self.p_product_product,
        ];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("probabilities must lie in [0, 1]".into()));
        }
        if !(self.fraud_fraction > 0.0 && self.fraud_fraction <= 0.5) {
            return Err(Error::Config(format!("fraud_fraction {} outside (0, 0.5]", self.fraud_fraction)));
        }
        if self.split.iter().any(|&f| f < 0.0) || (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions {:?} must be non-negative and sum to 1", self.split)));
        }
        if self.rate_majority < 0.0 || self.rate_minority < 0.0 || !self.mu.is_finite() {
            return Err(Error::Config("rates must be non-negative and mu finite".into()));
        }
        if self.n_products == 0 && (self.rate_majority > 0.0 || self.rate_minority > 0.0) {
            return Err(Error::Config("ratings need at least one product".into()));
        }
        let n_min = self.minority_count();
        if n_min == 0 || n_min >= self.n_users {
            return Err(Error::Config(format!(
                "{} users at fraction {} leave a class empty",
                self.n_users, self.fraud_fraction
            )));
        }
        Ok(())
    }

    pub fn minority_count(&self) -> usize {
        (self.fraud_fraction * self.n_users as f64).round() as usize
    }
}

/// Planted graph: Gaussian features with a minority mean shift, homophilous
/// user-user wiring, class-dependent ratings, random product links and a
/// per-class stratified split.
pub fn generate(cfg: &SynthConfig) -> Result<HeteroGraph> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n_users;
    let n_min = cfg.minority_count();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut is_min = vec![false; n];
    for &i in &order[..n_min] {
        is_min[i] = true;
    }

    let mut dir: Vec<f64> = (0..cfg.user_dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        dir.iter_mut().for_each(|x| *x /= norm);
    }

    let mut splits = vec![Split::Train; n];
    for class in [false, true] {
        let mut members: Vec<usize> = (0..n).filter(|&i| is_min[i] == class).collect();
        members.shuffle(&mut rng);
        let c = members.len() as f64;
        let n_train = (cfg.split[0] * c).round() as usize;
        let n_val = ((cfg.split[0] + cfg.split[1]) * c).round() as usize - n_train;
        for (pos, &i) in members.iter().enumerate() {
            splits[i] = if pos < n_train {
                Split::Train
            } else if pos < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
        }
    }

    let mut users = NodeTable::new(cfg.user_dim);
    let mut row = vec![0.0; cfg.user_dim];
    for i in 0..n {
        for (c, x) in row.iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            *x = z + if is_min[i] { cfg.mu * dir[c] } else { 0.0 };
        }
        users.push(&row, Some(u32::from(is_min[i])), Some(splits[i]));
    }
    let product_features = (0..cfg.n_products * cfg.product_dim).map(|_| rng.sample(StandardNormal)).collect();
    let products = NodeTable::unlabeled(cfg.product_dim, product_features);

    let mut uu = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = match (is_min[i], is_min[j]) {
                (true, true) => cfg.p_minority_minority,
                (false, false) => cfg.p_majority_majority,
                _ => cfg.p_inter,
            };
            if rng.random::<f64>() < p {
                uu.push((i, j));
            }
        }
    }

    let targeted = ((cfg.targeted_fraction * cfg.n_products as f64).round() as usize).clamp(1.min(cfg.n_products), cfg.n_products);
    let mut up = Vec::new();
    if cfg.n_products > 0 {
        let pois = |rate: f64| Poisson::new(rate).ok();
        let (pm, pj) = (pois(cfg.rate_minority), pois(cfg.rate_majority));
        for i in 0..n {
            let dist = if is_min[i] { &pm } else { &pj };
            let count = dist.as_ref().map_or(0, |d| d.sample(&mut rng) as usize).min(cfg.n_products);
            let mut chosen = BTreeSet::new();
            for _ in 0..count {
                let p = if is_min[i] && targeted > 0 && rng.random::<f64>() < cfg.minority_preference {
                    rng.random_range(0..targeted)
                } else {
                    rng.random_range(0..cfg.n_products)
                };
                chosen.insert(p);
            }
            up.extend(chosen.into_iter().map(|p| (i, p)));
        }
    }

    let mut pp = Vec::new();
    for a in 0..cfg.n_products {
        for b in a + 1..cfg.n_products {
            if rng.random::<f64>() < cfg.p_product_product {
                pp.push((a, b));
            }
        }
    }

    let schema = Schema::review_graph(cfg.user_dim, cfg.product_dim);
    build_graph(schema, vec![users, products], vec![uu, up, pp])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    schema: Schema,
    node_files: Vec<String>,
    edge_files: Vec<String>,
}

fn node_file(name: &str) -> String {
    format!("nodes_{name}.csv")
}

fn edge_file(name: &str) -> String {
    format!("edges_{name}.csv")
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Every file of the container as `(file name, bytes)`.
pub fn encode_graph(g: &HeteroGraph) -> Result<Vec<(String, Vec<u8>)>> {
    let schema = g.schema();
    let manifest = Manifest {
        format: "hetgraph".into(),
        version: CONTAINER_VERSION,
        schema: schema.clone(),
        node_files: schema.node_types.iter().map(|t| node_file(&t.name)).collect(),
        edge_files: schema.edge_types.iter().map(|t| edge_file(&t.name)).collect(),
    };
    let mut files = vec![("manifest.json".to_string(), serde_json::to_vec_pretty(&manifest)?)];
    let csv_err = |e: csv::Error| Error::Contract(format!("csv encoding failed: {e}"));
    for (t, def) in schema.node_types.iter().enumerate() {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["id".to_string()];
        header.extend((0..def.feature_dim).map(|c| format!("f{c}")));
        header.extend(["label".to_string(), "split".to_string()]);
        w.write_record(&header).map_err(csv_err)?;
        for i in 0..g.num_nodes(t) {
            let mut rec = vec![i.to_string()];
            rec.extend(g.feature_row(t, i).iter().map(|&x| fmt_f64(x)));
            rec.push(g.label(t, i).map(|l| l.to_string()).unwrap_or_default());
            rec.push(g.split(t, i).map(|s| s.as_str().to_string()).unwrap_or_default());
            w.write_record(&rec).map_err(csv_err)?;
        }
        files.push((node_file(&def.name), w.into_inner().map_err(|e| Error::Contract(e.to_string()))?));
    }
    for (et, def) in schema.edge_types.iter().enumerate() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["src", "dst"]).map_err(csv_err)?;
        for (s, d) in g.canonical_edges(et) {
            w.write_record([s.to_string(), d.to_string()]).map_err(csv_err)?;
        }
        files.push((edge_file(&def.name), w.into_inner().map_err(|e| Error::Contract(e.to_string()))?));
    }
    Ok(files)
}

/// Total bytes the container of `g` occupies on disk.
pub fn serialized_size(g: &HeteroGraph) -> Result<u64> {
    Ok(encode_graph(g)?.iter().map(|(_, b)| b.len() as u64).sum())
}

/// Writes the container into `dir` (created if missing); returns its byte size.
pub fn save_graph(g: &HeteroGraph, dir: &Path) -> Result<u64> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut total = 0;
    for (name, bytes) in encode_graph(g)? {
        let path = dir.join(&name);
        fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        total += bytes.len() as u64;
    }
    Ok(total)
}

fn parse_err(file: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse { file: file.to_path_buf(), line: line as usize, message: message.into() }
}

fn read_csv(path: &Path, expected_header: &[String]) -> Result<Vec<(u64, csv::StringRecord)>> {
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(&text[..]);
    let header = r.headers().map_err(|e| parse_err(path, 1, e.to_string()))?.clone();
    if header.iter().ne(expected_header.iter().map(String::as_str)) {
        return Err(parse_err(path, 1, format!("expected header {}", expected_header.join(","))));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != expected_header.len() {
            return Err(parse_err(path, line, format!("expected {} fields, found {}", expected_header.len(), rec.len())));
        }
        rows.push((line, rec));
    }
    Ok(rows)
}

fn field<T: std::str::FromStr>(path: &Path, line: u64, raw: &str, what: &str) -> Result<T> {
    raw.parse().map_err(|_| parse_err(path, line, format!("invalid {what} `{raw}`")))
}

pub fn load_graph(dir: &Path) -> Result<HeteroGraph> {
    let mpath = dir.join("manifest.json");
    let text = fs::read(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: Manifest = serde_json::from_slice(&text).map_err(|e| parse_err(&mpath, e.line() as u64, e.to_string()))?;
    if manifest.format != "hetgraph" || manifest.version != CONTAINER_VERSION {
        return Err(parse_err(&mpath, 1, format!("unsupported container {} v{}", manifest.format, manifest.version)));
    }
    let schema = manifest.schema;
    schema.validate()?;
    let mut tables = Vec::new();
    for def in &schema.node_types {
        let path: PathBuf = dir.join(node_file(&def.name));
        let mut header = vec!["id".to_string()];
        header.extend((0..def.feature_dim).map(|c| format!("f{c}")));
        header.extend(["label".to_string(), "split".to_string()]);
        let mut table = NodeTable::new(def.feature_dim);
        let mut row = vec![0.0; def.feature_dim];
        for (expect_id, (line, rec)) in read_csv(&path, &header)?.into_iter().enumerate() {
            let id: usize = field(&path, line, &rec[0], "id")?;
            if id != expect_id {
                return Err(parse_err(&path, line, format!("expected id {expect_id}, found {id}")));
            }
            for (c, x) in row.iter_mut().enumerate() {
                *x = field(&path, line, &rec[1 + c], "feature")?;
            }
            let raw_label = &rec[1 + def.feature_dim];
            let label = if raw_label.is_empty() { None } else { Some(field(&path, line, raw_label, "label")?) };
            let raw_split = &rec[2 + def.feature_dim];
            let split = if raw_split.is_empty() {
                None
            } else {
                Some(Split::parse(raw_split).ok_or_else(|| parse_err(&path, line, format!("invalid split `{raw_split}`")))?)
            };
            table.push(&row, label, split);
        }
        tables.push(table);
    }
    let mut edges = Vec::new();
    let header = vec!["src".to_string(), "dst".to_string()];
    for def in &schema.edge_types {
        let path = dir.join(edge_file(&def.name));
        let mut list = Vec::new();
        for (line, rec) in read_csv(&path, &header)? {
            list.push((field(&path, line, &rec[0], "src")?, field(&path, line, &rec[1], "dst")?));
        }
        edges.push(list);
    }
    build_graph(schema, tables, edges)
}

/// Counts and sizes written next to a saved graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub nodes: Vec<(String, usize)>,
    /// Logical (canonical) edges per type.
    pub edges: Vec<(String, usize)>,
    pub class_counts: Vec<usize>,
    pub train_class_counts: Vec<usize>,
    pub bytes: u64,
}

impl GraphStats {
    pub fn of(g: &HeteroGraph) -> Result<GraphStats> {
        let schema = g.schema();
        Ok(GraphStats {
            nodes: schema.node_types.iter().enumerate().map(|(t, d)| (d.name.clone(), g.num_nodes(t))).collect(),
            edges: schema.edge_types.iter().enumerate().map(|(et, d)| (d.name.clone(), g.num_canonical_edges(et))).collect(),
            class_counts: g.class_counts(None),
            train_class_counts: g.class_counts(Some(Split::Train)),
            bytes: serialized_size(g)?,
        })
    }

    pub fn total_edges(&self) -> usize {
        self.edges.iter().map(|(_, n)| n).sum()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_vec_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hetgraph::minority_ratio;

    fn small() -> SynthConfig {
        SynthConfig { n_users: 120, n_products: 15, seed: 3, ..Default::default() }
    }

    #[test]
    fn exact_minority_count_and_split_shape() {
        let g = generate(&SynthConfig::default()).unwrap();
        assert_eq!(g.class_counts(None), vec![900, 100]);
        assert_eq!(g.class_counts(Some(Split::Train)), vec![630, 70]);
        assert_eq!(g.class_counts(Some(Split::Val)), vec![180, 20]);
        assert_eq!(g.class_counts(Some(Split::Test)), vec![90, 10]);
        assert!((minority_ratio(&g, Some(Split::Train)).unwrap() - 70.0 / 630.0).abs() < 1e-15);
    }

    #[test]
    fn wiring_is_homophilous() {
        let g = generate(&SynthConfig::default()).unwrap();
        let (mut mm, mut inter) = (0usize, 0usize);
        for (s, d) in g.canonical_edges(0) {
            match (g.label(0, s), g.label(0, d)) {
                (Some(1), Some(1)) => mm += 1,
                (Some(a), Some(b)) if a != b => inter += 1,
                _ => {}
            }
        }
        // expected about 247 minority-minority and 180 inter edges
        assert!((180..320).contains(&mm), "{mm}");
        assert!((120..250).contains(&inter), "{inter}");
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(generate(&small()).unwrap(), generate(&small()).unwrap());
        assert_ne!(generate(&small()).unwrap(), generate(&SynthConfig { seed: 4, ..small() }).unwrap());
    }

    #[test]
    fn rejects_empty_class() {
        let cfg = SynthConfig { n_users: 4, fraud_fraction: 0.1, ..Default::default() };
        assert!(matches!(generate(&cfg), Err(Error::Config(_))));
        let cfg = SynthConfig { split: [0.5, 0.2, 0.2], ..Default::default() };
        assert!(generate(&cfg).is_err());
    }

    #[test]
    fn round_trip_and_size() {
        let dir = tempfile::tempdir().unwrap();
        let g = generate(&small()).unwrap();
        let bytes = save_graph(&g, dir.path()).unwrap();
        assert_eq!(bytes, serialized_size(&g).unwrap());
        let back = load_graph(dir.path()).unwrap();
        assert_eq!(back, g);
        for i in 0..g.num_nodes(0) {
            for (a, b) in g.feature_row(0, i).iter().zip(back.feature_row(0, i)) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn empty_edge_type_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let g = generate(&SynthConfig { p_product_product: 0.0, ..small() }).unwrap();
        save_graph(&g, dir.path()).unwrap();
        assert_eq!(fs::read_to_string(dir.path().join("edges_pp.csv")).unwrap(), "src,dst\n");
        assert_eq!(load_graph(dir.path()).unwrap().num_edges(2), 0);
    }

    #[test]
    fn truncated_row_names_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let g = generate(&small()).unwrap();
        save_graph(&g, dir.path()).unwrap();
        let path = dir.path().join("edges_up.csv");
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("7\n");
        let n_lines = text.lines().count();
        fs::write(&path, text).unwrap();
        match load_graph(dir.path()) {
            Err(Error::Parse { file, line, .. }) => {
                assert_eq!(file, path);
                assert_eq!(line, n_lines);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn size_grows_with_edges() {
        let sparse = generate(&SynthConfig { p_majority_majority: 0.005, ..small() }).unwrap();
        let dense = generate(&SynthConfig { p_majority_majority: 0.05, ..small() }).unwrap();
        assert_eq!(sparse.num_nodes(0), dense.num_nodes(0));
        assert!(serialized_size(&dense).unwrap() > serialized_size(&sparse).unwrap());
    }

    /// Plain logistic regression by full-batch gradient descent.
    fn logistic_auc(g: &HeteroGraph) -> f64 {
        let d = g.feature_dim(0);
        let train = g.labeled_nodes(Some(Split::Train));
        let test: Vec<usize> = g.labeled_nodes(Some(Split::Test)).into_iter().chain(g.labeled_nodes(Some(Split::Val))).collect();
        let mut w = vec![0.0; d + 1];
        for _ in 0..300 {
            let mut grad = vec![0.0; d + 1];
            for &i in &train {
                let x = g.feature_row(0, i);
                let z = w[d] + x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
                let err = 1.0 / (1.0 + (-z).exp()) - f64::from(g.label(0, i).unwrap());
                for c in 0..d {
                    grad[c] += err * x[c];
                }
                grad[d] += err;
            }
            for c in 0..=d {
                w[c] -= 0.5 * grad[c] / train.len() as f64;
            }
        }
        // pairwise AUC
        let score = |i: usize| g.feature_row(0, i).iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let pos: Vec<f64> = test.iter().filter(|&&i| g.label(0, i) == Some(1)).map(|&i| score(i)).collect();
        let neg: Vec<f64> = test.iter().filter(|&&i| g.label(0, i) == Some(0)).map(|&i| score(i)).collect();
        let mut wins = 0.0;
        for &p in &pos {
            for &q in &neg {
                wins += if p > q { 1.0 } else if p == q { 0.5 } else { 0.0 };
            }
        }
        wins / (pos.len() * neg.len()) as f64
    }

    #[test]
    fn feature_signal_oracles() {
        let base = SynthConfig { n_users: 2000, user_dim: 16, fraud_fraction: 0.2, ..Default::default() };
        let none = generate(&SynthConfig { mu: 0.0, ..base.clone() }).unwrap();
        let auc0 = logistic_auc(&none);
        assert!((auc0 - 0.5).abs() < 0.08, "{auc0}");
        let strong = generate(&SynthConfig { mu: 2.0, ..base }).unwrap();
        let auc2 = logistic_auc(&strong);
        assert!(auc2 > 0.9, "{auc2}");
    }
}
