//! Adversarial training loop: threshold-controlled subgraph collection,
//! alternating generator and discriminator updates, history and checkpoints.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flashgan::{attach_full, drop_edges, AugmentedSubgraph, EdgeMask, FlashGan, FlashGanConfig, GeneratorPass};
use crate::flashgan::{DISCRIMINATOR_GROUP, GENERATOR_GROUP};
use crate::hetgraph::{HeteroGraph, OneHopSampler};
use crate::neural::{AdamConfig, AdamState, Checkpoint, Gradients, Tape, Tensor};
use crate::threshold::{ThresholdConfig, ThresholdState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Subgraphs collected per generator iteration.
    pub m: usize,
    pub epochs: u64,
    pub gen_period: u64,
    pub disc_period: u64,
    pub gen_iterations: usize,
    pub gen_adam: AdamConfig,
    pub disc_adam: AdamConfig,
    pub thresholds: ThresholdConfig,
    pub network: FlashGanConfig,
    /// Collection gives up after `stall_factor · m · failure_limit` failures.
    pub stall_factor: usize,
    /// Checkpoint period in epochs; 0 disables periodic checkpoints.
    pub checkpoint_every: u64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            m: 20,
            epochs: 150,
            gen_period: 1,
            disc_period: 12,
            gen_iterations: 1,
            gen_adam: AdamConfig::default(),
            disc_adam: AdamConfig::default(),
            thresholds: ThresholdConfig::default(),
            network: FlashGanConfig::default(),
            stall_factor: 10,
            checkpoint_every: 30,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.gen_period == 0 || self.disc_period == 0 || self.gen_iterations == 0 || self.stall_factor == 0 {
            return Err(Error::Config("m, periods, gen_iterations and stall_factor must be >= 1".into()));
        }
        self.network.validate()?;
        self.thresholds.validate()
    }
}

/// One row per completed epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u64,
    /// Mean generator loss over the epoch's last collected batch.
    pub loss_g: f64,
    /// Mean discriminator objective over the batch; NaN when undefined.
    pub loss_d: f64,
    pub g_updated: bool,
    pub d_updated: bool,
    pub eta: Vec<f64>,
    pub failures: usize,
    pub attempts: usize,
    pub retained_edges: usize,
    pub survivors: usize,
    pub checkpoint: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub edge_types: Vec<String>,
    pub rows: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss_g,loss_d,g_updated,d_updated");
        for n in &self.edge_types {
            let _ = write!(out, ",eta_{n}");
        }
        out.push_str(",failures,attempts,retained_edges,survivors,checkpoint\n");
        for r in &self.rows {
            let _ = write!(out, "{},{},{},{},{}", r.epoch, r.loss_g, r.loss_d, r.g_updated as u8, r.d_updated as u8);
            for e in &r.eta {
                let _ = write!(out, ",{e}");
            }
            let _ = writeln!(
                out,
                ",{},{},{},{},{}",
                r.failures,
                r.attempts,
                r.retained_edges,
                r.survivors,
                r.checkpoint.as_deref().unwrap_or("")
            );
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_csv().as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// A successfully augmented subgraph with its recorded generator pass.
pub struct Collected<'g, 'p> {
    pub aug: AugmentedSubgraph<'g>,
    pub mask: EdgeMask,
    pub tape: Tape<'p>,
    pub pass: GeneratorPass,
}

/// Outcome counters of one collection round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CollectionStats {
    pub attempts: usize,
    pub failures: usize,
}

/// Samples subgraphs until `m` of them retain at least one synthetic edge
/// under the current thresholds. `round_begin` runs once on entry and every
/// failure is reported to the controller.
#[allow(clippy::too_many_arguments)]
pub fn collect_subgraphs<'g, 'p>(
    g: &'g HeteroGraph,
    net: &'p FlashGan,
    sampler: &OneHopSampler,
    thresholds: &mut ThresholdState,
    m: usize,
    max_failures: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Collected<'g, 'p>>, CollectionStats)> {
    if m == 0 {
        return Err(Error::Contract("m must be >= 1".into()));
    }
    let k = net.config.synthetic_per_subgraph;
    thresholds.round_begin();
    let mut out = Vec::with_capacity(m);
    let mut stats = CollectionStats::default();
    while out.len() < m {
        stats.attempts += 1;
        let sub = sampler.sample(g, rng)?;
        let noise = net.sample_noise(rng, k);
        let aug = attach_full(sub, k)?;
        let mut tape = Tape::new(&net.params);
        let pass = net.generator_pass(&mut tape, &aug, &noise)?;
        let mask = drop_edges(&aug, &pass.keep_values(&tape), &thresholds.etas())?;
        if mask.is_success() {
            thresholds.record_success();
            out.push(Collected { aug, mask, tape, pass });
        } else {
            thresholds.record_failure();
            stats.failures += 1;
            if stats.failures > max_failures {
                return Err(Error::CollectionStall { attempts: stats.attempts, collected: out.len(), wanted: m });
            }
        }
    }
    Ok((out, stats))
}

/// Detached discriminator inputs of one collected subgraph.
#[derive(Clone, Debug)]
pub struct DiscriminatorBatch {
    pub real: Vec<Tensor>,
    pub fake: Vec<Tensor>,
}

impl DiscriminatorBatch {
    pub fn of(c: &Collected<'_, '_>) -> DiscriminatorBatch {
        let gamma = c.aug.real_minority_edges();
        let real = c
            .aug
            .candidates
            .iter()
            .zip(&gamma)
            .map(|(set, edges)| c.aug.embed_real_values(&c.tape, &c.pass.hidden, set, edges))
            .collect();
        let fake = c
            .mask
            .retained
            .iter()
            .enumerate()
            .map(|(r, kept)| {
                let all = c.tape.value(c.pass.edge_embed[r]);
                let mut data = Vec::with_capacity(kept.len() * all.cols);
                for &i in kept {
                    data.extend_from_slice(all.row(i));
                }
                Tensor::from_vec(kept.len(), all.cols, data)
            })
            .collect();
        DiscriminatorBatch { real, fake }
    }
}

/// Sum of per-subgraph discriminator objectives and its gradient; `None`
/// when every subgraph lacks real minority edges.
pub fn discriminator_objective(net: &FlashGan, batches: &[DiscriminatorBatch]) -> Result<Option<(f64, Gradients, usize)>> {
    let mut grads = Gradients::new(&net.params);
    let mut total = 0.0;
    let mut used = 0;
    for b in batches {
        let mut tape = Tape::new(&net.params);
        if let Some(l) = net.discriminator_loss(&mut tape, &b.real, &b.fake)? {
            total += tape.scalar(l);
            tape.backward_into(l, &mut grads)?;
            used += 1;
        }
    }
    Ok((used > 0).then_some((total, grads, used)))
}

/// Training state; advance with [`Trainer::train_epoch`].
pub struct Trainer<'g> {
    pub graph: &'g HeteroGraph,
    pub config: TrainConfig,
    pub net: FlashGan,
    pub gen_opt: AdamState,
    pub disc_opt: AdamState,
    pub thresholds: ThresholdState,
    pub sampler: OneHopSampler,
    pub epoch: u64,
    pub history: TrainHistory,
}

impl<'g> Trainer<'g> {
    pub fn new(graph: &'g HeteroGraph, config: TrainConfig) -> Result<Trainer<'g>> {
        config.validate()?;
        let net = FlashGan::new(graph.schema(), config.network.clone(), config.seed)?;
        let gen_opt = AdamState::new(config.gen_adam, &net.params, net.params.group_ids(GENERATOR_GROUP));
        let disc_opt = AdamState::new(config.disc_adam, &net.params, net.params.group_ids(DISCRIMINATOR_GROUP));
        let thresholds = ThresholdState::new(net.scored_names(), &config.thresholds)?;
        let classified = &graph.schema().node_types[graph.schema().classified_index()].name;
        let sampler = OneHopSampler::new(graph, classified)?;
        let history = TrainHistory { edge_types: net.scored_names(), rows: Vec::new() };
        Ok(Trainer { graph, config, net, gen_opt, disc_opt, thresholds, sampler, epoch: 0, history })
    }

    fn max_failures(&self) -> usize {
        self.config.stall_factor * self.config.m * self.thresholds.failure_limit() as usize
    }

    /// Runs one epoch (1-based numbering) and appends its history row.
    pub fn train_epoch(&mut self) -> Result<&EpochRecord> {
        let epoch = self.epoch + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(epoch);
        let g_due = epoch.is_multiple_of(self.config.gen_period);
        let d_due = epoch.is_multiple_of(self.config.disc_period);
        let max_failures = self.max_failures();
        let mut stats = CollectionStats::default();
        let mut loss_g = f64::NAN;
        let mut batches = Vec::new();
        let (mut retained, mut survivors) = (0, 0);
        let mut g_updated = false;
        for _ in 0..self.config.gen_iterations {
            let (collected, s) = collect_subgraphs(
                self.graph,
                &self.net,
                &self.sampler,
                &mut self.thresholds,
                self.config.m,
                max_failures,
                &mut rng,
            )?;
            stats.attempts += s.attempts;
            stats.failures += s.failures;
            let mut grads = Gradients::new(&self.net.params);
            let mut total = 0.0;
            batches.clear();
            retained = 0;
            survivors = 0;
            for mut c in collected {
                let loss = self
                    .net
                    .generator_loss(&mut c.tape, &c.pass, &c.mask)?
                    .ok_or_else(|| Error::Contract("collected subgraph without retained edges".into()))?;
                total += c.tape.scalar(loss);
                if g_due {
                    c.tape.backward_into(loss, &mut grads)?;
                }
                retained += c.mask.retained_count();
                survivors += c.mask.survivors.len();
                batches.push(DiscriminatorBatch::of(&c));
            }
            loss_g = total / self.config.m as f64;
            if g_due {
                self.gen_opt.step(&mut self.net.params, &grads)?;
                g_updated = true;
            }
        }
        let mut loss_d = f64::NAN;
        let mut d_updated = false;
        if let Some((total, mut grads, used)) = discriminator_objective(&self.net, &batches)? {
            loss_d = total / used as f64;
            if d_due {
                grads.scale(-1.0);
                self.disc_opt.step(&mut self.net.params, &grads)?;
                d_updated = true;
            }
        }
        self.epoch = epoch;
        self.history.rows.push(EpochRecord {
            epoch,
            loss_g,
            loss_d,
            g_updated,
            d_updated,
            eta: self.thresholds.etas(),
            failures: stats.failures,
            attempts: stats.attempts,
            retained_edges: retained,
            survivors,
            checkpoint: None,
        });
        Ok(self.history.rows.last().expect("row just pushed"))
    }

    fn meta(&self) -> serde_json::Value {
        serde_json::json!({
            "network": self.config.network,
            "schema": self.graph.schema(),
            "thresholds": self.thresholds,
            "seed": self.config.seed,
        })
    }

    pub fn generator_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            kind: GENERATOR_GROUP.into(),
            epoch: self.epoch,
            meta: self.meta(),
            tensors: self.net.params.export_group(GENERATOR_GROUP),
            adam: Some(self.gen_opt.snapshot(&self.net.params)),
        }
    }

    pub fn discriminator_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            kind: DISCRIMINATOR_GROUP.into(),
            epoch: self.epoch,
            meta: self.meta(),
            tensors: self.net.params.export_group(DISCRIMINATOR_GROUP),
            adam: Some(self.disc_opt.snapshot(&self.net.params)),
        }
    }
}

/// Final checkpoints plus the epoch log.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub generator: Checkpoint,
    pub discriminator: Checkpoint,
    pub history: TrainHistory,
}

pub fn train(g: &HeteroGraph, config: TrainConfig) -> Result<TrainOutcome> {
    train_with(g, config, |_, _, _| Ok(None))
}

/// Like [`train`], calling `on_checkpoint(epoch, generator, discriminator)`
/// every `checkpoint_every` epochs; the returned id is logged in history.
pub fn train_with<F>(g: &HeteroGraph, config: TrainConfig, mut on_checkpoint: F) -> Result<TrainOutcome>
where
    F: FnMut(u64, &Checkpoint, &Checkpoint) -> Result<Option<String>>,
{
    let epochs = config.epochs;
    let every = config.checkpoint_every;
    let mut t = Trainer::new(g, config)?;
    for _ in 0..epochs {
        t.train_epoch()?;
        if every > 0 && t.epoch % every == 0 {
            let id = on_checkpoint(t.epoch, &t.generator_checkpoint(), &t.discriminator_checkpoint())?;
            t.history.rows.last_mut().expect("epoch row").checkpoint = id;
        }
    }
    Ok(TrainOutcome { generator: t.generator_checkpoint(), discriminator: t.discriminator_checkpoint(), history: t.history })
}

/// Rebuilds the networks from a generator checkpoint (and optionally a
/// discriminator one), returning them with the saved threshold state.
pub fn restore(
    schema: &crate::hetgraph::Schema,
    generator: &Checkpoint,
    discriminator: Option<&Checkpoint>,
) -> Result<(FlashGan, ThresholdState)> {
    let cfg: FlashGanConfig = serde_json::from_value(generator.meta["network"].clone())
        .map_err(|e| Error::Checkpoint(format!("generator checkpoint lacks network config: {e}")))?;
    let thresholds: ThresholdState = serde_json::from_value(generator.meta["thresholds"].clone())
        .map_err(|e| Error::Checkpoint(format!("generator checkpoint lacks threshold state: {e}")))?;
    let mut net = FlashGan::new(schema, cfg, 0)?;
    net.params.import(&generator.tensors)?;
    if let Some(d) = discriminator {
        net.params.import(&d.tensors)?;
    }
    Ok((net, thresholds))
}
