//! Pre-training loop: a retriever stream optimising L̂_rel + L_retr and an
//! independent reader stream optimising L_read, both plain SGD under a
//! linear warmup / linear decay schedule.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{combined_relation_loss, reader_loss, retrieval_loss, DistillDomain, Question};
use crate::error::{Error, Result};
use crate::graph::GroundedGraph;
use crate::model::{Checkpoint, Gradients, ModelConfig, ModelParams, Scalar};
use crate::qagen::QaDatapoint;
use crate::sampling::{assemble_reader_batch, assemble_retrieval_batch, DatapointPool, SamplingConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub warmup_fraction: f64,
    pub seed: u64,
    /// Retriever/reader batch pairs per epoch; 0 means ⌈|dataset| / B⌉.
    pub steps_per_epoch: usize,
    pub sim_scale: f64,
    pub distill_unlabeled_only: bool,
    pub vocab_buckets: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let m = ModelConfig::default();
        TrainConfig {
            epochs: 20,
            learning_rate: 0.1,
            warmup_fraction: 0.1,
            seed: 0,
            steps_per_epoch: 0,
            sim_scale: 1.0,
            distill_unlabeled_only: false,
            vocab_buckets: m.vocab_buckets,
            embed_dim: m.embed_dim,
            hidden_dim: m.hidden_dim,
            init_scale: m.init_scale,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return Err(Error::Config("warmup fraction must be in [0, 1]".into()));
        }
        Ok(())
    }

    fn model_config(&self, relations: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            vocab_buckets: self.vocab_buckets,
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            relations: relations.max(1),
            init_scale: self.init_scale,
            seed,
        }
    }
}

/// Linear warmup over the first `warmup` steps, then linear decay to 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrSchedule {
    pub base: f64,
    pub warmup: usize,
    pub total: usize,
}

impl LrSchedule {
    pub fn new(base: f64, warmup_fraction: f64, total: usize) -> Self {
        let warmup = ((warmup_fraction * total as f64).ceil() as usize).min(total);
        LrSchedule {
            base,
            warmup,
            total,
        }
    }

    pub fn at(&self, step: usize) -> f64 {
        if step < self.warmup {
            self.base * (step + 1) as f64 / self.warmup as f64
        } else {
            let span = (self.total - self.warmup).max(1) as f64;
            self.base * (self.total.saturating_sub(step)) as f64 / span
        }
    }
}

/// Per-batch losses of both streams.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossReport {
    pub epoch: usize,
    pub step: usize,
    pub l_rel: f64,
    pub l_distill: f64,
    pub weight: f64,
    pub l_rel_hat: f64,
    pub l_retr: f64,
    pub l_rank: f64,
    pub l_start: f64,
    pub l_end: f64,
    pub retr_correct: usize,
    pub retr_rows: usize,
    pub teacher_fingerprint: u64,
}

impl LossReport {
    pub fn l_read(&self) -> f64 {
        self.l_rank + self.l_start + self.l_end
    }

    fn is_finite(&self) -> bool {
        [
            self.l_rel,
            self.l_distill,
            self.l_rel_hat,
            self.l_retr,
            self.l_rank,
            self.l_start,
            self.l_end,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

pub const METRICS_HEADER: &str = "epoch,step,L_rel,L_distill,weight,L_retr,L_rank,L_start,L_end";

pub fn reports_to_csv(reports: &[LossReport]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.epoch, r.step, r.l_rel, r.l_distill, r.weight, r.l_retr, r.l_rank, r.l_start, r.l_end
        ));
    }
    out
}

/// Callbacks from [`pretrain`].
pub trait TrainObserver<T> {
    fn on_report(&mut self, _report: &LossReport) {}

    fn on_epoch_end(&mut self, _checkpoint: &Checkpoint<T>) -> Result<()> {
        Ok(())
    }
}

pub struct NoObserver;

impl<T> TrainObserver<T> for NoObserver {}

pub struct Pretrained<T> {
    pub retriever: ModelParams<T>,
    pub reader: ModelParams<T>,
    pub reports: Vec<LossReport>,
}

/// Deterministic held-out split: a seeded shuffle of the labeled
/// datapoints, `fraction` of which are set aside. Unlabeled datapoints
/// always stay in the training part.
pub fn holdout_split(
    datapoints: &[QaDatapoint],
    fraction: f64,
    seed: u64,
) -> (Vec<QaDatapoint>, Vec<QaDatapoint>) {
    let mut labeled: Vec<usize> = (0..datapoints.len())
        .filter(|&i| datapoints[i].relation.is_some())
        .collect();
    labeled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_hold = (labeled.len() as f64 * fraction).round() as usize;
    let mut held = vec![false; datapoints.len()];
    for &i in &labeled[..n_hold] {
        held[i] = true;
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (dp, h) in datapoints.iter().zip(held) {
        if h {
            test.push(dp.clone());
        } else {
            train.push(dp.clone());
        }
    }
    (train, test)
}

/// Share of labeled questions whose arg-max relation is correct.
pub fn relation_accuracy<T: Scalar>(params: &ModelParams<T>, datapoints: &[QaDatapoint]) -> Result<f64> {
    let mut hit = 0usize;
    let mut n = 0usize;
    for dp in datapoints {
        let Some(r) = dp.relation else { continue };
        let logits = params.relation_logits(&dp.question)?;
        let best = logits
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
            .0;
        n += 1;
        hit += usize::from(best == r.index());
    }
    Ok(if n == 0 { 0.0 } else { hit as f64 / n as f64 })
}

fn nan_dump(epoch: usize, step: usize, entities: &[u32], datapoints: &[usize]) -> Error {
    let dump = serde_json::json!({ "entities": entities, "datapoints": datapoints }).to_string();
    Error::NonFiniteLoss { epoch, step, dump }
}

/// Run pre-training. The teacher for self-distillation is a snapshot of the
/// retriever taken at the start of every epoch and never written to.
pub fn pretrain<T: Scalar>(
    graph: &GroundedGraph,
    datapoints: &[QaDatapoint],
    sampling: &SamplingConfig,
    config: &TrainConfig,
    observer: &mut dyn TrainObserver<T>,
) -> Result<Pretrained<T>> {
    pretrain_from(graph, datapoints, sampling, config, None, observer)
}

/// As [`pretrain`], starting from the parameters of `init` when given.
pub fn pretrain_from<T: Scalar>(
    graph: &GroundedGraph,
    datapoints: &[QaDatapoint],
    sampling: &SamplingConfig,
    config: &TrainConfig,
    init: Option<Checkpoint<T>>,
    observer: &mut dyn TrainObserver<T>,
) -> Result<Pretrained<T>> {
    config.validate()?;
    sampling.validate()?;
    if datapoints.is_empty() {
        return Err(Error::EmptyInput("pretrain dataset"));
    }
    let pool = DatapointPool::new(datapoints);
    let relations = graph.relations().len();
    let (mut retriever, mut reader) = match init {
        Some(ck) => {
            if ck.retriever.config.relations < relations.max(1) {
                return Err(Error::Dimension(format!(
                    "checkpoint has {} relations, graph has {relations}",
                    ck.retriever.config.relations
                )));
            }
            (ck.retriever, ck.reader)
        }
        None => (
            ModelParams::<T>::init(config.model_config(relations, config.seed)),
            ModelParams::<T>::init(config.model_config(relations, config.seed ^ 0x5EED_0F_AEAD)),
        ),
    };
    let mut retr_rng = ChaCha8Rng::seed_from_u64(config.seed);
    retr_rng.set_stream(1);
    let mut read_rng = ChaCha8Rng::seed_from_u64(config.seed);
    read_rng.set_stream(2);

    let steps = if config.steps_per_epoch > 0 {
        config.steps_per_epoch
    } else {
        datapoints.len().div_ceil(sampling.batch)
    };
    let schedule = LrSchedule::new(config.learning_rate, config.warmup_fraction, steps * config.epochs);
    let sim_scale = T::lit(config.sim_scale);
    let domain = if config.distill_unlabeled_only {
        DistillDomain::UnlabeledOnly
    } else {
        DistillDomain::All
    };

    let mut reports = Vec::with_capacity(steps * config.epochs);
    let mut global = 0usize;
    for epoch in 0..config.epochs {
        let teacher = retriever.clone();
        let teacher_fp = teacher.fingerprint();
        for step in 0..steps {
            let lr = T::lit(schedule.at(global));
            global += 1;

            let batch = assemble_retrieval_batch(&pool, graph, sampling, &mut retr_rng)?;
            let questions: Vec<Question<'_>> = batch
                .datapoints
                .iter()
                .map(|&i| Question {
                    tokens: &datapoints[i].question,
                    relation: datapoints[i].relation,
                })
                .collect();
            let mut g = Gradients::zeros_like(&retriever);
            let rel = combined_relation_loss(&retriever, &teacher, &questions, epoch, domain, Some(&mut g))?;
            let retr = retrieval_loss(&retriever, &batch, sim_scale, Some(&mut g))?;

            let rbatch = assemble_reader_batch(&pool, graph, sampling, &mut read_rng)?;
            let mut rg = Gradients::zeros_like(&reader);
            let read = reader_loss(&reader, &rbatch, Some(&mut rg))?;

            let report = LossReport {
                epoch,
                step,
                l_rel: rel.l_rel.as_f64(),
                l_distill: rel.l_distill.as_f64(),
                weight: rel.weight.as_f64(),
                l_rel_hat: rel.total.as_f64(),
                l_retr: retr.value.as_f64(),
                l_rank: read.rank.as_f64(),
                l_start: read.start.as_f64(),
                l_end: read.end.as_f64(),
                retr_correct: retr.correct,
                retr_rows: retr.rows,
                teacher_fingerprint: teacher_fp,
            };
            if !report.is_finite() {
                let ents: Vec<u32> = batch.entities.iter().map(|e| e.entity.0).collect();
                return Err(nan_dump(epoch, step, &ents, &batch.datapoints));
            }
            retriever.apply(&g, lr);
            reader.apply(&rg, lr);
            if !retriever.is_finite() || !reader.is_finite() {
                let ents: Vec<u32> = batch.entities.iter().map(|e| e.entity.0).collect();
                return Err(nan_dump(epoch, step, &ents, &batch.datapoints));
            }
            observer.on_report(&report);
            reports.push(report);
        }
        if teacher.fingerprint() != teacher_fp {
            return Err(Error::Contract("teacher snapshot changed within an epoch".into()));
        }
        log::info!(
            "epoch {epoch}: L_retr {:.4} L_rel {:.4}",
            reports.last().map_or(0.0, |r| r.l_retr),
            reports.last().map_or(0.0, |r| r.l_rel)
        );
        observer.on_epoch_end(&Checkpoint {
            epoch: (epoch + 1) as u32,
            retriever: retriever.clone(),
            reader: reader.clone(),
        })?;
    }
    Ok(Pretrained {
        retriever,
        reader,
        reports,
    })
}
