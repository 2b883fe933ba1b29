//! Two-level negative sampling: entities by random walk over the grounded
//! graph, then hard negative passages from each entity's own page.

use std::collections::{BTreeMap, HashSet};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::EntityId;
use crate::error::{Error, Result};
use crate::graph::GroundedGraph;
use crate::qagen::{mask_entity, PassageRef, QaDatapoint};

/// Restarts allowed per seed walk before it is abandoned.
pub const MAX_RESTARTS: usize = 10;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    /// Seed entities per retrieval batch.
    pub b: usize,
    /// Entities (rows) per retrieval batch.
    #[serde(rename = "B")]
    pub batch: usize,
    /// Hard negatives per retrieval row.
    #[serde(rename = "K")]
    pub hard_negatives: usize,
    /// Negatives per reader datapoint.
    pub m: usize,
    pub reader_batch: usize,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            b: 12,
            batch: 128,
            hard_negatives: 2,
            m: 2,
            reader_batch: 64,
            seed: 0,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.b < 1 || self.b > self.batch {
            return Err(Error::Config(format!(
                "need 1 <= b <= B, got b={} B={}",
                self.b, self.batch
            )));
        }
        if self.hard_negatives < 1 || self.m < 1 || self.reader_batch < 1 {
            return Err(Error::Config("K, m and reader_batch must be >= 1".into()));
        }
        Ok(())
    }

    /// Passage columns per retrieval batch, (1+K)·B.
    pub fn columns(&self) -> usize {
        (1 + self.hard_negatives) * self.batch
    }
}

/// Datapoints grouped by source entity.
#[derive(Clone, Debug)]
pub struct DatapointPool<'a> {
    datapoints: &'a [QaDatapoint],
    by_source: BTreeMap<EntityId, Vec<usize>>,
    eligible: Vec<EntityId>,
}

impl<'a> DatapointPool<'a> {
    pub fn new(datapoints: &'a [QaDatapoint]) -> Self {
        let mut by_source: BTreeMap<EntityId, Vec<usize>> = BTreeMap::new();
        for (i, dp) in datapoints.iter().enumerate() {
            by_source.entry(dp.source).or_default().push(i);
        }
        let eligible = by_source.keys().copied().collect();
        DatapointPool {
            datapoints,
            by_source,
            eligible,
        }
    }

    pub fn datapoints(&self) -> &'a [QaDatapoint] {
        self.datapoints
    }

    /// Entities with at least one datapoint as source, ascending.
    pub fn eligible(&self) -> &[EntityId] {
        &self.eligible
    }

    pub fn for_source(&self, e: EntityId) -> &[usize] {
        self.by_source.get(&e).map_or(&[], Vec::as_slice)
    }

    pub fn is_eligible(&self, e: EntityId) -> bool {
        self.by_source.contains_key(&e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Seed,
    Walk,
    Fill,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampledEntity {
    pub entity: EntityId,
    pub origin: Origin,
}

/// Exactly `config.batch` distinct eligible entities.
///
/// `b` seeds are drawn uniformly. From each seed a self-avoiding walk over
/// the undirected closure steps to a uniformly chosen unvisited neighbour,
/// collecting eligible entities until it has gathered ⌈B/b⌉; on a dead end
/// it restarts at the seed, at most [`MAX_RESTARTS`] times. Any shortfall
/// is filled uniformly without replacement.
pub fn random_walk_entities<R: Rng>(
    graph: &GroundedGraph,
    pool: &DatapointPool<'_>,
    config: &SamplingConfig,
    rng: &mut R,
) -> Result<Vec<SampledEntity>> {
    config.validate()?;
    let eligible = pool.eligible();
    let want = config.batch;
    if eligible.len() < want {
        return Err(Error::InsufficientEntities {
            needed: want,
            available: eligible.len(),
        });
    }
    let quota = want.div_ceil(config.b);
    let mut out: Vec<SampledEntity> = Vec::with_capacity(want);
    let mut taken: HashSet<EntityId> = HashSet::with_capacity(want);

    let seeds: Vec<EntityId> = index::sample(rng, eligible.len(), config.b)
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    for seed in seeds {
        if out.len() == want {
            break;
        }
        let mut gathered = 0;
        if taken.insert(seed) {
            out.push(SampledEntity {
                entity: seed,
                origin: Origin::Seed,
            });
            gathered = 1;
        }
        let mut visited: HashSet<EntityId> = HashSet::from([seed]);
        let mut current = seed;
        let mut restarts = 0;
        while gathered < quota && out.len() < want {
            let open: Vec<EntityId> = graph
                .neighbours(current)
                .iter()
                .copied()
                .filter(|n| !visited.contains(n))
                .collect();
            if open.is_empty() {
                if restarts == MAX_RESTARTS || current == seed {
                    break;
                }
                restarts += 1;
                current = seed;
                continue;
            }
            let next = open[rng.gen_range(0..open.len())];
            visited.insert(next);
            current = next;
            if pool.is_eligible(next) && taken.insert(next) {
                out.push(SampledEntity {
                    entity: next,
                    origin: Origin::Walk,
                });
                gathered += 1;
            }
        }
    }

    if out.len() < want {
        let rest: Vec<EntityId> = eligible
            .iter()
            .copied()
            .filter(|e| !taken.contains(e))
            .collect();
        for i in index::sample(rng, rest.len(), want - out.len()) {
            out.push(SampledEntity {
                entity: rest[i],
                origin: Origin::Fill,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NegativeSample {
    pub passages: Vec<PassageRef>,
    /// Whether neighbour pages had to make up for a short page.
    pub fallback: bool,
}

/// `k` passages from the entity's page other than the positive, without
/// replacement. A page with fewer than `k + 1` passages contributes all its
/// other passages and the rest come from neighbour pages.
pub fn sample_negative_passages<R: Rng>(
    entity: EntityId,
    positive: usize,
    k: usize,
    rng: &mut R,
    graph: &GroundedGraph,
) -> Result<NegativeSample> {
    let corpus = graph.corpus();
    let own: Vec<usize> = (0..corpus.page(entity).passage_count())
        .filter(|&p| p != positive)
        .collect();
    if own.len() >= k {
        let mut picked: Vec<usize> = index::sample(rng, own.len(), k)
            .into_iter()
            .map(|i| own[i])
            .collect();
        picked.sort_unstable();
        return Ok(NegativeSample {
            passages: picked
                .into_iter()
                .map(|passage| PassageRef { entity, passage })
                .collect(),
            fallback: false,
        });
    }
    let need = k - own.len();
    let borrowed: Vec<PassageRef> = graph
        .neighbours(entity)
        .iter()
        .flat_map(|&n| {
            (0..corpus.page(n).passage_count()).map(move |passage| PassageRef {
                entity: n,
                passage,
            })
        })
        .collect();
    if borrowed.len() < need {
        return Err(Error::InsufficientPassages {
            entity: entity.0,
            needed: k + 1,
            available: own.len() + 1 + borrowed.len(),
        });
    }
    let mut passages: Vec<PassageRef> = own
        .into_iter()
        .map(|passage| PassageRef { entity, passage })
        .collect();
    passages.extend(
        index::sample(rng, borrowed.len(), need)
            .into_iter()
            .map(|i| borrowed[i]),
    );
    Ok(NegativeSample {
        passages,
        fallback: true,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchPassage {
    #[serde(flatten)]
    pub origin: PassageRef,
    pub tokens: Vec<String>,
}

/// B questions against (1+K)·B source-masked passages. Row `i`'s positive
/// sits at column `i·(1+K)`, followed by its K negatives.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalBatch {
    pub entities: Vec<SampledEntity>,
    pub datapoints: Vec<usize>,
    pub questions: Vec<Vec<String>>,
    pub passages: Vec<BatchPassage>,
    pub positive_columns: Vec<usize>,
    pub hard_negatives: usize,
    pub fallbacks: usize,
}

impl RetrievalBatch {
    pub fn rows(&self) -> usize {
        self.questions.len()
    }

    /// Negative columns of row `i`.
    pub fn negative_columns(&self, i: usize) -> std::ops::Range<usize> {
        let start = self.positive_columns[i] + 1;
        start..start + self.hard_negatives
    }
}

fn pick<R: Rng>(items: &[usize], rng: &mut R) -> usize {
    items[rng.gen_range(0..items.len())]
}

pub fn assemble_retrieval_batch<R: Rng>(
    pool: &DatapointPool<'_>,
    graph: &GroundedGraph,
    config: &SamplingConfig,
    rng: &mut R,
) -> Result<RetrievalBatch> {
    let entities = random_walk_entities(graph, pool, config, rng)?;
    let k = config.hard_negatives;
    let corpus = graph.corpus();
    let mut batch = RetrievalBatch {
        entities: entities.clone(),
        datapoints: Vec::with_capacity(entities.len()),
        questions: Vec::with_capacity(entities.len()),
        passages: Vec::with_capacity(entities.len() * (1 + k)),
        positive_columns: Vec::with_capacity(entities.len()),
        hard_negatives: k,
        fallbacks: 0,
    };
    for sampled in &entities {
        let di = pick(pool.for_source(sampled.entity), rng);
        let dp = &pool.datapoints()[di];
        let negs = sample_negative_passages(dp.source, dp.positive.passage, k, rng, graph)?;
        batch.fallbacks += usize::from(negs.fallback);
        batch.datapoints.push(di);
        batch.questions.push(dp.question.clone());
        batch.positive_columns.push(batch.passages.len());
        batch.passages.push(BatchPassage {
            origin: dp.positive,
            tokens: dp.masked_positive.clone(),
        });
        for r in negs.passages {
            let raw = corpus
                .passage(r.entity, r.passage)
                .expect("sampled passage exists")
                .lower_tokens();
            batch.passages.push(BatchPassage {
                origin: r,
                tokens: mask_entity(&raw, dp.source, graph.aliases()),
            });
        }
    }
    Ok(batch)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReaderItem {
    pub datapoint: usize,
    pub question: Vec<String>,
    /// Index 0 is the positive; passages are unmasked.
    pub passages: Vec<BatchPassage>,
    pub answer_span: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReaderBatch {
    pub items: Vec<ReaderItem>,
    pub fallbacks: usize,
}

/// `reader_batch` distinct source entities, one datapoint each, with `m`
/// same-page negatives per datapoint.
pub fn assemble_reader_batch<R: Rng>(
    pool: &DatapointPool<'_>,
    graph: &GroundedGraph,
    config: &SamplingConfig,
    rng: &mut R,
) -> Result<ReaderBatch> {
    config.validate()?;
    let eligible = pool.eligible();
    if eligible.len() < config.reader_batch {
        return Err(Error::InsufficientEntities {
            needed: config.reader_batch,
            available: eligible.len(),
        });
    }
    let corpus = graph.corpus();
    let text = |r: PassageRef| {
        corpus
            .passage(r.entity, r.passage)
            .expect("passage exists")
            .lower_tokens()
    };
    let mut batch = ReaderBatch {
        items: Vec::with_capacity(config.reader_batch),
        fallbacks: 0,
    };
    for i in index::sample(rng, eligible.len(), config.reader_batch) {
        let di = pick(pool.for_source(eligible[i]), rng);
        let dp = &pool.datapoints()[di];
        let negs = sample_negative_passages(dp.source, dp.positive.passage, config.m, rng, graph)?;
        batch.fallbacks += usize::from(negs.fallback);
        let mut passages = vec![BatchPassage {
            origin: dp.positive,
            tokens: text(dp.positive),
        }];
        passages.extend(negs.passages.into_iter().map(|r| BatchPassage {
            origin: r,
            tokens: text(r),
        }));
        batch.items.push(ReaderItem {
            datapoint: di,
            question: dp.question.clone(),
            passages,
            answer_span: dp.answer_span,
        });
    }
    Ok(batch)
}
