#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relqa::corpus::EntityId;
use relqa::graph::RelationId;
use relqa::model::{Block, Gradients, ModelConfig, ModelParams};
use relqa::qagen::PassageRef;
use relqa::sampling::{BatchPassage, ReaderBatch, ReaderItem, RetrievalBatch};

pub const H: f64 = 1e-5;
pub const TOL: f64 = 1e-4;
pub const COORDS: usize = 50;

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// Dims of at least 50 so every block offers 50 coordinates; a larger
/// init keeps gradients well above finite-difference round-off.
pub fn check_config(relations: usize, seed: u64) -> ModelConfig {
    ModelConfig {
        vocab_buckets: 1024,
        embed_dim: 64,
        hidden_dim: 56,
        relations,
        init_scale: 0.5,
        seed,
    }
}

const WORDS: [&str; 24] = [
    "alpha", "beta", "gamma", "delta", "river", "city", "born", "team", "college", "party",
    "capital", "wife", "award", "league", "coach", "yacht", "of", "which", "the", "in", "<mask>",
    "?", "studied", "won",
];

pub fn tokens(rng: &mut ChaCha8Rng, len: usize) -> Vec<String> {
    (0..len).map(|_| WORDS.choose(rng).unwrap().to_string()).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn questions(rng: &mut ChaCha8Rng, n: usize, relations: usize) -> Vec<(Vec<String>, Option<RelationId>)> {
    (0..n)
        .map(|i| {
            let len = rng.gen_range(4..12);
            let r = (i % 3 != 2).then(|| RelationId(rng.gen_range(0..relations) as u32));
            (tokens(rng, len), r)
        })
        .collect()
}

fn passage(rng: &mut ChaCha8Rng, entity: u32, idx: usize) -> BatchPassage {
    let len = rng.gen_range(5..15);
    BatchPassage {
        origin: PassageRef {
            entity: EntityId(entity),
            passage: idx,
        },
        tokens: tokens(rng, len),
    }
}

/// Canonical layout: row i's positive at column i·(1+K).
pub fn retrieval_batch(rng: &mut ChaCha8Rng, b: usize, k: usize) -> RetrievalBatch {
    let mut batch = RetrievalBatch {
        entities: Vec::new(),
        datapoints: (0..b).collect(),
        questions: Vec::new(),
        passages: Vec::new(),
        positive_columns: Vec::new(),
        hard_negatives: k,
        fallbacks: 0,
    };
    for i in 0..b {
        let len = rng.gen_range(4..12);
        batch.questions.push(tokens(rng, len));
        batch.positive_columns.push(batch.passages.len());
        for j in 0..=k {
            batch.passages.push(passage(rng, i as u32, j));
        }
    }
    batch
}

pub fn reader_batch(rng: &mut ChaCha8Rng, n: usize, m: usize) -> ReaderBatch {
    let items = (0..n)
        .map(|i| {
            let passages: Vec<BatchPassage> = (0..=m).map(|j| passage(rng, i as u32, j)).collect();
            let len = passages[0].tokens.len();
            let s = rng.gen_range(0..len);
            let e = rng.gen_range(s..len);
            ReaderItem {
                datapoint: i,
                question: tokens(rng, 6),
                passages,
                answer_span: [s, e],
            }
        })
        .collect();
    ReaderBatch { items, fallbacks: 0 }
}

/// `|a − n| / max(|a|, |n|, 1e-6)`, the worst over 50 sampled coordinates
/// of `block` (embedding coordinates come from touched rows).
pub fn max_rel_error(
    params: &ModelParams<f64>,
    grads: &Gradients<f64>,
    block: Block,
    rng: &mut ChaCha8Rng,
    loss: &dyn Fn(&ModelParams<f64>) -> f64,
) -> (f64, usize) {
    let candidates: Vec<usize> = match block {
        Block::Embeddings => {
            let d = params.config.embed_dim;
            grads
                .touched_rows()
                .into_iter()
                .flat_map(|r| (0..d).map(move |c| r * d + c))
                .collect()
        }
        b => (0..params.block(b).len()).collect(),
    };
    let picks: Vec<usize> = candidates
        .choose_multiple(rng, COORDS.min(candidates.len()))
        .copied()
        .collect();
    let mut worst = 0.0f64;
    let mut p = params.clone();
    for &idx in &picks {
        let orig = p.block(block)[idx];
        p.block_mut(block)[idx] = orig + H;
        let up = loss(&p);
        p.block_mut(block)[idx] = orig - H;
        let down = loss(&p);
        p.block_mut(block)[idx] = orig;
        let numeric = (up - down) / (2.0 * H);
        let analytic = grads.get(block, idx);
        let denom = analytic.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic - numeric).abs() / denom);
    }
    (worst, picks.len())
}
