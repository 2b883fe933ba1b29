//! Hashed bag-of-words dual encoder, relation head and reader heads with
//! hand-written backward passes.
//!
//! Question/passage towers: mean of hashed token embeddings, a linear
//! projection, then L2 normalisation. The relation head reads the
//! projection before normalisation. The reader scores a passage from the
//! pooled concatenation of question and passage, and scores span
//! boundaries from each passage token's embedding conditioned additively
//! on the pooled question.

mod checkpoint;
mod matrix;
mod scalar;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint};
pub use matrix::Matrix;
pub use scalar::{axpy, dot, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub vocab_buckets: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub relations: usize,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            vocab_buckets: 1 << 15,
            embed_dim: 64,
            hidden_dim: 32,
            relations: 1,
            init_scale: 0.05,
            seed: 0,
        }
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Parameter blocks, addressable for finite-difference checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Block {
    Embeddings,
    QuestionProj,
    PassageProj,
    RelationHead,
    RankHead,
    StartHead,
    EndHead,
}

impl Block {
    pub const ALL: [Block; 7] = [
        Block::Embeddings,
        Block::QuestionProj,
        Block::PassageProj,
        Block::RelationHead,
        Block::RankHead,
        Block::StartHead,
        Block::EndHead,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tower {
    Question,
    Passage,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    pub config: ModelConfig,
    /// `vocab_buckets × embed_dim`
    pub embeddings: Matrix<T>,
    /// `embed_dim × hidden_dim`
    pub question_proj: Matrix<T>,
    /// `embed_dim × hidden_dim`
    pub passage_proj: Matrix<T>,
    /// `hidden_dim × relations`
    pub relation_head: Matrix<T>,
    /// `hidden_dim`
    pub rank_head: Vec<T>,
    /// `embed_dim`
    pub start_head: Vec<T>,
    /// `embed_dim`
    pub end_head: Vec<T>,
}

impl<T: Scalar> ModelParams<T> {
    /// Uniform(−init_scale, init_scale) from `config.seed`; identical seeds
    /// give bitwise-identical parameters.
    pub fn init(config: ModelConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let a = config.init_scale;
        let mut draw = |n: usize| -> Vec<T> {
            (0..n)
                .map(|_| {
                    if a > 0.0 {
                        T::lit(rng.gen_range(-a..a))
                    } else {
                        T::zero()
                    }
                })
                .collect()
        };
        let (v, e, d, r) = (
            config.vocab_buckets,
            config.embed_dim,
            config.hidden_dim,
            config.relations,
        );
        ModelParams {
            embeddings: Matrix::from_vec(v, e, draw(v * e)),
            question_proj: Matrix::from_vec(e, d, draw(e * d)),
            passage_proj: Matrix::from_vec(e, d, draw(e * d)),
            relation_head: Matrix::from_vec(d, r, draw(d * r)),
            rank_head: draw(d),
            start_head: draw(e),
            end_head: draw(e),
            config,
        }
    }

    pub fn zeros(config: ModelConfig) -> Self {
        ModelParams::init(ModelConfig {
            init_scale: 0.0,
            ..config
        })
    }

    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a(token.as_bytes()) % self.config.vocab_buckets as u64) as usize
    }

    pub fn buckets(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.bucket(t)).collect()
    }

    pub fn block(&self, block: Block) -> &[T] {
        match block {
            Block::Embeddings => self.embeddings.data(),
            Block::QuestionProj => self.question_proj.data(),
            Block::PassageProj => self.passage_proj.data(),
            Block::RelationHead => self.relation_head.data(),
            Block::RankHead => &self.rank_head,
            Block::StartHead => &self.start_head,
            Block::EndHead => &self.end_head,
        }
    }

    pub fn block_mut(&mut self, block: Block) -> &mut [T] {
        match block {
            Block::Embeddings => self.embeddings.data_mut(),
            Block::QuestionProj => self.question_proj.data_mut(),
            Block::PassageProj => self.passage_proj.data_mut(),
            Block::RelationHead => self.relation_head.data_mut(),
            Block::RankHead => &mut self.rank_head,
            Block::StartHead => &mut self.start_head,
            Block::EndHead => &mut self.end_head,
        }
    }

    pub fn is_finite(&self) -> bool {
        Block::ALL
            .iter()
            .all(|&b| self.block(b).iter().all(|v| v.is_finite()))
    }

    /// FNV-1a over every parameter's bit pattern, in block order.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in Block::ALL {
            for v in self.block(b) {
                for byte in v.bits().to_le_bytes() {
                    h ^= u64::from(byte);
                    h = h.wrapping_mul(0x0000_0100_0000_01b3);
                }
            }
        }
        h
    }

    /// Plain SGD step `θ ← θ − lr·g`.
    pub fn apply(&mut self, grads: &Gradients<T>, lr: T) {
        if lr == T::zero() {
            return;
        }
        for (&row, g) in &grads.embeddings {
            axpy(self.embeddings.row_mut(row), -lr, g);
        }
        for b in Block::ALL.into_iter().skip(1) {
            axpy(self.block_mut(b), -lr, grads.dense(b));
        }
    }

    fn projection(&self, tower: Tower) -> &Matrix<T> {
        match tower {
            Tower::Question => &self.question_proj,
            Tower::Passage => &self.passage_proj,
        }
    }

    fn pooled(&self, ids: &[usize]) -> Vec<T> {
        let mut x = vec![T::zero(); self.config.embed_dim];
        for &id in ids {
            axpy(&mut x, T::one(), self.embeddings.row(id));
        }
        let n = T::lit(ids.len() as f64);
        x.iter_mut().for_each(|v| *v /= n);
        x
    }

    /// Forward pass of one tower, keeping what the backward pass needs.
    pub fn encode(&self, tokens: &[String], tower: Tower) -> Result<EncoderCache<T>> {
        if tokens.is_empty() {
            return Err(Error::EmptyInput("encoder"));
        }
        let ids = self.buckets(tokens);
        let pooled = self.pooled(&ids);
        let hidden = self.projection(tower).t_mul_vec(&pooled);
        let norm = dot(&hidden, &hidden).sqrt();
        let output = if norm > T::zero() {
            hidden.iter().map(|&h| h / norm).collect()
        } else {
            vec![T::zero(); hidden.len()]
        };
        Ok(EncoderCache {
            ids,
            pooled,
            hidden,
            norm,
            output,
            tower,
        })
    }

    pub fn encode_question(&self, tokens: &[String]) -> Result<Vec<T>> {
        Ok(self.encode(tokens, Tower::Question)?.output)
    }

    pub fn encode_passage(&self, tokens: &[String]) -> Result<Vec<T>> {
        Ok(self.encode(tokens, Tower::Passage)?.output)
    }

    /// Backward through one tower. `d_output` is ∂L/∂(normalised output);
    /// `d_hidden` optionally adds ∂L/∂(pre-normalisation projection).
    pub fn encode_backward(
        &self,
        cache: &EncoderCache<T>,
        d_output: Option<&[T]>,
        d_hidden: Option<&[T]>,
        grads: &mut Gradients<T>,
    ) {
        let mut dh = vec![T::zero(); cache.hidden.len()];
        if let Some(dz) = d_output {
            if cache.norm > T::zero() {
                let zdz = dot(&cache.output, dz);
                for ((d, &z), &g) in dh.iter_mut().zip(&cache.output).zip(dz) {
                    *d += (g - z * zdz) / cache.norm;
                }
            }
        }
        if let Some(extra) = d_hidden {
            axpy(&mut dh, T::one(), extra);
        }
        let proj = match cache.tower {
            Tower::Question => &mut grads.question_proj,
            Tower::Passage => &mut grads.passage_proj,
        };
        proj.add_outer(T::one(), &cache.pooled, &dh);
        let d_pooled = self.projection(cache.tower).mul_vec(&dh);
        let inv_n = T::one() / T::lit(cache.ids.len() as f64);
        for &id in &cache.ids {
            grads.add_embedding(id, inv_n, &d_pooled);
        }
    }

    /// Relation logits `L_Rᵀ h` on the pre-normalisation question projection.
    pub fn relation_logits_from(&self, cache: &EncoderCache<T>) -> Vec<T> {
        self.relation_head.t_mul_vec(&cache.hidden)
    }

    pub fn relation_logits(&self, tokens: &[String]) -> Result<Vec<T>> {
        let cache = self.encode(tokens, Tower::Question)?;
        Ok(self.relation_logits_from(&cache))
    }

    /// Backward through the relation head; returns ∂L/∂h to feed into
    /// [`Self::encode_backward`].
    pub fn relation_backward(
        &self,
        cache: &EncoderCache<T>,
        d_logits: &[T],
        grads: &mut Gradients<T>,
    ) -> Vec<T> {
        grads
            .relation_head
            .add_outer(T::one(), &cache.hidden, d_logits);
        self.relation_head.mul_vec(d_logits)
    }

    pub fn reader_forward(&self, question: &[String], passage: &[String]) -> Result<ReaderCache<T>> {
        if question.is_empty() || passage.is_empty() {
            return Err(Error::EmptyInput("reader"));
        }
        let q_ids = self.buckets(question);
        let p_ids = self.buckets(passage);
        let joint_ids: Vec<usize> = q_ids.iter().chain(&p_ids).copied().collect();
        let joint_pooled = self.pooled(&joint_ids);
        let joint: Vec<T> = self
            .passage_proj
            .t_mul_vec(&joint_pooled)
            .into_iter()
            .map(|v| v.tanh())
            .collect();
        let rank = dot(&self.rank_head, &joint);
        let q_pooled = self.pooled(&q_ids);
        let mut features = Vec::with_capacity(p_ids.len());
        let mut start = Vec::with_capacity(p_ids.len());
        let mut end = Vec::with_capacity(p_ids.len());
        for &id in &p_ids {
            let f: Vec<T> = self
                .embeddings
                .row(id)
                .iter()
                .zip(&q_pooled)
                .map(|(&e, &q)| (e + q).tanh())
                .collect();
            start.push(dot(&self.start_head, &f));
            end.push(dot(&self.end_head, &f));
            features.push(f);
        }
        Ok(ReaderCache {
            q_ids,
            p_ids,
            joint_ids,
            joint_pooled,
            joint,
            features,
            rank,
            start,
            end,
        })
    }

    /// Rank logit plus per-token start and end logits.
    pub fn reader_scores(&self, question: &[String], passage: &[String]) -> Result<(T, Vec<T>, Vec<T>)> {
        let c = self.reader_forward(question, passage)?;
        Ok((c.rank, c.start, c.end))
    }

    /// Backward through the reader. `d_start`/`d_end` may be empty when the
    /// passage only contributes a rank term.
    pub fn reader_backward(
        &self,
        cache: &ReaderCache<T>,
        d_rank: T,
        d_start: &[T],
        d_end: &[T],
        grads: &mut Gradients<T>,
    ) {
        let e = self.config.embed_dim;
        if d_rank != T::zero() {
            axpy(&mut grads.rank_head, d_rank, &cache.joint);
            let d_pre: Vec<T> = cache
                .joint
                .iter()
                .zip(&self.rank_head)
                .map(|(&c, &w)| d_rank * w * (T::one() - c * c))
                .collect();
            grads
                .passage_proj
                .add_outer(T::one(), &cache.joint_pooled, &d_pre);
            let d_pooled = self.passage_proj.mul_vec(&d_pre);
            let inv_n = T::one() / T::lit(cache.joint_ids.len() as f64);
            for &id in &cache.joint_ids {
                grads.add_embedding(id, inv_n, &d_pooled);
            }
        }
        if d_start.is_empty() && d_end.is_empty() {
            return;
        }
        let mut d_q = vec![T::zero(); e];
        for (i, f) in cache.features.iter().enumerate() {
            let ds = d_start.get(i).copied().unwrap_or_else(T::zero);
            let de = d_end.get(i).copied().unwrap_or_else(T::zero);
            if ds == T::zero() && de == T::zero() {
                continue;
            }
            axpy(&mut grads.start_head, ds, f);
            axpy(&mut grads.end_head, de, f);
            let da: Vec<T> = (0..e)
                .map(|j| {
                    (ds * self.start_head[j] + de * self.end_head[j]) * (T::one() - f[j] * f[j])
                })
                .collect();
            grads.add_embedding(cache.p_ids[i], T::one(), &da);
            axpy(&mut d_q, T::one(), &da);
        }
        let inv_q = T::one() / T::lit(cache.q_ids.len() as f64);
        for &id in &cache.q_ids {
            grads.add_embedding(id, inv_q, &d_q);
        }
    }
}

#[derive(Clone, Debug)]
pub struct EncoderCache<T> {
    pub ids: Vec<usize>,
    pub pooled: Vec<T>,
    pub hidden: Vec<T>,
    pub norm: T,
    pub output: Vec<T>,
    pub tower: Tower,
}

#[derive(Clone, Debug)]
pub struct ReaderCache<T> {
    q_ids: Vec<usize>,
    p_ids: Vec<usize>,
    joint_ids: Vec<usize>,
    joint_pooled: Vec<T>,
    joint: Vec<T>,
    features: Vec<Vec<T>>,
    pub rank: T,
    pub start: Vec<T>,
    pub end: Vec<T>,
}

/// Gradient accumulator shaped like [`ModelParams`]; embedding rows are
/// sparse and kept in a `BTreeMap` so accumulation order is fixed.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub embeddings: BTreeMap<usize, Vec<T>>,
    pub question_proj: Matrix<T>,
    pub passage_proj: Matrix<T>,
    pub relation_head: Matrix<T>,
    pub rank_head: Vec<T>,
    pub start_head: Vec<T>,
    pub end_head: Vec<T>,
    embed_dim: usize,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(p: &ModelParams<T>) -> Self {
        let c = &p.config;
        Gradients {
            embeddings: BTreeMap::new(),
            question_proj: Matrix::zeros(c.embed_dim, c.hidden_dim),
            passage_proj: Matrix::zeros(c.embed_dim, c.hidden_dim),
            relation_head: Matrix::zeros(c.hidden_dim, c.relations),
            rank_head: vec![T::zero(); c.hidden_dim],
            start_head: vec![T::zero(); c.embed_dim],
            end_head: vec![T::zero(); c.embed_dim],
            embed_dim: c.embed_dim,
        }
    }

    pub fn add_embedding(&mut self, row: usize, scale: T, g: &[T]) {
        let e = self.embed_dim;
        let slot = self
            .embeddings
            .entry(row)
            .or_insert_with(|| vec![T::zero(); e]);
        axpy(slot, scale, g);
    }

    fn dense(&self, block: Block) -> &[T] {
        match block {
            Block::Embeddings => unreachable!("embedding gradients are sparse"),
            Block::QuestionProj => self.question_proj.data(),
            Block::PassageProj => self.passage_proj.data(),
            Block::RelationHead => self.relation_head.data(),
            Block::RankHead => &self.rank_head,
            Block::StartHead => &self.start_head,
            Block::EndHead => &self.end_head,
        }
    }

    fn dense_mut(&mut self, block: Block) -> &mut [T] {
        match block {
            Block::Embeddings => unreachable!("embedding gradients are sparse"),
            Block::QuestionProj => self.question_proj.data_mut(),
            Block::PassageProj => self.passage_proj.data_mut(),
            Block::RelationHead => self.relation_head.data_mut(),
            Block::RankHead => &mut self.rank_head,
            Block::StartHead => &mut self.start_head,
            Block::EndHead => &mut self.end_head,
        }
    }

    /// Gradient of one flat coordinate of `block`.
    pub fn get(&self, block: Block, index: usize) -> T {
        match block {
            Block::Embeddings => {
                let (row, col) = (index / self.embed_dim, index % self.embed_dim);
                self.embeddings.get(&row).map_or(T::zero(), |g| g[col])
            }
            b => self.dense(b)[index],
        }
    }

    /// `self += scale · other`
    pub fn add_scaled(&mut self, scale: T, other: &Gradients<T>) {
        for (&row, g) in &other.embeddings {
            self.add_embedding(row, scale, g);
        }
        for b in Block::ALL.into_iter().skip(1) {
            axpy(self.dense_mut(b), scale, other.dense(b));
        }
    }

    /// Embedding rows touched so far.
    pub fn touched_rows(&self) -> Vec<usize> {
        self.embeddings.keys().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn params(seed: u64) -> ModelParams<f64> {
        ModelParams::init(ModelConfig {
            vocab_buckets: 512,
            embed_dim: 8,
            hidden_dim: 6,
            relations: 5,
            seed,
            ..ModelConfig::default()
        })
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn outputs_are_unit_norm() {
        let p = params(1);
        for s in ["a", "the quick brown fox", "<mask> of edward heath which ?"] {
            for z in [p.encode_question(&toks(s)).unwrap(), p.encode_passage(&toks(s)).unwrap()] {
                assert!((dot(&z, &z).sqrt() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn deterministic_and_order_invariant() {
        let p = params(2);
        let a = p.encode_question(&toks("x y z w")).unwrap();
        assert_eq!(a, p.encode_question(&toks("x y z w")).unwrap());
        let b = p.encode_question(&toks("w z y x")).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-15);
        }
    }

    #[test]
    fn towers_differ() {
        let p = params(3);
        let t = toks("same input");
        assert_ne!(p.encode_question(&t).unwrap(), p.encode_passage(&t).unwrap());
    }

    #[test]
    fn empty_inputs_rejected() {
        let p = params(4);
        assert!(matches!(p.encode_question(&[]), Err(Error::EmptyInput(_))));
        assert!(p.reader_scores(&toks("q"), &[]).is_err());
    }

    #[test]
    fn init_reproducible_bitwise() {
        assert_eq!(params(7).fingerprint(), params(7).fingerprint());
        assert_ne!(params(7).fingerprint(), params(8).fingerprint());
    }

    #[test]
    fn zero_rank_head_ties_passages() {
        let mut p = params(5);
        p.rank_head.iter_mut().for_each(|v| *v = 0.0);
        let q = toks("who what");
        let (a, _, _) = p.reader_scores(&q, &toks("one passage here")).unwrap();
        let (b, _, _) = p.reader_scores(&q, &toks("totally different words")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_lr_leaves_params() {
        let mut p = params(6);
        let before = p.clone();
        let mut g = Gradients::zeros_like(&p);
        g.add_embedding(3, 1.0, &[1.0; 8]);
        g.rank_head[0] = 1.0;
        p.apply(&g, 0.0);
        assert_eq!(p, before);
    }

    #[test]
    fn generic_over_f32() {
        let p: ModelParams<f32> = ModelParams::init(ModelConfig {
            vocab_buckets: 64,
            embed_dim: 4,
            hidden_dim: 3,
            relations: 2,
            ..ModelConfig::default()
        });
        let z = p.encode_question(&toks("a b")).unwrap();
        assert!((dot(&z, &z).sqrt() - 1.0).abs() < 1e-5);
    }
}
