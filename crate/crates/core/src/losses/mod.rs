//! Training objectives with analytic gradients:
//! relation prediction, self-distillation against a frozen teacher,
//! in-batch contrastive retrieval and reader rank + span.

mod train;

use crate::error::{Error, Result};
use crate::graph::RelationId;
use crate::model::{dot, Gradients, ModelParams, Scalar, Tower};
use crate::sampling::{ReaderBatch, RetrievalBatch};

pub use train::{
    holdout_split, pretrain, pretrain_from, relation_accuracy, reports_to_csv, LossReport, LrSchedule,
    NoObserver, Pretrained, TrainConfig, TrainObserver, METRICS_HEADER,
};

/// Overflow-safe log-softmax (max subtraction).
pub fn log_softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = m + logits
        .iter()
        .fold(T::zero(), |acc, &x| acc + (x - m).exp())
        .ln();
    logits.iter().map(|&x| x - lse).collect()
}

pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    log_softmax(logits).into_iter().map(T::exp).collect()
}

/// Weight on the distillation term, `1 − e^(−epoch)` with 0-based epochs.
pub fn ramp_weight(epoch: usize) -> f64 {
    1.0 - (-(epoch as f64)).exp()
}

/// A question fed to the relation head; `relation` is `None` when the
/// generating edge was unlabeled.
#[derive(Clone, Copy, Debug)]
pub struct Question<'a> {
    pub tokens: &'a [String],
    pub relation: Option<RelationId>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelationLoss<T> {
    pub value: T,
    pub labeled: usize,
    /// No labeled question was present; the loss contributes 0.
    pub empty: bool,
}

fn check_relation<T: Scalar>(p: &ModelParams<T>, r: RelationId) -> Result<usize> {
    if r.index() >= p.config.relations {
        return Err(Error::Contract(format!(
            "relation {r} outside head of size {}",
            p.config.relations
        )));
    }
    Ok(r.index())
}

/// Mean `−log P(r | q; θ)` over the labeled questions.
pub fn relation_loss<T: Scalar>(
    params: &ModelParams<T>,
    questions: &[Question<'_>],
    mut grads: Option<&mut Gradients<T>>,
) -> Result<RelationLoss<T>> {
    let labeled: Vec<(&[String], usize)> = questions
        .iter()
        .filter_map(|q| q.relation.map(|r| (q.tokens, r)))
        .map(|(t, r)| check_relation(params, r).map(|r| (t, r)))
        .collect::<Result<_>>()?;
    if labeled.is_empty() {
        return Ok(RelationLoss {
            value: T::zero(),
            labeled: 0,
            empty: true,
        });
    }
    let n = T::lit(labeled.len() as f64);
    let mut total = T::zero();
    for (tokens, r) in &labeled {
        let cache = params.encode(tokens, Tower::Question)?;
        let logp = log_softmax(&params.relation_logits_from(&cache));
        total -= logp[*r];
        if let Some(g) = grads.as_deref_mut() {
            let mut d: Vec<T> = logp.iter().map(|&l| l.exp() / n).collect();
            d[*r] -= T::one() / n;
            let dh = params.relation_backward(&cache, &d, g);
            params.encode_backward(&cache, None, Some(&dh), g);
        }
    }
    Ok(RelationLoss {
        value: total / n,
        labeled: labeled.len(),
        empty: false,
    })
}

/// Mean over questions of `Σ_r −log P(r|q;θ) · P(r|q;θ̂)`. The teacher is
/// only read; gradients reach the student alone.
pub fn distill_loss<T: Scalar>(
    student: &ModelParams<T>,
    teacher: &ModelParams<T>,
    questions: &[Question<'_>],
    mut grads: Option<&mut Gradients<T>>,
) -> Result<T> {
    if questions.is_empty() {
        return Ok(T::zero());
    }
    let n = T::lit(questions.len() as f64);
    let mut total = T::zero();
    for q in questions {
        let soft = softmax(&teacher.relation_logits(q.tokens)?);
        let cache = student.encode(q.tokens, Tower::Question)?;
        let logp = log_softmax(&student.relation_logits_from(&cache));
        total -= dot(&logp, &soft);
        if let Some(g) = grads.as_deref_mut() {
            // Σ soft = 1, so ∂/∂logits = p_student − p_teacher
            let d: Vec<T> = logp
                .iter()
                .zip(&soft)
                .map(|(&l, &t)| (l.exp() - t) / n)
                .collect();
            let dh = student.relation_backward(&cache, &d, g);
            student.encode_backward(&cache, None, Some(&dh), g);
        }
    }
    Ok(total / n)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DistillDomain {
    /// Every question in the batch, labeled or not.
    #[default]
    All,
    UnlabeledOnly,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CombinedRelationLoss<T> {
    pub l_rel: T,
    pub l_distill: T,
    pub weight: T,
    pub total: T,
    pub labeled_empty: bool,
}

/// `L_rel(labeled) + ramp_weight(epoch) · L_distill(domain)`.
pub fn combined_relation_loss<T: Scalar>(
    student: &ModelParams<T>,
    teacher: &ModelParams<T>,
    questions: &[Question<'_>],
    epoch: usize,
    domain: DistillDomain,
    mut grads: Option<&mut Gradients<T>>,
) -> Result<CombinedRelationLoss<T>> {
    let rel = relation_loss(student, questions, grads.as_deref_mut())?;
    let weight = T::lit(ramp_weight(epoch));
    let pool: Vec<Question<'_>> = match domain {
        DistillDomain::All => questions.to_vec(),
        DistillDomain::UnlabeledOnly => questions
            .iter()
            .copied()
            .filter(|q| q.relation.is_none())
            .collect(),
    };
    let l_distill = match grads {
        Some(g) if weight > T::zero() => {
            let mut dg = Gradients::zeros_like(student);
            let v = distill_loss(student, teacher, &pool, Some(&mut dg))?;
            g.add_scaled(weight, &dg);
            v
        }
        _ => distill_loss(student, teacher, &pool, None)?,
    };
    Ok(CombinedRelationLoss {
        l_rel: rel.value,
        l_distill,
        weight,
        total: rel.value + weight * l_distill,
        labeled_empty: rel.empty,
    })
}

/// `exp(s·sim(q, p⁺)) / Σ_{p∈C} exp(s·sim(q, p))` over normalised
/// embeddings; `s = 1` is the untempered form.
pub fn retrieval_probability<T: Scalar>(
    question: &[T],
    positive: usize,
    candidates: &[Vec<T>],
    sim_scale: T,
) -> Result<T> {
    if positive >= candidates.len() {
        return Err(Error::Contract("positive not among candidates".into()));
    }
    let logits: Vec<T> = candidates
        .iter()
        .map(|c| sim_scale * dot(question, c))
        .collect();
    Ok(log_softmax(&logits)[positive].exp())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RetrievalLoss<T> {
    pub value: T,
    /// Rows whose positive column has the strictly highest similarity.
    pub correct: usize,
    pub rows: usize,
    pub columns: usize,
}

/// `S = Q Pᵀ` over B questions and (1+K)·B passages; the loss is the mean
/// over rows of `−log softmax(S)[i, pos(i)]`.
pub fn retrieval_loss<T: Scalar>(
    params: &ModelParams<T>,
    batch: &RetrievalBatch,
    sim_scale: T,
    grads: Option<&mut Gradients<T>>,
) -> Result<RetrievalLoss<T>> {
    let rows = batch.rows();
    let cols = batch.passages.len();
    if rows == 0 {
        return Err(Error::EmptyInput("retrieval batch"));
    }
    if cols != rows * (1 + batch.hard_negatives)
        || batch.positive_columns.len() != rows
        || batch.positive_columns.iter().any(|&c| c >= cols)
    {
        return Err(Error::Dimension(format!(
            "{rows} questions, {cols} passages, K={}",
            batch.hard_negatives
        )));
    }
    let q: Vec<_> = batch
        .questions
        .iter()
        .map(|t| params.encode(t, Tower::Question))
        .collect::<Result<_>>()?;
    let p: Vec<_> = batch
        .passages
        .iter()
        .map(|bp| params.encode(&bp.tokens, Tower::Passage))
        .collect::<Result<_>>()?;

    let n = T::lit(rows as f64);
    let mut total = T::zero();
    let mut correct = 0;
    let mut d_rows: Vec<Vec<T>> = Vec::with_capacity(rows);
    for (i, qc) in q.iter().enumerate() {
        let pos = batch.positive_columns[i];
        let logits: Vec<T> = p
            .iter()
            .map(|pc| sim_scale * dot(&qc.output, &pc.output))
            .collect();
        let best = logits
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != pos)
            .map(|(_, &v)| v)
            .fold(T::neg_infinity(), T::max);
        if logits[pos] > best {
            correct += 1;
        }
        let logp = log_softmax(&logits);
        total -= logp[pos];
        let mut d: Vec<T> = logp.iter().map(|&l| sim_scale * l.exp() / n).collect();
        d[pos] -= sim_scale / n;
        d_rows.push(d);
    }

    if let Some(g) = grads {
        let dim = params.config.hidden_dim;
        let mut dp = vec![vec![T::zero(); dim]; cols];
        for (i, qc) in q.iter().enumerate() {
            let mut dq = vec![T::zero(); dim];
            for (j, pc) in p.iter().enumerate() {
                let s = d_rows[i][j];
                crate::model::axpy(&mut dq, s, &pc.output);
                crate::model::axpy(&mut dp[j], s, &qc.output);
            }
            params.encode_backward(qc, Some(&dq), None, g);
        }
        for (pc, d) in p.iter().zip(&dp) {
            params.encode_backward(pc, Some(d), None, g);
        }
    }
    Ok(RetrievalLoss {
        value: total / n,
        correct,
        rows,
        columns: cols,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReaderLoss<T> {
    pub rank: T,
    pub start: T,
    pub end: T,
    pub total: T,
}

/// Mean over datapoints of `−log P_rank(p⁺) − log P_start − log P_end`,
/// ranking over the 1+m passages and spanning over the positive's tokens.
pub fn reader_loss<T: Scalar>(
    params: &ModelParams<T>,
    batch: &ReaderBatch,
    mut grads: Option<&mut Gradients<T>>,
) -> Result<ReaderLoss<T>> {
    if batch.items.is_empty() {
        return Err(Error::EmptyInput("reader batch"));
    }
    let n = T::lit(batch.items.len() as f64);
    let (mut rank, mut start, mut end) = (T::zero(), T::zero(), T::zero());
    for item in &batch.items {
        let len = item.passages[0].tokens.len();
        let [s, e] = item.answer_span;
        if s > e || e >= len {
            return Err(Error::InvalidSpan { start: s, end: e, len });
        }
        let caches: Vec<_> = item
            .passages
            .iter()
            .map(|bp| params.reader_forward(&item.question, &bp.tokens))
            .collect::<Result<_>>()?;
        let rank_logp = log_softmax(&caches.iter().map(|c| c.rank).collect::<Vec<_>>());
        let start_logp = log_softmax(&caches[0].start);
        let end_logp = log_softmax(&caches[0].end);
        rank -= rank_logp[0];
        start -= start_logp[s];
        end -= end_logp[e];
        if let Some(g) = grads.as_deref_mut() {
            let grad_of = |logp: &[T], gold: usize| -> Vec<T> {
                let mut d: Vec<T> = logp.iter().map(|&l| l.exp() / n).collect();
                d[gold] -= T::one() / n;
                d
            };
            let d_rank = grad_of(&rank_logp, 0);
            let d_start = grad_of(&start_logp, s);
            let d_end = grad_of(&end_logp, e);
            params.reader_backward(&caches[0], d_rank[0], &d_start, &d_end, g);
            for (c, &dr) in caches.iter().zip(&d_rank).skip(1) {
                params.reader_backward(c, dr, &[], &[], g);
            }
        }
    }
    Ok(ReaderLoss {
        rank: rank / n,
        start: start / n,
        end: end / n,
        total: (rank + start + end) / n,
    })
}
