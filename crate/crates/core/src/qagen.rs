//! Relational QA datapoints from mutual pairs.
//!
//! Question template: `<mask> of [title(s)] which [desc.(t,s)] ?`, with
//! every alias of the target then masked out. The positive passage is
//! desc.(s,t); its retrieval view has the source masked.

use std::io::BufRead;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{AliasTable, EntityId};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::graph::{mutual_pairs, GroundedGraph, RelationId};
use crate::text::{self, MASK};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PassageRef {
    pub entity: EntityId,
    pub passage: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaDatapoint {
    pub source: EntityId,
    /// `None` for unlabeled (hyperlink-only) edges.
    pub relation: Option<RelationId>,
    pub target: EntityId,
    pub question: Vec<String>,
    pub positive: PassageRef,
    /// Inclusive token offsets of the answer in the unmasked positive.
    pub answer_span: [usize; 2],
    pub masked_positive: Vec<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GenOptions {
    /// One datapoint per grounded description instead of the first only.
    pub all_descriptions: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dataset {
    pub datapoints: Vec<QaDatapoint>,
    pub mutual_pairs: usize,
    /// Pairs skipped because source and target share a surface form.
    pub skipped_overlap: usize,
}

fn keys_of(tokens: &[String]) -> Vec<String> {
    tokens.iter().map(|t| text::match_key(t)).collect()
}

/// Replace every greedy longest-alias occurrence of `entity` token-for-token
/// with the mask literal. Length is preserved.
pub fn mask_entity(tokens: &[String], entity: EntityId, aliases: &AliasTable) -> Vec<String> {
    let mut out = tokens.to_vec();
    for span in aliases.find(&keys_of(tokens), entity) {
        for tok in &mut out[span] {
            *tok = MASK.to_string();
        }
    }
    out
}

/// Raw (unmasked) question tokens for the ordered pair (s, t).
pub fn generate_question(
    source: EntityId,
    target: EntityId,
    graph: &GroundedGraph,
) -> Result<Vec<String>> {
    if !graph.is_mutual(source, target) {
        return Err(Error::Contract(format!(
            "pair ({source}, {target}) is not mutual"
        )));
    }
    let reverse = &graph.edges_between(target, source)[0];
    let desc = graph
        .corpus()
        .passage(target, reverse.descriptions[0])
        .ok_or_else(|| Error::Contract("reverse description out of range".into()))?;
    let mut q = vec![MASK.to_string(), "of".to_string()];
    q.extend(
        graph
            .corpus()
            .title(source)
            .split_whitespace()
            .map(text::lower),
    );
    q.push("which".to_string());
    q.extend(desc.lower_tokens());
    q.push("?".to_string());
    Ok(q)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BuildOutcome {
    Built(Vec<QaDatapoint>),
    SkippedOverlap,
}

/// Datapoints for one mutual pair; one per description of the s→t edge
/// when `all_descriptions` is set.
pub fn build_datapoint(
    source: EntityId,
    target: EntityId,
    graph: &GroundedGraph,
    opts: GenOptions,
) -> Result<BuildOutcome> {
    let aliases = graph.aliases();
    if aliases.overlaps(source, target) {
        return Ok(BuildOutcome::SkippedOverlap);
    }
    let raw = generate_question(source, target, graph)?;
    let question = mask_entity(&raw, target, aliases);
    let edge = &graph.edges_between(source, target)[0];
    let take = if opts.all_descriptions {
        edge.descriptions.len()
    } else {
        1
    };
    let mut out = Vec::with_capacity(take);
    for &pidx in &edge.descriptions[..take] {
        let passage = graph
            .corpus()
            .passage(source, pidx)
            .ok_or_else(|| Error::Contract("description out of range".into()))?;
        let tokens = passage.lower_tokens();
        let span = aliases.first_match(&passage.keys(), target).ok_or_else(|| {
            Error::Contract(format!(
                "grounded passage {pidx} of entity {source} lacks target {target}"
            ))
        })?;
        out.push(QaDatapoint {
            source,
            relation: edge.relation,
            target,
            question: question.clone(),
            positive: PassageRef {
                entity: source,
                passage: pidx,
            },
            answer_span: [span.start, span.end - 1],
            masked_positive: mask_entity(&tokens, source, aliases),
        });
    }
    Ok(BuildOutcome::Built(out))
}

/// Generate the dataset over every mutual pair, ordered by (source, target).
pub fn generate_dataset(graph: &GroundedGraph, opts: GenOptions) -> Result<Dataset> {
    let pairs = mutual_pairs(graph);
    let outcomes: Vec<BuildOutcome> = pairs
        .par_iter()
        .map(|&(s, t)| build_datapoint(s, t, graph, opts))
        .collect::<Result<_>>()?;
    let mut ds = Dataset {
        mutual_pairs: pairs.len(),
        ..Dataset::default()
    };
    for o in outcomes {
        match o {
            BuildOutcome::Built(dps) => ds.datapoints.extend(dps),
            BuildOutcome::SkippedOverlap => ds.skipped_overlap += 1,
        }
    }
    Ok(ds)
}

pub fn to_jsonl(datapoints: &[QaDatapoint]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for dp in datapoints {
        serde_json::to_writer(&mut out, dp)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn from_jsonl<R: BufRead>(input: R) -> Result<Vec<QaDatapoint>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let dp = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(dp);
    }
    Ok(out)
}

pub fn export_dataset(datapoints: &[QaDatapoint], path: &Path) -> Result<()> {
    fsutil::write_atomic(path, &to_jsonl(datapoints)?)
}

pub fn import_dataset(path: &Path) -> Result<Vec<QaDatapoint>> {
    from_jsonl(fsutil::open(path)?)
}
