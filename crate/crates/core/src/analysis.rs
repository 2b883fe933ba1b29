//! Relation-bias analysis of a QA set against the grounded graph: pair
//! alignment, relation frequency tables and accuracy binned by training
//! frequency.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Read;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{AliasTable, EntityId};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::graph::{GroundedGraph, RelationId};
use crate::text;

/// A relation as seen from the question entity: either the stored
/// direction or its reverse (label suffixed `_r`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairRelation {
    pub relation: RelationId,
    pub reverse: bool,
}

impl PairRelation {
    pub fn label(&self, graph: &GroundedGraph) -> String {
        let base = graph.relation_label(self.relation);
        if self.reverse {
            format!("{base}_r")
        } else {
            base.to_string()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignedQa {
    pub question_id: String,
    pub entity: EntityId,
    pub answer: String,
    /// Sorted; empty when the pair could not be aligned.
    pub relations: Vec<PairRelation>,
}

impl AlignedQa {
    pub fn is_aligned(&self) -> bool {
        !self.relations.is_empty()
    }

    pub fn primary(&self) -> Option<PairRelation> {
        self.relations.first().copied()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Coverage {
    pub total: usize,
    pub aligned: usize,
    pub skipped_unknown_entity: usize,
    pub answer_not_entity: usize,
}

impl Coverage {
    pub fn ratio(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.aligned as f64 / self.total as f64
        }
    }

    pub fn to_kv(&self) -> String {
        format!(
            "total={}\naligned={}\nskipped_unknown_entity={}\nanswer_not_entity={}\ncoverage={}\n",
            self.total,
            self.aligned,
            self.skipped_unknown_entity,
            self.answer_not_entity,
            self.ratio()
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QaRow {
    pub question: String,
    pub entity_title: String,
    pub answer: String,
}

fn tsv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(false)
        .quoting(false)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(input)
}

/// Rows of `question<TAB>entity_title<TAB>answer`.
pub fn read_qa_tsv<R: Read>(input: R) -> Result<Vec<QaRow>> {
    let mut out = Vec::new();
    for (i, rec) in tsv_reader(input).records().enumerate() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(Error::Parse {
                line: rec.position().map_or(i + 1, |p| p.line() as usize),
                message: format!("expected 3 tab-separated fields, found {}", rec.len()),
            });
        }
        out.push(QaRow {
            question: rec[0].to_string(),
            entity_title: rec[1].to_string(),
            answer: rec[2].to_string(),
        });
    }
    Ok(out)
}

/// Rows of `question_id<TAB>em_flag` with flags 0 or 1.
pub fn read_predictions<R: Read>(input: R) -> Result<BTreeMap<String, bool>> {
    let mut out = BTreeMap::new();
    for (i, rec) in tsv_reader(input).records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        if rec.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 tab-separated fields, found {}", rec.len()),
            });
        }
        let flag = match rec[1].trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("EM flag must be 0 or 1, found {other:?}"),
                })
            }
        };
        out.insert(rec[0].trim().to_string(), flag);
    }
    Ok(out)
}

/// Alias form with a leading article removed.
pub fn answer_key(surface: &str) -> String {
    let form = text::alias_form(surface);
    let mut parts: Vec<&str> = form.split(' ').filter(|p| !p.is_empty()).collect();
    if parts.len() > 1 && matches!(parts[0], "the" | "a") {
        parts.remove(0);
    }
    parts.join(" ")
}

/// Exact lookup of answer strings among all alias forms.
pub struct AnswerIndex {
    by_key: HashMap<String, BTreeSet<EntityId>>,
}

impl AnswerIndex {
    pub fn new(aliases: &AliasTable) -> Self {
        let mut by_key: HashMap<String, BTreeSet<EntityId>> = HashMap::new();
        for (i, forms) in aliases.all_forms().iter().enumerate() {
            for f in forms {
                by_key.entry(answer_key(f)).or_default().insert(EntityId(i as u32));
            }
        }
        AnswerIndex { by_key }
    }

    pub fn lookup(&self, answer: &str) -> Option<&BTreeSet<EntityId>> {
        let key = answer_key(answer);
        if key.is_empty() {
            return None;
        }
        self.by_key.get(&key)
    }
}

/// Labeled relations between `entity` and `answer` in both directions.
pub fn pair_relations(graph: &GroundedGraph, entity: EntityId, answer: EntityId) -> Vec<PairRelation> {
    let mut out = BTreeSet::new();
    for e in graph.edges_between(entity, answer) {
        if let Some(r) = e.relation {
            out.insert(PairRelation { relation: r, reverse: false });
        }
    }
    for e in graph.edges_between(answer, entity) {
        if let Some(r) = e.relation {
            out.insert(PairRelation { relation: r, reverse: true });
        }
    }
    out.into_iter().collect()
}

/// Align every row to the graph. Question ids are 0-based row indices.
pub fn align_qa(rows: &[QaRow], graph: &GroundedGraph) -> (Vec<AlignedQa>, Coverage) {
    let index = AnswerIndex::new(graph.aliases());
    let corpus = graph.corpus();
    let results: Vec<Option<AlignedQa>> = rows
        .par_iter()
        .enumerate()
        .map(|(i, row)| {
            let entity = corpus.lookup(&row.entity_title)?;
            let mut relations = BTreeSet::new();
            if let Some(answers) = index.lookup(&row.answer) {
                for &a in answers {
                    if a != entity {
                        relations.extend(pair_relations(graph, entity, a));
                    }
                }
            }
            Some(AlignedQa {
                question_id: i.to_string(),
                entity,
                answer: row.answer.clone(),
                relations: relations.into_iter().collect(),
            })
        })
        .collect();

    let mut cov = Coverage {
        total: rows.len(),
        ..Coverage::default()
    };
    let mut out = Vec::with_capacity(rows.len());
    for r in results {
        match r {
            None => cov.skipped_unknown_entity += 1,
            Some(a) => {
                if a.is_aligned() {
                    cov.aligned += 1;
                } else if index.lookup(&a.answer).is_none() {
                    cov.answer_not_entity += 1;
                }
                out.push(a);
            }
        }
    }
    (out, cov)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RelationFrequencyTable {
    pub counts: BTreeMap<PairRelation, u64>,
}

impl RelationFrequencyTable {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn count(&self, r: PairRelation) -> u64 {
        self.counts.get(&r).copied().unwrap_or(0)
    }

    /// `(frequency, share of relations with count <= frequency)` at every
    /// distinct frequency value.
    pub fn cdf(&self) -> Vec<(u64, f64)> {
        let mut by_freq: BTreeMap<u64, usize> = BTreeMap::new();
        for &c in self.counts.values() {
            *by_freq.entry(c).or_default() += 1;
        }
        let n = self.counts.len() as f64;
        let mut acc = 0usize;
        by_freq
            .into_iter()
            .map(|(f, k)| {
                acc += k;
                (f, acc as f64 / n)
            })
            .collect()
    }

    /// Rows sorted by descending count, then relation order.
    pub fn rows(&self, graph: &GroundedGraph) -> Vec<(String, u64)> {
        let mut rows: Vec<(PairRelation, u64)> = self.counts.iter().map(|(&r, &c)| (r, c)).collect();
        rows.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        rows.into_iter().map(|(r, c)| (r.label(graph), c)).collect()
    }
}

/// Each aligned question counts once, under its lowest relation.
pub fn frequency_cdf(aligned: &[AlignedQa]) -> RelationFrequencyTable {
    let mut t = RelationFrequencyTable::default();
    for a in aligned {
        if let Some(r) = a.primary() {
            *t.counts.entry(r).or_default() += 1;
        }
    }
    t
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bin {
    pub low: u64,
    /// Exclusive; `None` is unbounded.
    pub high: Option<u64>,
}

impl Bin {
    pub const UNSEEN: Bin = Bin { low: 0, high: Some(1) };

    pub fn contains(&self, f: u64) -> bool {
        f >= self.low && self.high.map_or(true, |h| f < h)
    }
}

impl fmt::Display for Bin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.high {
            Some(h) => write!(f, "[{},{})", self.low, h),
            None => write!(f, "[{},inf)", self.low),
        }
    }
}

/// Bins from ascending edges; the last bin is unbounded.
pub fn bins_from_edges(edges: &[u64]) -> Result<Vec<Bin>> {
    if edges.is_empty() || edges[0] < 1 || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(
            "bin edges must be strictly increasing and start at >= 1".into(),
        ));
    }
    Ok(edges
        .iter()
        .enumerate()
        .map(|(i, &low)| Bin {
            low,
            high: edges.get(i + 1).copied(),
        })
        .collect())
}

pub const DEFAULT_BIN_EDGES: [u64; 4] = [1, 5, 20, 100];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub bucket_low: u64,
    /// Empty for the unbounded bucket.
    pub bucket_high: Option<u64>,
    pub n: usize,
    /// Empty when the bucket has no questions.
    pub em: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyReport {
    /// Unseen bucket first, then the configured bins.
    pub buckets: Vec<BucketRow>,
    pub overall_n: usize,
    pub overall_em: Option<f64>,
}

/// Mean EM per training-frequency bucket over aligned evaluation questions.
pub fn accuracy_by_frequency(
    eval: &[AlignedQa],
    flags: &BTreeMap<String, bool>,
    train: &RelationFrequencyTable,
    bins: &[Bin],
) -> Result<AccuracyReport> {
    let mut all = vec![Bin::UNSEEN];
    all.extend_from_slice(bins);
    let mut hits = vec![0usize; all.len()];
    let mut ns = vec![0usize; all.len()];
    let (mut total_n, mut total_hit) = (0usize, 0usize);
    for q in eval {
        let Some(r) = q.primary() else { continue };
        let flag = *flags.get(&q.question_id).ok_or_else(|| {
            Error::Contract(format!("no EM flag for question {}", q.question_id))
        })?;
        let f = train.count(r);
        let b = all
            .iter()
            .position(|b| b.contains(f))
            .ok_or_else(|| Error::Config(format!("frequency {f} falls outside every bin")))?;
        ns[b] += 1;
        hits[b] += usize::from(flag);
        total_n += 1;
        total_hit += usize::from(flag);
    }
    let mean = |h: usize, n: usize| (n > 0).then(|| h as f64 / n as f64);
    Ok(AccuracyReport {
        buckets: all
            .iter()
            .zip(ns.iter().zip(&hits))
            .map(|(b, (&n, &h))| BucketRow {
                bucket_low: b.low,
                bucket_high: b.high,
                n,
                em: mean(h, n),
            })
            .collect(),
        overall_n: total_n,
        overall_em: mean(total_hit, total_n),
    })
}

#[derive(Serialize, Deserialize)]
struct FrequencyCsvRow {
    relation: String,
    count: u64,
}

pub fn frequency_csv(rows: &[(String, u64)]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(["relation", "count"])?;
    for (relation, count) in rows {
        w.serialize(FrequencyCsvRow {
            relation: relation.clone(),
            count: *count,
        })?;
    }
    w.into_inner().map_err(|e| Error::RawIo(e.into_error()))
}

pub fn parse_frequency_csv<R: Read>(input: R) -> Result<Vec<(String, u64)>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize::<FrequencyCsvRow>()
        .map(|row| Ok(row.map(|x| (x.relation, x.count))?))
        .collect()
}

pub fn accuracy_csv(report: &AccuracyReport) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(["bucket_low", "bucket_high", "n", "em"])?;
    for row in &report.buckets {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| Error::RawIo(e.into_error()))
}

pub fn parse_accuracy_csv<R: Read>(input: R) -> Result<Vec<BucketRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| Ok(row?)).collect()
}

fn cdf_dat(cdf: &[(u64, f64)]) -> String {
    let mut s = String::from("# frequency cdf\n");
    for (f, p) in cdf {
        s.push_str(&format!("{f} {p}\n"));
    }
    s
}

fn accuracy_dat(report: &AccuracyReport) -> String {
    let mut s = String::from("# bucket_low em\n");
    for b in &report.buckets {
        if let Some(em) = b.em {
            s.push_str(&format!("{} {em}\n", b.bucket_low));
        }
    }
    s
}

pub struct AnalysisOutputs<'a> {
    pub coverage: Coverage,
    pub frequencies: &'a [(String, u64)],
    pub cdf: &'a [(u64, f64)],
    pub accuracy: Option<&'a AccuracyReport>,
}

pub const COVERAGE_FILE: &str = "coverage.txt";
pub const FREQUENCY_CSV: &str = "relation_frequency.csv";
pub const CDF_DAT: &str = "relation_frequency_cdf.dat";
pub const ACCURACY_CSV: &str = "accuracy_by_frequency.csv";
pub const ACCURACY_DAT: &str = "accuracy_by_frequency.dat";

/// Write all report files into `dir`; returns the paths written.
pub fn emit_report(out: &AnalysisOutputs<'_>, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut files: Vec<(&str, Vec<u8>)> = vec![
        (COVERAGE_FILE, out.coverage.to_kv().into_bytes()),
        (FREQUENCY_CSV, frequency_csv(out.frequencies)?),
        (CDF_DAT, cdf_dat(out.cdf).into_bytes()),
    ];
    if let Some(acc) = out.accuracy {
        if let Some(em) = acc.overall_em {
            log::info!("overall EM {em:.4} over {} aligned questions", acc.overall_n);
        }
        files.push((ACCURACY_CSV, accuracy_csv(acc)?));
        files.push((ACCURACY_DAT, accuracy_dat(acc).into_bytes()));
    }
    let mut written = Vec::new();
    for (name, bytes) in files {
        let p = dir.join(name);
        fsutil::write_atomic(&p, &bytes)?;
        written.push(p);
    }
    Ok(written)
}
