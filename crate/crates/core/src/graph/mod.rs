//! Grounded relational graph: labeled triplets aligned with hyperlinks,
//! every edge carrying the passages of the source page that describe it.

mod io;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::BufRead;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{AliasMatcher, AliasTable, Corpus, EntityId, Hyperlink};
use crate::error::{Error, Result};

pub use io::{load_graph, save_graph, GRAPH_MAGIC, GRAPH_VERSION};

#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct RelationId(pub u32);

impl RelationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triplet {
    pub source: EntityId,
    pub relation: RelationId,
    pub target: EntityId,
}

/// Labeled triplets resolved against a corpus.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TripletSet {
    pub triplets: Vec<Triplet>,
    /// Relation vocabulary in first-seen order over kept rows.
    pub relations: Vec<String>,
    pub dropped_missing: usize,
    pub dropped_self: usize,
    pub duplicates: usize,
}

/// Read `source<TAB>relation<TAB>target` rows. Blank lines are ignored.
pub fn load_triplets<R: BufRead>(input: R, corpus: &Corpus) -> Result<TripletSet> {
    let mut set = TripletSet::default();
    let mut vocab: HashMap<String, RelationId> = HashMap::new();
    let mut seen = BTreeSet::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::TripletFormat {
                row: i + 1,
                found: fields.len(),
            });
        }
        let (Some(source), Some(target)) = (corpus.lookup(fields[0]), corpus.lookup(fields[2]))
        else {
            set.dropped_missing += 1;
            continue;
        };
        if source == target {
            set.dropped_self += 1;
            continue;
        }
        let label = fields[1].trim().to_string();
        let relation = *vocab.entry(label.clone()).or_insert_with(|| {
            set.relations.push(label);
            RelationId(set.relations.len() as u32 - 1)
        });
        let t = Triplet {
            source,
            relation,
            target,
        };
        if seen.insert(t) {
            set.triplets.push(t);
        } else {
            set.duplicates += 1;
        }
    }
    Ok(set)
}

/// Directed edge ⟨source, relation?, target⟩. `relation == None` marks an
/// unlabeled hyperlink edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundedEdge {
    pub source: EntityId,
    pub relation: Option<RelationId>,
    pub target: EntityId,
    /// Sorted passage indices in the source page mentioning the target.
    pub descriptions: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BuildCounters {
    /// Labeled triplets with no mention of the target in the source page.
    pub ungrounded_triplets: usize,
    /// Labeled triplets that matched a hyperlink pair.
    pub aligned_triplets: usize,
    /// Hyperlink pairs none of whose link passages hold a full alias.
    pub dropped_link_pairs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundedGraph {
    corpus: Corpus,
    aliases: AliasTable,
    relations: Vec<String>,
    edges: Vec<GroundedEdge>,
    by_source: Vec<Range<usize>>,
    by_pair: HashMap<(EntityId, EntityId), Range<usize>>,
    neighbours: Vec<Vec<EntityId>>,
    pub counters: BuildCounters,
}

impl GroundedGraph {
    /// Assemble from parts. Edges are re-sorted into (source, target,
    /// relation) order and every index is rebuilt.
    pub fn from_parts(
        corpus: Corpus,
        aliases: AliasTable,
        relations: Vec<String>,
        mut edges: Vec<GroundedEdge>,
        counters: BuildCounters,
    ) -> Result<Self> {
        let n = corpus.len();
        if aliases.len() != n {
            return Err(Error::GraphFormat(format!(
                "alias table covers {} entities, corpus has {n}",
                aliases.len()
            )));
        }
        for e in &edges {
            if e.source.index() >= n || e.target.index() >= n {
                return Err(Error::GraphFormat("edge endpoint out of range".into()));
            }
            if e.relation.is_some_and(|r| r.index() >= relations.len()) {
                return Err(Error::GraphFormat("edge relation out of range".into()));
            }
            if e.source == e.target || e.descriptions.is_empty() {
                return Err(Error::GraphFormat("degenerate edge".into()));
            }
        }
        edges.sort_by_key(|e| (e.source, e.target, e.relation));
        let mut by_source = vec![0..0; n];
        let mut by_pair: HashMap<(EntityId, EntityId), Range<usize>> = HashMap::new();
        let mut neighbours = vec![Vec::new(); n];
        let mut i = 0;
        while i < edges.len() {
            let s = edges[i].source;
            let start = i;
            while i < edges.len() && edges[i].source == s {
                let t = edges[i].target;
                let pstart = i;
                while i < edges.len() && edges[i].source == s && edges[i].target == t {
                    i += 1;
                }
                by_pair.insert((s, t), pstart..i);
                neighbours[s.index()].push(t);
                neighbours[t.index()].push(s);
            }
            by_source[s.index()] = start..i;
        }
        for list in &mut neighbours {
            list.sort_unstable();
            list.dedup();
        }
        Ok(GroundedGraph {
            corpus,
            aliases,
            relations,
            edges,
            by_source,
            by_pair,
            neighbours,
            counters,
        })
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn aliases(&self) -> &AliasTable {
        &self.aliases
    }

    pub fn relations(&self) -> &[String] {
        &self.relations
    }

    pub fn relation_label(&self, r: RelationId) -> &str {
        &self.relations[r.index()]
    }

    pub fn entity_count(&self) -> usize {
        self.corpus.len()
    }

    pub fn edges(&self) -> &[GroundedEdge] {
        &self.edges
    }

    pub fn edges_from(&self, source: EntityId) -> &[GroundedEdge] {
        &self.edges[self.by_source[source.index()].clone()]
    }

    /// All parallel edges from `source` to `target`.
    pub fn edges_between(&self, source: EntityId, target: EntityId) -> &[GroundedEdge] {
        match self.by_pair.get(&(source, target)) {
            Some(r) => &self.edges[r.clone()],
            None => &[],
        }
    }

    /// Neighbours in the undirected closure, sorted.
    pub fn neighbours(&self, entity: EntityId) -> &[EntityId] {
        &self.neighbours[entity.index()]
    }

    pub fn is_mutual(&self, a: EntityId, b: EntityId) -> bool {
        !self.edges_between(a, b).is_empty() && !self.edges_between(b, a).is_empty()
    }
}

fn mentioned_passages(
    corpus: &Corpus,
    aliases: &AliasTable,
    source: EntityId,
    target: EntityId,
    candidates: impl IntoIterator<Item = usize>,
) -> Vec<usize> {
    candidates
        .into_iter()
        .filter(|&p| {
            corpus
                .passage(source, p)
                .is_some_and(|pass| aliases.mentions(&pass.keys(), target))
        })
        .collect()
}

/// Align labeled triplets with hyperlinks and ground every edge.
///
/// A triplet whose (source, target) pair is hyperlinked takes over the
/// link passages. Other triplets are grounded in every source-page passage
/// holding a corpus-wide longest-alias mention of the target; triplets with
/// no mention produce no edge. Hyperlink pairs left over become unlabeled
/// edges.
pub fn align_and_ground(
    triplets: &TripletSet,
    hyperlinks: &[Hyperlink],
    corpus: Corpus,
    aliases: AliasTable,
) -> Result<GroundedGraph> {
    let mut link_passages: BTreeMap<(EntityId, EntityId), BTreeSet<usize>> = BTreeMap::new();
    for h in hyperlinks {
        link_passages
            .entry((h.source, h.target))
            .or_default()
            .insert(h.passage);
    }
    let mut labeled: BTreeMap<(EntityId, EntityId), BTreeSet<RelationId>> = BTreeMap::new();
    for t in &triplets.triplets {
        labeled
            .entry((t.source, t.target))
            .or_default()
            .insert(t.relation);
    }

    let mut counters = BuildCounters::default();
    let mut edges = Vec::new();
    // Pairs that need a mention search, grouped by source page.
    let mut to_search: BTreeMap<EntityId, Vec<EntityId>> = BTreeMap::new();

    for (&(s, t), rels) in &labeled {
        let grounded = link_passages
            .get(&(s, t))
            .map(|ps| mentioned_passages(&corpus, &aliases, s, t, ps.iter().copied()))
            .unwrap_or_default();
        if grounded.is_empty() {
            to_search.entry(s).or_default().push(t);
            continue;
        }
        counters.aligned_triplets += rels.len();
        for &r in rels {
            edges.push(GroundedEdge {
                source: s,
                relation: Some(r),
                target: t,
                descriptions: grounded.clone(),
            });
        }
    }

    let matcher = AliasMatcher::new(&aliases);
    let searched: Vec<(EntityId, Vec<(EntityId, Vec<usize>)>)> = to_search
        .into_par_iter()
        .map(|(s, targets)| {
            let mut hits: BTreeMap<EntityId, Vec<usize>> =
                targets.iter().map(|&t| (t, Vec::new())).collect();
            for passage in corpus.passages(s) {
                for mention in matcher.scan(&passage.keys()) {
                    for e in &mention.entities {
                        if let Some(list) = hits.get_mut(e) {
                            if list.last() != Some(&passage.index) {
                                list.push(passage.index);
                            }
                        }
                    }
                }
            }
            (s, hits.into_iter().collect())
        })
        .collect();
    for (s, hits) in searched {
        for (t, descriptions) in hits {
            let rels = &labeled[&(s, t)];
            if descriptions.is_empty() {
                counters.ungrounded_triplets += rels.len();
                continue;
            }
            for &r in rels {
                edges.push(GroundedEdge {
                    source: s,
                    relation: Some(r),
                    target: t,
                    descriptions: descriptions.clone(),
                });
            }
        }
    }

    for (&(s, t), ps) in &link_passages {
        if labeled.contains_key(&(s, t)) {
            continue;
        }
        let grounded = mentioned_passages(&corpus, &aliases, s, t, ps.iter().copied());
        if grounded.is_empty() {
            counters.dropped_link_pairs += 1;
            continue;
        }
        edges.push(GroundedEdge {
            source: s,
            relation: None,
            target: t,
            descriptions: grounded,
        });
    }

    GroundedGraph::from_parts(corpus, aliases, triplets.relations.clone(), edges, counters)
}

/// Ordered pairs (s, t) with grounded edges in both directions; both
/// orientations are listed, sorted by (s, t).
pub fn mutual_pairs(graph: &GroundedGraph) -> Vec<(EntityId, EntityId)> {
    let mut pairs: Vec<(EntityId, EntityId)> = graph
        .by_pair
        .keys()
        .copied()
        .filter(|&(s, t)| graph.by_pair.contains_key(&(t, s)))
        .collect();
    pairs.sort_unstable();
    pairs
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GraphStats {
    pub linked_entities: usize,
    pub relation_labels: usize,
    pub labeled_triplets: usize,
    pub unlabeled_triplets: usize,
    pub descriptions_per_triplet: f64,
}

impl GraphStats {
    /// Flat `key=value` block, mean rounded to two decimals.
    pub fn to_kv(&self) -> String {
        format!(
            "linked_entities={}\nrelation_labels={}\nlabeled_triplets={}\nunlabeled_triplets={}\ndescriptions_per_triplet={:.2}\n",
            self.linked_entities,
            self.relation_labels,
            self.labeled_triplets,
            self.unlabeled_triplets,
            self.descriptions_per_triplet
        )
    }
}

pub fn compute_stats(graph: &GroundedGraph) -> GraphStats {
    let mut linked = BTreeSet::new();
    let mut rels = BTreeSet::new();
    let mut stats = GraphStats::default();
    let mut descriptions = 0usize;
    for e in graph.edges() {
        linked.insert(e.source);
        linked.insert(e.target);
        match e.relation {
            Some(r) => {
                rels.insert(r);
                stats.labeled_triplets += 1;
            }
            None => stats.unlabeled_triplets += 1,
        }
        descriptions += e.descriptions.len();
    }
    stats.linked_entities = linked.len();
    stats.relation_labels = rels.len();
    let n = graph.edges().len();
    if n > 0 {
        stats.descriptions_per_triplet = descriptions as f64 / n as f64;
    }
    stats
}

/// Parse corpus and triplets and build the graph in one go.
pub fn build_graph<C: BufRead, T: BufRead>(corpus: C, triplets: T) -> Result<GroundedGraph> {
    let corpus = crate::corpus::parse_corpus(corpus)?;
    let triplets = load_triplets(triplets, &corpus)?;
    let (links, aliases) = crate::corpus::extract_hyperlinks(&corpus);
    log::info!(
        "corpus: {} pages, {} links; triplets: {} kept, {} dropped",
        corpus.len(),
        links.len(),
        triplets.triplets.len(),
        triplets.dropped_missing + triplets.dropped_self
    );
    align_and_ground(&triplets, &links, corpus, aliases)
}
