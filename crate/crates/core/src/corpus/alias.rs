use std::collections::{BTreeSet, HashMap};
use std::ops::Range;

use super::EntityId;
use crate::text;

/// Surface forms per entity: canonical title plus every observed anchor.
///
/// Forms are stored as space-joined match keys, so every lookup is
/// case-insensitive and ignores surrounding punctuation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AliasTable {
    forms: Vec<BTreeSet<String>>,
    // Key sequences per entity, longest first.
    sequences: Vec<Vec<Vec<String>>>,
}

fn usable(form: &str) -> bool {
    form.split(' ').any(|k| !k.is_empty())
}

impl AliasTable {
    pub fn from_titles<'a>(titles: impl IntoIterator<Item = &'a str>) -> Self {
        let mut table = AliasTable::default();
        for title in titles {
            let mut set = BTreeSet::new();
            let form = text::alias_form(title);
            if usable(&form) {
                set.insert(form);
            }
            table.forms.push(set);
        }
        for i in 0..table.forms.len() {
            table.rebuild(i);
        }
        table
    }

    /// Rebuild from stored forms (graph file load).
    pub fn from_forms(forms: Vec<BTreeSet<String>>) -> Self {
        let mut table = AliasTable {
            sequences: vec![Vec::new(); forms.len()],
            forms,
        };
        for i in 0..table.forms.len() {
            table.rebuild(i);
        }
        table
    }

    fn rebuild(&mut self, idx: usize) {
        if self.sequences.len() <= idx {
            self.sequences.resize(idx + 1, Vec::new());
        }
        let mut seqs: Vec<Vec<String>> = self.forms[idx]
            .iter()
            .map(|f| f.split(' ').map(str::to_string).collect())
            .collect();
        seqs.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        self.sequences[idx] = seqs;
    }

    pub fn insert(&mut self, entity: EntityId, surface: &str) -> bool {
        let form = text::alias_form(surface);
        if !usable(&form) {
            return false;
        }
        let added = self.forms[entity.index()].insert(form);
        if added {
            self.rebuild(entity.index());
        }
        added
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn forms(&self, entity: EntityId) -> &BTreeSet<String> {
        &self.forms[entity.index()]
    }

    pub fn all_forms(&self) -> &[BTreeSet<String>] {
        &self.forms
    }

    pub fn contains(&self, entity: EntityId, surface: &str) -> bool {
        self.forms[entity.index()].contains(&text::alias_form(surface))
    }

    pub fn sequences(&self, entity: EntityId) -> &[Vec<String>] {
        &self.sequences[entity.index()]
    }

    /// Whether the two entities share any surface form.
    pub fn overlaps(&self, a: EntityId, b: EntityId) -> bool {
        let (fa, fb) = (&self.forms[a.index()], &self.forms[b.index()]);
        fa.intersection(fb).next().is_some()
    }

    /// Greedy left-to-right, longest-first occurrences of `entity`'s aliases
    /// in a key sequence. Matches never overlap.
    pub fn find<K: AsRef<str>>(&self, keys: &[K], entity: EntityId) -> Vec<Range<usize>> {
        let seqs = self.sequences(entity);
        let mut out = Vec::new();
        let mut i = 0;
        while i < keys.len() {
            match seqs.iter().find(|s| matches_at(keys, i, s)) {
                Some(seq) => {
                    out.push(i..i + seq.len());
                    i += seq.len();
                }
                None => i += 1,
            }
        }
        out
    }

    pub fn first_match<K: AsRef<str>>(&self, keys: &[K], entity: EntityId) -> Option<Range<usize>> {
        let seqs = self.sequences(entity);
        (0..keys.len()).find_map(|i| {
            seqs.iter()
                .find(|s| matches_at(keys, i, s))
                .map(|s| i..i + s.len())
        })
    }

    pub fn mentions<K: AsRef<str>>(&self, keys: &[K], entity: EntityId) -> bool {
        self.first_match(keys, entity).is_some()
    }
}

fn matches_at<K: AsRef<str>>(keys: &[K], at: usize, seq: &[String]) -> bool {
    at + seq.len() <= keys.len()
        && seq
            .iter()
            .zip(&keys[at..])
            .all(|(a, k)| a.as_str() == k.as_ref())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mention {
    pub span: Range<usize>,
    pub entities: Vec<EntityId>,
}

/// Corpus-wide longest-alias matcher: at each position the longest alias of
/// any entity wins, so "new york city" is never read as "new york".
pub struct AliasMatcher {
    by_first: HashMap<String, Vec<(Vec<String>, Vec<EntityId>)>>,
}

impl AliasMatcher {
    pub fn new(aliases: &AliasTable) -> Self {
        let mut owners: HashMap<Vec<String>, Vec<EntityId>> = HashMap::new();
        for (i, seqs) in aliases.sequences.iter().enumerate() {
            for seq in seqs {
                owners.entry(seq.clone()).or_default().push(EntityId(i as u32));
            }
        }
        let mut by_first: HashMap<String, Vec<(Vec<String>, Vec<EntityId>)>> = HashMap::new();
        for (seq, ents) in owners {
            by_first.entry(seq[0].clone()).or_default().push((seq, ents));
        }
        for list in by_first.values_mut() {
            list.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        }
        AliasMatcher { by_first }
    }

    pub fn scan<K: AsRef<str>>(&self, keys: &[K]) -> Vec<Mention> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < keys.len() {
            let hit = self.by_first.get(keys[i].as_ref()).and_then(|cands| {
                cands.iter().find(|(seq, _)| matches_at(keys, i, seq))
            });
            match hit {
                Some((seq, ents)) => {
                    out.push(Mention {
                        span: i..i + seq.len(),
                        entities: ents.clone(),
                    });
                    i += seq.len();
                }
                None => i += 1,
            }
        }
        out
    }
}
