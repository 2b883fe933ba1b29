//! Seeded synthetic corpus and triplet file with a known relational
//! structure, for desk-scale training runs.
//!
//! Every fact ⟨s, r, t⟩ yields one 100-word block on each of the two pages.
//! Both blocks draw their filler from r's topic vocabulary and share a few
//! fact-specific words, so the relation is recoverable from either side and
//! the two sides can be matched to each other.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::PASSAGE_LEN;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub entities: usize,
    pub relations: usize,
    /// Facts per entity on average (each fact touches two entities).
    pub facts_per_entity: f64,
    /// Exponent of the relation frequency law p(r) ∝ (r+1)^-zipf.
    pub zipf: f64,
    /// Share of facts written to the triplet file.
    pub labeled_fraction: f64,
    /// Share of labeled facts whose source side names the target without a link.
    pub mention_only_fraction: f64,
    pub topic_words: usize,
    pub fact_words: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            entities: 200,
            relations: 20,
            facts_per_entity: 3.0,
            zipf: 0.8,
            labeled_fraction: 0.8,
            mention_only_fraction: 0.1,
            topic_words: 12,
            fact_words: 4,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthFact {
    pub source: usize,
    pub relation: usize,
    pub target: usize,
    pub labeled: bool,
    pub mention_only: bool,
}

#[derive(Clone, Debug)]
pub struct SynthCorpus {
    pub titles: Vec<String>,
    pub relation_labels: Vec<String>,
    pub facts: Vec<SynthFact>,
    /// Wikitext-lite text.
    pub wiki: String,
    /// `source<TAB>relation<TAB>target` rows.
    pub triplets: String,
}

const ONSETS: [&str; 16] = [
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "tr",
];
const VOWELS: [&str; 6] = ["a", "e", "i", "o", "u", "ai"];

/// Unique made-up words of two or three syllables.
struct WordMint {
    used: BTreeSet<String>,
}

impl WordMint {
    fn fresh<R: Rng>(&mut self, rng: &mut R) -> String {
        loop {
            let syllables = rng.gen_range(2..=3);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push_str(ONSETS.choose(rng).unwrap());
                w.push_str(VOWELS.choose(rng).unwrap());
            }
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }
}

fn capitalise(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn block<R: Rng>(
    head: &str,
    head_len: usize,
    topic: &[String],
    fact: &[String],
    rng: &mut R,
) -> String {
    let mut words: Vec<&str> = Vec::with_capacity(PASSAGE_LEN);
    let body = PASSAGE_LEN - head_len;
    for i in 0..body {
        if i % 6 == 2 {
            words.push(&fact[(i / 6) % fact.len()]);
        } else {
            words.push(topic.choose(rng).unwrap());
        }
    }
    let split = rng.gen_range(0..=body / 2);
    let mut out = words[..split].join(" ");
    if !out.is_empty() {
        out.push(' ');
    }
    out.push_str(head);
    if split < body {
        out.push(' ');
        out.push_str(&words[split..].join(" "));
    }
    out
}

pub fn generate(config: &SynthConfig) -> Result<SynthCorpus> {
    if config.entities < 2 || config.relations < 1 || config.fact_words < 1 || config.topic_words < 1 {
        return Err(Error::Config("synthetic corpus needs >= 2 entities, >= 1 relation and non-empty vocabularies".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut mint = WordMint {
        used: BTreeSet::new(),
    };
    let titles: Vec<String> = (0..config.entities)
        .map(|_| {
            let a = capitalise(&mint.fresh(&mut rng));
            let b = capitalise(&mint.fresh(&mut rng));
            format!("{a} {b}")
        })
        .collect();
    let relation_labels: Vec<String> = (0..config.relations).map(|r| format!("P{}", 100 + r)).collect();
    let topics: Vec<Vec<String>> = (0..config.relations)
        .map(|_| (0..config.topic_words).map(|_| mint.fresh(&mut rng)).collect())
        .collect();
    let intro_vocab: Vec<String> = (0..40).map(|_| mint.fresh(&mut rng)).collect();

    let weights: Vec<f64> = (0..config.relations)
        .map(|r| ((r + 1) as f64).powf(-config.zipf))
        .collect();
    let dist = rand::distributions::WeightedIndex::new(&weights)
        .map_err(|e| Error::Config(format!("relation weights: {e}")))?;

    let n_facts = (config.facts_per_entity * config.entities as f64 / 2.0).round() as usize;
    let mut pairs = BTreeSet::new();
    let mut facts = Vec::with_capacity(n_facts);
    while facts.len() < n_facts {
        let s = rng.gen_range(0..config.entities);
        let t = rng.gen_range(0..config.entities);
        if s == t || pairs.contains(&(s.min(t), s.max(t))) {
            continue;
        }
        pairs.insert((s.min(t), s.max(t)));
        let labeled = rng.gen_bool(config.labeled_fraction);
        facts.push(SynthFact {
            source: s,
            relation: rng.sample(&dist),
            target: t,
            labeled,
            mention_only: labeled && rng.gen_bool(config.mention_only_fraction),
        });
    }

    let mut blocks: Vec<Vec<String>> = vec![Vec::new(); config.entities];
    for f in &facts {
        let fact_words: Vec<String> = (0..config.fact_words).map(|_| mint.fresh(&mut rng)).collect();
        let topic = &topics[f.relation];
        let t_title = &titles[f.target];
        let s_title = &titles[f.source];
        let (head, len) = if f.mention_only {
            (t_title.clone(), 2)
        } else {
            (format!("[[{t_title}]]"), 2)
        };
        blocks[f.source].push(block(&head, len, topic, &fact_words, &mut rng));
        blocks[f.target].push(block(&format!("[[{s_title}]]"), 2, topic, &fact_words, &mut rng));
    }

    let mut wiki = String::new();
    for (e, title) in titles.iter().enumerate() {
        wiki.push_str(&format!("= {title} =\n"));
        blocks[e].shuffle(&mut rng);
        for b in &blocks[e] {
            wiki.push_str(b);
            wiki.push('\n');
        }
        let n = rng.gen_range(20..60);
        let intro: Vec<&str> = (0..n).map(|_| intro_vocab.choose(&mut rng).unwrap().as_str()).collect();
        wiki.push_str(title);
        wiki.push(' ');
        wiki.push_str(&intro.join(" "));
        wiki.push_str("\n\n");
    }

    let mut triplets = String::new();
    for f in facts.iter().filter(|f| f.labeled) {
        triplets.push_str(&format!(
            "{}\t{}\t{}\n",
            titles[f.source], relation_labels[f.relation], titles[f.target]
        ));
    }
    Ok(SynthCorpus {
        titles,
        relation_labels,
        facts,
        wiki,
        triplets,
    })
}
