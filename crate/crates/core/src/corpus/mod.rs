//! Wikitext-lite corpus: entity pages, 100-word passages and hyperlinks.

mod alias;

use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text;

pub use alias::{AliasMatcher, AliasTable, Mention};

/// Words per passage.
pub const PASSAGE_LEN: usize = 100;

/// Dense handle of an entity page. Ids are contiguous from 0 in page order.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct EntityId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    /// NFC text as written.
    pub text: String,
    /// Case-folded, punctuation-trimmed comparison key.
    pub key: String,
}

impl Token {
    pub fn new(text: &str) -> Self {
        let text = text::nfc(text);
        let key = text::match_key(&text);
        Token { text, key }
    }

    pub fn lower(&self) -> String {
        self.text.to_lowercase()
    }
}

/// A resolved link occurrence inside a page's token stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinkSpan {
    pub target: EntityId,
    pub anchor: String,
    pub start: usize,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Page {
    pub title: String,
    pub tokens: Vec<Token>,
    pub links: Vec<LinkSpan>,
}

impl Page {
    pub fn passage_ranges(&self) -> Vec<Range<usize>> {
        split_passages(self.tokens.len())
    }

    pub fn passage_count(&self) -> usize {
        self.tokens.len().div_ceil(PASSAGE_LEN)
    }

    pub fn passage(&self, index: usize) -> Option<&[Token]> {
        let start = index.checked_mul(PASSAGE_LEN)?;
        if start >= self.tokens.len() {
            return None;
        }
        let end = (start + PASSAGE_LEN).min(self.tokens.len());
        Some(&self.tokens[start..end])
    }

    /// Passage index holding the token at `offset`.
    pub fn passage_of(&self, offset: usize) -> usize {
        offset / PASSAGE_LEN
    }
}

/// A borrowed view of one passage.
#[derive(Clone, Copy, Debug)]
pub struct Passage<'a> {
    pub owner: EntityId,
    pub index: usize,
    pub tokens: &'a [Token],
}

impl Passage<'_> {
    pub fn keys(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.key.as_str()).collect()
    }

    pub fn lower_tokens(&self) -> Vec<String> {
        self.tokens.iter().map(Token::lower).collect()
    }
}

/// Consecutive disjoint chunks of [`PASSAGE_LEN`] tokens; the final chunk
/// holds the remainder and an empty page has no passages.
pub fn split_passages(token_count: usize) -> Vec<Range<usize>> {
    (0..token_count)
        .step_by(PASSAGE_LEN)
        .map(|start| start..(start + PASSAGE_LEN).min(token_count))
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParseCounters {
    pub dangling_links: usize,
    pub self_links: usize,
    pub empty_anchors: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    pages: Vec<Page>,
    titles: HashMap<String, EntityId>,
    pub counters: ParseCounters,
}

impl Corpus {
    /// Rebuild a corpus from already-resolved pages.
    pub fn from_pages(pages: Vec<Page>) -> Result<Self> {
        let mut titles = HashMap::with_capacity(pages.len());
        for (i, page) in pages.iter().enumerate() {
            let norm = text::normalize_title(&page.title);
            if titles.insert(norm, EntityId(i as u32)).is_some() {
                return Err(Error::DuplicatePage {
                    title: page.title.clone(),
                    line: 0,
                });
            }
        }
        Ok(Corpus {
            pages,
            titles,
            counters: ParseCounters::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.pages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pages.is_empty()
    }

    pub fn pages(&self) -> &[Page] {
        &self.pages
    }

    pub fn page(&self, id: EntityId) -> &Page {
        &self.pages[id.index()]
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = EntityId> {
        (0..self.pages.len() as u32).map(EntityId)
    }

    pub fn title(&self, id: EntityId) -> &str {
        &self.pages[id.index()].title
    }

    pub fn lookup(&self, title: &str) -> Option<EntityId> {
        self.titles.get(&text::normalize_title(title)).copied()
    }

    pub fn passage(&self, owner: EntityId, index: usize) -> Option<Passage<'_>> {
        let tokens = self.pages.get(owner.index())?.passage(index)?;
        Some(Passage {
            owner,
            index,
            tokens,
        })
    }

    pub fn passages(&self, owner: EntityId) -> impl Iterator<Item = Passage<'_>> {
        let page = &self.pages[owner.index()];
        (0..page.passage_count()).map(move |index| Passage {
            owner,
            index,
            tokens: page.passage(index).unwrap(),
        })
    }

    pub fn total_tokens(&self) -> usize {
        self.pages.iter().map(|p| p.tokens.len()).sum()
    }

    pub fn link_count(&self) -> usize {
        self.pages.iter().map(|p| p.links.len()).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hyperlink {
    pub source: EntityId,
    pub target: EntityId,
    pub anchor: String,
    /// Passage holding the anchor's first token.
    pub passage: usize,
    /// Token offset of the anchor within the source page.
    pub offset: usize,
}

struct RawPage {
    title: String,
    line: usize,
    body: Vec<(usize, String)>,
}

struct RawLink {
    target: String,
    anchor: String,
    start: usize,
    len: usize,
}

struct Tokenized {
    tokens: Vec<Token>,
    links: Vec<RawLink>,
}

fn header_title(line: &str, lineno: usize) -> Result<Option<String>> {
    let trimmed = line.trim();
    if !trimmed.starts_with('=') {
        return Ok(None);
    }
    let malformed = |message: &str| Error::Parse {
        line: lineno,
        message: message.to_string(),
    };
    if trimmed.len() < 3 || !trimmed.ends_with('=') {
        return Err(malformed("malformed header, expected `= Title =`"));
    }
    let inner = trimmed[1..trimmed.len() - 1].trim();
    if inner.is_empty() || inner.starts_with('=') || inner.ends_with('=') {
        return Err(malformed("malformed header, expected `= Title =`"));
    }
    if inner.contains("[[") || inner.contains("]]") {
        return Err(malformed("links are not allowed in headers"));
    }
    Ok(Some(inner.to_string()))
}

fn tokenize_body(body: &[(usize, String)]) -> Result<Tokenized> {
    let mut tokens = Vec::new();
    let mut links = Vec::new();
    for (lineno, line) in body {
        let mut rest = line.as_str();
        while let Some(open) = rest.find("[[") {
            tokens.extend(rest[..open].split_whitespace().map(Token::new));
            let after = &rest[open + 2..];
            let close = after.find("]]").ok_or_else(|| Error::Parse {
                line: *lineno,
                message: "unterminated link".into(),
            })?;
            let inner = &after[..close];
            if inner.contains("[[") {
                return Err(Error::Parse {
                    line: *lineno,
                    message: "nested link".into(),
                });
            }
            let (target, anchor) = match inner.split_once('|') {
                Some((t, a)) if !a.trim().is_empty() => (t.trim(), a.trim()),
                Some((t, _)) => (t.trim(), t.trim()),
                None => (inner.trim(), inner.trim()),
            };
            if target.is_empty() {
                return Err(Error::Parse {
                    line: *lineno,
                    message: "empty link target".into(),
                });
            }
            let start = tokens.len();
            tokens.extend(anchor.split_whitespace().map(Token::new));
            links.push(RawLink {
                target: target.to_string(),
                anchor: text::nfc(anchor),
                start,
                len: tokens.len() - start,
            });
            rest = &after[close + 2..];
        }
        tokens.extend(rest.split_whitespace().map(Token::new));
    }
    Ok(Tokenized { tokens, links })
}

/// Parse a wikitext-lite stream.
///
/// Link targets naming absent pages and self-links are dropped and
/// counted in [`Corpus::counters`].
pub fn parse_corpus<R: BufRead>(input: R) -> Result<Corpus> {
    let mut raw: Vec<RawPage> = Vec::new();
    let mut titles: HashMap<String, EntityId> = HashMap::new();

    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if text::contains_mask_literal(&line) {
            return Err(Error::Parse {
                line: lineno,
                message: format!("reserved literal {} in corpus text", text::MASK),
            });
        }
        if let Some(title) = header_title(&line, lineno)? {
            let norm = text::normalize_title(&title);
            if titles.contains_key(&norm) {
                return Err(Error::DuplicatePage {
                    title,
                    line: lineno,
                });
            }
            titles.insert(norm, EntityId(raw.len() as u32));
            raw.push(RawPage {
                title: text::nfc(&title),
                line: lineno,
                body: Vec::new(),
            });
            continue;
        }
        match raw.last_mut() {
            Some(page) => page.body.push((lineno, line)),
            None if line.trim().is_empty() => {}
            None => {
                return Err(Error::Parse {
                    line: lineno,
                    message: "body text before the first page header".into(),
                })
            }
        }
    }

    let tokenized: Vec<Tokenized> = raw
        .par_iter()
        .map(|page| tokenize_body(&page.body))
        .collect::<Result<_>>()?;

    let mut counters = ParseCounters::default();
    let mut pages = Vec::with_capacity(raw.len());
    for (idx, (page, tok)) in raw.into_iter().zip(tokenized).enumerate() {
        let mut links = Vec::with_capacity(tok.links.len());
        for link in tok.links {
            let Some(&target) = titles.get(&text::normalize_title(&link.target)) else {
                counters.dangling_links += 1;
                continue;
            };
            if target.index() == idx {
                counters.self_links += 1;
                continue;
            }
            if link.len == 0 {
                counters.empty_anchors += 1;
                continue;
            }
            links.push(LinkSpan {
                target,
                anchor: link.anchor,
                start: link.start,
                len: link.len,
            });
        }
        log::trace!("page {:?} (line {}): {} tokens", page.title, page.line, tok.tokens.len());
        pages.push(Page {
            title: page.title,
            tokens: tok.tokens,
            links,
        });
    }
    if counters.dangling_links > 0 {
        log::warn!("dropped {} dangling links", counters.dangling_links);
    }
    Ok(Corpus {
        pages,
        titles,
        counters,
    })
}

/// One hyperlink per link occurrence plus the alias table built from
/// titles and every observed anchor.
pub fn extract_hyperlinks(corpus: &Corpus) -> (Vec<Hyperlink>, AliasTable) {
    let mut aliases = AliasTable::from_titles(corpus.pages().iter().map(|p| p.title.as_str()));
    let mut links = Vec::with_capacity(corpus.link_count());
    for (source, page) in corpus.entity_ids().zip(corpus.pages()) {
        for span in &page.links {
            aliases.insert(span.target, &span.anchor);
            links.push(Hyperlink {
                source,
                target: span.target,
                anchor: span.anchor.clone(),
                passage: page.passage_of(span.start),
                offset: span.start,
            });
        }
    }
    (links, aliases)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Corpus> {
        parse_corpus(s.as_bytes())
    }

    #[test]
    fn two_pages_one_link() {
        let c = parse("= A =\nalpha text\n\n= B =\nsee [[A]] here\n").unwrap();
        assert_eq!(c.len(), 2);
        let (links, _) = extract_hyperlinks(&c);
        assert_eq!(links.len(), 1);
        assert_eq!(links[0].source, EntityId(1));
        assert_eq!(links[0].target, EntityId(0));
    }

    #[test]
    fn self_link_dropped() {
        let c = parse("= X =\nthis is [[X]] itself\n").unwrap();
        assert_eq!(c.link_count(), 0);
        assert_eq!(c.counters.self_links, 1);
        // anchor words still count as text
        assert_eq!(c.page(EntityId(0)).tokens.len(), 4);
    }

    #[test]
    fn dangling_link_counted() {
        let c = parse("= X =\nsee [[Nowhere|the void]]\n").unwrap();
        assert_eq!(c.link_count(), 0);
        assert_eq!(c.counters.dangling_links, 1);
    }

    #[test]
    fn forward_references_resolve() {
        let c = parse("= A =\n[[B]] later\n= B =\nbody\n").unwrap();
        assert_eq!(c.page(EntityId(0)).links[0].target, EntityId(1));
    }

    #[test]
    fn malformed_header_reports_line() {
        let err = parse("= A =\nok\n= Broken\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_title_after_folding() {
        let err = parse("= Stephen Curry =\na\n=  stephen   CURRY =\nb\n").unwrap_err();
        assert!(matches!(err, Error::DuplicatePage { line: 3, .. }));
    }

    #[test]
    fn mask_literal_rejected() {
        assert!(matches!(
            parse("= A =\nsome <MASK> here\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn text_before_header_rejected() {
        assert!(parse("stray\n= A =\n").is_err());
        assert!(parse("\n\n= A =\nok\n").is_ok());
    }

    #[test]
    fn unterminated_link_rejected() {
        assert!(matches!(parse("= A =\nsee [[B\n= B =\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn split_boundaries() {
        let lens = |n| split_passages(n).iter().map(|r| r.len()).collect::<Vec<_>>();
        assert_eq!(lens(250), vec![100, 100, 50]);
        assert_eq!(lens(100), vec![100]);
        assert!(lens(0).is_empty());
        assert_eq!(lens(101), vec![100, 1]);
    }

    #[test]
    fn steph_curry_links_davidson() {
        let c = parse(
            "= Stephen Curry =\nCurry played college basketball for [[Davidson College]] .\n\
             = Davidson College =\nA college in North Carolina.\n",
        )
        .unwrap();
        let (links, aliases) = extract_hyperlinks(&c);
        assert_eq!(links.len(), 1);
        let l = &links[0];
        assert_eq!(c.title(l.source), "Stephen Curry");
        assert_eq!(c.title(l.target), "Davidson College");
        let passage = c.passage(l.source, l.passage).unwrap();
        assert_eq!(passage.tokens[l.offset].text, "Davidson");
        assert!(aliases.contains(l.target, "davidson college"));
    }

    #[test]
    fn piped_anchor_becomes_alias() {
        let c = parse("= Splash Brothers =\nduo\n= Warriors =\n[[Splash Brothers|the splash bros]] shoot\n")
            .unwrap();
        let (_, aliases) = extract_hyperlinks(&c);
        assert!(aliases.contains(EntityId(0), "The Splash Bros"));
        assert!(aliases.contains(EntityId(0), "splash brothers"));
    }

    #[test]
    fn repeated_target_gives_distinct_passages() {
        let filler = "w ".repeat(120);
        let src = format!("= T =\nt\n= S =\n[[T]] {filler} [[T|tee]]\n");
        let c = parse(&src).unwrap();
        let (links, _) = extract_hyperlinks(&c);
        assert_eq!(links.len(), 2);
        assert_eq!(links[0].passage, 0);
        assert_eq!(links[1].passage, 1);
    }

    #[test]
    fn link_adjacent_punctuation_is_split() {
        let c = parse("= A =\nx\n= B =\nthe [[A]]'s view\n").unwrap();
        let texts: Vec<_> = c.page(EntityId(1)).tokens.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(texts, vec!["the", "A", "'s", "view"]);
    }

    #[test]
    fn straddling_anchor_goes_to_first_token_passage() {
        let filler = "w ".repeat(99);
        let src = format!("= T =\nt\n= S =\n{filler} [[T|two words]]\n");
        let c = parse(&src).unwrap();
        let (links, _) = extract_hyperlinks(&c);
        assert_eq!(links[0].offset, 99);
        assert_eq!(links[0].passage, 0);
    }
}
