//! Versioned binary graph file.
//!
//! Layout: 4-byte magic, 1 version byte, then sections, each
//! `tag: u8, length: u64 LE, payload`. All integers little-endian;
//! strings are `u32 length + UTF-8 bytes`. The file carries the corpus
//! and alias table so downstream stages need nothing else.

use std::collections::BTreeSet;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::{BuildCounters, GroundedEdge, GroundedGraph, RelationId};
use crate::corpus::{AliasTable, Corpus, EntityId, LinkSpan, Page, ParseCounters, Token};
use crate::error::{Error, Result};
use crate::fsutil;

pub const GRAPH_MAGIC: [u8; 4] = *b"RGQG";
pub const GRAPH_VERSION: u8 = 1;

const TAG_PAGES: u8 = 1;
const TAG_ALIASES: u8 = 2;
const TAG_RELATIONS: u8 = 3;
const TAG_EDGES: u8 = 4;
const TAG_COUNTERS: u8 = 5;

const UNLABELED: u32 = u32::MAX;

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.write_u32::<LE>(s.len() as u32).unwrap();
    buf.extend_from_slice(s.as_bytes());
}

fn section(out: &mut Vec<u8>, tag: u8, payload: Vec<u8>) {
    out.push(tag);
    out.write_u64::<LE>(payload.len() as u64).unwrap();
    out.extend_from_slice(&payload);
}

pub fn encode_graph(g: &GroundedGraph) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&GRAPH_MAGIC);
    out.push(GRAPH_VERSION);

    let mut p = Vec::new();
    let pages = g.corpus().pages();
    p.write_u32::<LE>(pages.len() as u32).unwrap();
    for page in pages {
        put_str(&mut p, &page.title);
        p.write_u32::<LE>(page.tokens.len() as u32).unwrap();
        for t in &page.tokens {
            put_str(&mut p, &t.text);
        }
        p.write_u32::<LE>(page.links.len() as u32).unwrap();
        for l in &page.links {
            p.write_u32::<LE>(l.target.0).unwrap();
            put_str(&mut p, &l.anchor);
            p.write_u32::<LE>(l.start as u32).unwrap();
            p.write_u32::<LE>(l.len as u32).unwrap();
        }
    }
    section(&mut out, TAG_PAGES, p);

    let mut a = Vec::new();
    for forms in g.aliases().all_forms() {
        a.write_u32::<LE>(forms.len() as u32).unwrap();
        for f in forms {
            put_str(&mut a, f);
        }
    }
    section(&mut out, TAG_ALIASES, a);

    let mut r = Vec::new();
    r.write_u32::<LE>(g.relations().len() as u32).unwrap();
    for label in g.relations() {
        put_str(&mut r, label);
    }
    section(&mut out, TAG_RELATIONS, r);

    let mut e = Vec::new();
    e.write_u64::<LE>(g.edges().len() as u64).unwrap();
    for edge in g.edges() {
        e.write_u32::<LE>(edge.source.0).unwrap();
        e.write_u32::<LE>(edge.relation.map_or(UNLABELED, |r| r.0)).unwrap();
        e.write_u32::<LE>(edge.target.0).unwrap();
        e.write_u32::<LE>(edge.descriptions.len() as u32).unwrap();
        for &d in &edge.descriptions {
            e.write_u32::<LE>(d as u32).unwrap();
        }
    }
    section(&mut out, TAG_EDGES, e);

    let mut c = Vec::new();
    let pc = &g.corpus().counters;
    let bc = &g.counters;
    for v in [
        pc.dangling_links,
        pc.self_links,
        pc.empty_anchors,
        bc.ungrounded_triplets,
        bc.aligned_triplets,
        bc.dropped_link_pairs,
    ] {
        c.write_u64::<LE>(v as u64).unwrap();
    }
    section(&mut out, TAG_COUNTERS, c);
    out
}

struct Reader<'a> {
    cur: Cursor<&'a [u8]>,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], what: &'static str) -> Self {
        Reader {
            cur: Cursor::new(bytes),
            what,
        }
    }

    fn eof(&self) -> Error {
        Error::Truncated(self.what)
    }

    fn u8(&mut self) -> Result<u8> {
        self.cur.read_u8().map_err(|_| self.eof())
    }

    fn u32(&mut self) -> Result<u32> {
        self.cur.read_u32::<LE>().map_err(|_| self.eof())
    }

    fn u64(&mut self) -> Result<u64> {
        self.cur.read_u64::<LE>().map_err(|_| self.eof())
    }

    fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        let pos = self.cur.position() as usize;
        let all = *self.cur.get_ref();
        if all.len() - pos < n {
            return Err(self.eof());
        }
        self.cur.set_position((pos + n) as u64);
        Ok(&all[pos..pos + n])
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let b = self.bytes(n)?;
        String::from_utf8(b.to_vec()).map_err(|_| Error::GraphFormat("invalid UTF-8".into()))
    }

    fn done(&self) -> bool {
        self.cur.position() as usize == self.cur.get_ref().len()
    }
}

pub fn decode_graph(bytes: &[u8]) -> Result<GroundedGraph> {
    let mut head = Reader::new(bytes, "header");
    let mut magic = [0u8; 4];
    head.cur
        .read_exact(&mut magic)
        .map_err(|_| Error::Truncated("header"))?;
    if magic != GRAPH_MAGIC {
        return Err(Error::GraphFormat(format!("bad magic {magic:?}")));
    }
    let version = head.u8()?;
    if version != GRAPH_VERSION {
        return Err(Error::Version {
            found: version,
            expected: GRAPH_VERSION,
        });
    }

    let mut pages = None;
    let mut forms = None;
    let mut relations = None;
    let mut edges = None;
    let mut counters = None;
    while !head.done() {
        let tag = head.u8()?;
        let len = head.u64()? as usize;
        let what = match tag {
            TAG_PAGES => "pages",
            TAG_ALIASES => "aliases",
            TAG_RELATIONS => "relations",
            TAG_EDGES => "edges",
            TAG_COUNTERS => "counters",
            other => return Err(Error::GraphFormat(format!("unknown section tag {other}"))),
        };
        let payload = head.bytes(len).map_err(|_| Error::Truncated(what))?;
        let mut r = Reader::new(payload, what);
        match tag {
            TAG_PAGES => pages = Some(read_pages(&mut r)?),
            TAG_ALIASES => forms = Some(r),
            TAG_RELATIONS => {
                let n = r.u32()? as usize;
                relations = Some((0..n).map(|_| r.string()).collect::<Result<Vec<_>>>()?);
            }
            TAG_EDGES => edges = Some(read_edges(&mut r)?),
            TAG_COUNTERS => {
                let mut v = [0usize; 6];
                for x in &mut v {
                    *x = r.u64()? as usize;
                }
                counters = Some(v);
            }
            _ => unreachable!(),
        }
    }
    let missing = |name: &str| Error::GraphFormat(format!("missing {name} section"));
    let pages = pages.ok_or_else(|| missing("pages"))?;
    let mut alias_reader = forms.ok_or_else(|| missing("aliases"))?;
    let mut alias_forms = Vec::with_capacity(pages.len());
    for _ in 0..pages.len() {
        let n = alias_reader.u32()? as usize;
        let set = (0..n)
            .map(|_| alias_reader.string())
            .collect::<Result<BTreeSet<_>>>()?;
        alias_forms.push(set);
    }
    let relations = relations.ok_or_else(|| missing("relations"))?;
    let edges = edges.ok_or_else(|| missing("edges"))?;
    let c = counters.ok_or_else(|| missing("counters"))?;

    let n = pages.len() as u32;
    if pages
        .iter()
        .flat_map(|p| &p.links)
        .any(|l| l.target.0 >= n)
    {
        return Err(Error::GraphFormat("link target out of range".into()));
    }
    let mut corpus = Corpus::from_pages(pages)?;
    corpus.counters = ParseCounters {
        dangling_links: c[0],
        self_links: c[1],
        empty_anchors: c[2],
    };
    GroundedGraph::from_parts(
        corpus,
        AliasTable::from_forms(alias_forms),
        relations,
        edges,
        BuildCounters {
            ungrounded_triplets: c[3],
            aligned_triplets: c[4],
            dropped_link_pairs: c[5],
        },
    )
}

fn read_pages(r: &mut Reader<'_>) -> Result<Vec<Page>> {
    let n = r.u32()? as usize;
    let mut pages = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let title = r.string()?;
        let nt = r.u32()? as usize;
        let tokens = (0..nt)
            .map(|_| r.string().map(|s| Token::new(&s)))
            .collect::<Result<Vec<_>>>()?;
        let nl = r.u32()? as usize;
        let mut links = Vec::with_capacity(nl.min(1 << 16));
        for _ in 0..nl {
            let target = EntityId(r.u32()?);
            let anchor = r.string()?;
            let start = r.u32()? as usize;
            let len = r.u32()? as usize;
            if start + len > tokens.len() {
                return Err(Error::GraphFormat("link span out of range".into()));
            }
            links.push(LinkSpan {
                target,
                anchor,
                start,
                len,
            });
        }
        pages.push(Page {
            title,
            tokens,
            links,
        });
    }
    Ok(pages)
}

fn read_edges(r: &mut Reader<'_>) -> Result<Vec<GroundedEdge>> {
    let n = r.u64()? as usize;
    let mut edges = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let source = EntityId(r.u32()?);
        let rel = r.u32()?;
        let target = EntityId(r.u32()?);
        let nd = r.u32()? as usize;
        let descriptions = (0..nd)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        edges.push(GroundedEdge {
            source,
            relation: (rel != UNLABELED).then_some(RelationId(rel)),
            target,
            descriptions,
        });
    }
    Ok(edges)
}

pub fn save_graph(graph: &GroundedGraph, path: &Path) -> Result<()> {
    fsutil::write_atomic(path, &encode_graph(graph))
}

pub fn load_graph(path: &Path) -> Result<GroundedGraph> {
    decode_graph(&fsutil::read(path)?)
}
