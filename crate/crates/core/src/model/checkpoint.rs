//! Checkpoint file: `RGQC` magic, version byte, scalar width byte, epoch,
//! then the retriever and reader parameter sets. Each set is a config
//! header followed by the flat parameter blocks in [`Block::ALL`] order.

use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::{Block, Matrix, ModelConfig, ModelParams, Scalar};
use crate::error::{Error, Result};
use crate::fsutil;

const MAGIC: [u8; 4] = *b"RGQC";
const VERSION: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub epoch: u32,
    pub retriever: ModelParams<T>,
    pub reader: ModelParams<T>,
}

fn put_params<T: Scalar>(out: &mut Vec<u8>, p: &ModelParams<T>) {
    let c = &p.config;
    for v in [c.vocab_buckets, c.embed_dim, c.hidden_dim, c.relations] {
        out.write_u64::<LE>(v as u64).unwrap();
    }
    out.write_f64::<LE>(c.init_scale).unwrap();
    out.write_u64::<LE>(c.seed).unwrap();
    for b in Block::ALL {
        let data = p.block(b);
        out.write_u64::<LE>(data.len() as u64).unwrap();
        for &v in data {
            v.write_le(out);
        }
    }
}

pub fn encode_checkpoint<T: Scalar>(ck: &Checkpoint<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(T::WIDTH);
    out.write_u32::<LE>(ck.epoch).unwrap();
    put_params(&mut out, &ck.retriever);
    put_params(&mut out, &ck.reader);
    out
}

fn get_params<T: Scalar>(r: &mut Cursor<&[u8]>) -> Result<ModelParams<T>> {
    let eof = |_| Error::Truncated("checkpoint");
    let mut dims = [0usize; 4];
    for d in &mut dims {
        *d = r.read_u64::<LE>().map_err(eof)? as usize;
    }
    let config = ModelConfig {
        vocab_buckets: dims[0],
        embed_dim: dims[1],
        hidden_dim: dims[2],
        relations: dims[3],
        init_scale: r.read_f64::<LE>().map_err(eof)?,
        seed: r.read_u64::<LE>().map_err(eof)?,
    };
    let (v, e, d, rel) = (dims[0], dims[1], dims[2], dims[3]);
    let expected = [v * e, e * d, e * d, d * rel, d, e, e];
    let remaining = r.get_ref().len() - r.position() as usize;
    if expected.iter().sum::<usize>() > remaining {
        return Err(Error::Truncated("checkpoint"));
    }
    let mut blocks = Vec::with_capacity(7);
    for want in expected {
        let n = r.read_u64::<LE>().map_err(eof)? as usize;
        if n != want {
            return Err(Error::GraphFormat(format!(
                "checkpoint block has {n} values, config implies {want}"
            )));
        }
        let vals = (0..n)
            .map(|_| T::read_le(r).map_err(eof))
            .collect::<Result<Vec<T>>>()?;
        blocks.push(vals);
    }
    let mut it = blocks.into_iter();
    let mut next = || it.next().unwrap();
    Ok(ModelParams {
        embeddings: Matrix::from_vec(v, e, next()),
        question_proj: Matrix::from_vec(e, d, next()),
        passage_proj: Matrix::from_vec(e, d, next()),
        relation_head: Matrix::from_vec(d, rel, next()),
        rank_head: next(),
        start_head: next(),
        end_head: next(),
        config,
    })
}

pub fn decode_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<Checkpoint<T>> {
    let mut r = Cursor::new(bytes);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Truncated("checkpoint"))?;
    if magic != MAGIC {
        return Err(Error::GraphFormat("not a checkpoint file".into()));
    }
    let version = r.read_u8().map_err(|_| Error::Truncated("checkpoint"))?;
    if version != VERSION {
        return Err(Error::Version {
            found: version,
            expected: VERSION,
        });
    }
    let width = r.read_u8().map_err(|_| Error::Truncated("checkpoint"))?;
    if width != T::WIDTH {
        return Err(Error::GraphFormat(format!(
            "checkpoint holds {width}-byte scalars, expected {}",
            T::WIDTH
        )));
    }
    let epoch = r
        .read_u32::<LE>()
        .map_err(|_| Error::Truncated("checkpoint"))?;
    let retriever = get_params(&mut r)?;
    let reader = get_params(&mut r)?;
    if (r.position() as usize) != bytes.len() {
        return Err(Error::GraphFormat("trailing bytes after checkpoint".into()));
    }
    Ok(Checkpoint {
        epoch,
        retriever,
        reader,
    })
}

pub fn save_checkpoint<T: Scalar>(ck: &Checkpoint<T>, path: &Path) -> Result<()> {
    fsutil::write_atomic(path, &encode_checkpoint(ck))
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Checkpoint<T>> {
    decode_checkpoint(&fsutil::read(path)?)
}
