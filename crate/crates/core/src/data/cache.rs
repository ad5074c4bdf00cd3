//! Preprocessed dataset cache.
//!
//! Layout (little-endian):
//!
//! ```text
//! "TCD1" | version u32 | name_len u32 + name bytes
//! | n_entities u32 | n_relations u32 | n_timestamps u32
//! | entity strings    (len u32 + bytes, id order)
//! | relation strings  (base relations only)
//! | timestamp strings (chronological order)
//! | train: count u64 + quads | valid: same | test: same
//! ```
//!
//! Each quad is four u32 (head, rel, tail, time). Writing the same dataset
//! twice produces byte-identical files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{Dataset, Quadruple, Vocabulary};

pub const CACHE_MAGIC: &[u8; 4] = b"TCD1";
const CACHE_VERSION: u32 = 1;

fn w_u32<W: Write>(w: &mut W, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn w_u64<W: Write>(w: &mut W, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn w_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn r_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn r_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn r_str<R: Read>(r: &mut R) -> std::io::Result<String> {
    let len = r_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))
}

/// Write a dataset cache.
pub fn save_cache(path: &Path, dataset: &Dataset) -> Result<()> {
    let ctx = || format!("writing cache {}", path.display());
    let file = File::create(path).map_err(|e| Error::io(ctx(), e))?;
    let mut w = BufWriter::with_capacity(1 << 20, file);
    (|| -> std::io::Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w_u32(&mut w, CACHE_VERSION)?;
        w_str(&mut w, &dataset.name)?;
        let v = &dataset.vocab;
        w_u32(&mut w, v.n_entities() as u32)?;
        w_u32(&mut w, v.n_relations() as u32)?;
        w_u32(&mut w, v.n_timestamps() as u32)?;
        for s in v.entity_names() {
            w_str(&mut w, s)?;
        }
        for s in v.relation_names() {
            w_str(&mut w, s)?;
        }
        for s in v.timestamp_names() {
            w_str(&mut w, s)?;
        }
        for split in [&dataset.train, &dataset.valid, &dataset.test] {
            w_u64(&mut w, split.len() as u64)?;
            for q in split.iter() {
                w_u32(&mut w, q.head)?;
                w_u32(&mut w, q.rel)?;
                w_u32(&mut w, q.tail)?;
                w_u32(&mut w, q.time)?;
            }
        }
        w.flush()
    })()
    .map_err(|e| Error::io(ctx(), e))
}

/// Byte span of one split's quad block inside the cache file.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SplitSpan {
    pub offset: u64,
    pub count: u64,
}

pub(crate) struct CacheLayout {
    pub name: String,
    pub vocab: Vocabulary,
    pub train: SplitSpan,
    pub valid: SplitSpan,
    pub test: SplitSpan,
}

pub(crate) fn read_layout(path: &Path) -> Result<CacheLayout> {
    let bad = |msg: String| Error::Format {
        path: path.display().to_string(),
        msg,
    };
    let ioerr = |e: std::io::Error| Error::io(format!("reading cache {}", path.display()), e);
    let file = File::open(path)
        .map_err(|e| Error::io(format!("opening cache {}", path.display()), e))?;
    let mut r = BufReader::with_capacity(1 << 20, file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(ioerr)?;
    if &magic != CACHE_MAGIC {
        return Err(bad(format!("bad magic {magic:?}, expected \"TCD1\"")));
    }
    let version = r_u32(&mut r).map_err(ioerr)?;
    if version != CACHE_VERSION {
        return Err(bad(format!("unsupported cache version {version}")));
    }
    let name = r_str(&mut r).map_err(ioerr)?;
    let n_entities = r_u32(&mut r).map_err(ioerr)? as usize;
    let n_relations = r_u32(&mut r).map_err(ioerr)? as usize;
    let n_timestamps = r_u32(&mut r).map_err(ioerr)? as usize;
    let read_strings = |r: &mut BufReader<File>, n: usize| -> std::io::Result<Vec<String>> {
        (0..n).map(|_| r_str(r)).collect()
    };
    let entities = read_strings(&mut r, n_entities).map_err(ioerr)?;
    let relations = read_strings(&mut r, n_relations).map_err(ioerr)?;
    let timestamps = read_strings(&mut r, n_timestamps).map_err(ioerr)?;
    let vocab = Vocabulary::from_lists(entities, relations, timestamps)?;

    let mut spans = [SplitSpan { offset: 0, count: 0 }; 3];
    for span in spans.iter_mut() {
        let count = r_u64(&mut r).map_err(ioerr)?;
        let offset = r.stream_position().map_err(ioerr)?;
        span.offset = offset;
        span.count = count;
        r.seek(SeekFrom::Current(count as i64 * 16)).map_err(ioerr)?;
    }
    Ok(CacheLayout {
        name,
        vocab,
        train: spans[0],
        valid: spans[1],
        test: spans[2],
    })
}

pub(crate) fn read_quads(
    file: &mut (impl Read + Seek),
    span: SplitSpan,
    from: u64,
    n: usize,
) -> std::io::Result<Vec<Quadruple>> {
    debug_assert!(from + n as u64 <= span.count);
    file.seek(SeekFrom::Start(span.offset + from * 16))?;
    let mut buf = vec![0u8; n * 16];
    file.read_exact(&mut buf)?;
    let mut out = Vec::with_capacity(n);
    for c in buf.chunks_exact(16) {
        out.push(Quadruple {
            head: u32::from_le_bytes([c[0], c[1], c[2], c[3]]),
            rel: u32::from_le_bytes([c[4], c[5], c[6], c[7]]),
            tail: u32::from_le_bytes([c[8], c[9], c[10], c[11]]),
            time: u32::from_le_bytes([c[12], c[13], c[14], c[15]]),
        });
    }
    Ok(out)
}

/// Read a full dataset cache back into memory.
pub fn load_cache(path: &Path) -> Result<Dataset> {
    let layout = read_layout(path)?;
    let ioerr = |e: std::io::Error| Error::io(format!("reading cache {}", path.display()), e);
    let mut file = File::open(path)
        .map_err(|e| Error::io(format!("opening cache {}", path.display()), e))?;
    let mut load = |span: SplitSpan| -> Result<Vec<Quadruple>> {
        read_quads(&mut file, span, 0, span.count as usize).map_err(ioerr)
    };
    let train = load(layout.train)?;
    let valid = load(layout.valid)?;
    let test = load(layout.test)?;
    // ids must be valid for the vocabulary
    let v = &layout.vocab;
    for q in train.iter().chain(&valid).chain(&test) {
        if q.head as usize >= v.n_entities()
            || q.tail as usize >= v.n_entities()
            || q.rel as usize >= v.n_relations()
            || q.time as usize >= v.n_timestamps()
        {
            return Err(Error::Format {
                path: path.display().to_string(),
                msg: format!("quad {q:?} out of vocabulary range"),
            });
        }
    }
    Ok(Dataset {
        name: layout.name,
        vocab: layout.vocab,
        train,
        valid,
        test,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthetic_dataset, SyntheticSpec};

    #[test]
    fn cache_round_trips_and_is_deterministic() {
        let ds = synthetic_dataset(&SyntheticSpec {
            n_entities: 9,
            n_relations: 3,
            n_timestamps: 4,
            n_facts: 30,
            seed: 5,
        });
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.tcd");
        let p2 = dir.path().join("b.tcd");
        save_cache(&p1, &ds).unwrap();
        let back = load_cache(&p1).unwrap();
        assert_eq!(back.vocab, ds.vocab);
        assert_eq!(back.train, ds.train);
        assert_eq!(back.valid, ds.valid);
        assert_eq!(back.test, ds.test);
        save_cache(&p2, &back).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn corrupt_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.tcd");
        std::fs::write(&p, b"XXXX").unwrap();
        assert!(matches!(load_cache(&p), Err(Error::Format { .. })));
    }
}
