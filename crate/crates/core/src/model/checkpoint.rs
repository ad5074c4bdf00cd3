//! Self-describing binary checkpoint container.
//!
//! Layout (all integers little-endian u32, all floats little-endian f32):
//!
//! ```text
//! "TCE1" | version | d | n_entities | n_rel_aug | n_timestamps
//! | name_len | variant name bytes
//! | 7 parameter tables, row-major   (entity, rel_translate, rel_scale,
//! |                                  rel_rotate, time_translate,
//! |                                  time_scale, time_rotate)
//! | 7 Adagrad accumulator tables in the same order and layout
//! ```
//!
//! Values are stored as 32-bit floats regardless of the in-memory precision;
//! a write/read/write cycle is byte-identical.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::params::{Dims, ModelParams, TableId};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"TCE1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointHeader {
    pub d: u32,
    pub n_entities: u32,
    pub n_rel_aug: u32,
    pub n_timestamps: u32,
    pub variant: String,
}

impl CheckpointHeader {
    pub fn dims(&self) -> Result<Dims> {
        if self.n_rel_aug % 2 != 0 {
            return Err(Error::Format {
                path: "<checkpoint>".into(),
                msg: format!("relation row count {} is odd", self.n_rel_aug),
            });
        }
        Ok(Dims {
            d: self.d as usize,
            n_entities: self.n_entities as usize,
            n_relations: (self.n_rel_aug / 2) as usize,
            n_timestamps: self.n_timestamps as usize,
        })
    }
}

fn write_u32<W: Write>(w: &mut W, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn write_table<S: Real, W: Write>(
    w: &mut W,
    table: &super::table::EmbeddingTable<S>,
) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(table.data().len() * 4);
    for v in table.data() {
        buf.extend_from_slice(&v.to_f32().to_le_bytes());
    }
    w.write_all(&buf)
}

fn read_table_into<S: Real, R: Read>(
    r: &mut R,
    table: &mut super::table::EmbeddingTable<S>,
) -> std::io::Result<()> {
    let n = table.rows() * table.cols();
    let mut buf = vec![0u8; n * 4];
    r.read_exact(&mut buf)?;
    for (dst, chunk) in table.data_mut().iter_mut().zip(buf.chunks_exact(4)) {
        *dst = S::from_f32(f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]));
    }
    Ok(())
}

/// Write parameters, Adagrad accumulators and the variant name.
pub fn save_checkpoint<S: Real>(
    path: &Path,
    params: &ModelParams<S>,
    accumulators: &ModelParams<S>,
    variant_name: &str,
) -> Result<()> {
    let ctx = || format!("writing checkpoint {}", path.display());
    let file = File::create(path).map_err(|e| Error::io(ctx(), e))?;
    let mut w = BufWriter::new(file);
    let dims = params.dims();
    (|| -> std::io::Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        write_u32(&mut w, CHECKPOINT_VERSION)?;
        write_u32(&mut w, dims.d as u32)?;
        write_u32(&mut w, dims.n_entities as u32)?;
        write_u32(&mut w, dims.n_relations_aug() as u32)?;
        write_u32(&mut w, dims.n_timestamps as u32)?;
        let name = variant_name.as_bytes();
        write_u32(&mut w, name.len() as u32)?;
        w.write_all(name)?;
        for id in TableId::ALL {
            write_table(&mut w, params.table(id))?;
        }
        for id in TableId::ALL {
            write_table(&mut w, accumulators.table(id))?;
        }
        w.flush()
    })()
    .map_err(|e| Error::io(ctx(), e))
}

/// Read just the header (cheap; used for dimension checks and messages).
pub fn read_checkpoint_header(path: &Path) -> Result<CheckpointHeader> {
    let file = File::open(path)
        .map_err(|e| Error::io(format!("opening checkpoint {}", path.display()), e))?;
    let mut r = BufReader::new(file);
    read_header(&mut r, path)
}

fn read_header<R: Read>(r: &mut R, path: &Path) -> Result<CheckpointHeader> {
    let bad = |msg: String| Error::Format {
        path: path.display().to_string(),
        msg,
    };
    let ioerr = |e: std::io::Error| Error::io(format!("reading checkpoint {}", path.display()), e);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(ioerr)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(bad(format!("bad magic {magic:?}, expected \"TCE1\"")));
    }
    let version = read_u32(r).map_err(ioerr)?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let d = read_u32(r).map_err(ioerr)?;
    let n_entities = read_u32(r).map_err(ioerr)?;
    let n_rel_aug = read_u32(r).map_err(ioerr)?;
    let n_timestamps = read_u32(r).map_err(ioerr)?;
    let name_len = read_u32(r).map_err(ioerr)? as usize;
    if name_len > 1024 {
        return Err(bad(format!("implausible variant name length {name_len}")));
    }
    let mut name = vec![0u8; name_len];
    r.read_exact(&mut name).map_err(ioerr)?;
    let variant = String::from_utf8(name)
        .map_err(|_| bad("variant name is not valid UTF-8".into()))?;
    Ok(CheckpointHeader {
        d,
        n_entities,
        n_rel_aug,
        n_timestamps,
        variant,
    })
}

/// Read a full checkpoint into freshly-allocated tables.
pub fn load_checkpoint<S: Real>(path: &Path) -> Result<(ModelParams<S>, ModelParams<S>, String)> {
    let file = File::open(path)
        .map_err(|e| Error::io(format!("opening checkpoint {}", path.display()), e))?;
    let mut r = BufReader::new(file);
    let header = read_header(&mut r, path)?;
    let dims = header.dims()?;
    let ioerr = |e: std::io::Error| Error::io(format!("reading checkpoint {}", path.display()), e);
    let mut params = ModelParams::zeros(dims);
    let mut accum = ModelParams::zeros(dims);
    for id in TableId::ALL {
        read_table_into(&mut r, params.table_mut(id)).map_err(ioerr)?;
    }
    for id in TableId::ALL {
        read_table_into(&mut r, accum.table_mut(id)).map_err(ioerr)?;
    }
    // trailing garbage would mean a layout mismatch
    let mut probe = [0u8; 1];
    match r.read(&mut probe) {
        Ok(0) => {}
        Ok(_) => {
            return Err(Error::Format {
                path: path.display().to_string(),
                msg: "trailing bytes after accumulator tables".into(),
            })
        }
        Err(e) => return Err(ioerr(e)),
    }
    Ok((params, accum, header.variant))
}
