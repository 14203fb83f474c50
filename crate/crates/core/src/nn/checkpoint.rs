//! Binary parameter files: magic, count, then per tensor
//! `name_len u32 | name | rows u32 | cols u32 | f32 LE data`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::graph::{ParamId, ParamStore};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"APIRELW1";

pub fn save_params(store: &ParamStore, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&(store.len() as u32).to_le_bytes()).map_err(io)?;
    for (name, m) in store.iter() {
        w.write_all(&(name.len() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(name.as_bytes()).map_err(io)?;
        w.write_all(&(m.rows as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&(m.cols as u32).to_le_bytes()).map_err(io)?;
        for v in &m.data {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

fn read_u32(r: &mut impl Read, path: &Path) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
    Ok(u32::from_le_bytes(b))
}

/// Load values into a store built with the same architecture; names and
/// shapes must match exactly.
pub fn load_params(store: &mut ParamStore, path: &Path) -> Result<()> {
    let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    if &magic != MAGIC {
        return Err(Error::Backend(format!("{}: not a weights file", path.display())));
    }
    let count = read_u32(&mut r, path)? as usize;
    if count != store.len() {
        return Err(Error::Backend(format!(
            "{}: {count} tensors, architecture expects {}",
            path.display(),
            store.len()
        )));
    }
    for i in 0..count {
        let len = read_u32(&mut r, path)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name).map_err(|e| Error::io(path, e))?;
        let name = String::from_utf8_lossy(&name).into_owned();
        let rows = read_u32(&mut r, path)? as usize;
        let cols = read_u32(&mut r, path)? as usize;
        let id = ParamId(i);
        if name != store.name(id) || (rows, cols) != store.get(id).shape() {
            return Err(Error::Backend(format!(
                "{}: tensor {i} is `{name}` {rows}x{cols}, expected `{}` {:?}",
                path.display(),
                store.name(id),
                store.get(id).shape()
            )));
        }
        let mut buf = vec![0u8; rows * cols * 4];
        r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
        let target = store.get_mut(id);
        for (v, chunk) in target.data.iter_mut().zip(buf.chunks_exact(4)) {
            *v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        }
    }
    Ok(())
}
