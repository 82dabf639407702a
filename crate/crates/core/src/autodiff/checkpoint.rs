use std::io::{Read, Write};

use super::{AdError, ParamStore, Result, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"NDTCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

fn io_err(e: std::io::Error) -> AdError {
    AdError::Checkpoint(e.to_string())
}

fn put_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes()).map_err(io_err)
}

fn put_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes()).map_err(io_err)
}

fn put_f64s(w: &mut impl Write, data: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(data.len() * 8);
    for x in data {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf).map_err(io_err)
}

fn get_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(io_err)?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(io_err)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n.checked_mul(8).ok_or_else(|| AdError::Checkpoint("block too large".into()))?];
    r.read_exact(&mut buf).map_err(io_err)?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

/// Header, then per parameter: name, shape and values; then the Adam step
/// counter and both moment buffers in parameter order.
pub fn write_checkpoint(store: &ParamStore, w: &mut impl Write) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC).map_err(io_err)?;
    put_u32(w, CHECKPOINT_VERSION)?;
    put_u64(w, store.len() as u64)?;
    for (name, value) in store.names.iter().zip(&store.values) {
        put_u32(w, name.len() as u32)?;
        w.write_all(name.as_bytes()).map_err(io_err)?;
        put_u32(w, value.shape().len() as u32)?;
        for &d in value.shape() {
            put_u64(w, d as u64)?;
        }
        put_f64s(w, value.data())?;
    }
    put_u64(w, store.step)?;
    for (m, v) in store.m.iter().zip(&store.v) {
        put_f64s(w, m)?;
        put_f64s(w, v)?;
    }
    Ok(())
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<ParamStore> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(AdError::Checkpoint("not a checkpoint file".into()));
    }
    let version = get_u32(r)?;
    if version != CHECKPOINT_VERSION {
        return Err(AdError::Checkpoint(format!("unsupported version {version}")));
    }
    let count = get_u64(r)? as usize;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let len = get_u32(r)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name).map_err(io_err)?;
        let name = String::from_utf8(name).map_err(|e| AdError::Checkpoint(e.to_string()))?;
        let ndim = get_u32(r)? as usize;
        let shape = (0..ndim).map(|_| get_u64(r).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let data = get_f64s(r, shape.iter().product())?;
        store.add(name, Tensor::new(shape, data)?)?;
    }
    store.step = get_u64(r)?;
    for i in 0..count {
        let n = store.values[i].len();
        store.m[i] = get_f64s(r, n)?;
        store.v[i] = get_f64s(r, n)?;
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(io_err)? != 0 {
        return Err(AdError::Checkpoint("trailing bytes".into()));
    }
    Ok(store)
}
