//! Parameter record encoding.
//!
//! Each record is `name_len: u32 | name: utf-8 | rank: u32 | dims: u32 * rank |
//! data: f32 * product(dims)`, all little-endian, data row-major.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{Mlp, Real, Tensor};

pub fn write_u32<W: Write>(w: &mut W, v: u32) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn write_record<W: Write, T: Real>(w: &mut W, name: &str, t: &Tensor<T>) -> Result<()> {
    let name_len = u32::try_from(name.len()).map_err(|_| Error::Checkpoint(format!("name too long: {name}")))?;
    write_u32(w, name_len)?;
    w.write_all(name.as_bytes())?;
    write_u32(w, t.shape().len() as u32)?;
    for &d in t.shape() {
        write_u32(w, d as u32)?;
    }
    let mut buf = Vec::with_capacity(t.len() * 4);
    for x in t.data() {
        buf.extend_from_slice(&x.to_f32().unwrap_or(f32::NAN).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads one record; `Ok(None)` on a clean end of stream.
pub fn read_record<R: Read, T: Real>(r: &mut R) -> Result<Option<(String, Tensor<T>)>> {
    let mut first = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        let n = r.read(&mut first[got..])?;
        if n == 0 {
            if got == 0 {
                return Ok(None);
            }
            return Err(Error::Checkpoint("truncated record header".into()));
        }
        got += n;
    }
    let name_len = u32::from_le_bytes(first) as usize;
    if name_len > 4096 {
        return Err(Error::Checkpoint(format!("implausible name length {name_len}")));
    }
    let mut name = vec![0u8; name_len];
    r.read_exact(&mut name).map_err(truncated)?;
    let name = String::from_utf8(name).map_err(|_| Error::Checkpoint("record name is not utf-8".into()))?;
    let rank = read_u32(r).map_err(truncated)? as usize;
    if rank > 8 {
        return Err(Error::Checkpoint(format!("{name}: implausible rank {rank}")));
    }
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(read_u32(r).map_err(truncated)? as usize);
    }
    let n: usize = shape.iter().product();
    let mut bytes = vec![0u8; n * 4];
    r.read_exact(&mut bytes).map_err(truncated)?;
    let data = bytes
        .chunks_exact(4)
        .map(|c| T::of(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
        .collect();
    Ok(Some((name, Tensor::new(shape, data)?)))
}

fn truncated(e: io::Error) -> Error {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        Error::Checkpoint("truncated record".into())
    } else {
        Error::Io(e)
    }
}

pub const MAGIC: &[u8; 4] = b"SFRL";
pub const VERSION: u32 = 1;

/// Fixed header written after the magic and version.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Header {
    pub phi_dim: u32,
    pub history: u32,
    pub rays: u32,
    pub n_actions: u32,
    pub task_count: u32,
    pub current_task: u32,
}

impl Header {
    fn fields(&self) -> [u32; 6] {
        [self.phi_dim, self.history, self.rays, self.n_actions, self.task_count, self.current_task]
    }
}

/// Named tensors read back from a checkpoint.
#[derive(Clone, Debug, Default)]
pub struct Records<T = f32> {
    map: BTreeMap<String, Tensor<T>>,
}

impl<T: Real> Records<T> {
    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.map
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing record {name}")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.map.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }

    /// An MLP stored under `{prefix}L{i}.W` / `{prefix}L{i}.b`.
    pub fn mlp(&self, prefix: &str) -> Result<Mlp<T>> {
        if !self.contains(&format!("{prefix}L0.W")) {
            return Err(Error::Checkpoint(format!("missing record {prefix}L0.W")));
        }
        Mlp::from_named(|n| self.map.get(&format!("{prefix}{n}")))
    }
}

pub fn write_checkpoint<'a, T: Real + 'a>(
    w: &mut impl Write,
    header: Header,
    records: impl IntoIterator<Item = (String, &'a Tensor<T>)>,
) -> Result<()> {
    w.write_all(MAGIC)?;
    write_u32(w, VERSION)?;
    for v in header.fields() {
        write_u32(w, v)?;
    }
    for (name, t) in records {
        write_record(w, &name, t)?;
    }
    Ok(())
}

pub fn read_checkpoint<T: Real>(r: &mut impl Read) -> Result<(Header, Records<T>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = read_u32(r).map_err(truncated)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let mut f = [0u32; 6];
    for v in &mut f {
        *v = read_u32(r).map_err(truncated)?;
    }
    let header = Header {
        phi_dim: f[0],
        history: f[1],
        rays: f[2],
        n_actions: f[3],
        task_count: f[4],
        current_task: f[5],
    };
    let mut map = BTreeMap::new();
    while let Some((name, t)) = read_record(r)? {
        if map.insert(name.clone(), t).is_some() {
            return Err(Error::Checkpoint(format!("duplicate record {name}")));
        }
    }
    Ok((header, Records { map }))
}

pub fn save_file<'a, T: Real + 'a>(
    path: &Path,
    header: Header,
    records: impl IntoIterator<Item = (String, &'a Tensor<T>)>,
) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = BufWriter::new(f);
    write_checkpoint(&mut w, header, records)?;
    w.flush().map_err(|e| Error::file(path, e))
}

pub fn load_file<T: Real>(path: &Path) -> Result<(Header, Records<T>)> {
    let f = File::open(path).map_err(|e| Error::file(path, e))?;
    read_checkpoint(&mut BufReader::new(f))
}
