//! The "SVT1" binary tensor container and atomic file helpers.
//!
//! One record is laid out as:
//!
//! ```text
//! b"SVT1" | u32 rank | u32 dims[rank] | f32 data[product(dims)]
//! ```
//!
//! All integers and floats are little-endian, data is row-major. A file may
//! hold several records back to back; their names live in a companion text
//! manifest.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SVT1";

/// A dense f32 array as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredTensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl StoredTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::Dimension(format!(
                "dims {:?} hold {} values, got {}",
                dims,
                n,
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }
}

pub fn encode_record(dims: &[usize], data: &[f32], out: &mut Vec<u8>) -> Result<()> {
    let n: usize = dims.iter().product();
    if n != data.len() {
        return Err(Error::Dimension(format!(
            "dims {:?} hold {} values, got {}",
            dims,
            n,
            data.len()
        )));
    }
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        let d = u32::try_from(d)
            .map_err(|_| Error::Dimension(format!("extent {d} does not fit in u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    out.reserve(data.len() * 4);
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|e| Error::Format(format!("truncated SVT1 record: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

/// Decode one record; `Ok(None)` at a clean end of stream.
pub fn decode_record(r: &mut impl Read) -> Result<Option<StoredTensor>> {
    let mut magic = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        let n = r
            .read(&mut magic[got..])
            .map_err(|e| Error::Format(format!("reading SVT1 magic: {e}")))?;
        if n == 0 {
            break;
        }
        got += n;
    }
    if got == 0 {
        return Ok(None);
    }
    if got < 4 || &magic != MAGIC {
        return Err(Error::Format(format!("bad SVT1 magic {:?}", &magic[..got])));
    }
    let rank = read_u32(r)? as usize;
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        dims.push(read_u32(r)? as usize);
    }
    let n: usize = dims.iter().product();
    let mut bytes = vec![0u8; n * 4];
    r.read_exact(&mut bytes)
        .map_err(|e| Error::Format(format!("truncated SVT1 data: {e}")))?;
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(Some(StoredTensor { dims, data }))
}

pub fn save_tensor(path: &Path, dims: &[usize], data: &[f32]) -> Result<()> {
    let mut buf = Vec::new();
    encode_record(dims, data, &mut buf)?;
    atomic_write(path, &buf)
}

pub fn load_tensor(path: &Path) -> Result<StoredTensor> {
    let mut all = load_tensors(path)?;
    match all.len() {
        1 => Ok(all.pop().unwrap()),
        n => Err(Error::Format(format!(
            "{}: expected one SVT1 record, found {n}",
            path.display()
        ))),
    }
}

pub fn save_tensors(path: &Path, tensors: &[StoredTensor]) -> Result<()> {
    let mut buf = Vec::new();
    for t in tensors {
        encode_record(&t.dims, &t.data, &mut buf)?;
    }
    atomic_write(path, &buf)
}

pub fn load_tensors(path: &Path) -> Result<Vec<StoredTensor>> {
    let bytes = read_file(path)?;
    let mut cursor = bytes.as_slice();
    let mut out = Vec::new();
    while let Some(t) = decode_record(&mut cursor)? {
        out.push(t);
    }
    Ok(out)
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    let bytes = read_file(path)?;
    String::from_utf8(bytes).map_err(|_| Error::Format(format!("{}: not UTF-8", path.display())))
}

fn temp_sibling(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!(".{name}.tmp-{}", std::process::id()))
}

/// Write `bytes` to a temporary sibling and rename it into place, so a
/// failure never leaves a partial file at `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let tmp = temp_sibling(path);
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = res {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

/// Populate a directory through `fill` in a temporary sibling, then swap it
/// in place of `path`.
pub fn atomic_dir<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&Path) -> Result<()>,
{
    let tmp = temp_sibling(path);
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    fs::create_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    if let Err(e) = fill(&tmp) {
        let _ = fs::remove_dir_all(&tmp);
        return Err(e);
    }
    if path.exists() {
        fs::remove_dir_all(path).map_err(|e| Error::io(path, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
