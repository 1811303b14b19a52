//! Binary container shared by network checkpoints and cached datasets.
//!
//! Layout:
//!
//! ```text
//! magic        9 bytes  "RECOSNET1"
//! entry count  u32 BE
//! per entry:
//!   name len   u32 BE, then that many UTF-8 bytes
//!   rank       u32 BE
//!   dims       rank × u32 BE
//!   payload    product(dims) × f64 LE (IEEE-754)
//! ```
//!
//! A plain-text `key=value` sidecar (`<file>.meta.txt`) carries provenance.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 9] = b"RECOSNET1";

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Container {
    pub entries: Vec<Entry>,
}

impl Container {
    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, values: Vec<f64>) {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        self.entries.push(Entry {
            name: name.into(),
            shape,
            values,
        });
    }

    pub fn get(&self, name: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let payload: usize = self.entries.iter().map(|e| e.values.len() * 8 + 64).sum();
        let mut out = Vec::with_capacity(payload + 16);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.entries.len() as u32).to_be_bytes());
        for e in &self.entries {
            out.extend_from_slice(&(e.name.len() as u32).to_be_bytes());
            out.extend_from_slice(e.name.as_bytes());
            out.extend_from_slice(&(e.shape.len() as u32).to_be_bytes());
            for &d in &e.shape {
                out.extend_from_slice(&(d as u32).to_be_bytes());
            }
            for &v in &e.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, path };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::Format {
                path: path.to_path_buf(),
                reason: "missing RECOSNET1 magic".into(),
            });
        }
        let count = r.u32()? as usize;
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Format {
                    path: path.to_path_buf(),
                    reason: "entry name is not UTF-8".into(),
                })?
                .to_owned();
            let rank = r.u32()? as usize;
            let shape = (0..rank)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let raw = r.take(n * 8)?;
            let values = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            entries.push(Entry { name, shape, values });
        }
        if r.pos != bytes.len() {
            return Err(Error::Format {
                path: path.to_path_buf(),
                reason: format!("{} trailing bytes", bytes.len() - r.pos),
            });
        }
        Ok(Container { entries })
    }

    pub fn write(&self, path: &Path, meta: &[(String, String)]) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))?;
        let sidecar = sidecar_path(path);
        let mut text = String::new();
        for (k, v) in meta {
            text.push_str(&format!("{k}={v}\n"));
        }
        fs::write(&sidecar, text).map_err(|e| Error::io(&sidecar, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Container::from_bytes(&bytes, path)
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.txt");
    PathBuf::from(s)
}

/// Reads a `key=value` sidecar; blank lines and `#` comments are skipped.
pub fn read_sidecar(path: &Path) -> Result<Vec<(String, String)>> {
    let sidecar = sidecar_path(path);
    let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
                .ok_or_else(|| Error::Format {
                    path: sidecar.clone(),
                    reason: format!("line without '=': {l:?}"),
                })
        })
        .collect()
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Length {
                path: self.path.to_path_buf(),
                expected: self.pos.saturating_add(n),
                found: self.bytes.len(),
            }),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}
