//! IDX reader/writer for the MNIST distribution files.
//!
//! Images: magic `0x00000803`, count, rows, cols (all u32 BE), then raw bytes.
//! Labels: magic `0x00000801`, count, then one byte per label.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Byte images and their labels as stored on disk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawMnist {
    pub rows: usize,
    pub cols: usize,
    /// `count × rows × cols` bytes, row-major per image.
    pub pixels: Vec<u8>,
    pub labels: Vec<u8>,
}

impl RawMnist {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.pixels[i * n..(i + 1) * n]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn prefix(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "t10k",
        }
    }
}

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| Error::Length {
            path: path.to_path_buf(),
            expected: at + 4,
            found: bytes.len(),
        })
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn check_magic(found: u32, expected: u32, path: &Path) -> Result<()> {
    if found != expected {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: format!("magic {found:#010x}, expected {expected:#010x}"),
        });
    }
    Ok(())
}

fn check_len(bytes: &[u8], expected: usize, path: &Path) -> Result<()> {
    if bytes.len() < expected {
        return Err(Error::Length {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: format!("{} bytes beyond the declared payload", bytes.len() - expected),
        });
    }
    Ok(())
}

pub fn load_idx(images: &Path, labels: &Path) -> Result<RawMnist> {
    let ib = read(images)?;
    check_magic(be_u32(&ib, 0, images)?, IMAGE_MAGIC, images)?;
    let count = be_u32(&ib, 4, images)? as usize;
    let rows = be_u32(&ib, 8, images)? as usize;
    let cols = be_u32(&ib, 12, images)? as usize;
    check_len(&ib, 16 + count * rows * cols, images)?;

    let lb = read(labels)?;
    check_magic(be_u32(&lb, 0, labels)?, LABEL_MAGIC, labels)?;
    let lcount = be_u32(&lb, 4, labels)? as usize;
    check_len(&lb, 8 + lcount, labels)?;

    if lcount != count {
        return Err(Error::Data(format!(
            "{} holds {count} images but {} holds {lcount} labels",
            images.display(),
            labels.display()
        )));
    }
    let label_bytes = lb[8..].to_vec();
    if let Some(bad) = label_bytes.iter().find(|&&l| l > 9) {
        return Err(Error::Data(format!("label {bad} outside 0..9 in {}", labels.display())));
    }
    Ok(RawMnist {
        rows,
        cols,
        pixels: ib[16..].to_vec(),
        labels: label_bytes,
    })
}

/// Resolves `<prefix>-images-idx3-ubyte` (or the `.idx3-ubyte` spelling) in `dir`.
pub fn split_paths(dir: &Path, split: Split) -> Result<(PathBuf, PathBuf)> {
    let find = |kind: &str, idx: &str| -> Result<PathBuf> {
        let p = split.prefix();
        let candidates = [
            dir.join(format!("{p}-{kind}-{idx}-ubyte")),
            dir.join(format!("{p}-{kind}.{idx}-ubyte")),
        ];
        candidates.iter().find(|c| c.is_file()).cloned().ok_or_else(|| {
            Error::io(
                &candidates[0],
                std::io::Error::new(std::io::ErrorKind::NotFound, "MNIST file not found"),
            )
        })
    };
    Ok((find("images", "idx3")?, find("labels", "idx1")?))
}

pub fn load_split(dir: &Path, split: Split) -> Result<RawMnist> {
    let (images, labels) = split_paths(dir, split)?;
    load_idx(&images, &labels)
}

pub fn write_idx_images(path: &Path, rows: usize, cols: usize, pixels: &[u8]) -> Result<()> {
    let count = pixels.len() / (rows * cols);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGE_MAGIC, count as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
