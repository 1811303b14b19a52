//! Per-channel response images written as binary PGM (`P5`, 8-bit).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::network::Network;
use crate::error::{Error, Result};
use crate::layers::Layer;
use crate::numerics::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DumpStage {
    /// Activated conv output.
    PrePool,
    /// After the pooling layer that follows the conv, if any.
    PostPool,
}

impl DumpStage {
    fn tag(self) -> &'static str {
        match self {
            DumpStage::PrePool => "prepool",
            DumpStage::PostPool => "postpool",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelScaling {
    pub channel: usize,
    pub min: f64,
    pub max: f64,
    /// Constant channels are written as uniform mid-gray.
    pub constant: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DumpOutcome {
    pub files: Vec<PathBuf>,
    pub sidecar: PathBuf,
    pub height: usize,
    pub width: usize,
    pub scaling: Vec<ChannelScaling>,
}

pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Min–max scales one channel to `0..=255`; a constant channel maps to 128.
pub fn scale_channel<S: Scalar>(values: &[S]) -> (Vec<u8>, ChannelScaling) {
    let lo = values.iter().fold(f64::INFINITY, |m, v| m.min(v.as_f64()));
    let hi = values.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.as_f64()));
    let constant = hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater);
    let bytes = values
        .iter()
        .map(|v| {
            if constant {
                128
            } else {
                ((v.as_f64() - lo) / (hi - lo) * 255.0).round() as u8
            }
        })
        .collect();
    (
        bytes,
        ChannelScaling {
            channel: 0,
            min: lo,
            max: hi,
            constant,
        },
    )
}

/// Writes one image per channel of conv layer `conv_index` (1-based among
/// conv layers) for `image`, plus a `…_scaling.txt` sidecar.
pub fn dump_responses<S: Scalar>(
    net: &Network<S>,
    image: &[S],
    conv_index: usize,
    stage: DumpStage,
    out_dir: &Path,
) -> Result<DumpOutcome> {
    let convs = net.conv_positions();
    if conv_index == 0 || conv_index > convs.len() {
        return Err(Error::Range {
            index: conv_index,
            valid: format!("1..={}", convs.len()),
        });
    }
    let pos = convs[conv_index - 1];
    let upto = match (stage, net.layers().get(pos + 1)) {
        (DumpStage::PostPool, Some(Layer::Pool(_))) => pos + 2,
        _ => pos + 1,
    };
    let response = net.forward_prefix(image, upto)?;
    let [c, h, w] = net.shapes()[upto];

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let prefix = format!("layer{conv_index}_{}", stage.tag());
    let mut files = Vec::with_capacity(c);
    let mut scaling = Vec::with_capacity(c);
    let mut text = String::from("# channel min max constant\n");
    for ch in 0..c {
        let (bytes, mut s) = scale_channel(&response.values()[ch * h * w..(ch + 1) * h * w]);
        s.channel = ch;
        let path = out_dir.join(format!("{prefix}_ch{ch:02}.pgm"));
        write_pgm(&path, w, h, &bytes)?;
        let _ = writeln!(text, "{ch} {:.16e} {:.16e} {}", s.min, s.max, s.constant);
        files.push(path);
        scaling.push(s);
    }
    let sidecar = out_dir.join(format!("{prefix}_scaling.txt"));
    fs::write(&sidecar, text).map_err(|e| Error::io(&sidecar, e))?;
    Ok(DumpOutcome {
        files,
        sidecar,
        height: h,
        width: w,
        scaling,
    })
}
