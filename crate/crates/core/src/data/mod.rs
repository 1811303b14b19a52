//! MNIST ingestion and the dataset transforms used by the experiments.
//!
//! Pixels live in `[0, 1]` after [`prepare`]; [`PIXEL_MAX`] is the reversal
//! constant in that domain and must match what the network's sign-flip
//! transform is given.

mod background;
mod idx;
mod kmeans;

pub use background::{BackgroundBank, BACKGROUND_OPACITY};
pub use idx::{
    load_idx, load_split, split_paths, write_idx_images, write_idx_labels, RawMnist, Split, IMAGE_MAGIC, LABEL_MAGIC,
};
pub use kmeans::{kmeans_anchor_init, spherical_kmeans, spherical_kmeans_from, KMeansOutcome};

use std::fmt;
use std::path::Path;

use crate::container::{read_sidecar, Container};
use crate::error::{Error, Result};
use crate::numerics::{Rng, Scalar, Tensor};

pub const PIXEL_MAX: f64 = 1.0;
pub const PAD: usize = 2;
pub const SIDE: usize = 32;

/// How a dataset was derived from the raw files.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Provenance {
    Clean,
    Reversed,
    Background { seed: u64 },
    Other(String),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Clean => write!(f, "clean"),
            Provenance::Reversed => write!(f, "reversed"),
            Provenance::Background { seed } => write!(f, "background(seed={seed})"),
            Provenance::Other(s) => write!(f, "{s}"),
        }
    }
}

impl Provenance {
    pub fn parse(s: &str) -> Provenance {
        match s {
            "clean" => Provenance::Clean,
            "reversed" => Provenance::Reversed,
            other => other
                .strip_prefix("background(seed=")
                .and_then(|r| r.strip_suffix(')'))
                .and_then(|n| n.parse().ok())
                .map(|seed| Provenance::Background { seed })
                .unwrap_or_else(|| Provenance::Other(other.to_owned())),
        }
    }
}

/// Images of shape `1×H×W` stored contiguously, with labels and provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset<S = f64> {
    side: usize,
    pixels: Vec<S>,
    labels: Vec<u8>,
    provenance: Provenance,
}

impl<S: Scalar> LabeledDataset<S> {
    /// `pixels` holds `labels.len()` square images of `side × side`, values in `[0, 1]`.
    pub fn new(side: usize, pixels: Vec<S>, labels: Vec<u8>, provenance: Provenance) -> Result<Self> {
        if pixels.len() != labels.len() * side * side {
            return Err(Error::Data(format!(
                "{} pixels do not form {} images of {side}×{side}",
                pixels.len(),
                labels.len()
            )));
        }
        if pixels.iter().any(|&p| !(p >= S::zero() && p <= S::one())) {
            return Err(Error::Data("pixel outside [0, 1]".into()));
        }
        Ok(LabeledDataset {
            side,
            pixels,
            labels,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn image(&self, i: usize) -> &[S] {
        let n = self.side * self.side;
        &self.pixels[i * n..(i + 1) * n]
    }

    pub fn image_tensor(&self, i: usize) -> Tensor<S> {
        Tensor::from_parts(vec![1, self.side, self.side], self.image(i).to_vec())
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// The first `n` samples (all, if fewer).
    pub fn take(&self, n: usize) -> Self {
        let n = n.min(self.len());
        let px = self.side * self.side;
        LabeledDataset {
            side: self.side,
            pixels: self.pixels[..n * px].to_vec(),
            labels: self.labels[..n].to_vec(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let mut pixels = Vec::with_capacity(indices.len() * self.side * self.side);
        for &i in indices {
            pixels.extend_from_slice(self.image(i));
        }
        LabeledDataset {
            side: self.side,
            pixels,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn with_labels(&self, labels: Vec<u8>, provenance: Provenance) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::Data("relabeling changes the sample count".into()));
        }
        Ok(LabeledDataset {
            side: self.side,
            pixels: self.pixels.clone(),
            labels,
            provenance,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut c = Container::default();
        c.push(
            "images",
            vec![self.len(), 1, self.side, self.side],
            self.pixels.iter().map(|p| p.as_f64()).collect(),
        );
        c.push(
            "labels",
            vec![self.len()],
            self.labels.iter().map(|&l| l as f64).collect(),
        );
        c.write(path, &[("provenance".into(), self.provenance.to_string())])
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c = Container::read(path)?;
        let missing = |what: &str| Error::Format {
            path: path.to_path_buf(),
            reason: format!("no {what} entry"),
        };
        let images = c.get("images").ok_or_else(|| missing("images"))?;
        let labels = c.get("labels").ok_or_else(|| missing("labels"))?;
        let side = *images.shape.last().ok_or_else(|| missing("image shape"))?;
        let provenance = read_sidecar(path)?
            .into_iter()
            .find(|(k, _)| k == "provenance")
            .map(|(_, v)| Provenance::parse(&v))
            .unwrap_or(Provenance::Other("unknown".into()));
        LabeledDataset::new(
            side,
            images.values.iter().map(|&v| S::lit(v)).collect(),
            labels.values.iter().map(|&v| v as u8).collect(),
            provenance,
        )
    }
}

/// Zero-pads each image by two pixels per side and scales bytes by 1/255.
pub fn prepare<S: Scalar>(raw: &RawMnist) -> LabeledDataset<S> {
    let (rows, cols) = (raw.rows, raw.cols);
    let side = rows.max(cols) + 2 * PAD;
    let scale = S::lit(255.0);
    let mut pixels = vec![S::zero(); raw.len() * side * side];
    for i in 0..raw.len() {
        let img = raw.image(i);
        let dst = &mut pixels[i * side * side..(i + 1) * side * side];
        for r in 0..rows {
            for c in 0..cols {
                dst[(r + PAD) * side + c + PAD] = S::lit(img[r * cols + c] as f64) / scale;
            }
        }
    }
    LabeledDataset {
        side,
        pixels,
        labels: raw.labels.clone(),
        provenance: Provenance::Clean,
    }
}

/// `p ↦ 1 − p` for every pixel. Only clean sets are accepted unless `force`.
pub fn grayscale_reverse<S: Scalar>(ds: &LabeledDataset<S>, force: bool) -> Result<LabeledDataset<S>> {
    let provenance = match (&ds.provenance, force) {
        (Provenance::Clean, _) => Provenance::Reversed,
        (Provenance::Reversed, true) => Provenance::Clean,
        (other, true) => Provenance::Other(format!("reversed({other})")),
        (other, false) => {
            return Err(Error::Data(format!(
                "refusing to reverse a {other} dataset without force"
            )))
        }
    };
    let pm = S::lit(PIXEL_MAX);
    Ok(LabeledDataset {
        side: ds.side,
        pixels: ds.pixels.iter().map(|&p| pm - p).collect(),
        labels: ds.labels.clone(),
        provenance,
    })
}

/// Texture index per image, drawn uniformly from a stream seeded with `seed`.
pub fn texture_assignments(count: usize, bank_len: usize, seed: u64) -> Vec<usize> {
    let mut rng = Rng::new(seed);
    (0..count).map(|_| rng.below(bank_len)).collect()
}

/// Composites one random texture under each digit: `max(digit, 0.8·texture)`.
pub fn composite_background<S: Scalar>(
    ds: &LabeledDataset<S>,
    bank: &BackgroundBank,
    seed: u64,
) -> Result<LabeledDataset<S>> {
    if bank.is_empty() {
        return Err(Error::Config("background bank is empty".into()));
    }
    if ds.provenance != Provenance::Clean {
        return Err(Error::Data(format!(
            "backgrounds are composited onto clean data, got {}",
            ds.provenance
        )));
    }
    if bank.side() != ds.side {
        return Err(Error::dims(format!(
            "textures are {}×{0}, images are {}×{1}",
            bank.side(),
            ds.side
        )));
    }
    let opacity = S::lit(BACKGROUND_OPACITY);
    let assignment = texture_assignments(ds.len(), bank.len(), seed);
    let mut pixels = Vec::with_capacity(ds.pixels.len());
    for (i, &t) in assignment.iter().enumerate() {
        let tex = bank.texture(t);
        for (&p, &b) in ds.image(i).iter().zip(tex) {
            pixels.push(p.max(opacity * S::lit(b)));
        }
    }
    Ok(LabeledDataset {
        side: ds.side,
        pixels,
        labels: ds.labels.clone(),
        provenance: Provenance::Background { seed },
    })
}
