//! Layer tables: each row gives the input as `C × w × w` (optionally `+1`
//! for an augmented mean term) and the number of anchors `K`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpecRow {
    /// Conventional layer name, e.g. `C3/S4`.
    pub name: String,
    /// RECOS unit label, e.g. `S2`.
    pub recos: String,
    pub channels: usize,
    pub window: usize,
    pub augmented: bool,
    pub anchors: usize,
}

impl SpecRow {
    pub fn new(name: &str, recos: &str, channels: usize, window: usize, augmented: bool, anchors: usize) -> Self {
        SpecRow {
            name: name.into(),
            recos: recos.into(),
            channels,
            window,
            augmented,
            anchors,
        }
    }

    /// `C·w·w`, the length of one anchor.
    pub fn window_len(&self) -> usize {
        self.channels * self.window * self.window
    }

    /// `N` as listed: the window length plus one if augmented.
    pub fn input_dim(&self) -> usize {
        self.window_len() + usize::from(self.augmented)
    }

    /// Anchor weights plus one bias per anchor.
    pub fn param_count(&self) -> usize {
        self.window_len() * self.anchors + self.anchors
    }

    /// `(C×w×w)+1`, `C×w×w` or `(w×w)+1` for a single channel.
    pub fn input_label(&self) -> String {
        let body = if self.channels == 1 {
            format!("{}×{}", self.window, self.window)
        } else {
            format!("{}×{}×{}", self.channels, self.window, self.window)
        };
        if self.augmented {
            format!("({body})+1")
        } else {
            body
        }
    }

    fn parse(line: &str) -> Result<SpecRow> {
        let bad = |reason: String| Error::Spec {
            layer: line.split_whitespace().next().unwrap_or("").to_owned(),
            reason,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [name, recos, input, anchors] = fields[..] else {
            return Err(bad(format!("expected 4 fields, got {}", fields.len())));
        };
        let anchors: usize = anchors
            .parse()
            .map_err(|_| bad(format!("anchor count {anchors:?} is not an integer")))?;
        let (body, augmented) = match input.strip_suffix("+1") {
            Some(b) => (b.trim_start_matches('(').trim_end_matches(')'), true),
            None => (input.trim_start_matches('(').trim_end_matches(')'), false),
        };
        let dims = body
            .split(['x', '×'])
            .map(|d| d.parse::<usize>().map_err(|_| bad(format!("bad dimension {d:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let (channels, h, w) = match dims[..] {
            [h, w] => (1, h, w),
            [c, h, w] => (c, h, w),
            _ => return Err(bad(format!("input {input:?} is not C×h×w"))),
        };
        if h != w {
            return Err(bad(format!("non-square window {h}×{w}")));
        }
        if channels == 0 || w == 0 || anchors == 0 {
            return Err(bad("zero-sized dimension".into()));
        }
        Ok(SpecRow::new(name, recos, channels, w, augmented, anchors))
    }
}

/// An ordered list of RECOS rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArchSpec {
    pub rows: Vec<SpecRow>,
}

pub const LENET_TABLE: &str = "\
C1/S2  S1  (5x5)+1    6
C3/S4  S2  6x5x5      16
C5     S3  16x5x5     120
F6     S4  120x1x1    84
Output S5  84x1x1     10
";

pub const ALEXNET_TABLE: &str = "\
Conv_1 S1 (3x11x11)+1  96
Conv_2 S2 (96x5x5)+1   256
Conv_3 S3 (256x3x3)+1  384
Conv_4 S4 (384x3x3)+1  384
Conv_5 S5 (384x3x3)+1  256
FC_6   S6 256x1x1      4096
FC_7   S7 4096x1x1     4096
FC_8   S8 4096x1x1     1000
";

impl ArchSpec {
    /// One row per non-blank line: `name recos input K`, where `input` is
    /// `CxHxW`, `HxW` (one channel), optionally wrapped as `(...)+1`.
    /// Lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<ArchSpec> {
        let rows = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(SpecRow::parse)
            .collect::<Result<Vec<_>>>()?;
        if rows.is_empty() {
            return Err(Error::Spec {
                layer: String::new(),
                reason: "no layers".into(),
            });
        }
        Ok(ArchSpec { rows })
    }

    pub fn alexnet() -> ArchSpec {
        ArchSpec::parse(ALEXNET_TABLE).expect("built-in table parses")
    }

    /// Each row's channel count must equal the previous row's `K`.
    pub fn validate_chain(&self) -> Result<()> {
        for pair in self.rows.windows(2) {
            if pair[1].channels != pair[0].anchors {
                return Err(Error::Spec {
                    layer: pair[1].name.clone(),
                    reason: format!(
                        "expects {} input channels but {} produces {}",
                        pair[1].channels, pair[0].name, pair[0].anchors
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.rows.iter().map(SpecRow::param_count).sum()
    }
}

impl fmt::Display for ArchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<8} {:<6} {:>16} {:>6} {:>10}",
            "layer", "recos", "N", "K", "params"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<8} {:<6} {:>16} {:>6} {:>10}",
                r.name,
                r.recos,
                format!("{} = {}", r.input_label(), r.input_dim()),
                r.anchors,
                r.param_count()
            )?;
        }
        write!(f, "total parameters: {}", self.param_count())
    }
}

/// The LeNet-5 table plus the geometry needed to realize it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeNetSpec {
    pub arch: ArchSpec,
    /// Input is `1 × side × side`.
    pub input_side: usize,
    /// Pooling factor applied after each row (`1` = none).
    pub pool_after: Vec<usize>,
    pub classes: usize,
}

/// How a spec row is realized, with the feature-map shape it consumes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowPlan {
    Conv { in_shape: [usize; 3] },
    Dense { in_shape: [usize; 3] },
}

impl LeNetSpec {
    pub fn table1() -> LeNetSpec {
        LeNetSpec {
            arch: ArchSpec::parse(LENET_TABLE).expect("built-in table parses"),
            input_side: 32,
            pool_after: vec![2, 2, 1, 1, 1],
            classes: 10,
        }
    }

    /// Walks the feature-map shapes and decides per row whether it is a
    /// sliding convolution or a dense layer (window covers the whole map).
    pub fn plan(&self) -> Result<Vec<RowPlan>> {
        let rows = &self.arch.rows;
        if self.pool_after.len() != rows.len() {
            return Err(Error::Spec {
                layer: String::new(),
                reason: format!("{} pooling factors for {} rows", self.pool_after.len(), rows.len()),
            });
        }
        let mut shape = [1, self.input_side, self.input_side];
        let mut plans = Vec::with_capacity(rows.len());
        for (row, &pool) in rows.iter().zip(&self.pool_after) {
            let err = |reason: String| Error::Spec {
                layer: row.name.clone(),
                reason,
            };
            let [c, h, w] = shape;
            if row.channels != c {
                return Err(err(format!("expects {} channels, incoming map has {c}", row.channels)));
            }
            if row.window > h || row.window > w {
                return Err(err(format!("{0}×{0} window exceeds {h}×{w} map", row.window)));
            }
            let (oh, ow) = (h - row.window + 1, w - row.window + 1);
            plans.push(if oh == 1 && ow == 1 {
                RowPlan::Dense { in_shape: shape }
            } else {
                RowPlan::Conv { in_shape: shape }
            });
            if pool == 0 || oh % pool != 0 || ow % pool != 0 {
                return Err(err(format!("pooling by {pool} does not tile {oh}×{ow}")));
            }
            shape = [row.anchors, oh / pool, ow / pool];
        }
        let last = rows.last().expect("parse rejects empty tables");
        if last.anchors != self.classes {
            return Err(Error::Spec {
                layer: last.name.clone(),
                reason: format!("output has {} anchors, expected {} classes", last.anchors, self.classes),
            });
        }
        Ok(plans)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RfConvention {
    /// Pooling only spaces unit centers further apart.
    Decimation,
    /// Pooling windows widen the field like any other window.
    Standard,
}

/// Side of the input region seen by one unit of row `layer_index` (1-based).
/// The pooling that follows the requested row is not included.
pub fn receptive_field(spec: &LeNetSpec, layer_index: usize, convention: RfConvention) -> Result<usize> {
    let rows = &spec.arch.rows;
    if layer_index == 0 || layer_index > rows.len() {
        return Err(Error::Range {
            index: layer_index,
            valid: format!("1..={}", rows.len()),
        });
    }
    let (mut r, mut jump) = (1, 1);
    for (i, row) in rows.iter().take(layer_index).enumerate() {
        r += (row.window - 1) * jump;
        if i + 1 < layer_index {
            let p = spec.pool_after.get(i).copied().unwrap_or(1);
            if convention == RfConvention::Standard {
                r += (p - 1) * jump;
            }
            jump *= p;
        }
    }
    Ok(r)
}
