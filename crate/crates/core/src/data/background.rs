//! Ten procedural background textures standing in for natural scenes.

use std::f64::consts::TAU;

use crate::numerics::Rng;

/// Texture weight in the `max(digit, opacity·texture)` composite.
pub const BACKGROUND_OPACITY: f64 = 0.8;

#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundBank {
    side: usize,
    textures: Vec<Vec<f64>>,
}

impl BackgroundBank {
    pub fn new(side: usize, textures: Vec<Vec<f64>>) -> Self {
        BackgroundBank { side, textures }
    }

    /// The standard 32×32 bank: three gradients, two checkerboards, two
    /// stripe orientations, two noise scales and a flat mid-gray.
    pub fn generate(seed: u64) -> Self {
        let n = 32;
        let mut rng = Rng::new(seed);
        let coord = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
            (0..n * n).map(|i| f((i % n) as f64, (i / n) as f64)).collect()
        };
        let last = (n - 1) as f64;
        let textures = vec![
            coord(&|x, _| x / last),
            coord(&|_, y| y / last),
            coord(&|x, y| (x + y) / (2.0 * last)),
            coord(&|x, y| checker(x, y, 4.0)),
            coord(&|x, y| checker(x, y, 8.0)),
            coord(&|_, y| 0.5 + 0.5 * (TAU * y / 6.0).sin()),
            coord(&|x, y| 0.5 + 0.5 * (TAU * (x + y) / 10.0).sin()),
            smooth_noise(n, 4, &mut rng),
            smooth_noise(n, 8, &mut rng),
            vec![0.5; n * n],
        ];
        BackgroundBank { side: n, textures }
    }

    pub fn len(&self) -> usize {
        self.textures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.textures.is_empty()
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn texture(&self, i: usize) -> &[f64] {
        &self.textures[i]
    }
}

fn checker(x: f64, y: f64, cell: f64) -> f64 {
    (((x / cell).floor() + (y / cell).floor()) as i64 % 2) as f64
}

/// Uniform noise on a `grid×grid` lattice, bilinearly upsampled and rescaled
/// to span `[0, 1]`.
fn smooth_noise(n: usize, grid: usize, rng: &mut Rng) -> Vec<f64> {
    let g = grid + 1;
    let lattice: Vec<f64> = (0..g * g).map(|_| rng.uniform()).collect();
    let step = grid as f64 / (n - 1) as f64;
    let mut out = Vec::with_capacity(n * n);
    for y in 0..n {
        for x in 0..n {
            let (fx, fy) = (x as f64 * step, y as f64 * step);
            let (x0, y0) = ((fx.floor() as usize).min(grid - 1), (fy.floor() as usize).min(grid - 1));
            let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
            let at = |i: usize, j: usize| lattice[j * g + i];
            let top = at(x0, y0) * (1.0 - tx) + at(x0 + 1, y0) * tx;
            let bottom = at(x0, y0 + 1) * (1.0 - tx) + at(x0 + 1, y0 + 1) * tx;
            out.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    let lo = out.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    out.iter().map(|v| (v - lo) / (hi - lo)).collect()
}
