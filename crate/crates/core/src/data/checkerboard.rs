use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::learn::{LabeledDataset, LabeledPoint};
use crate::{Error, Result};

/// Cells per side of the board.
pub const GRID: usize = 4;

/// Cell side length on the unit square.
pub const CELL: f64 = 1.0 / GRID as f64;

/// Gaussian clusters centered on the 16 cells of a 4x4 board over `[0, 1]^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckerboardSpec {
    #[serde(default = "default_points_per_cell")]
    pub points_per_cell: usize,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_points_per_cell() -> usize {
    10
}

fn default_sigma() -> f64 {
    0.04
}

impl Default for CheckerboardSpec {
    fn default() -> Self {
        Self {
            points_per_cell: default_points_per_cell(),
            sigma: default_sigma(),
            seed: 0,
        }
    }
}

impl CheckerboardSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("checkerboard sigma must be positive, got {}", self.sigma)));
        }
        if self.points_per_cell == 0 {
            return Err(Error::Config("checkerboard needs at least one point per cell".into()));
        }
        Ok(())
    }

    pub fn total_points(&self) -> usize {
        GRID * GRID * self.points_per_cell
    }
}

/// `+1` on cells where `row + col` is even.
pub fn cell_label(row: usize, col: usize) -> f64 {
    if (row + col).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Center of cell `(row, col)` as `(x1, x2)`: `x1` runs along columns, `x2` along rows.
pub fn cell_center(row: usize, col: usize) -> [f64; 2] {
    [(col as f64 + 0.5) * CELL, (row as f64 + 0.5) * CELL]
}

/// `(row, col)` of the cell containing `x`; points on the far edge belong to the last cell.
pub fn cell_of(x: &[f64]) -> (usize, usize) {
    let idx = |v: f64| ((v / CELL).floor().max(0.0) as usize).min(GRID - 1);
    (idx(x[1]), idx(x[0]))
}

/// Draws `points_per_cell` points per cell, row by row. Samples falling outside
/// the unit square are redrawn.
pub fn gen_checkerboard(spec: &CheckerboardSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut points = Vec::with_capacity(spec.total_points());
    for row in 0..GRID {
        for col in 0..GRID {
            let c = cell_center(row, col);
            for _ in 0..spec.points_per_cell {
                let x = loop {
                    let x = [c[0] + noise.sample(&mut rng), c[1] + noise.sample(&mut rng)];
                    if x.iter().all(|v| (0.0..=1.0).contains(v)) {
                        break x;
                    }
                };
                points.push(LabeledPoint {
                    x: x.to_vec(),
                    y: cell_label(row, col),
                });
            }
        }
    }
    LabeledDataset::new(points)
}

pub(crate) fn shuffle_indices<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}
