use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid_fem::{Grid, Permeability};

/// Generated isotropic permeability fields.
#[derive(Clone, Debug, PartialEq)]
pub enum SyntheticKind {
    Constant(f64),
    /// `contrast` on blocks with odd index sum, 1 elsewhere.
    Checkerboard { contrast: f64, block: Vec<usize> },
    /// `log10 k` uniform in `[-orders/2, orders/2]`, independent per cell.
    LogUniform { orders: f64, seed: u64 },
    /// Smooth random field spanning `orders` decades (a few low Fourier modes).
    Smooth { orders: f64, seed: u64 },
    /// Sinuous high-permeability channels along y in a low background,
    /// separated by `contrast`.
    Channelized { contrast: f64, seed: u64 },
}

pub fn synthetic_field(grid: &Grid, kind: &SyntheticKind) -> Result<Permeability> {
    let n = grid.n_cells();
    let counts = grid.counts();
    let values: Vec<f64> = match kind {
        SyntheticKind::Constant(k) => vec![*k; n],
        SyntheticKind::Checkerboard { contrast, block } => {
            if block.len() != grid.dim() || block.contains(&0) {
                return Err(Error::invalid(format!("checkerboard block {block:?} does not fit a {}D grid", grid.dim())));
            }
            (0..n)
                .map(|c| {
                    let ijk = grid.cell_coords(c);
                    let parity: usize = (0..grid.dim()).map(|a| ijk[a] / block[a]).sum();
                    if parity % 2 == 1 {
                        *contrast
                    } else {
                        1.0
                    }
                })
                .collect()
        }
        SyntheticKind::LogUniform { orders, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..n).map(|_| 10f64.powf(orders * (rng.gen::<f64>() - 0.5))).collect()
        }
        SyntheticKind::Smooth { orders, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let modes: Vec<([f64; 3], f64, f64)> = (0..12)
                .map(|_| {
                    let wave = [rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0), rng.gen_range(0.0..2.0)];
                    let amp = 1.0 / (1.0 + wave.iter().map(|w| w * w).sum::<f64>());
                    (wave, amp, rng.gen_range(0.0..2.0 * PI))
                })
                .collect();
            let raw: Vec<f64> = (0..n)
                .map(|c| {
                    let ijk = grid.cell_coords(c);
                    let x: Vec<f64> = (0..3).map(|a| (ijk[a] as f64 + 0.5) / counts.get(a).copied().unwrap_or(1) as f64).collect();
                    modes
                        .iter()
                        .map(|(w, amp, ph)| amp * (2.0 * PI * (w[0] * x[0] + w[1] * x[1] + w[2] * x[2]) + ph).cos())
                        .sum()
                })
                .collect();
            let (lo, hi) = raw.iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
            let span = if hi > lo { hi - lo } else { 1.0 };
            raw.iter().map(|v| 10f64.powf(orders * ((v - lo) / span - 0.5))).collect()
        }
        SyntheticKind::Channelized { contrast, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let (nx, ny) = (counts[0] as f64, counts[1] as f64);
            let nz = counts.get(2).copied().unwrap_or(1);
            let n_channels = (counts[0] / 8).max(1);
            let channels: Vec<Vec<(f64, f64, f64, f64, f64)>> = (0..nz)
                .map(|_| {
                    (0..n_channels)
                        .map(|_| {
                            let center = rng.gen_range(0.0..nx);
                            let amp = rng.gen_range(0.05..0.15) * nx;
                            let wavelength = rng.gen_range(0.3..0.8) * ny;
                            let phase = rng.gen_range(0.0..2.0 * PI);
                            let width = rng.gen_range(1.0..2.5);
                            (center, amp, wavelength, phase, width)
                        })
                        .collect()
                })
                .collect();
            let low = 1.0 / contrast.sqrt();
            let high = contrast.sqrt();
            (0..n)
                .map(|c| {
                    let ijk = grid.cell_coords(c);
                    let (x, y) = (ijk[0] as f64 + 0.5, ijk[1] as f64 + 0.5);
                    let noise = 10f64.powf(rng.gen_range(-0.5..0.5));
                    let inside = channels[ijk[2]].iter().any(|&(c0, a, l, ph, w)| {
                        (x - (c0 + a * (2.0 * PI * y / l + ph).sin())).abs() < w
                    });
                    noise * if inside { high } else { low }
                })
                .collect()
        }
    };
    Permeability::isotropic(grid.dim(), &values)
}
