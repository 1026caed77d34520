use std::fs;
use std::ops::Range;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid_fem::Permeability;

use super::PermField;

/// Cells of the full SPE10 model along x, y and z (layers).
pub const SPE10_DIMS: [usize; 3] = [60, 220, 85];

/// A box of the model. `layers` uses 1-based layer numbers as in the
/// dataset documentation; a single layer gives a 2D field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Spe10Slice {
    pub x: Range<usize>,
    pub y: Range<usize>,
    pub layers: Range<usize>,
}

impl Spe10Slice {
    pub fn layer(layer: usize) -> Self {
        Self { x: 0..SPE10_DIMS[0], y: 0..SPE10_DIMS[1], layers: layer..layer + 1 }
    }

    fn validate(&self, dims: [usize; 3]) -> Result<()> {
        let ok = |r: &Range<usize>, lo: usize, hi: usize| r.start >= lo && r.start < r.end && r.end <= hi;
        if !ok(&self.x, 0, dims[0]) || !ok(&self.y, 0, dims[1]) || !ok(&self.layers, 1, dims[2] + 1) {
            return Err(Error::invalid(format!(
                "slice x {:?}, y {:?}, layers {:?} outside the {}x{}x{} model",
                self.x, self.y, self.layers, dims[0], dims[1], dims[2]
            )));
        }
        Ok(())
    }

    pub fn is_2d(&self) -> bool {
        self.layers.len() == 1
    }
}

/// Parses the three-block raw layout (all kx, then ky, then kz, x fastest)
/// for a model of the given size.
pub fn read_spe10(text: &str, dims: [usize; 3]) -> Result<Vec<f64>> {
    let expected = 3 * dims.iter().product::<usize>();
    let mut values = Vec::with_capacity(expected);
    for t in text.split_ascii_whitespace() {
        values.push(t.parse::<f64>().map_err(|_| Error::format(format!("bad SPE10 value '{t}'")))?);
    }
    if values.len() != expected {
        return Err(Error::format(format!("expected {expected} SPE10 values, found {}", values.len())));
    }
    Ok(values)
}

/// Extracts `slice` from raw values. A 2D slice keeps (kx, ky); a 3D slice
/// keeps all three components. Values are not converted.
pub fn extract(raw: &[f64], dims: [usize; 3], slice: &Spe10Slice) -> Result<PermField> {
    slice.validate(dims)?;
    let n = dims.iter().product::<usize>();
    let dim = if slice.is_2d() { 2 } else { 3 };
    let mut values = Vec::with_capacity(slice.x.len() * slice.y.len() * slice.layers.len() * dim);
    for z in slice.layers.clone() {
        for y in slice.y.clone() {
            for x in slice.x.clone() {
                let c = x + dims[0] * (y + dims[1] * (z - 1));
                for a in 0..dim {
                    values.push(raw[a * n + c]);
                }
            }
        }
    }
    let mut counts = vec![slice.x.len(), slice.y.len()];
    if dim == 3 {
        counts.push(slice.layers.len());
    }
    Ok(PermField { counts, perm: Permeability::new(dim, values)? })
}

/// Reads a raw SPE10 file and extracts `slice` from it.
pub fn convert_spe10(raw: &Path, slice: &Spe10Slice) -> Result<PermField> {
    let values = read_spe10(&fs::read_to_string(raw)?, SPE10_DIMS)?;
    extract(&values, SPE10_DIMS, slice)
}
