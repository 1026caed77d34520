use crate::error::{Error, Result};

/// Cartesian grid in 2D or 3D. Cells are numbered x-fastest.
///
/// Faces carry the RT0 flux degrees of freedom: x-faces first, then y-faces,
/// then z-faces, each block x-fastest. A 2D grid is treated as a 3D grid of
/// one cell with unit thickness, so every formula below is written once.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    counts: [usize; 3],
    sizes: [f64; 3],
    face_offsets: [usize; 4],
}

impl Grid {
    pub fn new(dim: usize, counts: &[usize], sizes: &[f64]) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::invalid(format!("dimension must be 2 or 3, got {dim}")));
        }
        if counts.len() != dim || sizes.len() != dim {
            return Err(Error::invalid(format!(
                "expected {dim} cell counts and sizes, got {} and {}",
                counts.len(),
                sizes.len()
            )));
        }
        if let Some(c) = counts.iter().find(|&&c| c == 0) {
            return Err(Error::invalid(format!("cell counts must be >= 1, got {c}")));
        }
        if let Some(h) = sizes.iter().find(|&&h| !(h > 0.0 && h.is_finite())) {
            return Err(Error::invalid(format!("cell sizes must be positive, got {h}")));
        }
        let mut c = [1usize; 3];
        let mut h = [1.0f64; 3];
        c[..dim].copy_from_slice(counts);
        h[..dim].copy_from_slice(sizes);
        let mut face_offsets = [0usize; 4];
        for axis in 0..3 {
            let n = if axis < dim {
                let mut shape = c;
                shape[axis] += 1;
                shape.iter().product()
            } else {
                0
            };
            face_offsets[axis + 1] = face_offsets[axis] + n;
        }
        Ok(Self {
            dim,
            counts: c,
            sizes: h,
            face_offsets,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts[..self.dim]
    }

    pub fn sizes(&self) -> &[f64] {
        &self.sizes[..self.dim]
    }

    pub fn n_cells(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn n_faces(&self) -> usize {
        self.face_offsets[3]
    }

    pub fn n_boundary_faces(&self) -> usize {
        (0..self.dim)
            .map(|a| 2 * self.counts.iter().enumerate().filter(|&(b, _)| b != a).map(|(_, &n)| n).product::<usize>())
            .sum()
    }

    pub fn n_interior_faces(&self) -> usize {
        self.n_faces() - self.n_boundary_faces()
    }

    /// Faces plus cells: the size of the unreduced mixed system.
    pub fn n_dofs(&self) -> usize {
        self.n_faces() + self.n_cells()
    }

    pub fn cell_volume(&self) -> f64 {
        self.sizes.iter().product()
    }

    pub fn cell_index(&self, ijk: [usize; 3]) -> usize {
        ijk[0] + self.counts[0] * (ijk[1] + self.counts[1] * ijk[2])
    }

    pub fn cell_coords(&self, cell: usize) -> [usize; 3] {
        let i = cell % self.counts[0];
        let rest = cell / self.counts[0];
        [i, rest % self.counts[1], rest / self.counts[1]]
    }

    fn face_shape(&self, axis: usize) -> [usize; 3] {
        let mut s = self.counts;
        s[axis] += 1;
        s
    }

    /// Face with position `ijk` in the axis-`axis` block; `ijk[axis]` ranges
    /// over `0..=counts[axis]`.
    pub fn face_index(&self, axis: usize, ijk: [usize; 3]) -> usize {
        let s = self.face_shape(axis);
        self.face_offsets[axis] + ijk[0] + s[0] * (ijk[1] + s[1] * ijk[2])
    }

    pub fn face_position(&self, face: usize) -> (usize, [usize; 3]) {
        let axis = (0..self.dim)
            .find(|&a| face < self.face_offsets[a + 1])
            .expect("face index out of range");
        let s = self.face_shape(axis);
        let local = face - self.face_offsets[axis];
        let i = local % s[0];
        let rest = local / s[0];
        (axis, [i, rest % s[1], rest / s[1]])
    }

    /// Cells on the negative and positive side of a face along its axis.
    pub fn face_cells(&self, face: usize) -> (Option<usize>, Option<usize>) {
        let (axis, ijk) = self.face_position(face);
        let neg = (ijk[axis] > 0).then(|| {
            let mut c = ijk;
            c[axis] -= 1;
            self.cell_index(c)
        });
        let pos = (ijk[axis] < self.counts[axis]).then(|| self.cell_index(ijk));
        (neg, pos)
    }

    pub fn is_boundary_face(&self, face: usize) -> bool {
        let (n, p) = self.face_cells(face);
        n.is_none() || p.is_none()
    }

    /// Face of `cell` on side `plus` (false = low side) of `axis`.
    pub fn cell_face(&self, cell: usize, axis: usize, plus: bool) -> usize {
        let mut ijk = self.cell_coords(cell);
        if plus {
            ijk[axis] += 1;
        }
        self.face_index(axis, ijk)
    }

    /// Interior faces in flux-dof order as `(face, negative cell, positive cell)`.
    pub fn interior_faces(&self) -> Vec<(usize, usize, usize)> {
        (0..self.n_faces())
            .filter_map(|f| match self.face_cells(f) {
                (Some(n), Some(p)) => Some((f, n, p)),
                _ => None,
            })
            .collect()
    }

    pub fn face_area(&self, axis: usize) -> f64 {
        (0..3).filter(|&b| b != axis).map(|b| self.sizes[b]).product()
    }

    /// Lower-dimensional entities bounding a face, used for face adjacency:
    /// the two end vertices of a 2D face, the four edges of a 3D face.
    /// Entities are encoded as `(kind, grid point)` tuples.
    pub fn face_boundary_entities(&self, face: usize) -> Vec<(usize, [usize; 3])> {
        let (axis, ijk) = self.face_position(face);
        let others: Vec<usize> = (0..self.dim).filter(|&b| b != axis).collect();
        if self.dim == 2 {
            let t = others[0];
            (0..2)
                .map(|s| {
                    let mut p = ijk;
                    p[t] += s;
                    (3, p)
                })
                .collect()
        } else {
            // An edge parallel to axis `e` starting at grid point p.
            let mut out = Vec::with_capacity(4);
            for (k, &t) in others.iter().enumerate() {
                let e = others[1 - k];
                for s in 0..2 {
                    let mut p = ijk;
                    p[t] += s;
                    out.push((e, p));
                }
            }
            out
        }
    }
}
