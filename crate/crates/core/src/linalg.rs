//! Small sparse/dense helpers on top of faer.
//!
//! Assembly works on a plain CSR matrix; factorizations go through faer's
//! sparse LU (row pivoting, fill-reducing ordering), which is what the
//! indefinite KKT systems of the mixed method need.

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat, MatMut, Side};

/// Compressed sparse row matrix with sorted, duplicate-free column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_unstable_by_key(|&t| (triplets[t].0, triplets[t].1));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &t in &order {
            let (r, c, v) = triplets[t];
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        for (r, yr) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            *yr = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                y[c] += v * xr;
            }
        }
        y
    }

    /// Returns `diag(s) * self`.
    pub fn scale_rows(&self, s: &[f64]) -> Self {
        let mut out = self.clone();
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out.values[k] *= s[r];
            }
        }
        out
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }
}

/// Sparse LU factorization of a square matrix, kept for repeated solves.
pub struct SparseLu {
    n: usize,
    lu: Lu<usize, f64>,
    norm1: f64,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu").field("n", &self.n).finish()
    }
}

impl SparseLu {
    /// Factors the `n x n` matrix given by triplets (duplicates summed) and
    /// verifies the backward error of one test solve.
    pub fn factor(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self, String> {
        let csr = CsrMatrix::from_triplets(n, n, triplets);
        Self::factor_csr(&csr)
    }

    pub fn factor_csr(k: &CsrMatrix) -> Result<Self, String> {
        let n = k.nrows();
        if n != k.ncols() {
            return Err(format!("matrix is {}x{}, not square", n, k.ncols()));
        }
        if k.values.iter().any(|v| !v.is_finite()) {
            return Err("matrix has non-finite entries".into());
        }
        let trips: Vec<Triplet<usize, usize, f64>> =
            k.triplets().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips)
            .map_err(|e| format!("sparse matrix creation failed: {e:?}"))?;
        let lu = mat.sp_lu().map_err(|e| format!("sparse LU failed: {e:?}"))?;
        let mut col_sums = vec![0.0f64; n];
        for (_, c, v) in k.triplets() {
            col_sums[c] += v.abs();
        }
        let norm1 = col_sums.iter().cloned().fold(0.0, f64::max);
        let out = Self { n, lu, norm1 };

        // Backward-error probe: zero pivots show up as inf/nan or a large residual.
        let x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
        let b = k.matvec(&x);
        let mut y = b.clone();
        out.solve_in_place(&mut y);
        if y.iter().any(|v| !v.is_finite()) {
            return Err("factorization produced non-finite solution (singular pivot)".into());
        }
        let r = k.matvec(&y);
        let res: f64 = r.iter().zip(&b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = out.norm1 * y.iter().fold(0.0f64, |m, v| m.max(v.abs())) + b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if res > 1e-8 * scale.max(f64::MIN_POSITIVE) {
            return Err(format!("factorization backward error {:e} too large", res / scale));
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        assert_eq!(rhs.len(), self.n);
        let view = MatMut::from_column_major_slice_mut(rhs, self.n, 1);
        self.lu.solve_in_place_with_conj(Conj::No, view);
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solves for every column of `rhs` in place.
    pub fn solve_mat(&self, rhs: &mut Mat<f64>) {
        assert_eq!(rhs.nrows(), self.n);
        self.lu.solve_in_place_with_conj(Conj::No, rhs.as_mut());
    }

    /// Hager-Higham estimate of the 1-norm condition number. Assumes the
    /// factored matrix is symmetric, so transposed solves are plain solves.
    pub fn condest_symmetric(&self) -> f64 {
        let n = self.n;
        if n == 0 {
            return 1.0;
        }
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0;
        for _ in 0..5 {
            let y = self.solve(&x);
            est = y.iter().map(|v| v.abs()).sum::<f64>();
            let xi: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
            let z = self.solve(&xi);
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |(j, m), (i, v)| if v.abs() > m { (i, v.abs()) } else { (j, m) });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if zmax <= ztx {
                break;
            }
            x.iter_mut().for_each(|v| *v = 0.0);
            x[jmax] = 1.0;
        }
        est * self.norm1
    }
}

/// Eigen-decomposition of a symmetric matrix (lower triangle is read).
/// Eigenvalues are returned in ascending order.
pub fn sym_eig(m: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>), String> {
    if m.nrows() == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| format!("eigensolver did not converge: {e:?}"))?;
    let s = evd.S();
    let vals: Vec<f64> = (0..m.nrows()).map(|i| s[i]).collect();
    Ok((vals, evd.U().to_owned()))
}

/// Solves a dense square system with partial-pivot LU.
pub fn dense_solve(m: &Mat<f64>, rhs: &Mat<f64>) -> Mat<f64> {
    use faer::linalg::solvers::Solve;
    m.partial_piv_lu().solve(rhs)
}

pub fn symmetrize(m: &mut Mat<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn mat_to_rows(m: &Mat<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Partial-pivot LU of a dense square matrix with a backward-error check.
pub struct DenseLu {
    n: usize,
    lu: faer::linalg::solvers::PartialPivLu<f64>,
}

impl std::fmt::Debug for DenseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DenseLu").field("n", &self.n).finish()
    }
}

impl DenseLu {
    pub fn factor(m: &Mat<f64>) -> Result<Self, String> {
        let n = m.nrows();
        if n != m.ncols() {
            return Err(format!("matrix is {}x{}, not square", n, m.ncols()));
        }
        let out = Self { n, lu: m.partial_piv_lu() };
        if n == 0 {
            return Ok(out);
        }
        let x = Mat::<f64>::from_fn(n, 1, |i, _| 1.0 + ((i * 7919) % 13) as f64 / 13.0);
        let b = m * &x;
        let mut y = b.clone();
        out.solve_mat(&mut y);
        let ymax = (0..n).fold(0.0f64, |a, i| a.max(y[(i, 0)].abs()));
        if !ymax.is_finite() {
            return Err("singular matrix (non-finite solution)".into());
        }
        let r = m * &y - &b;
        let norm_inf = (0..n).map(|i| (0..n).map(|j| m[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max);
        let res = (0..n).fold(0.0f64, |a, i| a.max(r[(i, 0)].abs()));
        let bmax = (0..n).fold(0.0f64, |a, i| a.max(b[(i, 0)].abs()));
        let scale = norm_inf * ymax + bmax;
        let err = (0..n).fold(0.0f64, |a, i| a.max((y[(i, 0)] - x[(i, 0)]).abs()));
        if res > 1e-8 * scale || err > 1e-4 * ymax.max(1.0) {
            return Err(format!("matrix is numerically singular (probe error {err:e})"));
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_mat(&self, rhs: &mut Mat<f64>) {
        self.lu.solve_in_place_with_conj(Conj::No, rhs.as_mut());
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut m = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        self.solve_mat(&mut m);
        (0..rhs.len()).map(|i| m[(i, 0)]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, -1.0), (0, 1, 4.0)]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.matvec(&[1.0, 1.0]), vec![7.0, -1.0]);
        assert_eq!(m.matvec_transpose(&[1.0, 1.0]), vec![2.0, 4.0]);
    }

    #[test]
    fn lu_solves_indefinite_kkt() {
        // [[2, 1], [1, 0]] is indefinite with a zero diagonal.
        let lu = SparseLu::factor(2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let x = lu.solve(&[1.0, 2.0]);
        assert!((x[0] - 2.0).abs() < 1e-14 && (x[1] + 3.0).abs() < 1e-14);
    }

    #[test]
    fn lu_reports_singular() {
        assert!(SparseLu::factor(2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]).is_err());
    }

    #[test]
    fn dense_lu_detects_singular() {
        let m = Mat::<f64>::from_fn(3, 3, |i, j| (i + j) as f64);
        assert!(DenseLu::factor(&m).is_err());
        let m = Mat::<f64>::from_fn(3, 3, |i, j| if i == j { 2.0 } else { 0.5 });
        let x = DenseLu::factor(&m).unwrap().solve(&[3.0, 3.0, 3.0]);
        assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn condest_on_diagonal() {
        let lu = SparseLu::factor(3, &[(0, 0, 1.0), (1, 1, 10.0), (2, 2, 1e-3)]).unwrap();
        let c = lu.condest_symmetric();
        assert!((c - 1e4).abs() < 1e-6 * 1e4, "{c}");
    }
}
