//! Non-negative least squares for a handful of columns.
//!
//! The optimum of `min ‖Ax - b‖, x ≥ 0` is the unconstrained least-squares
//! solution on its own support. With few columns every support can be tried:
//! solve each subset by QR, keep the feasible ones, return the smallest
//! residual. QR factors depend only on `A`, so they are built once and reused
//! for every right-hand side.

use nalgebra::{DMatrix, DVector};

const MAX_COLUMNS: usize = 8;

struct SubsetSolver {
    /// Column indices in the subset.
    cols: Vec<usize>,
    /// Thin `Q` (m × k).
    q: DMatrix<f64>,
    /// Upper-triangular `R` (k × k).
    r: DMatrix<f64>,
}

/// Exhaustive-support NNLS solver for a fixed design matrix.
pub struct Nnls {
    rows: usize,
    /// Columns scaled to unit norm, column-major.
    scaled: DMatrix<f64>,
    norms: Vec<f64>,
    subsets: Vec<SubsetSolver>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    pub x: Vec<f64>,
    /// `‖Ax - b‖₂`.
    pub residual_norm: f64,
}

impl Nnls {
    /// `columns[j]` is column `j` of `A`. All columns must have equal length.
    ///
    /// # Panics
    /// If there are more than 8 columns or the lengths differ.
    pub fn new(columns: &[Vec<f64>]) -> Self {
        assert!(columns.len() <= MAX_COLUMNS, "at most {MAX_COLUMNS} columns");
        let rows = columns.first().map_or(0, Vec::len);
        assert!(columns.iter().all(|c| c.len() == rows), "columns differ in length");
        let ncols = columns.len();
        let norms: Vec<f64> = columns.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        let scaled = DMatrix::from_fn(rows, ncols, |i, j| if norms[j] > 0.0 { columns[j][i] / norms[j] } else { 0.0 });

        let mut subsets = Vec::new();
        for mask in 1u32..(1 << ncols) {
            let cols: Vec<usize> = (0..ncols).filter(|&j| mask >> j & 1 == 1 && norms[j] > 0.0).collect();
            if cols.len() != mask.count_ones() as usize || cols.len() > rows {
                continue;
            }
            let sub = scaled.select_columns(&cols);
            let qr = sub.qr();
            let r = qr.r();
            let well_posed = (0..cols.len()).all(|i| r[(i, i)].abs() > 1e-12);
            if well_posed {
                subsets.push(SubsetSolver { cols, q: qr.q(), r });
            }
        }
        Nnls { rows, scaled, norms, subsets }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn solve(&self, b: &[f64]) -> NnlsSolution {
        assert_eq!(b.len(), self.rows, "right-hand side length");
        let ncols = self.norms.len();
        let bv = DVector::from_column_slice(b);
        let mut best = NnlsSolution { x: vec![0.0; ncols], residual_norm: bv.norm() };
        for s in &self.subsets {
            let qtb = s.q.tr_mul(&bv);
            let Some(y) = s.r.solve_upper_triangular(&qtb) else { continue };
            if y.iter().any(|v| v.is_nan() || *v < 0.0) {
                continue;
            }
            let mut fit = DVector::zeros(self.rows);
            for (k, &j) in s.cols.iter().enumerate() {
                fit.axpy(y[k], &self.scaled.column(j), 1.0);
            }
            let res = (&bv - fit).norm();
            if res < best.residual_norm {
                let mut x = vec![0.0; ncols];
                for (k, &j) in s.cols.iter().enumerate() {
                    x[j] = y[k] / self.norms[j];
                }
                best = NnlsSolution { x, residual_norm: res };
            }
        }
        best
    }
}
