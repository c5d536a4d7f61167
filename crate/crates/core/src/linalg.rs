//! Small dense linear algebra: a column-major matrix and an ordered
//! least-squares solver.

use serde::Serialize;

/// Relative residual norm below which a column counts as linearly dependent
/// on the columns before it.
pub const DEPENDENCE_TOLERANCE: f64 = 1e-10;

/// Dense column-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_columns(rows: usize, columns: Vec<Vec<f64>>) -> Matrix {
        let cols = columns.len();
        let mut data = Vec::with_capacity(rows * cols);
        for c in columns {
            assert_eq!(c.len(), rows, "column length mismatch");
            data.extend(c);
        }
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Matrix {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        let mut m = Matrix::zeros(n, p);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), p, "row length mismatch");
            for (j, v) in row.iter().enumerate() {
                m.set(i, j, *v);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.rows + i] = v;
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self.get(i, j)).collect()
    }

    /// `A w`.
    pub fn mul_vec(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for (j, wj) in w.iter().enumerate() {
            if *wj != 0.0 {
                for (o, a) in out.iter_mut().zip(self.column(j)) {
                    *o += a * wj;
                }
            }
        }
        out
    }

    /// `Aᵀ v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        (0..self.cols).map(|j| dot(self.column(j), v)).collect()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    /// One coefficient per requested column; dropped columns get 0.
    pub coefficients: Vec<f64>,
    /// Requested columns found to be dependent on earlier ones.
    pub dropped: Vec<usize>,
}

impl LeastSquares {
    pub fn rank_deficient(&self) -> bool {
        !self.dropped.is_empty()
    }
}

/// Solves `min ‖A[:, columns] c − b‖` by modified Gram–Schmidt with
/// re-orthogonalization, processing columns in the given order.
///
/// A column whose component orthogonal to the previously accepted columns is
/// below `DEPENDENCE_TOLERANCE` of its own norm is dropped and gets weight 0,
/// so exact linear dependencies resolve in favour of earlier columns.
pub fn least_squares(a: &Matrix, b: &[f64], columns: &[usize]) -> LeastSquares {
    assert_eq!(b.len(), a.rows());
    let mut q: Vec<Vec<f64>> = Vec::new();
    // r[k] holds the column of R for the k-th accepted column (length k+1)
    let mut r: Vec<Vec<f64>> = Vec::new();
    let mut accepted: Vec<usize> = Vec::new();
    let mut dropped = Vec::new();

    for (slot, &j) in columns.iter().enumerate() {
        let col = a.column(j);
        let original = norm(col);
        let mut v = col.to_vec();
        let mut coeffs = vec![0.0; q.len()];
        for _pass in 0..2 {
            for (k, qk) in q.iter().enumerate() {
                let c = dot(qk, &v);
                coeffs[k] += c;
                for (vi, qi) in v.iter_mut().zip(qk) {
                    *vi -= c * qi;
                }
            }
        }
        let residual = norm(&v);
        if original == 0.0 || residual <= DEPENDENCE_TOLERANCE * original || !residual.is_finite() {
            dropped.push(j);
            continue;
        }
        for vi in &mut v {
            *vi /= residual;
        }
        coeffs.push(residual);
        q.push(v);
        r.push(coeffs);
        accepted.push(slot);
    }

    // Qᵀb, projected sequentially
    let mut rhs = b.to_vec();
    let mut qtb = Vec::with_capacity(q.len());
    for qk in &q {
        let c = dot(qk, &rhs);
        for (ri, qi) in rhs.iter_mut().zip(qk) {
            *ri -= c * qi;
        }
        qtb.push(c);
    }

    // back substitution: R c = Qᵀb, R upper triangular with R[i][k] = r[k][i]
    let m = q.len();
    let mut sol = vec![0.0; m];
    for i in (0..m).rev() {
        let mut s = qtb[i];
        for k in i + 1..m {
            s -= r[k][i] * sol[k];
        }
        sol[i] = s / r[i][i];
    }

    let mut coefficients = vec![0.0; columns.len()];
    for (k, slot) in accepted.into_iter().enumerate() {
        coefficients[slot] = sol[k];
    }
    LeastSquares {
        coefficients,
        dropped,
    }
}
