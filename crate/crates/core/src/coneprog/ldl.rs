//! Sparse `LDLᵀ` factorization of quasi-definite matrices given as the upper
//! triangle in compressed-column form.

const NONE: usize = usize::MAX;

/// Upper-triangular CSC matrix with every diagonal entry present.
#[derive(Debug, Clone)]
pub(crate) struct UpperCsc {
    pub n: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
}

impl UpperCsc {
    /// Position of entry `(row, col)` with `row ≤ col`.
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let (lo, hi) = (self.col_ptr[col], self.col_ptr[col + 1]);
        self.row_idx[lo..hi].binary_search(&row).ok().map(|k| lo + k)
    }

    /// `y = M x` for the symmetric matrix stored by its upper triangle.
    pub fn sym_mul(&self, values: &[f64], x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for j in 0..self.n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[p];
                let v = values[p];
                y[i] += v * x[j];
                if i != j {
                    y[j] += v * x[i];
                }
            }
        }
    }
}

/// Symbolic analysis reused across numeric factorizations with the same pattern.
#[derive(Debug, Clone)]
pub(crate) struct Ldl {
    n: usize,
    etree: Vec<usize>,
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    d: Vec<f64>,
    d_inv: Vec<f64>,
    /// Expected pivot sign per column.
    signs: Vec<f64>,
    /// Pivots replaced by dynamic regularization in the last factorization.
    pub bumped: usize,
}

impl Ldl {
    pub fn analyze(a: &UpperCsc, signs: Vec<f64>) -> Self {
        let n = a.n;
        let mut etree = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut work = vec![NONE; n];
        for j in 0..n {
            work[j] = j;
            for p in a.col_ptr[j]..a.col_ptr[j + 1] {
                let mut i = a.row_idx[p];
                debug_assert!(i <= j);
                while work[i] != j {
                    if etree[i] == NONE {
                        etree[i] = j;
                    }
                    lnz[i] += 1;
                    work[i] = j;
                    i = etree[i];
                }
            }
        }
        let mut l_ptr = vec![0; n + 1];
        for i in 0..n {
            l_ptr[i + 1] = l_ptr[i] + lnz[i];
        }
        let nnz = l_ptr[n];
        Self {
            n,
            etree,
            l_ptr,
            l_idx: vec![0; nnz],
            l_val: vec![0.0; nnz],
            d: vec![0.0; n],
            d_inv: vec![0.0; n],
            signs,
            bumped: 0,
        }
    }

    /// Numeric factorization. A pivot whose sign disagrees with the expected
    /// sign, or whose magnitude is below `eps`, is replaced by `sign·delta`.
    pub fn factor(&mut self, a: &UpperCsc, values: &[f64], eps: f64, delta: f64) -> bool {
        let n = self.n;
        let mut y_vals = vec![0.0; n];
        let mut y_mark = vec![false; n];
        let mut y_idx = vec![0usize; n];
        let mut elim = vec![0usize; n];
        let mut next_space: Vec<usize> = self.l_ptr[..n].to_vec();
        self.bumped = 0;

        for k in 0..n {
            let mut nnz_y = 0;
            self.d[k] = 0.0;
            for p in a.col_ptr[k]..a.col_ptr[k + 1] {
                let b = a.row_idx[p];
                if b == k {
                    self.d[k] = values[p];
                    continue;
                }
                y_vals[b] = values[p];
                if !y_mark[b] {
                    y_mark[b] = true;
                    elim[0] = b;
                    let mut n_e = 1;
                    let mut next = self.etree[b];
                    while next != NONE && next < k {
                        if y_mark[next] {
                            break;
                        }
                        y_mark[next] = true;
                        elim[n_e] = next;
                        n_e += 1;
                        next = self.etree[next];
                    }
                    while n_e > 0 {
                        n_e -= 1;
                        y_idx[nnz_y] = elim[n_e];
                        nnz_y += 1;
                    }
                }
            }
            for i in (0..nnz_y).rev() {
                let c = y_idx[i];
                let slot = next_space[c];
                let yc = y_vals[c];
                for j in self.l_ptr[c]..slot {
                    y_vals[self.l_idx[j]] -= self.l_val[j] * yc;
                }
                self.l_idx[slot] = k;
                let lv = yc * self.d_inv[c];
                self.l_val[slot] = lv;
                self.d[k] -= yc * lv;
                next_space[c] += 1;
                y_vals[c] = 0.0;
                y_mark[c] = false;
            }
            let sign = self.signs[k];
            if !(self.d[k] * sign > eps) {
                self.d[k] = sign * delta;
                self.bumped += 1;
            }
            self.d_inv[k] = 1.0 / self.d[k];
        }
        self.d.iter().all(|d| d.is_finite()) && self.l_val.iter().all(|v| v.is_finite())
    }

    /// Solves `L D Lᵀ x = b` in place.
    pub fn solve(&self, x: &mut [f64]) {
        for i in 0..self.n {
            let xi = x[i];
            for j in self.l_ptr[i]..self.l_ptr[i + 1] {
                x[self.l_idx[j]] -= self.l_val[j] * xi;
            }
        }
        for i in 0..self.n {
            x[i] *= self.d_inv[i];
        }
        for i in (0..self.n).rev() {
            let mut acc = x[i];
            for j in self.l_ptr[i]..self.l_ptr[i + 1] {
                acc -= self.l_val[j] * x[self.l_idx[j]];
            }
            x[i] = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    /// Upper CSC of a dense symmetric matrix, dropping exact zeros off the diagonal.
    fn from_dense(m: &DMatrix<f64>) -> (UpperCsc, Vec<f64>) {
        let n = m.nrows();
        let mut col_ptr = vec![0];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for j in 0..n {
            for i in 0..=j {
                if m[(i, j)] != 0.0 || i == j {
                    row_idx.push(i);
                    values.push(m[(i, j)]);
                }
            }
            col_ptr.push(row_idx.len());
        }
        (UpperCsc { n, col_ptr, row_idx }, values)
    }

    #[test]
    fn quasi_definite_solve_matches_dense_lu() {
        // [H Aᵀ; A −δI] with H positive definite.
        #[rustfmt::skip]
        let m = DMatrix::from_row_slice(5, 5, &[
            4.0, 1.0, 0.0, 1.0, 0.0,
            1.0, 3.0, 0.5, 0.0, 2.0,
            0.0, 0.5, 2.0, 1.0, 1.0,
            1.0, 0.0, 1.0, -0.1, 0.0,
            0.0, 2.0, 1.0, 0.0, -0.2,
        ]);
        let (a, values) = from_dense(&m);
        let mut ldl = Ldl::analyze(&a, vec![1.0, 1.0, 1.0, -1.0, -1.0]);
        assert!(ldl.factor(&a, &values, 1e-14, 1e-8));
        assert_eq!(ldl.bumped, 0);
        let b = [1.0, -2.0, 0.5, 3.0, 1.0];
        let mut x = b;
        ldl.solve(&mut x);
        let oracle = m.clone().lu().solve(&DVector::from_row_slice(&b)).unwrap();
        for k in 0..5 {
            assert!((x[k] - oracle[k]).abs() < 1e-12);
        }
        let mut y = [0.0; 5];
        a.sym_mul(&values, &x, &mut y);
        for k in 0..5 {
            assert!((y[k] - b[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_pivot_is_regularized() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let (a, values) = from_dense(&m);
        let mut ldl = Ldl::analyze(&a, vec![1.0, -1.0]);
        assert!(ldl.factor(&a, &values, 1e-14, 1e-8));
        assert_eq!(ldl.bumped, 1);
    }
}
