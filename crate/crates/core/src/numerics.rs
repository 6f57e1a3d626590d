//! Dense real linear algebra for the order-k systems.
//!
//! The matrices here are `2N x 2N` for desk-scale networks, so a packed
//! row-major LU with partial pivoting is all that is needed. A factorization
//! is computed once per expansion point and reused for every order.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Row-major dense real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row vectors. All rows must share one length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: x.len(),
            });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    pub fn mul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// Elementwise maximum absolute difference.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Packed LU factors with the row permutation applied during elimination.
///
/// `P * A = L * U` where `L` has a unit diagonal (not stored) and `perm[i]`
/// is the original row that ended up in position `i`.
#[derive(Debug, Clone)]
pub struct Factorization {
    lu: DenseMatrix,
    perm: Vec<usize>,
    min_pivot: f64,
}

impl Factorization {
    pub fn dim(&self) -> usize {
        self.lu.rows
    }

    /// Smallest absolute pivot met during elimination.
    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn lower(&self) -> DenseMatrix {
        let n = self.dim();
        let mut l = DenseMatrix::identity(n);
        for i in 0..n {
            for j in 0..i {
                l[(i, j)] = self.lu[(i, j)];
            }
        }
        l
    }

    pub fn upper(&self) -> DenseMatrix {
        let n = self.dim();
        let mut u = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                u[(i, j)] = self.lu[(i, j)];
            }
        }
        u
    }

    /// Applies the row permutation to `a`, giving `P * A`.
    pub fn permute_rows(&self, a: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(a.rows, a.cols);
        for (i, &p) in self.perm.iter().enumerate() {
            out.row_mut(i).copy_from_slice(a.row(p));
        }
        out
    }
}

/// Factors a square matrix with partial (row) pivoting.
///
/// Fails with [`Error::SingularMatrix`] as soon as a pivot's magnitude is not
/// strictly above `threshold`.
pub fn lu_factor(a: &DenseMatrix, threshold: f64) -> Result<Factorization> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.rows,
            got: a.cols,
        });
    }
    let n = a.rows;
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut min_pivot = f64::INFINITY;

    for col in 0..n {
        let (piv_row, piv_abs) =
            (col..n)
                .map(|r| (r, lu[(r, col)].abs()))
                .fold(
                    (col, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );

        min_pivot = min_pivot.min(piv_abs);
        if !(piv_abs > threshold) {
            return Err(Error::SingularMatrix {
                pivot: piv_abs,
                threshold,
            });
        }

        if piv_row != col {
            for j in 0..n {
                lu.data.swap(col * n + j, piv_row * n + j);
            }
            perm.swap(col, piv_row);
        }

        let pivot = lu[(col, col)];
        for r in col + 1..n {
            let factor = lu[(r, col)] / pivot;
            lu[(r, col)] = factor;
            if factor == 0.0 {
                continue;
            }
            for j in col + 1..n {
                lu[(r, j)] -= factor * lu[(col, j)];
            }
        }
    }

    if n == 0 {
        min_pivot = 0.0;
    }
    Ok(Factorization {
        lu,
        perm,
        min_pivot,
    })
}

/// Solves `A x = rhs` with a factorization of `A`.
pub fn lu_solve(fact: &Factorization, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = fact.dim();
    if rhs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rhs.len(),
        });
    }
    let lu = &fact.lu;
    let mut x: Vec<f64> = fact.perm.iter().map(|&p| rhs[p]).collect();

    // forward: L y = P b
    for i in 1..n {
        let s = dot(&lu.row(i)[..i], &x[..i]);
        x[i] -= s;
    }
    // backward: U x = y
    for i in (0..n).rev() {
        let s = dot(&lu.row(i)[i + 1..], &x[i + 1..]);
        x[i] = (x[i] - s) / lu[(i, i)];
    }
    Ok(x)
}
