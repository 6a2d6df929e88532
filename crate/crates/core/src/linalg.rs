//! Small dense/banded linear-algebra helpers.
//!
//! The finite-element operators on a structured grid are banded, so linear
//! solves go through a banded LU with partial pivoting instead of a dense
//! factorization.  Storage of assembled matrices elsewhere stays dense; the
//! band format is an internal solve detail.

use crate::error::Error;
use crate::{DenseMatrix, DenseVector};

/// Maximum relative asymmetry `|m - m^T|_inf / |m|_inf` accepted by the
/// symmetric assembly routines.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Returns the largest absolute entry of `m` (0 for an empty matrix).
pub fn max_abs(m: &DenseMatrix) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Largest absolute difference between `m` and its transpose.
pub fn symmetry_error(m: &DenseMatrix) -> f64 {
    let n = m.nrows().min(m.ncols());
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Square matrix with entries confined to a diagonal band.
///
/// Row `i` stores columns `[i - bl, i + bu + bl]`; the extra `bl` columns on
/// the right hold fill-in produced by row swaps during factorization.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    bl: usize,
    bu: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    /// Zero band matrix of size `n` with lower/upper bandwidths `bl`/`bu`.
    pub fn zeros(n: usize, bl: usize, bu: usize) -> Self {
        let width = 2 * bl + bu + 1;
        BandMatrix { n, bl, bu, width, data: vec![0.0; n * width] }
    }

    /// Accumulates `(row, col, value)` triplets.  Entries outside the band
    /// are rejected.  Triplet order is deterministic in all callers, so the
    /// assembled matrix is bitwise reproducible.
    pub fn from_triplets(
        n: usize,
        bl: usize,
        bu: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, Error> {
        let mut m = BandMatrix::zeros(n, bl, bu);
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!(
                    "triplet ({i},{j}) outside {n}x{n} matrix"
                )));
            }
            let (lo, hi) = (i.saturating_sub(bl), (i + bu).min(n - 1));
            if j < lo || j > hi {
                return Err(Error::InvalidArgument(format!(
                    "triplet ({i},{j}) outside band bl={bl} bu={bu}"
                )));
            }
            m.data[i * m.width + (j + bl - i)] += v;
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + (j + self.bl - i)]
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, x: &DenseVector) -> DenseVector {
        assert_eq!(x.len(), self.n);
        let mut y = DenseVector::zeros(self.n);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bl);
            let hi = (i + self.bu).min(self.n - 1);
            let mut acc = 0.0;
            for j in lo..=hi {
                acc += self.at(i, j) * x[j];
            }
            y[i] = acc;
        }
        y
    }

    /// Dense copy, for tests and small problems.
    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bl);
            let hi = (i + self.bu).min(self.n - 1);
            for j in lo..=hi {
                m[(i, j)] = self.at(i, j);
            }
        }
        m
    }

    /// LU factorization with partial pivoting, consuming the band storage.
    ///
    /// Pivoting at step `k` searches rows `k..=k+bl`; the resulting U picks
    /// up at most `bl` extra superdiagonals, which the storage layout
    /// already reserves.
    pub fn lu(mut self) -> Result<BandLu, Error> {
        let n = self.n;
        let (bl, bu, width) = (self.bl, self.bu, self.width);
        let mut piv = vec![0usize; n];
        let mut max_pivot: f64 = 0.0;
        let mut min_pivot = f64::INFINITY;
        // A pivot this small relative to the matrix scale means the matrix
        // is singular to working precision.
        let scale = self.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let pivot_floor = scale * 1e-12;
        for k in 0..n {
            let rmax = (k + bl).min(n - 1);
            // Partial pivot: largest |entry| in column k among active rows.
            let mut p = k;
            let mut best = self.at(k, k).abs();
            for r in (k + 1)..=rmax {
                let v = self.at(r, k).abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !best.is_finite() {
                return Err(Error::NonFinite(format!("band LU pivot at step {k}")));
            }
            if best <= pivot_floor {
                let cond = if best > 0.0 { max_pivot.max(scale) / best } else { f64::INFINITY };
                return Err(Error::SingularOperator { condition_estimate: cond });
            }
            piv[k] = p;
            let jmax = (k + bu + bl).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let a = k * width + (j + bl - k);
                    let b = p * width + (j + bl - p);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.at(k, k);
            max_pivot = max_pivot.max(pivot.abs());
            min_pivot = min_pivot.min(pivot.abs());
            for r in (k + 1)..=rmax {
                let m = self.at(r, k) / pivot;
                self.data[r * width + (k + bl - r)] = m;
                if m != 0.0 {
                    for j in (k + 1)..=jmax {
                        let upd = m * self.data[k * width + (j + bl - k)];
                        self.data[r * width + (j + bl - r)] -= upd;
                    }
                }
            }
        }
        Ok(BandLu { n, bl, bu, width, data: self.data, piv, condition_estimate: max_pivot / min_pivot })
    }
}

/// Factored band matrix; solves share the factorization.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    bl: usize,
    bu: usize,
    width: usize,
    data: Vec<f64>,
    piv: Vec<usize>,
    /// Ratio of largest to smallest pivot; a cheap conditioning indicator.
    pub condition_estimate: f64,
}

impl BandLu {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + (j + self.bl - i)]
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut DenseVector) {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        for k in 0..n {
            if self.piv[k] != k {
                b.swap_rows(k, self.piv[k]);
            }
            let bk = b[k];
            if bk != 0.0 {
                let rmax = (k + self.bl).min(n - 1);
                for r in (k + 1)..=rmax {
                    b[r] -= self.at(r, k) * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + self.bu + self.bl).min(n - 1);
            let mut acc = b[k];
            for j in (k + 1)..=jmax {
                acc -= self.at(k, j) * b[j];
            }
            b[k] = acc / self.at(k, k);
        }
    }

    pub fn solve_vec(&self, b: &DenseVector) -> DenseVector {
        let mut x = b.clone();
        self.solve_in_place(&mut x);
        x
    }

    /// Solves `A X = B` column by column.
    pub fn solve_mat(&self, b: &DenseMatrix) -> DenseMatrix {
        assert_eq!(b.nrows(), self.n);
        let mut out = DenseMatrix::zeros(b.nrows(), b.ncols());
        let mut col = DenseVector::zeros(self.n);
        for j in 0..b.ncols() {
            col.copy_from(&b.column(j));
            self.solve_in_place(&mut col);
            out.set_column(j, &col);
        }
        out
    }
}
