//! Banded matrix products for collective-spin operators.
//!
//! Every operator in this crate is a polynomial of degree ≤ 2 in the
//! ladder operators, so it has nonzero entries only on the diagonals
//! |i − j| ≤ 2. The propagator inner loop exploits this: multiplying a
//! banded operator into a dense density matrix costs O((2b+1)·n²)
//! instead of O(n³).

use nalgebra::DMatrix;
use num_complex::Complex64;

/// A square matrix stored as its diagonals d = −2..=2.
///
/// `diag(d)[i]` holds the entry at row `i`, column `i + d` (upper
/// diagonals) or row `i - d`... concretely: `diags[d + 2][k]` is the
/// entry `(k, k + d)` for d ≥ 0 and `(k - d, k)`-style indexing is
/// avoided by storing, for d < 0, the entry `(k - d, k)` at slot `k`,
/// i.e. column index `k` in both cases.
#[derive(Clone, Debug)]
pub(crate) struct Banded {
    pub n: usize,
    /// diags[d + 2][j] = entry (j - d, j); slots outside the matrix are 0.
    pub diags: [Vec<Complex64>; 5],
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

impl Banded {
    pub fn zeros(n: usize) -> Self {
        Banded {
            n,
            diags: std::array::from_fn(|_| vec![ZERO; n]),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        let d = j as i64 - i as i64;
        if d.abs() <= 2 {
            self.diags[(d + 2) as usize][j]
        } else {
            ZERO
        }
    }

    #[cfg(test)]
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.entry(i, j))
    }

    /// self * x, accumulated as `out += alpha * self * x`.
    ///
    /// Column-major traversal: for each column of `x` the product is a
    /// shifted diagonal-weighted sum, which keeps all accesses
    /// contiguous.
    pub fn mul_dense_acc(
        &self,
        alpha: Complex64,
        x: &DMatrix<Complex64>,
        out: &mut DMatrix<Complex64>,
    ) {
        let n = self.n;
        debug_assert_eq!(x.nrows(), n);
        let ncols = x.ncols();
        let xs = x.as_slice();
        let os = out.as_mut_slice();
        for col in 0..ncols {
            let xcol = &xs[col * n..(col + 1) * n];
            let ocol = &mut os[col * n..(col + 1) * n];
            for d in -2i64..=2 {
                let diag = &self.diags[(d + 2) as usize];
                // (self * x)[i] += self[(i, i+d)] * x[i+d]
                // self[(i, i+d)] is stored at diags[d+2][i+d].
                let (i_lo, i_hi) = if d >= 0 {
                    (0usize, n - d as usize)
                } else {
                    ((-d) as usize, n)
                };
                for i in i_lo..i_hi {
                    let k = (i as i64 + d) as usize;
                    let a = diag[k];
                    if a != ZERO {
                        ocol[i] += alpha * a * xcol[k];
                    }
                }
            }
        }
    }

    /// x * self, accumulated as `out += alpha * x * self`.
    ///
    /// Column j of the product is a linear combination of at most five
    /// columns of `x`, weighted by the entries of column j of `self`.
    pub fn mul_dense_right_acc(
        &self,
        alpha: Complex64,
        x: &DMatrix<Complex64>,
        out: &mut DMatrix<Complex64>,
    ) {
        let n = self.n;
        debug_assert_eq!(x.ncols(), n);
        let nrows = x.nrows();
        let xs = x.as_slice();
        let os = out.as_mut_slice();
        for j in 0..n {
            let ocol = &mut os[j * nrows..(j + 1) * nrows];
            for d in -2i64..=2 {
                let k = j as i64 - d;
                if k < 0 || k as usize >= n {
                    continue;
                }
                let a = self.diags[(d + 2) as usize][j];
                if a == ZERO {
                    continue;
                }
                let w = alpha * a;
                let xcol = &xs[(k as usize) * nrows..(k as usize + 1) * nrows];
                for i in 0..nrows {
                    ocol[i] += w * xcol[i];
                }
            }
        }
    }

    /// self * v for a vector, accumulated as `out += alpha * self * v`.
    pub fn mul_vec_acc(&self, alpha: Complex64, v: &[Complex64], out: &mut [Complex64]) {
        let n = self.n;
        for d in -2i64..=2 {
            let diag = &self.diags[(d + 2) as usize];
            let (i_lo, i_hi) = if d >= 0 {
                (0usize, n - d as usize)
            } else {
                ((-d) as usize, n)
            };
            for i in i_lo..i_hi {
                let k = (i as i64 + d) as usize;
                let a = diag[k];
                if a != ZERO {
                    out[i] += alpha * a * v[k];
                }
            }
        }
    }

    /// self * other where the result still fits in bandwidth 2.
    /// Panics (debug) if a product entry falls outside the band; callers
    /// only square band-1 operators or multiply band-1 by band-1.
    pub fn mul_banded(&self, other: &Banded) -> Banded {
        let n = self.n;
        let mut out = Banded::zeros(n);
        for i in 0..n {
            for d in -2i64..=2 {
                let j = i as i64 + d;
                if j < 0 || j as usize >= n {
                    continue;
                }
                let j = j as usize;
                let mut acc = ZERO;
                for e in -2i64..=2 {
                    let k = i as i64 + e;
                    if k < 0 || k as usize >= n {
                        continue;
                    }
                    acc += self.entry(i, k as usize) * other.entry(k as usize, j);
                }
                out.diags[(d + 2) as usize][j] = acc;
            }
        }
        out
    }
}
