//! Exact rank, kernels and affine solution sets over the rationals.
//!
//! Rows are scaled to integers and reduced with fraction-free (Bareiss)
//! elimination: every intermediate entry is a minor of the scaled matrix, so
//! each division by the previous pivot is exact and no rational arithmetic
//! happens until the final normalisation.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DcError, Result};
use crate::matrix::RationalMatrix;
use crate::rational::{serde_rational_opt_vec, serde_rational_vecs, Rational};

/// Solutions of `M x = b`: `particular + span(kernel_basis)`, or no
/// particular solution when the system is inconsistent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineSolutionSet {
    #[serde(with = "serde_rational_opt_vec")]
    pub particular: Option<Vec<Rational>>,
    #[serde(with = "serde_rational_vecs")]
    pub kernel_basis: Vec<Vec<Rational>>,
    pub dimension: usize,
    pub rank: usize,
}

impl AffineSolutionSet {
    pub fn is_consistent(&self) -> bool {
        self.particular.is_some()
    }

    /// `particular + sum_i coeffs[i] * kernel_basis[i]`.
    pub fn point(&self, coeffs: &[Rational]) -> Option<Vec<Rational>> {
        let mut x = self.particular.clone()?;
        for (c, k) in coeffs.iter().zip(&self.kernel_basis) {
            for (xi, ki) in x.iter_mut().zip(k) {
                *xi += c * ki;
            }
        }
        Some(x)
    }
}

/// Scales each row by the lcm of its denominators.
fn integer_rows<'a>(rows: impl Iterator<Item = &'a [Rational]>) -> Vec<Vec<BigInt>> {
    rows.map(|row| {
        let lcm = row
            .iter()
            .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
        row.iter()
            .map(|v| v.numer() * (&lcm / v.denom()))
            .collect()
    })
    .collect()
}

/// One Bareiss step on `row` against `pivot_row`, over columns `from..`.
fn bareiss_update(row: &mut [BigInt], pivot_row: &[BigInt], col: usize, from: usize, prev: &BigInt) {
    let pivot = &pivot_row[col];
    let factor = row[col].clone();
    if factor.is_zero() {
        for v in row[from..].iter_mut() {
            if !v.is_zero() {
                *v = &*v * pivot / prev;
            }
        }
    } else {
        for (v, p) in row[from..].iter_mut().zip(&pivot_row[from..]) {
            if v.is_zero() && p.is_zero() {
                continue;
            }
            *v = (&*v * pivot - &factor * p) / prev;
        }
    }
}

/// Forward fraction-free elimination; returns the pivot columns.
fn echelon_pivots(mut a: Vec<Vec<BigInt>>, ncols: usize) -> Vec<usize> {
    let m = a.len();
    let mut prev = BigInt::one();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == m {
            break;
        }
        let Some(found) = (r..m).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(r, found);
        let pivot_row = a[r].clone();
        a[r + 1..]
            .par_iter_mut()
            .for_each(|row| bareiss_update(row, &pivot_row, c, c, &prev));
        prev = pivot_row[c].clone();
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// Fraction-free Gauss–Jordan. On return the first `pivots.len()` rows form the
/// reduced echelon form scaled by the common pivot value, which is returned.
fn gauss_jordan(a: &mut [Vec<BigInt>], ncols: usize) -> (Vec<usize>, BigInt) {
    let m = a.len();
    let mut prev = BigInt::one();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == m {
            break;
        }
        let Some(found) = (r..m).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(r, found);
        let pivot_row = a[r].clone();
        a.par_iter_mut().enumerate().for_each(|(i, row)| {
            if i != r {
                // Rows below the pivot are zero left of `c`.
                let from = if i > r { c } else { 0 };
                bareiss_update(row, &pivot_row, c, from, &prev);
            }
        });
        prev = pivot_row[c].clone();
        pivots.push(c);
        r += 1;
    }
    (pivots, prev)
}

/// Exact rank over the rationals.
pub fn rank(m: &RationalMatrix) -> usize {
    rank_of_rows((0..m.rows()).map(|i| m.row(i)), m.cols())
}

pub(crate) fn rank_of_rows<'a>(rows: impl Iterator<Item = &'a [Rational]>, ncols: usize) -> usize {
    echelon_pivots(integer_rows(rows), ncols).len()
}

/// Reduced row echelon form of the rows of `m` (nonzero rows only) with the
/// pivot columns.
pub fn rref(m: &RationalMatrix) -> (Vec<Vec<Rational>>, Vec<usize>) {
    rref_rows(&m.row_vectors(), m.cols())
}

pub(crate) fn rref_rows(rows: &[Vec<Rational>], ncols: usize) -> (Vec<Vec<Rational>>, Vec<usize>) {
    let mut a = integer_rows(rows.iter().map(Vec::as_slice));
    let (pivots, scale) = gauss_jordan(&mut a, ncols);
    let reduced = a
        .into_iter()
        .take(pivots.len())
        .map(|row| {
            row.into_iter()
                .map(|v| Rational::new(v, scale.clone()))
                .collect()
        })
        .collect();
    (reduced, pivots)
}

/// Kernel basis from a reduced echelon form, one vector per free column.
fn kernel_from_rref(reduced: &[Vec<Rational>], pivots: &[usize], ncols: usize) -> Vec<Vec<Rational>> {
    let mut is_pivot = vec![false; ncols];
    for &p in pivots {
        is_pivot[p] = true;
    }
    (0..ncols)
        .filter(|&f| !is_pivot[f])
        .map(|f| {
            let mut v = vec![Rational::zero(); ncols];
            v[f] = Rational::one();
            for (row, &p) in reduced.iter().zip(pivots) {
                v[p] = -row[f].clone();
            }
            v
        })
        .collect()
}

/// Puts a spanning set into reduced column echelon form: the basis vectors
/// become the nonzero rows of the reduced row echelon form of the set.
fn canonical_basis(vectors: Vec<Vec<Rational>>, ncols: usize) -> Vec<Vec<Rational>> {
    if vectors.is_empty() {
        return vectors;
    }
    rref_rows(&vectors, ncols).0
}

/// Kernel basis of `m` in reduced column echelon form.
pub fn kernel(m: &RationalMatrix) -> Vec<Vec<Rational>> {
    let (reduced, pivots) = rref(m);
    canonical_basis(kernel_from_rref(&reduced, &pivots, m.cols()), m.cols())
}

/// The affine solution set of `m x = b`.
pub fn solve(m: &RationalMatrix, b: &[Rational]) -> Result<AffineSolutionSet> {
    if b.len() != m.rows() {
        return Err(DcError::Dimension {
            expected: m.rows(),
            got: b.len(),
        });
    }
    let cols = m.cols();
    let augmented: Vec<Vec<Rational>> = (0..m.rows())
        .map(|i| {
            let mut row = m.row(i).to_vec();
            row.push(b[i].clone());
            row
        })
        .collect();
    let (reduced, pivots) = rref_rows(&augmented, cols + 1);
    let consistent = pivots.last() != Some(&cols);
    let coefficient_pivots: Vec<usize> = pivots.iter().copied().filter(|&p| p < cols).collect();
    let rows: Vec<Vec<Rational>> = reduced
        .iter()
        .take(coefficient_pivots.len())
        .map(|r| r[..cols].to_vec())
        .collect();
    let particular = consistent.then(|| {
        let mut x = vec![Rational::zero(); cols];
        for (row, &p) in reduced.iter().zip(&coefficient_pivots) {
            x[p] = row[cols].clone();
        }
        x
    });
    let kernel_basis = canonical_basis(kernel_from_rref(&rows, &coefficient_pivots, cols), cols);
    let result = AffineSolutionSet {
        particular,
        dimension: kernel_basis.len(),
        rank: coefficient_pivots.len(),
        kernel_basis,
    };
    assert_eq!(result.rank + result.dimension, cols, "rank-nullity violated");
    Ok(result)
}

/// True when `m x = 0` for every vector in `vectors`.
pub fn annihilates(m: &RationalMatrix, vectors: &[Vec<Rational>]) -> bool {
    vectors
        .iter()
        .all(|v| m.mul_vec(v).is_ok_and(|image| image.iter().all(Zero::is_zero)))
}
