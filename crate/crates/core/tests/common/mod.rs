#![allow(dead_code)]

use dc_core::rational::{rat, Rational};
use num_traits::Zero;
use proptest::prelude::*;

/// Bell numbers from Stirling numbers of the second kind,
/// `S(n,k) = k S(n-1,k) + S(n-1,k-1)`.
pub fn bell_oracle(n: usize) -> u128 {
    let mut s = vec![vec![0u128; n + 1]; n + 1];
    s[0][0] = 1;
    for i in 1..=n {
        for k in 1..=i {
            s[i][k] = k as u128 * s[i - 1][k] + s[i - 1][k - 1];
        }
    }
    s[n].iter().sum()
}

/// Textbook Gaussian elimination over the rationals.
pub fn naive_rank(mut rows: Vec<Vec<Rational>>) -> usize {
    let cols = rows.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..cols {
        let Some(pivot) = (rank..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(rank, pivot);
        for i in 0..rows.len() {
            if i != rank && !rows[i][c].is_zero() {
                let factor = &rows[i][c] / &rows[rank][c];
                let pivot_row = rows[rank].clone();
                for (v, p) in rows[i].iter_mut().zip(pivot_row) {
                    *v -= &factor * p;
                }
            }
        }
        rank += 1;
    }
    rank
}

pub fn small_rational() -> impl Strategy<Value = Rational> {
    (-12i64..=12, 1i64..=6).prop_map(|(a, b)| rat(a, b))
}

pub fn unit_rational() -> impl Strategy<Value = Rational> {
    (0i64..=8, 1i64..=8).prop_map(|(a, b)| rat(a.min(b), b))
}

pub fn binomial(n: usize, k: usize) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

pub fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
