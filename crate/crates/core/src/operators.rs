//! Construction of the linear operators attached to divide-and-color models.
//!
//! Fixed label orders: outcomes in numeric order, subsets by size then mask,
//! set partitions in restricted-growth lexicographic order, integer partitions
//! in decreasing lexicographic order.

use num_bigint::BigInt;
use num_traits::{Num, One, Zero};

use crate::error::{DcError, Result};
use crate::matrix::{Label, RationalMatrix};
use crate::partition::{
    enumerate_partitions, enumerate_partitions_capped, integer_partitions, restricted_block_count, single_block_partition,
    Outcome, SetPartition, Subset, DEFAULT_PARTITION_CAP,
};
use crate::rational::{check_open_probability, check_probability, int, Rational};

pub(crate) fn powers<T: Num + Clone>(base: &T, max: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(max + 1);
    out.push(T::one());
    for k in 0..max {
        let next = out[k].clone() * base.clone();
        out.push(next);
    }
    out
}

/// Dense `2^n x |partitions|` values of `A_{n,p}`, rows indexed by outcome bits.
///
/// Column `sigma` has `2^{||sigma||}` nonzero entries: every union of blocks
/// `rho` gets `p^c (1-p)^{||sigma|| - c}` with `c` the number of chosen blocks.
pub(crate) fn color_operator_values<T: Num + Clone>(partitions: &[SetPartition], n: usize, p: &T) -> Vec<Vec<T>> {
    let p_pow = powers(p, n);
    let q_pow = powers(&(T::one() - p.clone()), n);
    let mut rows = vec![vec![T::zero(); partitions.len()]; 1 << n];
    for (j, sigma) in partitions.iter().enumerate() {
        let blocks = sigma.block_masks();
        let k = blocks.len();
        for choice in 0u32..1 << k {
            let mut rho = 0u32;
            for (b, mask) in blocks.iter().enumerate() {
                if choice >> b & 1 == 1 {
                    rho |= mask;
                }
            }
            let c = choice.count_ones() as usize;
            rows[rho as usize][j] = p_pow[c].clone() * q_pow[k - c].clone();
        }
    }
    rows
}

fn partition_labels(partitions: &[SetPartition]) -> Vec<Label> {
    partitions.iter().cloned().map(Label::Partition).collect()
}

fn outcome_labels(n: usize) -> Vec<Label> {
    Outcome::all(n).into_iter().map(Label::Outcome).collect()
}

fn subset_labels(subsets: &[Subset]) -> Vec<Label> {
    subsets.iter().copied().map(Label::Subset).collect()
}

/// `A_{n,p}`: entry `(rho, sigma)` is `p^{c(sigma,rho)} (1-p)^{||sigma|| - c}`
/// when `sigma ◁ rho`, else 0.
pub fn build_color_operator(n: usize, p: &Rational) -> Result<RationalMatrix> {
    build_color_operator_capped(n, p, DEFAULT_PARTITION_CAP)
}

/// [`build_color_operator`] with an explicit enumeration cap.
pub fn build_color_operator_capped(n: usize, p: &Rational, cap: usize) -> Result<RationalMatrix> {
    check_probability(p)?;
    let partitions = enumerate_partitions_capped(n, cap)?;
    let values = color_operator_values(&partitions, n, p);
    RationalMatrix::from_rows(values)?.with_labels(outcome_labels(n), partition_labels(&partitions))
}

/// `A'_{n,p}(S, sigma) = p^{||sigma_S||}`, rows in size-sorted subset order.
pub fn build_moment_operator(n: usize, p: &Rational) -> Result<RationalMatrix> {
    check_open_probability(p)?;
    let partitions = enumerate_partitions(n)?;
    let p_pow = powers(p, n);
    let subsets = Subset::size_sorted(n);
    let masks: Vec<Vec<u32>> = partitions.iter().map(SetPartition::block_masks).collect();
    Ok(RationalMatrix::from_fn(
        subset_labels(&subsets),
        partition_labels(&partitions),
        |i, j| p_pow[restricted_block_count(&masks[j], subsets[i].mask())].clone(),
    ))
}

/// `M(S, rho) = I(rho = 1 on S)`; `A' = M A`.
pub fn build_inclusion_matrix(n: usize) -> RationalMatrix {
    let subsets = Subset::size_sorted(n);
    let outcomes = Outcome::all(n);
    RationalMatrix::from_fn(subset_labels(&subsets), outcome_labels(n), |i, j| {
        if outcomes[j].is_one_on(subsets[i]) {
            Rational::one()
        } else {
            Rational::zero()
        }
    })
}

/// Subsets `T` with `|T| != 1`, size-sorted; the columns of `A''`.
pub fn single_block_index(n: usize) -> Vec<Subset> {
    Subset::size_sorted(n).into_iter().filter(|t| t.len() != 1).collect()
}

/// `A''(S, T) = p^{|S \ T| + (1 ∧ |S ∩ T|)}` for `|T| != 1`: the moment operator
/// restricted to the partitions `sigma^T`.
pub fn build_single_block_operator(n: usize, p: &Rational) -> Result<RationalMatrix> {
    check_open_probability(p)?;
    let p_pow = powers(p, n);
    let rows = Subset::size_sorted(n);
    let cols = single_block_index(n);
    Ok(RationalMatrix::from_fn(subset_labels(&rows), subset_labels(&cols), |i, j| {
        let (s, t) = (rows[i].mask(), cols[j].mask());
        let exponent = (s & !t).count_ones() as usize + usize::from(s & t != 0);
        p_pow[exponent].clone()
    }))
}

/// `B(S, S') = (-p)^{|S| - |S'|} I(S' ⊆ S)`; unit lower triangular in
/// size-sorted order.
pub fn build_b_matrix(n: usize, p: &Rational) -> Result<RationalMatrix> {
    check_open_probability(p)?;
    let neg_pow = powers(&-p.clone(), n);
    let subsets = Subset::size_sorted(n);
    let labels = subset_labels(&subsets);
    Ok(RationalMatrix::from_fn(labels.clone(), labels, |i, j| {
        let (s, s2) = (subsets[i], subsets[j]);
        if s2.is_subset_of(&s) {
            neg_pow[s.len() - s2.len()].clone()
        } else {
            Rational::zero()
        }
    }))
}

/// `p(1-p)^k + (-p)^k (1-p)`, the diagonal of `B A''` on `S ⊆ T`, `|S| = k`.
pub fn single_block_diagonal(p: &Rational, k: usize) -> Rational {
    let one_minus = Rational::one() - p;
    p * num_traits::pow(one_minus.clone(), k) + num_traits::pow(-p.clone(), k) * one_minus
}

/// Diagonal `D(S, S) = (p(1-p)^{|S|} + (-p)^{|S|}(1-p))^{-1} I(|S| != 1)`.
///
/// Fails with [`DcError::Singularity`] when a denominator with `|S| != 1`
/// vanishes, which for `p` in (0, 1) happens exactly at `p = 1/2`, `|S|` odd.
pub fn build_d_matrix(n: usize, p: &Rational) -> Result<RationalMatrix> {
    check_open_probability(p)?;
    let mut inverse = Vec::with_capacity(n + 1);
    for k in 0..=n {
        if k == 1 {
            inverse.push(Rational::zero());
            continue;
        }
        let denom = single_block_diagonal(p, k);
        if denom.is_zero() {
            return Err(DcError::Singularity { size: k });
        }
        inverse.push(Rational::one() / denom);
    }
    let subsets = Subset::size_sorted(n);
    let labels = subset_labels(&subsets);
    Ok(RationalMatrix::from_fn(labels.clone(), labels, |i, j| {
        if i == j {
            inverse[subsets[i].len()].clone()
        } else {
            Rational::zero()
        }
    }))
}

/// `C(S, S') = (-1)^{|S'| - |S|} I(S ⊆ S')` for `|S| >= 2` or `S = S' = ∅`,
/// times `(1 - |S'|)` on the `S = ∅` row, and zero on `|S| = 1` rows.
pub fn build_c_matrix(n: usize) -> RationalMatrix {
    let subsets = Subset::size_sorted(n);
    let labels = subset_labels(&subsets);
    RationalMatrix::from_fn(labels.clone(), labels, |i, j| {
        let (s, s2) = (subsets[i], subsets[j]);
        if s.len() == 1 || !s.is_subset_of(&s2) {
            return Rational::zero();
        }
        let sign = if (s2.len() - s.len()) % 2 == 0 { 1 } else { -1 };
        if s.is_empty() && !s2.is_empty() {
            int(sign * (1 - s2.len() as i64))
        } else {
            int(sign)
        }
    })
}

fn binomial(n: usize, k: usize) -> BigInt {
    (0..k).fold(BigInt::one(), |acc, i| acc * (n - i) / (i + 1))
}

/// `A^Inv_{n,p}`, rows `k = 0..=n`, columns integer partitions of `n`.
///
/// Entry `(k, pi)` is `C(n,k)^{-1}` times the probability of exactly `k` ones
/// for any set partition of shape `pi`: the per-outcome value of a level-`k`
/// string. Multiplying row `k` by `C(n,k)` gives level totals, whose columns
/// sum to 1. The probability is the `x^k` coefficient of
/// `prod_i ((1-p) + p x^{pi_i})`, which needs no enumeration of `B_n`.
pub fn build_invariant_operator(n: usize, p: &Rational) -> Result<RationalMatrix> {
    check_probability(p)?;
    if n == 0 {
        return Err(DcError::Domain("n must be positive".into()));
    }
    let one_minus = Rational::one() - p;
    let shapes = integer_partitions(n);
    let mut columns = Vec::with_capacity(shapes.len());
    for pi in &shapes {
        let mut poly = vec![Rational::zero(); n + 1];
        poly[0] = Rational::one();
        let mut degree = 0;
        for &part in pi.parts() {
            let mut next = vec![Rational::zero(); n + 1];
            for (d, c) in poly.iter().enumerate().take(degree + 1) {
                if c.is_zero() {
                    continue;
                }
                next[d] += c * &one_minus;
                next[d + part] += c * p;
            }
            poly = next;
            degree += part;
        }
        columns.push(poly);
    }
    let row_labels = (0..=n).map(Label::Level).collect();
    let col_labels = shapes.into_iter().map(Label::Shape).collect();
    Ok(RationalMatrix::from_fn(row_labels, col_labels, |k, j| {
        &columns[j][k] / Rational::from_integer(binomial(n, k))
    }))
}

/// Number of odd-sized blocks of `sigma_S`.
pub(crate) fn odd_block_count(block_masks: &[u32], s: u32) -> usize {
    block_masks
        .iter()
        .filter(|&&b| (b & s).count_ones() % 2 == 1)
        .count()
}

/// `A(S, sigma) = I(sigma_S has at most one odd-sized block)`.
pub fn build_parity_matrix(n: usize) -> Result<RationalMatrix> {
    let partitions = enumerate_partitions(n)?;
    let subsets = Subset::size_sorted(n);
    let masks: Vec<Vec<u32>> = partitions.iter().map(SetPartition::block_masks).collect();
    Ok(RationalMatrix::from_fn(
        subset_labels(&subsets),
        partition_labels(&partitions),
        |i, j| {
            if odd_block_count(&masks[j], subsets[i].mask()) <= 1 {
                Rational::one()
            } else {
                Rational::zero()
            }
        },
    ))
}

fn check_subset_function(n: usize, f: &[Rational]) -> Result<()> {
    if f.len() != 1 << n {
        return Err(DcError::Dimension {
            expected: 1 << n,
            got: f.len(),
        });
    }
    Ok(())
}

/// Weighted subset-sum transform:
/// `g(S) = w^{-|S|} sum_{S' ⊆ S} w^{|S'|} f(S')`, computed by the standard
/// `O(n 2^n)` zeta pass over bits.
fn weighted_zeta(n: usize, f: &[Rational], weight: &Rational) -> Vec<Rational> {
    let w_pow = powers(weight, n);
    let mut g: Vec<Rational> = f
        .iter()
        .enumerate()
        .map(|(mask, v)| v * &w_pow[(mask as u32).count_ones() as usize])
        .collect();
    for bit in 0..n {
        for mask in 0..g.len() {
            if mask >> bit & 1 == 1 {
                let lower = g[mask ^ (1 << bit)].clone();
                g[mask] += lower;
            }
        }
    }
    g.iter()
        .enumerate()
        .map(|(mask, v)| v / &w_pow[(mask as u32).count_ones() as usize])
        .collect()
}

/// `phi f(S) = sum_{S' ⊆ S} (-2)^{|S'| - |S|} f(S')`.
///
/// `f` is indexed by subset mask (numeric order, see [`Subset::mask`]).
pub fn mobius_phi(n: usize, f: &[Rational]) -> Result<Vec<Rational>> {
    check_subset_function(n, f)?;
    Ok(weighted_zeta(n, f, &int(-2)))
}

/// `phi^{-1} f(S) = sum_{S' ⊆ S} 2^{|S'| - |S|} f(S')`.
pub fn mobius_phi_inv(n: usize, f: &[Rational]) -> Result<Vec<Rational>> {
    check_subset_function(n, f)?;
    Ok(weighted_zeta(n, f, &int(2)))
}

/// `sigma^T` for each column of [`build_single_block_operator`].
pub fn single_block_partitions(n: usize) -> Vec<SetPartition> {
    single_block_index(n)
        .into_iter()
        .map(|t| single_block_partition(t).expect("|T| != 1"))
        .collect()
}
