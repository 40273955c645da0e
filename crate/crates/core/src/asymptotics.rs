//! Solutions as `p -> 0` (single-block representations) and as `p -> 1/2`
//! (the limiting system mixing values and derivatives at 1/2).

use std::collections::BTreeMap;

use num_traits::{Num, One, Signed, Zero};

use crate::error::{DcError, Result};
use crate::linalg::{self, AffineSolutionSet};
use crate::matrix::{Label, RationalMatrix};
use crate::operators::{color_operator_values, single_block_index, single_block_partitions};
use crate::partition::{
    enumerate_partitions, restricted_block_count, single_block_partition, Outcome, SetPartition,
    Subset,
};
use crate::rational::{check_open_probability, format_rational, int, parse_rational, rat, to_f64, Rational};
use crate::solver::MeasureVector;

/// A family `p -> nu_p` of measures on `{0,1}^n` with marginals `p`.
///
/// Implementations must be re-entrant: evaluation may happen from several
/// threads at once.
pub trait MeasureFamily: Send + Sync {
    fn name(&self) -> &str;

    fn n(&self) -> usize;

    /// `nu_p` in double precision, indexed by outcome bits.
    fn evaluate(&self, p: f64) -> Result<Vec<f64>>;

    /// `nu_p` exactly, when the family has rational values at rational `p`.
    fn evaluate_exact(&self, _p: &Rational) -> Option<Result<MeasureVector>> {
        None
    }

    /// Analytic `d/dp nu_p(1^S)` at `p = 1/2`, if known.
    fn derivative_at_half(&self, _s: Subset) -> Option<f64> {
        None
    }

    /// Exact `d/dp nu_p(1^S)` at `p = 1/2`, if known.
    fn exact_derivative_at_half(&self, _s: Subset) -> Option<Rational> {
        None
    }
}

/// `nu(1^S)` for every mask, from values indexed by outcome bits.
pub fn moments_f64(values: &[f64]) -> Vec<f64> {
    let mut m = values.to_vec();
    let n = values.len().trailing_zeros() as usize;
    for bit in 0..n {
        for mask in 0..m.len() {
            if mask >> bit & 1 == 0 {
                m[mask] += m[mask | 1 << bit];
            }
        }
    }
    m
}

/// Independent sites, each 1 with probability `p`.
#[derive(Clone, Debug)]
pub struct ProductFamily {
    n: usize,
}

impl ProductFamily {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(DcError::Domain("n must be positive".into()));
        }
        Ok(Self { n })
    }
}

impl MeasureFamily for ProductFamily {
    fn name(&self) -> &str {
        "product"
    }

    fn n(&self) -> usize {
        self.n
    }

    fn evaluate(&self, p: f64) -> Result<Vec<f64>> {
        Ok(Outcome::all(self.n)
            .into_iter()
            .map(|rho| {
                let k = rho.ones() as i32;
                p.powi(k) * (1.0 - p).powi(self.n as i32 - k)
            })
            .collect())
    }

    fn evaluate_exact(&self, p: &Rational) -> Option<Result<MeasureVector>> {
        Some(MeasureVector::product(self.n, p))
    }

    fn derivative_at_half(&self, s: Subset) -> Option<f64> {
        self.exact_derivative_at_half(s).map(|v| to_f64(&v))
    }

    /// `d/dp p^{|S|} = |S| p^{|S|-1}` at 1/2.
    fn exact_derivative_at_half(&self, s: Subset) -> Option<Rational> {
        let k = s.len();
        if k == 0 {
            return Some(Rational::zero());
        }
        Some(int(k as i64) * crate::rational::pow(&rat(1, 2), k - 1))
    }
}

/// `nu_p = A_{n,p} q(p)` with `q_{sigma^T}(p) = w_T p^e` for `|T| >= 2` and the
/// remaining mass `1 - p^e sum_T w_T` on the all-singletons partition.
#[derive(Clone, Debug)]
pub struct SingleBlockMixture {
    n: usize,
    exponent: u32,
    /// Indexed like [`single_block_index`]; entry 0 (the empty set) is unused.
    weights: Vec<Rational>,
    partitions: Vec<SetPartition>,
}

impl SingleBlockMixture {
    /// `weights` maps subsets with `|T| >= 2` to `w_T > 0`; `sum w_T < 1`.
    pub fn new(n: usize, exponent: u32, weights: &BTreeMap<Subset, Rational>) -> Result<Self> {
        if n == 0 {
            return Err(DcError::Domain("n must be positive".into()));
        }
        let index = single_block_index(n);
        let mut w = vec![Rational::zero(); index.len()];
        for (t, value) in weights {
            if t.n() != n || t.len() < 2 {
                return Err(DcError::Domain(format!("weight on {t} needs |T| >= 2 within [{n}]")));
            }
            if value.is_negative() {
                return Err(DcError::Domain(format!("negative weight on {t}")));
            }
            let j = index.iter().position(|s| s == t).expect("listed subset");
            w[j] = value.clone();
        }
        if w.iter().sum::<Rational>() >= Rational::one() {
            return Err(DcError::Domain("weights must sum to less than 1".into()));
        }
        Ok(Self {
            n,
            exponent,
            weights: w,
            partitions: single_block_partitions(n),
        })
    }

    /// Equal weights `total / #{T : |T| >= 2}`.
    pub fn uniform(n: usize, exponent: u32, total: &Rational) -> Result<Self> {
        let big: Vec<Subset> = single_block_index(n).into_iter().filter(|t| !t.is_empty()).collect();
        let each = if big.is_empty() {
            Rational::zero()
        } else {
            total / int(big.len() as i64)
        };
        let weights = big.into_iter().map(|t| (t, each.clone())).collect();
        Self::new(n, exponent, &weights)
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    /// `(T, w_T)` for every `|T| >= 2`, in size-sorted order.
    pub fn weights(&self) -> Vec<(Subset, Rational)> {
        single_block_index(self.n)
            .into_iter()
            .zip(self.weights.iter().cloned())
            .skip(1)
            .collect()
    }

    /// `q(p)` over the columns of `A''` (size-sorted `T`, `|T| != 1`).
    pub fn coefficients<T: Num + Clone>(&self, p: &T, weight: impl Fn(&Rational) -> T) -> Vec<T> {
        let scale = crate::operators::powers(p, self.exponent as usize)[self.exponent as usize].clone();
        let mut q: Vec<T> = self.weights.iter().map(|w| weight(w) * scale.clone()).collect();
        let used = q.iter().skip(1).fold(T::zero(), |acc, v| acc + v.clone());
        q[0] = T::one() - used;
        q
    }

    fn image<T: Num + Clone>(&self, p: &T, q: &[T]) -> Vec<T> {
        let columns = color_operator_values(&self.partitions, self.n, p);
        columns
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .zip(q)
                    .fold(T::zero(), |acc, (a, b)| acc + a * b.clone())
            })
            .collect()
    }
}

impl MeasureFamily for SingleBlockMixture {
    fn name(&self) -> &str {
        "single-block-mixture"
    }

    fn n(&self) -> usize {
        self.n
    }

    fn evaluate(&self, p: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&p) {
            return Err(DcError::Domain(format!("p = {p} is outside [0, 1]")));
        }
        let q = self.coefficients(&p, to_f64);
        Ok(self.image(&p, &q))
    }

    fn evaluate_exact(&self, p: &Rational) -> Option<Result<MeasureVector>> {
        if let Err(e) = crate::rational::check_probability(p) {
            return Some(Err(e));
        }
        let q = self.coefficients(p, Clone::clone);
        Some(MeasureVector::new(self.n, self.image(p, &q)))
    }
}

/// Parses `w.<elements>` keys: `w.123` is `{1,2,3}`; with commas, `w.1,2,10`.
fn weight_key(key: &str, n: usize) -> Result<Option<Subset>> {
    let Some(list) = key.strip_prefix("w.") else {
        return Ok(None);
    };
    let elements: Result<Vec<usize>> = if list.contains(',') {
        list.split(',')
            .map(|e| e.trim().parse().map_err(|_| DcError::Parse(format!("bad weight key {key}"))))
            .collect()
    } else {
        list.chars()
            .map(|c| {
                c.to_digit(10)
                    .map(|d| d as usize)
                    .ok_or_else(|| DcError::Parse(format!("bad weight key {key}")))
            })
            .collect()
    };
    Subset::from_elements(n, &elements?).map(Some)
}

/// Builds a built-in family from its name and string parameters.
///
/// * `product`: `n`.
/// * `single-block-mixture`: `n`, `exponent` (default 1), and either weights
///   `w.<elements>` or `total` (default 1/2) spread evenly.
/// * `ising-triangle`: `J` (default 1).
pub fn family_from_name(name: &str, params: &BTreeMap<String, String>) -> Result<Box<dyn MeasureFamily>> {
    let get_n = || -> Result<usize> {
        params
            .get("n")
            .ok_or_else(|| DcError::Parse(format!("family {name} needs parameter n")))?
            .parse()
            .map_err(|_| DcError::Parse("n must be a positive integer".into()))
    };
    match name {
        "product" => Ok(Box::new(ProductFamily::new(get_n()?)?)),
        "single-block-mixture" => {
            let n = get_n()?;
            let exponent = match params.get("exponent") {
                Some(e) => e
                    .parse()
                    .map_err(|_| DcError::Parse("exponent must be a nonnegative integer".into()))?,
                None => 1,
            };
            let mut weights = BTreeMap::new();
            for (key, value) in params {
                if let Some(t) = weight_key(key, n)? {
                    weights.insert(t, parse_rational(value)?);
                }
            }
            if weights.is_empty() {
                let total = match params.get("total") {
                    Some(t) => parse_rational(t)?,
                    None => rat(1, 2),
                };
                Ok(Box::new(SingleBlockMixture::uniform(n, exponent, &total)?))
            } else {
                Ok(Box::new(SingleBlockMixture::new(n, exponent, &weights)?))
            }
        }
        "ising-triangle" => {
            let j = match params.get("J") {
                Some(v) => v
                    .parse()
                    .map_err(|_| DcError::Parse("J must be a number".into()))?,
                None => 1.0,
            };
            Ok(Box::new(crate::ising::IsingTriangleFamily::new(j)?))
        }
        other => Err(DcError::Domain(format!("unknown family {other:?}"))),
    }
}

/// Applies `C D B` to the moments `m` (indexed by mask): the unique solution of
/// `nu(1^S) = sum_{|T| != 1} p^{||(sigma^T)_S||} q_{sigma^T}` over rows
/// `|S| != 1`. Returns `q` over [`single_block_index`] order.
fn cdb_transform<T: Num + Clone>(n: usize, m: &[T], p: &T) -> Result<Vec<T>> {
    let neg = T::zero() - p.clone();
    let neg_pow = crate::operators::powers(&neg, n);
    let one_minus = T::one() - p.clone();
    let q_pow = crate::operators::powers(&one_minus, n);
    let size = 1usize << n;
    // y = D B m
    let mut y = vec![T::zero(); size];
    for s in 0..size {
        let k = (s as u32).count_ones() as usize;
        if k == 1 {
            continue;
        }
        let denom = p.clone() * q_pow[k].clone() + neg_pow[k].clone() * one_minus.clone();
        if denom.is_zero() {
            return Err(DcError::Singularity { size: k });
        }
        // Sum over submasks of s, including s and 0.
        let mut acc = T::zero();
        let mut sub = s;
        loop {
            let d = k - (sub as u32).count_ones() as usize;
            acc = acc + neg_pow[d].clone() * m[sub].clone();
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & s;
        }
        y[s] = acc / denom;
    }
    // x = C y
    let index = single_block_index(n);
    let full = size - 1;
    Ok(index
        .iter()
        .map(|t| {
            let s = t.mask() as usize;
            let k = t.len();
            let rest = full & !s;
            let mut acc = T::zero();
            let mut extra = rest;
            loop {
                let s2 = s | extra;
                let k2 = (s2 as u32).count_ones() as usize;
                if k2 != 1 {
                    let mut term = y[s2].clone();
                    if (k2 - k) % 2 == 1 {
                        term = T::zero() - term;
                    }
                    if k == 0 && k2 != 0 {
                        // (1 - |S'|) on the empty row.
                        let factor = (0..k2).fold(T::zero(), |a, _| a + T::one());
                        term = term * (T::one() - factor);
                    }
                    acc = acc + term;
                }
                if extra == 0 {
                    break;
                }
                extra = (extra - 1) & rest;
            }
            acc
        })
        .collect())
}

/// Solution supported on the single-block partitions `sigma^T`, `|T| != 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SmallPSolution<T> {
    pub n: usize,
    /// The sets `T`, size-sorted, starting with the empty set.
    pub subsets: Vec<Subset>,
    pub q: Vec<T>,
}

impl<T: Clone> SmallPSolution<T> {
    pub fn get(&self, t: Subset) -> Option<&T> {
        self.subsets.iter().position(|s| *s == t).map(|j| &self.q[j])
    }
}

impl SmallPSolution<Rational> {
    /// The same solution over all of `B_n` (enumeration order), zero off the
    /// single-block partitions.
    pub fn to_partition_vector(&self) -> Result<Vec<Rational>> {
        let partitions = enumerate_partitions(self.n)?;
        let mut out = vec![Rational::zero(); partitions.len()];
        for (t, v) in self.subsets.iter().zip(&self.q) {
            let sigma = single_block_partition(*t)?;
            let j = partitions.iter().position(|s| *s == sigma).expect("enumerated");
            out[j] = v.clone();
        }
        Ok(out)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.n,
            "blocks": self.subsets.iter().map(|t| Label::Subset(*t).to_json()).collect::<Vec<_>>(),
            "partitions": self.subsets.iter().map(|t| single_block_partition(*t).map(|s| s.to_string()).unwrap_or_default()).collect::<Vec<_>>(),
            "q": self.q.iter().map(format_rational).collect::<Vec<_>>(),
        })
    }
}

/// `q_{sigma^T}(p) = e_T^t C D B nu_p` for `|T| != 1`, checked by mapping back
/// through `A''`.
pub fn small_p_solve(nu: &MeasureVector, p: &Rational) -> Result<SmallPSolution<Rational>> {
    check_open_probability(p)?;
    if !crate::solver::in_range(nu, p)? {
        return Err(DcError::Precondition(format!(
            "nu is not in the range of A_{{n,p}} at p = {}",
            format_rational(p)
        )));
    }
    let n = nu.n();
    let q = cdb_transform(n, &nu.moments(), p)?;
    let subsets = single_block_index(n);
    let a2 = crate::operators::build_single_block_operator(n, p)?;
    let image = a2.mul_vec(&q)?;
    if image != nu.moment_vector() {
        return Err(DcError::Inconsistent);
    }
    Ok(SmallPSolution { n, subsets, q })
}

/// Double-precision version of [`small_p_solve`] without the range check.
pub fn small_p_solve_f64(values: &[f64], p: f64) -> Result<SmallPSolution<f64>> {
    if !(p > 0.0 && p < 1.0) {
        return Err(DcError::Domain(format!("p = {p} is outside (0, 1)")));
    }
    let n = values.len().trailing_zeros() as usize;
    if values.len() != 1 << n || n == 0 {
        return Err(DcError::Dimension {
            expected: 1 << n.max(1),
            got: values.len(),
        });
    }
    let q = cdb_transform(n, &moments_f64(values), &p)?;
    Ok(SmallPSolution {
        n,
        subsets: single_block_index(n),
        q,
    })
}

/// `p^{-1} nu_p(1^S 0^{S^c})`, the predicted leading term of `q_{sigma^S}`.
pub fn leading_term(values: &[f64], s: Subset, p: f64) -> f64 {
    values[s.mask() as usize] / p
}

/// `sum_{|S| >= 2} nu_p(1^S 0^{S^c}) / p`.
pub fn mass_sum(values: &[f64], p: f64) -> f64 {
    values
        .iter()
        .enumerate()
        .filter(|(mask, _)| mask.count_ones() >= 2)
        .map(|(_, v)| v / p)
        .sum()
}

/// One row of [`small_p_dc_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct SmallPRow {
    pub p: Rational,
    /// `q` over [`single_block_index`], when the solve succeeded.
    pub q: Option<Vec<f64>>,
    pub all_nonnegative: bool,
    pub mass_sum: f64,
    pub error: Option<String>,
}

/// Evaluates the single-block solution at each grid point and reports whether
/// it is a color representation, plus the mass-sum diagnostic.
pub fn small_p_dc_check(family: &dyn MeasureFamily, grid: &[Rational]) -> Result<Vec<SmallPRow>> {
    grid.iter()
        .map(|p| {
            if !(p.is_positive() && *p < rat(1, 2)) {
                return Err(DcError::Domain(format!(
                    "grid value {} is outside (0, 1/2)",
                    format_rational(p)
                )));
            }
            let pf = to_f64(p);
            let values = family.evaluate(pf)?;
            let diagnostic = mass_sum(&values, pf);
            let solved: Result<Vec<f64>> = match family.evaluate_exact(p) {
                Some(exact) => exact
                    .and_then(|nu| small_p_solve(&nu, p))
                    .map(|sol| sol.q.iter().map(to_f64).collect()),
                None => small_p_solve_f64(&values, pf).map(|sol| sol.q),
            };
            Ok(match solved {
                Ok(q) => SmallPRow {
                    p: p.clone(),
                    all_nonnegative: q.iter().all(|v| *v >= 0.0),
                    q: Some(q),
                    mass_sum: diagnostic,
                    error: None,
                },
                Err(e) => SmallPRow {
                    p: p.clone(),
                    q: None,
                    all_nonnegative: false,
                    mass_sum: diagnostic,
                    error: Some(e.to_string()),
                },
            })
        })
        .collect()
}

/// Right-hand side of a limiting system.
#[derive(Clone, Debug, PartialEq)]
pub enum SystemRhs {
    Exact(Vec<Rational>),
    Numeric(Vec<f64>),
}

/// `sum_sigma 2^{-||sigma_S||} q_sigma = nu_{1/2}(1^S)` for `|S|` even and
/// `sum_sigma ||sigma_S|| 2^{1-||sigma_S||} q_sigma = nu'_{1/2}(1^S)` for `|S|`
/// odd, one row per subset in size-sorted order.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitingSystem {
    pub n: usize,
    pub rows: Vec<Subset>,
    pub coefficients: RationalMatrix,
    pub rhs: SystemRhs,
}

/// Coefficient matrix of the limiting system over `B_n`.
pub fn limiting_coefficients(n: usize) -> Result<RationalMatrix> {
    let partitions = enumerate_partitions(n)?;
    let subsets = Subset::size_sorted(n);
    let masks: Vec<Vec<u32>> = partitions.iter().map(SetPartition::block_masks).collect();
    let half = rat(1, 2);
    let half_pow = crate::operators::powers(&half, n);
    Ok(RationalMatrix::from_fn(
        subsets.iter().copied().map(Label::Subset).collect(),
        partitions.into_iter().map(Label::Partition).collect(),
        |i, j| {
            let s = subsets[i];
            let blocks = restricted_block_count(&masks[j], s.mask());
            if s.len().is_multiple_of(2) {
                half_pow[blocks].clone()
            } else {
                // ||sigma_S|| 2^{1 - ||sigma_S||}; blocks >= 1 since S is nonempty.
                int(2 * blocks as i64) * &half_pow[blocks]
            }
        },
    ))
}

fn odd_rows_rhs<T: Clone>(rows: &[Subset], moments: &[T], derivative: &[T]) -> Vec<T> {
    rows.iter()
        .map(|s| {
            let m = s.mask() as usize;
            if s.len() % 2 == 0 {
                moments[m].clone()
            } else {
                derivative[m].clone()
            }
        })
        .collect()
}

/// Exact limiting system. `derivative[mask]` is `nu'_{1/2}(1^S)`; only odd
/// `|S|` entries are read.
pub fn build_limiting_system(nu_half: &MeasureVector, derivative: &[Rational]) -> Result<LimitingSystem> {
    let n = nu_half.n();
    if !nu_half.is_flip_symmetric() {
        return Err(DcError::Precondition("nu_{1/2} must satisfy nu(rho) = nu(-rho)".into()));
    }
    if derivative.len() != 1 << n {
        return Err(DcError::Dimension {
            expected: 1 << n,
            got: derivative.len(),
        });
    }
    let rows = Subset::size_sorted(n);
    let rhs = odd_rows_rhs(&rows, &nu_half.moments(), derivative);
    Ok(LimitingSystem {
        n,
        coefficients: limiting_coefficients(n)?,
        rows,
        rhs: SystemRhs::Exact(rhs),
    })
}

/// Tolerance on flip symmetry of numerically evaluated `nu_{1/2}`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Limiting system with double-precision data (values indexed by outcome bits,
/// derivatives by mask).
pub fn build_limiting_system_numeric(nu_half: &[f64], derivative: &[f64]) -> Result<LimitingSystem> {
    let n = nu_half.len().trailing_zeros() as usize;
    if n == 0 || nu_half.len() != 1 << n || derivative.len() != nu_half.len() {
        return Err(DcError::Dimension {
            expected: 1 << n.max(1),
            got: derivative.len(),
        });
    }
    let full = nu_half.len() - 1;
    if (0..nu_half.len()).any(|i| (nu_half[i] - nu_half[full ^ i]).abs() > SYMMETRY_TOLERANCE) {
        return Err(DcError::Precondition("nu_{1/2} must satisfy nu(rho) = nu(-rho)".into()));
    }
    let rows = Subset::size_sorted(n);
    let rhs = odd_rows_rhs(&rows, &moments_f64(nu_half), derivative);
    Ok(LimitingSystem {
        n,
        coefficients: limiting_coefficients(n)?,
        rows,
        rhs: SystemRhs::Numeric(rhs),
    })
}

/// Numeric solution set of a limiting system.
#[derive(Clone, Debug, PartialEq)]
pub struct NumericSolution {
    /// Minimum-norm solution.
    pub particular: Vec<f64>,
    /// Exact kernel of the (rational) coefficient matrix, converted.
    pub kernel_basis: Vec<Vec<f64>>,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LimitSolution {
    Exact(AffineSolutionSet),
    Numeric(NumericSolution),
}

/// Largest residual accepted for numeric limiting systems.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;

/// Minimum-norm least-squares solution of `a x = b` and its max-norm residual.
pub fn least_squares(a: &nalgebra::DMatrix<f64>, b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let rhs = nalgebra::DVector::from_column_slice(b);
    let svd = a.clone().svd(true, true);
    let x = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| DcError::Numeric(e.to_string()))?;
    let residual = (a * &x - rhs).amax();
    Ok((x.iter().copied().collect(), residual))
}

/// The solution set of the limiting system: the set of subsequential limits
/// of formal solutions as `p -> 1/2`.
pub fn limit_solutions(system: &LimitingSystem) -> Result<LimitSolution> {
    match &system.rhs {
        SystemRhs::Exact(b) => {
            let set = linalg::solve(&system.coefficients, b)?;
            if !set.is_consistent() {
                return Err(DcError::Inconsistent);
            }
            Ok(LimitSolution::Exact(set))
        }
        SystemRhs::Numeric(b) => {
            let a = system.coefficients.to_nalgebra();
            let (particular, residual) = least_squares(&a, b)?;
            if residual > RESIDUAL_TOLERANCE {
                return Err(DcError::Inconsistent);
            }
            let kernel_basis = linalg::kernel(&system.coefficients)
                .iter()
                .map(|k| k.iter().map(to_f64).collect())
                .collect();
            Ok(LimitSolution::Numeric(NumericSolution {
                particular,
                kernel_basis,
                residual,
            }))
        }
    }
}

/// Step sizes of the central differences in [`numeric_derivative_at_half`].
pub const DERIVATIVE_STEPS: [f64; 2] = [1e-3, 1e-4];

/// `d/dp nu_p(1^S)` at 1/2: central differences at both
/// [`DERIVATIVE_STEPS`], combined by Richardson extrapolation (the error of a
/// central difference is `O(eps^2)`, and the steps differ by a factor 10).
pub fn numeric_derivative_at_half(family: &dyn MeasureFamily, s: Subset) -> Result<f64> {
    if s.n() != family.n() {
        return Err(DcError::Dimension {
            expected: family.n(),
            got: s.n(),
        });
    }
    let moment = |p: f64| -> Result<f64> { Ok(moments_f64(&family.evaluate(p)?)[s.mask() as usize]) };
    let central = |eps: f64| -> Result<f64> { Ok((moment(0.5 + eps)? - moment(0.5 - eps)?) / (2.0 * eps)) };
    let coarse = central(DERIVATIVE_STEPS[0])?;
    let fine = central(DERIVATIVE_STEPS[1])?;
    Ok((100.0 * fine - coarse) / 99.0)
}

/// `nu'_{1/2}(1^S)` for every mask: the family's analytic value when it has
/// one, otherwise [`numeric_derivative_at_half`].
pub fn derivatives_at_half(family: &dyn MeasureFamily) -> Result<Vec<f64>> {
    Subset::all(family.n())
        .into_iter()
        .map(|s| match family.derivative_at_half(s) {
            Some(v) => Ok(v),
            None => numeric_derivative_at_half(family, s),
        })
        .collect()
}

/// Builds and solves the limiting system of a family, exactly when the family
/// supplies exact values and derivatives at 1/2.
pub fn limit_for_family(family: &dyn MeasureFamily) -> Result<(LimitingSystem, LimitSolution)> {
    let n = family.n();
    let exact_derivatives: Option<Vec<Rational>> = Subset::all(n)
        .into_iter()
        .map(|s| family.exact_derivative_at_half(s))
        .collect();
    let system = match (family.evaluate_exact(&rat(1, 2)), exact_derivatives) {
        (Some(nu), Some(derivative)) => build_limiting_system(&nu?, &derivative)?,
        _ => build_limiting_system_numeric(&family.evaluate(0.5)?, &derivatives_at_half(family)?)?,
    };
    let solution = limit_solutions(&system)?;
    Ok((system, solution))
}

/// `sum_{T ⊆ S} (-2)^{|T|} f(T)` for every `S`, `f` indexed by mask.
pub fn signed_subset_sums<T: Num + Clone>(n: usize, f: &[T]) -> Vec<T> {
    let two = T::one() + T::one();
    let minus_two = T::zero() - two;
    let mut g: Vec<T> = f
        .iter()
        .enumerate()
        .map(|(mask, v)| {
            let k = (mask as u32).count_ones() as usize;
            crate::operators::powers(&minus_two, k)[k].clone() * v.clone()
        })
        .collect();
    for bit in 0..n {
        for mask in 0..g.len() {
            if mask >> bit & 1 == 1 {
                let lower = g[mask ^ (1 << bit)].clone();
                g[mask] = g[mask].clone() + lower;
            }
        }
    }
    g
}

/// For flip-symmetric `nu`, the odd-`|S|` sums
/// `sum_{T ⊆ S} (-2)^{|T|} nu(1^T)`, which all vanish.
pub fn odd_row_sums(nu: &MeasureVector) -> Vec<(Subset, Rational)> {
    let sums = signed_subset_sums(nu.n(), &nu.moments());
    Subset::size_sorted(nu.n())
        .into_iter()
        .filter(|s| s.len() % 2 == 1)
        .map(|s| (s, sums[s.mask() as usize].clone()))
        .collect()
}

/// The even-`|S|` sums `sum_{T ⊆ S} (-2)^{|T|} nu'_{1/2}(1^T)` of derivatives
/// (indexed by mask), which vanish for flip-symmetric families.
pub fn even_row_derivative_sums(n: usize, derivative: &[f64]) -> Vec<(Subset, f64)> {
    let sums = signed_subset_sums(n, derivative);
    Subset::size_sorted(n)
        .into_iter()
        .filter(|s| s.len() % 2 == 0)
        .map(|s| (s, sums[s.mask() as usize]))
        .collect()
}

/// Max-norm of `coefficients x - rhs` in double precision.
pub fn limiting_residual(system: &LimitingSystem, x: &[f64]) -> f64 {
    let b: Vec<f64> = match &system.rhs {
        SystemRhs::Exact(v) => v.iter().map(to_f64).collect(),
        SystemRhs::Numeric(v) => v.clone(),
    };
    let a = system.coefficients.to_f64_rows();
    a.iter()
        .zip(&b)
        .map(|(row, bi)| (row.iter().zip(x).map(|(u, v)| u * v).sum::<f64>() - bi).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_family_small_p() {
        let nu = MeasureVector::product(3, &rat(1, 5)).unwrap();
        let sol = small_p_solve(&nu, &rat(1, 5)).unwrap();
        assert!(sol.q[0].is_one());
        assert!(sol.q[1..].iter().all(Zero::is_zero));
    }

    #[test]
    fn mixture_recovered_exactly() {
        let family = SingleBlockMixture::uniform(4, 1, &rat(1, 2)).unwrap();
        let p = rat(1, 7);
        let nu = family.evaluate_exact(&p).unwrap().unwrap();
        assert!(nu.is_probability());
        let sol = small_p_solve(&nu, &p).unwrap();
        assert_eq!(sol.q, family.coefficients(&p, Clone::clone));
    }

    #[test]
    fn singular_at_half() {
        let nu = MeasureVector::product(3, &rat(1, 2)).unwrap();
        assert_eq!(
            small_p_solve(&nu, &rat(1, 2)).unwrap_err(),
            DcError::Singularity { size: 3 }
        );
    }

    #[test]
    fn limiting_coefficient_examples() {
        let a = limiting_coefficients(3).unwrap();
        let rows = Subset::size_sorted(3);
        // Column 0 is the one-block partition, the last column all singletons.
        for (i, s) in rows.iter().enumerate() {
            if s.len() % 2 == 0 {
                assert_eq!(*a.get(i, a.cols() - 1), crate::rational::pow(&rat(1, 2), s.len()));
            } else {
                assert!(a.get(i, 0).is_one());
            }
        }
    }

    #[test]
    fn product_limit_is_singletons() {
        let family = ProductFamily::new(3).unwrap();
        let (_, solution) = limit_for_family(&family).unwrap();
        let LimitSolution::Exact(set) = solution else {
            panic!("product family is exact");
        };
        let singletons = enumerate_partitions(3).unwrap().len() - 1;
        let mut target = vec![Rational::zero(); singletons + 1];
        target[singletons] = Rational::one();
        let coeffs: Vec<Rational> = vec![Rational::zero(); set.dimension];
        let mut reachable = set.point(&coeffs).unwrap();
        // The target lies in the affine set: the difference is in the kernel.
        for (r, t) in reachable.iter_mut().zip(&target) {
            *r -= t;
        }
        let a = limiting_coefficients(3).unwrap();
        assert!(a.mul_vec(&reachable).unwrap().iter().all(Zero::is_zero));
    }

    #[test]
    fn weight_keys() {
        assert_eq!(weight_key("w.13", 3).unwrap(), Some(Subset::from_elements(3, &[1, 3]).unwrap()));
        assert_eq!(weight_key("w.1,10", 10).unwrap(), Some(Subset::from_elements(10, &[1, 10]).unwrap()));
        assert_eq!(weight_key("n", 3).unwrap(), None);
        assert!(weight_key("w.1x", 3).is_err());
    }
}
