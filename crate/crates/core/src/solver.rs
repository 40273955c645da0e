//! Solving `A_{n,p} q = nu`: range membership, the explicit `p = 1/2`
//! solution, nonnegative representations and their uniqueness, the invariant
//! case, and a Monte-Carlo sampler of the model itself.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{DcError, Result};
use crate::linalg::{self, AffineSolutionSet};
use crate::lp::{feasible_point, Feasibility};
use crate::matrix::RationalMatrix;
use crate::operators::{build_color_operator, build_invariant_operator, build_moment_operator};
use crate::partition::{
    enumerate_partitions, integer_partitions, orbit_size, shape, IntegerPartition, Outcome,
    SetPartition, Subset, MAX_GROUND_SET,
};
use crate::rational::{
    check_open_probability, format_rational, int, is_half, parse_rational, to_f64, Rational,
};

/// A (not necessarily probability) vector `nu` indexed by outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureVector {
    n: usize,
    values: Vec<Rational>,
}

impl MeasureVector {
    /// `values[bits]` is `nu` of the outcome with those bits.
    pub fn new(n: usize, values: Vec<Rational>) -> Result<Self> {
        if n == 0 || n > MAX_GROUND_SET {
            return Err(DcError::Domain(format!("ground set size {n} is out of range")));
        }
        if values.len() != 1 << n {
            return Err(DcError::Dimension {
                expected: 1 << n,
                got: values.len(),
            });
        }
        Ok(Self { n, values })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(n, vec![Rational::zero(); 1 << n])
    }

    pub fn point_mass(rho: Outcome) -> Self {
        let mut values = vec![Rational::zero(); 1 << rho.n()];
        values[rho.index()] = Rational::one();
        Self { n: rho.n(), values }
    }

    /// Product measure with `P(rho(i) = 1) = p` at every site.
    pub fn product(n: usize, p: &Rational) -> Result<Self> {
        let one_minus = Rational::one() - p;
        let values = Outcome::all(n)
            .into_iter()
            .map(|rho| {
                let k = rho.ones();
                crate::rational::pow(p, k) * crate::rational::pow(&one_minus, n - k)
            })
            .collect();
        Self::new(n, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Rational> {
        self.values
    }

    pub fn get(&self, rho: Outcome) -> &Rational {
        &self.values[rho.index()]
    }

    pub fn set(&mut self, rho: Outcome, value: Rational) {
        self.values[rho.index()] = value;
    }

    pub fn total(&self) -> Rational {
        self.values.iter().sum()
    }

    pub fn is_probability(&self) -> bool {
        self.values.iter().all(|v| !v.is_negative()) && self.total().is_one()
    }

    /// `nu(rho) = nu(-rho)` for every outcome.
    pub fn is_flip_symmetric(&self) -> bool {
        let full = self.values.len() - 1;
        (0..self.values.len()).all(|i| self.values[i] == self.values[full ^ i])
    }

    /// `nu(1^S)` for every subset, indexed by mask: sums over supersets.
    pub fn moments(&self) -> Vec<Rational> {
        let mut m = self.values.clone();
        for bit in 0..self.n {
            for mask in 0..m.len() {
                if mask >> bit & 1 == 0 {
                    let upper = m[mask | 1 << bit].clone();
                    m[mask] += upper;
                }
            }
        }
        m
    }

    /// Moments listed in size-sorted subset order, the row order of `A'`.
    pub fn moment_vector(&self) -> Vec<Rational> {
        let m = self.moments();
        Subset::size_sorted(self.n)
            .iter()
            .map(|s| m[s.mask() as usize].clone())
            .collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(to_f64).collect()
    }

    /// `{"n": n, "values": {"0110": "a/b", ...}}`, zero entries omitted.
    pub fn to_json(&self) -> Value {
        let values: serde_json::Map<String, Value> = Outcome::all(self.n)
            .into_iter()
            .filter(|rho| !self.get(*rho).is_zero())
            .map(|rho| (rho.to_string(), Value::String(format_rational(self.get(rho)))))
            .collect();
        json!({ "n": self.n, "values": values })
    }

    /// Reads either the object written by [`MeasureVector::to_json`] or a bare
    /// map from bit strings to rationals. Missing outcomes are 0. Values may be
    /// strings or JSON integers.
    pub fn from_json(value: &Value, n_hint: Option<usize>) -> Result<Self> {
        let (declared, map) = match value.get("values") {
            Some(inner) => (
                value.get("n").and_then(Value::as_u64).map(|n| n as usize),
                inner,
            ),
            None => (None, value),
        };
        let map = map
            .as_object()
            .ok_or_else(|| DcError::Parse("measure JSON must be an object".into()))?;
        let mut parsed = BTreeMap::new();
        for (key, raw) in map {
            let rho = Outcome::parse(key)?;
            let v = match raw {
                Value::String(s) => parse_rational(s)?,
                Value::Number(num) => parse_rational(&num.to_string())?,
                _ => return Err(DcError::Parse(format!("bad value for outcome {key}"))),
            };
            parsed.insert(rho, v);
        }
        let n = declared
            .or(n_hint)
            .or_else(|| parsed.keys().next().map(Outcome::n))
            .ok_or_else(|| DcError::Parse("cannot infer n from an empty measure".into()))?;
        let mut nu = Self::zeros(n)?;
        for (rho, v) in parsed {
            if rho.n() != n {
                return Err(DcError::Parse(format!(
                    "outcome {rho} has length {} but n = {n}",
                    rho.n()
                )));
            }
            nu.set(rho, v);
        }
        Ok(nu)
    }

    /// Total-variation distance `1/2 sum |a - b|` in double precision.
    pub fn total_variation(&self, other: &MeasureVector) -> Result<f64> {
        if other.n != self.n {
            return Err(DcError::Dimension {
                expected: self.n,
                got: other.n,
            });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (to_f64(a) - to_f64(b)).abs())
            .sum::<f64>()
            / 2.0)
    }
}

/// Result of [`solve_dc`].
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionReport {
    pub n: usize,
    pub p: Rational,
    pub in_range: bool,
    pub formal: AffineSolutionSet,
    pub nonnegative: Option<Vec<Rational>>,
    pub unique_nonnegative: Option<bool>,
}

fn rational_strings(v: &[Rational]) -> Vec<String> {
    v.iter().map(format_rational).collect()
}

impl SolutionReport {
    pub fn to_json(&self) -> Value {
        let partitions: Vec<String> = enumerate_partitions(self.n)
            .map(|ps| ps.iter().map(ToString::to_string).collect())
            .unwrap_or_default();
        json!({
            "n": self.n,
            "p": format_rational(&self.p),
            "partitions": partitions,
            "in_range": self.in_range,
            "formal": {
                "particular": self.formal.particular.as_deref().map(rational_strings),
                "kernel_basis": self.formal.kernel_basis.iter().map(|k| rational_strings(k)).collect::<Vec<_>>(),
                "dimension": self.formal.dimension,
                "rank": self.formal.rank,
            },
            "nonnegative": self.nonnegative.as_deref().map(rational_strings),
            "unique_nonnegative": self.unique_nonnegative,
        })
    }
}

/// Membership of `nu` in the range of `A_{n,p}` by the closed-form conditions:
/// flip symmetry at `p = 1/2`, and otherwise
/// `p sum_{rho(i)=0} nu(rho) = (1-p) sum_{rho(i)=1} nu(rho)` for every site `i`.
pub fn in_range(nu: &MeasureVector, p: &Rational) -> Result<bool> {
    check_open_probability(p)?;
    let answer = closed_form_in_range(nu, p);
    if cfg!(debug_assertions) && nu.n() <= 4 {
        let a = build_color_operator(nu.n(), p)?;
        let solvable = linalg::solve(&a, nu.values())?.is_consistent();
        debug_assert_eq!(answer, solvable, "range conditions disagree with elimination");
    }
    Ok(answer)
}

fn closed_form_in_range(nu: &MeasureVector, p: &Rational) -> bool {
    if is_half(p) {
        return nu.is_flip_symmetric();
    }
    let one_minus = Rational::one() - p;
    (1..=nu.n()).all(|i| {
        let mut zeros = Rational::zero();
        let mut ones = Rational::zero();
        for rho in Outcome::all(nu.n()) {
            if rho.get(i) {
                ones += nu.get(rho);
            } else {
                zeros += nu.get(rho);
            }
        }
        p * zeros == &one_minus * ones
    })
}

/// Explicit solution of `A_{n,1/2} q = nu` supported on the one-block
/// partition and the two-block partitions `{S, S^c}`:
/// `q_{S,S^c} = 2(nu(0^S 1^{S^c}) + nu(1^S 0^{S^c}))` and
/// `q_{[n]} = 2 nu(0...0) - (1/2) sum q_{S,S^c}`.
///
/// For a probability vector the last value is `1 - 2(1 - nu(0..0) - nu(1..1))`.
pub fn half_solution(nu: &MeasureVector) -> Result<Vec<Rational>> {
    if !nu.is_flip_symmetric() {
        return Err(DcError::Precondition(
            "half_solution needs nu(rho) = nu(-rho) for every rho".into(),
        ));
    }
    let n = nu.n();
    let partitions = enumerate_partitions(n)?;
    let full = (1usize << n) - 1;
    let mut q = vec![Rational::zero(); partitions.len()];
    let mut two_block_total = Rational::zero();
    let mut one_block = None;
    for (j, sigma) in partitions.iter().enumerate() {
        match sigma.block_masks().as_slice() {
            [_] => one_block = Some(j),
            [a, _] => {
                // 1^S 0^{S^c} has bits exactly S.
                let s = *a as usize;
                let value = int(2) * (&nu.values()[full ^ s] + &nu.values()[s]);
                two_block_total += &value;
                q[j] = value;
            }
            _ => {}
        }
    }
    let j = one_block.expect("the one-block partition is always enumerated");
    q[j] = int(2) * &nu.values()[0] - two_block_total / int(2);
    Ok(q)
}

/// The formal solution set of `A_{n,p} q = nu`, a nonnegative solution when
/// one exists, and whether it is the only one.
///
/// Both the outcome system and the equivalent moment system
/// `sum_sigma p^{||sigma_S||} q_sigma = nu(1^S)` are solved and checked to give
/// the same solution set.
pub fn solve_dc(nu: &MeasureVector, p: &Rational) -> Result<SolutionReport> {
    check_open_probability(p)?;
    let n = nu.n();
    let a = build_color_operator(n, p)?;
    let formal = linalg::solve(&a, nu.values())?;
    let moment = build_moment_operator(n, p)?;
    let moment_formal = linalg::solve(&moment, &nu.moment_vector())?;
    assert_eq!(formal, moment_formal, "outcome and moment systems disagree");
    let range = closed_form_in_range(nu, p);
    assert_eq!(range, formal.is_consistent(), "range conditions disagree with elimination");
    let (nonnegative, unique_nonnegative) = if range {
        match feasible_point(&a.row_vectors(), nu.values(), a.cols()) {
            Feasibility::Feasible(q) => {
                let unique = uniqueness_of_representation(&q, &formal.kernel_basis)?;
                (Some(q), Some(unique))
            }
            Feasibility::Infeasible { .. } => (None, None),
        }
    } else {
        (None, None)
    };
    Ok(SolutionReport {
        n,
        p: p.clone(),
        in_range: range,
        formal,
        nonnegative,
        unique_nonnegative,
    })
}

/// Whether the nonnegative solution `q` is the only one.
///
/// Another exists exactly when some nonzero `v` in the kernel span is
/// nonnegative outside `supp(q)`, since then `q + eps v >= 0`. If a nonzero `v`
/// vanishes outside the support the answer is immediate. Otherwise the map
/// from kernel coefficients to the outside entries `w` is injective, and the
/// question is whether its image meets the nonnegative orthant away from 0:
/// `N w = 0`, `sum w = 1`, `w >= 0` with `N` spanning the left kernel.
pub fn uniqueness_of_representation(q: &[Rational], kernel_basis: &[Vec<Rational>]) -> Result<bool> {
    if let Some(bad) = kernel_basis.iter().find(|k| k.len() != q.len()) {
        return Err(DcError::Dimension {
            expected: q.len(),
            got: bad.len(),
        });
    }
    if q.iter().any(Signed::is_negative) {
        return Err(DcError::Precondition("q must be nonnegative".into()));
    }
    if kernel_basis.is_empty() {
        return Ok(true);
    }
    let d = kernel_basis.len();
    let outside: Vec<usize> = (0..q.len()).filter(|&i| q[i].is_zero()).collect();
    // Column k holds basis vector k restricted to the outside coordinates.
    let restricted: Vec<Vec<Rational>> = kernel_basis
        .iter()
        .map(|k| outside.iter().map(|&i| k[i].clone()).collect())
        .collect();
    if linalg::rank_of_rows(restricted.iter().map(Vec::as_slice), outside.len()) < d {
        return Ok(false);
    }
    let m = outside.len();
    let mut rows = linalg::kernel(&RationalMatrix::from_rows(restricted)?);
    rows.push(vec![Rational::one(); m]);
    let mut rhs = vec![Rational::zero(); rows.len()];
    *rhs.last_mut().expect("normalising row") = Rational::one();
    Ok(!feasible_point(&rows, &rhs, m).is_feasible())
}

/// Result of [`solve_invariant`]. Coordinates follow [`integer_partitions`].
#[derive(Clone, Debug, PartialEq)]
pub struct InvariantReport {
    pub n: usize,
    pub p: Rational,
    pub shapes: Vec<IntegerPartition>,
    pub in_range: bool,
    pub formal: AffineSolutionSet,
    pub nonnegative: Option<Vec<Rational>>,
    /// Whether the lift `q_sigma = q_pi / a_pi` of the particular solution
    /// solves the full system; `None` when `B_n` was too large to enumerate or
    /// there was nothing to lift.
    pub lift_verified: Option<bool>,
}

impl InvariantReport {
    pub fn to_json(&self) -> Value {
        json!({
            "n": self.n,
            "p": format_rational(&self.p),
            "shapes": self.shapes.iter().map(|s| s.parts().to_vec()).collect::<Vec<_>>(),
            "in_range": self.in_range,
            "formal": {
                "particular": self.formal.particular.as_deref().map(rational_strings),
                "kernel_basis": self.formal.kernel_basis.iter().map(|k| rational_strings(k)).collect::<Vec<_>>(),
                "dimension": self.formal.dimension,
                "rank": self.formal.rank,
            },
            "nonnegative": self.nonnegative.as_deref().map(rational_strings),
            "lift_verified": self.lift_verified,
        })
    }
}

/// Largest `n` for which [`solve_invariant`] checks its lift on `B_n`.
pub const INVARIANT_LIFT_CHECK_MAX: usize = 7;

/// Closed-form range conditions for level totals `nu_k = nu(||rho|| = k)`:
/// `nu_i = nu_{n-i}` at `p = 1/2`, otherwise
/// `nu_n = p/(1-p) sum_{k<n} (n-k)/n nu_k - sum_{k=1}^{n-1} k/n nu_k`.
pub fn invariant_in_range(levels: &[Rational], p: &Rational) -> Result<bool> {
    check_open_probability(p)?;
    if levels.len() < 2 {
        return Err(DcError::Domain("need level totals for n >= 1".into()));
    }
    let n = levels.len() - 1;
    if is_half(p) {
        return Ok((0..=n).all(|i| levels[i] == levels[n - i]));
    }
    let ratio = p / (Rational::one() - p);
    let nn = int(n as i64);
    let mut rhs = Rational::zero();
    for (k, v) in levels.iter().enumerate().take(n) {
        rhs += &ratio * int((n - k) as i64) / &nn * v;
        if k >= 1 {
            rhs -= int(k as i64) / &nn * v;
        }
    }
    Ok(levels[n] == rhs)
}

/// Spreads level totals uniformly over each level.
pub fn symmetric_measure(levels: &[Rational]) -> Result<MeasureVector> {
    if levels.len() < 2 {
        return Err(DcError::Domain("need level totals for n >= 1".into()));
    }
    let n = levels.len() - 1;
    let per_level = symmetric_measure_values(levels);
    let values = Outcome::all(n)
        .into_iter()
        .map(|rho| per_level[rho.ones()].clone())
        .collect();
    MeasureVector::new(n, values)
}

/// Solves the invariant system `A^Inv_{n,p} q = nu` for level totals `nu`.
pub fn solve_invariant(levels: &[Rational], p: &Rational) -> Result<InvariantReport> {
    let range = invariant_in_range(levels, p)?;
    let n = levels.len() - 1;
    let a = build_invariant_operator(n, p)?;
    let per_outcome = symmetric_measure_values(levels);
    let formal = linalg::solve(&a, &per_outcome)?;
    assert_eq!(range, formal.is_consistent(), "level conditions disagree with elimination");
    let nonnegative = if range {
        feasible_point(&a.row_vectors(), &per_outcome, a.cols()).into_solution()
    } else {
        None
    };
    let shapes = integer_partitions(n);
    let lift_verified = match &formal.particular {
        Some(q) if n <= INVARIANT_LIFT_CHECK_MAX => Some(lift_solves(n, p, &shapes, q, levels)?),
        _ => None,
    };
    Ok(InvariantReport {
        n,
        p: p.clone(),
        shapes,
        in_range: range,
        formal,
        nonnegative,
        lift_verified,
    })
}

fn symmetric_measure_values(levels: &[Rational]) -> Vec<Rational> {
    let n = levels.len() - 1;
    let mut binom = Rational::one();
    let mut out = Vec::with_capacity(n + 1);
    for (k, v) in levels.iter().enumerate() {
        out.push(v / &binom);
        binom = binom * int((n - k) as i64) / int(k as i64 + 1);
    }
    out
}

/// `q_sigma = q_{pi(sigma)} / a_{pi(sigma)}` on `B_n`.
pub fn lift_invariant(n: usize, shapes: &[IntegerPartition], q: &[Rational]) -> Result<Vec<Rational>> {
    let partitions = enumerate_partitions(n)?;
    let mut orbit = Vec::with_capacity(shapes.len());
    for pi in shapes {
        orbit.push(Rational::from_integer(orbit_size(pi, n)?.into()));
    }
    partitions
        .iter()
        .map(|sigma| {
            let pi = shape(sigma);
            let j = shapes
                .iter()
                .position(|s| *s == pi)
                .ok_or_else(|| DcError::Domain(format!("shape of {sigma} not listed")))?;
            Ok(&q[j] / &orbit[j])
        })
        .collect()
}

fn lift_solves(
    n: usize,
    p: &Rational,
    shapes: &[IntegerPartition],
    q: &[Rational],
    levels: &[Rational],
) -> Result<bool> {
    let full = lift_invariant(n, shapes, q)?;
    let a = build_color_operator(n, p)?;
    let nu = symmetric_measure(levels)?;
    Ok(a.mul_vec(&full)? == nu.values())
}

/// Number of independent random streams used by [`sample_dc`]; fixed so that
/// results depend only on the seed, not on the thread count.
pub const SAMPLE_STREAMS: u64 = 64;

/// Empirical law of `trials` draws of the DC model with partition law `q`
/// (over [`enumerate_partitions`] order) and color parameter `p`.
///
/// Stream `k` is ChaCha8 seeded with `seed` on stream `k`, and draws
/// `trials / SAMPLE_STREAMS` samples (the first `trials % SAMPLE_STREAMS`
/// streams draw one extra).
pub fn sample_dc(q: &[Rational], n: usize, p: &Rational, trials: u64, seed: u64) -> Result<MeasureVector> {
    crate::rational::check_probability(p)?;
    if trials == 0 {
        return Err(DcError::Domain("trials must be at least 1".into()));
    }
    let partitions = enumerate_partitions(n)?;
    if q.len() != partitions.len() {
        return Err(DcError::Dimension {
            expected: partitions.len(),
            got: q.len(),
        });
    }
    if q.iter().any(Signed::is_negative) || !q.iter().sum::<Rational>().is_one() {
        return Err(DcError::Domain("q must be a probability vector".into()));
    }
    let weights: Vec<f64> = q.iter().map(to_f64).collect();
    let chooser = WeightedIndex::new(&weights).map_err(|e| DcError::Numeric(e.to_string()))?;
    let blocks: Vec<Vec<u32>> = partitions.iter().map(SetPartition::block_masks).collect();
    let p = to_f64(p);
    let counts = (0..SAMPLE_STREAMS)
        .into_par_iter()
        .map(|stream| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            let draws = trials / SAMPLE_STREAMS + u64::from(stream < trials % SAMPLE_STREAMS);
            let mut counts = vec![0u64; 1 << n];
            for _ in 0..draws {
                let sigma = &blocks[chooser.sample(&mut rng)];
                let rho = sigma
                    .iter()
                    .filter(|_| rng.random::<f64>() < p)
                    .fold(0u32, |acc, b| acc | b);
                counts[rho as usize] += 1;
            }
            counts
        })
        .reduce(
            || vec![0u64; 1 << n],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let total = Rational::from_integer(trials.into());
    MeasureVector::new(
        n,
        counts
            .into_iter()
            .map(|c| Rational::from_integer(c.into()) / &total)
            .collect(),
    )
}

/// `A_{n,p} q` as a measure.
pub fn dc_image(q: &[Rational], n: usize, p: &Rational) -> Result<MeasureVector> {
    let a: RationalMatrix = build_color_operator(n, p)?;
    MeasureVector::new(n, a.mul_vec(q)?)
}
