//! Exact feasibility of `M q = b, q >= 0` by phase-one simplex.
//!
//! The system is first row-reduced, which drops redundant rows and supplies a
//! starting basis. The tableau is kept over the rationals; entering columns
//! follow Dantzig's rule, switching to Bland's rule after a run of degenerate
//! pivots so the method cannot cycle.

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::error::{DcError, Result};
use crate::linalg;
use crate::matrix::RationalMatrix;
use crate::rational::Rational;

/// Outcome of a feasibility query.
#[derive(Clone, Debug, PartialEq)]
pub enum Feasibility {
    /// A point with `M q = b` and `q >= 0`.
    Feasible(Vec<Rational>),
    /// A Farkas vector `y` with `M^T y >= 0` and `b . y < 0`.
    Infeasible { certificate: Vec<Rational> },
}

impl Feasibility {
    pub fn solution(&self) -> Option<&Vec<Rational>> {
        match self {
            Feasibility::Feasible(q) => Some(q),
            Feasibility::Infeasible { .. } => None,
        }
    }

    pub fn into_solution(self) -> Option<Vec<Rational>> {
        match self {
            Feasibility::Feasible(q) => Some(q),
            Feasibility::Infeasible { .. } => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }
}

/// Decides whether `m q = b` has a nonnegative solution.
pub fn nonnegative_solution(m: &RationalMatrix, b: &[Rational]) -> Result<Feasibility> {
    if b.len() != m.rows() {
        return Err(DcError::Dimension {
            expected: m.rows(),
            got: b.len(),
        });
    }
    let rows = m.row_vectors();
    Ok(feasible_point(&rows, b, m.cols()))
}

pub(crate) fn feasible_point(rows: &[Vec<Rational>], b: &[Rational], ncols: usize) -> Feasibility {
    let m = rows.len();
    // Reduce [A | b | I]: the identity block records the row transform, so
    // certificates for the reduced system map back to the original rows.
    let augmented: Vec<Vec<Rational>> = rows
        .iter()
        .zip(b)
        .enumerate()
        .map(|(i, (row, rhs))| {
            let mut r = Vec::with_capacity(ncols + 1 + m);
            r.extend(row.iter().cloned());
            r.push(rhs.clone());
            r.extend((0..m).map(|k| if k == i { Rational::one() } else { Rational::zero() }));
            r
        })
        .collect();
    let (reduced, pivots) = linalg::rref_rows(&augmented, ncols + 1 + m);
    let mut kept_rows = Vec::new();
    let mut kept_rhs = Vec::new();
    let mut transform = Vec::new();
    let mut basic = Vec::new();
    for (row, &c) in reduced.iter().zip(&pivots) {
        if c == ncols {
            // 0 = 1 after the transform `t`: y = -t has A^T y = 0, b.y = -1.
            let certificate = row[ncols + 1..].iter().map(|v| -v.clone()).collect();
            return Feasibility::Infeasible { certificate };
        }
        if c < ncols {
            kept_rows.push(row[..ncols].to_vec());
            kept_rhs.push(row[ncols].clone());
            transform.push(row[ncols + 1..].to_vec());
            basic.push(c);
        }
    }
    let mut tableau = PhaseOne::new(&kept_rows, &kept_rhs, ncols);
    // Pivot columns are unit vectors, so rows with nonnegative right-hand side
    // start with their pivot column basic instead of an artificial.
    for (r, &c) in basic.iter().enumerate() {
        if !kept_rhs[r].is_negative() {
            tableau.pivot(r, c);
        }
    }
    tableau.run();
    match tableau.outcome() {
        Feasibility::Infeasible { certificate } => {
            let mut y = vec![Rational::zero(); m];
            for (t, c) in transform.iter().zip(&certificate) {
                if c.is_zero() {
                    continue;
                }
                for (yi, ti) in y.iter_mut().zip(t) {
                    *yi += c * ti;
                }
            }
            Feasibility::Infeasible { certificate: y }
        }
        feasible => feasible,
    }
}

/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_LIMIT: usize = 50;

struct PhaseOne {
    /// Structural columns; artificial `i` is column `ncols + i`.
    ncols: usize,
    /// Each row: `ncols + m` coefficients followed by the right-hand side.
    rows: Vec<Vec<Rational>>,
    /// Reduced costs over all columns, then the negated objective value.
    cost: Vec<Rational>,
    basis: Vec<usize>,
    signs: Vec<bool>,
}

impl PhaseOne {
    fn new(a: &[Vec<Rational>], b: &[Rational], ncols: usize) -> Self {
        let m = a.len();
        let width = ncols + m + 1;
        let mut signs = Vec::with_capacity(m);
        let rows: Vec<Vec<Rational>> = a
            .iter()
            .zip(b)
            .enumerate()
            .map(|(i, (row, rhs))| {
                let flip = rhs.is_negative();
                signs.push(flip);
                let mut t = vec![Rational::zero(); width];
                for (slot, v) in t.iter_mut().zip(row) {
                    *slot = if flip { -v.clone() } else { v.clone() };
                }
                t[ncols + i] = Rational::one();
                t[width - 1] = rhs.abs();
                t
            })
            .collect();
        // Minimise the sum of artificials: reduced cost of column j is
        // c_j - sum_i t_ij, and the last slot carries -sum_i b_i.
        let mut cost = vec![Rational::zero(); width];
        for row in &rows {
            for (j, v) in row.iter().enumerate() {
                if j < ncols || j == width - 1 {
                    cost[j] -= v;
                }
            }
        }
        Self {
            ncols,
            rows,
            cost,
            basis: (ncols..ncols + m).collect(),
            signs,
        }
    }

    fn width(&self) -> usize {
        self.ncols + self.rows.len() + 1
    }

    fn run(&mut self) {
        let rhs = self.width() - 1;
        let mut degenerate_run = 0;
        loop {
            // Dantzig's rule, falling back to Bland's rule after a run of
            // degenerate pivots so that cycling cannot occur.
            let enter = if degenerate_run < DEGENERATE_LIMIT {
                (0..rhs)
                    .filter(|&j| self.cost[j].is_negative())
                    .min_by(|&a, &b| self.cost[a].cmp(&self.cost[b]))
            } else {
                (0..rhs).find(|&j| self.cost[j].is_negative())
            };
            let Some(enter) = enter else {
                return;
            };
            let mut leave: Option<(usize, Rational)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if !row[enter].is_positive() {
                    continue;
                }
                let ratio = &row[rhs] / &row[enter];
                let better = match &leave {
                    None => true,
                    Some((k, best)) => {
                        ratio < *best || (ratio == *best && self.basis[i] < self.basis[*k])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            // Phase one is bounded below by zero, so a leaving row always exists.
            let (r, ratio) = leave.expect("phase-one objective is bounded");
            if ratio.is_zero() {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, enter);
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let inv = Rational::one() / &self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            if !v.is_zero() {
                *v *= &inv;
            }
        }
        let pivot_row = self.rows[r].clone();
        let eliminate = |row: &mut Vec<Rational>| {
            let factor = row[c].clone();
            if factor.is_zero() {
                return;
            }
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *v -= &factor * p;
                }
            }
        };
        self.rows
            .par_iter_mut()
            .enumerate()
            .filter(|(i, _)| *i != r)
            .for_each(|(_, row)| eliminate(row));
        eliminate(&mut self.cost);
        self.basis[r] = c;
    }

    fn outcome(&self) -> Feasibility {
        let rhs = self.width() - 1;
        let objective = -self.cost[rhs].clone();
        if objective.is_zero() {
            let mut q = vec![Rational::zero(); self.ncols];
            for (row, &var) in self.rows.iter().zip(&self.basis) {
                if var < self.ncols {
                    q[var] = row[rhs].clone();
                }
            }
            return Feasibility::Feasible(q);
        }
        // Duals of the flipped system: reduced cost of artificial i is 1 - y_i.
        let certificate = self
            .signs
            .iter()
            .enumerate()
            .map(|(i, &flip)| {
                let y = Rational::one() - &self.cost[self.ncols + i];
                // Undo the row flip, then negate so that M^T y >= 0, b.y < 0.
                if flip {
                    y
                } else {
                    -y
                }
            })
            .collect();
        Feasibility::Infeasible { certificate }
    }
}
