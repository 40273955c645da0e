//! The Ising model on a triangle as a DC model: its unique representation for
//! `h != 0`, the limit as `h -> 0`, and the random-cluster representation.
//!
//! Spins map to bits by `+1 <-> 1`, `-1 <-> 0`. The interaction sums over the
//! three unordered pairs: weight `exp(J sum_{x<y} eta_x eta_y + h sum_x eta_x)`.

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde_json::{json, Value};

use crate::asymptotics::{least_squares, MeasureFamily};
use crate::error::{DcError, Result};
use crate::operators::color_operator_values;
use crate::partition::{enumerate_partitions, Outcome, SetPartition, Subset};

const N: usize = 3;

/// Bracket-growth limit for [`solve_h`].
const MAX_FIELD: f64 = 700.0;

/// Required accuracy of [`solve_h`] on the marginal.
pub const MARGINAL_TOLERANCE: f64 = 1e-12;

/// Residual accepted for the numeric representation solves.
pub const FIT_TOLERANCE: f64 = 1e-9;

fn spin(bits: u32, i: usize) -> f64 {
    if bits >> i & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

fn energy(bits: u32, j: f64, h: f64) -> f64 {
    let s: Vec<f64> = (0..N).map(|i| spin(bits, i)).collect();
    j * (s[0] * s[1] + s[0] * s[2] + s[1] * s[2]) + h * s.iter().sum::<f64>()
}

fn check_coupling(j: f64) -> Result<()> {
    if !(j >= 0.0 && j.is_finite()) {
        return Err(DcError::Domain(format!("J = {j} must be finite and nonnegative")));
    }
    Ok(())
}

/// `nu_{J,h}` on `{0,1}^3`, indexed by outcome bits.
pub fn ising_triangle_measure(j: f64, h: f64) -> Result<Vec<f64>> {
    check_coupling(j)?;
    if !h.is_finite() {
        return Err(DcError::Domain("h must be finite".into()));
    }
    // Shift by the largest exponent to keep the weights finite.
    let energies: Vec<f64> = (0..1u32 << N).map(|b| energy(b, j, h)).collect();
    let top = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = energies.iter().map(|e| (e - top).exp()).collect();
    let z: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / z).collect())
}

/// Probability that a given site is `+1`.
pub fn marginal_p(j: f64, h: f64) -> Result<f64> {
    let nu = ising_triangle_measure(j, h)?;
    Ok(nu
        .iter()
        .enumerate()
        .filter(|(b, _)| b & 1 == 1)
        .map(|(_, v)| v)
        .sum())
}

/// The field `h(p)` with `marginal_p(J, h) = p`, by bisection.
pub fn solve_h(j: f64, p: f64) -> Result<f64> {
    check_coupling(j)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(DcError::Domain(format!("p = {p} is outside (0, 1)")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // The marginal is increasing in h; grow a bracket on the correct side.
    let (mut lo, mut hi) = if p > 0.5 { (0.0, 1.0) } else { (-1.0, 0.0) };
    loop {
        let bracketed = marginal_p(j, lo)? <= p && marginal_p(j, hi)? >= p;
        if bracketed {
            break;
        }
        if hi.abs().max(lo.abs()) > MAX_FIELD {
            return Err(DcError::Numeric(format!("cannot bracket h for p = {p}")));
        }
        if p > 0.5 {
            lo = hi;
            hi *= 2.0;
        } else {
            hi = lo;
            lo *= 2.0;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let m = marginal_p(j, mid)?;
        if (m - p).abs() < MARGINAL_TOLERANCE {
            return Ok(mid);
        }
        if m < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    let mid = 0.5 * (lo + hi);
    if (marginal_p(j, mid)? - p).abs() < MARGINAL_TOLERANCE {
        Ok(mid)
    } else {
        Err(DcError::Numeric(format!("bisection for h stalled at p = {p}")))
    }
}

/// `dp/dh` at `h = 0`: `(3e^{3J} + e^{-J}) / (2e^{3J} + 6e^{-J})`.
pub fn p_prime_at_zero(j: f64) -> f64 {
    let (a, b) = ((3.0 * j).exp(), (-j).exp());
    (3.0 * a + b) / (2.0 * a + 6.0 * b)
}

/// `Cov_{J,0}(f, sum_x eta_x)`, the `h`-derivative of `E_{J,h} f` at `h = 0`.
fn field_covariance(j: f64, f: impl Fn(u32) -> f64) -> Result<f64> {
    let nu = ising_triangle_measure(j, 0.0)?;
    let magnet = |b: u32| (0..N).map(|i| spin(b, i)).sum::<f64>();
    let mean_f: f64 = (0..8u32).map(|b| nu[b as usize] * f(b)).sum();
    let mean_m: f64 = (0..8u32).map(|b| nu[b as usize] * magnet(b)).sum();
    Ok((0..8u32)
        .map(|b| nu[b as usize] * f(b) * magnet(b))
        .sum::<f64>()
        - mean_f * mean_m)
}

/// `d/dp nu_{J,h(p)}(1^S)` at `p = 1/2`, by the chain rule through `h(p)`.
pub fn derivative_at_half(j: f64, s: Subset) -> Result<f64> {
    let mask = s.mask();
    let numer = field_covariance(j, |b| f64::from(u8::from(b & mask == mask)))?;
    let denom = field_covariance(j, |b| f64::from(u8::from(b & 1 == 1)))?;
    Ok(numer / denom)
}

/// `p -> nu_{J, h(p)}`.
#[derive(Clone, Debug)]
pub struct IsingTriangleFamily {
    j: f64,
}

impl IsingTriangleFamily {
    pub fn new(j: f64) -> Result<Self> {
        check_coupling(j)?;
        Ok(Self { j })
    }

    pub fn coupling(&self) -> f64 {
        self.j
    }
}

impl MeasureFamily for IsingTriangleFamily {
    fn name(&self) -> &str {
        "ising-triangle"
    }

    fn n(&self) -> usize {
        N
    }

    fn evaluate(&self, p: f64) -> Result<Vec<f64>> {
        ising_triangle_measure(self.j, solve_h(self.j, p)?)
    }

    fn derivative_at_half(&self, s: Subset) -> Option<f64> {
        derivative_at_half(self.j, s).ok()
    }
}

/// `A_{3,p}` in double precision over [`enumerate_partitions`] order.
pub fn color_operator_f64(p: f64) -> Result<DMatrix<f64>> {
    let partitions = enumerate_partitions(N)?;
    let rows = color_operator_values(&partitions, N, &p);
    Ok(DMatrix::from_fn(rows.len(), partitions.len(), |i, k| rows[i][k]))
}

/// A numeric solution of `A_{3,p} q = nu`.
#[derive(Clone, Debug, PartialEq)]
pub struct Representation {
    pub p: f64,
    /// Over `B_3`: one block, then `{1,2}{3}`, `{1,3}{2}`, `{1}{2,3}`, then
    /// singletons.
    pub q: Vec<f64>,
    pub residual: f64,
}

/// The unique `q^{J,h}` with `A_{3,p} q = nu_{J,h}`, `p = marginal_p(J,h)`.
pub fn unique_representation(j: f64, h: f64) -> Result<Representation> {
    if h == 0.0 {
        return Err(DcError::Precondition(
            "h = 0 gives p = 1/2, where the representation is not unique; use the limit".into(),
        ));
    }
    let p = marginal_p(j, h)?;
    let nu = ising_triangle_measure(j, h)?;
    let (q, residual) = least_squares(&color_operator_f64(p)?, &nu)?;
    if residual > FIT_TOLERANCE {
        return Err(DcError::Numeric(format!("residual {residual:e} above tolerance")));
    }
    Ok(Representation { p, q, residual })
}

/// Probabilities of one, two and three blocks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TriangleSolution {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

impl TriangleSolution {
    /// Spreads `q2` evenly over the three two-block partitions.
    pub fn to_partition_vector(&self) -> Vec<f64> {
        let third = self.q2 / 3.0;
        vec![self.q1, third, third, third, self.q3]
    }

    /// Sums a vector over `B_3` by block count.
    pub fn from_partition_vector(q: &[f64]) -> Result<Self> {
        let partitions = enumerate_partitions(N)?;
        if q.len() != partitions.len() {
            return Err(DcError::Dimension {
                expected: partitions.len(),
                got: q.len(),
            });
        }
        let mut sums = [0.0; 3];
        for (sigma, v) in partitions.iter().zip(q) {
            sums[sigma.num_blocks() - 1] += v;
        }
        Ok(Self {
            q1: sums[0],
            q2: sums[1],
            q3: sums[2],
        })
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.q1, self.q2, self.q3]
    }

    pub fn max_distance(&self, other: &TriangleSolution) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Solves `q1 + q2 + q3 = 1`,
/// `q1/2 + q2/3 + q3/4 = (e^{3J} + e^{-J}) / (2e^{3J} + 6e^{-J})`,
/// `q1 + q2 + 3q3/4 = 3e^{3J} / (3e^{3J} + e^{-J})`.
pub fn limit_representation(j: f64) -> Result<TriangleSolution> {
    check_coupling(j)?;
    let (a, b) = ((3.0 * j).exp(), (-j).exp());
    let m = Matrix3::new(1.0, 1.0, 1.0, 0.5, 1.0 / 3.0, 0.25, 1.0, 1.0, 0.75);
    let rhs = Vector3::new(1.0, (a + b) / (2.0 * a + 6.0 * b), 3.0 * a / (3.0 * a + b));
    let x = m
        .lu()
        .solve(&rhs)
        .ok_or(DcError::Singularity { size: 3 })?;
    Ok(TriangleSolution {
        q1: x[0],
        q2: x[1],
        q3: x[2],
    })
}

/// `12(e^{4J} - 1) / ((3 + e^{4J})(1 + 3e^{4J}))`.
pub fn q2_limit_closed_form(j: f64) -> f64 {
    let e = (4.0 * j).exp();
    12.0 * (e - 1.0) / ((3.0 + e) * (1.0 + 3.0 * e))
}

/// `6e^{-2J}(e^{2J} - 1) / (3 + e^{4J})`.
pub fn q2_rcm_closed_form(j: f64) -> f64 {
    6.0 * (-2.0 * j).exp() * ((2.0 * j).exp() - 1.0) / (3.0 + (4.0 * j).exp())
}

/// Connected components of the triangle with edges `{1,2}, {1,3}, {2,3}`
/// selected by the low three bits of `edges`.
fn components(edges: u32) -> SetPartition {
    let mut parent = [0usize, 1, 2];
    fn find(parent: &mut [usize; 3], x: usize) -> usize {
        let mut x = x;
        while parent[x] != x {
            x = parent[x];
        }
        x
    }
    for (k, (a, b)) in [(0, 1), (0, 2), (1, 2)].into_iter().enumerate() {
        if edges >> k & 1 == 1 {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let labels: Vec<usize> = (0..3).map(|x| find(&mut parent, x)).collect();
    let blocks: Vec<Vec<usize>> = (0..3)
        .filter(|&r| labels.contains(&r))
        .map(|r| (0..3).filter(|&x| labels[x] == r).map(|x| x + 1).collect())
        .collect();
    SetPartition::from_blocks(N, &blocks).expect("components partition [3]")
}

/// The random-cluster law of the component partition: edges open with
/// `r = 1 - e^{-2J}`, each configuration weighted by `2^{#clusters}`.
pub fn rcm_representation(j: f64) -> Result<Vec<f64>> {
    check_coupling(j)?;
    let r = 1.0 - (-2.0 * j).exp();
    let partitions = enumerate_partitions(N)?;
    let mut q = vec![0.0; partitions.len()];
    for edges in 0u32..8 {
        let open = edges.count_ones() as i32;
        let sigma = components(edges);
        let weight = r.powi(open) * (1.0 - r).powi(3 - open) * 2f64.powi(sigma.num_blocks() as i32);
        let k = partitions.iter().position(|s| *s == sigma).expect("enumerated");
        q[k] += weight;
    }
    let z: f64 = q.iter().sum();
    Ok(q.into_iter().map(|v| v / z).collect())
}

/// Max-norm of `A_{3,p} q - nu`.
pub fn image_residual(p: f64, q: &[f64], nu: &[f64]) -> Result<f64> {
    let a = color_operator_f64(p)?;
    let image = &a * nalgebra::DVector::from_column_slice(q);
    Ok(image
        .iter()
        .zip(nu)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// Max-norm residual of a `B_3` vector in the full eight-row limiting system.
pub fn full_limiting_residual(j: f64, q: &[f64]) -> Result<f64> {
    let nu = ising_triangle_measure(j, 0.0)?;
    let derivative: Result<Vec<f64>> = Subset::all(N)
        .into_iter()
        .map(|s| derivative_at_half(j, s))
        .collect();
    let system = crate::asymptotics::build_limiting_system_numeric(&nu, &derivative?)?;
    Ok(crate::asymptotics::limiting_residual(&system, q))
}

/// Convergence of `q^{J,h}` towards the limit at one field value.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldPoint {
    pub h: f64,
    pub p: f64,
    pub q: TriangleSolution,
    pub distance: f64,
    pub residual: f64,
}

/// One row of [`corollary_report`].
#[derive(Clone, Debug, PartialEq)]
pub struct CorollaryRow {
    pub j: f64,
    pub limit: TriangleSolution,
    pub q2_closed_form: f64,
    pub q2_rcm: f64,
    pub gap: f64,
    /// Max-norm residual of the orbit-expanded limit in the eight-row system.
    pub limit_residual: f64,
    /// Max-norm of `A_{3,1/2} q^RCM - nu_{J,0}`.
    pub rcm_residual: f64,
    pub field_points: Vec<FieldPoint>,
    /// Least-squares slope of `log distance` against `log h`.
    pub convergence_order: Option<f64>,
}

impl CorollaryRow {
    pub fn to_json(&self) -> Value {
        json!({
            "J": self.j,
            "q1": self.limit.q1,
            "q2": self.limit.q2,
            "q3": self.limit.q3,
            "q2_closed_form": self.q2_closed_form,
            "q2_rcm": self.q2_rcm,
            "gap": self.gap,
            "limit_residual": self.limit_residual,
            "rcm_residual": self.rcm_residual,
            "convergence_order": self.convergence_order,
            "field_points": self.field_points.iter().map(|f| json!({
                "h": f.h,
                "p": f.p,
                "q1": f.q.q1,
                "q2": f.q.q2,
                "q3": f.q.q3,
                "distance": f.distance,
                "residual": f.residual,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Default field grid of [`corollary_report`].
pub const DEFAULT_FIELDS: [f64; 3] = [1e-1, 1e-2, 1e-3];

fn slope(points: &[(f64, f64)]) -> Option<f64> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(h, d)| *h > 0.0 && *d > 0.0)
        .map(|(h, d)| (h.ln(), d.ln()))
        .collect();
    if usable.len() < 2 {
        return None;
    }
    let k = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / k;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// The limit `lim_{h->0} q^{J,h}` against `q^RCM` over a grid of couplings,
/// with the distance from `q^{J,h}` to the limit at each field value.
pub fn corollary_report(j_grid: &[f64], h_grid: &[f64]) -> Result<Vec<CorollaryRow>> {
    j_grid
        .iter()
        .map(|&j| {
            let limit = limit_representation(j)?;
            let rcm = rcm_representation(j)?;
            let rcm_blocks = TriangleSolution::from_partition_vector(&rcm)?;
            let nu0 = ising_triangle_measure(j, 0.0)?;
            let mut field_points = Vec::with_capacity(h_grid.len());
            for &h in h_grid {
                let rep = unique_representation(j, h)?;
                let q = TriangleSolution::from_partition_vector(&rep.q)?;
                field_points.push(FieldPoint {
                    h,
                    p: rep.p,
                    distance: q.max_distance(&limit),
                    q,
                    residual: rep.residual,
                });
            }
            let convergence_order = slope(
                &field_points
                    .iter()
                    .map(|f| (f.h.abs(), f.distance))
                    .collect::<Vec<_>>(),
            );
            Ok(CorollaryRow {
                j,
                q2_closed_form: q2_limit_closed_form(j),
                q2_rcm: rcm_blocks.q2,
                gap: rcm_blocks.q2 - limit.q2,
                limit_residual: full_limiting_residual(j, &limit.to_partition_vector())?,
                rcm_residual: image_residual(0.5, &rcm, &nu0)?,
                limit,
                field_points,
                convergence_order,
            })
        })
        .collect()
}

/// Column order used by [`corollary_csv`].
pub const CSV_HEADER: &str = "J,q1,q2,q3,q2_rcm,gap,limit_residual,rcm_residual";

/// The corollary table as CSV, one row per coupling.
pub fn corollary_csv(rows: &[CorollaryRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    if let Some(first) = rows.first() {
        for f in &first.field_points {
            out.push_str(&format!(",distance_h={:e}", f.h));
        }
    }
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.3e},{:.3e}",
            row.j,
            row.limit.q1 + 0.0,
            row.limit.q2 + 0.0,
            row.limit.q3 + 0.0,
            row.q2_rcm + 0.0,
            row.gap + 0.0,
            row.limit_residual,
            row.rcm_residual
        ));
        // adding 0.0 turns -0.0 into 0.0
        for f in &row.field_points {
            out.push_str(&format!(",{:.3e}", f.distance + 0.0));
        }
        out.push('\n');
    }
    out
}

/// `nu` as a map from outcome strings, for reports.
pub fn measure_json(nu: &[f64]) -> Value {
    let map: serde_json::Map<String, Value> = Outcome::all(N)
        .into_iter()
        .map(|rho| (rho.to_string(), json!(nu[rho.index()])))
        .collect();
    Value::Object(map)
}
