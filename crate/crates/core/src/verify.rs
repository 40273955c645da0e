//! A self-check table over the rank, range, inversion and limit results, used
//! by the `verify` command.

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::asymptotics::{odd_row_sums, small_p_solve, MeasureFamily, SingleBlockMixture};
use crate::error::Result;
use crate::ising;
use crate::linalg::{self, rank};
use crate::operators::{
    build_b_matrix, build_c_matrix, build_color_operator, build_d_matrix, build_invariant_operator,
    build_parity_matrix, build_single_block_operator, mobius_phi, mobius_phi_inv,
};
use crate::partition::{bell_number, integer_partitions, Outcome};
use crate::rational::{int, rat, Rational};
use crate::solver::{half_solution, in_range, MeasureVector};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Random rational in `[0, 1]` with denominator at most `den`.
pub fn random_unit_rational(rng: &mut impl Rng, den: i64) -> Rational {
    let d = rng.random_range(1..=den);
    rat(rng.random_range(0..=d), d)
}

/// Random flip-symmetric probability vector on `{0,1}^n`.
pub fn random_symmetric_probability(rng: &mut impl Rng, n: usize) -> MeasureVector {
    let size = 1usize << n;
    let full = size - 1;
    let mut values = vec![Rational::zero(); size];
    for i in 0..size {
        if i < full ^ i {
            let v = int(rng.random_range(0..=20));
            values[i] = v.clone();
            values[full ^ i] = v;
        }
    }
    let total: Rational = values.iter().sum();
    let values = if total.is_zero() {
        let mut v = vec![Rational::zero(); size];
        v[0] = rat(1, 2);
        v[full] = rat(1, 2);
        v
    } else {
        values.into_iter().map(|v| v / &total).collect()
    };
    MeasureVector::new(n, values).expect("sized for n")
}

/// Runs every check for ground sets up to `n_max`.
pub fn run_checks(n_max: usize, seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    for n in 1..=n_max {
        let bell = bell_number(n) as usize;
        for p in [rat(1, 3), rat(2, 5), rat(3, 7)] {
            let r = rank(&build_color_operator(n, &p)?);
            let expected = (1usize << n) - n;
            out.push(Check::new(
                format!("rank A_{{{n},{p}}} = 2^n - n"),
                r == expected,
                format!("rank {r}, nullity {}", bell - r),
            ));
        }
        let r = rank(&build_color_operator(n, &rat(1, 2))?);
        out.push(Check::new(
            format!("rank A_{{{n},1/2}} = 2^(n-1)"),
            r == 1 << (n - 1),
            format!("rank {r}, nullity {}", bell - r),
        ));
        let r = rank(&build_parity_matrix(n)?);
        out.push(Check::new(
            format!("parity matrix rank, n = {n}"),
            r == (1 << n) - n,
            format!("rank {r}"),
        ));
    }

    for n in 1..=n_max.max(15) {
        let shapes = integer_partitions(n).len();
        let r_generic = rank(&build_invariant_operator(n, &rat(1, 3))?);
        let r_half = rank(&build_invariant_operator(n, &rat(1, 2))?);
        out.push(Check::new(
            format!("invariant ranks, n = {n}"),
            r_generic == n && r_half == n / 2 + 1,
            format!("p=1/3: {r_generic}, p=1/2: {r_half}, P_n = {shapes}"),
        ));
    }

    for n in 1..=n_max.min(6) {
        let ok = (0..20).all(|_| {
            let f: Vec<Rational> = (0..1 << n).map(|_| random_unit_rational(&mut rng, 9) - rat(1, 2)).collect();
            let back = mobius_phi(n, &f).and_then(|g| mobius_phi_inv(n, &g));
            back.is_ok_and(|b| b == f)
        });
        out.push(Check::new(format!("phi^-1 phi = id, n = {n}"), ok, "20 random f"));
    }

    for n in 2..=n_max.min(5) {
        let p = rat(1, 3);
        let product = build_c_matrix(n)
            .mul(&build_d_matrix(n, &p)?)?
            .mul(&build_b_matrix(n, &p)?)?
            .mul(&build_single_block_operator(n, &p)?)?;
        let rows = crate::partition::Subset::size_sorted(n);
        let cols = crate::operators::single_block_index(n);
        let ok = rows.iter().enumerate().all(|(i, s)| {
            cols.iter().enumerate().all(|(j, t)| {
                let expected = s == t && s.len() != 1;
                product.get(i, j).is_one() == expected && (expected || product.get(i, j).is_zero())
            })
        });
        out.push(Check::new(format!("CDBA'' = restricted identity, n = {n}"), ok, "p = 1/3"));
    }

    for n in 1..=n_max.min(5) {
        let mut witness_ok = true;
        let mut odd_ok = true;
        for _ in 0..20 {
            let nu = random_symmetric_probability(&mut rng, n);
            let q = half_solution(&nu)?;
            let a = build_color_operator(n, &rat(1, 2))?;
            witness_ok &= a.mul_vec(&q)? == nu.values();
            let constant = nu.get(Outcome::from_bits(n, 0)?) + nu.get(Outcome::from_bits(n, (1 << n) - 1)?);
            witness_ok &= q.iter().all(|v| !v.is_negative()) == (constant >= rat(1, 2));
            odd_ok &= odd_row_sums(&nu).iter().all(|(_, v)| v.is_zero());
        }
        out.push(Check::new(format!("p = 1/2 explicit solution, n = {n}"), witness_ok, "20 random symmetric nu"));
        out.push(Check::new(format!("odd rows vanish, n = {n}"), odd_ok, "20 random symmetric nu"));
        let mut agree = true;
        for p in [rat(1, 3), rat(1, 2)] {
            let a = build_color_operator(n, &p)?;
            for _ in 0..10 {
                let q: Vec<Rational> = (0..a.cols()).map(|_| random_unit_rational(&mut rng, 7)).collect();
                let mut nu = a.mul_vec(&q)?;
                if rng.random_bool(0.5) {
                    let k = rng.random_range(0..nu.len());
                    nu[k] += rat(1, 11);
                }
                let nu = MeasureVector::new(n, nu)?;
                agree &= in_range(&nu, &p)? == linalg::solve(&a, nu.values())?.is_consistent();
            }
        }
        out.push(Check::new(format!("range conditions match elimination, n = {n}"), agree, "p in {1/3, 1/2}"));
    }

    for n in 2..=n_max.min(5) {
        let family = SingleBlockMixture::uniform(n, 1, &rat(1, 2))?;
        let mut ok = true;
        for p in [rat(1, 10), rat(1, 100)] {
            if let Some(nu) = family.evaluate_exact(&p) {
                let sol = small_p_solve(&nu?, &p)?;
                ok &= sol.q == family.coefficients(&p, Clone::clone);
            }
        }
        out.push(Check::new(format!("small-p recovery, n = {n}"), ok, "p in {1/10, 1/100}"));
    }

    let rows = ising::corollary_report(&[0.1, 0.5, 1.0, 2.0, 5.0], &ising::DEFAULT_FIELDS)?;
    for row in rows {
        let ok = row.gap > 0.0
            && (row.limit.q2 - row.q2_closed_form).abs() < 1e-10
            && (row.q2_rcm - ising::q2_rcm_closed_form(row.j)).abs() < 1e-10
            && row.limit_residual < 1e-9;
        out.push(Check::new(
            format!("Ising triangle limit below RCM, J = {}", row.j),
            ok,
            format!("q2 {:.6e} < q2_rcm {:.6e}", row.limit.q2, row.q2_rcm),
        ));
    }
    Ok(out)
}
