mod common;

use dc_core::linalg::{annihilates, kernel, rank, rref, solve};
use dc_core::lp::{nonnegative_solution, Feasibility};
use dc_core::operators::build_color_operator;
use dc_core::partition::{enumerate_partitions, Outcome, SetPartition};
use dc_core::rational::{int, rat, Rational};
use dc_core::{Label, RationalMatrix};
use num_traits::{Signed, Zero};
use proptest::prelude::*;

use common::{bell_oracle, dot, naive_rank, small_rational, unit_rational};

fn matrix_strategy() -> impl Strategy<Value = Vec<Vec<Rational>>> {
    (1usize..=6, 1usize..=7).prop_flat_map(|(r, c)| {
        // Low-rank products are common this way, so kernels are exercised.
        (
            proptest::collection::vec(proptest::collection::vec(small_rational(), 2), r),
            proptest::collection::vec(proptest::collection::vec(small_rational(), c), 2),
            proptest::collection::vec(proptest::collection::vec(small_rational(), c), r),
            any::<bool>(),
        )
            .prop_map(|(left, right, dense, low)| {
                if low {
                    left.iter()
                        .map(|l| (0..right[0].len()).map(|j| &l[0] * &right[0][j] + &l[1] * &right[1][j]).collect())
                        .collect()
                } else {
                    dense
                }
            })
    })
}

proptest! {
    #[test]
    fn rank_nullity_and_kernel(rows in matrix_strategy()) {
        let m = RationalMatrix::from_rows(rows.clone()).unwrap();
        let r = rank(&m);
        prop_assert_eq!(r, naive_rank(rows));
        let k = kernel(&m);
        prop_assert_eq!(r + k.len(), m.cols());
        prop_assert!(annihilates(&m, &k));
        if !k.is_empty() {
            prop_assert_eq!(naive_rank(k.clone()), k.len());
        }
        let (reduced, pivots) = rref(&m);
        prop_assert_eq!(pivots.len(), r);
        for (i, &c) in pivots.iter().enumerate() {
            prop_assert_eq!(&reduced[i][c], &int(1));
        }
    }

    #[test]
    fn particular_plus_kernel_solves(rows in matrix_strategy(), x in proptest::collection::vec(small_rational(), 7),
                                     coeffs in proptest::collection::vec(small_rational(), 7)) {
        let m = RationalMatrix::from_rows(rows).unwrap();
        let x: Vec<Rational> = x.into_iter().take(m.cols()).collect();
        let b = m.mul_vec(&x).unwrap();
        let set = solve(&m, &b).unwrap();
        prop_assert!(set.is_consistent());
        prop_assert_eq!(set.dimension, set.kernel_basis.len());
        prop_assert_eq!(set.rank + set.dimension, m.cols());
        let point = set.point(&coeffs[..set.dimension]).unwrap();
        prop_assert_eq!(m.mul_vec(&point).unwrap(), b);
    }

    #[test]
    fn lp_output_is_feasible(rows in matrix_strategy(), x in proptest::collection::vec(unit_rational(), 7),
                             shift in small_rational()) {
        let m = RationalMatrix::from_rows(rows).unwrap();
        let x: Vec<Rational> = x.into_iter().take(m.cols()).collect();
        let mut b = m.mul_vec(&x).unwrap();
        b[0] += shift;
        match nonnegative_solution(&m, &b).unwrap() {
            Feasibility::Feasible(q) => {
                prop_assert_eq!(m.mul_vec(&q).unwrap(), b);
                prop_assert!(q.iter().all(|v| !v.is_negative()));
            }
            Feasibility::Infeasible { certificate } => {
                // Farkas: y^T M >= 0 and y^T b < 0.
                let mt = m.transpose();
                prop_assert!(mt.mul_vec(&certificate).unwrap().iter().all(|v| !v.is_negative()));
                prop_assert!(dot(&certificate, &b).is_negative());
            }
        }
    }
}

#[test]
fn rank_examples() {
    let zero = RationalMatrix::from_rows(vec![vec![Rational::zero(); 3]; 2]).unwrap();
    assert_eq!(rank(&zero), 0);
    assert_eq!(kernel(&zero).len(), 3);
    assert_eq!(rank(&build_color_operator(4, &rat(1, 2)).unwrap()), 8);
    assert_eq!(rank(&build_color_operator(4, &rat(1, 3)).unwrap()), 12);
}

#[test]
fn color_operator_nullities() {
    for n in 1..=6 {
        let bell = bell_oracle(n) as usize;
        for p in [rat(1, 3), rat(2, 5)] {
            let a = build_color_operator(n, &p).unwrap();
            assert_eq!(kernel(&a).len(), bell - ((1 << n) - n));
        }
        let a = build_color_operator(n, &rat(1, 2)).unwrap();
        assert_eq!(kernel(&a).len(), bell - (1 << (n - 1)));
    }
}

#[test]
fn solve_examples() {
    let b = vec![rat(1, 2), rat(-3, 4), int(5)];
    let set = solve(&RationalMatrix::identity(3), &b).unwrap();
    assert_eq!(set.particular, Some(b));
    assert!(set.kernel_basis.is_empty());

    let a = build_color_operator(3, &rat(1, 3)).unwrap();
    let q: Vec<Rational> = (1..=5).map(|i| rat(i, 15)).collect();
    let set = solve(&a, &a.mul_vec(&q).unwrap()).unwrap();
    assert_eq!(set.dimension, 0);
    assert_eq!(set.particular, Some(q));

    let a = build_color_operator(4, &rat(1, 2)).unwrap();
    let mut nu = vec![Rational::zero(); 16];
    nu[0] = rat(1, 2);
    nu[1] = rat(1, 2);
    assert!(!solve(&a, &nu).unwrap().is_consistent());

    assert!(solve(&a, &nu[..4]).is_err());
}

#[test]
fn lp_examples() {
    let a = build_color_operator(2, &rat(1, 2)).unwrap();
    let uniform = vec![rat(1, 2), rat(1, 2)];
    assert!(nonnegative_solution(&a, &a.mul_vec(&uniform).unwrap()).unwrap().is_feasible());

    // Columns of A_{2,1/2} are (1/2,0,0,1/2) and (1/4,1/4,1/4,1/4), so the
    // anticorrelated measure needs q_block = -1 and has no nonnegative solution.
    let nu = vec![Rational::zero(), rat(1, 2), rat(1, 2), Rational::zero()];
    let formal = solve(&a, &nu).unwrap().particular.unwrap();
    let singletons = a.col_index(&Label::Partition(SetPartition::singletons(2))).unwrap();
    let one_block = a.col_index(&Label::Partition(SetPartition::one_block(2))).unwrap();
    assert_eq!((formal[singletons].clone(), formal[one_block].clone()), (int(2), int(-1)));
    assert!(!nonnegative_solution(&a, &nu).unwrap().is_feasible());

    // For n = 2, nu(00) + nu(11) >= 1/2 is exactly the feasibility condition.
    for (c, feasible) in [(rat(2, 5), false), (rat(1, 2), true), (rat(3, 5), true)] {
        let outer = &c / int(2);
        let inner = (int(1) - &c) / int(2);
        let nu = vec![outer.clone(), inner.clone(), inner, outer];
        assert_eq!(nonnegative_solution(&a, &nu).unwrap().is_feasible(), feasible, "c = {c}");
    }

    let infeasible = nonnegative_solution(&RationalMatrix::identity(2), &[int(1), int(-1)]).unwrap();
    match infeasible {
        Feasibility::Infeasible { certificate } => {
            assert!(certificate.iter().all(|v| !v.is_negative()));
            assert!((dot(&certificate, &[int(1), int(-1)])).is_negative());
        }
        Feasibility::Feasible(_) => panic!("expected infeasible"),
    }
}

#[test]
fn lp_on_random_images() {
    for n in 2..=4 {
        let partitions = enumerate_partitions(n).unwrap();
        let a = build_color_operator(n, &rat(2, 5)).unwrap();
        for seed in 0..10i64 {
            let q: Vec<Rational> = (0..partitions.len() as i64).map(|j| rat((j * 7 + seed) % 5, 9)).collect();
            let nu = a.mul_vec(&q).unwrap();
            let found = nonnegative_solution(&a, &nu).unwrap().into_solution().unwrap();
            assert_eq!(a.mul_vec(&found).unwrap(), nu);
        }
        let mut point = vec![Rational::zero(); 1 << n];
        point[Outcome::from_bits(n, (1 << n) - 1).unwrap().index()] = int(1);
        assert!(!nonnegative_solution(&a, &point).unwrap().is_feasible());
    }
}
