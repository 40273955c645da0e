mod common;

use dc_core::linalg::rank;
use dc_core::operators::{build_color_operator, build_invariant_operator};
use dc_core::partition::{enumerate_partitions, integer_partitions, Outcome, SetPartition};
use dc_core::rational::{int, rat, Rational};
use dc_core::solver::*;
use dc_core::{DcError, Label, RationalMatrix};
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{binomial, naive_rank, unit_rational};

/// Consistency of `M x = b` from ranks of `M` and `[M | b]`.
fn solvable_oracle(m: &RationalMatrix, b: &[Rational]) -> bool {
    let rows = m.row_vectors();
    let augmented: Vec<Vec<Rational>> = rows
        .iter()
        .zip(b)
        .map(|(r, v)| r.iter().cloned().chain([v.clone()]).collect())
        .collect();
    naive_rank(rows) == naive_rank(augmented)
}

fn random_probability(rng: &mut ChaCha8Rng, len: usize) -> Vec<Rational> {
    let raw: Vec<i64> = (0..len).map(|_| rng.random_range(0..6)).collect();
    let total: i64 = raw.iter().sum::<i64>().max(1);
    let mut q: Vec<Rational> = raw.iter().map(|&v| rat(v, total)).collect();
    if raw.iter().all(|&v| v == 0) {
        q[0] = int(1);
    }
    q
}

fn symmetric(n: usize, values: &[Rational]) -> MeasureVector {
    let full = (1usize << n) - 1;
    let v: Vec<Rational> = (0..1 << n).map(|i| values[i.min(full ^ i)].clone()).collect();
    MeasureVector::new(n, v).unwrap()
}

#[test]
fn in_range_examples() {
    let flip = symmetric(3, &(0..8).map(|i| rat(i, 28)).collect::<Vec<_>>());
    assert!(in_range(&flip, &rat(1, 2)).unwrap());
    assert!(in_range(&MeasureVector::product(3, &rat(1, 3)).unwrap(), &rat(1, 3)).unwrap());
    let ones = MeasureVector::point_mass(Outcome::parse("111").unwrap());
    assert!(!in_range(&ones, &rat(1, 3)).unwrap());
    assert!(!in_range(&ones, &rat(1, 2)).unwrap());
    assert!(matches!(in_range(&ones, &int(0)), Err(DcError::Domain(_))));
    assert!(matches!(in_range(&ones, &int(1)), Err(DcError::Domain(_))));
}

#[test]
fn range_conditions_match_elimination() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 1..=4 {
        for p in [rat(1, 3), rat(1, 2), rat(3, 7)] {
            let a = build_color_operator(n, &p).unwrap();
            for trial in 0..25 {
                let values: Vec<Rational> = if trial % 2 == 0 {
                    let q = random_probability(&mut rng, a.cols());
                    let mut nu = a.mul_vec(&q).unwrap();
                    if trial % 4 == 0 {
                        let k = rng.random_range(0..nu.len());
                        nu[k] += rat(1, 13);
                    }
                    nu
                } else {
                    (0..1 << n).map(|_| rat(rng.random_range(0..5), 4)).collect()
                };
                let nu = MeasureVector::new(n, values).unwrap();
                assert_eq!(in_range(&nu, &p).unwrap(), solvable_oracle(&a, nu.values()));
            }
        }
    }
}

#[test]
fn half_solution_examples() {
    let a = build_color_operator(2, &rat(1, 2)).unwrap();
    let one_block = a.col_index(&Label::Partition(SetPartition::one_block(2))).unwrap();
    let singletons = a.col_index(&Label::Partition(SetPartition::singletons(2))).unwrap();

    let correlated = symmetric(2, &[rat(1, 2), int(0), int(0), int(0)]);
    let q = half_solution(&correlated).unwrap();
    assert!(q[one_block].is_one() && q[singletons].is_zero());

    let uniform = MeasureVector::new(2, vec![rat(1, 4); 4]).unwrap();
    let q = half_solution(&uniform).unwrap();
    assert!(q[one_block].is_zero() && q[singletons].is_one());
    assert_eq!(a.mul_vec(&q).unwrap(), uniform.values());

    let asymmetric = MeasureVector::point_mass(Outcome::parse("01").unwrap());
    assert!(matches!(half_solution(&asymmetric), Err(DcError::Precondition(_))));
}

#[test]
fn half_solution_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 1..=6 {
        let a = build_color_operator(n, &rat(1, 2)).unwrap();
        let partitions = enumerate_partitions(n).unwrap();
        for _ in 0..15 {
            let raw: Vec<Rational> = (0..1 << n).map(|_| rat(rng.random_range(0..9), 1)).collect();
            let nu = symmetric(n, &raw);
            let total = nu.total();
            let nu = if total.is_zero() {
                symmetric(n, &[rat(1, 2)].into_iter().chain(vec![int(0); (1 << n) - 1]).collect::<Vec<_>>())
            } else {
                MeasureVector::new(n, nu.values().iter().map(|v| v / &total).collect()).unwrap()
            };
            let q = half_solution(&nu).unwrap();
            assert_eq!(a.mul_vec(&q).unwrap(), nu.values());
            for (j, sigma) in partitions.iter().enumerate() {
                if sigma.num_blocks() > 2 {
                    assert!(q[j].is_zero());
                }
            }
            let constant = &nu.values()[0] + &nu.values()[(1 << n) - 1];
            let j = partitions.iter().position(|s| s.num_blocks() == 1).unwrap();
            assert_eq!(q[j], int(1) - int(2) * (int(1) - &constant));
            assert_eq!(q.iter().all(|v| !v.is_negative()), constant >= rat(1, 2));
        }
    }
}

#[test]
fn solve_dc_recovers_random_images() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 1..=5 {
        for p in [rat(1, 3), rat(1, 2), rat(2, 5)] {
            let a = build_color_operator(n, &p).unwrap();
            for _ in 0..3 {
                let q = random_probability(&mut rng, a.cols());
                let nu = MeasureVector::new(n, a.mul_vec(&q).unwrap()).unwrap();
                let report = solve_dc(&nu, &p).unwrap();
                assert!(report.in_range);
                let found = report.nonnegative.clone().unwrap();
                assert!(found.iter().all(|v| !v.is_negative()));
                assert_eq!(a.mul_vec(&found).unwrap(), nu.values());
                assert_eq!(report.formal.rank + report.formal.dimension, a.cols());
                let json = report.to_json();
                assert_eq!(json["in_range"], true);
            }
        }
    }
    let p = rat(1, 3);
    let nu = dc_image(&[vec![int(0); 202], vec![int(1)]].concat(), 6, &p).unwrap();
    let report = solve_dc(&nu, &p).unwrap();
    assert!(report.in_range && report.nonnegative.is_some());
}

#[test]
fn solve_dc_kernel_dimensions() {
    let q = vec![rat(1, 5); 5];
    let nu = dc_image(&q, 3, &rat(1, 3)).unwrap();
    let report = solve_dc(&nu, &rat(1, 3)).unwrap();
    assert_eq!(report.formal.dimension, 0);
    assert_eq!(report.unique_nonnegative, Some(true));
    assert_eq!(report.nonnegative, Some(q.clone()));

    let nu = dc_image(&q, 3, &rat(1, 2)).unwrap();
    let report = solve_dc(&nu, &rat(1, 2)).unwrap();
    assert_eq!(report.formal.dimension, 1);
    // Strictly positive with a nontrivial kernel: never unique.
    assert_eq!(report.unique_nonnegative, Some(false));

    let out = MeasureVector::point_mass(Outcome::parse("100").unwrap());
    let report = solve_dc(&out, &rat(1, 3)).unwrap();
    assert!(!report.in_range && report.nonnegative.is_none() && report.unique_nonnegative.is_none());
}

#[test]
fn uniqueness_at_half_for_correlated_measure() {
    let n = 3;
    let p = rat(1, 2);
    let a = build_color_operator(n, &p).unwrap();
    let nu = symmetric(n, &[rat(1, 2), int(0), int(0), int(0), int(0), int(0), int(0), int(0)]);
    let q = half_solution(&nu).unwrap();
    let report = solve_dc(&nu, &p).unwrap();
    let kernel = report.formal.kernel_basis.clone();
    assert_eq!(kernel.len(), 1);
    // Independent check: q + t k stays nonnegative only at t = 0.
    let k = &kernel[0];
    let admissible = |t: &Rational| q.iter().zip(k).all(|(a, b)| !(a + t * b).is_negative());
    for t in [rat(1, 100), rat(-1, 100), rat(1, 1000000), rat(-1, 1000000)] {
        assert!(!admissible(&t));
    }
    assert!(uniqueness_of_representation(&q, &kernel).unwrap());
    assert_eq!(report.unique_nonnegative, Some(true));
    assert_eq!(a.mul_vec(&q).unwrap(), nu.values());

    assert!(uniqueness_of_representation(&[int(1), int(0)], &[]).unwrap());
    assert!(!uniqueness_of_representation(&[int(1), int(1)], &[vec![int(1), int(-1)]]).unwrap());
    assert!(!uniqueness_of_representation(&[int(1), int(0)], &[vec![int(1), int(-1)]]).unwrap());
    assert!(uniqueness_of_representation(&[int(1), int(0), int(0)], &[vec![int(0), int(1), int(-1)]]).unwrap());
    assert!(uniqueness_of_representation(&[int(-1)], &[]).is_err());
}

#[test]
fn invariant_examples() {
    let report = solve_invariant(&[rat(1, 2), int(0), int(0), rat(1, 2)], &rat(1, 2)).unwrap();
    assert!(report.in_range);
    let shapes = integer_partitions(3);
    let full = shapes.iter().position(|s| s.parts() == [3]).unwrap();
    let mut point = vec![Rational::zero(); shapes.len()];
    point[full] = Rational::one();
    let a = build_invariant_operator(3, &rat(1, 2)).unwrap();
    assert_eq!(a.mul_vec(&point).unwrap(), vec![rat(1, 2), int(0), int(0), rat(1, 2)]);
    assert_eq!(report.lift_verified, Some(true));

    let a = build_invariant_operator(4, &rat(1, 3)).unwrap();
    assert_eq!(rank(&a), 4);
    let q = vec![rat(1, 5); 5];
    let per_outcome = a.mul_vec(&q).unwrap();
    let levels: Vec<Rational> = per_outcome
        .iter()
        .enumerate()
        .map(|(k, v)| v * int(binomial(4, k) as i64))
        .collect();
    assert!(levels.iter().sum::<Rational>().is_one());
    let report = solve_invariant(&levels, &rat(1, 3)).unwrap();
    assert!(report.in_range);
    assert_eq!(report.formal.dimension, 1);
    assert!(report.nonnegative.is_some());
    assert_eq!(report.lift_verified, Some(true));

    assert!(!invariant_in_range(&[int(1), int(0), int(0)], &rat(1, 3)).unwrap());
    assert!(!invariant_in_range(&[int(1), int(0), int(0)], &rat(1, 2)).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn level_conditions_match_outcome_conditions(n in 1usize..=5, raw in proptest::collection::vec(unit_rational(), 6),
                                                 half in any::<bool>()) {
        let p = if half { rat(1, 2) } else { rat(2, 7) };
        let mut levels: Vec<Rational> = raw.into_iter().take(n + 1).collect();
        // Half the cases are projected onto the range.
        if levels.len().is_multiple_of(2) {
            let a = build_invariant_operator(n, &p).unwrap();
            let q: Vec<Rational> = (0..a.cols()).map(|j| levels[j % levels.len()].clone()).collect();
            levels = a.mul_vec(&q).unwrap().iter().enumerate()
                .map(|(k, v)| v * int(binomial(n, k) as i64)).collect();
        }
        let full = symmetric_measure(&levels).unwrap();
        prop_assert_eq!(invariant_in_range(&levels, &p).unwrap(), in_range(&full, &p).unwrap());
        let report = solve_invariant(&levels, &p).unwrap();
        prop_assert_eq!(report.in_range, invariant_in_range(&levels, &p).unwrap());
        if report.in_range {
            prop_assert_eq!(report.lift_verified, Some(true));
        }
    }
}

#[test]
fn sampler_point_masses() {
    let n = 3;
    let partitions = enumerate_partitions(n).unwrap();
    let p = rat(1, 3);
    let mut singletons = vec![Rational::zero(); partitions.len()];
    singletons[partitions.len() - 1] = Rational::one();
    let sample = sample_dc(&singletons, n, &p, 200_000, 9).unwrap();
    let product = MeasureVector::product(n, &p).unwrap();
    assert!(sample.total_variation(&product).unwrap() < 0.01);

    let mut block = vec![Rational::zero(); partitions.len()];
    block[0] = Rational::one();
    let sample = sample_dc(&block, n, &p, 100_000, 9).unwrap();
    for (i, v) in sample.values().iter().enumerate() {
        if i != 0 && i != 7 {
            assert!(v.is_zero());
        }
    }
    assert!((dc_core::rational::to_f64(&sample.values()[7]) - 1.0 / 3.0).abs() < 0.01);
}

#[test]
fn sampler_is_deterministic_and_validates() {
    let q = vec![rat(1, 5); 5];
    let a = sample_dc(&q, 3, &rat(2, 5), 10_001, 42).unwrap();
    let b = sample_dc(&q, 3, &rat(2, 5), 10_001, 42).unwrap();
    assert_eq!(a, b);
    assert!(a.is_probability());
    assert_ne!(a, sample_dc(&q, 3, &rat(2, 5), 10_001, 43).unwrap());
    assert!(sample_dc(&vec![rat(1, 2); 5], 3, &rat(1, 3), 10, 1).is_err());
    assert!(sample_dc(&q, 3, &rat(1, 3), 0, 1).is_err());
    assert!(sample_dc(&q[..4], 3, &rat(1, 3), 10, 1).is_err());
}

#[test]
fn measure_json_forms() {
    let nu = MeasureVector::product(2, &rat(1, 3)).unwrap();
    let back = MeasureVector::from_json(&nu.to_json(), None).unwrap();
    assert_eq!(back, nu);
    let bare = serde_json::json!({"00": "1/2", "11": 1});
    let parsed = MeasureVector::from_json(&bare, None).unwrap();
    assert_eq!(parsed.values(), &[rat(1, 2), int(0), int(0), int(1)]);
    assert!(MeasureVector::from_json(&serde_json::json!({"00": 0.5}), None).is_err());
    assert!(MeasureVector::from_json(&serde_json::json!({"00": "1", "111": "1"}), None).is_err());
    let moments = nu.moments();
    assert_eq!(moments[0b11], rat(1, 9));
    assert!(moments[0].is_one());
}
