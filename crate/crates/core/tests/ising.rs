use dc_core::ising::*;
use dc_core::partition::enumerate_partitions;
use dc_core::DcError;

/// Triangle weights summed directly over spin configurations; bit `3 - i` of
/// the outcome is spin `i`, with `+1 <-> 1`.
fn measure_oracle(j: f64, h: f64) -> Vec<f64> {
    let spin = |bits: usize, i: usize| if bits >> (3 - i) & 1 == 1 { 1.0 } else { -1.0 };
    let w: Vec<f64> = (0..8)
        .map(|b| {
            let s = [spin(b, 1), spin(b, 2), spin(b, 3)];
            (j * (s[0] * s[1] + s[0] * s[2] + s[1] * s[2]) + h * (s[0] + s[1] + s[2])).exp()
        })
        .collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|v| v / z).collect()
}

/// `A_{3,p} q` by colouring each block independently.
fn image_oracle(p: f64, q: &[f64]) -> Vec<f64> {
    let partitions = enumerate_partitions(3).unwrap();
    let mut nu = vec![0.0; 8];
    for (sigma, weight) in partitions.iter().zip(q) {
        let masks = sigma.block_masks();
        for colors in 0u32..1 << masks.len() {
            let mut rho = 0;
            let mut prob = *weight;
            for (b, m) in masks.iter().enumerate() {
                if colors >> b & 1 == 1 {
                    rho |= m;
                    prob *= p;
                } else {
                    prob *= 1.0 - p;
                }
            }
            nu[rho as usize] += prob;
        }
    }
    nu
}

/// Random-cluster law over the eight edge sets, cluster weight 2.
fn rcm_oracle(j: f64) -> (f64, f64, f64) {
    let r = 1.0 - (-2.0 * j).exp();
    let mut by_blocks = [0.0; 3];
    let mut z = 0.0;
    for edges in 0u32..8 {
        let k = edges.count_ones();
        // Clusters: 0 edges -> 3, 1 edge -> 2, 2 or 3 edges -> 1.
        let clusters = match k {
            0 => 3,
            1 => 2,
            _ => 1,
        };
        let w = r.powi(k as i32) * (1.0 - r).powi(3 - k as i32) * 2f64.powi(clusters);
        by_blocks[clusters as usize - 1] += w;
        z += w;
    }
    (by_blocks[0] / z, by_blocks[1] / z, by_blocks[2] / z)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

const J_GRID: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];
const H_GRID: [f64; 3] = [1e-1, 1e-2, 1e-3];

#[test]
fn measure_matches_direct_weights() {
    for j in [0.0, 0.3, 1.0, 2.5] {
        for h in [-0.7, 0.0, 0.05, 1.2] {
            let nu = ising_triangle_measure(j, h).unwrap();
            assert!(max_diff(&nu, &measure_oracle(j, h)) < 1e-15);
            let flipped = ising_triangle_measure(j, -h).unwrap();
            for b in 0..8 {
                assert!((nu[b] - flipped[7 ^ b]).abs() < 1e-15);
            }
        }
    }
    assert!(max_diff(&ising_triangle_measure(0.0, 0.0).unwrap(), &[0.125; 8]) < 1e-15);
    let cold = ising_triangle_measure(8.0, 0.0).unwrap();
    assert!(cold[0] + cold[7] > 1.0 - 1e-9);
    assert!(ising_triangle_measure(-1.0, 0.0).is_err());
}

#[test]
fn marginal_and_field() {
    for h in [-1.0, 0.2, 2.0] {
        let p = marginal_p(0.0, h).unwrap();
        assert!((p - h.exp() / (h.exp() + (-h).exp())).abs() < 1e-14);
    }
    for j in J_GRID {
        assert_eq!(solve_h(j, 0.5).unwrap(), 0.0);
        let mut last = f64::NEG_INFINITY;
        for p in [0.1, 0.3, 0.49, 0.51, 0.9] {
            let h = solve_h(j, p).unwrap();
            assert!(h > last);
            last = h;
            assert!((marginal_p(j, h).unwrap() - p).abs() < 1e-12);
        }
        let eps = 1e-6;
        let numeric = (marginal_p(j, eps).unwrap() - marginal_p(j, -eps).unwrap()) / (2.0 * eps);
        assert!((numeric - p_prime_at_zero(j)).abs() < 1e-8);
        let (a, b) = ((3.0 * j).exp(), (-j).exp());
        assert!((p_prime_at_zero(j) - (3.0 * a + b) / (2.0 * a + 6.0 * b)).abs() < 1e-12);
    }
    assert!(solve_h(1.0, 0.0).is_err());
    assert!(solve_h(1.0, 1.0).is_err());
}

#[test]
fn representations_over_the_grid() {
    for j in J_GRID {
        for h in H_GRID {
            let rep = unique_representation(j, h).unwrap();
            assert!(rep.residual < 1e-9);
            let nu = measure_oracle(j, h);
            assert!(max_diff(&image_oracle(rep.p, &rep.q), &nu) < 1e-9);
            // Exchangeable measure, so the two-block partitions share weight.
            assert!((rep.q[1] - rep.q[2]).abs() < 1e-9 && (rep.q[2] - rep.q[3]).abs() < 1e-9);
            assert!((rep.q.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
    let free = unique_representation(0.0, 0.4).unwrap();
    assert!(max_diff(&free.q, &[0.0, 0.0, 0.0, 0.0, 1.0]) < 1e-9);
    assert!(matches!(unique_representation(1.0, 0.0), Err(DcError::Precondition(_))));
}

#[test]
fn regression_at_unit_coupling() {
    let rep = unique_representation(1.0, 0.1).unwrap();
    let expected = [
        0.904_201_783_439_977_8,
        0.023_277_352_284_951_08,
        0.023_277_352_284_951_08,
        0.023_277_352_284_951_08,
        0.025_966_159_705_169,
    ];
    assert!((rep.p - 0.639_181_326_635_02).abs() < 1e-12);
    assert!(max_diff(&rep.q, &expected) < 1e-9);
}

#[test]
fn limit_representation_values() {
    let zero = limit_representation(0.0).unwrap();
    assert!(zero.max_distance(&TriangleSolution { q1: 0.0, q2: 0.0, q3: 1.0 }) < 1e-12);
    for j in J_GRID {
        let limit = limit_representation(j).unwrap();
        let e = (4.0 * j).exp();
        let closed = 12.0 * (e - 1.0) / ((3.0 + e) * (1.0 + 3.0 * e));
        assert!((limit.q2 - closed).abs() < 1e-10);
        assert!((q2_limit_closed_form(j) - closed).abs() < 1e-15);
        assert!(limit.q1 > 0.0 && limit.q2 > 0.0 && limit.q3 > 0.0);
        assert!((limit.q1 + limit.q2 + limit.q3 - 1.0).abs() < 1e-12);
        let nu0 = measure_oracle(j, 0.0);
        assert!(max_diff(&image_oracle(0.5, &limit.to_partition_vector()), &nu0) < 1e-9);
        assert!(full_limiting_residual(j, &limit.to_partition_vector()).unwrap() < 1e-9);
    }
    let j1 = limit_representation(1.0).unwrap();
    assert!(j1.max_distance(&TriangleSolution { q1: 0.90797, q2: 0.06776, q3: 0.02427 }) < 1e-5);
}

#[test]
fn random_cluster_representation() {
    let free = rcm_representation(0.0).unwrap();
    assert!(max_diff(&free, &[0.0, 0.0, 0.0, 0.0, 1.0]) < 1e-15);
    for j in J_GRID {
        let q = rcm_representation(j).unwrap();
        let blocks = TriangleSolution::from_partition_vector(&q).unwrap();
        let (o1, o2, o3) = rcm_oracle(j);
        assert!(blocks.max_distance(&TriangleSolution { q1: o1, q2: o2, q3: o3 }) < 1e-12);
        let closed = 6.0 * (-2.0 * j).exp() * ((2.0 * j).exp() - 1.0) / (3.0 + (4.0 * j).exp());
        assert!((blocks.q2 - closed).abs() < 1e-10);
        assert!((q2_rcm_closed_form(j) - closed).abs() < 1e-15);
        assert!(max_diff(&image_oracle(0.5, &q), &measure_oracle(j, 0.0)) < 1e-9);
        assert!(image_residual(0.5, &q, &measure_oracle(j, 0.0)).unwrap() < 1e-9);
    }
}

#[test]
fn corollary_gap_and_convergence() {
    let rows = corollary_report(&J_GRID, &H_GRID).unwrap();
    for row in &rows {
        assert!(row.gap > 0.0, "J = {}", row.j);
        assert!((row.limit.q2 - row.q2_closed_form).abs() < 1e-10);
        assert!((row.q2_rcm - q2_rcm_closed_form(row.j)).abs() < 1e-10);
        assert!(row.limit_residual < 1e-9 && row.rcm_residual < 1e-9);
        let distances: Vec<f64> = row.field_points.iter().map(|f| f.distance).collect();
        assert!(distances.windows(2).all(|w| w[1] < w[0]));
        assert!(*distances.last().unwrap() < 1e-2);
        assert!(*distances.last().unwrap() < 1e-6);
        // At least first order; the symmetric family gives second order.
        assert!(row.convergence_order.unwrap() > 0.9);
    }
    let tiny = corollary_report(&[1e-4], &[1e-3]).unwrap();
    assert!(tiny[0].gap > 0.0 && tiny[0].gap < 1e-3);
    let zero = corollary_report(&[0.0], &[1e-2]).unwrap();
    assert!(zero[0].gap.abs() < 1e-12);
}

#[test]
fn formal_solutions_near_half_approach_limit() {
    for j in [0.5, 1.0, 2.0] {
        let limit = limit_representation(j).unwrap();
        for p in [0.5 + 1e-4, 0.5 - 1e-4] {
            let h = solve_h(j, p).unwrap();
            let rep = unique_representation(j, h).unwrap();
            let blocks = TriangleSolution::from_partition_vector(&rep.q).unwrap();
            assert!(blocks.max_distance(&limit) < 1e-3);
        }
    }
}

#[test]
fn corollary_outputs() {
    let rows = corollary_report(&[0.5, 1.0], &[1e-2]).unwrap();
    let csv = corollary_csv(&rows);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(format!("{CSV_HEADER},distance_h=1e-2").as_str()));
    assert_eq!(lines.count(), 2);
    let json = rows[1].to_json();
    assert_eq!(json["J"], 1.0);
    assert_eq!(json["field_points"].as_array().unwrap().len(), 1);
    let nu = measure_json(&ising_triangle_measure(1.0, 0.0).unwrap());
    assert!(nu.to_string().contains("111"));
}

#[test]
fn triangle_solution_round_trip() {
    let s = TriangleSolution { q1: 0.5, q2: 0.3, q3: 0.2 };
    let back = TriangleSolution::from_partition_vector(&s.to_partition_vector()).unwrap();
    assert!(back.max_distance(&s) < 1e-15);
    assert!(TriangleSolution::from_partition_vector(&[1.0, 0.0]).is_err());
}
