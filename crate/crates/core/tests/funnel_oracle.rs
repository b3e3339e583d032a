use funnel_mpc::funnel::IDENTITY;
use funnel_mpc::{build_funnel, funnel_distance_sq, gaussian_quantile, BeliefTrajectory};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Φ⁻¹ by bisection on Φ(z) = ½ erfc(−z/√2).
fn quantile_by_bisection(p: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 0.5 * libm::erfc(-mid / std::f64::consts::SQRT_2) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn random_belief(rng: &mut StdRng, n: usize) -> BeliefTrajectory {
    let s = (0..=n).map(|i| 15.0 * i as f64).collect();
    let mean = (0..=n).map(|_| std::array::from_fn(|_| rng.random_range(-0.5..0.5))).collect();
    let mut std: Vec<[f64; 4]> = Vec::new();
    let mut prev = [0.0; 4];
    for _ in 0..=n {
        let row: [f64; 4] = std::array::from_fn(|c| prev[c] + rng.random_range(0.0..0.05));
        std.push(row);
        prev = row;
    }
    BeliefTrajectory::new(0, s, mean, std).unwrap()
}

#[test]
fn quantile_matches_bisection() {
    let probes = [
        1e-9, 1e-6, 0.001, 0.01, 0.025, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.975, 0.99, 0.999, 1.0 - 1e-6,
    ];
    for p in probes {
        let oracle = quantile_by_bisection(p);
        let got = gaussian_quantile(p).unwrap();
        assert!((got - oracle).abs() <= 1e-9, "p={p}: {got} vs {oracle}");
    }
    assert!((quantile_by_bisection(0.8) - 0.8416212335729143).abs() < 1e-12);
    assert!((quantile_by_bisection(0.975) - 1.959963984540054).abs() < 1e-12);
}

#[test]
fn edges_grow_with_rho() {
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..200 {
        let b = random_belief(&mut rng, 12);
        let mut r1: f64 = rng.random_range(0.0..0.99);
        let mut r2: f64 = rng.random_range(0.0..0.99);
        if r1 > r2 {
            std::mem::swap(&mut r1, &mut r2);
        }
        let (f1, f2) = (build_funnel(&b, r1).unwrap(), build_funnel(&b, r2).unwrap());
        for (e1, e2) in f1.edges.iter().zip(&f2.edges) {
            for c in 0..4 {
                assert!(e1[c] <= e2[c]);
                assert!(e1[c] >= 0.0);
            }
        }
    }
}

#[test]
fn funnel_distance_never_exceeds_tracking_distance() {
    let mut rng = StdRng::seed_from_u64(12);
    let b = random_belief(&mut rng, 12);
    let f = build_funnel(&b, 0.6).unwrap();
    let cec = build_funnel(&b, 0.0).unwrap();
    for _ in 0..1000 {
        let x: Vec<[f64; 4]> = (0..13).map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))).collect();
        let direct: f64 = x
            .iter()
            .zip(&b.mean)
            .map(|(xi, m)| (0..4).map(|c| (xi[c] - m[c]).powi(2)).sum::<f64>())
            .sum();
        let relaxed = funnel_distance_sq(&x, &f, &IDENTITY).unwrap();
        let degenerate = funnel_distance_sq(&x, &cec, &IDENTITY).unwrap();
        assert!(relaxed <= direct + 1e-12);
        assert!((degenerate - direct).abs() <= 1e-12 * (1.0 + direct));
    }
}

#[test]
fn funnel_distance_is_midpoint_convex() {
    let mut rng = StdRng::seed_from_u64(13);
    let b = random_belief(&mut rng, 6);
    let f = build_funnel(&b, 0.8).unwrap();
    let w = [[2.0, 0.3, 0.0, 0.0], [0.3, 1.0, 0.1, 0.0], [0.0, 0.1, 0.5, 0.0], [0.0, 0.0, 0.0, 1.0]];
    for _ in 0..200 {
        let x: Vec<[f64; 4]> = (0..7).map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))).collect();
        let y: Vec<[f64; 4]> = (0..7).map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))).collect();
        let mid: Vec<[f64; 4]> = x.iter().zip(&y).map(|(a, c)| std::array::from_fn(|k| 0.5 * (a[k] + c[k]))).collect();
        for q in [&IDENTITY, &w] {
            let fx = funnel_distance_sq(&x, &f, q).unwrap();
            let fy = funnel_distance_sq(&y, &f, q).unwrap();
            let fm = funnel_distance_sq(&mid, &f, q).unwrap();
            assert!(fm <= 0.5 * (fx + fy) + 1e-9);
        }
    }
}

#[test]
fn nearly_full_mass_removes_the_tracking_cost() {
    let mut rng = StdRng::seed_from_u64(14);
    let s = (0..=4).map(|i| 10.0 * i as f64).collect();
    let mean = vec![[0.0; 4]; 5];
    let std = vec![[0.1; 4]; 5];
    let b = BeliefTrajectory::new(0, s, mean, std).unwrap();
    let f = build_funnel(&b, 1.0 - 1e-6).unwrap();
    // Half-width 4.89·0.1 covers every coordinate drawn from (−0.45, 0.45).
    for _ in 0..100 {
        let x: Vec<[f64; 4]> = (0..5).map(|_| std::array::from_fn(|_| rng.random_range(-0.45..0.45))).collect();
        assert!(funnel_distance_sq(&x, &f, &IDENTITY).unwrap() < 1e-12);
    }
}
