//! Test-only oracles shared by the integration suites.
#![allow(dead_code)]

use funnel_mpc::qp::QpProblem;
use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::Rng;

/// Exhaustive active-set enumeration: every variable with a finite bound is
/// either free or pinned at one of its finite bounds; fixed variables
/// (`lb == ub`) are always pinned. Each pattern yields an equality-constrained
/// QP solved through its KKT system; the feasible pattern with the smallest
/// objective is the optimum of a convex QP with a unique minimizer.
pub fn brute_force_qp(p: &QpProblem) -> Option<(Vec<f64>, f64)> {
    let n = p.n();
    let m = p.m();
    let mut options: Vec<(usize, Vec<Option<f64>>)> = Vec::new();
    let mut always = Vec::new();
    for i in 0..n {
        if p.lb[i] == p.ub[i] {
            always.push((i, p.lb[i]));
            continue;
        }
        let mut o = vec![None];
        o.extend(p.lb[i].is_finite().then_some(Some(p.lb[i])));
        o.extend(p.ub[i].is_finite().then_some(Some(p.ub[i])));
        if o.len() > 1 {
            options.push((i, o));
        }
    }
    let patterns: usize = options.iter().map(|(_, o)| o.len()).product();
    let mut best: Option<(Vec<f64>, f64)> = None;
    'pattern: for code in 0..patterns {
        let mut pins = always.clone();
        let mut c = code;
        for (i, o) in &options {
            if let Some(v) = o[c % o.len()] {
                pins.push((*i, v));
            }
            c /= o.len();
        }
        let k = m + pins.len();
        let dim = n + k;
        let mut kkt = DMatrix::<f64>::zeros(dim, dim);
        let mut rhs = DVector::<f64>::zeros(dim);
        for i in 0..n {
            for j in 0..n {
                kkt[(i, j)] = p.h_at(i, j);
            }
            rhs[i] = -p.g[i];
        }
        for r in 0..m {
            for j in 0..n {
                kkt[(n + r, j)] = p.a_at(r, j);
                kkt[(j, n + r)] = p.a_at(r, j);
            }
            rhs[n + r] = p.b_eq[r];
        }
        for (q, &(i, v)) in pins.iter().enumerate() {
            kkt[(n + m + q, i)] = 1.0;
            kkt[(i, n + m + q)] = 1.0;
            rhs[n + m + q] = v;
        }
        let Ok(sol) = kkt.clone().svd(true, true).solve(&rhs, 1e-12) else {
            continue;
        };
        if (&kkt * &sol - &rhs).amax() > 1e-9 * (1.0 + rhs.amax()) {
            continue;
        }
        let x: Vec<f64> = sol.iter().take(n).copied().collect();
        for i in 0..n {
            let slack = 1e-10 * (1.0 + x[i].abs());
            if x[i] < p.lb[i] - slack || x[i] > p.ub[i] + slack {
                continue 'pattern;
            }
        }
        let obj = p.objective(&x);
        if best.as_ref().is_none_or(|(_, b)| obj < *b) {
            best = Some((x, obj));
        }
    }
    best
}

/// Random strictly convex QP with a known interior-or-boundary feasible point.
pub fn random_qp(rng: &mut StdRng, n: usize, m: usize) -> QpProblem {
    let mut p = QpProblem::new(n, m);
    let f = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let h = f.transpose() * &f + DMatrix::<f64>::identity(n, n) * 0.1;
    for i in 0..n {
        for j in 0..n {
            *p.h_mut(i, j) = h[(i, j)];
        }
        p.g[i] = rng.random_range(-3.0..3.0);
    }
    let feasible: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    for i in 0..n {
        match rng.random_range(0..4) {
            0 => {}
            1 => p.lb[i] = feasible[i] - rng.random_range(0.0..1.0),
            2 => p.ub[i] = feasible[i] + rng.random_range(0.0..1.0),
            _ => {
                p.lb[i] = feasible[i] - rng.random_range(0.0..1.0);
                p.ub[i] = feasible[i] + rng.random_range(0.0..1.0);
            }
        }
    }
    for r in 0..m {
        for j in 0..n {
            *p.a_mut(r, j) = rng.random_range(-1.0..1.0);
        }
        p.b_eq[r] = (0..n).map(|j| p.a_at(r, j) * feasible[j]).sum();
    }
    p
}
