//! Dense convex QP with linear equalities and simple bounds:
//!
//! ```text
//! minimize    ½ xᵀ H x + gᵀ x
//! subject to  Aeq x = beq,  lb ≤ x ≤ ub
//! ```
//!
//! The solver eliminates fixed variables (`lb == ub`), parametrizes the
//! equality manifold with an orthonormal null-space basis, runs a
//! Mehrotra predictor-corrector interior point method on the remaining bound
//! constraints and finally polishes the iterate by re-solving the equality
//! QP on the identified active set. The result carries a KKT certificate;
//! callers should trust `kkt_residual`, not the iteration path.
//!
//! Flat directions of a PSD-but-singular H that touch no bound are resolved
//! towards the minimum-norm solution.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::linalg::{self, RowSpace};

const RANK_TOL: f64 = 1e-10;
const INCONSISTENCY_TOL: f64 = 1e-8;
const SYMMETRY_TOL: f64 = 1e-12;
/// Certificate threshold for reporting `Optimal`.
pub const OPTIMAL_KKT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    n: usize,
    m: usize,
    /// Row-major `n x n`.
    pub h: Vec<f64>,
    pub g: Vec<f64>,
    /// Row-major `m x n`.
    pub a_eq: Vec<f64>,
    pub b_eq: Vec<f64>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
}

impl QpProblem {
    /// Zero objective, zero equality rows and unbounded variables.
    pub fn new(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            h: vec![0.0; n * n],
            g: vec![0.0; n],
            a_eq: vec![0.0; m * n],
            b_eq: vec![0.0; m],
            lb: vec![f64::NEG_INFINITY; n],
            ub: vec![f64::INFINITY; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h_at(&self, i: usize, j: usize) -> f64 {
        self.h[i * self.n + j]
    }

    pub fn h_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.h[i * self.n + j]
    }

    pub fn a_at(&self, row: usize, col: usize) -> f64 {
        self.a_eq[row * self.n + col]
    }

    pub fn a_mut(&mut self, row: usize, col: usize) -> &mut f64 {
        &mut self.a_eq[row * self.n + col]
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.n, self.m);
        if self.h.len() != n * n
            || self.g.len() != n
            || self.a_eq.len() != m * n
            || self.b_eq.len() != m
            || self.lb.len() != n
            || self.ub.len() != n
        {
            return Err(Error::ShapeMismatch("QP data sizes disagree with (n, m)".to_string()));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.h) || !finite(&self.g) || !finite(&self.a_eq) || !finite(&self.b_eq) {
            return Err(Error::InvalidProblem("non-finite matrix or vector entry".to_string()));
        }
        for i in 0..n {
            for j in i + 1..n {
                if libm::fabs(self.h_at(i, j) - self.h_at(j, i)) > SYMMETRY_TOL {
                    return Err(Error::InvalidProblem(alloc::format!("H is not symmetric at ({i}, {j})")));
                }
            }
            let (lo, hi) = (self.lb[i], self.ub[i]);
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::InvalidProblem(alloc::format!("bad bounds [{lo}, {hi}] on variable {i}")));
            }
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let hx = linalg::mat_vec(&self.h, self.n, self.n, x);
        0.5 * linalg::dot(x, &hx) + linalg::dot(&self.g, x)
    }
}

/// Plain-text dump for offline inspection: one `name rows cols` header per
/// block followed by whitespace-separated rows.
impl fmt::Display for QpProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let block = |f: &mut fmt::Formatter<'_>, name: &str, data: &[f64], rows: usize, cols: usize| {
            writeln!(f, "{name} {rows} {cols}")?;
            for r in 0..rows {
                for c in 0..cols {
                    if c > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{:.17e}", data[r * cols + c])?;
                }
                writeln!(f)?;
            }
            Ok(())
        };
        block(f, "H", &self.h, self.n, self.n)?;
        block(f, "g", &self.g, self.n, 1)?;
        block(f, "Aeq", &self.a_eq, self.m, self.n)?;
        block(f, "beq", &self.b_eq, self.m, 1)?;
        block(f, "lb", &self.lb, self.n, 1)?;
        block(f, "ub", &self.ub, self.n, 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    /// The equality system is inconsistent or incompatible with the bounds.
    Infeasible,
    /// The objective decreases without limit along a feasible ray.
    Unbounded,
    /// Iteration cap reached; the solution holds the best iterate.
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu_lb: Vec<f64>,
    pub mu_ub: Vec<f64>,
    pub status: QpStatus,
    pub kkt_residual: f64,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Re-solve on the identified active set after the interior point phase.
    pub polish: bool,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 500, polish: true }
    }
}

/// Infinity norm over stationarity `Hx + g + Aeqᵀλ − μ_lb + μ_ub`, equality
/// residual, bound violation, multiplier sign and complementarity products.
///
/// A nonzero multiplier on an infinite bound counts as a violation of its
/// own size.
pub fn kkt_residual(p: &QpProblem, s: &QpSolution) -> f64 {
    let n = p.n;
    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
    if !(finite(&s.x) && finite(&s.lambda) && finite(&s.mu_lb) && finite(&s.mu_ub)) {
        return f64::INFINITY;
    }
    let mut stat = linalg::mat_vec(&p.h, n, n, &s.x);
    for i in 0..n {
        stat[i] += p.g[i] - s.mu_lb[i] + s.mu_ub[i];
    }
    for r in 0..p.m {
        if s.lambda[r] != 0.0 {
            linalg::axpy(s.lambda[r], &p.a_eq[r * n..(r + 1) * n], &mut stat);
        }
    }
    let mut res = linalg::norm_inf(&stat);
    for r in 0..p.m {
        let ax = linalg::dot(&p.a_eq[r * n..(r + 1) * n], &s.x);
        res = res.max(libm::fabs(ax - p.b_eq[r]));
    }
    for i in 0..n {
        let x = s.x[i];
        res = res.max(p.lb[i] - x).max(x - p.ub[i]);
        res = res.max(-s.mu_lb[i]).max(-s.mu_ub[i]);
        res = res.max(bound_complementarity(s.mu_lb[i], x - p.lb[i]));
        res = res.max(bound_complementarity(s.mu_ub[i], p.ub[i] - x));
    }
    if res.is_nan() {
        f64::INFINITY
    } else {
        res
    }
}

fn bound_complementarity(mu: f64, gap: f64) -> f64 {
    if gap.is_finite() {
        libm::fabs(mu * gap)
    } else {
        libm::fabs(mu)
    }
}

/// Minimizes the QP. Validation failures are errors; infeasibility,
/// unboundedness and the iteration cap are reported through the status.
pub fn solve(p: &QpProblem, opts: &QpOptions) -> Result<QpSolution> {
    p.validate()?;
    let fixed: Vec<Option<f64>> = (0..p.n).map(|i| (p.lb[i] == p.ub[i]).then_some(p.lb[i])).collect();
    let red = Reduction::new(p, &fixed);

    let (xp, inconsistency) = red.rows.particular(&red.b);
    if inconsistency > INCONSISTENCY_TOL * (1.0 + linalg::norm_inf(&red.b)) {
        return Ok(red.finish(red.expand(&xp), &[], &[], QpStatus::Infeasible, 0));
    }

    let outcome = InteriorPoint::new(&red, xp).run(opts);
    let mut best = red.finish(red.expand(&outcome.x), &outcome.mu_lb, &outcome.mu_ub, outcome.status, outcome.iterations);

    if opts.polish && matches!(outcome.status, QpStatus::Optimal | QpStatus::MaxIterations) {
        if let Some(polished) = polish(p, &red, &outcome, &fixed) {
            if polished.kkt_residual <= best.kkt_residual {
                best = QpSolution { iterations: best.iterations, status: best.status, ..polished };
            }
        }
    }
    // The problem is convex, so the KKT residual alone certifies optimality.
    if best.status == QpStatus::Optimal && best.kkt_residual > OPTIMAL_KKT {
        best.status = QpStatus::MaxIterations;
    } else if best.status == QpStatus::MaxIterations && best.kkt_residual <= OPTIMAL_KKT {
        best.status = QpStatus::Optimal;
    }
    Ok(best)
}

/// Problem restricted to the variables not pinned by `fixed`.
struct Reduction<'a> {
    p: &'a QpProblem,
    free: Vec<usize>,
    x_base: Vec<f64>,
    h: Vec<f64>,
    g: Vec<f64>,
    b: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    rows: RowSpace,
}

impl<'a> Reduction<'a> {
    fn new(p: &'a QpProblem, fixed: &[Option<f64>]) -> Self {
        let n = p.n;
        let free: Vec<usize> = (0..n).filter(|&i| fixed[i].is_none()).collect();
        let nf = free.len();
        let x_base: Vec<f64> = fixed.iter().map(|v| v.unwrap_or(0.0)).collect();
        let hx_base = linalg::mat_vec(&p.h, n, n, &x_base);
        let mut h = vec![0.0; nf * nf];
        for (r, &i) in free.iter().enumerate() {
            for (c, &j) in free.iter().enumerate() {
                h[r * nf + c] = p.h[i * n + j];
            }
        }
        let g = free.iter().map(|&i| p.g[i] + hx_base[i]).collect();
        let mut a = vec![0.0; p.m * nf];
        let mut b = p.b_eq.clone();
        for r in 0..p.m {
            let row = &p.a_eq[r * n..(r + 1) * n];
            b[r] -= linalg::dot(row, &x_base);
            for (c, &j) in free.iter().enumerate() {
                a[r * nf + c] = row[j];
            }
        }
        let rows = RowSpace::new(&a, p.m, nf, RANK_TOL);
        Self {
            p,
            lb: free.iter().map(|&i| p.lb[i]).collect(),
            ub: free.iter().map(|&i| p.ub[i]).collect(),
            free,
            x_base,
            h,
            g,
            b,
            rows,
        }
    }

    fn nf(&self) -> usize {
        self.free.len()
    }

    fn expand(&self, xr: &[f64]) -> Vec<f64> {
        let mut x = self.x_base.clone();
        for (r, &i) in self.free.iter().enumerate() {
            x[i] = xr[r];
        }
        x
    }

    /// Completes a primal point into a full solution. Equality multipliers
    /// come from least squares on the free coordinates; pinned coordinates
    /// absorb the remaining stationarity residual into their bound multipliers.
    fn finish(&self, x: Vec<f64>, mu_lb_free: &[f64], mu_ub_free: &[f64], status: QpStatus, iterations: usize) -> QpSolution {
        let p = self.p;
        let n = p.n;
        let mut grad = linalg::mat_vec(&p.h, n, n, &x);
        for i in 0..n {
            grad[i] += p.g[i];
        }
        let mut mu_lb = vec![0.0; n];
        let mut mu_ub = vec![0.0; n];
        let mut rhs = vec![0.0; self.nf()];
        for (r, &i) in self.free.iter().enumerate() {
            mu_lb[i] = mu_lb_free.get(r).copied().unwrap_or(0.0);
            mu_ub[i] = mu_ub_free.get(r).copied().unwrap_or(0.0);
            rhs[r] = -(grad[i] - mu_lb[i] + mu_ub[i]);
        }
        let lambda = self.rows.multipliers(&rhs);
        let at_lambda = linalg::mat_t_vec(&p.a_eq, p.m, n, &lambda);
        let mut is_free = vec![false; n];
        for &i in &self.free {
            is_free[i] = true;
        }
        for i in (0..n).filter(|&i| !is_free[i]) {
            let res = grad[i] + at_lambda[i];
            if res >= 0.0 {
                mu_lb[i] = res;
            } else {
                mu_ub[i] = -res;
            }
        }
        let objective = p.objective(&x);
        let mut sol = QpSolution { x, lambda, mu_lb, mu_ub, status, kkt_residual: 0.0, objective, iterations };
        sol.kkt_residual = kkt_residual(p, &sol);
        sol
    }
}

/// Symmetric solve that falls back to a minimum-norm eigen solve when the
/// matrix is singular to working precision.
enum SymFactor {
    Cholesky(Vec<f64>),
    Pseudo(Vec<f64>),
}

impl SymFactor {
    fn new(mut m: Vec<f64>, n: usize) -> Self {
        let orig = m.clone();
        if linalg::cholesky(&mut m, n, 1e-13) {
            SymFactor::Cholesky(m)
        } else {
            SymFactor::Pseudo(orig)
        }
    }

    fn solve(&self, n: usize, rhs: &[f64]) -> (Vec<f64>, f64) {
        match self {
            SymFactor::Cholesky(l) => {
                let mut x = rhs.to_vec();
                linalg::cholesky_solve(l, n, &mut x);
                (x, 0.0)
            }
            SymFactor::Pseudo(a) => linalg::pinv_solve(a, n, rhs, 1e-12),
        }
    }
}

struct IpmOutcome {
    x: Vec<f64>,
    mu_lb: Vec<f64>,
    mu_ub: Vec<f64>,
    status: QpStatus,
    iterations: usize,
    /// Final slacks for the lower and upper bounded coordinates.
    s: Vec<f64>,
    t: Vec<f64>,
    lo: Vec<usize>,
    hi: Vec<usize>,
}

struct InteriorPoint<'r, 'a> {
    red: &'r Reduction<'a>,
    xp: Vec<f64>,
    /// Null-space basis, row-major `nf x p`.
    z: Vec<f64>,
    dim: usize,
    /// Zᵀ H Z
    hzz: Vec<f64>,
    lo: Vec<usize>,
    hi: Vec<usize>,
}

impl<'r, 'a> InteriorPoint<'r, 'a> {
    fn new(red: &'r Reduction<'a>, xp: Vec<f64>) -> Self {
        let nf = red.nf();
        let dim = nf - red.rows.rank();
        let z = red.rows.null_basis();
        // H Z, skipping the (many) structural zeros of H.
        let mut hz = vec![0.0; nf * dim];
        for i in 0..nf {
            for k in 0..nf {
                let hik = red.h[i * nf + k];
                if hik != 0.0 {
                    let (dst, src) = (i * dim, k * dim);
                    for c in 0..dim {
                        hz[dst + c] += hik * z[src + c];
                    }
                }
            }
        }
        let mut hzz = vec![0.0; dim * dim];
        for i in 0..nf {
            for a in 0..dim {
                let zia = z[i * dim + a];
                if zia != 0.0 {
                    for b in a..dim {
                        hzz[a * dim + b] += zia * hz[i * dim + b];
                    }
                }
            }
        }
        symmetrize_upper(&mut hzz, dim);
        let lo = (0..nf).filter(|&i| red.lb[i].is_finite()).collect();
        let hi = (0..nf).filter(|&i| red.ub[i].is_finite()).collect();
        Self { red, xp, z, dim, hzz, lo, hi }
    }

    fn point(&self, y: &[f64]) -> Vec<f64> {
        let mut x = self.xp.clone();
        if self.dim > 0 {
            let zy = linalg::mat_vec(&self.z, self.red.nf(), self.dim, y);
            linalg::axpy(1.0, &zy, &mut x);
        }
        x
    }

    fn reduced_gradient(&self, x: &[f64], extra: &[f64]) -> Vec<f64> {
        let nf = self.red.nf();
        let mut grad = linalg::mat_vec(&self.red.h, nf, nf, x);
        for i in 0..nf {
            grad[i] += self.red.g[i] + extra[i];
        }
        linalg::mat_t_vec(&self.z, nf, self.dim, &grad)
    }

    fn outcome(&self, x: Vec<f64>, s: Vec<f64>, zl: &[f64], t: Vec<f64>, wu: &[f64], status: QpStatus, it: usize) -> IpmOutcome {
        let nf = self.red.nf();
        let mut mu_lb = vec![0.0; nf];
        let mut mu_ub = vec![0.0; nf];
        for (k, &i) in self.lo.iter().enumerate() {
            mu_lb[i] = zl[k];
        }
        for (k, &i) in self.hi.iter().enumerate() {
            mu_ub[i] = wu[k];
        }
        IpmOutcome { x, mu_lb, mu_ub, status, iterations: it, s, t, lo: self.lo.clone(), hi: self.hi.clone() }
    }

    fn run(&self, opts: &QpOptions) -> IpmOutcome {
        let nf = self.red.nf();
        let dim = self.dim;
        let (lb, ub) = (&self.red.lb, &self.red.ub);
        let zero = vec![0.0; nf];

        // Start from the bound-free minimizer on the equality manifold.
        let g0 = self.reduced_gradient(&self.xp, &zero);
        let base = SymFactor::new(self.hzz.clone(), dim);
        let neg_g0: Vec<f64> = g0.iter().map(|v| -v).collect();
        let (y0, res0) = base.solve(dim, &neg_g0);
        let mut y = y0;

        if self.lo.is_empty() && self.hi.is_empty() {
            let scale = 1.0 + linalg::norm_inf(&g0);
            let status = if res0 > 1e3 * opts.tol * scale { QpStatus::Unbounded } else { QpStatus::Optimal };
            return self.outcome(self.point(&y), vec![], &[], vec![], &[], status, 0);
        }

        let x0 = self.point(&y);
        let floor = |i: usize| {
            let width = ub[i] - lb[i];
            if width.is_finite() {
                0.25 * width.min(1.0)
            } else {
                1.0
            }
        };
        let mut s: Vec<f64> = self.lo.iter().map(|&i| (x0[i] - lb[i]).max(floor(i))).collect();
        let mut t: Vec<f64> = self.hi.iter().map(|&i| (ub[i] - x0[i]).max(floor(i))).collect();
        let dual0 = libm::sqrt(1.0 + linalg::norm_inf(&self.hzz));
        let mut zl = vec![dual0; self.lo.len()];
        let mut wu = vec![dual0; self.hi.len()];
        let nb = (self.lo.len() + self.hi.len()) as f64;

        let mut x = x0;
        let mut best: Option<(f64, usize, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> = None;
        for it in 0..opts.max_iter {
            let mut extra = vec![0.0; nf];
            for (k, &i) in self.lo.iter().enumerate() {
                extra[i] -= zl[k];
            }
            for (k, &i) in self.hi.iter().enumerate() {
                extra[i] += wu[k];
            }
            let rd = self.reduced_gradient(&x, &extra);
            let rl: Vec<f64> = self.lo.iter().enumerate().map(|(k, &i)| x[i] - lb[i] - s[k]).collect();
            let ru: Vec<f64> = self.hi.iter().enumerate().map(|(k, &i)| ub[i] - x[i] - t[k]).collect();
            let mu = (linalg::dot(&s, &zl) + linalg::dot(&t, &wu)) / nb;

            let dual_scale = 1.0 + linalg::norm_inf(&self.red.g).max(linalg::norm_inf(&extra));
            let primal_res = linalg::norm_inf(&rl).max(linalg::norm_inf(&ru));
            let primal_scale = 1.0 + linalg::norm_inf(&x);
            if linalg::norm_inf(&rd) <= opts.tol * dual_scale && primal_res <= opts.tol * primal_scale && mu <= 1e-2 * opts.tol {
                return self.outcome(x, s, &zl, t, &wu, QpStatus::Optimal, it);
            }
            // Tiny slacks make the Newton matrix ill-conditioned, so late
            // iterates can degrade; keep the best one and stop once stalled.
            let merit = (linalg::norm_inf(&rd) / dual_scale).max(primal_res / primal_scale).max(mu);
            match &best {
                Some((m, at, ..)) if merit >= *m => {
                    if *m <= libm::sqrt(opts.tol) && it - at >= 25 {
                        break;
                    }
                }
                _ => best = Some((merit, it, x.clone(), s.clone(), zl.clone(), t.clone(), wu.clone())),
            }
            let dual_size = linalg::norm_inf(&zl).max(linalg::norm_inf(&wu));
            if dual_size > 1e12 && primal_res > opts.tol * primal_scale {
                return self.outcome(x, s, &zl, t, &wu, QpStatus::Infeasible, it);
            }

            // Newton matrix Zᵀ (H + Σ) Z.
            let mut sigma = vec![0.0; nf];
            for (k, &i) in self.lo.iter().enumerate() {
                sigma[i] += zl[k] / s[k];
            }
            for (k, &i) in self.hi.iter().enumerate() {
                sigma[i] += wu[k] / t[k];
            }
            let mut m = self.hzz.clone();
            for i in 0..nf {
                if sigma[i] == 0.0 {
                    continue;
                }
                let row = &self.z[i * dim..(i + 1) * dim];
                for a in 0..dim {
                    let za = sigma[i] * row[a];
                    if za != 0.0 {
                        for b in a..dim {
                            m[a * dim + b] += za * row[b];
                        }
                    }
                }
            }
            symmetrize_upper(&mut m, dim);
            let factor = SymFactor::new(m, dim);

            let direction = |rc_l: &[f64], rc_u: &[f64]| {
                let mut q = vec![0.0; nf];
                for (k, &i) in self.lo.iter().enumerate() {
                    q[i] += (rc_l[k] - zl[k] * rl[k]) / s[k];
                }
                for (k, &i) in self.hi.iter().enumerate() {
                    q[i] -= (rc_u[k] - wu[k] * ru[k]) / t[k];
                }
                let mut rhs = linalg::mat_t_vec(&self.z, nf, dim, &q);
                for a in 0..dim {
                    rhs[a] -= rd[a];
                }
                let (dy, _) = factor.solve(dim, &rhs);
                let dx = if dim > 0 { linalg::mat_vec(&self.z, nf, dim, &dy) } else { vec![0.0; nf] };
                let ds: Vec<f64> = self.lo.iter().enumerate().map(|(k, &i)| dx[i] + rl[k]).collect();
                let dz: Vec<f64> = (0..s.len()).map(|k| (rc_l[k] - zl[k] * ds[k]) / s[k]).collect();
                let dt: Vec<f64> = self.hi.iter().enumerate().map(|(k, &i)| ru[k] - dx[i]).collect();
                let dw: Vec<f64> = (0..t.len()).map(|k| (rc_u[k] - wu[k] * dt[k]) / t[k]).collect();
                (dy, ds, dz, dt, dw)
            };

            let rc_l: Vec<f64> = (0..s.len()).map(|k| -s[k] * zl[k]).collect();
            let rc_u: Vec<f64> = (0..t.len()).map(|k| -t[k] * wu[k]).collect();
            let (_, ds_a, dz_a, dt_a, dw_a) = direction(&rc_l, &rc_u);
            let alpha_a = max_step(&[(&s, &ds_a), (&zl, &dz_a), (&t, &dt_a), (&wu, &dw_a)]).min(1.0);
            let mu_aff = ((0..s.len()).map(|k| (s[k] + alpha_a * ds_a[k]) * (zl[k] + alpha_a * dz_a[k])).sum::<f64>()
                + (0..t.len()).map(|k| (t[k] + alpha_a * dt_a[k]) * (wu[k] + alpha_a * dw_a[k])).sum::<f64>())
                / nb;
            let centering = libm::pow(mu_aff / mu, 3.0).min(1.0);

            let rc_l: Vec<f64> = (0..s.len()).map(|k| centering * mu - s[k] * zl[k] - ds_a[k] * dz_a[k]).collect();
            let rc_u: Vec<f64> = (0..t.len()).map(|k| centering * mu - t[k] * wu[k] - dt_a[k] * dw_a[k]).collect();
            let (mut dy, mut ds, mut dz, mut dt, mut dw) = direction(&rc_l, &rc_u);
            let mut alpha = (0.995 * max_step(&[(&s, &ds), (&zl, &dz), (&t, &dt), (&wu, &dw)])).min(1.0);
            let gap_after = |alpha: f64, ds: &[f64], dz: &[f64], dt: &[f64], dw: &[f64]| {
                ((0..s.len()).map(|k| (s[k] + alpha * ds[k]) * (zl[k] + alpha * dz[k])).sum::<f64>()
                    + (0..t.len()).map(|k| (t[k] + alpha * dt[k]) * (wu[k] + alpha * dw[k])).sum::<f64>())
                    / nb
            };
            // Near feasibility the second-order correction can cycle; fall
            // back to a plain centered Newton step when it fails to shrink
            // the gap.
            if primal_res <= 1e-6 * primal_scale && gap_after(alpha, &ds, &dz, &dt, &dw) > (1.0 - 0.01 * alpha) * mu {
                let sigma_c = centering.max(0.1);
                let rc_l: Vec<f64> = (0..s.len()).map(|k| sigma_c * mu - s[k] * zl[k]).collect();
                let rc_u: Vec<f64> = (0..t.len()).map(|k| sigma_c * mu - t[k] * wu[k]).collect();
                (dy, ds, dz, dt, dw) = direction(&rc_l, &rc_u);
                alpha = (0.995 * max_step(&[(&s, &ds), (&zl, &dz), (&t, &dt), (&wu, &dw)])).min(1.0);
                for _ in 0..40 {
                    if gap_after(alpha, &ds, &dz, &dt, &dw) <= (1.0 - 0.01 * alpha * (1.0 - sigma_c)) * mu {
                        break;
                    }
                    alpha *= 0.5;
                }
            }

            if !alpha.is_finite() || dy.iter().any(|v| !v.is_finite()) {
                break;
            }
            linalg::axpy(alpha, &dy, &mut y);
            linalg::axpy(alpha, &ds, &mut s);
            linalg::axpy(alpha, &dz, &mut zl);
            linalg::axpy(alpha, &dt, &mut t);
            linalg::axpy(alpha, &dw, &mut wu);
            x = self.point(&y);
        }
        match best {
            Some((_, it, x, s, zl, t, wu)) => self.outcome(x, s, &zl, t, &wu, QpStatus::MaxIterations, it),
            None => self.outcome(x, s, &zl, t, &wu, QpStatus::MaxIterations, opts.max_iter),
        }
    }
}

fn symmetrize_upper(m: &mut [f64], n: usize) {
    for a in 0..n {
        for b in 0..a {
            m[a * n + b] = m[b * n + a];
        }
    }
}

/// Largest step in (0, ∞) keeping every `v + α dv` nonnegative.
fn max_step(pairs: &[(&Vec<f64>, &Vec<f64>)]) -> f64 {
    let mut alpha = f64::INFINITY;
    for (v, dv) in pairs {
        for (x, dx) in v.iter().zip(dv.iter()) {
            if *dx < 0.0 {
                alpha = alpha.min(-x / dx);
            }
        }
    }
    alpha
}

/// Pins the bounds the interior point iterate identified as active and
/// solves the resulting equality QP exactly, then repairs the active set
/// for a few rounds: wrong-signed multipliers release a bound, violated
/// bounds get pinned.
fn polish(p: &QpProblem, red: &Reduction<'_>, out: &IpmOutcome, fixed: &[Option<f64>]) -> Option<QpSolution> {
    let mut pinned = fixed.to_vec();
    let mut lower_active = vec![false; red.nf()];
    let mut upper_active = vec![false; red.nf()];
    for (k, &i) in out.lo.iter().enumerate() {
        lower_active[i] = out.s[k] < out.mu_lb[i];
    }
    for (k, &i) in out.hi.iter().enumerate() {
        upper_active[i] = out.t[k] < out.mu_ub[i];
    }
    for (r, &i) in red.free.iter().enumerate() {
        match (lower_active[r], upper_active[r]) {
            (true, false) => pinned[i] = Some(p.lb[i]),
            (false, true) => pinned[i] = Some(p.ub[i]),
            (true, true) => {
                let lo_gap = libm::fabs(out.x[r] - p.lb[i]);
                let hi_gap = libm::fabs(p.ub[i] - out.x[r]);
                pinned[i] = Some(if lo_gap <= hi_gap { p.lb[i] } else { p.ub[i] });
            }
            (false, false) => {}
        }
    }

    let sign_tol = 1e-12 * (1.0 + linalg::norm_inf(&p.g));
    let mut best: Option<QpSolution> = None;
    for _ in 0..(2 * red.nf() + 2) {
        let sol = equality_solve(p, &pinned)?;
        let mut changed = false;
        for &i in &red.free {
            match pinned[i] {
                Some(v) if v == p.lb[i] && sol.mu_ub[i] > sign_tol => pinned[i] = None,
                Some(v) if v == p.ub[i] && sol.mu_lb[i] > sign_tol => pinned[i] = None,
                Some(_) => continue,
                None => {
                    let slack = 1e-12 * (1.0 + libm::fabs(sol.x[i]));
                    if sol.x[i] < p.lb[i] - slack {
                        pinned[i] = Some(p.lb[i]);
                    } else if sol.x[i] > p.ub[i] + slack {
                        pinned[i] = Some(p.ub[i]);
                    } else {
                        continue;
                    }
                }
            }
            changed = true;
        }
        if !changed {
            return sol.kkt_residual.is_finite().then_some(sol);
        }
        if sol.kkt_residual.is_finite() && best.as_ref().is_none_or(|b| sol.kkt_residual < b.kkt_residual) {
            best = Some(sol);
        }
    }
    best
}

/// Minimizer with the `pinned` coordinates held at their values.
fn equality_solve(p: &QpProblem, pinned: &[Option<f64>]) -> Option<QpSolution> {
    let sub = Reduction::new(p, pinned);
    let (xp, inconsistency) = sub.rows.particular(&sub.b);
    if inconsistency > INCONSISTENCY_TOL * (1.0 + linalg::norm_inf(&sub.b)) {
        return None;
    }
    let ipm = InteriorPoint::new(&sub, xp);
    let zero = vec![0.0; sub.nf()];
    let g0 = ipm.reduced_gradient(&ipm.xp, &zero);
    let neg: Vec<f64> = g0.iter().map(|v| -v).collect();
    let (y, _) = SymFactor::new(ipm.hzz.clone(), ipm.dim).solve(ipm.dim, &neg);
    let xr = ipm.point(&y);
    Some(sub.finish(sub.expand(&xr), &[], &[], QpStatus::Optimal, 0))
}
