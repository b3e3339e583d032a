//! Uncertainty-dependent target funnels.
//!
//! A funnel is a hyperrectangle per horizon step, centered on the expected
//! reference. Its edge along each component is the central `ρ` quantile
//! range of the belief; for Gaussian beliefs that is `2 Φ⁻¹(½ + ρ/2) σ`.

use alloc::format;
use alloc::vec::Vec;

use crate::belief::BeliefTrajectory;
use crate::error::{Error, Result};
use crate::qp::{self, QpOptions, QpProblem, QpStatus};

/// 4×4 state weight.
pub type Weight = [[f64; 4]; 4];

pub const IDENTITY: Weight = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]];

pub(crate) fn weighted_sq(e: &[f64; 4], q: &Weight) -> f64 {
    let mut acc = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            acc += e[i] * q[i][j] * e[j];
        }
    }
    acc
}

pub(crate) fn is_diagonal(q: &Weight) -> bool {
    (0..4).all(|i| (0..4).all(|j| i == j || q[i][j] == 0.0))
}

// Acklam's rational approximation, |rel err| < 1.15e-9 before refinement.
const A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const B: [f64; 5] = [-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02, 6.680131188771972e+01, -1.328068155288572e+01];
const C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const D: [f64; 4] = [7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00, 3.754408661907416e+00];
const P_LOW: f64 = 0.02425;

/// Quantile for `p ≤ ½`, where Φ(x) − p is free of cancellation.
fn lower_quantile(p: f64) -> f64 {
    let x = if p < P_LOW {
        let q = libm::sqrt(-2.0 * libm::log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5]) / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    // One Halley step on Φ(x) = ½ erfc(−x/√2).
    let e = 0.5 * libm::erfc(-x / core::f64::consts::SQRT_2) - p;
    let u = e * libm::sqrt(2.0 * core::f64::consts::PI) * libm::exp(0.5 * x * x);
    x - u / (1.0 + 0.5 * x * u)
}

/// Standard normal quantile Φ⁻¹(p) for `p ∈ (0, 1)`.
pub fn gaussian_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::QuantileDomain(p));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    Ok(if p < 0.5 { lower_quantile(p) } else { -lower_quantile(1.0 - p) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetFunnel {
    /// Expected reference per horizon step.
    pub center: Vec<[f64; 4]>,
    /// Full edge lengths per horizon step; the box is `center ± edges / 2`.
    pub edges: Vec<[f64; 4]>,
}

impl TargetFunnel {
    pub fn horizon(&self) -> usize {
        self.center.len() - 1
    }

    pub fn lower(&self, i: usize) -> [f64; 4] {
        core::array::from_fn(|c| self.center[i][c] - 0.5 * self.edges[i][c])
    }

    pub fn upper(&self, i: usize) -> [f64; 4] {
        core::array::from_fn(|c| self.center[i][c] + 0.5 * self.edges[i][c])
    }

    pub fn half_widths(&self, i: usize) -> [f64; 4] {
        self.edges[i].map(|e| 0.5 * e)
    }
}

/// Funnel holding the `rho` most likely realizations of each component.
pub fn build_funnel(belief: &BeliefTrajectory, rho: f64) -> Result<TargetFunnel> {
    if !(rho >= 0.0 && rho < 1.0) {
        return Err(Error::InvalidRho(rho));
    }
    belief.validate()?;
    let width = 2.0 * gaussian_quantile(0.5 + 0.5 * rho)?;
    let edges = belief.std.iter().map(|sd| sd.map(|s| width * s)).collect();
    Ok(TargetFunnel { center: belief.mean.clone(), edges })
}

/// Squared `Q`-weighted distance of a trajectory to the funnel,
/// `Σᵢ min_{r ∈ Rᵢ} ‖xᵢ − r‖²_Q`.
///
/// Diagonal weights separate per component into clamped excesses; other
/// weights need the inner box-constrained minimization.
pub fn funnel_distance_sq(x_traj: &[[f64; 4]], funnel: &TargetFunnel, q: &Weight) -> Result<f64> {
    if x_traj.len() != funnel.center.len() || funnel.edges.len() != funnel.center.len() {
        return Err(Error::ShapeMismatch(format!(
            "trajectory has {} rows, funnel {}",
            x_traj.len(),
            funnel.center.len()
        )));
    }
    let mut total = 0.0;
    for (i, x) in x_traj.iter().enumerate() {
        total += if is_diagonal(q) {
            let excess: [f64; 4] = core::array::from_fn(|c| {
                let e = x[c] - funnel.center[i][c];
                let h = 0.5 * funnel.edges[i][c];
                libm::copysign((libm::fabs(e) - h).max(0.0), e)
            });
            weighted_sq(&excess, q)
        } else {
            box_distance_qp(x, &funnel.lower(i), &funnel.upper(i), q)?
        };
    }
    Ok(total)
}

fn box_distance_qp(x: &[f64; 4], lo: &[f64; 4], hi: &[f64; 4], q: &Weight) -> Result<f64> {
    // ‖x − r‖²_Q = rᵀ Q r − 2 xᵀ Q r + xᵀ Q x  →  H = 2Q, g = −2 Q x
    let mut p = QpProblem::new(4, 0);
    for i in 0..4 {
        for j in 0..4 {
            *p.h_mut(i, j) = q[i][j] + q[j][i];
        }
        p.g[i] = -(0..4).map(|j| (q[i][j] + q[j][i]) * x[j]).sum::<f64>();
        p.lb[i] = lo[i];
        p.ub[i] = hi[i];
    }
    let sol = qp::solve(&p, &QpOptions::default())?;
    if sol.status != QpStatus::Optimal {
        return Err(Error::PlannerFailed { status: sol.status, block: "funnel distance" });
    }
    let r: [f64; 4] = core::array::from_fn(|c| sol.x[c]);
    let e: [f64; 4] = core::array::from_fn(|c| x[c] - r[c]);
    Ok(weighted_sq(&e, q))
}
