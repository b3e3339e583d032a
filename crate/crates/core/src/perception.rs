//! Synthetic perception: noisy, temporally correlated road beliefs.
//!
//! A belief snapshot samples the ground truth over the view range ahead of
//! the vehicle and perturbs the tangent angle by a smooth random field
//!
//! ```text
//! δθ(L) = σ(L) · (cos φ(L) · z₁ + sin φ(L) · z₂),   σ(L) = σ₀ + σ' · L
//! ```
//!
//! over preview distance `L`, where `φ` sweeps a quarter turn across the
//! view range so the error shape varies between a heading offset and a bend.
//! The latent pair `z` is standard normal and follows an AR(1) process from
//! one snapshot to the next. The curvature perturbation is the arc-length
//! derivative of `δθ`; lateral offset and curvature rate stay exact.
//! Each snapshot reports the exact marginal deviations of its own noise.
//! With `lateral_uncertainty` the `d` deviation additionally reports the
//! spread of `∫ δθ dL`, the lateral error of the perceived lane center.

use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::belief::{BeliefTrajectory, LongitudinalTrajectory};
use crate::error::{invalid, Result};
use crate::road::GroundTruthRoad;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerceptionConfig {
    /// Tangent-angle deviation at the vehicle (rad).
    pub sigma0: f64,
    /// Growth of the tangent-angle deviation per meter of preview (rad/m).
    pub sigma_rate: f64,
    /// AR(1) coefficient between consecutive snapshots, in [0, 1).
    pub temporal_corr: f64,
    pub seed: u64,
    /// Preview distance covered by one snapshot (m).
    pub view_range: f64,
    /// Native sample spacing of a snapshot (m).
    pub spacing: f64,
    /// Report the lateral position uncertainty of the perceived lane
    /// center in the `d` deviation. The mean stays exact either way.
    pub lateral_uncertainty: bool,
}

impl PerceptionConfig {
    pub fn noiseless(view_range: f64) -> Self {
        Self { sigma0: 0.0, sigma_rate: 0.0, temporal_corr: 0.0, seed: 0, view_range, spacing: 5.0, lateral_uncertainty: false }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma0 >= 0.0 && self.sigma0.is_finite() && self.sigma_rate >= 0.0 && self.sigma_rate.is_finite()) {
            return Err(invalid!("perception deviations must be finite and nonnegative"));
        }
        if !(self.temporal_corr >= 0.0 && self.temporal_corr < 1.0) {
            return Err(invalid!("temporal correlation {} outside [0, 1)", self.temporal_corr));
        }
        if !(self.view_range > 0.0 && self.view_range.is_finite() && self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(invalid!("view range and spacing must be positive"));
        }
        Ok(())
    }

    /// Tangent-angle deviation at preview distance `preview` (m).
    pub fn theta_std(&self, preview: f64) -> f64 {
        self.sigma0 + self.sigma_rate * preview
    }

    fn phase(&self, preview: f64) -> (f64, f64) {
        let rate = FRAC_PI_2 / self.view_range;
        (rate * preview, rate)
    }

    /// Curvature deviation at preview distance `preview` (1/m).
    pub fn kappa_std(&self, preview: f64) -> f64 {
        let (_, rate) = self.phase(preview);
        libm::hypot(self.sigma_rate, self.theta_std(preview) * rate)
    }

    /// Deviation of the perceived lane-center position at preview distance
    /// `preview` (m), the integral of the tangent-angle error.
    pub fn lateral_std(&self, preview: f64) -> f64 {
        let (phi, a) = self.phase(preview);
        let (sin, cos) = libm::sincos(phi);
        let l = preview;
        let along = self.sigma0 * sin / a + self.sigma_rate * ((cos - 1.0) / (a * a) + l * sin / a);
        let across = self.sigma0 * (1.0 - cos) / a + self.sigma_rate * (sin / (a * a) - l * cos / a);
        libm::hypot(along, across)
    }

    /// Number of native samples per snapshot, covering at least the view range.
    pub fn samples(&self) -> usize {
        libm::ceil(self.view_range / self.spacing - 1e-9) as usize + 1
    }
}

/// Single perception stream; one per simulation run.
#[derive(Debug, Clone)]
pub struct Perception {
    cfg: PerceptionConfig,
    rng: ChaCha8Rng,
    latent: Option<[f64; 2]>,
    snapshots: usize,
}

impl Perception {
    pub fn new(cfg: PerceptionConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { rng: ChaCha8Rng::seed_from_u64(cfg.seed), cfg, latent: None, snapshots: 0 })
    }

    pub fn config(&self) -> &PerceptionConfig {
        &self.cfg
    }

    fn advance_latent(&mut self) -> [f64; 2] {
        let fresh: [f64; 2] = [StandardNormal.sample(&mut self.rng), StandardNormal.sample(&mut self.rng)];
        let next = match self.latent {
            None => fresh,
            Some(prev) => {
                let c = self.cfg.temporal_corr;
                let innovation = libm::sqrt(1.0 - c * c);
                [c * prev[0] + innovation * fresh[0], c * prev[1] + innovation * fresh[1]]
            }
        };
        self.latent = Some(next);
        next
    }

    /// Takes the next snapshot at the vehicle position `lon.positions()[0]`,
    /// sampled at the native spacing over the view range.
    pub fn perceive(&mut self, road: &GroundTruthRoad, lon: &LongitudinalTrajectory) -> Result<BeliefTrajectory> {
        let z = self.advance_latent();
        let k = self.snapshots;
        self.snapshots += 1;
        let cfg = self.cfg;
        let s0 = lon.positions()[0];
        let rows = cfg.samples();
        let mut s = Vec::with_capacity(rows);
        let mut mean = Vec::with_capacity(rows);
        let mut std = Vec::with_capacity(rows);
        for j in 0..rows {
            let preview = j as f64 * cfg.spacing;
            let pos = s0 + preview;
            let truth = road.query(pos, lon.speed_at(pos))?;
            let (phi, dphi) = cfg.phase(preview);
            let (sin, cos) = libm::sincos(phi);
            let sigma = cfg.theta_std(preview);
            let along = cos * z[0] + sin * z[1];
            let across = -sin * z[0] + cos * z[1];
            let d_theta = sigma * along;
            let d_kappa = cfg.sigma_rate * along + sigma * dphi * across;
            s.push(pos);
            mean.push([truth.d, truth.theta + d_theta, truth.kappa + d_kappa, truth.kappa_dot]);
            std.push([if cfg.lateral_uncertainty { cfg.lateral_std(preview) } else { 0.0 }, sigma, cfg.kappa_std(preview), 0.0]);
        }
        BeliefTrajectory::new(k, s, mean, std)
    }
}
