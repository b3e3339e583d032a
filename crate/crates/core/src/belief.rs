//! Road beliefs sampled along the predicted longitudinal motion.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::road::GroundTruthRoad;

/// Predetermined longitudinal motion over a window of `N` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct LongitudinalTrajectory {
    s: Vec<f64>,
    v: Vec<f64>,
    ts: f64,
}

impl LongitudinalTrajectory {
    /// Integrates piecewise-constant speeds from `s0`:
    /// `s[i+1] = s[i] + v[i] · ts`.
    pub fn from_speeds(s0: f64, speeds: Vec<f64>, ts: f64) -> Result<Self> {
        if !(ts > 0.0 && ts.is_finite()) || !s0.is_finite() {
            return Err(invalid!("bad start position {s0} or sampling time {ts}"));
        }
        if speeds.is_empty() || speeds.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid!("speeds must be nonempty, finite and nonnegative"));
        }
        let mut s = Vec::with_capacity(speeds.len() + 1);
        s.push(s0);
        for v in &speeds {
            let last = *s.last().unwrap();
            s.push(last + v * ts);
        }
        Ok(Self { s, v: speeds, ts })
    }

    /// Sub-trajectory covering steps `k ..= k + n`.
    pub fn window(&self, k: usize, n: usize) -> Result<Self> {
        if k + n > self.steps() {
            return Err(Error::ShapeMismatch(format!(
                "window {k}..={} exceeds trajectory of {} steps",
                k + n,
                self.steps()
            )));
        }
        Ok(Self { s: self.s[k..=k + n].to_vec(), v: self.v[k..k + n].to_vec(), ts: self.ts })
    }

    /// Number of steps (one less than the number of positions).
    pub fn steps(&self) -> usize {
        self.v.len()
    }

    pub fn positions(&self) -> &[f64] {
        &self.s
    }

    pub fn speeds(&self) -> &[f64] {
        &self.v
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    /// Speed used at position index `i`; the last position reuses the final
    /// step's speed.
    pub fn speed_at_index(&self, i: usize) -> f64 {
        self.v[i.min(self.v.len() - 1)]
    }

    /// Speed of the step whose interval contains `s`.
    pub fn speed_at(&self, s: f64) -> f64 {
        let idx = self.s.partition_point(|&x| x <= s).saturating_sub(1);
        self.speed_at_index(idx)
    }
}

/// Per-sample Gaussian belief of the reference: mean and standard deviation
/// of `[d_ref, θ_ref, κ_ref, κ̇_ref]` at increasing arc lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefTrajectory {
    /// Step index at which the belief was acquired.
    pub k: usize,
    pub s: Vec<f64>,
    pub mean: Vec<[f64; 4]>,
    pub std: Vec<[f64; 4]>,
}

impl BeliefTrajectory {
    pub fn new(k: usize, s: Vec<f64>, mean: Vec<[f64; 4]>, std: Vec<[f64; 4]>) -> Result<Self> {
        let b = Self { k, s, mean, std };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let rows = self.s.len();
        if rows == 0 || self.mean.len() != rows || self.std.len() != rows {
            return Err(Error::ShapeMismatch(format!(
                "belief has {} positions, {} means and {} deviations",
                rows,
                self.mean.len(),
                self.std.len()
            )));
        }
        if self.s.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(invalid!("belief positions must be nondecreasing"));
        }
        for (i, sd) in self.std.iter().enumerate() {
            if sd.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || self.mean[i].iter().any(|v| !v.is_finite()) {
                return Err(invalid!("belief row {i} has a non-finite mean or a negative deviation"));
            }
        }
        Ok(())
    }

    /// Horizon length N (rows − 1).
    pub fn horizon(&self) -> usize {
        self.s.len() - 1
    }

    /// Exact belief: ground truth along `lon` with zero deviation.
    pub fn ground_truth(road: &GroundTruthRoad, lon: &LongitudinalTrajectory, k: usize) -> Result<Self> {
        let mean = lon
            .positions()
            .iter()
            .enumerate()
            .map(|(i, &s)| road.query(s, lon.speed_at_index(i)).map(|r| r.to_array()))
            .collect::<Result<Vec<_>>>()?;
        let rows = mean.len();
        Self::new(k, lon.positions().to_vec(), mean, alloc::vec![[0.0; 4]; rows])
    }
}

/// Linearly interpolates mean and deviation at the positions of `lon`.
pub fn resample(belief: &BeliefTrajectory, lon: &LongitudinalTrajectory) -> Result<BeliefTrajectory> {
    belief.validate()?;
    let (start, end) = (belief.s[0], *belief.s.last().unwrap());
    let slack = 1e-9 * (1.0 + libm::fabs(end));
    let mut mean = Vec::with_capacity(lon.positions().len());
    let mut std = Vec::with_capacity(lon.positions().len());
    for &s in lon.positions() {
        if !(s >= start - slack && s <= end + slack) {
            return Err(Error::Extrapolation { s, start, end });
        }
        let s = s.clamp(start, end);
        let hi = belief.s.partition_point(|&x| x < s).min(belief.s.len() - 1);
        let lo = hi.saturating_sub(1);
        let (m, d) = if hi == lo || belief.s[hi] == s || belief.s[hi] == belief.s[lo] {
            (belief.mean[hi], belief.std[hi])
        } else {
            let w = (s - belief.s[lo]) / (belief.s[hi] - belief.s[lo]);
            let lerp = |a: &[f64; 4], b: &[f64; 4]| core::array::from_fn(|c| a[c] + w * (b[c] - a[c]));
            (lerp(&belief.mean[lo], &belief.mean[hi]), lerp(&belief.std[lo], &belief.std[hi]))
        };
        mean.push(m);
        std.push(d);
    }
    BeliefTrajectory::new(belief.k, lon.positions().to_vec(), mean, std)
}
