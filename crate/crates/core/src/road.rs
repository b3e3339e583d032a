//! Ground-truth road geometry with piecewise-linear curvature.
//!
//! Every road family lowers to a sequence of segments whose curvature varies
//! linearly in arc length (constant for arcs, linear for clothoids), so the
//! tangent angle is an exact piecewise quadratic.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::vehicle::Reference;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    /// Arc length (m).
    pub length: f64,
    /// Curvature at the segment start (1/m).
    pub kappa_start: f64,
    /// Curvature at the segment end (1/m).
    pub kappa_end: f64,
}

impl Segment {
    pub const fn straight(length: f64) -> Self {
        Self { length, kappa_start: 0.0, kappa_end: 0.0 }
    }

    pub const fn arc(length: f64, kappa: f64) -> Self {
        Self { length, kappa_start: kappa, kappa_end: kappa }
    }

    pub const fn transition(length: f64, from: f64, to: f64) -> Self {
        Self { length, kappa_start: from, kappa_end: to }
    }

    fn slope(&self) -> f64 {
        (self.kappa_end - self.kappa_start) / self.length
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoadKind {
    Straight,
    Arc,
    Clothoid,
    ClothoidEntry,
    Composite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthRoad {
    kind: RoadKind,
    theta0: f64,
    segments: Vec<Segment>,
    starts: Vec<f64>,
    theta_starts: Vec<f64>,
    length: f64,
}

impl GroundTruthRoad {
    pub fn straight(length: f64) -> Result<Self> {
        Self::build(RoadKind::Straight, 0.0, alloc::vec![Segment::straight(length)])
    }

    pub fn arc(kappa: f64, length: f64) -> Result<Self> {
        Self::build(RoadKind::Arc, 0.0, alloc::vec![Segment::arc(length, kappa)])
    }

    /// Curvature grows as `rate · s` from zero.
    pub fn clothoid(rate: f64, length: f64) -> Result<Self> {
        Self::build(RoadKind::Clothoid, 0.0, alloc::vec![Segment::transition(length, 0.0, rate * length)])
    }

    /// Straight lead-in, clothoid transition into an arc of curvature
    /// `kappa`, then the symmetric transition back and a straight run-out.
    pub fn clothoid_entry(lead_in: f64, transition: f64, kappa: f64, arc_length: f64, run_out: f64) -> Result<Self> {
        Self::build(
            RoadKind::ClothoidEntry,
            0.0,
            alloc::vec![
                Segment::straight(lead_in),
                Segment::transition(transition, 0.0, kappa),
                Segment::arc(arc_length, kappa),
                Segment::transition(transition, kappa, 0.0),
                Segment::straight(run_out),
            ],
        )
    }

    pub fn composite(theta0: f64, segments: Vec<Segment>) -> Result<Self> {
        Self::build(RoadKind::Composite, theta0, segments)
    }

    fn build(kind: RoadKind, theta0: f64, segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(invalid!("road needs at least one segment"));
        }
        if !theta0.is_finite() {
            return Err(invalid!("initial heading must be finite"));
        }
        let mut starts = Vec::with_capacity(segments.len());
        let mut theta_starts = Vec::with_capacity(segments.len());
        let (mut s, mut theta) = (0.0, theta0);
        for seg in &segments {
            if !(seg.length > 0.0 && seg.length.is_finite()) || !seg.kappa_start.is_finite() || !seg.kappa_end.is_finite() {
                return Err(invalid!("bad road segment {seg:?}"));
            }
            starts.push(s);
            theta_starts.push(theta);
            s += seg.length;
            theta += 0.5 * (seg.kappa_start + seg.kappa_end) * seg.length;
        }
        Ok(Self { kind, theta0, segments, starts, theta_starts, length: s })
    }

    pub fn kind(&self) -> RoadKind {
        self.kind
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    fn locate(&self, s: f64) -> Result<(usize, f64)> {
        if !(s >= 0.0 && s <= self.length) {
            return Err(Error::OutOfExtent { s, length: self.length });
        }
        let idx = self.starts.partition_point(|&start| start <= s).saturating_sub(1);
        Ok((idx, s - self.starts[idx]))
    }

    /// Tangent angle, curvature and curvature slope `dκ/ds` at arc length `s`.
    pub fn geometry(&self, s: f64) -> Result<(f64, f64, f64)> {
        let (idx, local) = self.locate(s)?;
        let seg = &self.segments[idx];
        let slope = seg.slope();
        let kappa = seg.kappa_start + slope * local;
        let theta = self.theta_starts[idx] + seg.kappa_start * local + 0.5 * slope * local * local;
        Ok((theta, kappa, slope))
    }

    /// Lane-center reference at arc length `s` for a vehicle travelling at
    /// `speed`; the curvature rate is the time derivative `v · dκ/ds`.
    pub fn query(&self, s: f64, speed: f64) -> Result<Reference> {
        let (theta, kappa, slope) = self.geometry(s)?;
        Ok(Reference::new(0.0, theta, kappa, speed * slope))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn straight_road_is_all_zero() {
        let road = GroundTruthRoad::straight(500.0).unwrap();
        for s in [0.0, 12.5, 499.0, 500.0] {
            assert_eq!(road.query(s, 20.0).unwrap(), Reference::ZERO);
        }
    }

    #[test]
    fn arc_heading_grows_linearly() {
        let road = GroundTruthRoad::arc(0.01, 300.0).unwrap();
        let r = road.query(100.0, 10.0).unwrap();
        assert!((r.theta - 1.0).abs() < 1e-12);
        assert_eq!(r.kappa, 0.01);
        assert_eq!(r.kappa_dot, 0.0);
    }

    #[test]
    fn clothoid_curvature_is_rate_times_length() {
        let road = GroundTruthRoad::clothoid(2e-5, 500.0).unwrap();
        let r = road.query(250.0, 10.0).unwrap();
        assert!((r.kappa - 5e-3).abs() < 1e-15);
        assert!((r.theta - 0.5 * 2e-5 * 250.0 * 250.0).abs() < 1e-12);
        assert!((r.kappa_dot - 10.0 * 2e-5).abs() < 1e-15);
    }

    #[test]
    fn outside_extent_is_an_error() {
        let road = GroundTruthRoad::straight(100.0).unwrap();
        assert!(matches!(road.query(100.5, 1.0), Err(Error::OutOfExtent { .. })));
        assert!(matches!(road.query(-0.1, 1.0), Err(Error::OutOfExtent { .. })));
        assert!(road.query(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn bad_segments_are_rejected() {
        assert!(GroundTruthRoad::composite(0.0, alloc::vec![]).is_err());
        assert!(GroundTruthRoad::composite(0.0, alloc::vec![Segment::straight(0.0)]).is_err());
        assert!(GroundTruthRoad::arc(f64::NAN, 10.0).is_err());
    }

    fn entry_road() -> GroundTruthRoad {
        GroundTruthRoad::clothoid_entry(100.0, 60.0, 0.012, 150.0, 200.0).unwrap()
    }

    #[test]
    fn entry_curve_heading_matches_segment_integrals() {
        let road = entry_road();
        let (theta_end, kappa_end, _) = road.geometry(road.length()).unwrap();
        // two half transitions + the arc
        let expected = 0.012 * 60.0 + 0.012 * 150.0;
        assert!((theta_end - expected).abs() < 1e-12);
        assert_eq!(kappa_end, 0.0);
    }

    proptest! {
        #[test]
        fn curvature_is_heading_derivative(s in 1.0f64..509.0) {
            let road = entry_road();
            let h = 1e-3;
            let (tp, _, _) = road.geometry(s + h).unwrap();
            let (tm, _, _) = road.geometry(s - h).unwrap();
            let (_, k, _) = road.geometry(s).unwrap();
            // Central differences are exact on quadratics; kinks at segment
            // joints contribute at most slope·h.
            prop_assert!(((tp - tm) / (2.0 * h) - k).abs() <= 1e-9 + 2e-4 * h);
        }

        #[test]
        fn heading_is_continuous(s in 1.0f64..509.0) {
            let road = entry_road();
            let (a, _, _) = road.geometry(s - 1e-9).unwrap();
            let (b, _, _) = road.geometry(s + 1e-9).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
