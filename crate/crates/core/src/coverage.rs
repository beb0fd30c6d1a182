//! Boustrophedon coverage plans over a panel.
//!
//! Sweeps run along the panel's short side and step along the long side in
//! the direction of increasing world y, so previously coated strips are never
//! crossed again. Every setpoint sits `standoff` above the panel plane along
//! world z. Sweeps are flown at constant speed with the valve open; the
//! transfers between sweeps use a trapezoidal speed profile with the valve
//! closed.

use alloc::vec::Vec;

use nalgebra::{Vector2, Vector3};
use thiserror::Error;

use crate::control::TrajectorySample;
use crate::panel::{self, PanelCorners, PanelError};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum CoverageError {
    #[error("invalid coverage parameters: {0}")]
    InvalidParams(&'static str),
    #[error("only {0} sweep line(s) fit on the panel; need at least 2")]
    SpacingTooLarge(usize),
    #[error("invalid plan: {0}")]
    InvalidPlan(&'static str),
    #[error(transparent)]
    Panel(#[from] PanelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageParams {
    /// Sweep speed, m/s.
    pub speed: f64,
    /// Distance between neighbouring sweep lines, m.
    pub sweep_spacing: f64,
    /// Height above the panel plane along world z, m.
    pub standoff: f64,
    /// Inset from the panel edges, m.
    pub margin: f64,
    /// Duration of each transfer between sweeps, s.
    pub turn_time: f64,
    /// Spacing of exported samples, s.
    pub sample_period: f64,
}

impl Default for CoverageParams {
    fn default() -> Self {
        Self {
            speed: 0.5,
            sweep_spacing: 0.07,
            standoff: 0.27,
            margin: 0.0,
            turn_time: 1.0,
            sample_period: 0.02,
        }
    }
}

impl CoverageParams {
    pub fn validate(&self) -> Result<(), CoverageError> {
        let checks = [
            (self.speed > 0.0, "speed must be positive"),
            (self.sweep_spacing > 0.0, "sweep spacing must be positive"),
            (self.standoff > 0.0, "standoff must be positive"),
            (self.margin >= 0.0, "margin must be non-negative"),
            (self.turn_time > 0.0, "turn time must be positive"),
            (self.sample_period > 0.0, "sample period must be positive"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(CoverageError::InvalidParams(msg));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    /// Constant speed, valve open.
    Sweep,
    /// Trapezoidal speed profile, valve closed.
    Turn,
}

/// Straight piece of the plan between two setpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub kind: SegmentKind,
    pub start: Vector3<f64>,
    pub end: Vector3<f64>,
    pub t_start: f64,
    pub t_end: f64,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Fraction of the segment length covered at `t` and the speed there.
    fn progress(&self, t: f64) -> (f64, f64) {
        let total = self.duration();
        let tau = (t - self.t_start).clamp(0.0, total);
        match self.kind {
            SegmentKind::Sweep => (tau / total, 1.0 / total),
            SegmentKind::Turn => {
                // Accelerate, cruise and brake over equal thirds.
                let third = total / 3.0;
                let peak = 1.5 / total;
                let accel = peak / third;
                if tau < third {
                    (0.5 * accel * tau * tau, accel * tau)
                } else if tau < 2.0 * third {
                    (0.25 + peak * (tau - third), peak)
                } else {
                    let rest = total - tau;
                    (1.0 - 0.5 * accel * rest * rest, accel * rest)
                }
            }
        }
    }

    pub fn sample(&self, t: f64) -> TrajectorySample {
        let (fraction, rate) = self.progress(t);
        let delta = self.end - self.start;
        TrajectorySample {
            time: t,
            position: self.start + delta * fraction,
            velocity: delta * rate,
            yaw: 0.0,
        }
    }
}

/// Time-parameterized sweep plan.
#[derive(Debug, Clone, PartialEq)]
pub struct CoveragePlan {
    pub samples: Vec<TrajectorySample>,
    /// Valve-open intervals `(start, end)`, s.
    pub valve_schedule: Vec<(f64, f64)>,
    segments: Vec<Segment>,
}

impl CoveragePlan {
    /// Builds a plan from contiguous segments, sampling each every
    /// `sample_period` seconds plus the final end point.
    pub fn from_segments(segments: Vec<Segment>, sample_period: f64) -> Result<Self, CoverageError> {
        if segments.is_empty() {
            return Err(CoverageError::InvalidPlan("plan has no segments"));
        }
        if !(sample_period > 0.0) {
            return Err(CoverageError::InvalidParams("sample period must be positive"));
        }
        for (i, s) in segments.iter().enumerate() {
            if !(s.t_end > s.t_start) {
                return Err(CoverageError::InvalidPlan("segment durations must be positive"));
            }
            if i > 0 && segments[i - 1].t_end != s.t_start {
                return Err(CoverageError::InvalidPlan("segments must be contiguous in time"));
            }
        }
        let mut samples = Vec::new();
        for s in &segments {
            let mut k = 0usize;
            loop {
                let t = s.t_start + k as f64 * sample_period;
                if t >= s.t_end - 1e-9 * sample_period {
                    break;
                }
                samples.push(s.sample(t));
                k += 1;
            }
        }
        let last = segments[segments.len() - 1];
        samples.push(last.sample(last.t_end));
        let valve_schedule = segments
            .iter()
            .filter(|s| s.kind == SegmentKind::Sweep)
            .map(|s| (s.t_start, s.t_end))
            .collect();
        Ok(Self { samples, valve_schedule, segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn duration(&self) -> f64 {
        plan_duration(self)
    }

    /// Exact setpoint at `t`, held at the end points outside the plan.
    pub fn setpoint_at(&self, t: f64) -> TrajectorySample {
        let idx = self.segments.partition_point(|s| s.t_end <= t);
        match self.segments.get(idx) {
            Some(s) => s.sample(t),
            None => {
                let last = self.segments[self.segments.len() - 1];
                TrajectorySample::hover(t, last.end, 0.0)
            }
        }
    }

    pub fn valve_open_at(&self, t: f64) -> bool {
        self.valve_schedule.iter().any(|&(a, b)| t >= a && t < b)
    }

    /// Sweep segments in flight order.
    pub fn sweeps(&self) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(|s| s.kind == SegmentKind::Sweep)
    }
}

/// Time of the last sample.
pub fn plan_duration(plan: &CoveragePlan) -> f64 {
    plan.samples.last().map_or(0.0, |s| s.time)
}

/// Interval of `a` where the horizontal line at height `b` crosses the convex
/// polygon `poly` (plane coordinates).
fn chord(poly: &[Vector2<f64>], b: f64) -> Option<(f64, f64)> {
    let n = poly.len();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        if (p.y - b) * (q.y - b) > 0.0 {
            continue;
        }
        if p.y == q.y {
            lo = lo.min(p.x.min(q.x));
            hi = hi.max(p.x.max(q.x));
        } else {
            let x = p.x + (q.x - p.x) * (b - p.y) / (q.y - p.y);
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    (hi >= lo).then_some((lo, hi))
}

/// Sweep plan over the panel described by `corners` (world frame).
pub fn generate_plan(corners: &PanelCorners, params: &CoverageParams) -> Result<CoveragePlan, CoverageError> {
    params.validate()?;
    let surface = panel::surface_from_corners(corners)?;
    let normal = *surface.normal();
    let boundary = surface.boundary();

    let edges: Vec<Vector3<f64>> = (0..4).map(|i| boundary[(i + 1) % 4] - boundary[i]).collect();
    let pair_len = |i: usize| (edges[i].norm() + edges[i + 2].norm()) / 2.0;
    let short = if pair_len(0) <= pair_len(1) { 0 } else { 1 };
    let mut u = (edges[short] - edges[short + 2]).normalize();
    if u.x < 0.0 || (u.x == 0.0 && u.y < 0.0) {
        u = -u;
    }
    let mut v = normal.cross(&u).normalize();
    if v.y < 0.0 || (v.y == 0.0 && v.x < 0.0) {
        v = -v;
    }

    let origin = boundary.iter().sum::<Vector3<f64>>() / 4.0;
    let local: Vec<Vector2<f64>> = boundary
        .iter()
        .map(|p| Vector2::new((p - origin).dot(&u), (p - origin).dot(&v)))
        .collect();
    let b_min = local.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let b_max = local.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    let span = b_max - b_min - 2.0 * params.margin;
    if !(span > 0.0) {
        return Err(CoverageError::SpacingTooLarge(0));
    }

    // Fewest lines that leave no point farther than half a spacing from a
    // line, centred across the span.
    let count = libm::ceil(span / params.sweep_spacing - 1e-9).max(1.0) as usize;
    if count < 2 {
        return Err(CoverageError::SpacingTooLarge(count));
    }
    let lead = (span - (count - 1) as f64 * params.sweep_spacing) / 2.0;
    let lift = Vector3::new(0.0, 0.0, params.standoff);
    let to_world = |a: f64, b: f64| origin + u * a + v * b + lift;

    let mut lines: Vec<(Vector3<f64>, Vector3<f64>)> = Vec::with_capacity(count);
    for i in 0..count {
        let b = b_min + params.margin + lead + i as f64 * params.sweep_spacing;
        let Some((lo, hi)) = chord(&local, b) else {
            continue;
        };
        let (lo, hi) = (lo + params.margin, hi - params.margin);
        if !(hi > lo) {
            continue;
        }
        let (start, end) = if lines.len().is_multiple_of(2) { (lo, hi) } else { (hi, lo) };
        lines.push((to_world(start, b), to_world(end, b)));
    }
    if lines.len() < 2 {
        return Err(CoverageError::SpacingTooLarge(lines.len()));
    }

    let mut segments = Vec::with_capacity(2 * lines.len());
    let mut t = 0.0;
    for (i, &(start, end)) in lines.iter().enumerate() {
        if i > 0 {
            let from = segments.last().map_or(start, |s: &Segment| s.end);
            segments.push(Segment { kind: SegmentKind::Turn, start: from, end: start, t_start: t, t_end: t + params.turn_time });
            t += params.turn_time;
        }
        let duration = (end - start).norm() / params.speed;
        segments.push(Segment { kind: SegmentKind::Sweep, start, end, t_start: t, t_end: t + duration });
        t += duration;
    }
    CoveragePlan::from_segments(segments, params.sample_period)
}
