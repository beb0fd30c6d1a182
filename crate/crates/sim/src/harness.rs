//! Closed-loop runs: plant, controller, estimator noise, wind and dispensing
//! wired together according to a scenario.

use pvcoat_core::control::CascadedController;
use pvcoat_core::coverage::{generate_plan, CoverageParams, Segment, SegmentKind};
use pvcoat_core::nalgebra::{Vector2, Vector3};
use pvcoat_core::panel::{self, extract_corners, ransac_plane_fit, surface_from_corners, to_world};
use pvcoat_core::{
    dynamics, CornerMethod, CoveragePlan, GroundEffectModel, MassEstimator, PanelCorners, PlantInput, RigidBodyState,
    SurfaceModel, TrajectorySample, VehicleParams,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::SimError;
use crate::noise::{SensorNoiseModel, WindModel};
use crate::scenario::{EvaluationWindow, Scenario, TrajectorySpec};
use crate::synthetic::{panel_cloud, CloudParams};

/// Length of the trailing window for the final altitude error, s.
pub const FINAL_WINDOW_S: f64 = 2.0;

/// Positions beyond this distance from the origin count as divergence, m.
const DIVERGENCE_RADIUS: f64 = 1.0e3;

const NOISE_STREAM: u64 = 1;
const WIND_STREAM: u64 = 2;
const DETECTION_STREAM: u64 = 3;

/// One logged control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub state: RigidBodyState,
    pub estimated_position: Vector3<f64>,
    pub setpoint: Vector3<f64>,
    /// Rotor force setpoints after compensation, N.
    pub rotor_forces: [f64; 4],
    pub mass_true: f64,
    pub mass_estimated: f64,
    pub valve_open: bool,
}

/// Reference and actual position at one control tick, with the flags the
/// evaluation windows select on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingSample {
    pub t: f64,
    pub actual: Vector3<f64>,
    pub reference: Vector3<f64>,
    pub over_surface: bool,
    pub valve_open: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunMetrics {
    /// Per-axis position RMSE over the evaluation window, m.
    pub rmse: [f64; 3],
    pub rmse_3d: f64,
    /// Mean absolute altitude error over the last two seconds, m.
    pub final_altitude_error: f64,
    /// Largest position error norm in the window, m.
    pub max_deviation: f64,
    pub samples: usize,
    /// RMS of the injected position estimation error (3D), m.
    pub estimation_position_rmse: f64,
    /// RMS of the injected attitude estimation error, deg.
    pub estimation_attitude_rmse_deg: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub log: Vec<LogRow>,
    pub tracking: Vec<TrackingSample>,
    /// Sweep plan actually flown, for coverage runs.
    pub plan: Option<CoveragePlan>,
    /// Panel corners the plan and compensation were built from.
    pub corners_used: Option<PanelCorners>,
}

/// Position RMSE per axis, 3D RMSE and maximum deviation over the selected
/// samples. The final altitude error and estimation fields are left at
/// zero.
pub fn compute_rmse(samples: &[TrackingSample], window: &EvaluationWindow) -> Result<RunMetrics, SimError> {
    let end = samples.last().map_or(0.0, |s| s.t);
    let selected: Vec<&TrackingSample> = samples.iter().filter(|s| in_window(s, window, end)).collect();
    if selected.is_empty() {
        return Err(SimError::EmptyWindow);
    }
    let n = selected.len() as f64;
    let mut sq = Vector3::zeros();
    let mut max_deviation = 0.0_f64;
    for s in &selected {
        let e = s.actual - s.reference;
        sq += e.component_mul(&e);
        max_deviation = max_deviation.max(e.norm());
    }
    let rmse = (sq / n).map(f64::sqrt);
    Ok(RunMetrics {
        rmse: rmse.into(),
        rmse_3d: (sq.sum() / n).sqrt(),
        final_altitude_error: 0.0,
        max_deviation,
        samples: selected.len(),
        estimation_position_rmse: 0.0,
        estimation_attitude_rmse_deg: 0.0,
    })
}

/// Mean absolute z error over the trailing `seconds`.
pub fn final_altitude_error(samples: &[TrackingSample], seconds: f64) -> Result<f64, SimError> {
    compute_mean_abs_z(samples, &EvaluationWindow::LastS(seconds))
}

fn compute_mean_abs_z(samples: &[TrackingSample], window: &EvaluationWindow) -> Result<f64, SimError> {
    let end = samples.last().map_or(0.0, |s| s.t);
    let (sum, count) = samples
        .iter()
        .filter(|s| in_window(s, window, end))
        .fold((0.0, 0usize), |(sum, c), s| (sum + (s.actual.z - s.reference.z).abs(), c + 1));
    if count == 0 {
        return Err(SimError::EmptyWindow);
    }
    Ok(sum / count as f64)
}

fn in_window(s: &TrackingSample, window: &EvaluationWindow, end: f64) -> bool {
    match *window {
        EvaluationWindow::Full => true,
        EvaluationWindow::Time([a, b]) => s.t >= a && s.t <= b,
        EvaluationWindow::OverSurface => s.over_surface,
        EvaluationWindow::ValveOpen => s.valve_open,
        // Small slack so a window of exactly n ticks is not lost to rounding.
        EvaluationWindow::LastS(d) => s.t >= end - d - 1e-9,
    }
}

enum Reference {
    Hover(TrajectorySample),
    Straight { start: Vector3<f64>, end: Vector3<f64>, t0: f64, t1: f64, yaw: f64 },
    Plan(CoveragePlan),
}

impl Reference {
    fn at(&self, t: f64) -> TrajectorySample {
        match self {
            Reference::Hover(s) => TrajectorySample { time: t, ..*s },
            Reference::Straight { start, end, t0, t1, yaw } => {
                if t < *t0 {
                    TrajectorySample::hover(t, *start, *yaw)
                } else if t >= *t1 {
                    TrajectorySample::hover(t, *end, *yaw)
                } else {
                    let f = (t - t0) / (t1 - t0);
                    TrajectorySample {
                        time: t,
                        position: start + (end - start) * f,
                        velocity: (end - start) / (t1 - t0),
                        yaw: *yaw,
                    }
                }
            }
            Reference::Plan(plan) => plan.setpoint_at(t),
        }
    }

    fn start(&self) -> Vector3<f64> {
        self.at(0.0).position
    }
}

/// Everything that has to be decided before the first control tick.
struct Setup {
    params: VehicleParams,
    ge: GroundEffectModel,
    true_surface: Option<SurfaceModel>,
    control_surface: Option<SurfaceModel>,
    reference: Reference,
    initial: RigidBodyState,
    corners_used: Option<PanelCorners>,
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Detects the panel from the survey pose. The cloud is taken from the true
/// pose but mapped to world with the estimated one.
fn detect_corners(
    truth: &PanelCorners,
    pose: &RigidBodyState,
    estimate: &RigidBodyState,
    spec: &crate::scenario::DetectionSpec,
    seed: u64,
) -> Result<PanelCorners, SimError> {
    let mut rng = rng_stream(seed, DETECTION_STREAM);
    let params = CloudParams {
        grid_step: spec.grid_step_m,
        depth_noise: spec.depth_noise_m,
        outlier_fraction: spec.outlier_fraction,
    };
    let cloud = panel_cloud(truth, pose, &params, &mut rng);
    let (plane, mask) = ransac_plane_fit(&cloud, spec.epsilon_m, spec.iterations, seed)?;
    let corners = extract_corners(&cloud.select(&mask), &plane, CornerMethod::MinAreaRect)?;
    Ok(to_world(&corners, estimate))
}

fn setup(scenario: &Scenario, noise: Option<&SensorNoiseModel>) -> Result<Setup, SimError> {
    let params = scenario.vehicle.params()?;
    let ge = scenario.ground_effect.model()?;
    let true_surface = scenario.surface.as_ref().map(|s| s.surface()).transpose()?;
    let mut control_surface = true_surface.clone();
    let mut corners_used = None;

    let reference = match &scenario.trajectory {
        TrajectorySpec::Hover { position, yaw_deg } => {
            Reference::Hover(TrajectorySample::hover(0.0, Vector3::from(*position), yaw_deg.to_radians()))
        }
        TrajectorySpec::StraightPass { start, end, speed, hold_s } => {
            let (start, end) = (Vector3::from(*start), Vector3::from(*end));
            Reference::Straight { start, end, t0: *hold_s, t1: hold_s + (end - start).norm() / speed, yaw: 0.0 }
        }
        TrajectorySpec::Coverage { speed, spacing, standoff, margin, turn_time, survey_height, lead_in_s } => {
            let spec = scenario.surface.as_ref().ok_or_else(|| SimError::config("coverage needs a surface"))?;
            let truth = spec.corners()?;
            let center = truth.0.iter().sum::<Vector3<f64>>() / 4.0;
            let survey = RigidBodyState::at_rest(center + Vector3::new(0.0, 0.0, *survey_height));
            let corners = match &scenario.detection {
                Some(d) => {
                    let estimate = noise.map_or(survey, |n| n.corrupt(&survey));
                    detect_corners(&truth, &survey, &estimate, d, scenario.seed)?
                }
                None => truth,
            };
            let params = CoverageParams {
                speed: *speed,
                sweep_spacing: *spacing,
                standoff: *standoff,
                margin: *margin,
                turn_time: *turn_time,
                sample_period: 0.02,
            };
            let plan = generate_plan(&corners, &params)?;
            let first = plan.segments()[0].start;
            let mut segments = vec![Segment {
                kind: SegmentKind::Turn,
                start: survey.position,
                end: first,
                t_start: 0.0,
                t_end: *lead_in_s,
            }];
            segments.extend(plan.segments().iter().map(|s| Segment {
                t_start: s.t_start + lead_in_s,
                t_end: s.t_end + lead_in_s,
                ..*s
            }));
            if scenario.detection.is_some() {
                control_surface = Some(surface_from_corners(&corners)?);
            }
            corners_used = Some(corners);
            Reference::Plan(CoveragePlan::from_segments(segments, params.sample_period)?)
        }
    };
    let initial = RigidBodyState::at_rest(reference.start());
    Ok(Setup { params, ge, true_surface, control_surface, reference, initial, corners_used })
}

/// Runs the scenario to completion.
pub fn run_scenario(scenario: &Scenario) -> Result<RunOutput, SimError> {
    scenario.validate()?;
    let (dt, substeps) = scenario.rates.steps()?;
    let dt_control = dt * substeps as f64;

    let mut noise = scenario.noise.enabled.then(|| {
        SensorNoiseModel::from_rms(
            scenario.noise.position_rms_m,
            scenario.noise.attitude_rms_deg.to_radians(),
            scenario.noise.correlation_time_s,
            dt,
            rng_stream(scenario.seed, NOISE_STREAM),
        )
    });
    let mut wind = scenario.wind.enabled.then(|| {
        WindModel::new(
            scenario.wind.force_sigma_n,
            scenario.wind.correlation_time_s,
            Vector3::from(scenario.wind.mean_force_n),
            dt,
            rng_stream(scenario.seed, WIND_STREAM),
        )
    });

    let Setup { params, ge, true_surface, control_surface, reference, initial, corners_used } =
        setup(scenario, noise.as_ref())?;

    let d = &scenario.dispensing;
    let estimator = MassEstimator::new(params.mass_full(), d.flow_rate_ml_s * 1e-6, d.density_kg_m3, d.capacity_ml * 1e-6)?;
    let mut controller = CascadedController::new(
        params.clone(),
        scenario.gains.gains()?,
        scenario.toggles.controller(),
        ge,
        control_surface,
        estimator,
    );
    let plant_flow = d.plant_flow_rate_ml_s.unwrap_or(d.flow_rate_ml_s) * 1e-6 * d.density_kg_m3;
    let liquid_available = params.liquid_mass_initial.min(d.capacity_ml * 1e-6 * d.density_kg_m3);
    let mut dispensed = 0.0_f64;

    let plant_surface = true_surface.as_ref().filter(|_| scenario.toggles.plant_ground_effect);
    let ticks = (scenario.duration_s / dt_control).round() as usize;
    let mut state = initial;
    let mut log = Vec::with_capacity(ticks / scenario.log.decimation + 1);
    let mut tracking = Vec::with_capacity(ticks);
    let (mut est_pos_sq, mut est_att_sq) = (0.0_f64, 0.0_f64);

    for k in 0..ticks {
        let t = k as f64 * dt_control;
        let sample = reference.at(t);
        let valve_open = match &reference {
            Reference::Plan(plan) if d.follow_plan => plan.valve_open_at(t),
            _ => d.intervals.iter().any(|&[a, b]| t >= a && t < b),
        };
        let estimate = noise.as_ref().map_or(state, |n| n.corrupt(&state));
        est_pos_sq += (estimate.position - state.position).norm_squared();
        est_att_sq += estimate.attitude.angle_to(&state.attitude).to_degrees().powi(2);

        let out = controller.update(&estimate, &sample, valve_open, dt_control)?;
        let mass_true = params.mass_full() - dispensed;

        let over_surface = true_surface
            .as_ref()
            .is_some_and(|s| s.contains_xy(&Vector2::new(sample.position.x, sample.position.y), 0.0));
        tracking.push(TrackingSample { t, actual: state.position, reference: sample.position, over_surface, valve_open });
        if k % scenario.log.decimation == 0 {
            log.push(LogRow {
                t,
                state,
                estimated_position: estimate.position,
                setpoint: sample.position,
                rotor_forces: out.rotor_forces,
                mass_true,
                mass_estimated: controller.mass_estimator().current_mass(),
                valve_open,
            });
        }

        for _ in 0..substeps {
            let mut input = PlantInput::free_air(out.speeds, params.mass_full() - dispensed);
            if let Some(surface) = plant_surface {
                let (h, a) = panel::rotor_heights(&state.rotor_centers(&params), surface, ge.rotor_radius);
                input.thrust_multipliers = std::array::from_fn(|i| ge.plant_amplification(a[i], h[i]));
            }
            if let Some(w) = &wind {
                input.external_force = w.force();
            }
            state = dynamics::step(&state, &input, &params, dt)?;
            if !state.is_finite() || state.position.norm() > DIVERGENCE_RADIUS {
                return Err(SimError::Numerical(format!("state diverged at t = {:.3} s", t)));
            }
            if valve_open {
                dispensed = (dispensed + plant_flow * dt).min(liquid_available);
            }
            if let Some(n) = noise.as_mut() {
                n.step();
            }
            if let Some(w) = wind.as_mut() {
                w.step();
            }
        }
    }

    let mut metrics = compute_rmse(&tracking, &scenario.evaluation)?;
    metrics.final_altitude_error = final_altitude_error(&tracking, FINAL_WINDOW_S)?;
    let n = tracking.len() as f64;
    metrics.estimation_position_rmse = (est_pos_sq / n).sqrt();
    metrics.estimation_attitude_rmse_deg = (est_att_sq / n).sqrt();

    let plan = match reference {
        Reference::Plan(plan) => Some(plan),
        _ => None,
    };
    Ok(RunOutput { metrics, log, tracking, plan, corners_used })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(t: f64, err: Vector3<f64>) -> TrackingSample {
        TrackingSample { t, actual: err, reference: Vector3::zeros(), over_surface: t >= 1.0, valve_open: false }
    }

    #[test]
    fn constant_error() {
        let s: Vec<_> = (0..10).map(|i| sample(i as f64, Vector3::new(0.0, 0.0, 0.02))).collect();
        let m = compute_rmse(&s, &EvaluationWindow::Full).unwrap();
        assert!((m.rmse[2] - 0.02).abs() < 1e-15);
        assert_eq!(m.rmse[0], 0.0);
    }

    #[test]
    fn alternating_error_and_sign_symmetry() {
        let s: Vec<_> = (0..10)
            .map(|i| sample(i as f64, Vector3::new(0.0, 0.0, if i % 2 == 0 { 0.02 } else { -0.02 })))
            .collect();
        let flipped: Vec<_> = s.iter().map(|x| TrackingSample { actual: -x.actual, ..*x }).collect();
        let a = compute_rmse(&s, &EvaluationWindow::Full).unwrap();
        let b = compute_rmse(&flipped, &EvaluationWindow::Full).unwrap();
        assert!((a.rmse[2] - 0.02).abs() < 1e-15);
        assert_eq!(a, b);
    }

    #[test]
    fn zero_error_and_windows() {
        let s: Vec<_> = (0..10).map(|i| sample(i as f64, Vector3::zeros())).collect();
        assert_eq!(compute_rmse(&s, &EvaluationWindow::Full).unwrap().rmse_3d, 0.0);
        assert_eq!(compute_rmse(&s, &EvaluationWindow::OverSurface).unwrap().samples, 9);
        assert_eq!(compute_rmse(&s, &EvaluationWindow::LastS(2.0)).unwrap().samples, 3);
        assert_eq!(compute_rmse(&s, &EvaluationWindow::Time([2.0, 4.0])).unwrap().samples, 3);
        assert!(matches!(compute_rmse(&s, &EvaluationWindow::ValveOpen), Err(SimError::EmptyWindow)));
        assert!(matches!(compute_rmse(&[], &EvaluationWindow::Full), Err(SimError::EmptyWindow)));
    }
}
