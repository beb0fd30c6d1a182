//! Scenario files: JSON, one object per run.
//!
//! Every section except `trajectory` has defaults, so a scenario only needs
//! to spell out what differs from the reference vehicle and controller. The
//! full schema is described in `scenarios/SCHEMA.md`.

use std::path::Path;

use pvcoat_core::nalgebra::{Matrix3, Vector3};
use pvcoat_core::{CompensationToggles, ControllerGains, CoverageParams, GroundEffectModel, PanelCorners, SurfaceModel, VehicleParams};
use serde::{Deserialize, Serialize};

use crate::error::SimError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Simulated time, s.
    pub duration_s: f64,
    #[serde(default)]
    pub vehicle: VehicleSpec,
    #[serde(default)]
    pub surface: Option<SurfaceSpec>,
    pub trajectory: TrajectorySpec,
    #[serde(default)]
    pub toggles: Toggles,
    #[serde(default)]
    pub ground_effect: GroundEffectSpec,
    #[serde(default)]
    pub gains: GainsSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub wind: WindSpec,
    #[serde(default)]
    pub dispensing: DispensingSpec,
    #[serde(default)]
    pub detection: Option<DetectionSpec>,
    #[serde(default)]
    pub evaluation: EvaluationWindow,
    #[serde(default)]
    pub rates: RateSpec,
    #[serde(default)]
    pub log: LogSpec,
    /// Directory for the log and metrics written by the command line.
    #[serde(default)]
    pub output: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleSpec {
    pub mass_empty_kg: f64,
    pub liquid_mass_kg: f64,
    /// Principal moments of inertia, kg·m².
    pub inertia_diag: [f64; 3],
    pub arm_length_m: f64,
    pub k_f: f64,
    pub k_m: f64,
    pub rotor_radius_m: f64,
    pub gravity: f64,
    pub max_rotor_speed: f64,
}

impl Default for VehicleSpec {
    fn default() -> Self {
        let p = VehicleParams::default();
        Self {
            mass_empty_kg: p.mass_empty,
            liquid_mass_kg: p.liquid_mass_initial,
            inertia_diag: [p.inertia[(0, 0)], p.inertia[(1, 1)], p.inertia[(2, 2)]],
            arm_length_m: p.arm_length,
            k_f: p.k_f,
            k_m: p.k_m,
            rotor_radius_m: p.rotor_radius,
            gravity: p.gravity,
            max_rotor_speed: p.max_rotor_speed,
        }
    }
}

impl VehicleSpec {
    pub fn params(&self) -> Result<VehicleParams, SimError> {
        let p = VehicleParams {
            mass_empty: self.mass_empty_kg,
            liquid_mass_initial: self.liquid_mass_kg,
            inertia: Matrix3::from_diagonal(&Vector3::from(self.inertia_diag)),
            arm_length: self.arm_length_m,
            k_f: self.k_f,
            k_m: self.k_m,
            rotor_radius: self.rotor_radius_m,
            gravity: self.gravity,
            max_rotor_speed: self.max_rotor_speed,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum SurfaceSpec {
    /// Rectangle `size[0] × size[1]` centred at `center`, tilted about its
    /// local x axis (rising towards +y) and then yawed.
    Rectangle {
        center: [f64; 3],
        size: [f64; 2],
        #[serde(default)]
        tilt_deg: f64,
        #[serde(default)]
        yaw_deg: f64,
    },
    /// Four world-frame corners of a planar convex quadrilateral.
    Corners([[f64; 3]; 4]),
}

impl SurfaceSpec {
    pub fn corners(&self) -> Result<PanelCorners, SimError> {
        match self {
            SurfaceSpec::Corners(c) => Ok(PanelCorners(c.map(Vector3::from))),
            SurfaceSpec::Rectangle { .. } => {
                let s = self.surface()?;
                let b = s.boundary();
                Ok(PanelCorners([b[0], b[1], b[2], b[3]]))
            }
        }
    }

    pub fn surface(&self) -> Result<SurfaceModel, SimError> {
        match self {
            SurfaceSpec::Rectangle { center, size, tilt_deg, yaw_deg } => Ok(SurfaceModel::rectangle(
                Vector3::from(*center),
                size[0],
                size[1],
                tilt_deg.to_radians(),
                yaw_deg.to_radians(),
            )?),
            SurfaceSpec::Corners(_) => Ok(pvcoat_core::panel::surface_from_corners(&self.corners()?)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "type", rename_all = "snake_case")]
pub enum TrajectorySpec {
    Hover {
        position: [f64; 3],
        #[serde(default)]
        yaw_deg: f64,
    },
    /// Hold at `start`, fly to `end` at constant `speed`, hold at `end`.
    StraightPass {
        start: [f64; 3],
        end: [f64; 3],
        speed: f64,
        #[serde(default = "default_hold")]
        hold_s: f64,
    },
    /// Survey the panel from above, plan sweeps over it and fly them.
    Coverage {
        #[serde(default = "default_speed")]
        speed: f64,
        #[serde(default = "default_spacing")]
        spacing: f64,
        #[serde(default = "default_standoff")]
        standoff: f64,
        #[serde(default)]
        margin: f64,
        #[serde(default = "default_turn_time")]
        turn_time: f64,
        /// Height of the survey point above the panel centre, m.
        #[serde(default = "default_survey_height")]
        survey_height: f64,
        /// Transfer time from the survey point to the first sweep, s.
        #[serde(default = "default_lead_in")]
        lead_in_s: f64,
    },
}

fn default_hold() -> f64 {
    2.0
}
fn default_speed() -> f64 {
    CoverageParams::default().speed
}
fn default_spacing() -> f64 {
    CoverageParams::default().sweep_spacing
}
fn default_standoff() -> f64 {
    CoverageParams::default().standoff
}
fn default_turn_time() -> f64 {
    CoverageParams::default().turn_time
}
fn default_survey_height() -> f64 {
    0.8
}
fn default_lead_in() -> f64 {
    4.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Toggles {
    /// Ground effect acts on the simulated vehicle.
    pub plant_ground_effect: bool,
    pub ge_comp: bool,
    pub mass_comp: bool,
    pub integrator: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Self { plant_ground_effect: true, ge_comp: true, mass_comp: true, integrator: true }
    }
}

impl Toggles {
    pub fn controller(&self) -> CompensationToggles {
        CompensationToggles { ground_effect: self.ge_comp, mass: self.mass_comp, integrator: self.integrator }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroundEffectSpec {
    pub rho: f64,
    pub rotor_radius_m: f64,
    pub h_floor_m: f64,
}

impl Default for GroundEffectSpec {
    fn default() -> Self {
        let m = GroundEffectModel::default();
        Self { rho: m.rho, rotor_radius_m: m.rotor_radius, h_floor_m: m.h_floor }
    }
}

impl GroundEffectSpec {
    pub fn model(&self) -> Result<GroundEffectModel, SimError> {
        Ok(GroundEffectModel::new(self.rho, self.rotor_radius_m, self.h_floor_m)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GainsSpec {
    pub position_p: [f64; 3],
    pub position_i: [f64; 3],
    pub position_d: [f64; 3],
    pub integrator_limit: f64,
    pub attitude_p: [f64; 3],
    pub rate_p: [f64; 3],
}

impl Default for GainsSpec {
    fn default() -> Self {
        let g = ControllerGains::default();
        Self {
            position_p: g.position_p.into(),
            position_i: g.position_i.into(),
            position_d: g.position_d.into(),
            integrator_limit: g.integrator_limit,
            attitude_p: g.attitude_p.into(),
            rate_p: g.rate_p.into(),
        }
    }
}

impl GainsSpec {
    pub fn gains(&self) -> Result<ControllerGains, SimError> {
        let g = ControllerGains {
            position_p: self.position_p.into(),
            position_i: self.position_i.into(),
            position_d: self.position_d.into(),
            integrator_limit: self.integrator_limit,
            attitude_p: self.attitude_p.into(),
            rate_p: self.rate_p.into(),
        };
        g.validate().map_err(SimError::config)?;
        Ok(g)
    }
}

/// Estimation error injected between the true state and the controller.
/// Values are 3D RMS figures; each axis gets `value / √3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    pub enabled: bool,
    pub position_rms_m: f64,
    pub attitude_rms_deg: f64,
    pub correlation_time_s: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { enabled: false, position_rms_m: 0.044, attitude_rms_deg: 2.6, correlation_time_s: 0.5 }
    }
}

/// Horizontal force disturbance, first-order Gauss-Markov per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindSpec {
    pub enabled: bool,
    /// Stationary standard deviation per horizontal axis, N.
    pub force_sigma_n: f64,
    /// Constant force added on top, N.
    pub mean_force_n: [f64; 3],
    pub correlation_time_s: f64,
}

impl Default for WindSpec {
    fn default() -> Self {
        Self { enabled: false, force_sigma_n: 0.15, mean_force_n: [0.0; 3], correlation_time_s: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DispensingSpec {
    /// Flow rate assumed by the mass estimator, ml/s.
    pub flow_rate_ml_s: f64,
    /// Actual flow rate in the simulated vehicle; the estimator's rate when
    /// absent.
    pub plant_flow_rate_ml_s: Option<f64>,
    pub density_kg_m3: f64,
    pub capacity_ml: f64,
    /// Supply pressure. Recorded only; the flow rate already reflects it.
    pub pressure_kpa: f64,
    /// Valve-open intervals `[start, end]`, s.
    pub intervals: Vec<[f64; 2]>,
    /// Open the valve on the coverage plan's sweeps instead of `intervals`.
    pub follow_plan: bool,
}

impl Default for DispensingSpec {
    fn default() -> Self {
        Self {
            flow_rate_ml_s: 2.5,
            plant_flow_rate_ml_s: None,
            density_kg_m3: 1000.0,
            capacity_ml: 150.0,
            pressure_kpa: 240.0,
            intervals: Vec::new(),
            follow_plan: false,
        }
    }
}

/// Panel detection from a synthetic depth cloud taken at the survey point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionSpec {
    pub grid_step_m: f64,
    pub depth_noise_m: f64,
    pub outlier_fraction: f64,
    pub epsilon_m: f64,
    pub iterations: usize,
}

impl Default for DetectionSpec {
    fn default() -> Self {
        Self { grid_step_m: 0.02, depth_noise_m: 0.003, outlier_fraction: 0.3, epsilon_m: 0.015, iterations: 300 }
    }
}

/// Which control ticks the metrics are computed over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum EvaluationWindow {
    #[default]
    Full,
    /// `[start, end]` in seconds.
    Time([f64; 2]),
    /// Ticks whose setpoint lies over the surface footprint.
    OverSurface,
    /// Ticks with the valve open.
    ValveOpen,
    /// The final `n` seconds.
    LastS(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateSpec {
    pub plant_hz: f64,
    pub control_hz: f64,
}

impl Default for RateSpec {
    fn default() -> Self {
        Self { plant_hz: 1000.0, control_hz: 500.0 }
    }
}

impl RateSpec {
    /// Plant step and plant steps per control tick.
    pub fn steps(&self) -> Result<(f64, usize), SimError> {
        if !(self.plant_hz > 0.0 && self.control_hz > 0.0) {
            return Err(SimError::config("rates must be positive"));
        }
        let ratio = self.plant_hz / self.control_hz;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 {
            return Err(SimError::config("plant_hz must be an integer multiple of control_hz"));
        }
        let dt = 1.0 / self.plant_hz;
        if dt > 0.01 {
            return Err(SimError::config("plant_hz must be at least 100"));
        }
        Ok((dt, n as usize))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogSpec {
    /// Write every n-th control tick.
    pub decimation: usize,
}

impl Default for LogSpec {
    fn default() -> Self {
        Self { decimation: 10 }
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<(), SimError> {
        if self.version != SCHEMA_VERSION {
            return Err(SimError::config(format!(
                "unsupported scenario version {} (expected {SCHEMA_VERSION})",
                self.version
            )));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(SimError::config("duration_s must be positive"));
        }
        self.vehicle.params()?;
        self.ground_effect.model()?;
        self.gains.gains()?;
        self.rates.steps()?;
        if self.log.decimation == 0 {
            return Err(SimError::config("log.decimation must be at least 1"));
        }
        if let Some(surface) = &self.surface {
            surface.surface()?;
        }
        match &self.trajectory {
            TrajectorySpec::Hover { .. } => {}
            TrajectorySpec::StraightPass { start, end, speed, hold_s } => {
                if !(*speed > 0.0) || !(*hold_s >= 0.0) {
                    return Err(SimError::config("straight_pass needs speed > 0 and hold_s >= 0"));
                }
                if start == end {
                    return Err(SimError::config("straight_pass start and end coincide"));
                }
            }
            TrajectorySpec::Coverage { speed, spacing, standoff, margin, turn_time, survey_height, lead_in_s } => {
                if self.surface.is_none() {
                    return Err(SimError::config("coverage trajectory requires a surface"));
                }
                CoverageParams {
                    speed: *speed,
                    sweep_spacing: *spacing,
                    standoff: *standoff,
                    margin: *margin,
                    turn_time: *turn_time,
                    sample_period: 0.02,
                }
                .validate()?;
                if !(*survey_height > 0.0 && *lead_in_s > 0.0) {
                    return Err(SimError::config("survey_height and lead_in_s must be positive"));
                }
            }
        }
        if self.dispensing.follow_plan && !matches!(self.trajectory, TrajectorySpec::Coverage { .. }) {
            return Err(SimError::config("dispensing.follow_plan requires a coverage trajectory"));
        }
        if self.detection.is_some() && !matches!(self.trajectory, TrajectorySpec::Coverage { .. }) {
            return Err(SimError::config("detection is only used with a coverage trajectory"));
        }
        if let Some(d) = &self.detection {
            if !(d.grid_step_m > 0.0 && d.epsilon_m > 0.0 && d.depth_noise_m >= 0.0 && d.iterations > 0) {
                return Err(SimError::config("detection parameters out of range"));
            }
            if !(0.0..0.9).contains(&d.outlier_fraction) {
                return Err(SimError::config("detection.outlier_fraction must be in [0, 0.9)"));
            }
        }
        let d = &self.dispensing;
        if !(d.flow_rate_ml_s >= 0.0 && d.density_kg_m3 > 0.0 && d.capacity_ml >= 0.0) {
            return Err(SimError::config("dispensing parameters out of range"));
        }
        if d.plant_flow_rate_ml_s.is_some_and(|f| !(f >= 0.0)) {
            return Err(SimError::config("plant_flow_rate_ml_s must be non-negative"));
        }
        if d.intervals.iter().any(|[a, b]| !(b > a)) {
            return Err(SimError::config("dispensing intervals must have end > start"));
        }
        let n = &self.noise;
        if !(n.position_rms_m >= 0.0 && n.attitude_rms_deg >= 0.0 && n.correlation_time_s > 0.0) {
            return Err(SimError::config("noise parameters out of range"));
        }
        let w = &self.wind;
        if !(w.force_sigma_n >= 0.0 && w.correlation_time_s > 0.0) {
            return Err(SimError::config("wind parameters out of range"));
        }
        match self.evaluation {
            EvaluationWindow::Time([a, b]) if !(b > a) => {
                return Err(SimError::config("evaluation time window must have end > start"))
            }
            EvaluationWindow::LastS(s) if !(s > 0.0) => return Err(SimError::config("evaluation last_s must be positive")),
            EvaluationWindow::OverSurface if self.surface.is_none() => {
                return Err(SimError::config("over_surface evaluation requires a surface"))
            }
            _ => {}
        }
        Ok(())
    }
}
