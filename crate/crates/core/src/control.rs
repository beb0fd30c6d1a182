//! Cascaded flight controller: position → attitude → body rates, followed by
//! the two feedforward compensation layers (per-rotor ground effect and
//! dispensed liquid mass).

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use thiserror::Error;

use crate::dynamics::{self, RigidBodyState, RotorSpeeds, VehicleParams, WrenchCommand};
use crate::ground_effect::{GroundEffectError, GroundEffectModel};
use crate::panel;
use crate::surface::SurfaceModel;

/// Thrust vectors shorter than this cannot define a body z axis, N.
pub const MIN_THRUST_NORM: f64 = 1e-6;

/// Lower bound on the vertical component of the commanded acceleration, as a
/// fraction of gravity. Keeps the thrust vector above the horizon.
pub const MIN_VERTICAL_ACCEL_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ControlError {
    #[error("thrust vector norm {0:.3e} N is too small to define an attitude")]
    DegenerateThrust(f64),
    #[error("invalid mass estimator: {0}")]
    InvalidEstimator(&'static str),
    #[error(transparent)]
    GroundEffect(#[from] GroundEffectError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains {
    /// Position error gain per axis, s⁻².
    pub position_p: Vector3<f64>,
    /// Integrated position error gain per axis, s⁻³.
    pub position_i: Vector3<f64>,
    /// Velocity error gain per axis, s⁻¹.
    pub position_d: Vector3<f64>,
    /// Anti-windup clamp on each integrator axis, m·s.
    pub integrator_limit: f64,
    /// Attitude error gain per body axis, s⁻¹.
    pub attitude_p: Vector3<f64>,
    /// Rate error gain per body axis, N·m·s/rad.
    pub rate_p: Vector3<f64>,
}

impl Default for ControllerGains {
    /// Position loop near 2 rad/s (ζ ≈ 0.7), attitude near 10 rad/s and rate
    /// near 40 rad/s for the default inertia.
    fn default() -> Self {
        Self {
            position_p: Vector3::repeat(4.0),
            position_i: Vector3::repeat(2.0),
            position_d: Vector3::repeat(2.8),
            integrator_limit: 1.0,
            attitude_p: Vector3::new(10.0, 10.0, 4.0),
            rate_p: Vector3::new(0.5, 0.5, 0.9),
        }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<(), &'static str> {
        let vectors = [self.position_p, self.position_i, self.position_d, self.attitude_p, self.rate_p];
        if vectors.iter().flat_map(|v| v.iter()).any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err("gains must be finite and non-negative");
        }
        if self.position_i.iter().any(|g| *g > 0.0) && !(self.integrator_limit > 0.0) {
            return Err("integrator limit must be positive when integral gains are set");
        }
        Ok(())
    }
}

/// Which compensation layers are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompensationToggles {
    pub ground_effect: bool,
    pub mass: bool,
    pub integrator: bool,
}

impl Default for CompensationToggles {
    fn default() -> Self {
        Self { ground_effect: true, mass: true, integrator: true }
    }
}

/// Reference for the position loop at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub time: f64,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub yaw: f64,
}

impl TrajectorySample {
    pub fn hover(time: f64, position: Vector3<f64>, yaw: f64) -> Self {
        Self { time, position, velocity: Vector3::zeros(), yaw }
    }
}

/// Open-loop estimate of the liquid released so far, from a constant flow
/// rate integrated while the valve is open.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassEstimator {
    mass_initial: f64,
    dispensed_volume: f64,
    flow_rate: f64,
    liquid_density: f64,
    valve_open: bool,
    volume_capacity: f64,
}

impl MassEstimator {
    /// `mass_initial` in kg includes a full tank of `volume_capacity` m³;
    /// `flow_rate` is in m³/s and `liquid_density` in kg/m³.
    pub fn new(mass_initial: f64, flow_rate: f64, liquid_density: f64, volume_capacity: f64) -> Result<Self, ControlError> {
        if !(flow_rate >= 0.0 && liquid_density > 0.0 && volume_capacity >= 0.0) {
            return Err(ControlError::InvalidEstimator(
                "flow rate, density and capacity must be non-negative (density positive)",
            ));
        }
        if !(mass_initial - volume_capacity * liquid_density > 0.0) {
            return Err(ControlError::InvalidEstimator(
                "vehicle mass must stay positive with an empty tank",
            ));
        }
        Ok(Self {
            mass_initial,
            dispensed_volume: 0.0,
            flow_rate,
            liquid_density,
            valve_open: false,
            volume_capacity,
        })
    }

    pub fn mass_initial(&self) -> f64 {
        self.mass_initial
    }

    pub fn dispensed_volume(&self) -> f64 {
        self.dispensed_volume
    }

    pub fn dispensed_mass(&self) -> f64 {
        self.dispensed_volume * self.liquid_density
    }

    pub fn current_mass(&self) -> f64 {
        self.mass_initial - self.dispensed_mass()
    }

    pub fn valve_open(&self) -> bool {
        self.valve_open
    }
}

/// Advances the estimate by `dt`, integrating the flow while the valve is
/// open and capping at the tank capacity.
pub fn mass_update(est: MassEstimator, valve_open: bool, dt: f64) -> MassEstimator {
    let mut next = est;
    next.valve_open = valve_open;
    if valve_open && dt > 0.0 {
        next.dispensed_volume = (est.dispensed_volume + est.flow_rate * dt).min(est.volume_capacity);
    }
    next
}

/// Output of the position stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionCommand {
    /// Desired thrust vector in the world frame, N.
    pub thrust: Vector3<f64>,
    /// Updated integrator state, m·s.
    pub integrator: Vector3<f64>,
}

/// PID on position and velocity error plus gravity feedforward, scaled by the
/// mass estimate. The integrator only advances when `integrate` is set.
#[allow(clippy::too_many_arguments)]
pub fn position_control(
    state: &RigidBodyState,
    sample: &TrajectorySample,
    gains: &ControllerGains,
    mass_est: f64,
    integrator: &Vector3<f64>,
    integrate: bool,
    gravity: f64,
    dt: f64,
) -> PositionCommand {
    let error = sample.position - state.position;
    let mut accel = gains.position_p.component_mul(&error)
        + gains.position_d.component_mul(&(sample.velocity - state.velocity))
        + Vector3::new(0.0, 0.0, gravity);
    let mut next = *integrator;
    if integrate {
        let limit = gains.integrator_limit;
        next = (next + error * dt).map(|v| v.clamp(-limit, limit));
        accel += gains.position_i.component_mul(&next);
    }
    accel.z = accel.z.max(MIN_VERTICAL_ACCEL_FRACTION * gravity);
    PositionCommand { thrust: accel * mass_est, integrator: next }
}

/// Attitude whose body z axis is along `thrust` with heading `yaw`, and the
/// collective thrust magnitude.
pub fn attitude_from_thrust(thrust: &Vector3<f64>, yaw: f64) -> Result<(UnitQuaternion<f64>, f64), ControlError> {
    let magnitude = thrust.norm();
    if !(magnitude >= MIN_THRUST_NORM) {
        return Err(ControlError::DegenerateThrust(magnitude));
    }
    let z_b = thrust / magnitude;
    let heading = Vector3::new(libm::cos(yaw), libm::sin(yaw), 0.0);
    let mut y_b = z_b.cross(&heading);
    if y_b.norm() < 1e-9 {
        // Thrust lies along the heading; any perpendicular completes the frame.
        y_b = z_b.cross(&Vector3::new(-heading.y, heading.x, 0.0)).cross(&z_b);
    }
    let y_b = y_b.normalize();
    let x_b = y_b.cross(&z_b);
    let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x_b, y_b, z_b]));
    Ok((UnitQuaternion::from_rotation_matrix(&rot), magnitude))
}

/// Rotation vector (axis · angle, angle in [0, π]) of `q`.
pub fn rotation_log(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    let (w, v) = if q.w < 0.0 { (-q.w, -q.imag()) } else { (q.w, q.imag()) };
    let s = v.norm();
    if s < 1e-12 {
        return v * 2.0;
    }
    v * (2.0 * libm::atan2(s, w) / s)
}

/// Body-rate setpoint proportional to the body-frame attitude error.
pub fn attitude_control(
    attitude: &UnitQuaternion<f64>,
    desired: &UnitQuaternion<f64>,
    gains: &ControllerGains,
) -> Vector3<f64> {
    let error = attitude.inverse() * desired;
    gains.attitude_p.component_mul(&rotation_log(&error))
}

/// Body torque proportional to the rate error.
pub fn rate_control(body_rates: &Vector3<f64>, rate_setpoint: &Vector3<f64>, gains: &ControllerGains) -> Vector3<f64> {
    gains.rate_p.component_mul(&(rate_setpoint - body_rates))
}

/// Scales each rotor force setpoint by its clipped ground-effect ratio.
/// Rotors with no surface underneath are passed through untouched.
pub fn compensate_per_rotor(
    forces: &[f64; 4],
    rotor_centers: &[Vector3<f64>; 4],
    surface: &SurfaceModel,
    ge: &GroundEffectModel,
    h_des: &[f64; 4],
) -> Result<[f64; 4], GroundEffectError> {
    let (heights, overlaps) = panel::rotor_heights(rotor_centers, surface, ge.rotor_radius);
    let mut out = *forces;
    for i in 0..4 {
        if overlaps[i] == 0.0 {
            continue;
        }
        out[i] *= ge.compensated_force_ratio(overlaps[i], heights[i], h_des[i])?;
    }
    Ok(out)
}

/// Per-rotor desired heights: rotor heights above the surface with the
/// vehicle level at the setpoint, never below the model's height floor.
pub fn desired_rotor_heights(
    sample: &TrajectorySample,
    params: &VehicleParams,
    surface: &SurfaceModel,
    ge: &GroundEffectModel,
) -> [f64; 4] {
    let level = RigidBodyState {
        position: sample.position,
        velocity: Vector3::zeros(),
        attitude: UnitQuaternion::from_axis_angle(&Vector3::z_axis(), sample.yaw),
        body_rates: Vector3::zeros(),
    };
    level
        .rotor_centers(params)
        .map(|c| surface.height_above(&c).max(ge.h_floor))
}

/// Everything the controller decided on one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub speeds: RotorSpeeds,
    /// Rotor force setpoints after compensation, N.
    pub rotor_forces: [f64; 4],
    pub thrust: f64,
    pub torque: Vector3<f64>,
    pub attitude_setpoint: UnitQuaternion<f64>,
    pub rate_setpoint: Vector3<f64>,
    /// Mass used in the thrust computation, kg.
    pub mass_used: f64,
}

/// Stateful controller: integrator, mass estimate and the surface it
/// compensates against.
#[derive(Debug, Clone)]
pub struct CascadedController {
    pub gains: ControllerGains,
    pub toggles: CompensationToggles,
    params: VehicleParams,
    ground_effect: GroundEffectModel,
    surface: Option<SurfaceModel>,
    mass: MassEstimator,
    integrator: Vector3<f64>,
}

impl CascadedController {
    pub fn new(
        params: VehicleParams,
        gains: ControllerGains,
        toggles: CompensationToggles,
        ground_effect: GroundEffectModel,
        surface: Option<SurfaceModel>,
        mass: MassEstimator,
    ) -> Self {
        Self {
            gains,
            toggles,
            params,
            ground_effect,
            surface,
            mass,
            integrator: Vector3::zeros(),
        }
    }

    pub fn integrator(&self) -> &Vector3<f64> {
        &self.integrator
    }

    pub fn mass_estimator(&self) -> &MassEstimator {
        &self.mass
    }

    pub fn surface(&self) -> Option<&SurfaceModel> {
        self.surface.as_ref()
    }

    pub fn update(
        &mut self,
        estimate: &RigidBodyState,
        sample: &TrajectorySample,
        valve_open: bool,
        dt: f64,
    ) -> Result<ControlOutput, ControlError> {
        self.mass = mass_update(self.mass, valve_open, dt);
        let mass_used = if self.toggles.mass {
            self.mass.current_mass()
        } else {
            self.mass.mass_initial()
        };

        let pos = position_control(
            estimate,
            sample,
            &self.gains,
            mass_used,
            &self.integrator,
            self.toggles.integrator,
            self.params.gravity,
            dt,
        );
        self.integrator = pos.integrator;
        let (attitude_setpoint, thrust) = attitude_from_thrust(&pos.thrust, sample.yaw)?;
        let rate_setpoint = attitude_control(&estimate.attitude, &attitude_setpoint, &self.gains);
        let torque = rate_control(&estimate.body_rates, &rate_setpoint, &self.gains);

        let mut rotor_forces = dynamics::allocate_saturating(&WrenchCommand::new(thrust, torque), &self.params);
        if self.toggles.ground_effect {
            if let Some(surface) = &self.surface {
                let h_des = desired_rotor_heights(sample, &self.params, surface, &self.ground_effect);
                let centers = estimate.rotor_centers(&self.params);
                rotor_forces = compensate_per_rotor(&rotor_forces, &centers, surface, &self.ground_effect, &h_des)?;
            }
        }
        Ok(ControlOutput {
            speeds: dynamics::forces_to_speeds(&rotor_forces, &self.params),
            rotor_forces,
            thrust,
            torque,
            attitude_setpoint,
            rate_setpoint,
            mass_used,
        })
    }
}
