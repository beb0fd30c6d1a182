//! Rigid-body quadrotor plant.
//!
//! Rotors sit in an "×" layout at distance `arm_length` from the centre of
//! mass. In body coordinates (x forward, y left, z up) with `a = l/√2`:
//!
//! | rotor | position   | spin sign (yaw torque) |
//! |-------|------------|------------------------|
//! | 0     | ( a, -a)   | +                      |
//! | 1     | (-a, -a)   | -                      |
//! | 2     | (-a,  a)   | +                      |
//! | 3     | ( a,  a)   | -                      |
//!
//! which gives `τx = a(-F0 - F1 + F2 + F3)`, `τy = a(-F0 + F1 + F2 - F3)` and
//! `τz = k_m(ω0² - ω1² + ω2² - ω3²)`.

use core::f64::consts::SQRT_2;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use thiserror::Error;

/// Squared rotor speeds above this negative value are treated as rounding
/// noise and clamped to zero by the allocator.
pub const NEGATIVE_SPEED_SQ_TOLERANCE: f64 = 1e-9;

const ROLL_SIGNS: [f64; 4] = [-1.0, -1.0, 1.0, 1.0];
const PITCH_SIGNS: [f64; 4] = [-1.0, 1.0, 1.0, -1.0];
const YAW_SIGNS: [f64; 4] = [1.0, -1.0, 1.0, -1.0];

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DynamicsError {
    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(&'static str),
    #[error("rotor {rotor} needs a negative squared speed ({speed_sq:.3e} rad²/s²)")]
    Unrealizable { rotor: usize, speed_sq: f64 },
    #[error("rotor {rotor} saturates: {speed:.1} rad/s exceeds the {max:.1} rad/s limit")]
    Saturated { rotor: usize, speed: f64, max: f64 },
    #[error("time step {0} s is outside (0, 0.01]")]
    InvalidTimeStep(f64),
    #[error("mass must be positive, got {0} kg")]
    InvalidMass(f64),
    #[error("state became non-finite")]
    NumericalDivergence,
}

/// Physical description of the vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleParams {
    /// Mass without liquid, kg.
    pub mass_empty: f64,
    /// Liquid carried at take-off, kg.
    pub liquid_mass_initial: f64,
    /// Body-frame inertia, kg·m².
    pub inertia: Matrix3<f64>,
    /// Centre-to-rotor distance, m.
    pub arm_length: f64,
    /// Rotor force coefficient, N·s².
    pub k_f: f64,
    /// Rotor drag-torque coefficient, N·m·s².
    pub k_m: f64,
    /// Propeller radius, m.
    pub rotor_radius: f64,
    /// Gravitational acceleration, m/s².
    pub gravity: f64,
    /// Upper rotor speed limit, rad/s.
    pub max_rotor_speed: f64,
}

impl Default for VehicleParams {
    /// 1.56 kg take-off mass including 0.15 kg of liquid, 34 cm motor-to-motor
    /// diagonal and 10 cm propellers. `k_f` puts hover at about 54 % of the
    /// maximum thrust; inertia and `k_m` are representative values for a
    /// vehicle of this size.
    fn default() -> Self {
        Self {
            mass_empty: 1.41,
            liquid_mass_initial: 0.15,
            inertia: Matrix3::from_diagonal(&Vector3::new(0.0125, 0.0125, 0.0230)),
            arm_length: 0.17,
            k_f: 3.149e-6,
            k_m: 5.0e-8,
            rotor_radius: 0.10,
            gravity: 9.81,
            max_rotor_speed: 1500.0,
        }
    }
}

impl VehicleParams {
    pub fn mass_full(&self) -> f64 {
        self.mass_empty + self.liquid_mass_initial
    }

    /// Lever arm `l/√2` of every rotor about the body x and y axes.
    pub fn lever_arm(&self) -> f64 {
        self.arm_length / SQRT_2
    }

    /// Rotor speed at which four equal rotors balance `mass`.
    pub fn hover_rotor_speed(&self, mass: f64) -> f64 {
        libm::sqrt(mass * self.gravity / (4.0 * self.k_f))
    }

    /// Largest force a single rotor can produce, N.
    pub fn max_rotor_force(&self) -> f64 {
        self.k_f * self.max_rotor_speed * self.max_rotor_speed
    }

    /// Rotor hub positions in the body frame.
    pub fn rotor_offsets(&self) -> [Vector3<f64>; 4] {
        let a = self.lever_arm();
        [
            Vector3::new(a, -a, 0.0),
            Vector3::new(-a, -a, 0.0),
            Vector3::new(-a, a, 0.0),
            Vector3::new(a, a, 0.0),
        ]
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let positive = [
            (self.mass_empty, "mass_empty must be positive"),
            (self.arm_length, "arm_length must be positive"),
            (self.k_f, "k_f must be positive"),
            (self.k_m, "k_m must be positive"),
            (self.rotor_radius, "rotor_radius must be positive"),
            (self.gravity, "gravity must be positive"),
            (self.max_rotor_speed, "max_rotor_speed must be positive"),
        ];
        for (value, msg) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(DynamicsError::InvalidParams(msg));
            }
        }
        if !(self.liquid_mass_initial >= 0.0) {
            return Err(DynamicsError::InvalidParams(
                "liquid_mass_initial must be non-negative",
            ));
        }
        let j = &self.inertia;
        if (j - j.transpose()).abs().max() > 1e-12 * j.abs().max() {
            return Err(DynamicsError::InvalidParams("inertia must be symmetric"));
        }
        if j.cholesky().is_none() {
            return Err(DynamicsError::InvalidParams(
                "inertia must be positive definite",
            ));
        }
        if self.hover_rotor_speed(self.mass_full()) > self.max_rotor_speed {
            return Err(DynamicsError::InvalidParams(
                "hover rotor speed exceeds max_rotor_speed",
            ));
        }
        Ok(())
    }
}

/// Full rigid-body state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidBodyState {
    /// World position, m.
    pub position: Vector3<f64>,
    /// World velocity, m/s.
    pub velocity: Vector3<f64>,
    /// Rotation taking body vectors to the world frame.
    pub attitude: UnitQuaternion<f64>,
    /// Body angular rates, rad/s.
    pub body_rates: Vector3<f64>,
}

impl Default for RigidBodyState {
    fn default() -> Self {
        Self::at_rest(Vector3::zeros())
    }
}

impl RigidBodyState {
    pub fn at_rest(position: Vector3<f64>) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            attitude: UnitQuaternion::identity(),
            body_rates: Vector3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.attitude.coords.iter().all(|v| v.is_finite())
            && self.body_rates.iter().all(|v| v.is_finite())
    }

    /// World positions of the four rotor hubs.
    pub fn rotor_centers(&self, params: &VehicleParams) -> [Vector3<f64>; 4] {
        params
            .rotor_offsets()
            .map(|offset| self.position + self.attitude * offset)
    }
}

/// Rotor angular speeds, rad/s, indexed as in the module table.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RotorSpeeds(pub [f64; 4]);

impl RotorSpeeds {
    pub fn uniform(speed: f64) -> Self {
        Self([speed; 4])
    }

    pub fn squared(&self) -> [f64; 4] {
        self.0.map(|w| w * w)
    }

    pub fn is_valid(&self, params: &VehicleParams) -> bool {
        self.0
            .iter()
            .all(|&w| (0.0..=params.max_rotor_speed).contains(&w))
    }
}

/// Collective thrust along body z plus body torque.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WrenchCommand {
    /// N
    pub thrust: f64,
    /// N·m
    pub torque: Vector3<f64>,
}

impl WrenchCommand {
    pub fn new(thrust: f64, torque: Vector3<f64>) -> Self {
        Self { thrust, torque }
    }
}

/// Mixes per-rotor forces and yaw reaction torques into a body wrench.
pub fn mix(forces: &[f64; 4], yaw_torques: &[f64; 4], lever_arm: f64) -> WrenchCommand {
    let dot = |signs: &[f64; 4], v: &[f64; 4]| -> f64 {
        signs.iter().zip(v.iter()).map(|(s, x)| s * x).sum()
    };
    WrenchCommand {
        thrust: forces.iter().sum(),
        torque: Vector3::new(
            lever_arm * dot(&ROLL_SIGNS, forces),
            lever_arm * dot(&PITCH_SIGNS, forces),
            dot(&YAW_SIGNS, yaw_torques),
        ),
    }
}

/// Total thrust and body torque produced by the given rotor speeds.
pub fn rotor_speeds_to_wrench(speeds: &RotorSpeeds, params: &VehicleParams) -> WrenchCommand {
    let sq = speeds.squared();
    mix(
        &sq.map(|s| params.k_f * s),
        &sq.map(|s| params.k_m * s),
        params.lever_arm(),
    )
}

/// Exact inverse of the mixer, in force units. Entries may be negative when
/// the wrench is not realizable.
pub fn unmix(cmd: &WrenchCommand, params: &VehicleParams) -> [f64; 4] {
    let a = params.lever_arm();
    let kappa = params.k_m / params.k_f;
    core::array::from_fn(|i| {
        cmd.thrust / 4.0
            + ROLL_SIGNS[i] * cmd.torque.x / (4.0 * a)
            + PITCH_SIGNS[i] * cmd.torque.y / (4.0 * a)
            + YAW_SIGNS[i] * cmd.torque.z / (4.0 * kappa)
    })
}

/// Rotor speeds realizing `cmd`, or an error naming the first infeasible
/// rotor.
pub fn wrench_to_rotor_speeds(
    cmd: &WrenchCommand,
    params: &VehicleParams,
) -> Result<RotorSpeeds, DynamicsError> {
    let forces = unmix(cmd, params);
    let mut speeds = [0.0; 4];
    for (rotor, (&force, speed)) in forces.iter().zip(speeds.iter_mut()).enumerate() {
        let mut speed_sq = force / params.k_f;
        if speed_sq < 0.0 {
            if speed_sq < -NEGATIVE_SPEED_SQ_TOLERANCE {
                return Err(DynamicsError::Unrealizable { rotor, speed_sq });
            }
            speed_sq = 0.0;
        }
        *speed = libm::sqrt(speed_sq);
        if *speed > params.max_rotor_speed {
            return Err(DynamicsError::Saturated {
                rotor,
                speed: *speed,
                max: params.max_rotor_speed,
            });
        }
    }
    Ok(RotorSpeeds(speeds))
}

/// Per-rotor forces for `cmd`, each clamped to what the rotor can deliver.
pub fn allocate_saturating(cmd: &WrenchCommand, params: &VehicleParams) -> [f64; 4] {
    let max = params.max_rotor_force();
    unmix(cmd, params).map(|f| f.clamp(0.0, max))
}

/// Rotor speeds that produce `forces` with no surface effects, clamped to the
/// speed limit.
pub fn forces_to_speeds(forces: &[f64; 4], params: &VehicleParams) -> RotorSpeeds {
    RotorSpeeds(forces.map(|f| libm::sqrt(f.max(0.0) / params.k_f).min(params.max_rotor_speed)))
}

/// World-frame acceleration for collective thrust `thrust` acting along body z.
pub fn translational_accel(
    state: &RigidBodyState,
    thrust: f64,
    mass: f64,
    params: &VehicleParams,
) -> Vector3<f64> {
    Vector3::new(0.0, 0.0, -params.gravity) + state.attitude * Vector3::new(0.0, 0.0, thrust / mass)
}

/// Body angular acceleration from Euler's equation.
pub fn rotational_accel(
    state: &RigidBodyState,
    torque: &Vector3<f64>,
    params: &VehicleParams,
) -> Vector3<f64> {
    let inv = params
        .inertia
        .try_inverse()
        .unwrap_or_else(Matrix3::zeros);
    euler_rates(&state.body_rates, torque, &params.inertia, &inv)
}

fn euler_rates(
    rates: &Vector3<f64>,
    torque: &Vector3<f64>,
    inertia: &Matrix3<f64>,
    inertia_inv: &Matrix3<f64>,
) -> Vector3<f64> {
    inertia_inv * (torque - rates.cross(&(inertia * rates)))
}

/// Inputs held constant over one integration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantInput {
    pub speeds: RotorSpeeds,
    /// Actual-over-nominal thrust factor per rotor (ground effect, battery
    /// sag). All ones for free air.
    pub thrust_multipliers: [f64; 4],
    /// Current vehicle mass, kg.
    pub mass: f64,
    /// External force in the world frame, N.
    pub external_force: Vector3<f64>,
}

impl PlantInput {
    pub fn free_air(speeds: RotorSpeeds, mass: f64) -> Self {
        Self {
            speeds,
            thrust_multipliers: [1.0; 4],
            mass,
            external_force: Vector3::zeros(),
        }
    }
}

/// Wrench the plant actually receives: rotor forces are scaled by the
/// multipliers, yaw reaction torques are not.
pub fn plant_wrench(input: &PlantInput, params: &VehicleParams) -> WrenchCommand {
    let sq = input.speeds.squared();
    let forces: [f64; 4] = core::array::from_fn(|i| params.k_f * sq[i] * input.thrust_multipliers[i]);
    mix(&forces, &sq.map(|s| params.k_m * s), params.lever_arm())
}

#[derive(Clone, Copy)]
struct Derivative {
    velocity: Vector3<f64>,
    accel: Vector3<f64>,
    quat_dot: Quaternion<f64>,
    rate_dot: Vector3<f64>,
}

struct RawState {
    position: Vector3<f64>,
    velocity: Vector3<f64>,
    quat: Quaternion<f64>,
    rates: Vector3<f64>,
}

impl RawState {
    fn offset(&self, d: &Derivative, h: f64) -> RawState {
        RawState {
            position: self.position + d.velocity * h,
            velocity: self.velocity + d.accel * h,
            quat: self.quat + d.quat_dot * h,
            rates: self.rates + d.rate_dot * h,
        }
    }
}

/// Advances the state by `dt` with classical fourth-order Runge-Kutta. The
/// attitude quaternion is integrated directly and renormalized at the end of
/// the step.
pub fn step(
    state: &RigidBodyState,
    input: &PlantInput,
    params: &VehicleParams,
    dt: f64,
) -> Result<RigidBodyState, DynamicsError> {
    if !(dt > 0.0 && dt <= 0.01) {
        return Err(DynamicsError::InvalidTimeStep(dt));
    }
    if !(input.mass > 0.0) {
        return Err(DynamicsError::InvalidMass(input.mass));
    }
    let inertia_inv = params
        .inertia
        .try_inverse()
        .ok_or(DynamicsError::InvalidParams("inertia must be invertible"))?;
    let wrench = plant_wrench(input, params);
    let gravity = Vector3::new(0.0, 0.0, -params.gravity);
    let external_accel = input.external_force / input.mass;

    let derivative = |s: &RawState| -> Derivative {
        // The quaternion is not unit inside the RK stages; rotate with the
        // normalized copy so thrust magnitude is preserved.
        let q = UnitQuaternion::new_normalize(s.quat);
        let thrust_world = q * Vector3::new(0.0, 0.0, wrench.thrust / input.mass);
        let omega = Quaternion::from_parts(0.0, s.rates);
        Derivative {
            velocity: s.velocity,
            accel: gravity + thrust_world + external_accel,
            quat_dot: s.quat * omega * 0.5,
            rate_dot: euler_rates(&s.rates, &wrench.torque, &params.inertia, &inertia_inv),
        }
    };

    let y0 = RawState {
        position: state.position,
        velocity: state.velocity,
        quat: *state.attitude.quaternion(),
        rates: state.body_rates,
    };
    let k1 = derivative(&y0);
    let k2 = derivative(&y0.offset(&k1, dt / 2.0));
    let k3 = derivative(&y0.offset(&k2, dt / 2.0));
    let k4 = derivative(&y0.offset(&k3, dt));
    let combined = Derivative {
        velocity: (k1.velocity + k2.velocity * 2.0 + k3.velocity * 2.0 + k4.velocity) / 6.0,
        accel: (k1.accel + k2.accel * 2.0 + k3.accel * 2.0 + k4.accel) / 6.0,
        quat_dot: (k1.quat_dot + k2.quat_dot * 2.0 + k3.quat_dot * 2.0 + k4.quat_dot) / 6.0,
        rate_dot: (k1.rate_dot + k2.rate_dot * 2.0 + k3.rate_dot * 2.0 + k4.rate_dot) / 6.0,
    };
    let y1 = y0.offset(&combined, dt);

    let next = RigidBodyState {
        position: y1.position,
        velocity: y1.velocity,
        attitude: UnitQuaternion::new_normalize(y1.quat),
        body_rates: y1.rates,
    };
    if next.is_finite() {
        Ok(next)
    } else {
        Err(DynamicsError::NumericalDivergence)
    }
}
