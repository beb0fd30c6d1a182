//! Correlated noise processes for state-estimation error and wind.

use pvcoat_core::nalgebra::{UnitQuaternion, Vector3};
use pvcoat_core::RigidBodyState;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// First-order Gauss-Markov process, discretized exactly for a fixed step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussMarkov {
    pub sigma: f64,
    decay: f64,
    drive: f64,
    value: f64,
}

impl GaussMarkov {
    /// Starts from a draw of the stationary distribution.
    pub fn new(sigma: f64, correlation_time: f64, dt: f64, rng: &mut impl Rng) -> Self {
        let decay = (-dt / correlation_time).exp();
        let drive = sigma * (1.0 - decay * decay).sqrt();
        let z: f64 = StandardNormal.sample(rng);
        Self { sigma, decay, drive, value: sigma * z }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn step(&mut self, rng: &mut impl Rng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.value = self.decay * self.value + self.drive * z;
        self.value
    }
}

fn triple(sigma: f64, tau: f64, dt: f64, rng: &mut impl Rng) -> [GaussMarkov; 3] {
    [
        GaussMarkov::new(sigma, tau, dt, rng),
        GaussMarkov::new(sigma, tau, dt, rng),
        GaussMarkov::new(sigma, tau, dt, rng),
    ]
}

/// Position and attitude estimation error. Velocity and body rates pass
/// through untouched.
#[derive(Debug, Clone)]
pub struct SensorNoiseModel {
    position: [GaussMarkov; 3],
    attitude: [GaussMarkov; 3],
    rng: ChaCha8Rng,
}

impl SensorNoiseModel {
    /// `position_sigma` in m and `attitude_sigma` in rad are per axis.
    pub fn new(position_sigma: f64, attitude_sigma: f64, correlation_time: f64, dt: f64, mut rng: ChaCha8Rng) -> Self {
        let position = triple(position_sigma, correlation_time, dt, &mut rng);
        let attitude = triple(attitude_sigma, correlation_time, dt, &mut rng);
        Self { position, attitude, rng }
    }

    /// Per-axis sigmas from 3D RMS figures.
    pub fn from_rms(position_rms: f64, attitude_rms: f64, correlation_time: f64, dt: f64, rng: ChaCha8Rng) -> Self {
        let k = 3f64.sqrt();
        Self::new(position_rms / k, attitude_rms / k, correlation_time, dt, rng)
    }

    pub fn step(&mut self) {
        for p in self.position.iter_mut().chain(self.attitude.iter_mut()) {
            p.step(&mut self.rng);
        }
    }

    /// The true state as the estimator would report it right now.
    pub fn corrupt(&self, truth: &RigidBodyState) -> RigidBodyState {
        let dp = Vector3::from(self.position.map(|p| p.value()));
        let dr = Vector3::from(self.attitude.map(|p| p.value()));
        RigidBodyState {
            position: truth.position + dp,
            attitude: UnitQuaternion::from_scaled_axis(dr) * truth.attitude,
            ..*truth
        }
    }
}

/// Horizontal force disturbance in the world frame.
#[derive(Debug, Clone)]
pub struct WindModel {
    x: GaussMarkov,
    y: GaussMarkov,
    mean: Vector3<f64>,
    rng: ChaCha8Rng,
}

impl WindModel {
    pub fn new(sigma: f64, correlation_time: f64, mean: Vector3<f64>, dt: f64, mut rng: ChaCha8Rng) -> Self {
        let x = GaussMarkov::new(sigma, correlation_time, dt, &mut rng);
        let y = GaussMarkov::new(sigma, correlation_time, dt, &mut rng);
        Self { x, y, mean, rng }
    }

    pub fn force(&self) -> Vector3<f64> {
        self.mean + Vector3::new(self.x.value(), self.y.value(), 0.0)
    }

    pub fn step(&mut self) -> Vector3<f64> {
        self.x.step(&mut self.rng);
        self.y.step(&mut self.rng);
        self.force()
    }
}
