//! In-ground-effect thrust model.
//!
//! A rotor of radius `r` at height `h` above a surface needs only
//! `T_in = T_out · (1 - ρ (r / 4h)²)` of commanded thrust to produce `T_out`.
//! The plant uses the model to amplify rotor forces near the surface; the
//! controller uses the same expression, with the height clipped at the
//! desired standoff, to scale its setpoints back down.

use nalgebra::Vector3;
use thiserror::Error;

use crate::surface::SurfaceModel;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GroundEffectError {
    #[error("invalid ground-effect model: {0}")]
    InvalidModel(&'static str),
    #[error("compensation ratio {ratio} at h_des = {h_des} m is not positive")]
    NonPositiveRatio { ratio: f64, h_des: f64 },
    #[error("overlap fraction {0} is outside [0, 1]")]
    InvalidOverlap(f64),
    #[error("invalid hover sample {index}: {reason}")]
    InvalidSample { index: usize, reason: &'static str },
    #[error("need at least two hover samples at distinct heights")]
    InsufficientSamples,
    #[error("hover samples carry no ground-effect information")]
    Degenerate,
}

/// Ground-effect coefficient plus the rotor and validity parameters it is
/// applied with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundEffectModel {
    /// Dimensionless coefficient fitted from hover data.
    pub rho: f64,
    /// Propeller radius, m.
    pub rotor_radius: f64,
    /// Plant-side height floor, m. Heights below it are clamped so the model
    /// stays away from its singularity.
    pub h_floor: f64,
}

impl Default for GroundEffectModel {
    fn default() -> Self {
        Self {
            rho: 5.71,
            rotor_radius: 0.10,
            h_floor: 0.08,
        }
    }
}

impl GroundEffectModel {
    pub fn new(rho: f64, rotor_radius: f64, h_floor: f64) -> Result<Self, GroundEffectError> {
        let model = Self {
            rho,
            rotor_radius,
            h_floor,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), GroundEffectError> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(GroundEffectError::InvalidModel("rho must be positive"));
        }
        if !(self.rotor_radius > 0.0) {
            return Err(GroundEffectError::InvalidModel("rotor radius must be positive"));
        }
        if !(self.h_floor > 0.0) {
            return Err(GroundEffectError::InvalidModel("h_floor must be positive"));
        }
        if !(self.thrust_ratio(self.h_floor) > 0.0) {
            return Err(GroundEffectError::InvalidModel(
                "thrust ratio at h_floor must be positive",
            ));
        }
        Ok(())
    }

    /// `(r / 4h)²`
    fn proximity(&self, h: f64) -> f64 {
        let x = self.rotor_radius / (4.0 * h);
        x * x
    }

    /// Commanded-over-actual thrust ratio at height `h`. Not guarded: the
    /// result drops to zero and below close to the surface.
    pub fn thrust_ratio(&self, h: f64) -> f64 {
        1.0 - self.rho * self.proximity(h)
    }

    /// Factor by which a rotor with overlap `alpha` at height `h` outperforms
    /// its command in the plant.
    pub fn plant_amplification(&self, alpha: f64, h: f64) -> f64 {
        1.0 / (1.0 - alpha * self.rho * self.proximity(h.max(self.h_floor)))
    }

    /// Scale applied to a rotor force setpoint: the model ratio weighted by
    /// the overlap, with the height clipped at `h_des` so a rotor below its
    /// desired height is never compensated more than at `h_des`.
    pub fn compensated_force_ratio(&self, alpha: f64, h: f64, h_des: f64) -> Result<f64, GroundEffectError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(GroundEffectError::InvalidOverlap(alpha));
        }
        if !(h_des > 0.0) {
            return Err(GroundEffectError::InvalidModel("h_des must be positive"));
        }
        let at_des = 1.0 - alpha * self.rho * self.proximity(h_des);
        if at_des <= 0.0 {
            return Err(GroundEffectError::NonPositiveRatio { ratio: at_des, h_des });
        }
        Ok(1.0 - alpha * self.rho * self.proximity(h.max(h_des)))
    }

    /// Actual rotor forces produced in the plant for commanded forces
    /// `commanded`.
    pub fn apply_plant(&self, commanded: &[f64; 4], heights: &[f64; 4], overlaps: &[f64; 4]) -> [f64; 4] {
        core::array::from_fn(|i| commanded[i] * self.plant_amplification(overlaps[i], heights[i]))
    }
}

/// Overlap fraction of the disk of radius `r` under `rotor_center` with the
/// surface, or zero without a surface.
pub fn overlap_fraction(rotor_center: &Vector3<f64>, r: f64, surface: Option<&SurfaceModel>) -> f64 {
    surface.map_or(0.0, |s| s.disk_overlap_fraction(rotor_center, r))
}

/// One steady hover: height above the ground, commanded collective thrust and
/// vehicle mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoverSample {
    pub height: f64,
    pub thrust_in: f64,
    pub mass: f64,
}

/// Least-squares estimate of `rho` from hover samples, using that the actual
/// thrust equals `m g` in steady hover. Closed form
/// `rho = Σ x y / Σ x²` with `x = (r / 4h)²` and `y = 1 - T_in / (m g)`.
pub fn fit_rho(samples: &[HoverSample], rotor_radius: f64, gravity: f64) -> Result<f64, GroundEffectError> {
    if !(rotor_radius > 0.0) || !(gravity > 0.0) {
        return Err(GroundEffectError::InvalidModel(
            "rotor radius and gravity must be positive",
        ));
    }
    for (index, s) in samples.iter().enumerate() {
        let reason = if !(s.height > 0.0) {
            "height must be positive"
        } else if !(s.thrust_in > 0.0) {
            "thrust must be positive"
        } else if !(s.mass > 0.0) {
            "mass must be positive"
        } else {
            continue;
        };
        return Err(GroundEffectError::InvalidSample { index, reason });
    }
    let distinct = samples
        .iter()
        .any(|s| samples.first().is_some_and(|f| f.height != s.height));
    if samples.len() < 2 || !distinct {
        return Err(GroundEffectError::InsufficientSamples);
    }

    let (mut sxy, mut sxx) = (0.0, 0.0);
    for s in samples {
        let q = rotor_radius / (4.0 * s.height);
        let x = q * q;
        let y = 1.0 - s.thrust_in / (s.mass * gravity);
        sxy += x * y;
        sxx += x * x;
    }
    if sxx == 0.0 || !sxx.is_finite() {
        return Err(GroundEffectError::Degenerate);
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn thrust_ratio_values() {
        let m = GroundEffectModel::default();
        assert!((m.thrust_ratio(0.25) - 0.9429).abs() < 1e-12);
        assert!((m.thrust_ratio(0.27) - 0.951046).abs() < 1e-6);
        assert!((m.thrust_ratio(1e9) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn compensation_clips_below_h_des() {
        let m = GroundEffectModel::default();
        assert_eq!(m.compensated_force_ratio(0.0, 0.1, 0.27).unwrap(), 1.0);
        let clipped = m.compensated_force_ratio(1.0, 0.10, 0.27).unwrap();
        assert_eq!(clipped, m.thrust_ratio(0.27));
        assert!((clipped - 0.951046).abs() < 1e-6);
        // (0.1 / 4)² · 5.71 = 0.00356875
        let far = m.compensated_force_ratio(1.0, 1.0, 0.27).unwrap();
        assert!((far - 0.99643125).abs() < 1e-12);
    }

    #[test]
    fn compensation_errors() {
        let m = GroundEffectModel::default();
        assert!(matches!(
            m.compensated_force_ratio(1.0, 0.1, 0.05),
            Err(GroundEffectError::NonPositiveRatio { .. })
        ));
        assert!(matches!(
            m.compensated_force_ratio(1.5, 0.1, 0.27),
            Err(GroundEffectError::InvalidOverlap(_))
        ));
        assert!(m.compensated_force_ratio(0.5, 0.1, 0.0).is_err());
    }

    #[test]
    fn plant_amplification_at_floor() {
        let m = GroundEffectModel::default();
        // 1 / (1 - 5.71 · (0.1 / 0.32)²) = 1 / 0.4423828125
        let amp = m.plant_amplification(1.0, 0.08);
        assert!((amp - 1.0 / 0.4423828125).abs() < 1e-12);
        assert!((amp - 2.26049).abs() < 1e-5);
        assert_eq!(m.plant_amplification(1.0, 0.01), amp);
        assert_eq!(m.apply_plant(&[1.0, 2.0, 3.0, 4.0], &[0.1; 4], &[0.0; 4]), [1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn model_validation() {
        assert!(GroundEffectModel::new(5.71, 0.1, 0.05).is_err());
        assert!(GroundEffectModel::new(-1.0, 0.1, 0.08).is_err());
        assert!(GroundEffectModel::new(5.71, 0.1, 0.0).is_err());
        assert!(GroundEffectModel::new(5.71, 0.1, 0.08).is_ok());
    }

    #[test]
    fn fit_rho_edge_cases() {
        let flat: Vec<HoverSample> = [0.2, 0.4, 0.8]
            .iter()
            .map(|&h| HoverSample { height: h, thrust_in: 1.5 * 9.81, mass: 1.5 })
            .collect();
        assert_eq!(fit_rho(&flat, 0.1, 9.81).unwrap(), 0.0);
        assert_eq!(fit_rho(&flat[..1], 0.1, 9.81), Err(GroundEffectError::InsufficientSamples));
        let same = [flat[0], flat[0]];
        assert_eq!(fit_rho(&same, 0.1, 9.81), Err(GroundEffectError::InsufficientSamples));
        let bad = [flat[0], HoverSample { height: -1.0, ..flat[1] }];
        assert!(matches!(fit_rho(&bad, 0.1, 9.81), Err(GroundEffectError::InvalidSample { index: 1, .. })));
    }

    #[test]
    fn no_surface_no_overlap() {
        assert_eq!(overlap_fraction(&Vector3::zeros(), 0.1, None), 0.0);
    }
}
