//! Synthetic depth clouds of a panel as seen from the vehicle.

use pvcoat_core::nalgebra::Vector3;
use pvcoat_core::{PanelCorners, PointCloud, RigidBodyState};
use rand::Rng;
use rand_distr::{Distribution, Normal};

const CLUTTER_CLEARANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudParams {
    /// Sample spacing along both panel edges, m.
    pub grid_step: f64,
    /// Standard deviation of the error along the panel normal, m.
    pub depth_noise: f64,
    /// Fraction of the returned points that are clutter.
    pub outlier_fraction: f64,
}

/// Points on the parallelogram spanned by `corners` (world frame), expressed
/// in the body frame of `pose`. Clutter is spread uniformly over a box
/// around the panel, half a metre above and below it, leaving out a 5 cm
/// slab around the panel plane: a return lying in the plane next to the
/// panel is indistinguishable from panel.
pub fn panel_cloud(corners: &PanelCorners, pose: &RigidBodyState, params: &CloudParams, rng: &mut impl Rng) -> PointCloud {
    let [c0, c1, _, c3] = corners.0;
    let (e1, e2) = (c1 - c0, c3 - c0);
    let normal = e1.cross(&e2).normalize();
    let n1 = (e1.norm() / params.grid_step).ceil().max(1.0) as usize;
    let n2 = (e2.norm() / params.grid_step).ceil().max(1.0) as usize;
    let depth = Normal::new(0.0, params.depth_noise.max(0.0)).expect("finite sigma");

    let mut world = Vec::with_capacity((n1 + 1) * (n2 + 1));
    for i in 0..=n1 {
        for j in 0..=n2 {
            let p = c0 + e1 * (i as f64 / n1 as f64) + e2 * (j as f64 / n2 as f64);
            world.push(p + normal * depth.sample(rng));
        }
    }
    let clutter = (world.len() as f64 * params.outlier_fraction / (1.0 - params.outlier_fraction)).round() as usize;
    let (lo, hi) = corners.0.iter().fold(
        (Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY)),
        |(lo, hi), c| (lo.inf(c), hi.sup(c)),
    );
    let pad = Vector3::new(0.3, 0.3, 0.5);
    let (lo, hi) = (lo - pad, hi + pad);
    let mut added = 0;
    while added < clutter {
        let p = Vector3::new(
            rng.random_range(lo.x..hi.x),
            rng.random_range(lo.y..hi.y),
            rng.random_range(lo.z..hi.z),
        );
        if (p - c0).dot(&normal).abs() > CLUTTER_CLEARANCE {
            world.push(p);
            added += 1;
        }
    }
    let inverse = pose.attitude.inverse();
    PointCloud::new(world.into_iter().map(|p| inverse * (p - pose.position)).collect())
}
