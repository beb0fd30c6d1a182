//! Planar surfaces bounded by a convex polygon, queried from above.
//!
//! Heights are measured along world z and rotor disks are projected along
//! world -z onto the surface footprint.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{Rotation3, Vector2, Vector3};
use thiserror::Error;

use crate::hull;

/// Number of sides of the polygon standing in for a rotor disk.
pub const DISK_POLYGON_SIDES: usize = 64;

const COPLANAR_TOL: f64 = 1e-9;
const MIN_NORMAL_Z: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SurfaceError {
    #[error("surface normal is not unit length (norm {0})")]
    NonUnitNormal(f64),
    #[error("surface is vertical; heights along world z are undefined")]
    Vertical,
    #[error("boundary vertex {index} is {distance:.3e} m off the plane")]
    NotCoplanar { index: usize, distance: f64 },
    #[error("boundary is not a strictly convex polygon")]
    NonConvex,
}

/// Oriented plane with a convex boundary, e.g. a PV panel.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceModel {
    point: Vector3<f64>,
    normal: Vector3<f64>,
    boundary: Vec<Vector3<f64>>,
    footprint: Vec<Vector2<f64>>,
}

impl SurfaceModel {
    /// Builds a surface from a plane point, unit normal and boundary vertices.
    /// The normal is flipped to point up and the boundary is reordered
    /// counter-clockwise (seen from above) if needed.
    pub fn new(
        point: Vector3<f64>,
        normal: Vector3<f64>,
        boundary: Vec<Vector3<f64>>,
    ) -> Result<Self, SurfaceError> {
        let norm = normal.norm();
        if !((norm - 1.0).abs() <= 1e-9) {
            return Err(SurfaceError::NonUnitNormal(norm));
        }
        let normal = if normal.z < 0.0 { -normal } else { normal };
        if normal.z < MIN_NORMAL_Z {
            return Err(SurfaceError::Vertical);
        }
        for (index, v) in boundary.iter().enumerate() {
            let distance = normal.dot(&(v - point)).abs();
            if distance > COPLANAR_TOL {
                return Err(SurfaceError::NotCoplanar { index, distance });
            }
        }
        let mut boundary = boundary;
        let mut footprint: Vec<Vector2<f64>> = boundary.iter().map(|v| v.xy()).collect();
        if hull::signed_area(&footprint) < 0.0 {
            boundary.reverse();
            footprint.reverse();
        }
        if !hull::is_strictly_convex_ccw(&footprint, 1e-12) {
            return Err(SurfaceError::NonConvex);
        }
        Ok(Self {
            point,
            normal,
            boundary,
            footprint,
        })
    }

    /// A `size_x` × `size_y` rectangle centred on `center`, tilted by `tilt`
    /// about its local x axis (so it rises towards local +y) and then yawed by
    /// `yaw` about world z.
    pub fn rectangle(center: Vector3<f64>, size_x: f64, size_y: f64, tilt: f64, yaw: f64) -> Result<Self, SurfaceError> {
        let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), yaw)
            * Rotation3::from_axis_angle(&Vector3::x_axis(), tilt);
        let (hx, hy) = (size_x / 2.0, size_y / 2.0);
        let local = [
            Vector3::new(-hx, -hy, 0.0),
            Vector3::new(hx, -hy, 0.0),
            Vector3::new(hx, hy, 0.0),
            Vector3::new(-hx, hy, 0.0),
        ];
        let boundary = local.iter().map(|p| center + rot * p).collect();
        Self::new(center, rot * Vector3::z(), boundary)
    }

    pub fn point(&self) -> &Vector3<f64> {
        &self.point
    }

    /// Unit normal with positive z component.
    pub fn normal(&self) -> &Vector3<f64> {
        &self.normal
    }

    /// Boundary vertices, counter-clockwise seen from above.
    pub fn boundary(&self) -> &[Vector3<f64>] {
        &self.boundary
    }

    /// Boundary projected onto the world xy plane.
    pub fn footprint(&self) -> &[Vector2<f64>] {
        &self.footprint
    }

    /// Angle between the surface normal and world z, rad.
    pub fn tilt(&self) -> f64 {
        libm::acos(self.normal.z.clamp(-1.0, 1.0))
    }

    /// z of the (unbounded) plane above or below `(x, y)`.
    pub fn plane_z_at(&self, x: f64, y: f64) -> f64 {
        let n = &self.normal;
        self.point.z - (n.x * (x - self.point.x) + n.y * (y - self.point.y)) / n.z
    }

    /// Signed vertical distance from the plane to `p`; positive above.
    pub fn height_above(&self, p: &Vector3<f64>) -> f64 {
        p.z - self.plane_z_at(p.x, p.y)
    }

    /// Whether the vertical line through `p` meets the bounded surface.
    pub fn contains_xy(&self, p: &Vector2<f64>, tol: f64) -> bool {
        self.edge_distances(p).all(|d| d >= -tol)
    }

    /// Inward distance from `p` to every boundary edge line.
    fn edge_distances<'a>(&'a self, p: &'a Vector2<f64>) -> impl Iterator<Item = f64> + 'a {
        let n = self.footprint.len();
        (0..n).map(move |i| {
            let a = &self.footprint[i];
            let b = &self.footprint[(i + 1) % n];
            hull::cross(a, b, p) / (b - a).norm()
        })
    }

    /// Fraction of a disk of radius `radius` centred under `center` whose
    /// vertical projection falls on the surface. The disk is replaced by a
    /// regular polygon of equal area with [`DISK_POLYGON_SIDES`] sides.
    pub fn disk_overlap_fraction(&self, center: &Vector3<f64>, radius: f64) -> f64 {
        let c = center.xy();
        let n = DISK_POLYGON_SIDES as f64;
        let circumradius = radius * libm::sqrt(2.0 * PI / (n * libm::sin(2.0 * PI / n)));

        let mut min_distance = f64::INFINITY;
        for d in self.edge_distances(&c) {
            if d <= -circumradius {
                return 0.0;
            }
            min_distance = min_distance.min(d);
        }
        if min_distance >= circumradius {
            return 1.0;
        }

        let disk: Vec<Vector2<f64>> = (0..DISK_POLYGON_SIDES)
            .map(|k| {
                let angle = 2.0 * PI * k as f64 / n;
                c + Vector2::new(libm::cos(angle), libm::sin(angle)) * circumradius
            })
            .collect();
        let clipped = hull::clip_convex(&disk, &self.footprint);
        let ratio = hull::signed_area(&clipped) / hull::signed_area(&disk);
        ratio.clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn flat(size: f64) -> SurfaceModel {
        SurfaceModel::rectangle(Vector3::zeros(), size, size, 0.0, 0.0).unwrap()
    }

    #[test]
    fn fully_inside_and_outside() {
        let s = flat(2.0);
        assert_eq!(s.disk_overlap_fraction(&Vector3::new(0.0, 0.0, 0.3), 0.1), 1.0);
        assert_eq!(s.disk_overlap_fraction(&Vector3::new(3.0, 0.0, 0.3), 0.1), 0.0);
    }

    #[test]
    fn centred_on_edge_is_half() {
        let s = flat(100.0);
        let a = s.disk_overlap_fraction(&Vector3::new(50.0, 3.0, 0.3), 0.1);
        assert!((a - 0.5).abs() < 1e-9, "{a}");
        let skew = SurfaceModel::rectangle(Vector3::zeros(), 100.0, 100.0, 0.0, 0.3).unwrap();
        let edge_mid = (skew.boundary()[1] + skew.boundary()[2]) / 2.0;
        let a = skew.disk_overlap_fraction(&edge_mid, 0.1);
        assert!((a - 0.5).abs() < 1e-9, "{a}");
    }

    #[test]
    fn tilted_rectangle_heights() {
        let tilt = 12.4_f64.to_radians();
        let s = SurfaceModel::rectangle(Vector3::new(0.0, 0.0, 1.0), 1.1, 2.3, tilt, 0.0).unwrap();
        assert!((s.tilt() - tilt).abs() < 1e-12);
        // Rises along +y with slope tan(tilt).
        let dz = s.plane_z_at(0.0, 1.0) - s.plane_z_at(0.0, 0.0);
        assert!((dz - libm::tan(tilt)).abs() < 1e-12);
        assert!((s.height_above(&Vector3::new(0.3, 0.0, 1.27)) - 0.27).abs() < 1e-12);
    }

    #[test]
    fn clockwise_boundary_is_reordered() {
        let b = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(1.0, 1.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
        ];
        let s = SurfaceModel::new(Vector3::zeros(), Vector3::z(), b).unwrap();
        assert!(hull::signed_area(s.footprint()) > 0.0);
    }

    #[test]
    fn invalid_surfaces() {
        let sq = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(1.0, 1.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
        ];
        assert!(matches!(
            SurfaceModel::new(Vector3::zeros(), Vector3::new(0.0, 0.0, 2.0), sq.clone()),
            Err(SurfaceError::NonUnitNormal(_))
        ));
        assert_eq!(
            SurfaceModel::new(Vector3::zeros(), Vector3::x(), sq.clone()),
            Err(SurfaceError::Vertical)
        );
        let mut lifted = sq.clone();
        lifted[2].z = 1e-3;
        assert!(matches!(
            SurfaceModel::new(Vector3::zeros(), Vector3::z(), lifted),
            Err(SurfaceError::NotCoplanar { index: 2, .. })
        ));
        let bowtie = vec![sq[0], sq[2], sq[1], sq[3]];
        assert_eq!(SurfaceModel::new(Vector3::zeros(), Vector3::z(), bowtie), Err(SurfaceError::NonConvex));
    }
}
