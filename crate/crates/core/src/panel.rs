//! Geometric half of panel detection: plane fitting on a depth point cloud,
//! corner extraction from the plane inliers, and the hand-off to world-frame
//! surface queries.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec::Vec;

use nalgebra::{Matrix3, SymmetricEigen, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dynamics::RigidBodyState;
use crate::hull;
use crate::surface::{SurfaceError, SurfaceModel};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum PanelError {
    #[error("point cloud has no three non-collinear valid points")]
    DegenerateCloud,
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("largest connected component holds {largest} of {total} inliers")]
    FragmentedCloud { largest: usize, total: usize },
    #[error("corners do not form a convex quadrilateral")]
    NonConvex,
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
}

/// Points in the drone frame, with optional per-point validity flags (e.g.
/// missing depth).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub valid: Option<Vec<bool>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Self {
        Self { points, valid: None }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn is_valid(&self, i: usize) -> bool {
        let flagged = self.valid.as_ref().is_none_or(|v| v.get(i).copied().unwrap_or(false));
        flagged && self.points[i].iter().all(|c| c.is_finite())
    }

    fn valid_indices(&self) -> Vec<usize> {
        (0..self.points.len()).filter(|&i| self.is_valid(i)).collect()
    }

    /// Points selected by `mask`.
    pub fn select(&self, mask: &[bool]) -> PointCloud {
        PointCloud::new(
            self.points
                .iter()
                .zip(mask)
                .filter(|(_, keep)| **keep)
                .map(|(p, _)| *p)
                .collect(),
        )
    }
}

/// Plane `normal · x = offset` with the inlier threshold it was fitted with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneModel {
    pub normal: Vector3<f64>,
    pub offset: f64,
    pub epsilon: f64,
}

impl PlaneModel {
    pub fn distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(p) - self.offset
    }

    /// Orthonormal in-plane basis `(e1, e2)` with `e1 × e2 = normal`. `e1`
    /// follows the frame's x axis when the plane allows it.
    pub fn basis(&self) -> (Vector3<f64>, Vector3<f64>) {
        let n = self.normal;
        let mut e1 = Vector3::x() - n * n.x;
        if e1.norm() < 1e-6 {
            e1 = Vector3::y() - n * n.y;
        }
        let e1 = e1.normalize();
        (e1, n.cross(&e1))
    }
}

/// Four panel corners, counter-clockwise about the panel normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelCorners(pub [Vector3<f64>; 4]);

/// How the four "extreme points" of the inlier region are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CornerMethod {
    /// Vertices of the minimum-area enclosing rectangle, each snapped to the
    /// nearest inlier.
    #[default]
    MinAreaRect,
    /// Extreme inliers along the ±e1 and ±e2 in-plane axes.
    AxisExtremes,
}

/// Plane through three points, oriented with non-negative z.
fn plane_through(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> Option<(Vector3<f64>, f64)> {
    let n = (b - a).cross(&(c - a));
    let scale = (b - a).norm() * (c - a).norm();
    let norm = n.norm();
    if !(norm > 1e-12 * scale.max(1e-300)) {
        return None;
    }
    let n = orient_up(n / norm);
    Some((n, n.dot(a)))
}

fn orient_up(n: Vector3<f64>) -> Vector3<f64> {
    let flip = if n.z != 0.0 {
        n.z < 0.0
    } else if n.y != 0.0 {
        n.y < 0.0
    } else {
        n.x < 0.0
    };
    if flip { -n } else { n }
}

/// Least-squares plane (smallest principal axis) through `points`.
fn fit_plane_lsq<'a>(points: impl Iterator<Item = &'a Vector3<f64>> + Clone) -> Option<(Vector3<f64>, f64)> {
    let (sum, count) = points
        .clone()
        .fold((Vector3::zeros(), 0usize), |(s, c), p| (s + p, c + 1));
    if count < 3 {
        return None;
    }
    let centroid = sum / count as f64;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let (idx, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let n = orient_up(eig.eigenvectors.column(idx).into_owned().normalize());
    if !n.iter().all(|v| v.is_finite()) {
        return None;
    }
    Some((n, n.dot(&centroid)))
}

fn has_non_collinear_triple(points: &[Vector3<f64>], idx: &[usize]) -> bool {
    let Some(&first) = idx.first() else {
        return false;
    };
    let p0 = points[first];
    let Some(&far) = idx
        .iter()
        .max_by(|&&a, &&b| (points[a] - p0).norm().total_cmp(&(points[b] - p0).norm()))
    else {
        return false;
    };
    let dir = points[far] - p0;
    let len = dir.norm();
    if len == 0.0 {
        return false;
    }
    let dir = dir / len;
    idx.iter().any(|&i| {
        let d = points[i] - p0;
        (d - dir * d.dot(&dir)).norm() > 1e-9 * len.max(1.0)
    })
}

/// RANSAC plane fit. Each iteration fits a plane to three random valid
/// points; the winner has the most inliers within `epsilon`, then the lowest
/// mean inlier residual, then the lowest iteration index. The winner is
/// refitted by least squares on its inliers and the returned mask marks the
/// inliers of the refitted plane.
pub fn ransac_plane_fit(
    cloud: &PointCloud,
    epsilon: f64,
    iterations: usize,
    seed: u64,
) -> Result<(PlaneModel, Vec<bool>), PanelError> {
    if !(epsilon > 0.0) {
        return Err(PanelError::InvalidParameter("epsilon must be positive"));
    }
    if iterations == 0 {
        return Err(PanelError::InvalidParameter("iterations must be positive"));
    }
    let valid = cloud.valid_indices();
    if valid.len() < 3 || !has_non_collinear_triple(&cloud.points, &valid) {
        return Err(PanelError::DegenerateCloud);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // (inlier count, residual sum, normal, offset)
    let mut best: Option<(usize, f64, Vector3<f64>, f64)> = None;
    for _ in 0..iterations {
        let i = rng.random_range(0..valid.len());
        let mut j = rng.random_range(0..valid.len() - 1);
        if j >= i {
            j += 1;
        }
        let mut k = rng.random_range(0..valid.len() - 2);
        for taken in if i < j { [i, j] } else { [j, i] } {
            if k >= taken {
                k += 1;
            }
        }
        let (a, b, c) = (&cloud.points[valid[i]], &cloud.points[valid[j]], &cloud.points[valid[k]]);
        let Some((n, d)) = plane_through(a, b, c) else {
            continue;
        };
        let (mut count, mut residual) = (0usize, 0.0);
        for &idx in &valid {
            let r = (n.dot(&cloud.points[idx]) - d).abs();
            if r <= epsilon {
                count += 1;
                residual += r;
            }
        }
        let better = match best {
            None => true,
            Some((bc, br, _, _)) => {
                count > bc || (count == bc && residual / (count as f64) < br / (bc as f64))
            }
        };
        if better {
            best = Some((count, residual, n, d));
        }
    }
    let (_, _, n, d) = best.ok_or(PanelError::DegenerateCloud)?;

    let hypothesis_inliers = valid
        .iter()
        .map(|&i| &cloud.points[i])
        .filter(|p| (n.dot(p) - d).abs() <= epsilon);
    let (normal, offset) = fit_plane_lsq(hypothesis_inliers).unwrap_or((n, d));
    let plane = PlaneModel { normal, offset, epsilon };
    let mask = (0..cloud.points.len())
        .map(|i| cloud.is_valid(i) && plane.distance(&cloud.points[i]).abs() <= epsilon)
        .collect();
    Ok((plane, mask))
}

/// Indices of the largest 8-connected component of occupied grid cells.
fn largest_component(coords: &[Vector2<f64>], cell: f64) -> Vec<usize> {
    let key = |p: &Vector2<f64>| -> (i64, i64) {
        (libm::floor(p.x / cell) as i64, libm::floor(p.y / cell) as i64)
    };
    let mut cells: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for (i, p) in coords.iter().enumerate() {
        cells.entry(key(p)).or_default().push(i);
    }
    let mut labels: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    let mut sizes: Vec<usize> = Vec::new();
    for &start in cells.keys() {
        if labels.contains_key(&start) {
            continue;
        }
        let label = sizes.len();
        let mut size = 0;
        let mut queue = VecDeque::from([start]);
        labels.insert(start, label);
        while let Some(c) = queue.pop_front() {
            size += cells[&c].len();
            for dx in -1..=1 {
                for dy in -1..=1 {
                    let nb = (c.0 + dx, c.1 + dy);
                    if cells.contains_key(&nb) && !labels.contains_key(&nb) {
                        labels.insert(nb, label);
                        queue.push_back(nb);
                    }
                }
            }
        }
        sizes.push(size);
    }
    // Ties go to the first label in key order.
    let best = sizes
        .iter()
        .enumerate()
        .fold(0, |best, (l, s)| if *s > sizes[best] { l } else { best });
    let mut members: Vec<usize> = cells
        .iter()
        .filter(|(c, _)| labels[*c] == best)
        .flat_map(|(_, idx)| idx.iter().copied())
        .collect();
    members.sort_unstable();
    members
}

/// Minimum-area enclosing rectangle of a convex hull (rotating calipers over
/// the hull edges). Returns the four vertices counter-clockwise.
fn min_area_rectangle(hull: &[Vector2<f64>]) -> [Vector2<f64>; 4] {
    let n = hull.len();
    let mut best_area = f64::INFINITY;
    let mut best = [Vector2::zeros(); 4];
    for i in 0..n {
        let edge = hull[(i + 1) % n] - hull[i];
        let len = edge.norm();
        if len == 0.0 {
            continue;
        }
        let u = edge / len;
        let v = Vector2::new(-u.y, u.x);
        let (mut umin, mut umax, mut vmin, mut vmax) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in hull {
            let (a, b) = (p.dot(&u), p.dot(&v));
            umin = umin.min(a);
            umax = umax.max(a);
            vmin = vmin.min(b);
            vmax = vmax.max(b);
        }
        let area = (umax - umin) * (vmax - vmin);
        if area < best_area {
            best_area = area;
            best = [
                u * umin + v * vmin,
                u * umax + v * vmin,
                u * umax + v * vmax,
                u * umin + v * vmax,
            ];
        }
    }
    best
}

fn nearest(coords: &[Vector2<f64>], members: &[usize], target: &Vector2<f64>) -> usize {
    let mut best = members[0];
    let mut best_d = f64::INFINITY;
    for &m in members {
        let d = (coords[m] - target).norm_squared();
        if d < best_d {
            best_d = d;
            best = m;
        }
    }
    best
}

fn extreme(coords: &[Vector2<f64>], members: &[usize], dir: Vector2<f64>, tie: Vector2<f64>) -> usize {
    let mut best = members[0];
    for &m in members {
        let (a, b) = (coords[m].dot(&dir), coords[best].dot(&dir));
        if a > b || (a == b && coords[m].dot(&tie) > coords[best].dot(&tie)) {
            best = m;
        }
    }
    best
}

/// Extracts four panel corners from plane inliers (drone frame).
///
/// Inliers are projected into plane coordinates and bucketed on a grid of
/// cell size `2ε`; only the largest 8-connected component is kept.
pub fn extract_corners(inliers: &PointCloud, plane: &PlaneModel, method: CornerMethod) -> Result<PanelCorners, PanelError> {
    let points: Vec<Vector3<f64>> = inliers
        .valid_indices()
        .into_iter()
        .map(|i| inliers.points[i])
        .collect();
    if points.len() < 4 {
        return Err(PanelError::TooFewPoints { needed: 4, got: points.len() });
    }
    if !(plane.epsilon > 0.0) {
        return Err(PanelError::InvalidParameter("plane epsilon must be positive"));
    }
    let (e1, e2) = plane.basis();
    let coords: Vec<Vector2<f64>> = points.iter().map(|p| Vector2::new(p.dot(&e1), p.dot(&e2))).collect();

    let members = largest_component(&coords, 2.0 * plane.epsilon);
    if 2 * members.len() < points.len() {
        return Err(PanelError::FragmentedCloud { largest: members.len(), total: points.len() });
    }

    let chosen: [usize; 4] = match method {
        CornerMethod::MinAreaRect => {
            let member_coords: Vec<Vector2<f64>> = members.iter().map(|&m| coords[m]).collect();
            let hull_pts = hull::convex_hull(&member_coords);
            if hull_pts.len() < 3 {
                return Err(PanelError::DegenerateCloud);
            }
            min_area_rectangle(&hull_pts).map(|c| nearest(&coords, &members, &c))
        }
        CornerMethod::AxisExtremes => {
            let (x, y) = (Vector2::x(), Vector2::y());
            [
                extreme(&coords, &members, -x, -y),
                extreme(&coords, &members, -y, x),
                extreme(&coords, &members, x, y),
                extreme(&coords, &members, y, -x),
            ]
        }
    };

    let mut picked: Vec<usize> = chosen.to_vec();
    picked.sort_unstable();
    picked.dedup();
    if picked.len() < 4 {
        return Err(PanelError::NonConvex);
    }
    Ok(PanelCorners(order_ccw(chosen.map(|i| points[i]), &plane.normal)))
}

/// Sorts corners counter-clockwise about `axis`, starting from the corner
/// with the smallest angle measured from the first in-plane axis.
fn order_ccw(corners: [Vector3<f64>; 4], axis: &Vector3<f64>) -> [Vector3<f64>; 4] {
    let plane = PlaneModel { normal: *axis, offset: 0.0, epsilon: 1.0 };
    let (e1, e2) = plane.basis();
    let centroid = corners.iter().sum::<Vector3<f64>>() / 4.0;
    let mut keyed: Vec<(f64, Vector3<f64>)> = corners
        .iter()
        .map(|c| {
            let d = c - centroid;
            (libm::atan2(d.dot(&e2), d.dot(&e1)), *c)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    [keyed[0].1, keyed[1].1, keyed[2].1, keyed[3].1]
}

/// Drone-frame corners to world coordinates with the given pose.
pub fn to_world(corners: &PanelCorners, pose: &RigidBodyState) -> PanelCorners {
    PanelCorners(corners.0.map(|c| pose.attitude * c + pose.position))
}

/// Surface through four world-frame corners: least-squares plane, corners
/// projected onto it, boundary counter-clockwise from above.
pub fn surface_from_corners(corners: &PanelCorners) -> Result<SurfaceModel, PanelError> {
    let (normal, offset) = fit_plane_lsq(corners.0.iter()).ok_or(PanelError::NonConvex)?;
    if normal.z <= 0.0 {
        return Err(PanelError::Surface(SurfaceError::Vertical));
    }
    let projected: Vec<Vector3<f64>> = corners.0.iter().map(|c| c - normal * (normal.dot(c) - offset)).collect();
    let ordered = order_ccw([projected[0], projected[1], projected[2], projected[3]], &Vector3::z());
    let footprint: Vec<Vector2<f64>> = ordered.iter().map(|c| c.xy()).collect();
    let scale = footprint.iter().map(|p| (p - footprint[0]).norm()).fold(0.0, f64::max);
    if !hull::is_strictly_convex_ccw(&footprint, 1e-9 * scale * scale) {
        return Err(PanelError::NonConvex);
    }
    let centroid = ordered.iter().sum::<Vector3<f64>>() / 4.0;
    Ok(SurfaceModel::new(centroid, normal, ordered.to_vec())?)
}

/// Per-rotor vertical heights above the surface plane (clamped to a small
/// positive value) and disk overlap fractions.
pub fn rotor_heights(centers: &[Vector3<f64>; 4], surface: &SurfaceModel, rotor_radius: f64) -> ([f64; 4], [f64; 4]) {
    let heights = centers.map(|c| surface.height_above(&c).max(MIN_HEIGHT));
    let overlaps = centers.map(|c| surface.disk_overlap_fraction(&c, rotor_radius));
    (heights, overlaps)
}

/// Floor for reported rotor heights, m.
pub const MIN_HEIGHT: f64 = 1e-6;

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn grid(nx: usize, ny: usize, step: f64, z: f64) -> PointCloud {
        let mut pts = Vec::new();
        for i in 0..nx {
            for j in 0..ny {
                pts.push(Vector3::new(i as f64 * step, j as f64 * step, z));
            }
        }
        PointCloud::new(pts)
    }

    #[test]
    fn exact_plane_all_inliers() {
        let cloud = grid(20, 20, 0.05, 1.0);
        let (plane, mask) = ransac_plane_fit(&cloud, 0.01, 50, 1).unwrap();
        assert!((plane.normal - Vector3::z()).norm() < 1e-12);
        assert!((plane.offset - 1.0).abs() < 1e-12);
        assert!(mask.iter().all(|m| *m));
    }

    #[test]
    fn collinear_cloud_is_degenerate() {
        let cloud = PointCloud::new((0..10).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect());
        assert_eq!(ransac_plane_fit(&cloud, 0.01, 10, 0).unwrap_err(), PanelError::DegenerateCloud);
        let tiny = PointCloud::new(vec![Vector3::zeros(), Vector3::x()]);
        assert_eq!(ransac_plane_fit(&tiny, 0.01, 10, 0).unwrap_err(), PanelError::DegenerateCloud);
    }

    #[test]
    fn invalid_points_are_ignored() {
        let mut cloud = grid(10, 10, 0.1, 0.5);
        cloud.points.push(Vector3::new(f64::NAN, 0.0, 0.0));
        cloud.points.push(Vector3::new(0.3, 0.3, 9.0));
        let mut flags = vec![true; cloud.len()];
        *flags.last_mut().unwrap() = false;
        cloud.valid = Some(flags);
        let (_, mask) = ransac_plane_fit(&cloud, 0.01, 20, 3).unwrap();
        assert_eq!(mask.iter().filter(|m| **m).count(), 100);
        assert!(!mask[100] && !mask[101]);
    }

    #[test]
    fn four_rectangle_points_are_their_own_corners() {
        let pts = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(0.01, 0.0, 0.0),
            Vector3::new(0.01, 0.02, 0.0),
            Vector3::new(0.0, 0.02, 0.0),
        ];
        let plane = PlaneModel { normal: Vector3::z(), offset: 0.0, epsilon: 0.01 };
        for method in [CornerMethod::MinAreaRect, CornerMethod::AxisExtremes] {
            let corners = extract_corners(&PointCloud::new(pts.clone()), &plane, method).unwrap();
            for p in &pts {
                assert!(corners.0.contains(p), "{method:?}");
            }
        }
    }

    #[test]
    fn too_few_and_fragmented() {
        let plane = PlaneModel { normal: Vector3::z(), offset: 0.0, epsilon: 0.01 };
        let three = PointCloud::new(vec![Vector3::zeros(), Vector3::x(), Vector3::y()]);
        assert!(matches!(
            extract_corners(&three, &plane, CornerMethod::MinAreaRect),
            Err(PanelError::TooFewPoints { .. })
        ));
        // Three equal blobs far apart: no component reaches half.
        let mut pts = Vec::new();
        for k in 0..3 {
            for i in 0..4 {
                for j in 0..4 {
                    pts.push(Vector3::new(k as f64 + i as f64 * 0.01, j as f64 * 0.01, 0.0));
                }
            }
        }
        assert!(matches!(
            extract_corners(&PointCloud::new(pts), &plane, CornerMethod::MinAreaRect),
            Err(PanelError::FragmentedCloud { largest: 16, total: 48 })
        ));
    }

    #[test]
    fn surface_from_flat_and_collinear_corners() {
        let c = PanelCorners([
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(1.0, 0.0, 1.0),
            Vector3::new(1.0, 2.0, 1.0),
            Vector3::new(0.0, 2.0, 1.0),
        ]);
        let s = surface_from_corners(&c).unwrap();
        assert!((s.normal() - Vector3::z()).norm() < 1e-12);
        let line = PanelCorners([
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(2.0, 0.0, 0.0),
            Vector3::new(3.0, 0.0, 0.0),
        ]);
        assert!(surface_from_corners(&line).is_err());
    }

    #[test]
    fn rotor_height_queries() {
        let s = SurfaceModel::rectangle(Vector3::zeros(), 1.1, 2.3, 0.0, 0.0).unwrap();
        let centers = [
            Vector3::new(0.0, 0.0, 0.27),
            Vector3::new(0.55 + 0.2, 0.0, 0.27),
            Vector3::new(0.0, 0.0, -0.1),
            Vector3::new(0.55, 0.0, 0.27),
        ];
        let (h, a) = rotor_heights(&centers, &s, 0.1);
        assert!((h[0] - 0.27).abs() < 1e-12);
        assert_eq!(a[0], 1.0);
        assert_eq!(a[1], 0.0);
        assert_eq!(h[2], MIN_HEIGHT);
        assert!((a[3] - 0.5).abs() < 1e-9);
    }
}
