//! Small planar-geometry kernel: convex hulls, signed areas and convex
//! polygon clipping.

use alloc::vec::Vec;

use nalgebra::Vector2;

pub(crate) fn cross(o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Shoelace area, positive for counter-clockwise polygons.
pub(crate) fn signed_area(poly: &[Vector2<f64>]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let a = &poly[i];
        let b = &poly[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    0.5 * acc
}

/// Andrew's monotone chain. Returns the hull counter-clockwise without
/// collinear points.
pub(crate) fn convex_hull(points: &[Vector2<f64>]) -> Vec<Vector2<f64>> {
    let mut pts: Vec<Vector2<f64>> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vector2<f64>> = Vec::with_capacity(2 * pts.len());
    for p in pts.iter() {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    let lower = hull.len() + 1;
    for p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    hull.pop();
    hull
}

/// True when `poly` is strictly convex and counter-clockwise.
pub(crate) fn is_strictly_convex_ccw(poly: &[Vector2<f64>], tol: f64) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    (0..n).all(|i| cross(&poly[i], &poly[(i + 1) % n], &poly[(i + 2) % n]) > tol)
}

/// Sutherland-Hodgman clip of `subject` against the convex counter-clockwise
/// polygon `clip`.
pub(crate) fn clip_convex(subject: &[Vector2<f64>], clip: &[Vector2<f64>]) -> Vec<Vector2<f64>> {
    let mut output: Vec<Vector2<f64>> = subject.to_vec();
    let mut input: Vec<Vector2<f64>> = Vec::with_capacity(subject.len() + clip.len());
    let n = clip.len();
    for i in 0..n {
        if output.is_empty() {
            break;
        }
        core::mem::swap(&mut input, &mut output);
        output.clear();
        let a = clip[i];
        let b = clip[(i + 1) % n];
        let inside = |p: &Vector2<f64>| cross(&a, &b, p) >= 0.0;
        let m = input.len();
        for j in 0..m {
            let cur = input[j];
            let prev = input[(j + m - 1) % m];
            let cur_in = inside(&cur);
            let prev_in = inside(&prev);
            if cur_in {
                if !prev_in {
                    output.push(intersect(&prev, &cur, &a, &b));
                }
                output.push(cur);
            } else if prev_in {
                output.push(intersect(&prev, &cur, &a, &b));
            }
        }
    }
    output
}

fn intersect(p: &Vector2<f64>, q: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> Vector2<f64> {
    let dp = cross(a, b, p);
    let dq = cross(a, b, q);
    let t = dp / (dp - dq);
    p + (q - p) * t
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn v(x: f64, y: f64) -> Vector2<f64> {
        Vector2::new(x, y)
    }

    #[test]
    fn hull_drops_interior_and_collinear() {
        let pts = vec![v(0.0, 0.0), v(1.0, 0.0), v(2.0, 0.0), v(2.0, 2.0), v(0.0, 2.0), v(1.0, 1.0)];
        let h = convex_hull(&pts);
        assert_eq!(h.len(), 4);
        assert!((signed_area(&h) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn clip_square_by_square() {
        let a = vec![v(0.0, 0.0), v(2.0, 0.0), v(2.0, 2.0), v(0.0, 2.0)];
        let b = vec![v(1.0, 1.0), v(3.0, 1.0), v(3.0, 3.0), v(1.0, 3.0)];
        let c = clip_convex(&a, &b);
        assert!((signed_area(&c) - 1.0).abs() < 1e-12);
        let far = vec![v(5.0, 5.0), v(6.0, 5.0), v(6.0, 6.0), v(5.0, 6.0)];
        assert!(clip_convex(&a, &far).len() < 3 || signed_area(&clip_convex(&a, &far)).abs() < 1e-15);
    }

    #[test]
    fn convexity_check() {
        let sq = vec![v(0.0, 0.0), v(1.0, 0.0), v(1.0, 1.0), v(0.0, 1.0)];
        assert!(is_strictly_convex_ccw(&sq, 0.0));
        let mut cw = sq.clone();
        cw.reverse();
        assert!(!is_strictly_convex_ccw(&cw, 0.0));
        let line = vec![v(0.0, 0.0), v(1.0, 0.0), v(2.0, 0.0), v(3.0, 0.0)];
        assert!(!is_strictly_convex_ccw(&line, 0.0));
    }
}
