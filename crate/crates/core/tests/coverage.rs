use nalgebra::{Rotation3, Vector2, Vector3};
use proptest::prelude::*;
use pvcoat_core::coverage::{generate_plan, CoverageParams, SegmentKind};
use pvcoat_core::panel::{surface_from_corners, PanelCorners};

fn tilted_panel(w: f64, l: f64, tilt: f64, yaw: f64) -> PanelCorners {
    let rot = Rotation3::from_euler_angles(0.0, 0.0, yaw) * Rotation3::from_axis_angle(&Vector3::x_axis(), tilt);
    PanelCorners(
        [(0.0, 0.0), (w, 0.0), (w, l), (0.0, l)].map(|(u, v)| rot * Vector3::new(u, v, 0.0) + Vector3::new(2.0, 1.0, 0.4)),
    )
}

fn point_segment_distance(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let d = b - a;
    let t = ((p - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
    (a + d * t - p).norm()
}

/// Worst distance from a dense grid of panel points to the nearest sweep,
/// with sweeps dropped back onto the panel plane.
fn worst_gap(corners: &PanelCorners, params: &CoverageParams) -> f64 {
    let plan = generate_plan(corners, params).unwrap();
    let lift = Vector3::new(0.0, 0.0, params.standoff);
    let sweeps: Vec<(Vector3<f64>, Vector3<f64>)> = plan.sweeps().map(|s| (s.start - lift, s.end - lift)).collect();
    let [c0, c1, _, c3] = corners.0;
    let (e1, e2) = (c1 - c0, c3 - c0);
    let mut worst = 0.0_f64;
    for i in 0..=110 {
        for j in 0..=230 {
            let p = c0 + e1 * (i as f64 / 110.0) + e2 * (j as f64 / 230.0);
            let d = sweeps
                .iter()
                .map(|(a, b)| point_segment_distance(&p, a, b))
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
    }
    worst
}

#[test]
fn every_point_is_within_half_a_spacing() {
    let params = CoverageParams::default();
    for tilt in [0.0, 12.4_f64.to_radians()] {
        let gap = worst_gap(&tilted_panel(1.1, 2.3, tilt, 0.0), &params);
        assert!(gap <= 0.035 + 1e-9, "tilt {tilt}: {gap}");
    }
}

#[test]
fn sweeps_climb_a_tilted_panel() {
    let plan = generate_plan(&tilted_panel(1.1, 2.3, 12.4_f64.to_radians(), 0.0), &CoverageParams::default()).unwrap();
    let sweeps: Vec<_> = plan.sweeps().collect();
    assert_eq!(sweeps.len(), 33);
    for pair in sweeps.windows(2) {
        assert!(pair[1].start.y > pair[0].start.y);
        assert!(pair[1].start.z > pair[0].start.z);
    }
    for s in &sweeps {
        // Sweeps run along the short side, level in z.
        assert!((s.start.z - s.end.z).abs() < 1e-12);
        assert!(((s.end - s.start).norm() - 1.1).abs() < 1e-9);
    }
}

#[test]
fn valve_only_opens_over_the_panel() {
    let corners = tilted_panel(1.1, 2.3, 12.4_f64.to_radians(), 0.0);
    let surface = surface_from_corners(&corners).unwrap();
    let plan = generate_plan(&corners, &CoverageParams::default()).unwrap();
    let mut open = 0;
    for s in &plan.samples {
        if plan.valve_open_at(s.time) {
            open += 1;
            assert!(surface.contains_xy(&Vector2::new(s.position.x, s.position.y), 1e-9));
        }
    }
    assert!(open > 0);
}

#[test]
fn setpoints_hold_the_standoff() {
    let corners = tilted_panel(1.1, 2.3, 12.4_f64.to_radians(), 0.0);
    let surface = surface_from_corners(&corners).unwrap();
    let plan = generate_plan(&corners, &CoverageParams::default()).unwrap();
    for s in &plan.samples {
        assert!((surface.height_above(&s.position) - 0.27).abs() < 1e-9);
    }
}

#[test]
fn turns_start_and_stop_at_rest() {
    let plan = generate_plan(&tilted_panel(1.1, 2.3, 0.2, 0.0), &CoverageParams::default()).unwrap();
    for seg in plan.segments().iter().filter(|s| s.kind == SegmentKind::Turn) {
        assert!(seg.sample(seg.t_start).velocity.norm() < 1e-12);
        assert!(seg.sample(seg.t_end).velocity.norm() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn coverage_gap_bound_holds_for_any_pose(
        tilt in 0.0f64..0.4,
        yaw in -1.5f64..1.5,
        spacing in 0.05f64..0.2,
    ) {
        let params = CoverageParams { sweep_spacing: spacing, ..CoverageParams::default() };
        let corners = tilted_panel(1.1, 2.3, tilt, yaw);
        let gap = worst_gap(&corners, &params);
        prop_assert!(gap <= spacing / 2.0 + 1e-9, "{} > {}", gap, spacing / 2.0);
        let plan = generate_plan(&corners, &params).unwrap();
        let ys: Vec<f64> = plan.sweeps().map(|s| (s.start + s.end).y / 2.0).collect();
        prop_assert!(ys.windows(2).all(|w| w[1] > w[0]));
    }
}
