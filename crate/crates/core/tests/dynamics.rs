use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use proptest::prelude::*;
use pvcoat_core::dynamics::{self, PlantInput, RigidBodyState, RotorSpeeds, VehicleParams, WrenchCommand};

fn run(state: RigidBodyState, input: &PlantInput, params: &VehicleParams, dt: f64, duration: f64) -> RigidBodyState {
    let steps = (duration / dt).round() as usize;
    (0..steps).fold(state, |s, _| dynamics::step(&s, input, params, dt).unwrap())
}

#[test]
fn hover_holds_position() {
    let p = VehicleParams::default();
    let m = p.mass_full();
    let input = PlantInput::free_air(RotorSpeeds::uniform(p.hover_rotor_speed(m)), m);
    let s0 = RigidBodyState::at_rest(Vector3::new(0.0, 0.0, 1.0));
    let s1 = run(s0, &input, &p, 0.001, 1.0);
    assert!((s1.position - s0.position).norm() < 1e-6);
    assert!(s1.attitude.angle() < 1e-12);
}

#[test]
fn ballistic_fall_matches_closed_form() {
    let p = VehicleParams::default();
    let input = PlantInput::free_air(RotorSpeeds::default(), p.mass_full());
    let s = run(RigidBodyState::default(), &input, &p, 0.001, 0.5);
    let expected = -0.5 * 9.81 * 0.25;
    assert!((s.position.z - expected).abs() < 1e-5, "{}", s.position.z);
}

#[test]
fn halving_dt_barely_moves_trajectory() {
    // Non-trivial motion: tilted, spinning, with differential thrust.
    let p = VehicleParams::default();
    let m = p.mass_full();
    let w = p.hover_rotor_speed(m);
    let input = PlantInput::free_air(RotorSpeeds([w * 1.01, w * 0.99, w * 1.005, w * 0.995]), m);
    let mut s0 = RigidBodyState::default();
    s0.attitude = UnitQuaternion::from_euler_angles(0.1, -0.05, 0.3);
    s0.body_rates = Vector3::new(0.5, -0.3, 0.2);
    s0.velocity = Vector3::new(0.2, 0.0, -0.1);
    let coarse = run(s0, &input, &p, 0.002, 1.0);
    let fine = run(s0, &input, &p, 0.001, 1.0);
    let finer = run(s0, &input, &p, 0.0005, 1.0);
    let e1 = (coarse.position - fine.position).norm();
    let e2 = (fine.position - finer.position).norm();
    assert!(e2 < 1e-7, "{e2}");
    // Fourth order: halving dt should shrink the difference about 16×.
    assert!(e1 / e2 > 10.0, "ratio {}", e1 / e2);
}

fn tumbling_start() -> (VehicleParams, RigidBodyState) {
    let p = VehicleParams {
        inertia: Matrix3::from_diagonal(&Vector3::new(0.0125, 0.0150, 0.0230)),
        ..VehicleParams::default()
    };
    let mut s = RigidBodyState::default();
    s.body_rates = Vector3::new(1.5, -2.0, 3.0);
    s.attitude = UnitQuaternion::from_euler_angles(0.3, 0.2, -0.4);
    (p, s)
}

#[test]
fn torque_free_tumbling_conserves_energy_and_momentum() {
    let (p, s0) = tumbling_start();
    let input = PlantInput::free_air(RotorSpeeds::default(), 1.0);
    let energy = |s: &RigidBodyState| 0.5 * s.body_rates.dot(&(p.inertia * s.body_rates));
    let momentum = |s: &RigidBodyState| s.attitude * (p.inertia * s.body_rates);
    let (e0, l0) = (energy(&s0), momentum(&s0));
    let mut s = s0;
    let mut worst_norm = 0.0_f64;
    for _ in 0..10_000 {
        s = dynamics::step(&s, &input, &p, 0.001).unwrap();
        worst_norm = worst_norm.max((s.attitude.quaternion().norm() - 1.0).abs());
    }
    assert!(((energy(&s) - e0) / e0).abs() < 1e-6);
    assert!((momentum(&s) - l0).norm() / l0.norm() < 1e-6);
    assert!((p.inertia * s.body_rates).norm() - (p.inertia * s0.body_rates).norm() < 1e-6);
    assert!(worst_norm < 1e-9);
}

#[test]
fn equal_speeds_do_not_rotate() {
    let p = VehicleParams::default();
    let input = PlantInput::free_air(RotorSpeeds::uniform(900.0), p.mass_full());
    let s = run(RigidBodyState::default(), &input, &p, 0.001, 2.0);
    assert_eq!(s.body_rates, Vector3::zeros());
    assert!(s.attitude.angle() == 0.0);
}

#[test]
fn step_is_deterministic() {
    let (p, s0) = tumbling_start();
    let input = PlantInput::free_air(RotorSpeeds([700.0, 710.0, 690.0, 705.0]), 1.5);
    let a = run(s0, &input, &p, 0.001, 0.5);
    let b = run(s0, &input, &p, 0.001, 0.5);
    assert_eq!(a, b);
}

fn realizable_wrench() -> impl Strategy<Value = [f64; 4]> {
    let p = VehicleParams::default();
    let max = p.max_rotor_speed;
    prop::array::uniform4(0.0..max)
}

proptest! {
    #[test]
    fn allocation_round_trip(speeds in realizable_wrench()) {
        let p = VehicleParams::default();
        let cmd = dynamics::rotor_speeds_to_wrench(&RotorSpeeds(speeds), &p);
        let back = dynamics::wrench_to_rotor_speeds(&cmd, &p).unwrap();
        let again = dynamics::rotor_speeds_to_wrench(&back, &p);
        let scale = cmd.thrust.max(1e-12);
        prop_assert!((again.thrust - cmd.thrust).abs() <= 1e-9 * scale);
        let torque_scale = cmd.torque.norm().max(p.lever_arm() * scale).max(1e-12);
        prop_assert!((again.torque - cmd.torque).norm() <= 1e-9 * torque_scale);
    }

    #[test]
    fn unmix_inverts_mix(forces in prop::array::uniform4(-5.0f64..5.0)) {
        let p = VehicleParams::default();
        let kappa = p.k_m / p.k_f;
        let w = dynamics::mix(&forces, &forces.map(|f| f * kappa), p.lever_arm());
        let back = dynamics::unmix(&WrenchCommand::new(w.thrust, w.torque), &p);
        for i in 0..4 {
            prop_assert!((back[i] - forces[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn attitude_stays_unit(rates in prop::array::uniform3(-10.0f64..10.0), seed in 0u64..1000) {
        let p = VehicleParams::default();
        let mut s = RigidBodyState::default();
        s.body_rates = Vector3::from(rates);
        let w = 500.0 + (seed % 7) as f64 * 50.0;
        let input = PlantInput::free_air(RotorSpeeds([w, w * 1.02, w * 0.98, w]), 1.56);
        for _ in 0..200 {
            s = dynamics::step(&s, &input, &p, 0.001).unwrap();
            prop_assert!((s.attitude.quaternion().norm() - 1.0).abs() < 1e-9);
        }
    }
}
