use mecaloc::ekf::{control_jacobian, predict, process_jacobian, process_model, update_position};
use mecaloc::ips::trilaterate;
use mecaloc::kinematics::{forward_kinematics, inverse_kinematics};
use mecaloc::odometry::{integrate_pose, normalize_angle};
use mecaloc::*;
use nalgebra::Matrix3;
use proptest::prelude::*;
use std::f64::consts::PI;

fn wheels() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(-30.0..30.0f64)
}

fn twist() -> impl Strategy<Value = BodyTwist> {
    (-1.5..1.5f64, -1.5..1.5f64, -4.0..4.0f64).prop_map(|(vx, vy, w)| BodyTwist::new(vx, vy, w))
}

fn pose() -> impl Strategy<Value = Pose2D> {
    (-10.0..10.0f64, -10.0..10.0f64, -PI..PI).prop_map(|(x, y, t)| Pose2D::new(x, y, t))
}

fn geometry() -> impl Strategy<Value = MecanumGeometry> {
    (0.01..0.2f64, 0.05..0.5f64, 0.05..0.5f64)
        .prop_map(|(r, a, b)| MecanumGeometry::new(r, a, b).unwrap())
}

fn state(p: &Pose2D) -> [f64; 3] {
    [p.x, p.y, p.theta]
}

proptest! {
    #[test]
    fn forward_kinematics_is_linear(a in wheels(), b in wheels(), k in -5.0..5.0f64, g in geometry()) {
        let combo = WheelSpeeds(std::array::from_fn(|i| a[i] + k * b[i]));
        let lhs = forward_kinematics(&combo, &g).unwrap();
        let (ta, tb) = (forward_kinematics(&WheelSpeeds(a), &g).unwrap(), forward_kinematics(&WheelSpeeds(b), &g).unwrap());
        prop_assert!((lhs.vx - (ta.vx + k * tb.vx)).abs() < 1e-12);
        prop_assert!((lhs.vy - (ta.vy + k * tb.vy)).abs() < 1e-12);
        prop_assert!((lhs.omega - (ta.omega + k * tb.omega)).abs() < 1e-12);
    }

    #[test]
    fn inverse_then_forward_is_identity(t in twist(), g in geometry()) {
        let back = forward_kinematics(&inverse_kinematics(&t, &g).unwrap(), &g).unwrap();
        prop_assert!((back.vx - t.vx).abs() < 1e-9);
        prop_assert!((back.vy - t.vy).abs() < 1e-9);
        prop_assert!((back.omega - t.omega).abs() < 1e-9);
    }

    #[test]
    fn jacobians_match_central_differences(p in pose(), u in twist(), dt in 0.001..0.1f64) {
        prop_assume!(p.theta.abs() < PI - 0.5);
        let h = 1e-6;
        let f = process_jacobian(&p, &u, dt).unwrap();
        let b = control_jacobian(&p, dt).unwrap();
        for j in 0..3 {
            let (mut sp, mut sm) = (state(&p), state(&p));
            sp[j] += h;
            sm[j] -= h;
            let fp = state(&process_model(&Pose2D { x: sp[0], y: sp[1], theta: sp[2] }, &u, dt).unwrap());
            let fm = state(&process_model(&Pose2D { x: sm[0], y: sm[1], theta: sm[2] }, &u, dt).unwrap());
            let (mut up, mut um) = ([u.vx, u.vy, u.omega], [u.vx, u.vy, u.omega]);
            up[j] += h;
            um[j] -= h;
            let gp = state(&process_model(&p, &BodyTwist::new(up[0], up[1], up[2]), dt).unwrap());
            let gm = state(&process_model(&p, &BodyTwist::new(um[0], um[1], um[2]), dt).unwrap());
            for i in 0..3 {
                prop_assert!((f[(i, j)] - (fp[i] - fm[i]) / (2.0 * h)).abs() < 1e-6);
                prop_assert!((b[(i, j)] - (gp[i] - gm[i]) / (2.0 * h)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn process_model_is_dead_reckoning(p in pose(), u in twist(), dt in 0.0..0.5f64) {
        prop_assert_eq!(process_model(&p, &u, dt).unwrap(), integrate_pose(&p, &u, dt).unwrap());
    }

    #[test]
    fn heading_stays_wrapped(p in pose(), u in twist(), dt in 0.0..10.0f64) {
        let q = integrate_pose(&p, &u, dt).unwrap();
        prop_assert!(q.theta > -PI && q.theta <= PI);
    }

    #[test]
    fn normalize_angle_is_periodic(a in -100.0..100.0f64) {
        let n = normalize_angle(a);
        prop_assert!(n > -PI && n <= PI);
        prop_assert!((n - a).rem_euclid(2.0 * PI).min((a - n).rem_euclid(2.0 * PI)) < 1e-9);
    }

    #[test]
    fn pure_translation_is_reversible(p in pose(), vx in -1.0..1.0f64, vy in -1.0..1.0f64, dt in 0.0..1.0f64) {
        let fwd = integrate_pose(&p, &BodyTwist::new(vx, vy, 0.0), dt).unwrap();
        let back = integrate_pose(&fwd, &BodyTwist::new(-vx, -vy, 0.0), dt).unwrap();
        prop_assert!(back.distance_to(&p) < 1e-9);
        prop_assert_eq!(back.theta, p.theta);
    }

    #[test]
    fn predict_keeps_covariance_symmetric_and_growing(p in pose(), u in twist(), dt in 0.001..0.1f64, v in prop::array::uniform3(1e-4..1.0f64)) {
        let s = FilterState::with_variances(p, v).unwrap();
        let q = ProcessNoise::new(0.05, 0.05, 0.05).unwrap();
        let out = predict(&s, &u, dt, &q).unwrap();
        let c = out.covariance;
        prop_assert!((c - c.transpose()).amax() < 1e-12);
        prop_assert!(out.variances()[2] >= v[2]);
    }

    #[test]
    fn update_never_grows_position_variance(p in pose(), v in prop::array::uniform3(1e-4..10.0f64), rho in -0.9..0.9f64, z in (-10.0..10.0f64, -10.0..10.0f64), sigma in 0.01..5.0f64) {
        let mut cov = Matrix3::from_diagonal(&v.into());
        let c = rho * (v[0] * v[1]).sqrt();
        cov[(0, 1)] = c;
        cov[(1, 0)] = c;
        let s = FilterState::new(p, cov).unwrap();
        let out = update_position(&s, &PositionFix::new(z.0, z.1, 0.0), &MeasurementNoise::new(sigma).unwrap()).unwrap();
        let (before, after) = (s.variances(), out.state.variances());
        prop_assert!(after[0] <= before[0] * (1.0 + 1e-12));
        prop_assert!(after[1] <= before[1] * (1.0 + 1e-12));
        prop_assert!(out.nis >= 0.0);
    }

    #[test]
    fn noiseless_trilateration_recovers_position(x in 0.0..3.0f64, y in -3.0..0.0f64) {
        let layout = BeaconLayout::default();
        let z = ips::DEFAULT_MOBILE_HEIGHT;
        let ranges = layout.beacons().iter().map(|b| ((x - b.x).powi(2) + (y - b.y).powi(2) + (z - b.z).powi(2)).sqrt()).collect();
        let sol = trilaterate(&RangeSet { ranges, timestamp: 0.0 }, &layout, z, layout.centroid()).unwrap();
        prop_assert!((sol.fix.x - x).hypot(sol.fix.y - y) < 1e-6);
    }
}
