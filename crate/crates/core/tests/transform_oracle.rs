//! Reference-transform algebra against a plain 4x4 homogeneous-matrix
//! implementation written from the rotation formulas.

use proptest::prelude::*;
use stagelink_core::pose::{apply_delta, compose, heading_frame, wrap_angle};
use stagelink_core::{ReferenceTransform, RootPose, TransformDelta, UnitQuat, Vec3};

type M4 = [[f64; 4]; 4];

fn mul(a: &M4, b: &M4) -> M4 {
    let mut r = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            r[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    r
}

fn rot_y(a: f64) -> M4 {
    let (s, c) = a.sin_cos();
    [[c, 0.0, s, 0.0], [0.0, 1.0, 0.0, 0.0], [-s, 0.0, c, 0.0], [0.0, 0.0, 0.0, 1.0]]
}

fn rot_x(a: f64) -> M4 {
    let (s, c) = a.sin_cos();
    [[1.0, 0.0, 0.0, 0.0], [0.0, c, -s, 0.0], [0.0, s, c, 0.0], [0.0, 0.0, 0.0, 1.0]]
}

fn translate(t: [f64; 3]) -> M4 {
    [[1.0, 0.0, 0.0, t[0]], [0.0, 1.0, 0.0, t[1]], [0.0, 0.0, 1.0, t[2]], [0.0, 0.0, 0.0, 1.0]]
}

fn from_quat(q: [f64; 4]) -> M4 {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    let [w, x, y, z] = q.map(|c| c / n);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y), 0.0],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x), 0.0],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y), 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

fn angle() -> impl Strategy<Value = f64> {
    -4.0f64..4.0
}

fn coord() -> impl Strategy<Value = f64> {
    -50.0f64..50.0
}

fn quat() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(-1.0f64..1.0).prop_filter("non-degenerate", |q| q.iter().map(|c| c * c).sum::<f64>() > 0.01)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn compose_matches_matrices(
        t in prop::array::uniform3(coord()), yaw in angle(), pitch in angle(),
        p in prop::array::uniform3(coord()), q in quat(),
    ) {
        let r = ReferenceTransform::new(t.into(), yaw, pitch);
        let local = UnitQuat::new(q[0], q[1], q[2], q[3]);
        let (pos, rot) = compose(&r, &RootPose { position: p.into(), rotation: local });

        let world = mul(&mul(&translate(t), &mul(&rot_y(r.yaw()), &rot_x(r.pitch()))), &mul(&translate(p), &from_quat(q)));
        for i in 0..3 {
            prop_assert!((world[i][3] - pos.to_array()[i]).abs() <= 1e-6);
        }
        let got = from_quat(rot.to_array());
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((world[i][j] - got[i][j]).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn apply_delta_matches_matrices(
        t in prop::array::uniform3(coord()), yaw in angle(), pitch in -1.5f64..1.5,
        d in prop::array::uniform3(-2.0f64..2.0), dyaw in angle(), dpitch in -1.0f64..1.0,
    ) {
        let r = ReferenceTransform::new(t.into(), yaw, pitch);
        let delta = TransformDelta { d_forward: d[0], d_lateral: d[1], d_vertical: d[2], d_yaw: dyaw, d_pitch: dpitch };
        let out = apply_delta(&r, &delta);

        let step = mul(&rot_y(yaw), &translate([d[1], 0.0, d[0]]));
        let want = [t[0] + step[0][3], t[1] + d[2], t[2] + step[2][3]];
        for i in 0..3 {
            prop_assert!((out.translation().to_array()[i] - want[i]).abs() <= 1e-6);
        }
        prop_assert!(((yaw + dyaw).sin() - out.yaw().sin()).abs() <= 1e-9);
        prop_assert!(((yaw + dyaw).cos() - out.yaw().cos()).abs() <= 1e-9);
        prop_assert!(out.yaw() > -std::f64::consts::PI && out.yaw() <= std::f64::consts::PI);
        prop_assert_eq!(out.pitch(), (r.pitch() + dpitch).clamp(-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2));
    }

    #[test]
    fn heading_ignores_pitch(yaw in angle(), p1 in -1.5f64..1.5, p2 in -1.5f64..1.5) {
        let a = heading_frame(&ReferenceTransform::new(Vec3::ZERO, yaw, p1));
        let b = heading_frame(&ReferenceTransform::new(Vec3::ZERO, yaw, p2));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn wrap_is_idempotent(a in -100.0f64..100.0) {
        let w = wrap_angle(a);
        prop_assert_eq!(wrap_angle(w), w);
        prop_assert!((w.sin() - a.sin()).abs() < 1e-9 && (w.cos() - a.cos()).abs() < 1e-9);
    }

    #[test]
    fn yaw_pitch_roll_round_trip(y in -3.1f64..3.1, p in -1.5f64..1.5, r in -3.1f64..3.1) {
        let q = UnitQuat::from_yaw_pitch_roll(y, p, r);
        let (y2, p2, r2) = q.to_yaw_pitch_roll();
        prop_assert!(q.angle_to(UnitQuat::from_yaw_pitch_roll(y2, p2, r2)) < 1e-7);
    }

    #[test]
    fn inverse_undoes_rotation(q in quat(), v in prop::array::uniform3(coord())) {
        let q = UnitQuat::new(q[0], q[1], q[2], q[3]).quantized_f32();
        let v: Vec3 = v.into();
        prop_assert!(((q.inverse() * q).rotate(v) - v).length() < 1e-9);
    }
}

#[test]
fn known_values() {
    let r = ReferenceTransform::from_degrees(Vec3::new(1.0, 0.0, 0.0), 90.0, 0.0);
    let (p, _) = compose(&r, &RootPose { position: Vec3::new(0.0, 0.0, 1.0), rotation: UnitQuat::IDENTITY });
    assert!((p - Vec3::new(2.0, 0.0, 0.0)).length() < 1e-12);
    let out = apply_delta(&r, &TransformDelta { d_forward: 0.015, ..TransformDelta::ZERO });
    assert!((out.translation() - Vec3::new(1.015, 0.0, 0.0)).length() < 1e-12);
}
