//! Wire codecs: random frames and poses survive encode/decode bit for bit.

use proptest::prelude::*;
use stagelink_core::bus::posebus::{decode_pose_msg, encode_pose_msg, encoded_len as pose_len, PoseMessage};
use stagelink_core::mocap::{decode_frame, encode_frame, encoded_len, MocapFrame, WireError};
use stagelink_core::{UnitQuat, Vec3};

fn unit_quat() -> impl Strategy<Value = UnitQuat> {
    prop::array::uniform4(-1.0f64..1.0)
        .prop_filter("non-degenerate", |q| q.iter().map(|c| c * c).sum::<f64>() > 0.01)
        .prop_map(|q| {
            let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
            UnitQuat::new(q[0] / n, q[1] / n, q[2] / n, q[3] / n)
        })
}

fn frame() -> impl Strategy<Value = MocapFrame> {
    (any::<u8>(), any::<u32>(), any::<u64>(), prop::array::uniform3(-100.0f64..100.0), prop::collection::vec(unit_quat(), 0..60))
        .prop_map(|(s, n, t, p, q)| MocapFrame::new(s, n, t, p.into(), q))
}

fn f32_finite() -> impl Strategy<Value = f32> {
    prop::num::f32::NORMAL | prop::num::f32::SUBNORMAL | prop::num::f32::ZERO
}

fn pose_msg() -> impl Strategy<Value = PoseMessage> {
    (
        any::<u64>(),
        any::<u16>(),
        prop::array::uniform3(f32_finite()),
        prop::array::uniform4(f32_finite()),
        prop::collection::vec(prop::array::uniform4(f32_finite()), 0..60),
    )
        .prop_map(|(tick_no, avatar_id, position, rotation, joints)| PoseMessage { tick_no, avatar_id, position, rotation, joints })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn mstream_round_trip(f in frame()) {
        let bytes = encode_frame(&f);
        prop_assert_eq!(bytes.len(), encoded_len(f.joint_rotations.len()));
        let back = decode_frame(&bytes).unwrap();
        prop_assert_eq!(&back, &f);
        prop_assert_eq!(encode_frame(&back), bytes);
    }

    #[test]
    fn mstream_truncation_detected(f in frame(), cut in 1usize..64) {
        let bytes = encode_frame(&f);
        let cut = cut.min(bytes.len());
        let short = &bytes[..bytes.len() - cut];
        let is_truncated = matches!(decode_frame(short), Err(WireError::Truncated { .. }));
        prop_assert!(is_truncated);
    }

    #[test]
    fn posebus_round_trip(m in pose_msg()) {
        let bytes = encode_pose_msg(&m);
        prop_assert_eq!(bytes.len(), pose_len(m.joints.len()));
        let back = decode_pose_msg(&bytes).unwrap();
        prop_assert!(back.bit_eq(&m));
        prop_assert_eq!(encode_pose_msg(&back), bytes);
    }
}

#[test]
fn quantized_pose_survives() {
    let pose = stagelink_core::WorldPose {
        position: Vec3::new(1.25, -3.5, 7.0),
        rotation: UnitQuat::from_yaw(0.3),
        joint_rotations: vec![UnitQuat::from_pitch(0.1); 50],
    };
    let m = PoseMessage::from_pose(9, 2, &pose).unwrap();
    let bytes = encode_pose_msg(&m);
    assert_eq!(bytes.len(), 44 + 16 * 50);
    assert!(decode_pose_msg(&bytes).unwrap().bit_eq(&m));
}
