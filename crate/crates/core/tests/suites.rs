use headsplat::oracle::{kinematics_suite, offset_suite};

#[test]
fn closed_form_kinematics_and_sh_rotation() {
    let r = kinematics_suite(25, 3);
    assert!(r.rest_pose_error <= 1e-7, "{r:?}");
    assert!(r.quarter_turn_error <= 1e-6, "{r:?}");
    assert!(r.sh_rotation_error <= 1e-6, "{r:?}");
    assert_eq!(r.sh_trials, 100);
}

#[test]
fn offsets_cover_the_default_band() {
    let r = offset_suite(10_000, 1).unwrap();
    assert_eq!(r.draws, 10_000);
    assert!(r.min >= 0.0 && r.max <= 0.30, "{r:?}");
    assert!((r.mean - 0.15).abs() <= 0.01, "{r:?}");
}
