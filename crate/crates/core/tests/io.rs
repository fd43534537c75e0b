use headsplat::io::{
    encode_srgb8, load_dataset, load_png, make_synthetic, orbit_script, render_ground_truth, Checkpoint,
    DatasetManifest, ScriptFrame, SyntheticConfig, GROUND_TRUTH_FILE,
};
use headsplat::morphable::{blockhead, BlockheadParams, PoseExpr, TemplateModel};
use headsplat::Error;

fn small() -> (TemplateModel, SyntheticConfig) {
    let tpl = blockhead(BlockheadParams {
        rings: 10,
        segments: 16,
        seed: 2,
    });
    let cfg = SyntheticConfig {
        frames: 4,
        width: 40,
        height: 32,
        focal: 60.0,
        gaussians: 600,
        ..Default::default()
    };
    (tpl, cfg)
}

fn dir_bytes(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in ["", "frames", "masks"] {
        let mut names: Vec<_> = std::fs::read_dir(dir.join(sub))
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.is_file())
            .collect();
        names.sort();
        for p in names {
            out.push((
                p.strip_prefix(dir).unwrap().display().to_string(),
                std::fs::read(&p).unwrap(),
            ));
        }
    }
    out
}

#[test]
fn synthetic_is_deterministic_per_seed() {
    let (tpl, cfg) = small();
    let script = orbit_script(&tpl, &cfg, 3);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    make_synthetic(&tpl, &script, &cfg, 3, a.path()).unwrap();
    make_synthetic(&tpl, &script, &cfg, 3, b.path()).unwrap();
    let (da, db) = (dir_bytes(a.path()), dir_bytes(b.path()));
    assert_eq!(da.len(), 3 + 4 + 4);
    assert_eq!(da, db);
}

#[test]
fn empty_script_is_rejected() {
    let (tpl, cfg) = small();
    let dir = tempfile::tempdir().unwrap();
    let err = make_synthetic(&tpl, &[], &cfg, 0, dir.path()).unwrap_err();
    assert!(matches!(err, Error::Dataset(_)), "{err}");
}

#[test]
fn ground_truth_renders_back_to_the_stored_frames() {
    let (tpl, cfg) = small();
    let script = orbit_script(&tpl, &cfg, 1);
    let dir = tempfile::tempdir().unwrap();
    make_synthetic(&tpl, &script, &cfg, 1, dir.path()).unwrap();
    let ds = load_dataset(dir.path().join("manifest.json")).unwrap();
    let gt = Checkpoint::load(dir.path().join(GROUND_TRUTH_FILE)).unwrap();
    let model = gt.apply_correctives(&ds.template).unwrap();
    let set = gt.gaussians.as_ref().unwrap();
    for (k, f) in ds.frames.iter().enumerate() {
        let frame = ScriptFrame {
            pe: f.pe.clone(),
            cam: f.cam,
        };
        let (img, mask) = render_ground_truth(&model, set, &frame, cfg.background).unwrap();
        let ours = encode_srgb8(&img);
        let stored = encode_srgb8(&f.image);
        let worst = ours
            .as_raw()
            .iter()
            .zip(stored.as_raw())
            .map(|(a, b)| (*a as i32 - *b as i32).abs())
            .max()
            .unwrap();
        assert!(worst <= 1, "frame {k}: {worst} counts");
        assert_eq!(Some(mask), f.mask);
    }
}

#[test]
fn expression_and_pose_survive_the_manifest() {
    let (tpl, cfg) = small();
    let script = orbit_script(&tpl, &cfg, 4);
    let dir = tempfile::tempdir().unwrap();
    make_synthetic(&tpl, &script, &cfg, 4, dir.path()).unwrap();
    let ds = load_dataset(dir.path().join("manifest.json")).unwrap();
    for (s, f) in script.iter().zip(&ds.frames) {
        assert_eq!(s.pe, f.pe);
        assert_eq!(s.cam, f.cam);
    }
    assert_ne!(ds.frames[0].pe, PoseExpr::zeros(&tpl));
}

#[test]
fn missing_image_names_the_frame() {
    let (tpl, cfg) = small();
    let script = orbit_script(&tpl, &cfg, 5);
    let dir = tempfile::tempdir().unwrap();
    make_synthetic(&tpl, &script, &cfg, 5, dir.path()).unwrap();
    std::fs::remove_file(dir.path().join("frames/0002.png")).unwrap();
    match load_dataset(dir.path().join("manifest.json")) {
        Err(Error::Frame { index, .. }) => assert_eq!(index, 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn single_frame_manifest_gives_one_record() {
    let (tpl, cfg) = small();
    let script = orbit_script(&tpl, &cfg, 6);
    let dir = tempfile::tempdir().unwrap();
    let mut manifest = make_synthetic(&tpl, &script, &cfg, 6, dir.path()).unwrap();
    manifest.frames.truncate(1);
    let path = dir.path().join("one.json");
    manifest.save(&path).unwrap();
    let ds = load_dataset(&path).unwrap();
    assert_eq!(ds.frames.len(), 1);
    assert_eq!(DatasetManifest::load(&path).unwrap(), manifest);
}

#[test]
fn dimension_mismatch_is_reported() {
    let (tpl, cfg) = small();
    let script = orbit_script(&tpl, &cfg, 7);
    let dir = tempfile::tempdir().unwrap();
    let mut manifest = make_synthetic(&tpl, &script, &cfg, 7, dir.path()).unwrap();
    manifest.frames[1].expression.push(0.0);
    manifest.frames[3].camera.width += 1;
    let path = dir.path().join("bad.json");
    manifest.save(&path).unwrap();
    assert!(matches!(load_dataset(&path), Err(Error::Frame { .. })));
    // The first bad frame alone.
    manifest.frames[1].expression.pop();
    manifest.save(&path).unwrap();
    match load_dataset(&path) {
        Err(Error::Frame { index, .. }) => assert_eq!(index, 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn white_background_decodes_to_one() {
    let (tpl, cfg) = small();
    let script = orbit_script(&tpl, &cfg, 8);
    let dir = tempfile::tempdir().unwrap();
    make_synthetic(&tpl, &script, &cfg, 8, dir.path()).unwrap();
    let img = load_png(dir.path().join("frames/0000.png")).unwrap();
    assert_eq!(img.data[0], [1.0; 3]);
}

#[test]
fn checkpoint_file_round_trip() {
    let (tpl, cfg) = small();
    let script = orbit_script(&tpl, &cfg, 9);
    let dir = tempfile::tempdir().unwrap();
    make_synthetic(&tpl, &script, &cfg, 9, dir.path()).unwrap();
    let path = dir.path().join(GROUND_TRUTH_FILE);
    let bytes = std::fs::read(&path).unwrap();
    let ck = Checkpoint::load(&path).unwrap();
    let again = dir.path().join("again.psav");
    ck.save(&again).unwrap();
    assert_eq!(std::fs::read(&again).unwrap(), bytes);
    assert_eq!(&bytes[..4], b"PSAV");
}
