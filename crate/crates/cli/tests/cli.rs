use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use headsplat::frame::Image;
use headsplat::io::{encode_srgb8, load_dataset, load_png, Checkpoint};
use headsplat::morphable::TemplateModel;
use headsplat::optim::{render_avatar, Avatar};
use serde_json::Value;

const SMALL: &str = r#"
seed = 3
[template]
rings = 10
segments = 16
[synthetic]
frames = 6
width = 40
height = 40
focal = 56.0
gaussians = 500
[sampling]
num_samples = 300
[optim]
shape_epochs = 1
appearance_epochs = 1
[eval]
holdout_every = 3
[serve]
width = 40
height = 40
"#;

struct Work {
    dir: tempfile::TempDir,
}

impl Work {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("small.toml"), SMALL).unwrap();
        Work { dir }
    }

    fn p(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        self.run_env(args, &[])
    }

    fn run_env(&self, args: &[&str], env: &[(&str, &str)]) -> Output {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_headsplat"));
        cmd.current_dir(self.dir.path()).args(args);
        for (k, v) in env {
            cmd.env(k, v);
        }
        cmd.output().unwrap()
    }

    fn ok(&self, args: &[&str]) -> Value {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let stdout = String::from_utf8(out.stdout).unwrap();
        serde_json::from_str(stdout.lines().last().unwrap_or("null")).unwrap()
    }

    /// Synthetic data, shape and appearance checkpoints under `prefix`.
    fn pipeline(&self, prefix: &str, env: &[(&str, &str)]) {
        let steps: [Vec<String>; 3] = [
            vec!["make-synthetic".into(), "--out".into(), format!("{prefix}data")],
            vec![
                "fit-shape".into(),
                "--data".into(),
                format!("{prefix}data/manifest.json"),
                "--out".into(),
                format!("{prefix}shape.psav"),
            ],
            vec![
                "fit-appearance".into(),
                "--data".into(),
                format!("{prefix}data/manifest.json"),
                "--shape".into(),
                format!("{prefix}shape.psav"),
                "--out".into(),
                format!("{prefix}avatar.psav"),
            ],
        ];
        for s in steps {
            let mut args: Vec<&str> = s.iter().map(|x| x.as_str()).collect();
            args.extend(["--config", "small.toml"]);
            let out = self.run_env(&args, env);
            assert!(
                out.status.success(),
                "{args:?}: {}",
                String::from_utf8_lossy(&out.stderr)
            );
        }
    }
}

fn error_line(out: &Output) -> Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1, "{text}");
    serde_json::from_str(lines[0]).unwrap()
}

#[test]
fn full_pipeline_writes_echoes_and_metrics() {
    let w = Work::new();
    w.pipeline("", &[]);
    for f in [
        "data/config.resolved.toml",
        "shape.psav.config.toml",
        "avatar.psav.config.toml",
    ] {
        let text = std::fs::read_to_string(w.p(f)).unwrap();
        assert!(text.contains("seed = 3"), "{f}");
    }
    let app = w.ok(&[
        "eval",
        "--config",
        "small.toml",
        "--data",
        "data/manifest.json",
        "--checkpoint",
        "avatar.psav",
    ]);
    assert_eq!(app["frames"], 2);
    assert!(app["psnr"].as_f64().unwrap() > 0.0);
    let ck = Checkpoint::load(w.p("avatar.psav")).unwrap();
    assert!(ck.gaussians.is_some());
    let echoed: Value = serde_json::from_str(&ck.config).unwrap();
    assert_eq!(echoed["seed"], 3);
}

#[test]
fn shape_epochs_default_to_two() {
    let w = Work::new();
    w.ok(&["make-synthetic", "--config", "small.toml", "--out", "data"]);
    // The small config sets one epoch; dropping it restores the default.
    let cfg = SMALL.replace("shape_epochs = 1\n", "");
    std::fs::write(w.p("default.toml"), cfg).unwrap();
    let args = [
        "fit-shape",
        "--config",
        "default.toml",
        "--data",
        "data/manifest.json",
        "--out",
        "s.psav",
        "--stats",
        "s.jsonl",
    ];
    w.ok(&args);
    let echo = std::fs::read_to_string(w.p("s.psav.config.toml")).unwrap();
    assert!(echo.contains("shape_epochs = 2"));
    let lines = std::fs::read_to_string(w.p("s.jsonl")).unwrap();
    let records: Vec<Value> = lines.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    // Two epochs over the four training frames.
    assert_eq!(records.len(), 8);
    assert_eq!(records.last().unwrap()["epoch"], 1);

    w.ok(&[
        "fit-shape",
        "--config",
        "default.toml",
        "--data",
        "data/manifest.json",
        "--out",
        "t.psav",
        "--epochs",
        "3",
    ]);
    assert!(std::fs::read_to_string(w.p("t.psav.config.toml"))
        .unwrap()
        .contains("shape_epochs = 3"));
}

#[test]
fn foreign_parameter_stream_animates_the_loaded_avatar() {
    let w = Work::new();
    w.pipeline("", &[]);
    // A second identity from another seed supplies the parameters.
    w.ok(&[
        "make-synthetic",
        "--config",
        "small.toml",
        "--seed",
        "11",
        "--out",
        "other",
    ]);
    w.ok(&[
        "render",
        "--config",
        "small.toml",
        "--template",
        "data/template.json",
        "--checkpoint",
        "avatar.psav",
        "--stream",
        "other/manifest.json",
        "--out",
        "reenact",
    ]);
    let other = load_dataset(w.p("other/manifest.json")).unwrap();
    let template = TemplateModel::load(w.p("data/template.json")).unwrap();
    let ck = Checkpoint::load(w.p("avatar.psav")).unwrap();
    let model = ck.apply_correctives(&template).unwrap();
    let set = ck.gaussians.as_ref().unwrap();
    for (i, f) in other.frames.iter().enumerate() {
        let r = render_avatar(
            &model,
            Avatar::Gaussians(set),
            &f.pe,
            &f.cam,
            [1.0; 3],
            &Default::default(),
        )
        .unwrap();
        let expected = encode_srgb8(&Image::from_data(r.width, r.height, r.image).unwrap());
        let got = encode_srgb8(&load_png(w.p(&format!("reenact/{i:04}.png"))).unwrap());
        assert_eq!(got, expected, "frame {i}");
    }

    // The same stream as JSON lines, with the default orbit camera.
    let mut jsonl = String::new();
    for f in &other.frames {
        jsonl.push_str(&serde_json::json!({ "pose": f.pe.pose_flat(), "expression": f.pe.expr }).to_string());
        jsonl.push('\n');
    }
    std::fs::write(w.p("stream.jsonl"), jsonl).unwrap();
    let args = [
        "render",
        "--config",
        "small.toml",
        "--template",
        "data/template.json",
        "--checkpoint",
        "avatar.psav",
    ];
    let out = w.ok(&[
        &args[..],
        &[
            "--stream",
            "stream.jsonl",
            "--out",
            "jl",
            "--width",
            "32",
            "--height",
            "24",
        ],
    ]
    .concat());
    assert_eq!(out["frames"], 6);
    let img = load_png(w.p("jl/0005.png")).unwrap();
    assert_eq!((img.width, img.height), (32, 24));
    let a = load_png(w.p("jl/0000.png")).unwrap();
    assert_ne!(a.data, img.data);
}

#[test]
fn identical_directories_hit_the_psnr_cap() {
    let w = Work::new();
    w.ok(&["make-synthetic", "--config", "small.toml", "--out", "data"]);
    let v = w.ok(&["eval", "--pred", "data/frames", "--target", "data/frames"]);
    assert_eq!(v["psnr"], 100.0);
    assert_eq!(v["ssim"], 1.0);
    assert_eq!(v["frames"], 6);
}

#[test]
fn failures_are_single_machine_readable_lines() {
    let w = Work::new();
    let out = w.run(&["fit-shape", "--data", "missing.json", "--out", "x.psav"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"], "data");

    let out = w.run(&["make-template", "--out", "t.json", "--set", "optim.shape_epoch=2"]);
    assert_eq!(out.status.code(), Some(1));
    let e = error_line(&out);
    assert_eq!(e["error"], "usage");
    assert!(e["message"].as_str().unwrap().contains("shape_epoch"));

    let out = w.run(&["fit-shape", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    error_line(&out);

    let out = w.run_env(&["make-template", "--out", "t.json"], &[("HEADSPLAT_THREADS", "zero")]);
    assert_eq!(out.status.code(), Some(1));

    w.ok(&["make-synthetic", "--config", "small.toml", "--out", "data"]);
    w.ok(&[
        "fit-shape",
        "--config",
        "small.toml",
        "--data",
        "data/manifest.json",
        "--out",
        "s.psav",
    ]);
    let out = w.run(&[
        "fit-appearance",
        "--config",
        "small.toml",
        "--data",
        "data/manifest.json",
        "--shape",
        "s.psav",
        "--out",
        "a.psav",
        "--set",
        "optim.lr.log_scale=1e8",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_line(&out)["error"], "numerical");
    assert!(!w.p("a.psav").exists());

    std::fs::write(w.p("bad.jsonl"), "{\"pose\":[0,0,0],\"expression\":[]}\n").unwrap();
    let out = w.run(&[
        "render",
        "--config",
        "small.toml",
        "--template",
        "data/template.json",
        "--checkpoint",
        "s.psav",
        "--stream",
        "bad.jsonl",
        "--out",
        "r",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_line(&out)["message"].as_str().unwrap().contains("stream frame 0"));
}

fn bytes(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn runs_are_bitwise_identical_across_thread_counts() {
    let w = Work::new();
    w.pipeline("a_", &[("HEADSPLAT_THREADS", "1")]);
    w.pipeline("b_", &[("HEADSPLAT_THREADS", "3")]);
    for f in [
        "shape.psav",
        "avatar.psav",
        "data/frames/0004.png",
        "data/ground_truth.psav",
    ] {
        assert_eq!(bytes(&w.p(&format!("a_{f}"))), bytes(&w.p(&format!("b_{f}"))), "{f}");
    }
}

#[test]
fn serve_bench_reports_both_sizes() {
    let w = Work::new();
    let out = w.run(&[
        "serve",
        "--config",
        "small.toml",
        "--bench",
        "--set",
        "serve.bench_frames=3",
        "--set",
        "serve.bench_gaussians=400",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines: Vec<Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["width"], 40);
    assert_eq!(lines[1]["width"], 80);
    assert_eq!(lines[0]["gaussians"], 400);
    assert!(lines[0]["fps"].as_f64().unwrap() > 0.0);
    let out = w.run(&["serve", "--config", "small.toml"]);
    assert_eq!(out.status.code(), Some(1));
}
