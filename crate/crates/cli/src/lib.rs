//! Subcommand implementations behind the `headsplat` binary.

pub mod config;
pub mod error;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use headsplat::frame::{FrameRecord, Image};
use headsplat::io::{
    ground_truth_avatar, load_dataset, load_png, make_synthetic, orbit_script, save_png, Checkpoint, DatasetManifest,
    Stage,
};
use headsplat::morphable::{blockhead, BlockheadParams, PoseExpr, TemplateModel};
use headsplat::optim::{
    evaluate, fit_appearance, fit_shape, holdout_split, psnr, render_avatar, ssim, Avatar, EvalSummary,
    PyramidExtractor, StatRecord,
};
use headsplat::psm::build_cloud;
use headsplat::splat::CameraModel;
use headsplat_server::session::AvatarAsset;
use serde::{Deserialize, Serialize};

pub use config::RunConfig;
pub use error::{CliError, Kind};

pub const THREADS_ENV: &str = "HEADSPLAT_THREADS";
pub const CONFIG_ECHO: &str = "config.resolved.toml";

#[derive(Parser, Debug)]
#[command(
    name = "headsplat",
    version,
    about = "Point-based head avatars: fitting, rendering and live serving"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set optim.shape_epochs=3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
pub struct TrainOutputs {
    /// Write per-iteration statistics as JSON lines.
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write the procedural template model as JSON.
    MakeTemplate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a synthetic multi-view dataset from a perturbed ground truth.
    MakeSynthetic {
        #[command(flatten)]
        common: Common,
        /// Template to start from; the procedural template by default.
        #[arg(long)]
        template: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw the initial on/off-surface point cloud into a checkpoint.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        template: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Shape stage: carve the point cloud and fit corrective bases.
    FitShape {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        outputs: TrainOutputs,
        /// Dataset manifest.
        #[arg(long)]
        data: PathBuf,
        /// Initial cloud from `sample`; drawn fresh when omitted.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Appearance stage: bind Gaussians to the carved cloud and fit them.
    FitAppearance {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        outputs: TrainOutputs,
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint written by `fit-shape`.
        #[arg(long)]
        shape: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a pose/expression stream to numbered PNG frames.
    Render {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        template: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// JSON-lines parameter stream, or a dataset manifest whose frames
        /// supply the parameters.
        #[arg(long)]
        stream: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        width: Option<u32>,
        #[arg(long)]
        height: Option<u32>,
    },
    /// Image metrics between two directories, or of a checkpoint on a dataset.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Directory of rendered PNGs.
        #[arg(long, requires = "target", conflicts_with_all = ["data", "checkpoint"])]
        pred: Option<PathBuf>,
        /// Directory of reference PNGs with matching names.
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long, requires = "checkpoint")]
        data: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Frames to evaluate against: `test`, `train` or `all`.
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Serve the avatar over a websocket, or benchmark the frame path.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        template: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        port: Option<u16>,
        /// Fixed frame rate instead of push-on-change.
        #[arg(long)]
        fps: Option<f64>,
        /// Directory of viewer assets served at `/`.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        /// Time the render-and-encode path and exit.
        #[arg(long)]
        bench: bool,
    },
}

/// Sizes the global rayon pool from `HEADSPLAT_THREADS` when set.
pub fn init_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| CliError::usage(format!("{THREADS_ENV}={v:?} is not a positive integer")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn resolve(common: &Common, extra: &[String]) -> Result<RunConfig, CliError> {
    let mut overrides = common.overrides.clone();
    if let Some(s) = common.seed {
        overrides.push(format!("seed={s}"));
    }
    overrides.extend_from_slice(extra);
    config::resolve(common.config.as_deref(), &overrides)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// Echo location for a run writing `out`: inside it for directories, next to
/// it for files.
pub fn echo_path(out: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        out.join(CONFIG_ECHO)
    } else {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".config.toml");
        out.with_file_name(name)
    }
}

fn echo(cfg: &RunConfig, out: &Path, is_dir: bool) -> Result<(), CliError> {
    write_text(&echo_path(out, is_dir), &cfg.to_toml())
}

fn write_stats(path: Option<&Path>, stats: &[StatRecord]) -> Result<(), CliError> {
    let Some(path) = path else { return Ok(()) };
    let mut w = BufWriter::new(File::create(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?);
    for r in stats {
        serde_json::to_writer(&mut w, r).map_err(|e| CliError::data(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn load_template(path: &Path) -> Result<TemplateModel, CliError> {
    Ok(TemplateModel::load(path)?)
}

fn procedural_template(cfg: &RunConfig) -> TemplateModel {
    blockhead(BlockheadParams {
        rings: cfg.template.rings,
        segments: cfg.template.segments,
        seed: cfg.seed,
    })
}

fn split(frames: &[FrameRecord], every: usize) -> (Vec<FrameRecord>, Vec<FrameRecord>) {
    let (tr, te) = holdout_split(frames.len(), every);
    (
        tr.iter().map(|&i| frames[i].clone()).collect(),
        te.iter().map(|&i| frames[i].clone()).collect(),
    )
}

fn print_json(value: &impl Serialize) {
    println!("{}", serde_json::to_string(value).expect("summary serializes"));
}

#[derive(Serialize)]
struct FitSummary {
    stage: &'static str,
    samples: usize,
    train: EvalSummary,
    test: Option<EvalSummary>,
    /// The shape-stage point render on the same held-out frames.
    #[serde(skip_serializing_if = "Option::is_none")]
    point_stage_test: Option<EvalSummary>,
}

fn eval_opt(
    frames: &[FrameRecord],
    model: &TemplateModel,
    avatar: Avatar<'_>,
    cfg: &RunConfig,
) -> Result<Option<EvalSummary>, CliError> {
    if frames.is_empty() {
        return Ok(None);
    }
    Ok(Some(evaluate(
        frames,
        model,
        avatar,
        cfg.optim.background,
        &cfg.optim.raster,
    )?))
}

/// One line of a render stream. Field names follow the dataset manifest.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamFrame {
    pub pose: Vec<f64>,
    pub expression: Vec<f64>,
    #[serde(default)]
    pub camera: Option<CameraModel>,
}

pub fn read_stream(path: &Path) -> Result<Vec<StreamFrame>, CliError> {
    if let Ok(m) = DatasetManifest::load(path) {
        return Ok(m
            .frames
            .into_iter()
            .map(|f| StreamFrame {
                pose: f.pose,
                expression: f.expression,
                camera: Some(f.camera),
            })
            .collect());
    }
    let file = File::open(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| CliError::data(format!("{} line {}: {e}", path.display(), i + 1)))?,
        );
    }
    if out.is_empty() {
        return Err(CliError::data(format!("{}: empty parameter stream", path.display())));
    }
    Ok(out)
}

fn list_pngs(dir: &Path) -> Result<Vec<String>, CliError> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".png"))
        .collect();
    names.sort();
    Ok(names)
}

#[derive(Serialize)]
struct ImageMetrics {
    name: String,
    psnr: f64,
    ssim: f64,
}

#[derive(Serialize)]
struct DirSummary {
    frames: usize,
    psnr: f64,
    ssim: f64,
    per_frame: Vec<ImageMetrics>,
}

fn compare_dirs(pred: &Path, target: &Path) -> Result<DirSummary, CliError> {
    let names = list_pngs(pred)?;
    if names.is_empty() {
        return Err(CliError::data(format!("{}: no PNG files", pred.display())));
    }
    let mut per_frame = Vec::new();
    for n in names {
        let (a, b) = (load_png(pred.join(&n))?, load_png(target.join(&n))?);
        per_frame.push(ImageMetrics {
            psnr: psnr(&a, &b)?,
            ssim: ssim(&a, &b)?,
            name: n,
        });
    }
    let k = per_frame.len() as f64;
    Ok(DirSummary {
        frames: per_frame.len(),
        psnr: per_frame.iter().map(|m| m.psnr).sum::<f64>() / k,
        ssim: per_frame.iter().map(|m| m.ssim).sum::<f64>() / k,
        per_frame,
    })
}

fn default_camera(cfg: &RunConfig, width: u32, height: u32) -> CameraModel {
    let s = &cfg.synthetic;
    CameraModel::orbit(
        &headsplat::math::Vec3::zeros(),
        0.0,
        0.0,
        s.distance,
        s.focal * width as f64 / s.width as f64,
        width,
        height,
    )
}

/// Avatar served or benchmarked: a trained checkpoint, or for benchmarking
/// the synthetic ground truth with `serve.bench_gaussians` Gaussians.
fn serve_asset(
    cfg: &RunConfig,
    template: Option<&Path>,
    checkpoint: Option<&Path>,
    bench: bool,
) -> Result<AvatarAsset, CliError> {
    let template = match template {
        Some(p) => load_template(p)?,
        None => procedural_template(cfg),
    };
    let mut asset = match checkpoint {
        Some(p) => AvatarAsset::from_checkpoint(&template, &Checkpoint::load(p)?)?,
        None if bench => {
            let syn = headsplat::io::SyntheticConfig {
                gaussians: cfg.serve.bench_gaussians,
                ..cfg.synthetic.clone()
            };
            let (model, set) = ground_truth_avatar(&template, &syn, cfg.seed)?;
            AvatarAsset {
                model,
                set,
                background: cfg.optim.background,
                raster: cfg.optim.raster,
            }
        }
        None => return Err(CliError::usage("serve needs --checkpoint (or --bench)")),
    };
    asset.background = cfg.optim.background;
    asset.raster = cfg.optim.raster;
    Ok(asset)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::MakeTemplate { common, out } => {
            let cfg = resolve(&common, &[])?;
            let t = procedural_template(&cfg);
            write_text(&out, &t.to_json()?)?;
            echo(&cfg, &out, false)
        }
        Command::MakeSynthetic { common, template, out } => {
            let cfg = resolve(&common, &[])?;
            let t = match &template {
                Some(p) => load_template(p)?,
                None => procedural_template(&cfg),
            };
            let script = orbit_script(&t, &cfg.synthetic, cfg.seed);
            let manifest = make_synthetic(&t, &script, &cfg.synthetic, cfg.seed, &out)?;
            echo(&cfg, &out, true)?;
            print_json(&serde_json::json!({ "frames": manifest.frames.len(), "manifest": out.join("manifest.json") }));
            Ok(())
        }
        Command::Sample { common, template, out } => {
            let cfg = resolve(&common, &[])?;
            let t = load_template(&template)?;
            let cloud = build_cloud(&t, &cfg.sampling, cfg.seed)?;
            let n = cloud.len();
            Checkpoint {
                stage: Stage::Shape,
                seed: cfg.seed,
                config: cfg.to_json(),
                cloud,
                gaussians: None,
                corrective_pose: t.corrective_pose_basis.clone(),
                corrective_expr: t.corrective_expr_basis.clone(),
            }
            .save(&out)?;
            echo(&cfg, &out, false)?;
            print_json(&serde_json::json!({ "samples": n }));
            Ok(())
        }
        Command::FitShape {
            common,
            outputs,
            data,
            init,
            epochs,
            out,
        } => {
            let extra: Vec<String> = epochs.map(|e| format!("optim.shape_epochs={e}")).into_iter().collect();
            let cfg = resolve(&common, &extra)?;
            let ds = load_dataset(&data)?;
            let (train, test) = split(&ds.frames, cfg.eval.holdout_every);
            let (model, cloud) = match &init {
                Some(p) => {
                    let ck = Checkpoint::load(p)?;
                    (ck.apply_correctives(&ds.template)?, ck.cloud)
                }
                None => (ds.template.clone(), build_cloud(&ds.template, &cfg.sampling, cfg.seed)?),
            };
            let fit = fit_shape(&train, &model, &cloud, &cfg.optim, &PyramidExtractor::default())?;
            Checkpoint {
                stage: Stage::Shape,
                seed: cfg.seed,
                config: cfg.to_json(),
                cloud: fit.cloud.clone(),
                gaussians: None,
                corrective_pose: fit.model.corrective_pose_basis.clone(),
                corrective_expr: fit.model.corrective_expr_basis.clone(),
            }
            .save(&out)?;
            echo(&cfg, &out, false)?;
            write_stats(outputs.stats.as_deref(), &fit.stats)?;
            let avatar = Avatar::Points(&fit.cloud);
            print_json(&FitSummary {
                stage: "shape",
                samples: fit.cloud.len(),
                train: evaluate(&train, &fit.model, avatar, cfg.optim.background, &cfg.optim.raster)?,
                test: eval_opt(&test, &fit.model, avatar, &cfg)?,
                point_stage_test: None,
            });
            Ok(())
        }
        Command::FitAppearance {
            common,
            outputs,
            data,
            shape,
            epochs,
            out,
        } => {
            let extra: Vec<String> = epochs
                .map(|e| format!("optim.appearance_epochs={e}"))
                .into_iter()
                .collect();
            let cfg = resolve(&common, &extra)?;
            let ds = load_dataset(&data)?;
            let (train, test) = split(&ds.frames, cfg.eval.holdout_every);
            let ck = Checkpoint::load(&shape)?;
            if ck.stage != Stage::Shape {
                return Err(CliError::data(format!(
                    "{}: not a shape-stage checkpoint",
                    shape.display()
                )));
            }
            let model = ck.apply_correctives(&ds.template)?;
            let fit = fit_appearance(&train, &model, &ck.cloud, &cfg.optim, &PyramidExtractor::default())?;
            Checkpoint {
                stage: Stage::Appearance,
                seed: cfg.seed,
                config: cfg.to_json(),
                cloud: headsplat::psm::PsmCloud {
                    samples: fit.set.samples(),
                    ..ck.cloud.clone()
                },
                gaussians: Some(fit.set.clone()),
                corrective_pose: fit.model.corrective_pose_basis.clone(),
                corrective_expr: fit.model.corrective_expr_basis.clone(),
            }
            .save(&out)?;
            echo(&cfg, &out, false)?;
            write_stats(outputs.stats.as_deref(), &fit.stats)?;
            let avatar = Avatar::Gaussians(&fit.set);
            print_json(&FitSummary {
                stage: "appearance",
                samples: fit.set.len(),
                train: evaluate(&train, &fit.model, avatar, cfg.optim.background, &cfg.optim.raster)?,
                test: eval_opt(&test, &fit.model, avatar, &cfg)?,
                point_stage_test: eval_opt(&test, &model, Avatar::Points(&ck.cloud), &cfg)?,
            });
            Ok(())
        }
        Command::Render {
            common,
            template,
            checkpoint,
            stream,
            out,
            width,
            height,
        } => {
            let cfg = resolve(&common, &[])?;
            let t = load_template(&template)?;
            let ck = Checkpoint::load(&checkpoint)?;
            let model = ck.apply_correctives(&t)?;
            let frames = read_stream(&stream)?;
            let (w, h) = (width.unwrap_or(cfg.serve.width), height.unwrap_or(cfg.serve.height));
            if !(16..=4096).contains(&w) || !(16..=4096).contains(&h) {
                return Err(CliError::usage(format!("render size {w}x{h} outside [16, 4096]")));
            }
            std::fs::create_dir_all(&out)?;
            for (i, f) in frames.iter().enumerate() {
                let at = |e: headsplat::Error| CliError {
                    message: format!("stream frame {i}: {e}"),
                    ..CliError::from(e)
                };
                let pe = PoseExpr::from_flat(&f.pose, &f.expression).map_err(at)?;
                pe.validate(&model).map_err(at)?;
                let cam = match f.camera {
                    Some(c) if width.is_none() && height.is_none() => c,
                    Some(c) => c.with_resolution(w, h),
                    None => default_camera(&cfg, w, h),
                };
                let avatar = match &ck.gaussians {
                    Some(set) => Avatar::Gaussians(set),
                    None => Avatar::Points(&ck.cloud),
                };
                let r =
                    render_avatar(&model, avatar, &pe, &cam, cfg.optim.background, &cfg.optim.raster).map_err(at)?;
                let img = Image::from_data(r.width, r.height, r.image)?;
                save_png(&img, out.join(format!("{i:04}.png")))?;
            }
            echo(&cfg, &out, true)?;
            print_json(&serde_json::json!({ "frames": frames.len() }));
            Ok(())
        }
        Command::Eval {
            common,
            pred,
            target,
            data,
            checkpoint,
            split: which,
        } => {
            let cfg = resolve(&common, &[])?;
            if let (Some(p), Some(t)) = (&pred, &target) {
                print_json(&compare_dirs(p, t)?);
                return Ok(());
            }
            let (Some(data), Some(checkpoint)) = (data, checkpoint) else {
                return Err(CliError::usage("eval needs --pred/--target or --data/--checkpoint"));
            };
            let ds = load_dataset(&data)?;
            let (train, test) = split(&ds.frames, cfg.eval.holdout_every);
            let frames = match which.as_str() {
                "test" => test,
                "train" => train,
                "all" => ds.frames,
                other => return Err(CliError::usage(format!("unknown split {other:?}"))),
            };
            if frames.is_empty() {
                return Err(CliError::data(format!("split {which:?} has no frames")));
            }
            let ck = Checkpoint::load(&checkpoint)?;
            let model = ck.apply_correctives(&ds.template)?;
            let avatar = match &ck.gaussians {
                Some(set) => Avatar::Gaussians(set),
                None => Avatar::Points(&ck.cloud),
            };
            print_json(&evaluate(
                &frames,
                &model,
                avatar,
                cfg.optim.background,
                &cfg.optim.raster,
            )?);
            Ok(())
        }
        Command::Serve {
            common,
            template,
            checkpoint,
            port,
            fps,
            static_dir,
            bench,
        } => {
            let mut extra = Vec::new();
            if let Some(p) = port {
                extra.push(format!("serve.port={p}"));
            }
            if let Some(f) = fps {
                extra.push(format!("serve.fps={f:?}"));
            }
            let cfg = resolve(&common, &extra)?;
            let asset = Arc::new(serve_asset(&cfg, template.as_deref(), checkpoint.as_deref(), bench)?);
            if bench {
                let s = &cfg.serve;
                for (w, h) in [(s.width, s.height), (2 * s.width, 2 * s.height)] {
                    print_json(&headsplat_server::bench::bench(&asset, w, h, s.bench_frames)?);
                }
                return Ok(());
            }
            let sc = headsplat_server::service::ServeConfig {
                width: cfg.serve.width,
                height: cfg.serve.height,
                fps: (cfg.serve.fps > 0.0).then_some(cfg.serve.fps),
                credit_window: cfg.serve.credit_window,
                static_dir,
                ..Default::default()
            };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let addr = format!("{}:{}", cfg.serve.host, cfg.serve.port);
                let listener = tokio::net::TcpListener::bind(&addr)
                    .await
                    .map_err(|e| CliError::usage(format!("bind {addr}: {e}")))?;
                log::info!("serving on http://{}", listener.local_addr()?);
                eprintln!("listening on {}", listener.local_addr()?);
                headsplat_server::service::serve(listener, asset, sc).await?;
                Ok(())
            })
        }
    }
}
