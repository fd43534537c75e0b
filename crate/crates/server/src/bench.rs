//! Fixed-rate benchmark: the render worker's path (Gaussian render plus PNG
//! encode) run back to back while the camera orbits.

use std::time::Instant;

use serde::Serialize;

use crate::session::{render_snapshot, AvatarAsset, SessionCore};

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub width: u32,
    pub height: u32,
    pub gaussians: usize,
    pub frames: usize,
    pub fps: f64,
    pub mean_render_ms: f64,
    pub threads: usize,
}

/// Renders `frames` frames at `width`×`height`, advancing the orbit azimuth
/// by 0.05 rad per frame so no two frames share a view.
pub fn bench(
    asset: &std::sync::Arc<AvatarAsset>,
    width: u32,
    height: u32,
    frames: usize,
) -> headsplat::Result<BenchReport> {
    let core = SessionCore::new(asset.clone(), width, height);
    let mut snap = core.snapshot();
    // One warm-up frame outside the timed loop.
    render_snapshot(asset, &snap)?;
    let start = Instant::now();
    let mut render_ms = 0.0;
    for i in 0..frames {
        snap.view.orbit.azimuth = 0.05 * i as f64;
        snap.seq = i as u64;
        render_ms += render_snapshot(asset, &snap)?.render_ms;
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(BenchReport {
        width,
        height,
        gaussians: asset.set.len(),
        frames,
        fps: frames as f64 / secs,
        mean_render_ms: render_ms / frames.max(1) as f64,
        threads: rayon::current_num_threads(),
    })
}
