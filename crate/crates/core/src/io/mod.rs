//! File formats: checkpoints, dataset manifests, PNG images and the
//! synthetic dataset generator.

mod checkpoint;
mod dataset;
mod synthetic;

pub use checkpoint::{Checkpoint, Stage, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use dataset::{
    decode_srgb8, encode_png, encode_srgb8, linear_to_srgb, load_dataset, load_mask, load_png, save_mask, save_png,
    srgb_to_linear, Dataset, DatasetManifest, ManifestFrame, MANIFEST_VERSION,
};
pub use synthetic::{
    ground_truth_avatar, make_synthetic, orbit_script, render_ground_truth, ScriptFrame, SyntheticConfig,
    GROUND_TRUTH_FILE,
};
