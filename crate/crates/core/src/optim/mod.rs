//! Losses, the Adam optimizer, image metrics and the two training stages.

mod adam;
mod loss;
mod metrics;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use loss::{
    loss_perceptual, loss_perceptual_grad, loss_rgb, loss_rgb_grad, loss_scaling, loss_scaling_grad, perceptual_terms,
    total_loss, FeatureExtractor, FeatureMap, LossParts, PyramidExtractor,
};
pub use metrics::{mse, psnr, silhouette_iou, ssim, ssim_map, PSNR_CAP};
pub use train::{
    evaluate, fit_appearance, fit_appearance_from, fit_shape, holdout_split, init_gaussians,
    mean_nearest_neighbor_distance, render_avatar, AppearanceFit, Avatar, EvalSummary, LearningRates, OptimConfig,
    ShapeFit, StatRecord,
};
