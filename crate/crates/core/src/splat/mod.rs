//! Differentiable splatting of point and Gaussian primitives.

mod camera;
mod gaussian;
mod raster;
mod render;
pub mod sh;

pub use camera::CameraModel;
pub use gaussian::{
    compose_rotation, compose_rotation_backward, covariance_backward, covariance_from, project_gaussian,
    project_gaussian_backward, project_point, project_point_backward, Projected,
};
pub use raster::{
    composite_pixel, fragment_alpha, gaussian_alpha, point_alpha, rasterize, rasterize_backward, Kernel, Raster,
    RasterConfig, Splat, SplatGrad,
};
pub use render::{
    render_gaussians, render_gaussians_backward, render_points, render_points_backward, GaussianGrads,
    GaussianPrimitive, GaussianSet, PointGrads, RenderOutput,
};
pub use sh::{sh_eval, sh_rotate, ShCoeffs, MAX_SH_COEFFS, MAX_SH_DEGREE, SH_C0, SH_DC_OFFSET};
