//! Point-based morphable head avatars: a skinned template is sampled into
//! on- and off-surface points, carved by differentiable point splatting and
//! then dressed with mesh-bound 3D Gaussians.

pub mod error;
pub mod frame;
pub mod io;
pub mod math;
pub mod morphable;
pub mod optim;
#[cfg(any(test, feature = "oracle"))]
pub mod oracle;
pub mod psm;
pub mod splat;

pub use error::{Error, ErrorKind, Result};
