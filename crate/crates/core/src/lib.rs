//! Depth-based paired stereo video generation, flow-refined occlusion masks,
//! and the latent-space stereo consistency math that trains on those pairs.
//!
//! * [`imaging`]: raster types and PFM / `.flo` / PNG codecs.
//! * [`dvg`]: forward/backward rendering, flow confidence, temporal mask
//!   refinement, hole filling and a synthetic scene generator.
//! * [`diffusion`]: noise schedule, forward process, clean-latent estimate,
//!   deviation strength and the combined loss with its analytic gradient.
//! * [`attention`]: blended temporal attention and concat-height spatial attention.
//! * [`metrics`]: PSNR, SSIM and flow-warping error.

pub mod attention;
pub mod diffusion;
pub mod dvg;
pub mod error;
pub mod imaging;
pub mod metrics;
mod sampling;

pub use error::{Error, Result};
/// Re-exported for [`dvg::CameraPose`] construction.
pub use nalgebra;
