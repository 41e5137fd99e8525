//! Image quality metrics and the bicubic resampler used for degradation:
//! BT.601 luma extraction, border-cropped PSNR, Gaussian-window SSIM.

mod quality;
mod resize;

pub use quality::{psnr, rgb_to_y, ssim, PSNR_CAP_DB};
pub use resize::bicubic_resize;
