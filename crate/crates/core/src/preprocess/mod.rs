//! Image preprocessing: normalization, resampling, center crop and
//! gradient-sign input perturbation.

mod image;
mod perturb;
mod resample;

pub use image::{center_crop, normalize_u8, ImageTensor, RawImage};
pub use perturb::{perturb_input, GradientProvider, LinearExtractor};
pub use resample::{kernel_weights, resample, ResampleKernel};

use crate::error::Result;

/// Output geometry and kernel for [`preprocess_pipeline`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub kernel: ResampleKernel,
    pub resize: (usize, usize),
    pub crop: (usize, usize),
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            kernel: ResampleKernel::Bicubic,
            resize: (256, 256),
            crop: (224, 224),
        }
    }
}

/// Normalize to `[0,1]`, resize (not aspect preserving), then center-crop.
pub fn preprocess_pipeline(raw: &RawImage, config: &PipelineConfig) -> Result<ImageTensor> {
    let img = normalize_u8(raw)?;
    let resized = resample(&img, config.resize.0, config.resize.1, config.kernel)?;
    center_crop(&resized, config.crop.0, config.crop.1)
}
