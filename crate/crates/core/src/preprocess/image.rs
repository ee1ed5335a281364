use crate::error::{Error, Result};

/// Decoded 8-bit image, row-major H×W×C.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<u8>,
}

impl RawImage {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        check_shape(height, width, channels, data.len())?;
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }
}

fn check_shape(height: usize, width: usize, channels: usize, len: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidImage(format!(
            "zero-sized image {height}x{width}"
        )));
    }
    if channels != 1 && channels != 3 {
        return Err(Error::InvalidImage(format!(
            "channels must be 1 or 3, got {channels}"
        )));
    }
    if len != height * width * channels {
        return Err(Error::InvalidImage(format!(
            "expected {} values for {height}x{width}x{channels}, got {len}",
            height * width * channels
        )));
    }
    Ok(())
}

/// Real-valued image in `[0,1]`, row-major H×W×C.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageTensor {
    /// Builds an image; values must lie in `[0,1]`.
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        check_shape(height, width, channels, data.len())?;
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidImage(format!("value {v} outside [0,1]")));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Builds an image, clamping every value into `[0,1]`. NaN becomes 0.
    pub fn from_clamped(height: usize, width: usize, channels: usize, mut data: Vec<f64>) -> Result<Self> {
        check_shape(height, width, channels, data.len())?;
        for v in &mut data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn constant(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Mirror image across the vertical axis.
    pub fn flip_horizontal(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..self.height {
            for x in (0..self.width).rev() {
                let base = (y * self.width + x) * self.channels;
                data.extend_from_slice(&self.data[base..base + self.channels]);
            }
        }
        Self { data, ..*self }
    }
}

/// `value / 255` for every sample.
pub fn normalize_u8(raw: &RawImage) -> Result<ImageTensor> {
    ImageTensor::new(
        raw.height,
        raw.width,
        raw.channels,
        raw.data.iter().map(|&v| v as f64 / 255.0).collect(),
    )
}

/// Crops an `out_h × out_w` window starting at `floor((in − out) / 2)`.
pub fn center_crop(image: &ImageTensor, out_h: usize, out_w: usize) -> Result<ImageTensor> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidImage("zero-sized crop".into()));
    }
    if out_h > image.height || out_w > image.width {
        return Err(Error::InvalidImage(format!(
            "crop {out_h}x{out_w} larger than image {}x{}",
            image.height, image.width
        )));
    }
    let top = (image.height - out_h) / 2;
    let left = (image.width - out_w) / 2;
    let c = image.channels;
    let mut data = Vec::with_capacity(out_h * out_w * c);
    for y in top..top + out_h {
        let start = (y * image.width + left) * c;
        data.extend_from_slice(&image.data[start..start + out_w * c]);
    }
    Ok(ImageTensor {
        height: out_h,
        width: out_w,
        channels: c,
        data,
    })
}
