//! Separable resampling with half-pixel center alignment.
//!
//! Output sample `dst` maps to source coordinate `(dst + 0.5)·scale − 0.5`
//! with `scale = in / out`. When downsampling the kernel is stretched by
//! `scale` so it acts as a low-pass filter. Taps falling outside the image are
//! dropped and the remaining weights renormalized to sum to one.

use std::fmt;
use std::str::FromStr;

use super::image::ImageTensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleKernel {
    Nearest,
    Bilinear,
    /// Keys cubic convolution, `a = −0.5`.
    Bicubic,
    /// Windowed sinc, window 3.
    Lanczos3,
}

const KEYS_A: f64 = -0.5;
const LANCZOS_WINDOW: f64 = 3.0;

impl ResampleKernel {
    pub const ALL: [ResampleKernel; 4] = [
        ResampleKernel::Nearest,
        ResampleKernel::Bilinear,
        ResampleKernel::Bicubic,
        ResampleKernel::Lanczos3,
    ];

    /// Half-width of the kernel at unit scale.
    pub fn support(self) -> f64 {
        match self {
            Self::Nearest => 0.5,
            Self::Bilinear => 1.0,
            Self::Bicubic => 2.0,
            Self::Lanczos3 => LANCZOS_WINDOW,
        }
    }

    /// Kernel value at offset `x` (in source pixels at unit scale).
    pub fn eval(self, x: f64) -> f64 {
        let ax = x.abs();
        match self {
            Self::Nearest => {
                if (-0.5..0.5).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Bilinear => (1.0 - ax).max(0.0),
            Self::Bicubic => {
                let a = KEYS_A;
                if ax <= 1.0 {
                    ((a + 2.0) * ax - (a + 3.0)) * ax * ax + 1.0
                } else if ax < 2.0 {
                    ((a * ax - 5.0 * a) * ax + 8.0 * a) * ax - 4.0 * a
                } else {
                    0.0
                }
            }
            Self::Lanczos3 => {
                if ax < LANCZOS_WINDOW {
                    sinc(x) * sinc(x / LANCZOS_WINDOW)
                } else {
                    0.0
                }
            }
        }
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

impl FromStr for ResampleKernel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "nearest" => Ok(Self::Nearest),
            "bilinear" => Ok(Self::Bilinear),
            "cubic" | "bicubic" => Ok(Self::Bicubic),
            "lanczos" | "lanczos3" => Ok(Self::Lanczos3),
            other => Err(format!("unknown kernel {other:?}")),
        }
    }
}

impl fmt::Display for ResampleKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Nearest => "nearest",
            Self::Bilinear => "bilinear",
            Self::Bicubic => "cubic",
            Self::Lanczos3 => "lanczos",
        })
    }
}

/// Normalized taps for one output sample: source indices `start..start + weights.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Taps {
    pub start: usize,
    pub weights: Vec<f64>,
}

/// Per-output-sample taps for resampling an axis of length `in_len` to `out_len`.
pub fn kernel_weights(in_len: usize, out_len: usize, kernel: ResampleKernel) -> Vec<Taps> {
    let scale = in_len as f64 / out_len as f64;
    if kernel == ResampleKernel::Nearest {
        return (0..out_len)
            .map(|dst| {
                let src = (((dst as f64 + 0.5) * scale).floor() as usize).min(in_len - 1);
                Taps {
                    start: src,
                    weights: vec![1.0],
                }
            })
            .collect();
    }
    let filter_scale = scale.max(1.0);
    let support = kernel.support() * filter_scale;
    (0..out_len)
        .map(|dst| {
            let center = (dst as f64 + 0.5) * scale - 0.5;
            let lo = ((center - support).floor() as isize + 1).max(0) as usize;
            let hi = ((center + support).ceil() as isize - 1).min(in_len as isize - 1);
            let hi = hi.max(lo as isize) as usize;
            let mut weights: Vec<f64> = (lo..=hi)
                .map(|i| kernel.eval((i as f64 - center) / filter_scale))
                .collect();
            let sum: f64 = weights.iter().sum();
            if sum.abs() < 1e-12 {
                // Degenerate window: fall back to the nearest source sample.
                let near = center.round().clamp(0.0, (in_len - 1) as f64) as usize;
                return Taps {
                    start: near,
                    weights: vec![1.0],
                };
            }
            weights.iter_mut().for_each(|w| *w /= sum);
            Taps { start: lo, weights }
        })
        .collect()
}

/// Resamples `image` to `out_h × out_w`, horizontal pass first. Results are
/// clamped to `[0,1]`.
pub fn resample(
    image: &ImageTensor,
    out_h: usize,
    out_w: usize,
    kernel: ResampleKernel,
) -> Result<ImageTensor> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidImage(format!(
            "zero-sized output {out_h}x{out_w}"
        )));
    }
    let (h, w, c) = (image.height(), image.width(), image.channels());
    let src = image.data();

    let xt = kernel_weights(w, out_w, kernel);
    let mut horiz = vec![0.0; h * out_w * c];
    for y in 0..h {
        let in_row = &src[y * w * c..(y + 1) * w * c];
        let out_row = &mut horiz[y * out_w * c..(y + 1) * out_w * c];
        for (x, taps) in xt.iter().enumerate() {
            let px = &mut out_row[x * c..(x + 1) * c];
            for (k, &wt) in taps.weights.iter().enumerate() {
                let s = &in_row[(taps.start + k) * c..(taps.start + k + 1) * c];
                for (o, &v) in px.iter_mut().zip(s) {
                    *o += wt * v;
                }
            }
        }
    }

    let yt = kernel_weights(h, out_h, kernel);
    let stride = out_w * c;
    let mut out = vec![0.0; out_h * stride];
    for (y, taps) in yt.iter().enumerate() {
        let out_row = &mut out[y * stride..(y + 1) * stride];
        for (k, &wt) in taps.weights.iter().enumerate() {
            let r = taps.start + k;
            let in_row = &horiz[r * stride..(r + 1) * stride];
            for (o, &v) in out_row.iter_mut().zip(in_row) {
                *o += wt * v;
            }
        }
    }
    ImageTensor::from_clamped(out_h, out_w, c, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_2x_replicates_blocks() {
        let img = ImageTensor::new(2, 2, 1, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let up = resample(&img, 4, 4, ResampleKernel::Nearest).unwrap();
        #[rustfmt::skip]
        let expected = [
            0.1, 0.1, 0.2, 0.2,
            0.1, 0.1, 0.2, 0.2,
            0.3, 0.3, 0.4, 0.4,
            0.3, 0.3, 0.4, 0.4,
        ];
        assert_eq!(up.data(), &expected);
    }

    #[test]
    fn bilinear_row_upsample() {
        // Source coordinates −0.25, 0.25, 0.75, 1.25.
        let img = ImageTensor::new(1, 2, 1, vec![0.0, 1.0]).unwrap();
        let up = resample(&img, 1, 4, ResampleKernel::Bilinear).unwrap();
        let expected = [0.0, 0.25, 0.75, 1.0];
        for (a, b) in up.data().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12, "{:?}", up.data());
        }
    }

    #[test]
    fn kernel_shapes() {
        assert_eq!(ResampleKernel::Bicubic.eval(0.0), 1.0);
        assert_eq!(ResampleKernel::Bicubic.eval(1.0), 0.0);
        assert_eq!(ResampleKernel::Bicubic.eval(2.0), 0.0);
        assert!((ResampleKernel::Bicubic.eval(0.5) - 0.5625).abs() < 1e-15);
        assert!((ResampleKernel::Bicubic.eval(1.5) + 0.0625).abs() < 1e-15);
        assert_eq!(ResampleKernel::Lanczos3.eval(0.0), 1.0);
        assert!(ResampleKernel::Lanczos3.eval(1.0).abs() < 1e-15);
        assert_eq!(ResampleKernel::Lanczos3.eval(3.0), 0.0);
    }

    #[test]
    fn weights_normalized() {
        for k in ResampleKernel::ALL {
            for (i, o) in [(32, 256), (256, 32), (7, 5), (5, 7), (1, 9), (9, 1)] {
                for t in kernel_weights(i, o, k) {
                    let s: f64 = t.weights.iter().sum();
                    assert!((s - 1.0).abs() < 1e-9);
                    assert!(t.start + t.weights.len() <= i);
                }
            }
        }
    }

    #[test]
    fn zero_output_rejected() {
        let img = ImageTensor::constant(3, 3, 1, 0.5).unwrap();
        assert!(resample(&img, 0, 3, ResampleKernel::Bilinear).is_err());
    }

    #[test]
    fn parse_names() {
        assert_eq!("cubic".parse::<ResampleKernel>().unwrap(), ResampleKernel::Bicubic);
        assert_eq!("lanczos".parse::<ResampleKernel>().unwrap(), ResampleKernel::Lanczos3);
        assert!("box".parse::<ResampleKernel>().is_err());
    }
}
