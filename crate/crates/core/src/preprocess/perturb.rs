//! Gradient-sign input perturbation that lowers the detector distance:
//! `x̂ = clamp(x − ε·sign(∇ₓ d(x)), 0, 1)` with `sign(0) = 0`.

use super::image::ImageTensor;
use crate::error::{Error, Result};
use crate::gaussian::MahalanobisModel;

/// Supplies `∇ₓ d(x)`, the gradient of the detector distance with respect to
/// input pixels, flattened in the image's H×W×C order.
pub trait GradientProvider {
    fn gradient(&self, x: &ImageTensor) -> Result<Vec<f64>>;
}

impl<F> GradientProvider for F
where
    F: Fn(&ImageTensor) -> Result<Vec<f64>>,
{
    fn gradient(&self, x: &ImageTensor) -> Result<Vec<f64>> {
        self(x)
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// One gradient-sign step of size `epsilon` against the distance gradient.
pub fn perturb_input(
    x: &ImageTensor,
    grad: &impl GradientProvider,
    epsilon: f64,
) -> Result<ImageTensor> {
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be finite and >= 0, got {epsilon}"
        )));
    }
    let g = grad.gradient(x)?;
    if g.len() != x.len() {
        return Err(Error::GradientShape {
            expected: x.len(),
            got: g.len(),
        });
    }
    let data = x
        .data()
        .iter()
        .zip(&g)
        .map(|(&v, &gi)| v - epsilon * sign(gi))
        .collect();
    ImageTensor::from_clamped(x.height(), x.width(), x.channels(), data)
}

/// Linear feature extractor `f(x) = W·x` composed with a fitted
/// [`MahalanobisModel`]; the gradient is `Wᵀ·2Σ⁻¹(W·x − μ_m̂)`.
///
/// `m̂` is the cluster with the smallest Mahalanobis distance and `Σ` is the
/// covariance the model was fitted with (tied or that cluster's own).
#[derive(Debug, Clone)]
pub struct LinearExtractor<'a> {
    /// D×P row-major, P = pixel count.
    weights: Vec<f64>,
    pixels: usize,
    model: &'a MahalanobisModel,
}

impl<'a> LinearExtractor<'a> {
    pub fn new(weights: Vec<f64>, pixels: usize, model: &'a MahalanobisModel) -> Result<Self> {
        let d = model.dim();
        if weights.len() != d * pixels {
            return Err(Error::DimensionMismatch {
                expected: d * pixels,
                got: weights.len(),
            });
        }
        Ok(Self {
            weights,
            pixels,
            model,
        })
    }

    pub fn features(&self, x: &ImageTensor) -> Result<Vec<f64>> {
        if x.len() != self.pixels {
            return Err(Error::DimensionMismatch {
                expected: self.pixels,
                got: x.len(),
            });
        }
        Ok(self
            .weights
            .chunks_exact(self.pixels)
            .map(|w| w.iter().zip(x.data()).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Detector distance of the extracted features.
    pub fn distance(&self, x: &ImageTensor) -> Result<f64> {
        self.model.score(&self.features(x)?)
    }
}

impl GradientProvider for LinearExtractor<'_> {
    fn gradient(&self, x: &ImageTensor) -> Result<Vec<f64>> {
        let gz = self.model.score_gradient(&self.features(x)?)?;
        let mut gx = vec![0.0; self.pixels];
        for (w, &g) in self.weights.chunks_exact(self.pixels).zip(&gz) {
            for (o, &wi) in gx.iter_mut().zip(w) {
                *o += wi * g;
            }
        }
        Ok(gx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_grad(g: Vec<f64>) -> impl Fn(&ImageTensor) -> Result<Vec<f64>> {
        move |_| Ok(g.clone())
    }

    #[test]
    fn zero_gradient_is_identity() {
        let x = ImageTensor::new(1, 3, 1, vec![0.2, 0.5, 0.9]).unwrap();
        let y = perturb_input(&x, &constant_grad(vec![0.0; 3]), 0.01).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn signs_move_pixels_opposite_to_gradient() {
        let x = ImageTensor::new(1, 2, 1, vec![0.5, 0.5]).unwrap();
        let y = perturb_input(&x, &constant_grad(vec![3.0, -3.0]), 0.01).unwrap();
        assert!((y.data()[0] - 0.49).abs() < 1e-15);
        assert!((y.data()[1] - 0.51).abs() < 1e-15);
    }

    #[test]
    fn epsilon_zero_identity_and_clamp() {
        let x = ImageTensor::new(1, 2, 1, vec![0.0, 1.0]).unwrap();
        let g = constant_grad(vec![1.0, -1.0]);
        assert_eq!(perturb_input(&x, &g, 0.0).unwrap(), x);
        assert_eq!(perturb_input(&x, &g, 0.5).unwrap(), x);
    }

    #[test]
    fn shape_mismatch() {
        let x = ImageTensor::new(1, 2, 1, vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            perturb_input(&x, &constant_grad(vec![1.0]), 0.1),
            Err(Error::GradientShape { expected: 2, got: 1 })
        ));
        assert!(perturb_input(&x, &constant_grad(vec![1.0, 1.0]), -0.1).is_err());
    }
}
