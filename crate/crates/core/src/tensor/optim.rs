use super::Tensor;
use crate::error::{G2pError, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    /// Global L2 norm of the gradients before clipping.
    pub grad_norm: f64,
    pub clipped: bool,
}

/// Rescales all gradients so that their joint L2 norm is at most
/// `threshold`. Returns the norm measured before scaling.
pub fn clip_global_norm<T: Scalar>(grads: &mut [Tensor<T>], threshold: T) -> T {
    let norm = grads.iter().map(Tensor::squared_norm).sum::<T>().sqrt();
    if norm > threshold && norm > T::zero() {
        let scale = threshold / norm;
        for g in grads.iter_mut() {
            for v in g.data_mut() {
                *v *= scale;
            }
        }
    }
    norm
}

/// Plain SGD, `w ← w − lr·g`, after optional global-norm clipping.
///
/// Parameters are left untouched if any gradient is non-finite.
pub fn sgd_step<T: Scalar>(
    params: &mut [&mut Tensor<T>],
    mut grads: Vec<Tensor<T>>,
    lr: T,
    clip: Option<T>,
) -> Result<StepStats> {
    if params.len() != grads.len() {
        return Err(G2pError::InvalidArgument(format!(
            "{} parameters but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    for (p, g) in params.iter().zip(&grads) {
        if p.shape() != g.shape() {
            return Err(G2pError::Shape {
                op: "sgd_step",
                left: p.shape().to_vec(),
                right: g.shape().to_vec(),
            });
        }
        if !g.is_finite() {
            return Err(G2pError::NonFinite("gradient".into()));
        }
    }
    let (norm, clipped) = match clip {
        Some(threshold) => {
            let norm = clip_global_norm(&mut grads, threshold);
            (norm, norm > threshold)
        }
        None => (grads.iter().map(Tensor::squared_norm).sum::<T>().sqrt(), false),
    };
    if lr != T::zero() {
        for (p, g) in params.iter_mut().zip(&grads) {
            for (w, &d) in p.data_mut().iter_mut().zip(g.data()) {
                *w -= lr * d;
            }
        }
    }
    Ok(StepStats {
        grad_norm: norm.to_f64_lossy(),
        clipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_weight_update() {
        let mut w = Tensor::<f64>::scalar(1.0);
        sgd_step(&mut [&mut w], vec![Tensor::scalar(0.25)], 1.0, Some(5.0)).unwrap();
        assert_eq!(w.item(), 0.75);
    }

    #[test]
    fn zero_gradient_and_zero_lr_are_identity() {
        let mut w = Tensor::<f32>::vector(vec![0.3, -0.7]);
        let before = w.clone();
        sgd_step(&mut [&mut w], vec![Tensor::zeros(&[2])], 1.0, Some(5.0)).unwrap();
        assert_eq!(w, before);
        sgd_step(&mut [&mut w], vec![Tensor::vector(vec![3.0, 9.0])], 0.0, Some(5.0)).unwrap();
        assert_eq!(w, before);
    }

    #[test]
    fn clipping_halves_norm_ten_gradients() {
        // Two tensors, joint norm sqrt(36 + 64) = 10.
        let mut a = Tensor::<f64>::scalar(0.0);
        let mut b = Tensor::<f64>::scalar(0.0);
        let stats = sgd_step(
            &mut [&mut a, &mut b],
            vec![Tensor::scalar(6.0), Tensor::scalar(8.0)],
            1.0,
            Some(5.0),
        )
        .unwrap();
        assert!(stats.clipped);
        assert!((stats.grad_norm - 10.0).abs() < 1e-12);
        assert!((a.item() + 3.0).abs() < 1e-12);
        assert!((b.item() + 4.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_aborts_without_update() {
        let mut w = Tensor::<f64>::vector(vec![1.0, 2.0]);
        let err = sgd_step(&mut [&mut w], vec![Tensor::vector(vec![f64::NAN, 0.0])], 1.0, None);
        assert!(matches!(err, Err(G2pError::NonFinite(_))));
        assert_eq!(w.data(), &[1.0, 2.0]);
    }
}
