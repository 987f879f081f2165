use super::Scalar;
use crate::error::{check_dim, Error, Result};

/// Access to a model's parameter tensors as flat slices, in declaration order.
///
/// The order is stable: it is the order used by gradient buffers, SGD and the
/// checkpoint format.
pub trait Parameterized<T: Scalar> {
    fn tensors(&self) -> Vec<&[T]>;
    fn tensors_mut(&mut self) -> Vec<&mut [T]>;

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Gradient buffers mirroring the tensors of a [`Parameterized`] owner.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet<T> {
    tensors: Vec<Vec<T>>,
}

impl<T: Scalar> GradientSet<T> {
    pub fn zeros_like<P: Parameterized<T> + ?Sized>(owner: &P) -> Self {
        GradientSet {
            tensors: owner
                .tensors()
                .iter()
                .map(|t| vec![T::zero(); t.len()])
                .collect(),
        }
    }

    pub fn zero(&mut self) {
        for t in &mut self.tensors {
            t.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    pub fn scale(&mut self, factor: T) {
        for t in &mut self.tensors {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn check_shapes<P: Parameterized<T> + ?Sized>(&self, owner: &P) -> Result<()> {
        let shapes = owner.tensors();
        check_dim("gradient tensor count", shapes.len(), self.tensors.len())?;
        for (g, p) in self.tensors.iter().zip(&shapes) {
            check_dim("gradient tensor length", p.len(), g.len())?;
        }
        Ok(())
    }

    pub fn as_slices(&self) -> &[Vec<T>] {
        &self.tensors
    }

    pub fn as_mut_slices(&mut self) -> &mut [Vec<T>] {
        &mut self.tensors
    }

    pub fn flatten(&self) -> Vec<T> {
        self.tensors.iter().flatten().copied().collect()
    }

    pub fn is_zero(&self) -> bool {
        self.tensors
            .iter()
            .all(|t| t.iter().all(|v| *v == T::zero()))
    }
}

impl<T: Scalar> Parameterized<T> for GradientSet<T> {
    fn tensors(&self) -> Vec<&[T]> {
        self.tensors.iter().map(|t| t.as_slice()).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        self.tensors.iter_mut().map(|t| t.as_mut_slice()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub learning_rate: f64,
}

impl SgdConfig {
    pub fn new(learning_rate: f64) -> Result<Self> {
        if learning_rate > 0.0 && learning_rate.is_finite() {
            Ok(SgdConfig { learning_rate })
        } else {
            Err(Error::config(format!(
                "learning rate must be positive, got {learning_rate}"
            )))
        }
    }
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            learning_rate: 0.01,
        }
    }
}

/// `p ← p − lr · g` for every parameter.
pub fn sgd_step<T: Scalar, P: Parameterized<T> + ?Sized>(
    params: &mut P,
    grads: &GradientSet<T>,
    cfg: &SgdConfig,
) -> Result<()> {
    grads.check_shapes(params)?;
    let lr = T::from_f64(cfg.learning_rate);
    for (p, g) in params.tensors_mut().into_iter().zip(&grads.tensors) {
        for (pv, &gv) in p.iter_mut().zip(g) {
            *pv -= lr * gv;
        }
    }
    Ok(())
}
