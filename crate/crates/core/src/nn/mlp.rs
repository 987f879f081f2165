use rand::Rng;

use super::activation::softmax;
use super::init::glorot_uniform;
use super::tensor::{cast_vec, outer_acc};
use super::{GradientSet, Matrix, Parameterized, Scalar};
use crate::error::{check_dim, Error, Result};

/// Affine layer `y = W x + b` with `W` of shape `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    /// Glorot-uniform weights, zero bias.
    pub fn new<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        Dense {
            weight: glorot_uniform(out_dim, in_dim, rng),
            bias: vec![T::zero(); out_dim],
        }
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Dense {
            weight: Matrix::zeros(out_dim, in_dim),
            bias: vec![T::zero(); out_dim],
        }
    }

    pub fn from_parts(weight: Matrix<T>, bias: Vec<T>) -> Result<Self> {
        check_dim("dense bias", weight.rows(), bias.len())?;
        Ok(Dense { weight, bias })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        let mut out = self.bias.clone();
        self.weight.matvec_acc(x, &mut out);
        out
    }

    pub fn cast<U: Scalar>(&self) -> Dense<U> {
        Dense {
            weight: self.weight.cast(),
            bias: cast_vec(&self.bias),
        }
    }
}

impl<T: Scalar> Parameterized<T> for Dense<T> {
    fn tensors(&self) -> Vec<&[T]> {
        vec![self.weight.as_slice(), &self.bias]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        vec![self.weight.as_mut_slice(), &mut self.bias]
    }
}

/// Feed-forward binary classifier: `input → [affine + ReLU]* → affine → softmax(2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    hidden: Vec<Dense<T>>,
    output: Dense<T>,
}

/// Activations saved by [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache<T> {
    shape: Vec<usize>,
    /// Input to every layer: `x, relu(z_1), …, relu(z_H)`.
    inputs: Vec<Vec<T>>,
    /// Hidden pre-activations `z_1 … z_H`.
    pre: Vec<Vec<T>>,
    pub logits: [T; 2],
    pub probs: [T; 2],
}

impl<T: Scalar> MlpCache<T> {
    /// Which hidden units were active (`z > 0`), layer by layer.
    pub fn relu_pattern(&self) -> Vec<bool> {
        self.pre.iter().flatten().map(|&z| z > T::zero()).collect()
    }
}

impl<T: Scalar> Mlp<T> {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden_widths: &[usize], rng: &mut R) -> Self {
        let mut hidden = Vec::with_capacity(hidden_widths.len());
        let mut prev = input_dim;
        for &w in hidden_widths {
            hidden.push(Dense::new(prev, w, rng));
            prev = w;
        }
        let output = Dense::new(prev, 2, rng);
        Mlp { hidden, output }
    }

    pub fn zeros(input_dim: usize, hidden_widths: &[usize]) -> Self {
        let mut hidden = Vec::with_capacity(hidden_widths.len());
        let mut prev = input_dim;
        for &w in hidden_widths {
            hidden.push(Dense::zeros(prev, w));
            prev = w;
        }
        Mlp {
            hidden,
            output: Dense::zeros(prev, 2),
        }
    }

    pub fn from_layers(hidden: Vec<Dense<T>>, output: Dense<T>) -> Result<Self> {
        for pair in hidden.windows(2) {
            check_dim("layer chaining", pair[0].out_dim(), pair[1].in_dim())?;
        }
        if let Some(last) = hidden.last() {
            check_dim("layer chaining", last.out_dim(), output.in_dim())?;
        }
        check_dim("output width", 2, output.out_dim())?;
        Ok(Mlp { hidden, output })
    }

    pub fn input_dim(&self) -> usize {
        self.hidden
            .first()
            .map_or(self.output.in_dim(), |l| l.in_dim())
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.hidden.iter().map(|l| l.out_dim()).collect()
    }

    pub fn hidden_layers(&self) -> &[Dense<T>] {
        &self.hidden
    }

    pub fn output_layer(&self) -> &Dense<T> {
        &self.output
    }

    fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.hidden_widths());
        s
    }

    pub fn forward(&self, x: &[T]) -> Result<([T; 2], MlpCache<T>)> {
        check_dim("classifier input", self.input_dim(), x.len())?;
        let mut inputs = Vec::with_capacity(self.hidden.len() + 1);
        let mut pre = Vec::with_capacity(self.hidden.len());
        inputs.push(x.to_vec());
        for layer in &self.hidden {
            let z = layer.forward(inputs.last().expect("non-empty"));
            inputs.push(z.iter().map(|&v| v.max(T::zero())).collect());
            pre.push(z);
        }
        let out = self.output.forward(inputs.last().expect("non-empty"));
        let logits = [out[0], out[1]];
        let probs = softmax(logits);
        let cache = MlpCache {
            shape: self.shape(),
            inputs,
            pre,
            logits,
            probs,
        };
        Ok((probs, cache))
    }

    /// Gradient of `cross_entropy(forward(x), label)` w.r.t. every parameter.
    pub fn backward(&self, cache: &MlpCache<T>, label: usize) -> Result<GradientSet<T>> {
        let mut grads = GradientSet::zeros_like(self);
        self.accumulate_backward(cache, label, grads.as_mut_slices(), T::one())?;
        Ok(grads)
    }

    /// Adds `scale ·` the parameter gradient into `grads` (this model's
    /// tensors in declaration order) and returns `scale · ∂L/∂x`.
    pub fn accumulate_backward(
        &self,
        cache: &MlpCache<T>,
        label: usize,
        grads: &mut [Vec<T>],
        scale: T,
    ) -> Result<Vec<T>> {
        if label > 1 {
            return Err(Error::config(format!("label must be 0 or 1, got {label}")));
        }
        let mut dlogits = [cache.probs[0] * scale, cache.probs[1] * scale];
        dlogits[label] -= scale;
        self.accumulate_backward_from_logits(cache, dlogits, grads)
    }

    /// Backpropagates an arbitrary seed on the two logits.
    pub fn accumulate_backward_from_logits(
        &self,
        cache: &MlpCache<T>,
        dlogits: [T; 2],
        grads: &mut [Vec<T>],
    ) -> Result<Vec<T>> {
        if cache.shape != self.shape() || cache.inputs.len() != self.hidden.len() + 1 {
            return Err(Error::StaleCache);
        }
        check_dim("gradient tensor count", self.tensors().len(), grads.len())?;
        let n_hidden = self.hidden.len();
        let delta = dlogits.to_vec();
        {
            let (gw, rest) = grads[2 * n_hidden..].split_at_mut(1);
            outer_acc(&mut gw[0], &delta, &cache.inputs[n_hidden]);
            for (gb, d) in rest[0].iter_mut().zip(&delta) {
                *gb += *d;
            }
        }
        let mut da = vec![T::zero(); self.output.in_dim()];
        self.output.weight.t_matvec_acc(&delta, &mut da);
        for k in (0..n_hidden).rev() {
            let dz: Vec<T> = da
                .iter()
                .zip(&cache.pre[k])
                .map(|(&d, &z)| if z > T::zero() { d } else { T::zero() })
                .collect();
            let (gw, rest) = grads[2 * k..].split_at_mut(1);
            outer_acc(&mut gw[0], &dz, &cache.inputs[k]);
            for (gb, d) in rest[0].iter_mut().zip(&dz) {
                *gb += *d;
            }
            let mut prev = vec![T::zero(); self.hidden[k].in_dim()];
            self.hidden[k].weight.t_matvec_acc(&dz, &mut prev);
            da = prev;
        }
        Ok(da)
    }

    pub fn cast<U: Scalar>(&self) -> Mlp<U> {
        Mlp {
            hidden: self.hidden.iter().map(Dense::cast).collect(),
            output: self.output.cast(),
        }
    }
}

impl<T: Scalar> Parameterized<T> for Mlp<T> {
    fn tensors(&self) -> Vec<&[T]> {
        self.hidden
            .iter()
            .chain(std::iter::once(&self.output))
            .flat_map(|l| l.tensors())
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        self.hidden
            .iter_mut()
            .chain(std::iter::once(&mut self.output))
            .flat_map(|l| l.tensors_mut())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::cross_entropy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_model_is_uniform() {
        let m = Mlp::<f64>::zeros(5, &[4, 3]);
        let (p, _) = m.forward(&[1.0, -2.0, 3.0, 0.5, 9.0]).unwrap();
        assert_eq!(p, [0.5, 0.5]);
    }

    #[test]
    fn hand_computed_2_2_2() {
        // W1 = [[1, 0], [0, -1]], b1 = [0.5, 0]; W2 = [[1, 1], [0, 2]], b2 = [0, 0.1]
        let h = Dense::from_parts(Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, -1.0]).unwrap(), vec![0.5, 0.0]).unwrap();
        let o = Dense::from_parts(Matrix::from_vec(2, 2, vec![1.0, 1.0, 0.0, 2.0]).unwrap(), vec![0.0, 0.1]).unwrap();
        let m = Mlp::from_layers(vec![h], o).unwrap();
        // x = [1, -2]: z = [1.5, 2], a = [1.5, 2], logits = [3.5, 4.1]
        let (p, cache) = m.forward(&[1.0, -2.0]).unwrap();
        assert_eq!(cache.logits, [3.5, 4.1]);
        let e = (0.6f64).exp();
        let want_right = e / (1.0 + e);
        assert!((p[1] - want_right).abs() < 1e-12);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn forward_is_bit_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = Mlp::<f32>::new(16, &[8, 4], &mut rng);
        let x: Vec<f32> = (0..16).map(|i| (i as f32 * 0.37).cos()).collect();
        let a = m.forward(&x).unwrap().0;
        let b = m.forward(&x).unwrap().0;
        assert_eq!(a[0].to_bits(), b[0].to_bits());
        assert_eq!(a[1].to_bits(), b[1].to_bits());
    }

    #[test]
    fn output_gradient_is_probs_minus_one_hot() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = Mlp::<f64>::new(6, &[5], &mut rng);
        let x = [0.1, -0.4, 0.8, 0.3, -1.0, 0.5];
        let (p, cache) = m.forward(&x).unwrap();
        let g = m.backward(&cache, 1).unwrap();
        let gb_out = &g.as_slices()[3];
        assert!((gb_out[0] - p[0]).abs() < 1e-15);
        assert!((gb_out[1] - (p[1] - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn zero_input_gives_zero_first_layer_weight_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = Mlp::<f64>::new(6, &[5, 3], &mut rng);
        let (_, cache) = m.forward(&[0.0; 6]).unwrap();
        let g = m.backward(&cache, 0).unwrap();
        assert!(g.as_slices()[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_and_cache_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = Mlp::<f64>::new(4, &[3], &mut rng);
        assert!(matches!(m.forward(&[0.0; 3]), Err(Error::Dimension { .. })));
        let other = Mlp::<f64>::new(4, &[2], &mut rng);
        let (_, cache) = other.forward(&[0.0; 4]).unwrap();
        assert!(matches!(m.backward(&cache, 0), Err(Error::StaleCache)));
    }

    #[test]
    fn loss_is_cross_entropy_of_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = Mlp::<f64>::new(3, &[4], &mut rng);
        let (p, _) = m.forward(&[1.0, 2.0, 3.0]).unwrap();
        assert!(cross_entropy(p, 0) >= 0.0);
    }
}
