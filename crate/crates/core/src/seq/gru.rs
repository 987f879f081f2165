use rand::Rng;

use super::gate_pre;
use crate::error::{check_dim, Error, Result};
use crate::nn::init::{glorot_uniform, orthogonal};
use crate::nn::{sigmoid, GradientSet, Matrix, Parameterized, Scalar};
use crate::nn::axpy;
use crate::nn::tensor::{cast_vec, outer_acc};

/// Gated recurrent unit:
///
/// ```text
/// z  = σ(W_z x + U_z h + b_z)
/// r  = σ(W_r x + U_r h + b_r)
/// h̃  = tanh(W_h x + U_h (r ⊙ h) + b_h)
/// h' = (1 − z) ⊙ h + z ⊙ h̃
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Gru<T> {
    pub w_z: Matrix<T>,
    pub u_z: Matrix<T>,
    pub b_z: Vec<T>,
    pub w_r: Matrix<T>,
    pub u_r: Matrix<T>,
    pub b_r: Vec<T>,
    pub w_h: Matrix<T>,
    pub u_h: Matrix<T>,
    pub b_h: Vec<T>,
}

#[derive(Debug, Clone)]
struct StepCache<T> {
    x: Vec<T>,
    h_prev: Vec<T>,
    z: Vec<T>,
    r: Vec<T>,
    candidate: Vec<T>,
    reset_h: Vec<T>,
}

/// Per-step activations saved by [`Gru::encode`].
#[derive(Debug, Clone)]
pub struct GruCache<T> {
    dims: (usize, usize),
    steps: Vec<StepCache<T>>,
}

impl<T> GruCache<T> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

impl<T: Scalar> Gru<T> {
    /// Glorot input matrices, orthogonal recurrent matrices, zero biases.
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        Gru {
            w_z: glorot_uniform(hidden_dim, input_dim, rng),
            u_z: orthogonal(hidden_dim, rng),
            b_z: vec![T::zero(); hidden_dim],
            w_r: glorot_uniform(hidden_dim, input_dim, rng),
            u_r: orthogonal(hidden_dim, rng),
            b_r: vec![T::zero(); hidden_dim],
            w_h: glorot_uniform(hidden_dim, input_dim, rng),
            u_h: orthogonal(hidden_dim, rng),
            b_h: vec![T::zero(); hidden_dim],
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Gru {
            w_z: Matrix::zeros(hidden_dim, input_dim),
            u_z: Matrix::zeros(hidden_dim, hidden_dim),
            b_z: vec![T::zero(); hidden_dim],
            w_r: Matrix::zeros(hidden_dim, input_dim),
            u_r: Matrix::zeros(hidden_dim, hidden_dim),
            b_r: vec![T::zero(); hidden_dim],
            w_h: Matrix::zeros(hidden_dim, input_dim),
            u_h: Matrix::zeros(hidden_dim, hidden_dim),
            b_h: vec![T::zero(); hidden_dim],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_z.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_z.rows()
    }

    fn step_cached(&self, h_prev: &[T], x: &[T]) -> Result<StepCache<T>> {
        check_dim("gru input", self.input_dim(), x.len())?;
        check_dim("gru hidden state", self.hidden_dim(), h_prev.len())?;
        let z: Vec<T> = gate_pre(&self.w_z, x, &self.u_z, h_prev, &self.b_z)
            .into_iter()
            .map(sigmoid)
            .collect();
        let r: Vec<T> = gate_pre(&self.w_r, x, &self.u_r, h_prev, &self.b_r)
            .into_iter()
            .map(sigmoid)
            .collect();
        let reset_h: Vec<T> = r.iter().zip(h_prev).map(|(&a, &b)| a * b).collect();
        let candidate: Vec<T> = gate_pre(&self.w_h, x, &self.u_h, &reset_h, &self.b_h)
            .into_iter()
            .map(|v| v.tanh())
            .collect();
        Ok(StepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            z,
            r,
            candidate,
            reset_h,
        })
    }

    fn step_output(c: &StepCache<T>) -> Vec<T> {
        c.h_prev
            .iter()
            .zip(&c.z)
            .zip(&c.candidate)
            .map(|((&h, &z), &ht)| (T::one() - z) * h + z * ht)
            .collect()
    }

    /// One recurrence step.
    pub fn step(&self, h_prev: &[T], x: &[T]) -> Result<Vec<T>> {
        Ok(Self::step_output(&self.step_cached(h_prev, x)?))
    }

    /// Folds [`Gru::step`] over `seq` from a zero state and returns the final state.
    pub fn encode(&self, seq: &[&[T]]) -> Result<(Vec<T>, GruCache<T>)> {
        if seq.is_empty() {
            return Err(Error::EmptySequence);
        }
        let mut h = vec![T::zero(); self.hidden_dim()];
        let mut steps = Vec::with_capacity(seq.len());
        for x in seq {
            let c = self.step_cached(&h, x)?;
            h = Self::step_output(&c);
            steps.push(c);
        }
        Ok((
            h,
            GruCache {
                dims: (self.input_dim(), self.hidden_dim()),
                steps,
            },
        ))
    }

    pub fn backward(&self, cache: &GruCache<T>, grad_out: &[T]) -> Result<(GradientSet<T>, Vec<Vec<T>>)> {
        let mut grads = GradientSet::zeros_like(self);
        let dx = self.accumulate_backward(cache, grad_out, grads.as_mut_slices())?;
        Ok((grads, dx))
    }

    /// Backpropagation through time. Adds parameter gradients into `grads`
    /// (nine tensors, declaration order) and returns `∂L/∂x_t` for every step.
    pub fn accumulate_backward(
        &self,
        cache: &GruCache<T>,
        grad_out: &[T],
        grads: &mut [Vec<T>],
    ) -> Result<Vec<Vec<T>>> {
        if cache.dims != (self.input_dim(), self.hidden_dim()) {
            return Err(Error::StaleCache);
        }
        check_dim("gru output gradient", self.hidden_dim(), grad_out.len())?;
        check_dim("gradient tensor count", 9, grads.len())?;
        let one = T::one();
        let mut dh = grad_out.to_vec();
        let mut dxs = vec![Vec::new(); cache.steps.len()];
        for (t, c) in cache.steps.iter().enumerate().rev() {
            let n = dh.len();
            let mut dh_prev = vec![T::zero(); n];
            let mut da_z = vec![T::zero(); n];
            let mut da_h = vec![T::zero(); n];
            for k in 0..n {
                let dz = dh[k] * (c.candidate[k] - c.h_prev[k]);
                let dcand = dh[k] * c.z[k];
                dh_prev[k] = dh[k] * (one - c.z[k]);
                da_h[k] = dcand * (one - c.candidate[k] * c.candidate[k]);
                da_z[k] = dz * c.z[k] * (one - c.z[k]);
            }
            let mut d_reset_h = vec![T::zero(); n];
            self.u_h.t_matvec_acc(&da_h, &mut d_reset_h);
            let mut da_r = vec![T::zero(); n];
            for k in 0..n {
                let dr = d_reset_h[k] * c.h_prev[k];
                dh_prev[k] += d_reset_h[k] * c.r[k];
                da_r[k] = dr * c.r[k] * (one - c.r[k]);
            }

            outer_acc(&mut grads[0], &da_z, &c.x);
            outer_acc(&mut grads[1], &da_z, &c.h_prev);
            axpy(one, &da_z, &mut grads[2]);
            outer_acc(&mut grads[3], &da_r, &c.x);
            outer_acc(&mut grads[4], &da_r, &c.h_prev);
            axpy(one, &da_r, &mut grads[5]);
            outer_acc(&mut grads[6], &da_h, &c.x);
            outer_acc(&mut grads[7], &da_h, &c.reset_h);
            axpy(one, &da_h, &mut grads[8]);

            self.u_z.t_matvec_acc(&da_z, &mut dh_prev);
            self.u_r.t_matvec_acc(&da_r, &mut dh_prev);

            let mut dx = vec![T::zero(); self.input_dim()];
            self.w_z.t_matvec_acc(&da_z, &mut dx);
            self.w_r.t_matvec_acc(&da_r, &mut dx);
            self.w_h.t_matvec_acc(&da_h, &mut dx);
            dxs[t] = dx;
            dh = dh_prev;
        }
        Ok(dxs)
    }

    pub fn cast<U: Scalar>(&self) -> Gru<U> {
        Gru {
            w_z: self.w_z.cast(),
            u_z: self.u_z.cast(),
            b_z: cast_vec(&self.b_z),
            w_r: self.w_r.cast(),
            u_r: self.u_r.cast(),
            b_r: cast_vec(&self.b_r),
            w_h: self.w_h.cast(),
            u_h: self.u_h.cast(),
            b_h: cast_vec(&self.b_h),
        }
    }
}

impl<T: Scalar> Parameterized<T> for Gru<T> {
    fn tensors(&self) -> Vec<&[T]> {
        vec![
            self.w_z.as_slice(),
            self.u_z.as_slice(),
            &self.b_z,
            self.w_r.as_slice(),
            self.u_r.as_slice(),
            &self.b_r,
            self.w_h.as_slice(),
            self.u_h.as_slice(),
            &self.b_h,
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        vec![
            self.w_z.as_mut_slice(),
            self.u_z.as_mut_slice(),
            &mut self.b_z,
            self.w_r.as_mut_slice(),
            self.u_r.as_mut_slice(),
            &mut self.b_r,
            self.w_h.as_mut_slice(),
            self.u_h.as_mut_slice(),
            &mut self.b_h,
        ]
    }
}
