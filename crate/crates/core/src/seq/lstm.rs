use rand::Rng;

use super::gate_pre;
use crate::error::{check_dim, Error, Result};
use crate::nn::init::{glorot_uniform, orthogonal};
use crate::nn::tensor::{cast_vec, outer_acc};
use crate::nn::{axpy, sigmoid, GradientSet, Matrix, Parameterized, Scalar};

/// LSTM without peepholes. Gates in declaration order: input, forget, output,
/// candidate.
///
/// ```text
/// i, f, o = σ(W x + U h + b)
/// g       = tanh(W_g x + U_g h + b_g)
/// c'      = f ⊙ c + i ⊙ g
/// h'      = o ⊙ tanh(c')
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm<T> {
    pub w_i: Matrix<T>,
    pub u_i: Matrix<T>,
    pub b_i: Vec<T>,
    pub w_f: Matrix<T>,
    pub u_f: Matrix<T>,
    pub b_f: Vec<T>,
    pub w_o: Matrix<T>,
    pub u_o: Matrix<T>,
    pub b_o: Vec<T>,
    pub w_g: Matrix<T>,
    pub u_g: Matrix<T>,
    pub b_g: Vec<T>,
}

#[derive(Debug, Clone)]
struct StepCache<T> {
    x: Vec<T>,
    h_prev: Vec<T>,
    c_prev: Vec<T>,
    i: Vec<T>,
    f: Vec<T>,
    o: Vec<T>,
    g: Vec<T>,
    c_tanh: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct LstmCache<T> {
    dims: (usize, usize),
    steps: Vec<StepCache<T>>,
}

impl<T: Scalar> Lstm<T> {
    /// Glorot input matrices, orthogonal recurrent matrices, zero biases
    /// except the forget gate at +1.
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let mut gate = |bias: T| {
            (
                glorot_uniform(hidden_dim, input_dim, rng),
                orthogonal(hidden_dim, rng),
                vec![bias; hidden_dim],
            )
        };
        let (w_i, u_i, b_i) = gate(T::zero());
        let (w_f, u_f, b_f) = gate(T::one());
        let (w_o, u_o, b_o) = gate(T::zero());
        let (w_g, u_g, b_g) = gate(T::zero());
        Lstm {
            w_i,
            u_i,
            b_i,
            w_f,
            u_f,
            b_f,
            w_o,
            u_o,
            b_o,
            w_g,
            u_g,
            b_g,
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let w = || Matrix::zeros(hidden_dim, input_dim);
        let u = || Matrix::zeros(hidden_dim, hidden_dim);
        let b = || vec![T::zero(); hidden_dim];
        Lstm {
            w_i: w(),
            u_i: u(),
            b_i: b(),
            w_f: w(),
            u_f: u(),
            b_f: b(),
            w_o: w(),
            u_o: u(),
            b_o: b(),
            w_g: w(),
            u_g: u(),
            b_g: b(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_i.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_i.rows()
    }

    fn step_cached(&self, h_prev: &[T], c_prev: &[T], x: &[T]) -> Result<(StepCache<T>, Vec<T>, Vec<T>)> {
        check_dim("lstm input", self.input_dim(), x.len())?;
        check_dim("lstm hidden state", self.hidden_dim(), h_prev.len())?;
        check_dim("lstm cell state", self.hidden_dim(), c_prev.len())?;
        let sig = |v: Vec<T>| v.into_iter().map(sigmoid).collect::<Vec<T>>();
        let i = sig(gate_pre(&self.w_i, x, &self.u_i, h_prev, &self.b_i));
        let f = sig(gate_pre(&self.w_f, x, &self.u_f, h_prev, &self.b_f));
        let o = sig(gate_pre(&self.w_o, x, &self.u_o, h_prev, &self.b_o));
        let g: Vec<T> = gate_pre(&self.w_g, x, &self.u_g, h_prev, &self.b_g)
            .into_iter()
            .map(|v| v.tanh())
            .collect();
        let c: Vec<T> = (0..g.len()).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
        let c_tanh: Vec<T> = c.iter().map(|v| v.tanh()).collect();
        let h: Vec<T> = o.iter().zip(&c_tanh).map(|(&a, &b)| a * b).collect();
        let cache = StepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            i,
            f,
            o,
            g,
            c_tanh,
        };
        Ok((cache, h, c))
    }

    /// One recurrence step, returning `(h', c')`.
    pub fn step(&self, h_prev: &[T], c_prev: &[T], x: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        let (_, h, c) = self.step_cached(h_prev, c_prev, x)?;
        Ok((h, c))
    }

    /// Runs over `seq` from zero state; returns the final hidden state.
    pub fn run(&self, seq: &[&[T]]) -> Result<(Vec<T>, LstmCache<T>)> {
        if seq.is_empty() {
            return Err(Error::EmptySequence);
        }
        let n = self.hidden_dim();
        let (mut h, mut c) = (vec![T::zero(); n], vec![T::zero(); n]);
        let mut steps = Vec::with_capacity(seq.len());
        for x in seq {
            let (sc, h2, c2) = self.step_cached(&h, &c, x)?;
            steps.push(sc);
            h = h2;
            c = c2;
        }
        Ok((
            h,
            LstmCache {
                dims: (self.input_dim(), n),
                steps,
            },
        ))
    }

    /// Adds parameter gradients into `grads` (twelve tensors) and returns the
    /// gradient for every input step.
    pub fn accumulate_backward(
        &self,
        cache: &LstmCache<T>,
        grad_out: &[T],
        grads: &mut [Vec<T>],
    ) -> Result<Vec<Vec<T>>> {
        if cache.dims != (self.input_dim(), self.hidden_dim()) {
            return Err(Error::StaleCache);
        }
        check_dim("lstm output gradient", self.hidden_dim(), grad_out.len())?;
        check_dim("gradient tensor count", 12, grads.len())?;
        let one = T::one();
        let n = self.hidden_dim();
        let mut dh = grad_out.to_vec();
        let mut dc = vec![T::zero(); n];
        let mut dxs = vec![Vec::new(); cache.steps.len()];
        for (t, s) in cache.steps.iter().enumerate().rev() {
            let mut da_i = vec![T::zero(); n];
            let mut da_f = vec![T::zero(); n];
            let mut da_o = vec![T::zero(); n];
            let mut da_g = vec![T::zero(); n];
            let mut dc_prev = vec![T::zero(); n];
            for k in 0..n {
                let d_o = dh[k] * s.c_tanh[k];
                let dck = dc[k] + dh[k] * s.o[k] * (one - s.c_tanh[k] * s.c_tanh[k]);
                let d_i = dck * s.g[k];
                let d_g = dck * s.i[k];
                let d_f = dck * s.c_prev[k];
                dc_prev[k] = dck * s.f[k];
                da_i[k] = d_i * s.i[k] * (one - s.i[k]);
                da_f[k] = d_f * s.f[k] * (one - s.f[k]);
                da_o[k] = d_o * s.o[k] * (one - s.o[k]);
                da_g[k] = d_g * (one - s.g[k] * s.g[k]);
            }
            let mut dh_prev = vec![T::zero(); n];
            let mut dx = vec![T::zero(); self.input_dim()];
            let gates = [
                (&self.w_i, &self.u_i, &da_i),
                (&self.w_f, &self.u_f, &da_f),
                (&self.w_o, &self.u_o, &da_o),
                (&self.w_g, &self.u_g, &da_g),
            ];
            for (gi, (w, u, da)) in gates.into_iter().enumerate() {
                outer_acc(&mut grads[3 * gi], da, &s.x);
                outer_acc(&mut grads[3 * gi + 1], da, &s.h_prev);
                axpy(one, da, &mut grads[3 * gi + 2]);
                u.t_matvec_acc(da, &mut dh_prev);
                w.t_matvec_acc(da, &mut dx);
            }
            dxs[t] = dx;
            dh = dh_prev;
            dc = dc_prev;
        }
        Ok(dxs)
    }

    pub fn cast<U: Scalar>(&self) -> Lstm<U> {
        Lstm {
            w_i: self.w_i.cast(),
            u_i: self.u_i.cast(),
            b_i: cast_vec(&self.b_i),
            w_f: self.w_f.cast(),
            u_f: self.u_f.cast(),
            b_f: cast_vec(&self.b_f),
            w_o: self.w_o.cast(),
            u_o: self.u_o.cast(),
            b_o: cast_vec(&self.b_o),
            w_g: self.w_g.cast(),
            u_g: self.u_g.cast(),
            b_g: cast_vec(&self.b_g),
        }
    }
}

impl<T: Scalar> Parameterized<T> for Lstm<T> {
    fn tensors(&self) -> Vec<&[T]> {
        vec![
            self.w_i.as_slice(),
            self.u_i.as_slice(),
            &self.b_i,
            self.w_f.as_slice(),
            self.u_f.as_slice(),
            &self.b_f,
            self.w_o.as_slice(),
            self.u_o.as_slice(),
            &self.b_o,
            self.w_g.as_slice(),
            self.u_g.as_slice(),
            &self.b_g,
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        vec![
            self.w_i.as_mut_slice(),
            self.u_i.as_mut_slice(),
            &mut self.b_i,
            self.w_f.as_mut_slice(),
            self.u_f.as_mut_slice(),
            &mut self.b_f,
            self.w_o.as_mut_slice(),
            self.u_o.as_mut_slice(),
            &mut self.b_o,
            self.w_g.as_mut_slice(),
            self.u_g.as_mut_slice(),
            &mut self.b_g,
        ]
    }
}

/// Two LSTMs reading a word sequence in opposite directions; the sentence
/// vector is `[forward final h ; backward final h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstm<T> {
    pub forward: Lstm<T>,
    pub backward: Lstm<T>,
}

#[derive(Debug, Clone)]
pub struct BiLstmCache<T> {
    forward: LstmCache<T>,
    backward: LstmCache<T>,
}

impl<T: Scalar> BiLstm<T> {
    pub fn new<R: Rng + ?Sized>(word_dim: usize, hidden_per_direction: usize, rng: &mut R) -> Self {
        BiLstm {
            forward: Lstm::new(word_dim, hidden_per_direction, rng),
            backward: Lstm::new(word_dim, hidden_per_direction, rng),
        }
    }

    /// Both directions share one parameter set (copied, not aliased).
    pub fn tied(lstm: Lstm<T>) -> Self {
        BiLstm {
            forward: lstm.clone(),
            backward: lstm,
        }
    }

    pub fn word_dim(&self) -> usize {
        self.forward.input_dim()
    }

    pub fn hidden_per_direction(&self) -> usize {
        self.forward.hidden_dim()
    }

    pub fn output_dim(&self) -> usize {
        2 * self.hidden_per_direction()
    }

    pub fn encode(&self, words: &[&[T]]) -> Result<(Vec<T>, BiLstmCache<T>)> {
        let (hf, cf) = self.forward.run(words)?;
        let reversed: Vec<&[T]> = words.iter().rev().copied().collect();
        let (hb, cb) = self.backward.run(&reversed)?;
        let mut out = hf;
        out.extend(hb);
        Ok((
            out,
            BiLstmCache {
                forward: cf,
                backward: cb,
            },
        ))
    }

    pub fn backward(&self, cache: &BiLstmCache<T>, grad_out: &[T]) -> Result<(GradientSet<T>, Vec<Vec<T>>)> {
        let mut grads = GradientSet::zeros_like(self);
        let dx = self.accumulate_backward(cache, grad_out, grads.as_mut_slices())?;
        Ok((grads, dx))
    }

    /// Gradients for both directions (24 tensors); returns per-word input
    /// gradients in the original word order.
    pub fn accumulate_backward(
        &self,
        cache: &BiLstmCache<T>,
        grad_out: &[T],
        grads: &mut [Vec<T>],
    ) -> Result<Vec<Vec<T>>> {
        check_dim("bilstm output gradient", self.output_dim(), grad_out.len())?;
        check_dim("gradient tensor count", 24, grads.len())?;
        if cache.forward.steps.len() != cache.backward.steps.len() {
            return Err(Error::StaleCache);
        }
        let h = self.hidden_per_direction();
        let (gf, gb) = grads.split_at_mut(12);
        let mut dx = self.forward.accumulate_backward(&cache.forward, &grad_out[..h], gf)?;
        let db = self.backward.accumulate_backward(&cache.backward, &grad_out[h..], gb)?;
        let n = dx.len();
        for (t, d) in db.into_iter().enumerate() {
            axpy(T::one(), &d, &mut dx[n - 1 - t]);
        }
        Ok(dx)
    }

    pub fn cast<U: Scalar>(&self) -> BiLstm<U> {
        BiLstm {
            forward: self.forward.cast(),
            backward: self.backward.cast(),
        }
    }
}

impl<T: Scalar> Parameterized<T> for BiLstm<T> {
    fn tensors(&self) -> Vec<&[T]> {
        let mut t = self.forward.tensors();
        t.extend(self.backward.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut t = self.forward.tensors_mut();
        t.extend(self.backward.tensors_mut());
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn randn(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| StandardNormal.sample(rng)).collect()
    }

    #[test]
    fn zero_parameters_closed_form() {
        let l = Lstm::<f64>::zeros(3, 2);
        let c_prev = [0.8, -2.0];
        let (h, c) = l.step(&[0.1, 0.2], &c_prev, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(c, vec![0.4, -1.0]);
        assert_eq!(h, vec![0.5 * (0.4f64).tanh(), 0.5 * (-1.0f64).tanh()]);
    }

    #[test]
    fn hand_computed_dim_2() {
        let m = |v: [f64; 4]| Matrix::from_vec(2, 2, v.to_vec()).unwrap();
        let mut l = Lstm::<f64>::zeros(2, 2);
        l.w_i = m([0.2, 0.0, 0.0, -0.1]);
        l.u_f = m([0.3, 0.1, 0.0, 0.2]);
        l.b_f = vec![1.0, 1.0];
        l.w_o = m([0.0, 0.5, 0.5, 0.0]);
        l.w_g = m([1.0, -1.0, 0.4, 0.4]);
        l.b_g = vec![0.1, 0.0];
        let (x, h, c) = ([2.0, 1.0], [0.5, -0.5], [0.3, 0.6]);
        let s = |v: f64| 1.0 / (1.0 + (-v).exp());
        let i = [s(0.4), s(-0.1)];
        let f = [s(0.15 - 0.05 + 1.0), s(-0.1 + 1.0)];
        let o = [s(0.5), s(1.0)];
        let g = [(1.1f64).tanh(), (1.2f64).tanh()];
        let c_want = [f[0] * 0.3 + i[0] * g[0], f[1] * 0.6 + i[1] * g[1]];
        let h_want = [o[0] * c_want[0].tanh(), o[1] * c_want[1].tanh()];
        let (h2, c2) = l.step(&h, &c, &x).unwrap();
        for k in 0..2 {
            assert!((c2[k] - c_want[k]).abs() < 1e-14);
            assert!((h2[k] - h_want[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn hidden_components_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let l = Lstm::<f64>::new(4, 3, &mut rng);
        let words: Vec<Vec<f64>> = (0..20).map(|_| randn(4, &mut rng)).collect();
        let seq: Vec<&[f64]> = words.iter().map(|w| w.as_slice()).collect();
        let (h, _) = l.run(&seq).unwrap();
        assert!(h.iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let l = Lstm::<f32>::new(4, 3, &mut rng);
        assert!(l.b_f.iter().all(|&b| b == 1.0));
        assert!(l.b_i.iter().chain(&l.b_o).chain(&l.b_g).all(|&b| b == 0.0));
    }

    #[test]
    fn single_word_is_one_step_each_way() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let bi = BiLstm::<f64>::new(3, 2, &mut rng);
        let w = randn(3, &mut rng);
        let (out, _) = bi.encode(&[&w]).unwrap();
        let (hf, _) = bi.forward.step(&[0.0; 2], &[0.0; 2], &w).unwrap();
        let (hb, _) = bi.backward.step(&[0.0; 2], &[0.0; 2], &w).unwrap();
        assert_eq!(out, [hf, hb].concat());
    }

    #[test]
    fn tied_directions_swap_under_reversal() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let bi = BiLstm::tied(Lstm::<f64>::new(3, 2, &mut rng));
        let words: Vec<Vec<f64>> = (0..5).map(|_| randn(3, &mut rng)).collect();
        let fwd: Vec<&[f64]> = words.iter().map(|w| w.as_slice()).collect();
        let rev: Vec<&[f64]> = fwd.iter().rev().copied().collect();
        let (a, _) = bi.encode(&fwd).unwrap();
        let (b, _) = bi.encode(&rev).unwrap();
        assert_eq!(&a[..2], &b[2..]);
        assert_eq!(&a[2..], &b[..2]);
        assert_ne!(&a[..2], &a[2..]);
    }

    #[test]
    fn output_dimension_is_twice_hidden() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let bi = BiLstm::<f32>::new(3, 5, &mut rng);
        for len in 1..6 {
            let words: Vec<Vec<f32>> = (0..len).map(|i| vec![i as f32; 3]).collect();
            let seq: Vec<&[f32]> = words.iter().map(|w| w.as_slice()).collect();
            assert_eq!(bi.encode(&seq).unwrap().0.len(), 10);
        }
    }

    #[test]
    fn zero_seed_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let bi = BiLstm::<f64>::new(3, 2, &mut rng);
        let words: Vec<Vec<f64>> = (0..4).map(|_| randn(3, &mut rng)).collect();
        let seq: Vec<&[f64]> = words.iter().map(|w| w.as_slice()).collect();
        let (_, cache) = bi.encode(&seq).unwrap();
        let (g, dx) = bi.backward(&cache, &[0.0; 4]).unwrap();
        assert!(g.is_zero());
        assert_eq!(dx.len(), 4);
        assert!(dx.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_word_sequence_is_an_error() {
        let bi = BiLstm::<f64>::tied(Lstm::zeros(2, 2));
        assert!(matches!(bi.encode(&[]), Err(Error::EmptySequence)));
    }
}
