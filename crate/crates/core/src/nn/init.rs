//! Weight initializers.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Matrix, Scalar};

/// Uniform Glorot: `U(−a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<T: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix<T> {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| T::from_f64(rng.random_range(-a..a)))
}

/// Random orthogonal `n × n` matrix: modified Gram-Schmidt over the rows of a
/// Gaussian matrix, done in `f64`.
pub fn orthogonal<T: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Matrix<T> {
    let mut rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| StandardNormal.sample(rng)).collect())
        .collect();
    for i in 0..n {
        let (done, rest) = rows.split_at_mut(i);
        let v = &mut rest[0];
        // two passes keep the basis orthogonal to working precision
        for _ in 0..2 {
            for q in done.iter() {
                let proj = super::dot(q, v);
                super::axpy(-proj, q, v);
            }
        }
        let norm = super::dot(v, v).sqrt();
        if norm < 1e-12 {
            // degenerate draw; practically unreachable
            v.iter_mut().for_each(|x| *x = 0.0);
            v[i] = 1.0;
        } else {
            v.iter_mut().for_each(|x| *x /= norm);
        }
    }
    Matrix::from_fn(n, n, |r, c| T::from_f64(rows[r][c]))
}
