//! Recurrent encoders with backpropagation through time: a GRU over
//! sentence-vector sequences and a bidirectional LSTM over word vectors.

mod gru;
mod lstm;

pub use gru::{Gru, GruCache};
pub use lstm::{BiLstm, BiLstmCache, Lstm, LstmCache};

use crate::nn::{Matrix, Scalar};

/// `b + W x + U h`
pub(crate) fn gate_pre<T: Scalar>(w: &Matrix<T>, x: &[T], u: &Matrix<T>, h: &[T], b: &[T]) -> Vec<T> {
    let mut out = b.to_vec();
    w.matvec_acc(x, &mut out);
    u.matvec_acc(h, &mut out);
    out
}
