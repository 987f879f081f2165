//! Dense layers, activations, softmax cross-entropy and SGD, with hand-derived
//! backpropagation. Everything is generic over [`Scalar`] so the same code
//! trains in `f32` and is gradient-checked in `f64`.

mod activation;
pub mod gradcheck;
pub mod init;
mod mlp;
mod params;
pub(crate) mod tensor;

pub use activation::{cross_entropy, relu, sigmoid, softmax, PROB_FLOOR};
pub use gradcheck::{grad_check, Differentiable, GradCheckReport};
pub use mlp::{Dense, Mlp, MlpCache};
pub use params::{sgd_step, GradientSet, Parameterized, SgdConfig};
pub use tensor::{axpy, dot, Matrix};

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::Float;

/// Floating point type the networks are generic over (`f32` or `f64`).
pub trait Scalar:
    Float + Sum + Debug + Default + AddAssign + SubAssign + MulAssign + Send + Sync + 'static
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

/// Class index of the `right` ending in every two-way output.
pub const RIGHT: usize = 1;
/// Class index of the `wrong` ending.
pub const WRONG: usize = 0;
