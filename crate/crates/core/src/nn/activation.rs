use super::Scalar;

/// Probabilities are clamped to this value before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

pub fn relu<T: Scalar>(x: &[T]) -> Vec<T> {
    x.iter().map(|&v| v.max(T::zero())).collect()
}

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Two-way softmax, max-subtracted.
pub fn softmax<T: Scalar>(logits: [T; 2]) -> [T; 2] {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

pub fn cross_entropy<T: Scalar>(probs: [T; 2], label: usize) -> T {
    -probs[label].max(T::from_f64(PROB_FLOOR)).ln()
}
