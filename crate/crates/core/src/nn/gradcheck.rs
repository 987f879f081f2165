//! Central-difference gradient checking in double precision.

use super::{cross_entropy, GradientSet, Mlp, Parameterized};
use crate::error::Result;

/// A scalar loss over `f64` parameters with an analytic gradient.
pub trait Differentiable: Parameterized<f64> {
    type Input: ?Sized;

    fn loss(&self, input: &Self::Input, label: usize) -> Result<f64>;

    fn gradient(&self, input: &Self::Input, label: usize) -> Result<GradientSet<f64>>;

    /// Branch taken at every non-smooth point of the loss, e.g. ReLU
    /// on/off flags. A parameter whose `±eps` probes change this pattern
    /// straddles a kink; central differences are meaningless there, so the
    /// entry is skipped.
    fn kink_pattern(&self, _input: &Self::Input) -> Result<Vec<bool>> {
        Ok(Vec::new())
    }
}

impl Differentiable for Mlp<f64> {
    type Input = [f64];

    fn loss(&self, input: &[f64], label: usize) -> Result<f64> {
        Ok(cross_entropy(self.forward(input)?.0, label))
    }

    fn gradient(&self, input: &[f64], label: usize) -> Result<GradientSet<f64>> {
        let (_, cache) = self.forward(input)?;
        self.backward(&cache, label)
    }

    fn kink_pattern(&self, input: &[f64]) -> Result<Vec<bool>> {
        Ok(self.forward(input)?.1.relu_pattern())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Max over checked parameters of `|a − n| / max(|a|, |n|, 1e-8)`.
    pub max_rel_error: f64,
    /// `(tensor, index)` of the worst parameter.
    pub worst: Option<(usize, usize)>,
    /// `(analytic, numeric)` at the worst parameter.
    pub worst_values: Option<(f64, f64)>,
    pub checked: usize,
    /// Entries skipped because their finite-difference stencil crossed a kink.
    pub skipped: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Checks every parameter.
pub fn grad_check<M: Differentiable>(
    model: &mut M,
    input: &M::Input,
    label: usize,
    eps: f64,
) -> Result<GradCheckReport> {
    grad_check_sampled(model, input, label, eps, usize::MAX)
}

/// Checks at most `per_tensor` evenly spaced entries of each tensor, so that
/// wide layers stay affordable.
pub fn grad_check_sampled<M: Differentiable>(
    model: &mut M,
    input: &M::Input,
    label: usize,
    eps: f64,
    per_tensor: usize,
) -> Result<GradCheckReport> {
    let analytic = model.gradient(input, label)?;
    analytic.check_shapes(model)?;
    let lens: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        worst_values: None,
        checked: 0,
        skipped: 0,
    };
    let pattern = model.kink_pattern(input)?;
    for (t, &len) in lens.iter().enumerate() {
        let picks: Vec<usize> = if len <= per_tensor {
            (0..len).collect()
        } else {
            (0..per_tensor).map(|k| k * len / per_tensor).collect()
        };
        for i in picks {
            let original = model.tensors()[t][i];
            model.tensors_mut()[t][i] = original + eps;
            let plus = model.loss(input, label)?;
            let crossed_up = model.kink_pattern(input)? != pattern;
            model.tensors_mut()[t][i] = original - eps;
            let minus = model.loss(input, label)?;
            let crossed_down = model.kink_pattern(input)? != pattern;
            model.tensors_mut()[t][i] = original;
            if crossed_up || crossed_down {
                report.skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.as_slices()[t][i];
            let err = relative_error(a, numeric);
            report.checked += 1;
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((t, i));
                report.worst_values = Some((a, numeric));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// `L = ½ (w·x + b − y)²` with known gradient `(r x, r)`.
    struct Linear {
        w: Vec<f64>,
        b: Vec<f64>,
    }

    impl Parameterized<f64> for Linear {
        fn tensors(&self) -> Vec<&[f64]> {
            vec![&self.w, &self.b]
        }
        fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
            vec![&mut self.w, &mut self.b]
        }
    }

    impl Differentiable for Linear {
        type Input = [f64];
        fn loss(&self, x: &[f64], y: usize) -> Result<f64> {
            let r = crate::nn::dot(&self.w, x) + self.b[0] - y as f64;
            Ok(0.5 * r * r)
        }
        fn gradient(&self, x: &[f64], y: usize) -> Result<GradientSet<f64>> {
            let r = crate::nn::dot(&self.w, x) + self.b[0] - y as f64;
            let mut g = GradientSet::zeros_like(self);
            for (gi, xi) in g.as_mut_slices()[0].iter_mut().zip(x) {
                *gi = r * xi;
            }
            g.as_mut_slices()[1][0] = r;
            Ok(g)
        }
    }

    /// Same model with the analytic gradient sign-flipped.
    struct Flipped(Mlp<f64>);

    impl Parameterized<f64> for Flipped {
        fn tensors(&self) -> Vec<&[f64]> {
            self.0.tensors()
        }
        fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
            self.0.tensors_mut()
        }
    }

    impl Differentiable for Flipped {
        type Input = [f64];
        fn loss(&self, x: &[f64], y: usize) -> Result<f64> {
            self.0.loss(x, y)
        }
        fn gradient(&self, x: &[f64], y: usize) -> Result<GradientSet<f64>> {
            let mut g = self.0.gradient(x, y)?;
            g.scale(-1.0);
            Ok(g)
        }
    }

    #[test]
    fn linear_model_matches_closed_form() {
        let mut m = Linear {
            w: vec![0.3, -0.7, 1.1],
            b: vec![0.2],
        };
        let r = grad_check(&mut m, &[1.0, 2.0, -0.5], 1, 1e-5).unwrap();
        assert_eq!(r.checked, 4);
        assert!(r.max_rel_error < 1e-8, "{r:?}");
    }

    #[test]
    fn mlp_8_4_2_passes() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut m = Mlp::<f64>::new(8, &[4], &mut rng);
            let x: Vec<f64> = (0..8).map(|i| ((i as f64) * 1.3 + seed as f64).sin()).collect();
            let r = grad_check(&mut m, &x, (seed % 2) as usize, 1e-5).unwrap();
            assert!(r.passes(1e-4), "seed {seed}: {r:?}");
        }
    }

    #[test]
    fn sign_flip_is_caught() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut m = Flipped(Mlp::<f64>::new(8, &[4], &mut rng));
        let x = [0.5, -0.1, 0.9, 0.3, -0.8, 0.2, 0.7, -0.6];
        let r = grad_check(&mut m, &x, 1, 1e-5).unwrap();
        assert!(r.max_rel_error > 0.1);
        assert!(!r.passes(1e-4));
    }

    #[test]
    fn parameters_restored_after_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut m = Mlp::<f64>::new(3, &[2], &mut rng);
        let before = m.clone();
        grad_check(&mut m, &[0.1, 0.2, 0.3], 0, 1e-5).unwrap();
        assert_eq!(m, before);
    }
}
