//! Adam optimizer with bias correction.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::tensor::Tensor;

/// Adam with the usual defaults (beta1 0.9, beta2 0.999, eps 1e-8). Moment
/// buffers are keyed by parameter name and created lazily, so the same
/// optimizer instance survives checkpoint reloads as long as names are
/// stable.
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: BTreeMap<String, Vec<f64>>,
    v: BTreeMap<String, Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    /// Steps taken so far.
    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one update to every named parameter from its accumulated
    /// gradient, then zeroes the gradients. If any gradient is non-finite
    /// the step errors *before* touching any parameter, naming the culprit,
    /// so a diverged run never corrupts the weights it is about to save.
    pub fn step<'a>(
        &mut self,
        params: impl IntoIterator<Item = (&'a str, &'a Tensor)> + Clone,
    ) -> Result<()> {
        for (name, p) in params.clone() {
            if p.grad_vec().iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "gradient for parameter '{name}' is not finite"
                )));
            }
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (name, p) in params {
            let grad = p.grad_vec();
            let m = self
                .m
                .entry(name.to_string())
                .or_insert_with(|| vec![0.0; grad.len()]);
            let v = self
                .v
                .entry(name.to_string())
                .or_insert_with(|| vec![0.0; grad.len()]);
            let mut values = p.values_vec();
            for i in 0..grad.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * grad[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                values[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
            p.set_values(&values);
            p.zero_grad();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::ops;

    #[test]
    fn zero_gradient_leaves_parameters_untouched() {
        let p = Tensor::parameter(&[3], vec![1.0, -2.0, 0.5]);
        let mut opt = Adam::new(1e-3);
        opt.step([("p", &p)]).unwrap();
        assert_eq!(p.values_vec(), vec![1.0, -2.0, 0.5]);
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn first_step_moves_by_roughly_lr() {
        // With bias correction, step one reduces to lr * g / (|g| + eps),
        // i.e. lr in magnitude regardless of gradient scale.
        for g in [0.001, 1.0, 250.0] {
            let p = Tensor::parameter(&[1], vec![5.0]);
            p.0.borrow_mut().grad[0] = g;
            let mut opt = Adam::new(0.01);
            opt.step([("p", &p)]).unwrap();
            let moved = 5.0 - p.value_at(0);
            assert!(
                (moved - 0.01).abs() < 1e-6,
                "gradient {g}: moved {moved}"
            );
        }
    }

    #[test]
    fn non_finite_gradient_aborts_without_mutating() {
        let a = Tensor::parameter(&[2], vec![1.0, 2.0]);
        let b = Tensor::parameter(&[2], vec![3.0, 4.0]);
        a.0.borrow_mut().grad = vec![0.5, 0.5];
        b.0.borrow_mut().grad = vec![0.5, f64::NAN];
        let mut opt = Adam::new(1e-3);
        let err = opt.step([("a", &a), ("b", &b)]).unwrap_err();
        assert!(err.to_string().contains("'b'"), "{err}");
        // 'a' came first in iteration order but must not have moved.
        assert_eq!(a.values_vec(), vec![1.0, 2.0]);
        assert_eq!(opt.steps(), 0);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let x = Tensor::parameter(&[1], vec![-7.0]);
        let mut opt = Adam::new(0.05);
        for _ in 0..2000 {
            let d = ops::add(&x, &Tensor::constant(&[1], vec![-3.0])).unwrap();
            let loss = ops::mul(&d, &d).unwrap();
            loss.backward();
            opt.step([("x", &x)]).unwrap();
        }
        let final_x = x.value_at(0);
        assert!((final_x - 3.0).abs() < 0.01, "converged to {final_x}");
    }

    #[test]
    fn gradients_are_zeroed_after_a_step() {
        let p = Tensor::parameter(&[2], vec![1.0, 1.0]);
        p.0.borrow_mut().grad = vec![2.0, -2.0];
        let mut opt = Adam::new(1e-3);
        opt.step([("p", &p)]).unwrap();
        assert_eq!(p.grad_vec(), vec![0.0, 0.0]);
    }
}
