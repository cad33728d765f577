//! Finite-difference verification of backward passes.
//!
//! `grad_check` treats the graph builder as a black-box scalar function of
//! one input tensor and compares the analytic gradient against a central
//! difference, coordinate by coordinate. Every op in this crate ships with a
//! check in its tests; the model tests run the same probe through the full
//! network so a backward bug anywhere in the composition is caught, not just
//! in isolated ops.

use crate::error::{Error, Result};

use super::tensor::Tensor;

const FD_STEP: f64 = 1e-5;

/// Maximum relative error between the analytic gradient of `f` at `input`
/// and a central finite difference, over all coordinates of `input`.
/// Relative error is |a - n| / max(|a|, |n|, 1e-8), so agreeing near-zero
/// gradients score 0 rather than blowing up.
///
/// `f` must build a fresh graph on each call and return a scalar.
pub fn grad_check(f: impl Fn(&Tensor) -> Result<Tensor>, input: &Tensor) -> Result<f64> {
    let out = f(input)?;
    if out.len() != 1 {
        return Err(Error::NotApplicable(format!(
            "grad_check needs a scalar function, got output shape {:?}",
            out.shape()
        )));
    }
    input.zero_grad();
    out.backward();
    let analytic = input.grad_vec();

    let mut max_rel: f64 = 0.0;
    for i in 0..input.len() {
        let saved = input.value_at(i);
        input.set_value_at(i, saved + FD_STEP);
        let hi = f(input)?.value();
        input.set_value_at(i, saved - FD_STEP);
        let lo = f(input)?.value();
        input.set_value_at(i, saved);
        let numeric = (hi - lo) / (2.0 * FD_STEP);
        if !numeric.is_finite() {
            return Err(Error::NonFinite(format!(
                "finite difference diverged at coordinate {i}"
            )));
        }
        let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-8);
        max_rel = max_rel.max(rel);
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::ops;
    use crate::rng::{chacha, uniform};

    fn random_param(shape: &[usize], seed: u64, lo: f64, hi: f64) -> Tensor {
        let mut rng = chacha(seed);
        let n: usize = shape.iter().product();
        let values: Vec<f64> = (0..n).map(|_| uniform(&mut rng, lo, hi)).collect();
        Tensor::parameter(shape, values)
    }

    #[test]
    fn sum_gradient_is_exact() {
        let x = random_param(&[5, 7], 11, -2.0, 2.0);
        let err = grad_check(|t| Ok(ops::sum(t)), &x).unwrap();
        // d(sum)/dx_i = 1 exactly; FD of a linear map is exact up to rounding.
        assert!(err < 1e-9, "max rel error {err}");
    }

    #[test]
    fn composite_network_gradient_matches() {
        // bce(sigmoid(x W + b)) against fixed targets: exercises matmul,
        // bias broadcast, activation, and loss in one chain.
        let x = random_param(&[5, 7], 21, -1.0, 1.0);
        let w = random_param(&[7, 3], 22, -0.7, 0.7);
        let b = random_param(&[3], 23, -0.3, 0.3);
        let y: Vec<f64> = (0..15).map(|i| f64::from(i % 2 == 0)).collect();
        let f = |t: &Tensor| {
            let logits = ops::add_row(&ops::matmul(t, &w)?, &b)?;
            ops::bce(&ops::sigmoid(&logits), &y)
        };
        let err = grad_check(f, &x).unwrap();
        assert!(err < 1e-4, "max rel error {err}");
    }

    #[test]
    fn corrupted_backward_is_detected() {
        // Negative control: an op whose backward claims twice the true
        // gradient must fail the check loudly, otherwise the check itself
        // is vacuous.
        let x = random_param(&[4], 31, 0.5, 1.5);
        let f = |t: &Tensor| {
            let v: Vec<f64> = t.values().iter().map(|a| a * a).collect();
            let sq = Tensor::from_op(
                vec![4],
                v,
                vec![t.clone()],
                Box::new(|_, out_grad, parents| {
                    let mut p = parents[0].0.borrow_mut();
                    let vals: Vec<f64> = p.values.clone();
                    if p.requires_grad {
                        for ((g, og), x) in p.grad.iter_mut().zip(out_grad).zip(&vals) {
                            *g += og * 4.0 * x; // should be 2x
                        }
                    }
                }),
            );
            Ok(ops::sum(&sq))
        };
        let err = grad_check(f, &x).unwrap();
        assert!(err > 1e-2, "corrupted backward slipped through: {err}");
    }

    #[test]
    fn non_scalar_output_is_rejected() {
        let x = random_param(&[3, 3], 41, -1.0, 1.0);
        let err = grad_check(|t| Ok(t.clone()), &x).unwrap_err();
        assert!(matches!(err, Error::NotApplicable(_)));
    }
}
