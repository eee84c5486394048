//! Finite-difference verification of hand-written gradients.

use super::NumericError;

/// Compares an analytic gradient against central differences of `f`.
///
/// Returns max_i |analytic_i - fd_i| / max(1, |analytic_i|). Loss evaluations
/// that come back non-finite abort with `NonFiniteLoss`.
pub fn grad_check<F>(
    mut f: F,
    params: &[f64],
    analytic: &[f64],
    h: f64,
) -> Result<f64, NumericError>
where
    F: FnMut(&[f64]) -> f64,
{
    if params.len() != analytic.len() {
        return Err(NumericError::ShapeMismatch {
            expected: vec![params.len()],
            actual: vec![analytic.len()],
        });
    }
    let mut work = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        work[i] = params[i] + h;
        let plus = f(&work);
        work[i] = params[i] - h;
        let minus = f(&work);
        work[i] = params[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(NumericError::NonFiniteLoss);
        }
        let fd = (plus - minus) / (2.0 * h);
        let rel = (analytic[i] - fd).abs() / analytic[i].abs().max(1.0);
        worst = worst.max(rel);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_checks_out() {
        let f = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let params = [3.0, -1.5, 0.25];
        let analytic = [6.0, -3.0, 0.5];
        let err = grad_check(f, &params, &analytic, 1e-5).unwrap();
        assert!(err < 1e-8, "relative error {err}");
    }

    #[test]
    fn wrong_gradient_is_flagged() {
        let f = |x: &[f64]| x[0] * x[0];
        let err = grad_check(f, &[2.0], &[3.0], 1e-5).unwrap();
        assert!(err > 0.2);
    }

    #[test]
    fn non_finite_loss_is_an_error() {
        // ln(x) probes x = -h on the minus side, which is NaN.
        let f = |x: &[f64]| x[0].ln();
        assert_eq!(
            grad_check(f, &[0.0], &[0.0], 1e-6),
            Err(NumericError::NonFiniteLoss)
        );
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let f = |_: &[f64]| 0.0;
        assert!(matches!(
            grad_check(f, &[1.0, 2.0], &[0.0], 1e-5),
            Err(NumericError::ShapeMismatch { .. })
        ));
    }
}
