//! Central finite-difference gradient oracle.
//!
//! Every analytic gradient in the library is checked against this oracle;
//! it deliberately stays independent of any backward-pass code.

use crate::error::{Error, Result};
use crate::tensor::ParamVector;

/// Central differences (f(p + h e_k) - f(p - h e_k)) / 2h per coordinate.
pub fn finite_difference_grad<F>(f: F, p: &ParamVector, h: f64) -> Result<ParamVector>
where
    F: Fn(&ParamVector) -> f64,
{
    assert!(h > 0.0, "step must be positive");
    let mut grad = p.zeros_like();
    let mut work = p.clone();
    for k in 0..p.len() {
        let orig = *work.flat_mut(k);
        *work.flat_mut(k) = orig + h;
        let fp = f(&work);
        *work.flat_mut(k) = orig - h;
        let fm = f(&work);
        *work.flat_mut(k) = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite(format!(
                "objective not finite at perturbation of coordinate {k}"
            )));
        }
        *grad.flat_mut(k) = (fp - fm) / (2.0 * h);
    }
    Ok(grad)
}

/// Relative error between an analytic gradient and the finite-difference
/// oracle: ||a - fd||_inf / max(||a||_inf, ||fd||_inf, floor).
pub fn relative_grad_error(analytic: &ParamVector, fd: &ParamVector) -> f64 {
    let mut diff = analytic.clone();
    diff.axpy(-1.0, fd).expect("shape mismatch in grad comparison");
    let scale = analytic.max_abs().max(fd.max_abs()).max(1e-8);
    diff.max_abs() / scale
}
