//! Adam optimizer over `ParamVector` parameters.

use crate::error::{Error, Result};
use crate::tensor::ParamVector;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;

/// First/second moment estimates plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: ParamVector,
    pub v: ParamVector,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ParamVector) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }
}

/// One Adam update with bias correction; mutates `params` and `state`.
pub fn adam_step(
    params: &mut ParamVector,
    grad: &ParamVector,
    state: &mut AdamState,
    lr: f64,
    eps: f64,
) -> Result<()> {
    if !params.same_shape(grad) || !params.same_shape(&state.m) {
        return Err(Error::Shape("adam_step parameter/gradient shapes differ".into()));
    }
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - ADAM_BETA1.powf(t);
    let bc2 = 1.0 - ADAM_BETA2.powf(t);
    for si in 0..params.segments().len() {
        let name = params.segments()[si].name.clone();
        let g = grad.segment(&name).data().to_vec();
        let m = state.m.segment_mut(&name).data_mut();
        let n = g.len();
        for (mi, gi) in m.iter_mut().zip(&g) {
            *mi = ADAM_BETA1 * *mi + (1.0 - ADAM_BETA1) * gi;
        }
        let mut mhat = vec![0.0; n];
        mhat.copy_from_slice(state.m.segment(&name).data());
        let v = state.v.segment_mut(&name).data_mut();
        for (vi, gi) in v.iter_mut().zip(&g) {
            *vi = ADAM_BETA2 * *vi + (1.0 - ADAM_BETA2) * gi * gi;
        }
        let mut vhat = vec![0.0; n];
        vhat.copy_from_slice(state.v.segment(&name).data());
        let p = params.segment_mut(&name).data_mut();
        for ((pi, mi), vi) in p.iter_mut().zip(&mhat).zip(&vhat) {
            *pi -= lr * (mi / bc1) / ((vi / bc2).sqrt() + eps);
        }
    }
    Ok(())
}
