//! Model abstractions the training loop is generic over.
//!
//! A `TaskModel` is the predictive model being trained (the classifier or
//! the memory network); a `WeightModel` maps a related-task example to its
//! scalar weight in (0,1).

use crate::error::{Error, Result};
use crate::tensor::ParamVector;

/// Example-level metadata the harness needs regardless of task.
pub trait MetaExample {
    /// Ground-truth correctness indicator, when the dataset carries one
    /// (the corrupted-label task does; dialog data does not).
    fn indicator(&self) -> Option<bool>;
}

pub trait TaskModel: Clone {
    type Ex: MetaExample;

    fn params(&self) -> &ParamVector;
    fn params_mut(&mut self) -> &mut ParamVector;

    /// Per-example prediction losses for a batch.
    fn batch_losses(&self, batch: &[&Self::Ex]) -> Result<Vec<f64>>;

    /// Gradient of sum_i scale_i * L_i with respect to the parameters.
    fn grad_weighted(&self, batch: &[&Self::Ex], scale: &[f64]) -> Result<ParamVector>;

    /// Whether the model's prediction for `ex` matches its target.
    fn correct(&self, ex: &Self::Ex) -> bool;

    /// Single-example loss gradient. Default routes through the weighted path.
    fn grad_single(&self, ex: &Self::Ex) -> Result<ParamVector> {
        self.grad_weighted(&[ex], &[1.0])
    }

    /// Per-example dot products g_i . v without materializing every g_i.
    /// Models may override with a cheaper closed form.
    fn grad_dots(&self, batch: &[&Self::Ex], v: &ParamVector) -> Result<Vec<f64>> {
        batch
            .iter()
            .map(|ex| self.grad_single(ex)?.dot(v))
            .collect()
    }

    fn mean_loss(&self, batch: &[&Self::Ex]) -> Result<f64> {
        let losses = self.batch_losses(batch)?;
        if losses.is_empty() {
            return Err(Error::EmptyBatch("mean_loss".into()));
        }
        Ok(losses.iter().sum::<f64>() / losses.len() as f64)
    }

    fn sum_loss(&self, batch: &[&Self::Ex]) -> Result<f64> {
        Ok(self.batch_losses(batch)?.iter().sum())
    }
}

pub trait WeightModel: Clone {
    type Ex;

    fn params(&self) -> &ParamVector;
    fn params_mut(&mut self) -> &mut ParamVector;

    /// Per-example weights, strictly inside (0,1).
    fn weights(&self, batch: &[&Self::Ex]) -> Result<Vec<f64>>;

    /// Gradient of sum_i upstream_i * w_i with respect to the weight-model
    /// parameters.
    fn grad_weights(&self, batch: &[&Self::Ex], upstream: &[f64]) -> Result<ParamVector>;
}
