//! The core training algorithm: per-iteration primary update, weighted
//! related update, and the meta-gradient update of the weight network,
//! with multi-step inner unrolling and multiple meta-updates per iteration.

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{TaskModel, WeightModel};
use crate::optim::{adam_step, AdamState};
use crate::report::{accuracy, snapshot_weights, EvalRecord, RunReport, REPORT_SCHEMA_VERSION};
use crate::rng::Rng;
use crate::strategies::{StrategyKind, WeightingStrategy};
use crate::tensor::ParamVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaTrainConfig {
    /// Learning rate of the primary-task model update.
    pub alpha: f64,
    /// Learning rate of the weighted related update and the inner
    /// simulated SGD steps.
    pub beta: f64,
    /// Learning rate of the weight-network update.
    pub gamma: f64,
    pub adam_eps: f64,
    pub batch_primary: usize,
    pub batch_related: usize,
    /// K: number of simulated inner SGD steps per meta-update.
    pub unroll_depth: usize,
    pub meta_updates_per_iter: usize,
    /// Step 1 (primary-data model update); off in the corrupted-label setup.
    pub enable_step1: bool,
    /// Step 2 (weighted related-data model update).
    pub enable_step2: bool,
    pub max_iters: usize,
    pub eval_every: usize,
    /// Weight-snapshot cadence in iterations; 0 disables snapshots.
    pub snapshot_every: usize,
    /// Cap on examples scanned per periodic evaluation; 0 = no cap.
    pub eval_limit: usize,
    /// Stop after this many evaluations without validation improvement.
    pub early_stop_patience: Option<usize>,
}

impl MetaTrainConfig {
    /// Corrupted-label classification defaults: steps 2 and 3 only,
    /// batch 256, Adam(0.001, 1e-8), single-step unrolling.
    pub fn mnist_default() -> Self {
        MetaTrainConfig {
            alpha: 0.001,
            beta: 0.001,
            gamma: 0.001,
            adam_eps: 1e-8,
            batch_primary: 256,
            batch_related: 256,
            unroll_depth: 1,
            meta_updates_per_iter: 1,
            enable_step1: false,
            enable_step2: true,
            max_iters: 15_000,
            eval_every: 250,
            snapshot_every: 500,
            eval_limit: 2000,
            early_stop_patience: None,
        }
    }

    /// Dialog defaults: batch 32, 5-step unrolling, 10 meta-updates per
    /// iteration.
    pub fn dialog_default() -> Self {
        MetaTrainConfig {
            alpha: 0.001,
            beta: 0.001,
            gamma: 0.001,
            adam_eps: 1e-8,
            batch_primary: 32,
            batch_related: 32,
            unroll_depth: 5,
            meta_updates_per_iter: 10,
            enable_step1: true,
            enable_step2: true,
            max_iters: 0,
            eval_every: 100,
            snapshot_every: 0,
            eval_limit: 2000,
            early_stop_patience: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha <= 0.0 || self.beta <= 0.0 || self.gamma <= 0.0 {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.unroll_depth < 1 {
            return Err(Error::Config("unroll depth must be at least 1".into()));
        }
        if self.meta_updates_per_iter < 1 {
            return Err(Error::Config("meta_updates_per_iter must be at least 1".into()));
        }
        if self.batch_primary < 1 || self.batch_related < 1 {
            return Err(Error::Config("batch sizes must be at least 1".into()));
        }
        if self.eval_every < 1 {
            return Err(Error::Config("eval_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// One simulated inner step: parameters before the step, the sampled
/// batch, and the weights the current weight network assigned to it.
#[derive(Debug, Clone)]
pub struct TraceStep {
    pub theta: ParamVector,
    pub ids: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Outcome of a full training run.
pub struct TrainOutcome<M, P> {
    pub report: RunReport,
    /// Model restored to the best-validation checkpoint.
    pub model: M,
    pub weight_model: Option<P>,
}

pub struct Trainer<'d, M: TaskModel, P: WeightModel<Ex = M::Ex>> {
    pub model: M,
    pub weight_model: Option<P>,
    pub strategy: WeightingStrategy,
    pub cfg: MetaTrainConfig,
    primary: &'d [M::Ex],
    related: &'d [M::Ex],
    valid: &'d [M::Ex],
    test: &'d [M::Ex],
    adam_theta: AdamState,
    adam_eta: Option<AdamState>,
    pub rng: Rng,
    iter: usize,
    /// When set, the best-validation model parameters are written here.
    pub checkpoint_path: Option<PathBuf>,
}

impl<'d, M, P> Trainer<'d, M, P>
where
    M: TaskModel,
    P: WeightModel<Ex = M::Ex>,
{
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        model: M,
        weight_model: Option<P>,
        strategy: WeightingStrategy,
        cfg: MetaTrainConfig,
        primary: &'d [M::Ex],
        related: &'d [M::Ex],
        valid: &'d [M::Ex],
        test: &'d [M::Ex],
        rng: Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        if strategy.kind() == StrategyKind::Learned && weight_model.is_none() {
            return Err(Error::Config("learned strategy requires a weight model".into()));
        }
        let adam_theta = AdamState::new(model.params());
        let adam_eta = weight_model.as_ref().map(|w| AdamState::new(w.params()));
        Ok(Trainer {
            model,
            weight_model,
            strategy,
            cfg,
            primary,
            related,
            valid,
            test,
            adam_theta,
            adam_eta,
            rng,
            iter: 0,
            checkpoint_path: None,
        })
    }

    pub fn iteration(&self) -> usize {
        self.iter
    }

    pub fn adam_theta(&self) -> &AdamState {
        &self.adam_theta
    }

    fn sample(&mut self, len: usize, k: usize) -> Vec<usize> {
        self.rng.sample_with_replacement(len, k)
    }

    fn refs(data: &'d [M::Ex], ids: &[usize]) -> Vec<&'d M::Ex> {
        ids.iter().map(|&i| &data[i]).collect()
    }

    /// Step 1: update the model on an unweighted primary batch.
    pub fn step_primary(&mut self) -> Result<()> {
        if !self.cfg.enable_step1 {
            return Ok(());
        }
        if self.primary.is_empty() {
            return Err(Error::EmptyBatch("step_primary: no primary data".into()));
        }
        let ids = self.sample(self.primary.len(), self.cfg.batch_primary);
        let batch = Self::refs(self.primary, &ids);
        let grad = self.model.grad_weighted(&batch, &vec![1.0; batch.len()])?;
        adam_step(
            self.model.params_mut(),
            &grad,
            &mut self.adam_theta,
            self.cfg.alpha,
            self.cfg.adam_eps,
        )
    }

    /// Step 2: update the model on a related batch, each example's loss
    /// scaled by the strategy's weight (weights are constants here).
    pub fn step_related_weighted(&mut self) -> Result<()> {
        if !self.cfg.enable_step2 {
            return Ok(());
        }
        if self.related.is_empty() {
            return Err(Error::EmptyBatch("step_related_weighted: no related data".into()));
        }
        let ids = self.sample(self.related.len(), self.cfg.batch_related);
        let batch = Self::refs(self.related, &ids);
        let weights = self
            .strategy
            .weights_for(&ids, &batch, self.weight_model.as_ref())?;
        let grad = self.model.grad_weighted(&batch, &weights)?;
        adam_step(
            self.model.params_mut(),
            &grad,
            &mut self.adam_theta,
            self.cfg.beta,
            self.cfg.adam_eps,
        )
    }

    /// Simulate K plain-SGD steps of size beta on fresh weighted related
    /// batches. The live model and optimizer state are untouched; the
    /// returned trace retains everything the meta-gradient needs.
    pub fn simulate_inner(&mut self, k: usize) -> Result<(M, Vec<TraceStep>)> {
        let wnet = self
            .weight_model
            .clone()
            .ok_or_else(|| Error::Config("simulate_inner requires a weight model".into()))?;
        if self.related.is_empty() {
            return Err(Error::EmptyBatch("simulate_inner: no related data".into()));
        }
        let mut sim = self.model.clone();
        let mut trace = Vec::with_capacity(k);
        for _ in 0..k {
            let ids = self.sample(self.related.len(), self.cfg.batch_related);
            let batch = Self::refs(self.related, &ids);
            let weights = wnet.weights(&batch)?;
            let grad = sim.grad_weighted(&batch, &weights)?;
            trace.push(TraceStep {
                theta: sim.params().clone(),
                ids,
                weights,
            });
            sim.params_mut().axpy(-self.cfg.beta, &grad)?;
        }
        Ok((sim, trace))
    }

    /// Accumulate the meta-gradient of the primary loss of the simulated
    /// model with respect to the weight-network parameters:
    /// sum_k sum_i (-beta * g_i(theta_k) . grad_p) * d w_i / d eta.
    /// Exact for K = 1; first-order (traced gradients held constant in
    /// eta) for deeper unrolls.
    pub fn eta_grad_from_trace(
        &self,
        trace: &[TraceStep],
        grad_primary: &ParamVector,
    ) -> Result<ParamVector> {
        let wnet = self
            .weight_model
            .as_ref()
            .ok_or_else(|| Error::Config("meta gradient requires a weight model".into()))?;
        let mut eta_grad = wnet.params().zeros_like();
        let mut probe = self.model.clone();
        for step in trace {
            *probe.params_mut() = step.theta.clone();
            let batch = Self::refs(self.related, &step.ids);
            let dots = probe.grad_dots(&batch, grad_primary)?;
            let upstream: Vec<f64> = dots.iter().map(|d| -self.cfg.beta * d).collect();
            let g = wnet.grad_weights(&batch, &upstream)?;
            eta_grad.axpy(1.0, &g)?;
        }
        Ok(eta_grad)
    }

    /// Step 3: one meta-gradient update of the weight network.
    pub fn meta_update(&mut self) -> Result<()> {
        if self.primary.is_empty() {
            return Err(Error::EmptyBatch("meta_update: no primary data".into()));
        }
        let (sim, trace) = self.simulate_inner(self.cfg.unroll_depth)?;
        let pids = self.sample(self.primary.len(), self.cfg.batch_primary);
        let pbatch = Self::refs(self.primary, &pids);
        let grad_primary = sim.grad_weighted(&pbatch, &vec![1.0; pbatch.len()])?;
        let eta_grad = self.eta_grad_from_trace(&trace, &grad_primary)?;
        let wnet = self
            .weight_model
            .as_mut()
            .expect("checked by simulate_inner");
        adam_step(
            wnet.params_mut(),
            &eta_grad,
            self.adam_eta.as_mut().expect("allocated with weight model"),
            self.cfg.gamma,
            self.cfg.adam_eps,
        )
    }

    fn eval_slice<'a>(data: &'a [M::Ex], limit: usize) -> &'a [M::Ex] {
        if limit == 0 || data.len() <= limit {
            data
        } else {
            &data[..limit]
        }
    }

    fn evaluate(&self) -> Result<EvalRecord> {
        let train_stream = if self.cfg.enable_step1 && !self.primary.is_empty() {
            self.primary
        } else {
            self.related
        };
        let train_slice = Self::eval_slice(train_stream, self.cfg.eval_limit);
        let train_refs: Vec<&M::Ex> = train_slice.iter().collect();
        let train_loss = if train_refs.is_empty() {
            0.0
        } else {
            self.model.mean_loss(&train_refs)?
        };
        let valid_slice = Self::eval_slice(self.valid, self.cfg.eval_limit);
        let valid_refs: Vec<&M::Ex> = valid_slice.iter().collect();
        let (valid_loss, valid_accuracy) = if valid_refs.is_empty() {
            (0.0, 0.0)
        } else {
            (self.model.mean_loss(&valid_refs)?, accuracy(&self.model, valid_slice)?)
        };
        Ok(EvalRecord {
            iteration: self.iter,
            train_loss,
            valid_loss,
            valid_accuracy,
        })
    }

    /// Run the full loop: step 1 (if enabled), step 2, then
    /// `meta_updates_per_iter` meta-updates when the strategy is learned;
    /// periodic validation with best-checkpoint retention; final test
    /// evaluation at the best-validation parameters.
    pub fn train(mut self, config_snapshot: serde_json::Value) -> Result<TrainOutcome<M, P>> {
        let start = Instant::now();
        let seed = self.rng.seed();
        let mut evals = Vec::new();
        let mut snapshots = Vec::new();

        let first = self.evaluate()?;
        let mut best_iter = 0usize;
        let mut best_acc = first.valid_accuracy;
        let mut best_params = self.model.params().clone();
        evals.push(first);
        let mut evals_since_best = 0usize;

        let learned = self.strategy.kind() == StrategyKind::Learned;
        if self.cfg.snapshot_every > 0 {
            if let Some(w) = &self.weight_model {
                snapshots.push(snapshot_weights(w, self.related, 0)?);
            }
        }

        for it in 1..=self.cfg.max_iters {
            self.iter = it;
            self.step_primary()?;
            self.step_related_weighted()?;
            if learned {
                for _ in 0..self.cfg.meta_updates_per_iter {
                    self.meta_update()?;
                }
            }
            if !self.model.params().all_finite() {
                return Err(Error::NonFinite(format!(
                    "model parameters diverged at iteration {it}"
                )));
            }

            if it % self.cfg.eval_every == 0 || it == self.cfg.max_iters {
                let rec = self.evaluate()?;
                if !rec.train_loss.is_finite() || !rec.valid_loss.is_finite() {
                    return Err(Error::NonFinite(format!("loss diverged at iteration {it}")));
                }
                if rec.valid_accuracy > best_acc {
                    best_acc = rec.valid_accuracy;
                    best_iter = it;
                    best_params = self.model.params().clone();
                    evals_since_best = 0;
                } else {
                    evals_since_best += 1;
                }
                evals.push(rec);
                if let Some(patience) = self.cfg.early_stop_patience {
                    if evals_since_best >= patience {
                        break;
                    }
                }
            }
            if self.cfg.snapshot_every > 0
                && (it % self.cfg.snapshot_every == 0 || it == self.cfg.max_iters)
            {
                if let Some(w) = &self.weight_model {
                    snapshots.push(snapshot_weights(w, self.related, it)?);
                }
            }
        }

        *self.model.params_mut() = best_params;
        let test_accuracy = if self.test.is_empty() {
            0.0
        } else {
            accuracy(&self.model, self.test)?
        };
        if let Some(path) = &self.checkpoint_path {
            crate::checkpoint::save(self.model.params(), path)?;
        }

        let report = RunReport {
            schema_version: REPORT_SCHEMA_VERSION,
            seed,
            config: config_snapshot,
            evals,
            best_iteration: best_iter,
            best_valid_accuracy: best_acc,
            test_accuracy,
            weight_snapshots: snapshots,
            wallclock_secs: start.elapsed().as_secs_f64(),
        };
        Ok(TrainOutcome {
            report,
            model: self.model,
            weight_model: self.weight_model,
        })
    }
}
