//! Run reports: evaluation metrics, weight-distribution snapshots,
//! multi-seed aggregation, and on-disk emission.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MetaExample, TaskModel, WeightModel};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const HISTOGRAM_BINS: usize = 20;

/// One periodic evaluation record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub iteration: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
    pub valid_accuracy: f64,
}

/// Weight distribution over the full related set at one iteration:
/// 20 bins of width 0.05 over [0,1], split by correctness when the
/// ground-truth indicator exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightHistogram {
    pub iteration: usize,
    pub bin_edges: Vec<f64>,
    pub counts_total: Vec<usize>,
    pub counts_correct: Option<Vec<usize>>,
    pub counts_incorrect: Option<Vec<usize>>,
    pub mean_correct: Option<f64>,
    pub mean_incorrect: Option<f64>,
    pub mean_all: f64,
}

/// Full record of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub seed: u64,
    pub config: serde_json::Value,
    pub evals: Vec<EvalRecord>,
    pub best_iteration: usize,
    pub best_valid_accuracy: f64,
    pub test_accuracy: f64,
    pub weight_snapshots: Vec<WeightHistogram>,
    pub wallclock_secs: f64,
}

impl RunReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Report(format!("serialize: {e}")))?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RunReport> {
        let text = fs::read_to_string(path)?;
        let report: RunReport =
            serde_json::from_str(&text).map_err(|e| Error::Report(format!("parse: {e}")))?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::Report(format!(
                "unsupported schema version {}",
                report.schema_version
            )));
        }
        Ok(report)
    }

    /// Histogram CSV: `iteration,bin_lo,bin_hi,count_total,count_correct,count_incorrect`.
    pub fn histograms_csv(&self) -> String {
        let mut out = String::from("iteration,bin_lo,bin_hi,count_total,count_correct,count_incorrect\n");
        for h in &self.weight_snapshots {
            for b in 0..HISTOGRAM_BINS {
                let cc = h.counts_correct.as_ref().map(|c| c[b].to_string()).unwrap_or_default();
                let ci = h
                    .counts_incorrect
                    .as_ref()
                    .map(|c| c[b].to_string())
                    .unwrap_or_default();
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    h.iteration,
                    h.bin_edges[b],
                    h.bin_edges[b + 1],
                    h.counts_total[b],
                    cc,
                    ci
                ));
            }
        }
        out
    }

    /// Content equality ignoring the wallclock field.
    pub fn same_content(&self, other: &RunReport) -> bool {
        let mut a = self.clone();
        let mut b = other.clone();
        a.wallclock_secs = 0.0;
        b.wallclock_secs = 0.0;
        a == b
    }
}

/// Top-1 accuracy of a model over a dataset, as a percentage.
pub fn accuracy<M: TaskModel>(model: &M, data: &[M::Ex]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyBatch("accuracy".into()));
    }
    let hits = data.iter().filter(|ex| model.correct(ex)).count();
    Ok(100.0 * hits as f64 / data.len() as f64)
}

/// Full-pass weight snapshot over the related set (evaluation only; the
/// weight model is not mutated).
pub fn snapshot_weights<P: WeightModel>(
    weight_model: &P,
    related: &[P::Ex],
    iteration: usize,
) -> Result<WeightHistogram>
where
    P::Ex: MetaExample,
{
    let refs: Vec<&P::Ex> = related.iter().collect();
    let weights = weight_model.weights(&refs)?;
    histogram_from_weights(&weights, related, iteration)
}

pub fn histogram_from_weights<E: MetaExample>(
    weights: &[f64],
    examples: &[E],
    iteration: usize,
) -> Result<WeightHistogram> {
    if weights.len() != examples.len() {
        return Err(Error::Length {
            expected: examples.len(),
            got: weights.len(),
            context: "histogram weights".into(),
        });
    }
    let edges: Vec<f64> = (0..=HISTOGRAM_BINS).map(|i| i as f64 * 0.05).collect();
    let mut total = vec![0usize; HISTOGRAM_BINS];
    let have_indicators = examples.iter().all(|e| e.indicator().is_some()) && !examples.is_empty();
    let mut correct = vec![0usize; HISTOGRAM_BINS];
    let mut incorrect = vec![0usize; HISTOGRAM_BINS];
    let mut sum_c = 0.0;
    let mut n_c = 0usize;
    let mut sum_i = 0.0;
    let mut n_i = 0usize;
    let mut sum_all = 0.0;
    for (w, ex) in weights.iter().zip(examples) {
        let bin = ((w / 0.05) as usize).min(HISTOGRAM_BINS - 1);
        total[bin] += 1;
        sum_all += w;
        match ex.indicator() {
            Some(true) => {
                correct[bin] += 1;
                sum_c += w;
                n_c += 1;
            }
            Some(false) => {
                incorrect[bin] += 1;
                sum_i += w;
                n_i += 1;
            }
            None => {}
        }
    }
    Ok(WeightHistogram {
        iteration,
        bin_edges: edges,
        counts_total: total,
        counts_correct: have_indicators.then_some(correct),
        counts_incorrect: have_indicators.then_some(incorrect),
        mean_correct: (n_c > 0).then(|| sum_c / n_c as f64),
        mean_incorrect: (n_i > 0).then(|| sum_i / n_i as f64),
        mean_all: if weights.is_empty() {
            0.0
        } else {
            sum_all / weights.len() as f64
        },
    })
}

/// Mean and sample standard deviation (n-1) of the test accuracies of a
/// set of runs with identical configs modulo seed.
pub fn aggregate(reports: &[RunReport]) -> Result<(f64, f64)> {
    if reports.len() < 2 {
        return Err(Error::Report("aggregate needs at least 2 reports".into()));
    }
    let strip_seed = |cfg: &serde_json::Value| {
        let mut c = cfg.clone();
        if let Some(map) = c.as_object_mut() {
            map.remove("seed");
        }
        c
    };
    let first = strip_seed(&reports[0].config);
    for r in &reports[1..] {
        if strip_seed(&r.config) != first {
            return Err(Error::Report("aggregate: configs differ beyond seed".into()));
        }
    }
    let values: Vec<f64> = reports.iter().map(|r| r.test_accuracy).collect();
    Ok(mean_std(&values))
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
