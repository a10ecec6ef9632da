//! Weighting baselines and training-regime names, behind one interface so
//! the harness can sweep them.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MetaExample, WeightModel};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    OneForAll,
    RandomFixed,
    RandomChanging,
    Oracle,
    Learned,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::OneForAll,
        StrategyKind::RandomFixed,
        StrategyKind::RandomChanging,
        StrategyKind::Learned,
        StrategyKind::Oracle,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            StrategyKind::OneForAll => "one_for_all",
            StrategyKind::RandomFixed => "random_fixed",
            StrategyKind::RandomChanging => "random_changing",
            StrategyKind::Oracle => "oracle",
            StrategyKind::Learned => "learned",
        }
    }
}

impl FromStr for StrategyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one_for_all" => Ok(StrategyKind::OneForAll),
            "random_fixed" => Ok(StrategyKind::RandomFixed),
            "random_changing" => Ok(StrategyKind::RandomChanging),
            "oracle" => Ok(StrategyKind::Oracle),
            "learned" => Ok(StrategyKind::Learned),
            other => Err(Error::Config(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingRegime {
    PrimaryOnly,
    PretrainFinetune,
    Pooled,
    Multitask,
    WeightedMultitask,
}

impl TrainingRegime {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrainingRegime::PrimaryOnly => "primary_only",
            TrainingRegime::PretrainFinetune => "pretrain_finetune",
            TrainingRegime::Pooled => "pooled",
            TrainingRegime::Multitask => "multitask",
            TrainingRegime::WeightedMultitask => "weighted_multitask",
        }
    }
}

impl FromStr for TrainingRegime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "primary_only" => Ok(TrainingRegime::PrimaryOnly),
            "pretrain_finetune" => Ok(TrainingRegime::PretrainFinetune),
            "pooled" => Ok(TrainingRegime::Pooled),
            "multitask" => Ok(TrainingRegime::Multitask),
            "weighted_multitask" => Ok(TrainingRegime::WeightedMultitask),
            other => Err(Error::Config(format!("unknown regime `{other}`"))),
        }
    }
}

/// Per-batch weight source for related-task updates.
#[derive(Debug, Clone)]
pub struct WeightingStrategy {
    kind: StrategyKind,
    fixed_table: Option<Vec<f64>>,
    rng: Rng,
}

impl WeightingStrategy {
    /// `related_len` sizes the immutable random-fixed table, sampled once
    /// per run from the strategy's own stream.
    pub fn new(kind: StrategyKind, related_len: usize, mut rng: Rng) -> Self {
        let fixed_table = (kind == StrategyKind::RandomFixed)
            .then(|| (0..related_len).map(|_| rng.uniform()).collect());
        WeightingStrategy {
            kind,
            fixed_table,
            rng,
        }
    }

    pub fn kind(&self) -> StrategyKind {
        self.kind
    }

    /// Weights for a batch identified by global related-set indices.
    pub fn weights_for<E, P>(
        &mut self,
        ids: &[usize],
        batch: &[&E],
        learned: Option<&P>,
    ) -> Result<Vec<f64>>
    where
        E: MetaExample,
        P: WeightModel<Ex = E>,
    {
        match self.kind {
            StrategyKind::OneForAll => Ok(vec![1.0; batch.len()]),
            StrategyKind::RandomFixed => {
                let table = self.fixed_table.as_ref().expect("table sampled at construction");
                ids.iter()
                    .map(|&i| {
                        table.get(i).copied().ok_or(Error::Index {
                            index: i,
                            len: table.len(),
                        })
                    })
                    .collect()
            }
            StrategyKind::RandomChanging => {
                Ok((0..batch.len()).map(|_| self.rng.uniform()).collect())
            }
            StrategyKind::Oracle => batch
                .iter()
                .map(|ex| match ex.indicator() {
                    Some(true) => Ok(1.0),
                    Some(false) => Ok(0.0),
                    None => Err(Error::MissingIndicator),
                })
                .collect(),
            StrategyKind::Learned => {
                let model = learned.ok_or_else(|| {
                    Error::Config("learned strategy requires a weight model".into())
                })?;
                model.weights(batch)
            }
        }
    }
}
