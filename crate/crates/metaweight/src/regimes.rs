//! Experiment orchestration: the weighting-baseline sweep for the
//! corrupted-label classification task and the five training regimes for
//! the dialog task.

use std::sync::Arc;

use crate::classifier::{LabeledImage, LinearClassifier, WeightPerceptron};
use crate::dialog::{build_vocab, candidate_set, extract_examples, DialogCorpus};
use crate::error::{Error, Result};
use crate::memnet::{CandidateSet, DialogExample, MemoryNetwork, TaskTag, Vocabulary, WeightMemNet};
use crate::meta::{MetaTrainConfig, TrainOutcome, Trainer};
use crate::model::TaskModel;
use crate::report::RunReport;
use crate::rng::Rng;
use crate::strategies::{StrategyKind, TrainingRegime, WeightingStrategy};

/// Data for the corrupted-label experiment: clean primary examples, the
/// corrupted related set (with correctness indicators), and clean
/// validation/test splits.
pub struct VisionData<'a> {
    pub primary: &'a [LabeledImage],
    pub related: &'a [LabeledImage],
    pub valid: &'a [LabeledImage],
    pub test: &'a [LabeledImage],
}

/// One training run of the classifier under a weighting baseline.
/// A weight network is created only for the learned strategy.
pub fn run_vision_strategy(
    data: &VisionData,
    features: usize,
    classes: usize,
    kind: StrategyKind,
    cfg: &MetaTrainConfig,
    seed: u64,
    config_snapshot: serde_json::Value,
) -> Result<TrainOutcome<LinearClassifier, WeightPerceptron>> {
    let mut rng = Rng::new(seed);
    let model = LinearClassifier::new(features, classes);
    let weight_model =
        (kind == StrategyKind::Learned).then(|| WeightPerceptron::new(features, classes, 0.01, &mut rng));
    let strategy = WeightingStrategy::new(kind, data.related.len(), rng.fork());
    let trainer = Trainer::new(
        model,
        weight_model,
        strategy,
        cfg.clone(),
        data.primary,
        data.related,
        data.valid,
        data.test,
        rng,
    )?;
    trainer.train(config_snapshot)
}

/// The corpora a dialog regime may need. The related test split is not
/// used by any regime; evaluation is always on the primary task.
#[derive(Debug, Clone)]
pub struct DialogCorporaSet {
    pub primary_train: DialogCorpus,
    pub primary_valid: DialogCorpus,
    pub primary_test: DialogCorpus,
    pub related_train: DialogCorpus,
    pub related_valid: DialogCorpus,
}

impl DialogCorporaSet {
    pub fn from_synthetic(s: crate::dialog::SyntheticCorpora) -> Self {
        DialogCorporaSet {
            primary_train: s.primary_train,
            primary_valid: s.primary_valid,
            primary_test: s.primary_test,
            related_train: s.related_train,
            related_valid: s.related_valid,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DialogRunSpec {
    pub regime: TrainingRegime,
    /// Weight source for weighted_multitask; ignored by other regimes.
    pub strategy: StrategyKind,
    pub cfg: MetaTrainConfig,
    /// Budget in epochs of the related training examples (max_iters in
    /// the config is overridden).
    pub epochs: usize,
    pub embed_dim: usize,
    pub hops: usize,
    pub seed: u64,
}

fn bot_utterances(corpora: &[&DialogCorpus]) -> Vec<String> {
    corpora
        .iter()
        .flat_map(|c| c.dialogs.iter())
        .flat_map(|d| d.turns.iter())
        .filter(|t| t.speaker == crate::dialog::Speaker::Bot)
        .map(|t| t.text.clone())
        .collect()
}

fn require_nonempty(c: &DialogCorpus, what: &str) -> Result<()> {
    if c.dialogs.is_empty() {
        return Err(Error::MissingData(format!("{what} corpus is empty")));
    }
    Ok(())
}

struct PreparedDialogRun {
    vocab: Vocabulary,
    cands_primary: Arc<CandidateSet>,
    cands_related: Arc<CandidateSet>,
    primary_train: Vec<DialogExample>,
    primary_valid: Vec<DialogExample>,
    primary_test: Vec<DialogExample>,
    related_train: Vec<DialogExample>,
    related_valid: Vec<DialogExample>,
}

fn prepare(data: &DialogCorporaSet, with_related_vocab: bool) -> Result<PreparedDialogRun> {
    require_nonempty(&data.primary_train, "primary train")?;
    require_nonempty(&data.primary_valid, "primary valid")?;
    require_nonempty(&data.primary_test, "primary test")?;
    let vocab = if with_related_vocab {
        require_nonempty(&data.related_train, "related train")?;
        require_nonempty(&data.related_valid, "related valid")?;
        build_vocab(&[&data.primary_train, &data.related_train])
    } else {
        build_vocab(&[&data.primary_train])
    };
    let cands_primary = Arc::new(candidate_set(&data.primary_train, &vocab));
    let cands_related = Arc::new(candidate_set(&data.related_train, &vocab));
    let ex = |c: &DialogCorpus, cands: &CandidateSet, tag| extract_examples(c, &vocab, cands, tag);
    Ok(PreparedDialogRun {
        primary_train: ex(&data.primary_train, &cands_primary, TaskTag::Primary)?,
        primary_valid: ex(&data.primary_valid, &cands_primary, TaskTag::Primary)?,
        primary_test: ex(&data.primary_test, &cands_primary, TaskTag::Primary)?,
        related_train: if with_related_vocab {
            ex(&data.related_train, &cands_related, TaskTag::Related)?
        } else {
            Vec::new()
        },
        related_valid: if with_related_vocab {
            ex(&data.related_valid, &cands_related, TaskTag::Related)?
        } else {
            Vec::new()
        },
        vocab,
        cands_primary,
        cands_related,
    })
}

fn iters_for(epochs: usize, stream_len: usize, batch: usize) -> usize {
    epochs * stream_len.div_ceil(batch.max(1)).max(1)
}

/// Run one dialog training regime and report primary-task per-turn
/// retrieval accuracy at the best-validation checkpoint.
pub fn run_dialog_regime(
    data: &DialogCorporaSet,
    spec: &DialogRunSpec,
    config_snapshot: serde_json::Value,
) -> Result<RunReport> {
    let mut rng = Rng::new(spec.seed);
    match spec.regime {
        TrainingRegime::PrimaryOnly => {
            let p = prepare(data, false)?;
            let mut cfg = spec.cfg.clone();
            cfg.enable_step1 = true;
            cfg.enable_step2 = false;
            // Same iteration budget as the regimes that use related data.
            let related_len = data
                .related_train
                .dialogs
                .iter()
                .map(|d| d.bot_turns())
                .sum::<usize>()
                .max(p.primary_train.len());
            cfg.max_iters = iters_for(spec.epochs, related_len, cfg.batch_related);
            let model = MemoryNetwork::new(
                p.vocab.len(),
                spec.embed_dim,
                spec.hops,
                p.cands_primary.clone(),
                None,
                &mut rng,
            )?;
            let strategy = WeightingStrategy::new(StrategyKind::OneForAll, 0, rng.fork());
            let trainer: Trainer<MemoryNetwork, WeightMemNet> = Trainer::new(
                model,
                None,
                strategy,
                cfg,
                &p.primary_train,
                &p.primary_train,
                &p.primary_valid,
                &p.primary_test,
                rng,
            )?;
            Ok(trainer.train(config_snapshot)?.report)
        }
        TrainingRegime::Pooled => {
            let p = prepare(data, true)?;
            let merged = Arc::new(CandidateSet::build(
                &bot_utterances(&[&data.primary_train, &data.related_train]),
                &p.vocab,
            ));
            // One head, one candidate set: re-extract everything against
            // the merged set and pool the training streams.
            let ex = |c: &DialogCorpus| extract_examples(c, &p.vocab, &merged, TaskTag::Primary);
            let mut pooled = ex(&data.primary_train)?;
            pooled.extend(ex(&data.related_train)?);
            let valid = ex(&data.primary_valid)?;
            let test = ex(&data.primary_test)?;
            let mut cfg = spec.cfg.clone();
            cfg.enable_step1 = true;
            cfg.enable_step2 = false;
            cfg.max_iters = iters_for(spec.epochs, pooled.len(), cfg.batch_primary);
            let model = MemoryNetwork::new(
                p.vocab.len(),
                spec.embed_dim,
                spec.hops,
                merged,
                None,
                &mut rng,
            )?;
            let strategy = WeightingStrategy::new(StrategyKind::OneForAll, 0, rng.fork());
            let trainer: Trainer<MemoryNetwork, WeightMemNet> = Trainer::new(
                model,
                None,
                strategy,
                cfg,
                &pooled,
                &pooled,
                &valid,
                &test,
                rng,
            )?;
            Ok(trainer.train(config_snapshot)?.report)
        }
        TrainingRegime::PretrainFinetune => {
            let p = prepare(data, true)?;
            // Phase 1: train a single-head model on the related task with
            // early stopping (patience 50 evaluations).
            let mut cfg1 = spec.cfg.clone();
            cfg1.enable_step1 = true;
            cfg1.enable_step2 = false;
            cfg1.max_iters = iters_for(spec.epochs, p.related_train.len(), cfg1.batch_primary);
            cfg1.early_stop_patience = Some(50);
            let model1 = MemoryNetwork::new(
                p.vocab.len(),
                spec.embed_dim,
                spec.hops,
                p.cands_related.clone(),
                None,
                &mut rng,
            )?;
            let strategy1 = WeightingStrategy::new(StrategyKind::OneForAll, 0, rng.fork());
            let trainer1: Trainer<MemoryNetwork, WeightMemNet> = Trainer::new(
                model1,
                None,
                strategy1,
                cfg1,
                &p.related_train,
                &p.related_train,
                &p.related_valid,
                &p.related_valid,
                rng.fork(),
            )?;
            let pretrained = trainer1.train(serde_json::json!({"phase": "pretrain"}))?.model;

            // Phase 2: fresh primary head, body transferred.
            let mut model2 = MemoryNetwork::new(
                p.vocab.len(),
                spec.embed_dim,
                spec.hops,
                p.cands_primary.clone(),
                None,
                &mut rng,
            )?;
            for seg in ["A", "R"] {
                *model2.params_mut().segment_mut(seg) = pretrained.params().segment(seg).clone();
            }
            let mut cfg2 = spec.cfg.clone();
            cfg2.enable_step1 = true;
            cfg2.enable_step2 = false;
            cfg2.max_iters = iters_for(spec.epochs, p.related_train.len(), cfg2.batch_primary);
            let strategy2 = WeightingStrategy::new(StrategyKind::OneForAll, 0, rng.fork());
            let trainer2: Trainer<MemoryNetwork, WeightMemNet> = Trainer::new(
                model2,
                None,
                strategy2,
                cfg2,
                &p.primary_train,
                &p.primary_train,
                &p.primary_valid,
                &p.primary_test,
                rng,
            )?;
            Ok(trainer2.train(config_snapshot)?.report)
        }
        TrainingRegime::Multitask | TrainingRegime::WeightedMultitask => {
            let p = prepare(data, true)?;
            let kind = match spec.regime {
                TrainingRegime::Multitask => StrategyKind::OneForAll,
                _ => spec.strategy,
            };
            let mut cfg = spec.cfg.clone();
            cfg.enable_step1 = true;
            cfg.enable_step2 = true;
            cfg.max_iters = iters_for(spec.epochs, p.related_train.len(), cfg.batch_related);
            let model = MemoryNetwork::new(
                p.vocab.len(),
                spec.embed_dim,
                spec.hops,
                p.cands_primary.clone(),
                Some(p.cands_related.clone()),
                &mut rng,
            )?;
            let weight_model = (kind == StrategyKind::Learned).then(|| {
                WeightMemNet::new(p.vocab.len(), spec.embed_dim, spec.hops, &mut rng)
            });
            let weight_model = weight_model.transpose()?;
            let strategy = WeightingStrategy::new(kind, p.related_train.len(), rng.fork());
            let trainer = Trainer::new(
                model,
                weight_model,
                strategy,
                cfg,
                &p.primary_train,
                &p.related_train,
                &p.primary_valid,
                &p.primary_test,
                rng,
            )?;
            Ok(trainer.train(config_snapshot)?.report)
        }
    }
}
