//! Acceptance suite: one pass/fail line per criterion on stdout, nonzero
//! exit when any required criterion fails. Built as a harness-free test
//! target so the lines always print.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use metaweight::classifier::{LabeledImage, LinearClassifier, WeightPerceptron};
use metaweight::dialog::{
    build_vocab, generate_synthetic, parse_babi, parse_babi_text, serialize_dialogs, subsample,
    DialogTask, SyntheticConfig,
};
use metaweight::fdcheck::{finite_difference_grad, relative_grad_error};
use metaweight::memnet::{
    encode_bow, CandidateSet, DialogExample, MemoryNetwork, TaskTag, Vocabulary,
    WeightMemNet, EMBED_DIM, HOPS,
};
use metaweight::meta::{MetaTrainConfig, Trainer};
use metaweight::model::{TaskModel, WeightModel};
use metaweight::regimes::{
    run_dialog_regime, run_vision_strategy, DialogCorporaSet, DialogRunSpec, VisionData,
};
use metaweight::report::mean_std;
use metaweight::strategies::{StrategyKind, TrainingRegime, WeightingStrategy};
use metaweight::vision::{corrupt, load_idx, synth_clusters, write_idx, ImageDataset, Split};
use metaweight::{DenseMatrix, Rng};

/// Same stand-in dataset the experiment binary builds when the official
/// image files are absent.
const CLASSES: usize = 10;
const FEATURES: usize = 784;
const TRAIN_PER_CLASS: usize = 500;
const EVAL_PER_CLASS: usize = 200;
const NOISE: f64 = 0.0375;
const DATA_SEED: u64 = 7_031;
const BASE_SEED: u64 = 12_345;

enum Status {
    Pass,
    Fail,
    Skip,
}

fn report(n: usize, label: &str, status: Status, detail: &str, failures: &mut usize) {
    match status {
        Status::Pass => println!("criterion {n} ({label}): PASS  [{detail}]"),
        Status::Skip => println!("criterion {n} ({label}): SKIP  [{detail}]"),
        Status::Fail => {
            println!("criterion {n} ({label}): FAIL  [{detail}]");
            *failures += 1;
        }
    }
}

fn status(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

fn mean(values: &[f64]) -> f64 {
    mean_std(values).0
}

// ---------------------------------------------------------------- fixtures

fn toy_image(rng: &mut Rng, features: usize, classes: usize, correct: bool) -> LabeledImage {
    let pixels: Vec<f64> = (0..features).map(|_| rng.uniform()).collect();
    let label = rng.index(classes);
    let shown = if correct {
        label
    } else {
        (label + 1 + rng.index(classes - 1)) % classes
    };
    LabeledImage {
        pixels: Arc::new(pixels),
        label,
        shown_label: shown,
        indicator: Some(correct),
    }
}

fn toy_sets(seed: u64, n: usize, features: usize, classes: usize) -> (Vec<LabeledImage>, Vec<LabeledImage>) {
    let mut rng = Rng::new(seed);
    let primary: Vec<LabeledImage> = (0..n)
        .map(|_| {
            let mut e = toy_image(&mut rng, features, classes, true);
            e.indicator = None;
            e
        })
        .collect();
    let related: Vec<LabeledImage> = (0..n)
        .map(|i| toy_image(&mut rng, features, classes, i % 2 == 0))
        .collect();
    (primary, related)
}

fn randomized_classifier(features: usize, classes: usize, rng: &mut Rng) -> LinearClassifier {
    let mut m = LinearClassifier::new(features, classes);
    for k in 0..m.params().len() {
        *m.params_mut().flat_mut(k) = rng.uniform_range(-0.5, 0.5);
    }
    m
}

// ----------------------------------------------------- criterion functions

/// 1: at K = 1 the analytic weight-network gradient matches finite
/// differences of eta -> L^P(theta - beta sum_i w_i(eta) g_i) to 1e-4
/// relative error, on a toy problem, in under a second.
fn meta_gradient_exactness() -> (bool, String) {
    let start = Instant::now();
    let features = 3;
    let classes = 3; // 12 classifier params
    let (primary, related) = toy_sets(41, 8, features, classes);
    let mut cfg = MetaTrainConfig::mnist_default();
    cfg.batch_primary = 8;
    cfg.batch_related = 8;
    let mut rng = Rng::new(17);
    let model = randomized_classifier(features, classes, &mut rng);
    let wnet = WeightPerceptron::new(features, classes, 0.3, &mut rng);
    let strategy = WeightingStrategy::new(StrategyKind::Learned, related.len(), rng.fork());
    let mut t = Trainer::new(
        model,
        Some(wnet),
        strategy,
        cfg,
        &primary,
        &related,
        &primary,
        &primary,
        rng,
    )
    .unwrap();

    let (sim, trace) = t.simulate_inner(1).unwrap();
    let pbatch: Vec<&LabeledImage> = primary.iter().collect();
    let grad_p = sim.grad_weighted(&pbatch, &vec![1.0; pbatch.len()]).unwrap();
    let analytic = t.eta_grad_from_trace(&trace, &grad_p).unwrap();

    let model = t.model.clone();
    let wnet = t.weight_model.clone().unwrap();
    let beta = t.cfg.beta;
    let rbatch: Vec<&LabeledImage> = trace[0].ids.iter().map(|&i| &related[i]).collect();
    let fd = finite_difference_grad(
        |eta| {
            let mut w = wnet.clone();
            *w.params_mut() = eta.clone();
            let weights = w.weights(&rbatch).unwrap();
            let g = model.grad_weighted(&rbatch, &weights).unwrap();
            let mut m2 = model.clone();
            m2.params_mut().axpy(-beta, &g).unwrap();
            m2.sum_loss(&pbatch).unwrap()
        },
        wnet.params(),
        1e-5,
    )
    .unwrap();
    let err = relative_grad_error(&analytic, &fd);
    let secs = start.elapsed().as_secs_f64();
    (
        err <= 1e-4 && secs < 1.0,
        format!("rel err {err:.2e}, {secs:.3}s"),
    )
}

struct SweepResult {
    /// Per-strategy test accuracies over the seeds.
    accuracy: BTreeMap<&'static str, Vec<f64>>,
    /// Learned strategy: per-seed final (mean correct, mean incorrect)
    /// related-example weights.
    final_weights: Vec<(f64, f64)>,
}

/// The full corrupted-label sweep backing criteria 2 and 3: five
/// strategies, five seeds, batch 256, Adam(0.001, 1e-8), 15000 iterations.
fn run_label_noise_sweep() -> SweepResult {
    let mut rng = Rng::new(DATA_SEED);
    let train = synth_clusters(TRAIN_PER_CLASS, CLASSES, FEATURES, NOISE, &mut rng, Split::Train);
    let valid = synth_clusters(EVAL_PER_CLASS, CLASSES, FEATURES, NOISE, &mut rng, Split::Valid);
    let test = synth_clusters(EVAL_PER_CLASS, CLASSES, FEATURES, NOISE, &mut rng, Split::Test);
    let related = corrupt(&train, 0.75, CLASSES, &mut rng).to_examples();
    let primary = train.to_examples();
    let valid = valid.to_examples();
    let test = test.to_examples();
    let data = VisionData {
        primary: &primary,
        related: &related,
        valid: &valid,
        test: &test,
    };
    let cfg = MetaTrainConfig::mnist_default();

    let mut accuracy: BTreeMap<&'static str, Vec<f64>> = BTreeMap::new();
    let mut final_weights = Vec::new();
    for kind in StrategyKind::ALL {
        for s in 0..5u64 {
            let seed = BASE_SEED + s;
            let out = run_vision_strategy(
                &data,
                FEATURES,
                CLASSES,
                kind,
                &cfg,
                seed,
                serde_json::json!({"strategy": kind.as_str(), "seed": seed}),
            )
            .unwrap();
            accuracy.entry(kind.as_str()).or_default().push(out.report.test_accuracy);
            if kind == StrategyKind::Learned {
                let h = out.report.weight_snapshots.last().expect("snapshots enabled");
                final_weights.push((
                    h.mean_correct.expect("indicators present"),
                    h.mean_incorrect.expect("indicators present"),
                ));
            }
        }
    }
    SweepResult {
        accuracy,
        final_weights,
    }
}

/// 2: learned >= 85%, oracle >= 88%, learned within 4 points of oracle,
/// every unweighted/random baseline <= 30% (means over 5 seeds).
fn strategy_sweep_accuracy(sweep: &SweepResult) -> (bool, String) {
    let m = |k: &str| mean(&sweep.accuracy[k]);
    let learned = m("learned");
    let oracle = m("oracle");
    let ofa = m("one_for_all");
    let rf = m("random_fixed");
    let rc = m("random_changing");
    let ok = learned >= 85.0
        && oracle >= 88.0
        && learned >= oracle - 4.0
        && ofa <= 30.0
        && rf <= 30.0
        && rc <= 30.0;
    (
        ok,
        format!(
            "learned {learned:.2}, oracle {oracle:.2}, one_for_all {ofa:.2}, \
             random_fixed {rf:.2}, random_changing {rc:.2}"
        ),
    )
}

/// 3: per seed, final mean weight >= 0.95 on correct-label related
/// examples and <= 0.05 on incorrect-label ones.
fn weight_separation(sweep: &SweepResult) -> (bool, String) {
    let ok = sweep
        .final_weights
        .iter()
        .all(|&(c, i)| c >= 0.95 && i <= 0.05);
    let shown: Vec<String> = sweep
        .final_weights
        .iter()
        .map(|(c, i)| format!("{c:.3}/{i:.4}"))
        .collect();
    (ok, format!("per-seed correct/incorrect: {}", shown.join(", ")))
}

/// 4: a weighted gradient under oracle weights equals the gradient over
/// only the correct-label subset of the same batch, to 1e-12.
fn oracle_equivalence() -> (bool, String) {
    let mut data_rng = Rng::new(5);
    let train = synth_clusters(8, 4, 12, 0.2, &mut data_rng, Split::Train);
    let related = corrupt(&train, 0.5, 4, &mut data_rng).to_examples();
    let mut rng = Rng::new(31);
    let model = randomized_classifier(12, 4, &mut rng);
    let refs: Vec<&LabeledImage> = related.iter().collect();
    let mut strategy = WeightingStrategy::new(StrategyKind::Oracle, related.len(), Rng::new(0));
    let ids: Vec<usize> = (0..related.len()).collect();
    let weights = strategy
        .weights_for::<_, WeightPerceptron>(&ids, &refs, None)
        .unwrap();
    let g_oracle = model.grad_weighted(&refs, &weights).unwrap();
    let correct: Vec<&LabeledImage> = related
        .iter()
        .filter(|e| e.indicator == Some(true))
        .collect();
    let g_subset = model.grad_weighted(&correct, &vec![1.0; correct.len()]).unwrap();
    let mut diff = g_oracle.clone();
    diff.axpy(-1.0, &g_subset).unwrap();
    let err = diff.max_abs();
    (err <= 1e-12, format!("max abs diff {err:.2e}"))
}

/// 5: on generated corpora (1000 related / 50 primary dialogs, desk-scale
/// budget, 3 seeds) learned weighted multitask beats primary-only and
/// plain multitask by at least 1 point each, within 30 minutes.
fn dialog_regime_ordering() -> (bool, String) {
    let start = Instant::now();
    let gen_cfg = SyntheticConfig {
        primary_train: 50,
        primary_valid: 50,
        ..SyntheticConfig::fast()
    };
    let mut rng = Rng::new(DATA_SEED);
    let data = DialogCorporaSet::from_synthetic(generate_synthetic(&gen_cfg, &mut rng).unwrap());
    // Desk-scale budget: 200 epochs, single-step unrolling, one
    // meta-update per iteration.
    let mut cfg = MetaTrainConfig::dialog_default();
    cfg.unroll_depth = 1;
    cfg.meta_updates_per_iter = 1;
    cfg.eval_every = 250;
    cfg.max_iters = 0;

    let mut means = Vec::new();
    for regime in [
        TrainingRegime::PrimaryOnly,
        TrainingRegime::Multitask,
        TrainingRegime::WeightedMultitask,
    ] {
        let mut accs = Vec::new();
        for s in 0..3u64 {
            let spec = DialogRunSpec {
                regime,
                strategy: StrategyKind::Learned,
                cfg: cfg.clone(),
                epochs: 200,
                embed_dim: EMBED_DIM,
                hops: HOPS,
                seed: BASE_SEED + s,
            };
            let report = run_dialog_regime(
                &data,
                &spec,
                serde_json::json!({"regime": regime.as_str(), "seed": spec.seed}),
            )
            .unwrap();
            accs.push(report.test_accuracy);
        }
        means.push(mean(&accs));
    }
    let (primary_only, multitask, weighted) = (means[0], means[1], means[2]);
    let secs = start.elapsed().as_secs_f64();
    let ok = weighted >= primary_only + 1.0 && weighted >= multitask + 1.0 && secs <= 1800.0;
    (
        ok,
        format!(
            "weighted {weighted:.2} vs primary_only {primary_only:.2}, \
             multitask {multitask:.2}; {secs:.0}s"
        ),
    )
}

fn find_corpus_file(dir: &Path, fragments: &[&str]) -> Option<PathBuf> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .ok()?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
        .iter()
        .find(|n| {
            let lower = n.to_lowercase();
            fragments.iter().all(|f| lower.contains(f))
        })
        .map(|n| dir.join(n))
}

/// 6 (optional, gated on METAWEIGHT_DIALOG_DIR): joint vocabulary sizes
/// over the official corpora match 4129/4657/4981 for the 5/10/15%
/// primary subsamples. The full-budget accuracy comparison is excluded
/// here as long-running.
fn official_corpora_vocab() -> (Status, String) {
    let Some(dir) = std::env::var_os("METAWEIGHT_DIALOG_DIR").map(PathBuf::from) else {
        return (
            Status::Skip,
            "set METAWEIGHT_DIALOG_DIR to the official corpora to enable".into(),
        );
    };
    let load = |fragments: &[&str], task, split| {
        find_corpus_file(&dir, fragments)
            .ok_or_else(|| format!("no file matching {fragments:?}"))
            .and_then(|p| parse_babi(&p, task, split).map_err(|e| e.to_string()))
    };
    let related = match load(&["task5", "trn"], DialogTask::Related, Split::Train) {
        Ok(c) => c,
        Err(e) => return (Status::Fail, e),
    };
    let primary = match load(&["task3", "trn"], DialogTask::Primary, Split::Train) {
        Ok(c) => c,
        Err(e) => return (Status::Fail, e),
    };
    let expected = [(5usize, 4129usize), (10, 4657), (15, 4981)];
    let mut got = Vec::new();
    let mut ok = true;
    for (frac, want) in expected {
        let n = primary.dialogs.len() * frac / 100;
        let sub = match subsample(&primary, n, &mut Rng::new(DATA_SEED), true) {
            Ok(s) => s,
            Err(e) => return (Status::Fail, e.to_string()),
        };
        let vocab = build_vocab(&[&sub, &related]);
        got.push(format!("{frac}%: {} (want {want})", vocab.len()));
        ok &= vocab.len() == want;
    }
    (status(ok), got.join(", "))
}

fn random_sentence(pool: &[&str], rng: &mut Rng) -> Vec<String> {
    (0..1 + rng.index(3))
        .map(|_| pool[rng.index(pool.len())].to_string())
        .collect()
}

fn random_dialog_example(
    vocab: &Vocabulary,
    pool: &[&str],
    answers: usize,
    tag: TaskTag,
    rng: &mut Rng,
) -> DialogExample {
    let mem_len = 1 + rng.index(3);
    DialogExample {
        memory: (0..mem_len)
            .map(|_| encode_bow(&random_sentence(pool, rng), vocab))
            .collect(),
        query: encode_bow(&random_sentence(pool, rng), vocab),
        answer: rng.index(answers),
        answer_enc: encode_bow(&random_sentence(pool, rng), vocab),
        task_tag: tag,
    }
}

/// 7: every backward pass matches finite differences at 1e-5 relative
/// error on randomized small instances, 100 trials per model.
fn gradient_suite() -> (bool, String) {
    const TRIALS: usize = 100;
    let mut rng = Rng::new(2_024);
    let pool = ["alpha", "beta", "gamma", "delta", "eps", "zeta", "theta"];
    let mut worst: BTreeMap<&'static str, f64> = BTreeMap::new();
    let mut track = |name: &'static str, err: f64| {
        let e = worst.entry(name).or_insert(0.0);
        *e = e.max(err);
    };

    for _ in 0..TRIALS {
        // Linear classifier.
        let features = 2 + rng.index(4);
        let classes = 2 + rng.index(3);
        let model = randomized_classifier(features, classes, &mut rng);
        let batch: Vec<LabeledImage> = (0..3)
            .map(|_| {
                let correct = rng.uniform() < 0.5;
                toy_image(&mut rng, features, classes, correct)
            })
            .collect();
        let refs: Vec<&LabeledImage> = batch.iter().collect();
        let scale: Vec<f64> = (0..3).map(|_| rng.uniform_range(0.1, 1.5)).collect();
        let analytic = model.grad_weighted(&refs, &scale).unwrap();
        let base = model.clone();
        let fd = finite_difference_grad(
            |p| {
                let mut probe = base.clone();
                *probe.params_mut() = p.clone();
                let losses = probe.batch_losses(&refs).unwrap();
                losses.iter().zip(&scale).map(|(l, s)| l * s).sum()
            },
            model.params(),
            1e-6,
        )
        .unwrap();
        track("classifier", relative_grad_error(&analytic, &fd));

        // Weight perceptron.
        let wnet = WeightPerceptron::new(features, classes, 0.3, &mut rng);
        let upstream: Vec<f64> = (0..3).map(|_| rng.uniform_range(-2.0, 2.0)).collect();
        let analytic = wnet.grad_weights(&refs, &upstream).unwrap();
        let base = wnet.clone();
        let fd = finite_difference_grad(
            |p| {
                let mut probe = base.clone();
                *probe.params_mut() = p.clone();
                let w = probe.weights(&refs).unwrap();
                w.iter().zip(&upstream).map(|(w, u)| w * u).sum()
            },
            wnet.params(),
            1e-6,
        )
        .unwrap();
        track("weight perceptron", relative_grad_error(&analytic, &fd));

        // Memory networks: fresh small vocabulary and candidate sets.
        let sentences: Vec<Vec<String>> =
            (0..5).map(|_| random_sentence(&pool, &mut rng)).collect();
        let slices: Vec<&[String]> = sentences.iter().map(|s| s.as_slice()).collect();
        let vocab = Vocabulary::build(slices.into_iter());
        let utter = |rng: &mut Rng| random_sentence(&pool, rng).join(" ");
        let cands = Arc::new(CandidateSet::build(
            &[utter(&mut rng), utter(&mut rng), utter(&mut rng)],
            &vocab,
        ));
        let cands2 = Arc::new(CandidateSet::build(&[utter(&mut rng), utter(&mut rng)], &vocab));
        let dim = 2 + rng.index(3);
        let hops = 1 + rng.index(3);

        // Single head.
        let model =
            MemoryNetwork::new(vocab.len(), dim, hops, cands.clone(), None, &mut rng).unwrap();
        let ex = random_dialog_example(&vocab, &pool, cands.len(), TaskTag::Primary, &mut rng);
        let analytic = model.grad_weighted(&[&ex], &[1.0]).unwrap();
        let base = model.clone();
        let fd = finite_difference_grad(
            |p| {
                let mut probe = base.clone();
                *probe.params_mut() = p.clone();
                probe.sum_loss(&[&ex]).unwrap()
            },
            model.params(),
            1e-6,
        )
        .unwrap();
        track("memory network", relative_grad_error(&analytic, &fd));

        // Two heads, mixed-tag batch.
        let model = MemoryNetwork::new(
            vocab.len(),
            dim,
            hops,
            cands.clone(),
            Some(cands2.clone()),
            &mut rng,
        )
        .unwrap();
        let ex1 = random_dialog_example(&vocab, &pool, cands.len(), TaskTag::Primary, &mut rng);
        let ex2 = random_dialog_example(&vocab, &pool, cands2.len(), TaskTag::Related, &mut rng);
        let batch = [&ex1, &ex2];
        let scale = [rng.uniform_range(0.1, 1.5), rng.uniform_range(0.1, 1.5)];
        let analytic = model.grad_weighted(&batch, &scale).unwrap();
        let base = model.clone();
        let fd = finite_difference_grad(
            |p| {
                let mut probe = base.clone();
                *probe.params_mut() = p.clone();
                let losses = probe.batch_losses(&batch).unwrap();
                losses[0] * scale[0] + losses[1] * scale[1]
            },
            model.params(),
            1e-6,
        )
        .unwrap();
        track("two-head memory network", relative_grad_error(&analytic, &fd));

        // Weight-generation memory network.
        let wnet = WeightMemNet::new(vocab.len(), dim, hops, &mut rng).unwrap();
        let up = rng.uniform_range(-2.0, 2.0);
        let analytic = wnet.grad_weights(&[&ex2], &[up]).unwrap();
        let base = wnet.clone();
        let fd = finite_difference_grad(
            |p| {
                let mut probe = base.clone();
                *probe.params_mut() = p.clone();
                up * probe.weights(&[&ex2]).unwrap()[0]
            },
            wnet.params(),
            1e-6,
        )
        .unwrap();
        track("weight memnet", relative_grad_error(&analytic, &fd));
    }

    let ok = worst.values().all(|&e| e <= 1e-5);
    let shown: Vec<String> = worst
        .iter()
        .map(|(k, v)| format!("{k} {v:.1e}"))
        .collect();
    (ok, format!("worst rel err over {TRIALS} trials: {}", shown.join(", ")))
}

/// 8: dialog text round-trips through serialize/parse as a fixed point,
/// the image fixture format round-trips byte-exactly, and subsampling
/// keeps dialogs intact.
fn parser_format_suite() -> (bool, String) {
    let mut notes = Vec::new();
    let mut ok = true;

    // Dialog text round trip on generated corpora.
    let gen_cfg = SyntheticConfig {
        restaurants_per_cuisine: 3,
        related_train: 20,
        related_valid: 5,
        related_test: 5,
        primary_train: 10,
        primary_valid: 5,
        primary_test: 5,
    };
    let corpora = generate_synthetic(&gen_cfg, &mut Rng::new(9)).unwrap();
    for corpus in [&corpora.related_train, &corpora.primary_train, &corpora.primary_test] {
        let s1 = serialize_dialogs(&corpus.dialogs);
        let parsed = parse_babi_text(&s1).unwrap();
        let s2 = serialize_dialogs(&parsed);
        if parsed != corpus.dialogs || s2 != s1 {
            ok = false;
            notes.push("dialog round trip diverged".to_string());
        }
    }

    // Image fixture round trip, byte for byte.
    let dir = std::env::temp_dir().join("metaweight_acceptance_idx");
    std::fs::create_dir_all(&dir).unwrap();
    let values: Vec<f64> = (0..2 * 9).map(|k| ((k * 13) % 256) as f64 / 255.0).collect();
    let ds = ImageDataset {
        images: DenseMatrix::from_vec(2, 9, values).unwrap(),
        labels: vec![4, 9],
        split: Split::Train,
    };
    let (i1, l1) = (dir.join("img1"), dir.join("lbl1"));
    let (i2, l2) = (dir.join("img2"), dir.join("lbl2"));
    write_idx(&ds, 3, 3, &i1, &l1).unwrap();
    let loaded = load_idx(&i1, &l1, Split::Train).unwrap();
    write_idx(&loaded, 3, 3, &i2, &l2).unwrap();
    if std::fs::read(&i1).unwrap() != std::fs::read(&i2).unwrap()
        || std::fs::read(&l1).unwrap() != std::fs::read(&l2).unwrap()
        || loaded.labels != ds.labels
    {
        ok = false;
        notes.push("image fixture round trip not byte-exact".to_string());
    }

    // Subsampling keeps whole dialogs.
    let full = &corpora.related_train;
    for take_first in [false, true] {
        let sub = subsample(full, 7, &mut Rng::new(3), take_first).unwrap();
        if sub.dialogs.len() != 7
            || !sub.dialogs.iter().all(|d| full.dialogs.contains(d))
        {
            ok = false;
            notes.push(format!("subsample (take_first={take_first}) broke a dialog"));
        }
    }
    if take_first_prefix_mismatch(&corpora) {
        ok = false;
        notes.push("take-first subsample is not a prefix".to_string());
    }

    if notes.is_empty() {
        notes.push("dialog text fixed point, byte-exact image fixtures, whole-dialog subsampling".into());
    }
    (ok, notes.join("; "))
}

fn take_first_prefix_mismatch(corpora: &metaweight::dialog::SyntheticCorpora) -> bool {
    let full = &corpora.related_train;
    let sub = subsample(full, 4, &mut Rng::new(1), true).unwrap();
    sub.dialogs[..] != full.dialogs[..4]
}

/// 9: identical (config, seed) implies identical run-report content.
fn determinism() -> (bool, String) {
    // Classification path.
    let mut rng = Rng::new(3);
    let train = synth_clusters(20, 4, 30, 0.05, &mut rng, Split::Train);
    let valid = synth_clusters(5, 4, 30, 0.05, &mut rng, Split::Valid);
    let test = synth_clusters(5, 4, 30, 0.05, &mut rng, Split::Test);
    let related = corrupt(&train, 0.5, 4, &mut rng).to_examples();
    let primary = train.to_examples();
    let valid = valid.to_examples();
    let test = test.to_examples();
    let data = VisionData {
        primary: &primary,
        related: &related,
        valid: &valid,
        test: &test,
    };
    let cfg = MetaTrainConfig {
        batch_primary: 8,
        batch_related: 8,
        max_iters: 12,
        eval_every: 4,
        snapshot_every: 6,
        eval_limit: 0,
        ..MetaTrainConfig::mnist_default()
    };
    let vision_run = || {
        run_vision_strategy(
            &data,
            30,
            4,
            StrategyKind::Learned,
            &cfg,
            BASE_SEED,
            serde_json::json!({"check": "determinism"}),
        )
        .unwrap()
        .report
    };
    let vision_ok = vision_run().same_content(&vision_run());

    // Dialog path.
    let gen_cfg = SyntheticConfig {
        restaurants_per_cuisine: 3,
        related_train: 12,
        related_valid: 4,
        related_test: 2,
        primary_train: 6,
        primary_valid: 4,
        primary_test: 4,
    };
    let dialog_data =
        DialogCorporaSet::from_synthetic(generate_synthetic(&gen_cfg, &mut Rng::new(77)).unwrap());
    let mut dcfg = MetaTrainConfig::dialog_default();
    dcfg.batch_primary = 4;
    dcfg.batch_related = 4;
    dcfg.unroll_depth = 2;
    dcfg.meta_updates_per_iter = 1;
    dcfg.eval_every = 5;
    dcfg.eval_limit = 0;
    let spec = DialogRunSpec {
        regime: TrainingRegime::WeightedMultitask,
        strategy: StrategyKind::Learned,
        cfg: dcfg,
        epochs: 1,
        embed_dim: 4,
        hops: 2,
        seed: 9,
    };
    let dialog_run = || run_dialog_regime(&dialog_data, &spec, serde_json::json!({})).unwrap();
    let dialog_ok = dialog_run().same_content(&dialog_run());

    (
        vision_ok && dialog_ok,
        format!("classification repeat identical: {vision_ok}, dialog repeat identical: {dialog_ok}"),
    )
}

fn main() {
    let mut failures = 0usize;

    let (ok, detail) = meta_gradient_exactness();
    report(1, "single-step meta-gradient matches finite differences", status(ok), &detail, &mut failures);

    let sweep = run_label_noise_sweep();
    let (ok, detail) = strategy_sweep_accuracy(&sweep);
    report(2, "corrupted-label sweep accuracy targets", status(ok), &detail, &mut failures);
    let (ok, detail) = weight_separation(&sweep);
    report(3, "learned weights separate correct from incorrect labels", status(ok), &detail, &mut failures);

    let (ok, detail) = oracle_equivalence();
    report(4, "oracle weighting equals correct-subset gradient", status(ok), &detail, &mut failures);

    let (ok, detail) = dialog_regime_ordering();
    report(5, "weighted multitask beats primary-only and multitask on generated dialogs", status(ok), &detail, &mut failures);

    let (st, detail) = official_corpora_vocab();
    report(6, "official corpora vocabulary sizes", st, &detail, &mut failures);

    let (ok, detail) = gradient_suite();
    report(7, "all backward passes match finite differences", status(ok), &detail, &mut failures);

    let (ok, detail) = parser_format_suite();
    report(8, "parser and fixture formats round-trip", status(ok), &detail, &mut failures);

    let (ok, detail) = determinism();
    report(9, "identical config and seed reproduce identical reports", status(ok), &detail, &mut failures);

    if failures > 0 {
        eprintln!("{failures} acceptance criterion(s) failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
