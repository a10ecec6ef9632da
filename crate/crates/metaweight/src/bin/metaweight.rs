//! Experiment harness: the corrupted-label classification sweep, the
//! dialog-regime sweep, table rendering against the reference numbers,
//! and a gradient/oracle self-test.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use metaweight::classifier::{LabeledImage, LinearClassifier, WeightPerceptron};
use metaweight::dialog::{
    generate_synthetic, parse_babi, subsample, DialogCorpus, DialogTask, SyntheticConfig,
};
use metaweight::fdcheck::{finite_difference_grad, relative_grad_error};
use metaweight::memnet::{CandidateSet, MemoryNetwork, TaskTag, Vocabulary, WeightMemNet};
use metaweight::meta::MetaTrainConfig;
use metaweight::model::{TaskModel, WeightModel};
use metaweight::regimes::{
    run_dialog_regime, run_vision_strategy, DialogCorporaSet, DialogRunSpec, VisionData,
};
use metaweight::report::{aggregate, RunReport};
use metaweight::strategies::{StrategyKind, TrainingRegime, WeightingStrategy};
use metaweight::vision::{corrupt, load_idx, synth_clusters, Split};
use metaweight::{Error, Rng};

const DEFAULT_BASE_SEED: u64 = 12345;

/// Desk-scale stand-in dataset dimensions when the official image files
/// are not supplied.
const SYNTH_CLASSES: usize = 10;
const SYNTH_FEATURES: usize = 784;
const SYNTH_TRAIN_PER_CLASS: usize = 500;
const SYNTH_EVAL_PER_CLASS: usize = 200;
const SYNTH_NOISE: f64 = 0.0375;
const SYNTH_DATA_SEED: u64 = 7_031;

const MNIST_FAST_ITERS: usize = 2_000;
const MNIST_FULL_ITERS: usize = 15_000;

pub const DIALOG_FAST_EPOCHS: usize = 200;
const DIALOG_FULL_EPOCHS: usize = 4_000;

#[derive(Parser)]
#[command(name = "metaweight", version, about = "Meta-learned example weighting experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Corrupted-label classification sweep over weighting strategies.
    Mnist(MnistArgs),
    /// Dialog-retrieval sweep over training regimes.
    Dialog(DialogArgs),
    /// Render comparison tables from saved run reports.
    Tables(TablesArgs),
    /// Run the finite-difference and oracle verification suites.
    Selftest,
}

#[derive(Clone, Debug)]
enum StrategySel {
    All,
    One(StrategyKind),
}

fn parse_strategy(s: &str) -> Result<StrategySel, String> {
    if s == "all" {
        return Ok(StrategySel::All);
    }
    StrategyKind::from_str(s)
        .map(StrategySel::One)
        .map_err(|e| e.to_string())
}

#[derive(Clone, Debug)]
enum RegimeSel {
    All,
    One(TrainingRegime),
}

fn parse_regime(s: &str) -> Result<RegimeSel, String> {
    if s == "all" {
        return Ok(RegimeSel::All);
    }
    TrainingRegime::from_str(s)
        .map(RegimeSel::One)
        .map_err(|e| e.to_string())
}

fn parse_fraction(s: &str) -> Result<u8, String> {
    match s {
        "5" => Ok(5),
        "10" => Ok(10),
        "15" => Ok(15),
        other => Err(format!("fraction must be 5, 10 or 15, got `{other}`")),
    }
}

#[derive(Args)]
struct MnistArgs {
    /// Weighting strategy to run, or `all`.
    #[arg(long, value_parser = parse_strategy)]
    strategy: Option<StrategySel>,
    /// Number of seeds (base seed, base+1, ...).
    #[arg(long)]
    seeds: Option<usize>,
    /// Base seed; METAWEIGHT_SEED overrides the default.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory with the four official IDX files.
    #[arg(long)]
    mnist_dir: Option<PathBuf>,
    /// Force the synthetic stand-in dataset even if files exist.
    #[arg(long)]
    synthetic: bool,
    /// Output directory for reports.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Desk-scale iteration budget (default).
    #[arg(long, conflicts_with = "full")]
    fast: bool,
    /// Full 15000-iteration budget.
    #[arg(long)]
    full: bool,
    /// Explicit iteration budget override.
    #[arg(long)]
    iters: Option<usize>,
    /// JSON file supplying any of the above fields.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct DialogArgs {
    /// Training regime to run, or `all`.
    #[arg(long, value_parser = parse_regime)]
    regime: Option<RegimeSel>,
    /// Weight source for weighted_multitask.
    #[arg(long, value_parser = parse_strategy)]
    strategy: Option<StrategySel>,
    /// Primary-task data percentage: 5, 10 or 15.
    #[arg(long, value_parser = parse_fraction)]
    fraction: Option<u8>,
    /// Directory with the dialog text corpora.
    #[arg(long)]
    dialog_dir: Option<PathBuf>,
    /// Use the synthetic corpora generator.
    #[arg(long)]
    use_synthetic: bool,
    /// Subsample primary dialogs as a deterministic prefix instead of a
    /// seeded random sample.
    #[arg(long)]
    take_first: bool,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Desk-scale budget: 200 epochs, single-step unrolling, one
    /// meta-update per iteration (default).
    #[arg(long, conflicts_with = "full")]
    fast: bool,
    /// Full budget: 4000 epochs, 5-step unrolling, 10 meta-updates.
    #[arg(long)]
    full: bool,
    /// Explicit epoch budget override.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TablesArgs {
    /// Directory containing run-report JSON files.
    #[arg(long, default_value = "runs")]
    dir: PathBuf,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    strategy: Option<String>,
    regime: Option<String>,
    fraction: Option<u8>,
    seeds: Option<usize>,
    seed: Option<u64>,
    mnist_dir: Option<PathBuf>,
    dialog_dir: Option<PathBuf>,
    synthetic: Option<bool>,
    use_synthetic: Option<bool>,
    take_first: Option<bool>,
    out: Option<PathBuf>,
    fast: Option<bool>,
    full: Option<bool>,
    iters: Option<usize>,
    epochs: Option<usize>,
}

fn load_file_config(path: &Option<PathBuf>) -> Result<FileConfig, Error> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("config file {}: {e}", p.display())))
        }
    }
}

fn env_seed() -> Option<u64> {
    std::env::var("METAWEIGHT_SEED").ok().and_then(|v| v.parse().ok())
}

fn base_seed(cli: Option<u64>, file: Option<u64>) -> u64 {
    cli.or(file).or_else(env_seed).unwrap_or(DEFAULT_BASE_SEED)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Mnist(a) => run_mnist(a),
        Cmd::Dialog(a) => run_dialog(a),
        Cmd::Tables(a) => run_tables(a),
        Cmd::Selftest => run_selftest(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

struct VisionBundle {
    primary: Vec<LabeledImage>,
    related: Vec<LabeledImage>,
    valid: Vec<LabeledImage>,
    test: Vec<LabeledImage>,
    source: &'static str,
}

fn load_vision(mnist_dir: &Option<PathBuf>, force_synth: bool) -> Result<VisionBundle, Error> {
    if let (Some(dir), false) = (mnist_dir, force_synth) {
        let train_full = load_idx(
            &dir.join("train-images-idx3-ubyte"),
            &dir.join("train-labels-idx1-ubyte"),
            Split::Train,
        )?;
        if train_full.len() < 60_000 {
            return Err(Error::MissingData(format!(
                "expected 60000 training images, got {}",
                train_full.len()
            )));
        }
        let train = train_full.take(0..50_000, Split::Train);
        let valid = train_full.take(50_000..60_000, Split::Valid);
        let test = load_idx(
            &dir.join("t10k-images-idx3-ubyte"),
            &dir.join("t10k-labels-idx1-ubyte"),
            Split::Test,
        )?;
        let mut rng = Rng::new(SYNTH_DATA_SEED);
        let related = corrupt(&train, 0.75, 10, &mut rng).to_examples();
        Ok(VisionBundle {
            primary: train.to_examples(),
            related,
            valid: valid.to_examples(),
            test: test.to_examples(),
            source: "idx",
        })
    } else {
        let mut rng = Rng::new(SYNTH_DATA_SEED);
        let train = synth_clusters(
            SYNTH_TRAIN_PER_CLASS,
            SYNTH_CLASSES,
            SYNTH_FEATURES,
            SYNTH_NOISE,
            &mut rng,
            Split::Train,
        );
        let valid = synth_clusters(
            SYNTH_EVAL_PER_CLASS,
            SYNTH_CLASSES,
            SYNTH_FEATURES,
            SYNTH_NOISE,
            &mut rng,
            Split::Valid,
        );
        let test = synth_clusters(
            SYNTH_EVAL_PER_CLASS,
            SYNTH_CLASSES,
            SYNTH_FEATURES,
            SYNTH_NOISE,
            &mut rng,
            Split::Test,
        );
        let related = corrupt(&train, 0.75, SYNTH_CLASSES, &mut rng).to_examples();
        Ok(VisionBundle {
            primary: train.to_examples(),
            related,
            valid: valid.to_examples(),
            test: test.to_examples(),
            source: "synthetic",
        })
    }
}

fn run_mnist(a: MnistArgs) -> Result<(), Error> {
    let file = load_file_config(&a.config)?;
    let strategy = match a.strategy {
        Some(s) => s,
        None => match &file.strategy {
            Some(s) => parse_strategy(s).map_err(Error::Config)?,
            None => StrategySel::All,
        },
    };
    let seeds = a.seeds.or(file.seeds).unwrap_or(5);
    let seed0 = base_seed(a.seed, file.seed);
    let out_dir = a.out.or(file.out).unwrap_or_else(|| PathBuf::from("runs"));
    // An explicit --fast on the command line beats `full` from the file.
    let full = a.full || (!a.fast && file.full.unwrap_or(false) && !file.fast.unwrap_or(false));
    let iters = a
        .iters
        .or(file.iters)
        .unwrap_or(if full { MNIST_FULL_ITERS } else { MNIST_FAST_ITERS });
    let mnist_dir = a.mnist_dir.or(file.mnist_dir);
    let force_synth = a.synthetic || file.synthetic.unwrap_or(false);

    std::fs::create_dir_all(&out_dir)?;
    let bundle = load_vision(&mnist_dir, force_synth)?;
    println!(
        "data: {} ({} primary / {} related / {} valid / {} test)",
        bundle.source,
        bundle.primary.len(),
        bundle.related.len(),
        bundle.valid.len(),
        bundle.test.len()
    );
    let data = VisionData {
        primary: &bundle.primary,
        related: &bundle.related,
        valid: &bundle.valid,
        test: &bundle.test,
    };
    let mut cfg = MetaTrainConfig::mnist_default();
    cfg.max_iters = iters;
    let kinds: Vec<StrategyKind> = match strategy {
        StrategySel::All => StrategyKind::ALL.to_vec(),
        StrategySel::One(k) => vec![k],
    };
    let features = SYNTH_FEATURES;
    let classes = SYNTH_CLASSES;

    for kind in kinds {
        let mut reports = Vec::new();
        for s in 0..seeds {
            let seed = seed0 + s as u64;
            let snapshot = serde_json::json!({
                "experiment": "mnist",
                "strategy": kind.as_str(),
                "iters": iters,
                "data": bundle.source,
                "seed": seed,
            });
            let out = run_vision_strategy(&data, features, classes, kind, &cfg, seed, snapshot)?;
            let stem = format!("mnist_{}_seed{}", kind.as_str(), seed);
            out.report.save(&out_dir.join(format!("{stem}.json")))?;
            if kind == StrategyKind::Learned {
                std::fs::write(
                    out_dir.join(format!("{stem}_hist.csv")),
                    out.report.histograms_csv(),
                )?;
                if let Some(h) = out.report.weight_snapshots.last() {
                    println!(
                        "  seed {seed}: test {:.2}%  final weights: correct {:.4} / incorrect {:.4}",
                        out.report.test_accuracy,
                        h.mean_correct.unwrap_or(f64::NAN),
                        h.mean_incorrect.unwrap_or(f64::NAN)
                    );
                } else {
                    println!("  seed {seed}: test {:.2}%", out.report.test_accuracy);
                }
            } else {
                println!("  seed {seed}: test {:.2}%", out.report.test_accuracy);
            }
            reports.push(out.report);
        }
        if reports.len() >= 2 {
            let (mean, std) = aggregate(&reports)?;
            println!("{:<16} {:6.2} +/- {:.2}", kind.as_str(), mean, std);
        } else if let Some(r) = reports.first() {
            println!("{:<16} {:6.2}", kind.as_str(), r.test_accuracy);
        }
    }
    Ok(())
}

/// Find a corpus file whose name contains all given fragments
/// (case-insensitive); matches both the official and plain layouts.
fn find_dialog_file(dir: &Path, fragments: &[&str]) -> Result<PathBuf, Error> {
    let mut names: Vec<String> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    for name in &names {
        let lower = name.to_lowercase();
        if fragments.iter().all(|f| lower.contains(f)) {
            return Ok(dir.join(name));
        }
    }
    Err(Error::MissingData(format!(
        "no file matching {fragments:?} in {}",
        dir.display()
    )))
}

fn load_dialog_dir(dir: &Path) -> Result<DialogCorporaSet, Error> {
    let load = |fragments: &[&str], task, split| -> Result<DialogCorpus, Error> {
        parse_babi(&find_dialog_file(dir, fragments)?, task, split)
    };
    Ok(DialogCorporaSet {
        related_train: load(&["task5", "trn"], DialogTask::Related, Split::Train)?,
        related_valid: load(&["task5", "dev"], DialogTask::Related, Split::Valid)?,
        primary_train: load(&["task3", "trn"], DialogTask::Primary, Split::Train)?,
        primary_valid: load(&["task3", "dev"], DialogTask::Primary, Split::Valid)?,
        primary_test: load(&["task3", "tst"], DialogTask::Primary, Split::Test)?,
    })
}

/// Desk-scale dialog budget: 200 epochs with single-step unrolling and
/// one meta-update per iteration.
pub fn dialog_fast_config() -> (MetaTrainConfig, usize) {
    let mut cfg = MetaTrainConfig::dialog_default();
    cfg.unroll_depth = 1;
    cfg.meta_updates_per_iter = 1;
    cfg.eval_every = 250;
    (cfg, DIALOG_FAST_EPOCHS)
}

fn run_dialog(a: DialogArgs) -> Result<(), Error> {
    let file = load_file_config(&a.config)?;
    let regime = match a.regime {
        Some(r) => r,
        None => match &file.regime {
            Some(r) => parse_regime(r).map_err(Error::Config)?,
            None => RegimeSel::All,
        },
    };
    let strategy = match a.strategy {
        Some(StrategySel::All) => {
            return Err(Error::Config("dialog --strategy must name one strategy".into()))
        }
        Some(StrategySel::One(k)) => k,
        None => match &file.strategy {
            Some(s) => match parse_strategy(s).map_err(Error::Config)? {
                StrategySel::One(k) => k,
                StrategySel::All => {
                    return Err(Error::Config("dialog strategy must name one strategy".into()))
                }
            },
            None => StrategyKind::Learned,
        },
    };
    let fraction = a.fraction.or(file.fraction).unwrap_or(5);
    let seeds = a.seeds.or(file.seeds).unwrap_or(3);
    let seed0 = base_seed(a.seed, file.seed);
    let out_dir = a.out.or(file.out).unwrap_or_else(|| PathBuf::from("runs"));
    // An explicit --fast on the command line beats `full` from the file.
    let full = a.full || (!a.fast && file.full.unwrap_or(false) && !file.fast.unwrap_or(false));
    let use_synth = a.use_synthetic || file.use_synthetic.unwrap_or(false);
    let take_first = a.take_first || file.take_first.unwrap_or(false);
    let dialog_dir = a.dialog_dir.or(file.dialog_dir);

    std::fs::create_dir_all(&out_dir)?;
    let n_primary = fraction as usize * 10;
    let (data, source) = if use_synth || dialog_dir.is_none() {
        let gen_cfg = SyntheticConfig {
            primary_train: n_primary,
            primary_valid: n_primary,
            ..SyntheticConfig::fast()
        };
        let mut rng = Rng::new(SYNTH_DATA_SEED);
        (
            DialogCorporaSet::from_synthetic(generate_synthetic(&gen_cfg, &mut rng)?),
            "synthetic",
        )
    } else {
        let dir = dialog_dir.expect("checked above");
        let mut set = load_dialog_dir(&dir)?;
        let mut rng = Rng::new(SYNTH_DATA_SEED);
        let frac = fraction as usize;
        let n_train = set.primary_train.dialogs.len() * frac / 100;
        let n_valid = set.primary_valid.dialogs.len() * frac / 100;
        set.primary_train = subsample(&set.primary_train, n_train, &mut rng, take_first)?;
        set.primary_valid = subsample(&set.primary_valid, n_valid, &mut rng, take_first)?;
        (set, "files")
    };
    println!(
        "data: {source} ({} primary train dialogs, {} related train dialogs)",
        data.primary_train.dialogs.len(),
        data.related_train.dialogs.len()
    );

    let (mut cfg, mut epochs) = if full {
        (MetaTrainConfig::dialog_default(), DIALOG_FULL_EPOCHS)
    } else {
        dialog_fast_config()
    };
    if let Some(e) = a.epochs.or(file.epochs) {
        epochs = e;
    }
    cfg.max_iters = 0; // set per regime from the epoch budget

    let regimes: Vec<TrainingRegime> = match regime {
        RegimeSel::All => vec![
            TrainingRegime::PrimaryOnly,
            TrainingRegime::PretrainFinetune,
            TrainingRegime::Pooled,
            TrainingRegime::Multitask,
            TrainingRegime::WeightedMultitask,
        ],
        RegimeSel::One(r) => vec![r],
    };

    for regime in regimes {
        let mut reports = Vec::new();
        for s in 0..seeds {
            let seed = seed0 + s as u64;
            let spec = DialogRunSpec {
                regime,
                strategy,
                cfg: cfg.clone(),
                epochs,
                embed_dim: metaweight::memnet::EMBED_DIM,
                hops: metaweight::memnet::HOPS,
                seed,
            };
            let snapshot = serde_json::json!({
                "experiment": "dialog",
                "regime": regime.as_str(),
                "strategy": strategy.as_str(),
                "fraction": fraction,
                "epochs": epochs,
                "data": source,
                "seed": seed,
            });
            let report = run_dialog_regime(&data, &spec, snapshot)?;
            let stem = format!(
                "dialog_{}_{}_f{}_seed{}",
                regime.as_str(),
                strategy.as_str(),
                fraction,
                seed
            );
            report.save(&out_dir.join(format!("{stem}.json")))?;
            println!("  {} seed {seed}: test {:.2}%", regime.as_str(), report.test_accuracy);
            reports.push(report);
        }
        if reports.len() >= 2 {
            let (mean, std) = aggregate(&reports)?;
            println!("{:<20} {:6.2} +/- {:.2}", regime.as_str(), mean, std);
        }
    }
    Ok(())
}

struct TableCell {
    mean: f64,
    std: Option<f64>,
}

fn fmt_cell(c: Option<&TableCell>) -> String {
    match c {
        None => "      --     ".to_string(),
        Some(TableCell { mean, std: Some(s) }) => format!("{mean:6.2} +/- {s:4.2}"),
        Some(TableCell { mean, std: None }) => format!("{mean:6.2}        "),
    }
}

fn collect_reports(dir: &Path) -> Result<Vec<RunReport>, Error> {
    let mut reports = Vec::new();
    if !dir.exists() {
        return Ok(reports);
    }
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("json") {
            if let Ok(r) = RunReport::load(&path) {
                reports.push(r);
            }
        }
    }
    Ok(reports)
}

fn summarize(group: &[&RunReport]) -> TableCell {
    if group.len() >= 2 {
        let values: Vec<f64> = group.iter().map(|r| r.test_accuracy).collect();
        let (mean, std) = metaweight::report::mean_std(&values);
        TableCell { mean, std: Some(std) }
    } else {
        TableCell {
            mean: group[0].test_accuracy,
            std: None,
        }
    }
}

fn run_tables(a: TablesArgs) -> Result<(), Error> {
    let reports = collect_reports(&a.dir)?;
    if reports.is_empty() {
        println!("warning: no run reports found in {}", a.dir.display());
    }
    let cfg_str = |r: &RunReport, key: &str| -> Option<String> {
        r.config.get(key).and_then(|v| v.as_str()).map(String::from)
    };

    // Classification table.
    let mut by_strategy: BTreeMap<String, Vec<&RunReport>> = BTreeMap::new();
    for r in &reports {
        if cfg_str(r, "experiment").as_deref() == Some("mnist") {
            if let Some(s) = cfg_str(r, "strategy") {
                by_strategy.entry(s).or_default().push(r);
            }
        }
    }
    println!("Corrupted-label classification: test accuracy (%)");
    println!("{:<18} {:>15}   {:>15}", "weighting", "this run", "reference");
    let mnist_rows: [(&str, &str); 5] = [
        ("one_for_all", "21.63 +/- 3.81"),
        ("random_fixed", "20.81 +/- 4.46"),
        ("random_changing", "20.40 +/- 4.42"),
        ("learned", "87.86 +/- 0.17"),
        ("oracle", "90.32 +/- 0.33"),
    ];
    for (name, reference) in mnist_rows {
        let cell = by_strategy.get(name).map(|g| summarize(g));
        println!("{:<18} {:>15}   {:>15}", name, fmt_cell(cell.as_ref()), reference);
    }

    // Dialog table: rows = regimes (plus weighted variants), columns =
    // primary dialog counts.
    println!();
    println!("Dialog retrieval: per-turn test accuracy (%) by primary dialog count");
    let mut by_cell: BTreeMap<(String, u8), Vec<&RunReport>> = BTreeMap::new();
    for r in &reports {
        if cfg_str(r, "experiment").as_deref() == Some("dialog") {
            let regime = cfg_str(r, "regime");
            let strategy = cfg_str(r, "strategy");
            let fraction = r.config.get("fraction").and_then(|v| v.as_u64()).map(|f| f as u8);
            if let (Some(reg), Some(st), Some(f)) = (regime, strategy, fraction) {
                let key = if reg == "weighted_multitask" {
                    format!("{reg}:{st}")
                } else {
                    reg
                };
                by_cell.entry((key, f)).or_default().push(r);
            }
        }
    }
    let dialog_rows: [(&str, &str, [&str; 3]); 7] = [
        ("primary_only", "primary_only", ["54.7 +/- 1.3", "59.3 +/- 0.5", "61.1 +/- 0.5"]),
        ("pretrain_finetune", "pretrain_finetune", ["32.8 +/- 3.5", "42.1 +/- 4.7", "47.8 +/- 0.8"]),
        ("pooled", "pooled", ["37.1 +/- 4.1", "50.9 +/- 1.7", "58.6 +/- 0.7"]),
        ("multitask", "multitask", ["51.2 +/- 2.4", "58.2 +/- 1.2", "60.6 +/- 0.7"]),
        ("weighted_multitask:learned", "weighted (learned)", ["57.7 +/- 1.6", "64.6 +/- 0.8", "67.1 +/- 0.6"]),
        ("weighted_multitask:random_fixed", "weighted (random_fixed)", ["50.7 +/- 2.0", "58.7 +/- 0.8", "61.2 +/- 1.0"]),
        ("weighted_multitask:random_changing", "weighted (random_changing)", ["52.3 +/- 0.9", "58.7 +/- 1.0", "59.8 +/- 0.8"]),
    ];
    println!(
        "{:<28} {:>15} {:>15} {:>15}",
        "method", "50 dialogs", "100 dialogs", "150 dialogs"
    );
    for (key, label, refs) in dialog_rows {
        let mut line = format!("{label:<28}");
        for f in [5u8, 10, 15] {
            let cell = by_cell.get(&(key.to_string(), f)).map(|g| summarize(g));
            line.push_str(&format!(" {:>15}", fmt_cell(cell.as_ref())));
        }
        println!("{line}");
        println!(
            "{:<28} {:>15} {:>15} {:>15}",
            "  reference", refs[0], refs[1], refs[2]
        );
    }
    Ok(())
}

fn check(name: &str, ok: bool, detail: &str, failures: &mut usize) {
    if ok {
        println!("PASS {name}");
    } else {
        println!("FAIL {name}: {detail}");
        *failures += 1;
    }
}

fn run_selftest() -> Result<(), Error> {
    let mut failures = 0usize;
    let mut rng = Rng::new(99);

    // Classifier gradient.
    {
        let model = {
            let mut m = LinearClassifier::new(6, 4);
            for k in 0..m.params().len() {
                *m.params_mut().flat_mut(k) = rng.uniform_range(-0.5, 0.5);
            }
            m
        };
        let ex = LabeledImage {
            pixels: Arc::new((0..6).map(|_| rng.uniform()).collect()),
            label: 2,
            shown_label: 2,
            indicator: None,
        };
        let analytic = model.grad_weighted(&[&ex], &[1.0])?;
        let base = model.clone();
        let fd = finite_difference_grad(
            |p| {
                let mut probe = base.clone();
                *probe.params_mut() = p.clone();
                probe.sum_loss(&[&ex]).unwrap()
            },
            model.params(),
            1e-6,
        )?;
        let err = relative_grad_error(&analytic, &fd);
        check("classifier gradient vs finite differences", err <= 1e-5, &format!("rel err {err}"), &mut failures);
    }

    // Weight perceptron gradient.
    {
        let wnet = WeightPerceptron::new(6, 4, 0.3, &mut rng);
        let ex = LabeledImage {
            pixels: Arc::new((0..6).map(|_| rng.uniform()).collect()),
            label: 1,
            shown_label: 3,
            indicator: Some(false),
        };
        let analytic = wnet.grad_weights(&[&ex], &[1.3])?;
        let base = wnet.clone();
        let fd = finite_difference_grad(
            |p| {
                let mut probe = base.clone();
                *probe.params_mut() = p.clone();
                1.3 * probe.weights(&[&ex]).unwrap()[0]
            },
            wnet.params(),
            1e-6,
        )?;
        let err = relative_grad_error(&analytic, &fd);
        check("weight perceptron gradient vs finite differences", err <= 1e-5, &format!("rel err {err}"), &mut failures);
    }

    // Memory network gradient (two-head batch).
    {
        let sentences: Vec<Vec<String>> = ["a b c", "d e", "f g a", "b d f"]
            .iter()
            .map(|s| metaweight::memnet::tokenize(s))
            .collect();
        let slices: Vec<&[String]> = sentences.iter().map(|s| s.as_slice()).collect();
        let vocab = Vocabulary::build(slices.into_iter());
        let cands = Arc::new(CandidateSet::build(
            &["a b c".into(), "d e".into(), "f g a".into()],
            &vocab,
        ));
        let cands2 = Arc::new(CandidateSet::build(&["b d f".into(), "d e".into()], &vocab));
        let model = MemoryNetwork::new(vocab.len(), 4, 3, cands.clone(), Some(cands2), &mut rng)?;
        let enc = |s: &str| metaweight::memnet::encode_bow(&metaweight::memnet::tokenize(s), &vocab);
        let mut ex1 = metaweight::memnet::DialogExample {
            memory: vec![enc("a b"), enc("d e")],
            query: enc("f g"),
            answer: 1,
            answer_enc: enc("d e"),
            task_tag: TaskTag::Primary,
        };
        let mut ex2 = ex1.clone();
        ex2.task_tag = TaskTag::Related;
        ex2.answer = 0;
        ex1.answer = 2;
        let batch = [&ex1, &ex2];
        let analytic = model.grad_weighted(&batch, &[1.0, 0.7])?;
        let base = model.clone();
        let fd = finite_difference_grad(
            |p| {
                let mut probe = base.clone();
                *probe.params_mut() = p.clone();
                let losses = probe.batch_losses(&batch).unwrap();
                losses[0] + 0.7 * losses[1]
            },
            model.params(),
            1e-6,
        )?;
        let err = relative_grad_error(&analytic, &fd);
        check("memory network gradient vs finite differences", err <= 1e-5, &format!("rel err {err}"), &mut failures);

        let wnet = WeightMemNet::new(vocab.len(), 4, 3, &mut rng)?;
        let analytic = wnet.grad_weights(&[&ex1], &[2.0])?;
        let base = wnet.clone();
        let fd = finite_difference_grad(
            |p| {
                let mut probe = base.clone();
                *probe.params_mut() = p.clone();
                2.0 * probe.weights(&[&ex1]).unwrap()[0]
            },
            wnet.params(),
            1e-6,
        )?;
        let err = relative_grad_error(&analytic, &fd);
        check("weight memnet gradient vs finite differences", err <= 1e-5, &format!("rel err {err}"), &mut failures);
    }

    // Oracle weighting equals training on the correct-label subset.
    {
        let mut data_rng = Rng::new(5);
        let train = synth_clusters(8, 4, 12, 0.2, &mut data_rng, Split::Train);
        let related = corrupt(&train, 0.5, 4, &mut data_rng).to_examples();
        let model = LinearClassifier::new(12, 4);
        let refs: Vec<&LabeledImage> = related.iter().collect();
        let mut strategy = WeightingStrategy::new(StrategyKind::Oracle, related.len(), Rng::new(0));
        let ids: Vec<usize> = (0..related.len()).collect();
        let weights = strategy.weights_for::<_, WeightPerceptron>(&ids, &refs, None)?;
        let g_oracle = model.grad_weighted(&refs, &weights)?;
        let correct: Vec<&LabeledImage> = related
            .iter()
            .filter(|e| e.indicator == Some(true))
            .collect();
        let g_subset = model.grad_weighted(&correct, &vec![1.0; correct.len()])?;
        let mut diff = g_oracle.clone();
        diff.axpy(-1.0, &g_subset)?;
        let err = diff.max_abs();
        check("oracle weights equal correct-subset gradient", err <= 1e-12, &format!("max abs diff {err}"), &mut failures);
    }

    if failures > 0 {
        return Err(Error::Config(format!("{failures} selftest check(s) failed")));
    }
    println!("all selftest checks passed");
    Ok(())
}
