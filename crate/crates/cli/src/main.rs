use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use biogate::datasets::{build_corpus, ingest_path, list_signal_files, ClassSpec, Corpus, CorpusSpec, Source, Split};
use biogate::ensemble::{
    forward_feature_selection, importance_ordered_ablation, train, AblationOrder, AblationPlan, Algorithm,
    Metrics, TrainedModel,
};
use biogate::eval::{
    eval_corpus_spec, run_distortion_sweep, run_timing, write_ablation_csv, write_metrics_csv, write_timing_csv,
    EvalSet, ExperimentConfig, SweepKind, SweepOptions,
};
use biogate::features::{extract_batch, FeatureConfig, FeatureMatrix, FeatureRow, FeatureTable};
use biogate::filter::{write_verdicts, BlockReason, FilterVerdict, PrivacyFilter};
use biogate::rng::derive_seed;
use biogate::signal::{ClassLabel, Segment};
use biogate::{Error, Result};

const DEFAULT_SEED: u64 = 42;
const TAG_EVAL_CORPUS: u64 = 0xE7A1;

/// Biometric signal classifier and fail-closed privacy filter.
///
/// Every command is deterministic for a fixed seed and config. Set
/// RAYON_NUM_THREADS to control parallelism.
#[derive(Parser)]
#[command(name = "biogate", version)]
struct Cli {
    /// Master seed (overrides `seed` in the config file) [default: 42]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML experiment config
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file or directory (see each command for its default)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpus and write it to a directory [out: corpus/]
    Synth(SynthArgs),
    /// Build a corpus from directories of CSV/WAV recordings [out: corpus/]
    Ingest(IngestArgs),
    /// Extract the 12 features to CSV [out: features.csv]
    Extract(ExtractArgs),
    /// Train a classifier on a corpus train split or a feature CSV [out: model.json]
    Train(TrainArgs),
    /// Accuracy and per-class macro-F1 metrics on a test set [out: metrics.csv]
    Eval(EvalArgs),
    /// Distortion robustness sweeps, CSV plus SVG per kind [out: sweeps/]
    Sweep(SweepArgs),
    /// Importance-ordered feature-count x sample-size grid [out: ablation.csv]
    Ablate(AblateArgs),
    /// Gate recordings; only NON_BIO files are copied to passed/ [out: filtered/]
    Filter(FilterArgs),
    /// Gain, permutation and forward-selection importance [out: importance.csv]
    Importance(ImportanceArgs),
    /// Training and prediction wall-clock times [out: timing.csv]
    Timing(TimingArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Segments per class as ECG,EEG,B_MOV,NON_BIO (default 200,150,75,100)
    #[arg(long, value_delimiter = ',', num_args = 4)]
    counts: Option<Vec<usize>>,
}

#[derive(Args)]
struct IngestArgs {
    /// LABEL=DIR pairs, e.g. ECG=data/ecg (repeatable)
    #[arg(long = "class", required = true, value_parser = parse_class_dir)]
    classes: Vec<(ClassLabel, PathBuf)>,
    /// Segment length in seconds
    #[arg(long, default_value_t = 8.0)]
    segment_s: f64,
    /// Maximum segments per class
    #[arg(long, default_value_t = 1_000_000)]
    max_per_class: usize,
}

#[derive(Args)]
struct CorpusArg {
    /// Corpus directory written by `synth` or `ingest`
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Feature CSV written by `extract` (every row is used)
    #[arg(long, conflicts_with = "corpus")]
    features: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long, conflicts_with = "input")]
    corpus: Option<PathBuf>,
    /// Which corpus split to extract: train, test or all
    #[arg(long, default_value = "all")]
    split: String,
    /// A signal file or a directory of them (unlabeled rows)
    #[arg(long = "in")]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// rf, gbt_exact or gbt_hist
    #[arg(long)]
    algo: Algorithm,
    #[command(flatten)]
    data: CorpusArg,
}

#[derive(Args)]
struct EvalArgs {
    /// Model files (repeatable)
    #[arg(long = "model", required = true)]
    models: Vec<PathBuf>,
    #[command(flatten)]
    data: CorpusArg,
}

#[derive(Args)]
struct SweepArgs {
    /// horizontal, vertical, awgn, crop, superimpose or all
    #[arg(long)]
    kind: String,
    /// Comma-separated grid (default from config)
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Training corpus; all three algorithms are trained on its train split
    #[arg(long, required_unless_present = "models")]
    corpus: Option<PathBuf>,
    /// Pre-trained models instead of training (repeatable)
    #[arg(long = "model")]
    models: Vec<PathBuf>,
    /// Evaluation corpus directory (default: generated held-out set)
    #[arg(long)]
    eval_corpus: Option<PathBuf>,
    /// Eval segments per class for the generated set
    #[arg(long)]
    n_per_class: Option<usize>,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Algorithms to run (default all three)
    #[arg(long = "algo", value_delimiter = ',')]
    algos: Vec<Algorithm>,
    /// Grow feature subsets from the most important feature instead
    #[arg(long)]
    most_important_first: bool,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    model: PathBuf,
    /// Directory of .csv / .wav recordings
    #[arg(long = "in")]
    input: PathBuf,
    /// Minimum duration in seconds (default from config, else 8)
    #[arg(long)]
    t_star: Option<f64>,
    /// Strict mode: also require P(NON_BIO) >= this
    #[arg(long)]
    min_probability: Option<f64>,
}

#[derive(Args)]
struct ImportanceArgs {
    #[arg(long)]
    model: PathBuf,
    /// Corpus for permutation importance (test split) and forward selection
    /// (train split)
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Shuffles per feature for permutation importance
    #[arg(long, default_value_t = 10)]
    repeats: usize,
}

#[derive(Args)]
struct TimingArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Algorithms to time (default all three)
    #[arg(long = "algo", value_delimiter = ',')]
    algos: Vec<Algorithm>,
}

fn parse_class_dir(s: &str) -> std::result::Result<(ClassLabel, PathBuf), String> {
    let (label, dir) = s.split_once('=').ok_or("expected LABEL=DIR")?;
    let label = label.parse::<ClassLabel>().map_err(|e| e.to_string())?;
    Ok((label, PathBuf::from(dir)))
}

struct Ctx {
    seed: u64,
    config: ExperimentConfig,
    out: Option<PathBuf>,
}

impl Ctx {
    fn out(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let ctx = Ctx {
        seed: cli.seed.or(config.seed).unwrap_or(DEFAULT_SEED),
        config,
        out: cli.out,
    };
    match cli.command {
        Command::Synth(a) => synth(&ctx, a),
        Command::Ingest(a) => ingest(&ctx, a),
        Command::Extract(a) => extract(&ctx, a),
        Command::Train(a) => train_cmd(&ctx, a),
        Command::Eval(a) => eval_cmd(&ctx, a),
        Command::Sweep(a) => sweep(&ctx, a),
        Command::Ablate(a) => ablate(&ctx, a),
        Command::Filter(a) => filter(&ctx, a),
        Command::Importance(a) => importance(&ctx, a),
        Command::Timing(a) => timing(&ctx, a),
    }
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => Ok(std::fs::create_dir_all(p)?),
        _ => Ok(()),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    create_parent(path)?;
    std::fs::write(path, bytes)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn save_corpus(corpus: &Corpus, root: &Path) -> Result<()> {
    std::fs::create_dir_all(root)?;
    corpus.save(root)?;
    let mut counts = [0usize; 4];
    for i in &corpus.items {
        counts[i.label.index()] += 1;
    }
    eprintln!(
        "wrote {} segments (ECG {}, EEG {}, B_MOV {}, NON_BIO {}) to {}",
        corpus.len(),
        counts[0],
        counts[1],
        counts[2],
        counts[3],
        root.display()
    );
    Ok(())
}

fn synth(ctx: &Ctx, a: SynthArgs) -> Result<()> {
    let spec = match a.counts {
        Some(c) => CorpusSpec::scaled(ctx.seed, [c[0], c[1], c[2], c[3]]),
        None => ctx.config.corpus_spec(ctx.seed),
    };
    save_corpus(&build_corpus(&spec)?, &ctx.out("corpus"))
}

fn ingest(ctx: &Ctx, a: IngestArgs) -> Result<()> {
    let classes = a
        .classes
        .into_iter()
        .map(|(label, dir)| {
            let files = list_signal_files(&dir)?;
            let mut total = 0usize;
            for f in &files {
                let s = ingest_path(f)?;
                total += (s.duration_s() / a.segment_s).floor() as usize;
            }
            if total == 0 {
                return Err(Error::InsufficientSourceData(format!(
                    "{}: no recording holds a full {} s segment",
                    dir.display(),
                    a.segment_s
                )));
            }
            Ok(ClassSpec {
                label,
                count: total.min(a.max_per_class),
                source: Source::Ingest { path: dir },
                sample_rates_hz: vec![],
                segment_s: a.segment_s,
                segments_per_parent: 1,
                distortions: vec![],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let spec = CorpusSpec {
        classes,
        split_frac: 0.7,
        master_seed: ctx.seed,
    };
    save_corpus(&build_corpus(&spec)?, &ctx.out("corpus"))
}

fn parse_split(s: &str) -> Result<Option<Split>> {
    match s {
        "train" => Ok(Some(Split::Train)),
        "test" => Ok(Some(Split::Test)),
        "all" => Ok(None),
        other => Err(Error::InvalidParameter(format!("unknown split `{other}` (train, test or all)"))),
    }
}

fn extract(ctx: &Ctx, a: ExtractArgs) -> Result<()> {
    let cfg = &ctx.config.features;
    let table = match (&a.corpus, &a.input) {
        (Some(c), _) => Corpus::load(c)?.feature_table(parse_split(&a.split)?, cfg)?,
        (None, Some(input)) => {
            let files = if input.is_dir() { list_signal_files(input)? } else { vec![input.clone()] };
            let signals = files.iter().map(|f| ingest_path(f)).collect::<Result<Vec<_>>>()?;
            let segs: Vec<Segment> = signals.iter().map(|s| s.as_segment()).collect();
            let rows = extract_batch(&segs, cfg)
                .into_iter()
                .zip(&signals)
                .map(|(fv, s)| {
                    Ok(FeatureRow {
                        source_id: s.source_id.clone(),
                        label: s.label,
                        features: fv?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            FeatureTable { rows }
        }
        (None, None) => return Err(Error::InvalidParameter("extract needs --corpus or --in".into())),
    };
    let mut buf = Vec::new();
    table.write_to(&mut buf)?;
    write_file(&ctx.out("features.csv"), &buf)
}

fn labeled_data(data: &CorpusArg, split: Split, cfg: &FeatureConfig) -> Result<(FeatureMatrix, Vec<ClassLabel>)> {
    match (&data.corpus, &data.features) {
        (Some(c), _) => Corpus::load(c)?.feature_table(Some(split), cfg)?.labeled(),
        (None, Some(f)) => FeatureTable::read_csv(f)?.labeled(),
        (None, None) => Err(Error::InvalidParameter("need --corpus or --features".into())),
    }
}

fn train_cmd(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let (x, y) = labeled_data(&a.data, Split::Train, &ctx.config.features)?;
    let model = train(&x, &y, a.algo, &ctx.config.hyperparams.get(a.algo), ctx.seed)?;
    write_file(&ctx.out("model.json"), (model.to_json() + "\n").as_bytes())
}

fn eval_cmd(ctx: &Ctx, a: EvalArgs) -> Result<()> {
    let (x, y) = labeled_data(&a.data, Split::Test, &ctx.config.features)?;
    let mut results = Vec::new();
    for p in &a.models {
        let m = TrainedModel::load(p)?;
        let metrics = Metrics::compute(&y, &m.predict_matrix(&x)?);
        eprintln!("{}: accuracy {:.4}, macro-F1 {:.4}", m.algorithm, metrics.accuracy, metrics.macro_f1);
        results.push((m.algorithm, metrics));
    }
    let mut buf = Vec::new();
    write_metrics_csv(&mut buf, &results)?;
    write_file(&ctx.out("metrics.csv"), &buf)
}

fn train_all(ctx: &Ctx, corpus: &Path) -> Result<Vec<TrainedModel>> {
    let (x, y) = Corpus::load(corpus)?.feature_table(Some(Split::Train), &ctx.config.features)?.labeled()?;
    Algorithm::ALL
        .iter()
        .map(|&a| train(&x, &y, a, &ctx.config.hyperparams.get(a), ctx.seed))
        .collect()
}

fn sweep(ctx: &Ctx, a: SweepArgs) -> Result<()> {
    let kinds: Vec<SweepKind> = if a.kind == "all" {
        SweepKind::ALL.to_vec()
    } else {
        vec![a.kind.parse()?]
    };
    if a.grid.is_some() && kinds.len() > 1 {
        return Err(Error::InvalidParameter("--grid needs a single --kind".into()));
    }
    let models = if a.models.is_empty() {
        train_all(ctx, a.corpus.as_deref().expect("clap enforces --corpus or --model"))?
    } else {
        a.models.iter().map(|p| TrainedModel::load(p)).collect::<Result<Vec<_>>>()?
    };
    let sc = &ctx.config.sweep;
    let eval = match &a.eval_corpus {
        Some(dir) => EvalSet::from_corpus(&Corpus::load(dir)?, None),
        None => {
            let seed = sc.eval_seed.unwrap_or_else(|| derive_seed(ctx.seed, &[TAG_EVAL_CORPUS]));
            let spec = eval_corpus_spec(seed, a.n_per_class.unwrap_or(sc.n_per_class));
            EvalSet::from_corpus(&build_corpus(&spec)?, None)
        }
    };
    let options = SweepOptions {
        window_s: sc.window_s,
        features: ctx.config.features,
        ..SweepOptions::default()
    };
    let dir = ctx.out("sweeps");
    std::fs::create_dir_all(&dir)?;
    for kind in kinds {
        let grid = a.grid.clone().unwrap_or_else(|| sc.grid(kind).to_vec());
        let result = run_distortion_sweep(&models, &eval, kind, &grid, ctx.seed, &options)?;
        let mut buf = Vec::new();
        result.write_csv(&mut buf)?;
        write_file(&dir.join(format!("sweep_{kind}.csv")), &buf)?;
        write_file(&dir.join(format!("sweep_{kind}.svg")), result.to_svg().as_bytes())?;
    }
    Ok(())
}

fn ablate(ctx: &Ctx, a: AblateArgs) -> Result<()> {
    let corpus = Corpus::load(&a.corpus)?;
    let cfg = &ctx.config.features;
    let (xtr, ytr) = corpus.feature_table(Some(Split::Train), cfg)?.labeled()?;
    let (xte, yte) = corpus.feature_table(Some(Split::Test), cfg)?.labeled()?;
    let smallest = ClassLabel::ALL
        .iter()
        .map(|&c| ytr.iter().filter(|&&l| l == c).count())
        .filter(|&n| n > 0)
        .min()
        .unwrap_or(0);
    let ab = &ctx.config.ablation;
    let mut sizes: Vec<Option<usize>> = Vec::new();
    for &n in &ab.samples_per_class {
        if n <= smallest {
            sizes.push(Some(n));
        } else {
            eprintln!("skipping {n} samples per class: smallest training class has {smallest}");
        }
    }
    sizes.push(None);
    let plan = AblationPlan {
        feature_counts: ab.feature_counts.clone(),
        samples_per_class: sizes,
        order: if a.most_important_first {
            AblationOrder::MostImportantFirst
        } else {
            AblationOrder::LeastImportantFirst
        },
    };
    let algos = if a.algos.is_empty() { Algorithm::ALL.to_vec() } else { a.algos };
    let mut results = Vec::new();
    for algo in algos {
        let hp = ctx.config.hyperparams.get(algo);
        results.push((algo, importance_ordered_ablation(&xtr, &ytr, &xte, &yte, algo, &hp, &plan, ctx.seed)?));
    }
    let mut buf = Vec::new();
    write_ablation_csv(&mut buf, &results)?;
    write_file(&ctx.out("ablation.csv"), &buf)
}

fn filter(ctx: &Ctx, a: FilterArgs) -> Result<()> {
    let mut config = ctx.config.filter;
    if let Some(t) = a.t_star {
        config.t_star_s = t;
    }
    if a.min_probability.is_some() {
        config.strict_min_probability = a.min_probability;
    }
    let gate = PrivacyFilter::new(TrainedModel::load(&a.model)?, config)?;
    let files = list_signal_files(&a.input)?;
    let out = ctx.out("filtered");
    let passed_dir = out.join("passed");
    std::fs::create_dir_all(&passed_dir)?;

    let mut verdicts = Vec::with_capacity(files.len());
    for f in &files {
        let v = match ingest_path(f) {
            Ok(signal) => gate.classify_and_gate(&signal),
            Err(e) => {
                eprintln!("{}: {e}", f.display());
                let id = f.file_stem().map_or_else(|| f.display().to_string(), |s| s.to_string_lossy().into());
                FilterVerdict::blocked(&id, BlockReason::FeatureError)
            }
        };
        if v.allowed_to_pass {
            std::fs::copy(f, passed_dir.join(f.file_name().expect("listed files have names")))?;
        }
        verdicts.push(v);
    }
    let n_pass = verdicts.iter().filter(|v| v.allowed_to_pass).count();
    eprintln!("{n_pass} of {} recordings passed", verdicts.len());
    let mut buf = Vec::new();
    write_verdicts(&mut buf, &verdicts)?;
    write_file(&out.join("verdicts.csv"), &buf)
}

fn importance(ctx: &Ctx, a: ImportanceArgs) -> Result<()> {
    let model = TrainedModel::load(&a.model)?;
    let gain = model.feature_importance();
    let mut header = String::from("feature,gain_importance");
    let mut extra: Vec<Vec<String>> = vec![Vec::new(); gain.len()];
    if let Some(c) = &a.corpus {
        let corpus = Corpus::load(c)?;
        let cfg = &ctx.config.features;
        let (xte, yte) = corpus.feature_table(Some(Split::Test), cfg)?.labeled()?;
        let perm = model.permutation_importance(&xte, &yte, a.repeats, ctx.seed)?;
        let (xtr, ytr) = corpus.feature_table(Some(Split::Train), cfg)?.labeled()?;
        let trace = forward_feature_selection(&xtr, &ytr, model.algorithm, &model.hyperparams, ctx.seed)?;
        header.push_str(",permutation_importance,selection_rank,selection_accuracy");
        for (i, row) in extra.iter_mut().enumerate() {
            let step = trace.order.iter().position(|&c| c == i).expect("selection adds every feature");
            row.push(perm[i].1.to_string());
            row.push((step + 1).to_string());
            row.push(trace.accuracy[step].to_string());
        }
    }
    let mut out = header + "\n";
    for ((name, g), rest) in gain.iter().zip(&extra) {
        out.push_str(name);
        out.push(',');
        out.push_str(&g.to_string());
        for v in rest {
            out.push(',');
            out.push_str(v);
        }
        out.push('\n');
    }
    write_file(&ctx.out("importance.csv"), out.as_bytes())
}

fn timing(ctx: &Ctx, a: TimingArgs) -> Result<()> {
    let corpus = Corpus::load(&a.corpus)?;
    let cfg = &ctx.config.features;
    let (xtr, ytr) = corpus.feature_table(Some(Split::Train), cfg)?.labeled()?;
    let (xte, _) = corpus.feature_table(Some(Split::Test), cfg)?.labeled()?;
    let algos = if a.algos.is_empty() { Algorithm::ALL.to_vec() } else { a.algos };
    let rows = run_timing(&xtr, &ytr, &xte, &algos, &ctx.config.hyperparams, ctx.seed)?;
    for r in &rows {
        eprintln!(
            "{}: train {:.3} s, predict {} rows {:.4} s, one vector {:.1} us",
            r.algorithm,
            r.train_s,
            r.n_test,
            r.predict_test_s,
            r.predict_one_s * 1e6
        );
    }
    let mut buf = Vec::new();
    write_timing_csv(&mut buf, &rows)?;
    write_file(&ctx.out("timing.csv"), &buf)
}
