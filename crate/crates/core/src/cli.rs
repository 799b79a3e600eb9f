//! The `snipforge` command line: filter -> select -> generate -> evaluate ->
//! analyze -> stats.
//!
//! Conventions shared by every subcommand:
//! - referenced paths are validated before any work starts, and no
//!   subcommand ever writes to one of its input files;
//! - data goes to files, diagnostics to the error stream;
//! - every output file begins with one header line echoing the effective
//!   configuration (and seed, where one applies), so a run can be
//!   reproduced from its artifacts;
//! - output bytes depend only on the inputs, flags, and seed;
//! - exit codes: 0 success, 1 validation error, 2 I/O error.
//!
//! `SNIPFORGE_THREADS` caps the worker-thread count used for scoring.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::analysis::{analyze_corpus, AnalysisReport, ConnectiveClass};
use crate::corpus::{CorpusError, PredictionRecord, Segment, SnippetInstance, Split};
use crate::filter::{filter_segment, popularity_select, FilterConfig, FilterError};
use crate::metrics::{score_corpus, EvalError, EvalReport};
use crate::records::{read_records, FileHeader, Record};
use crate::template::{build_dataset, GenerationStrategy, SplitSpec, TemplateError};

#[derive(Parser)]
#[command(
    name = "snipforge",
    version,
    about = "Comparative snippet generation and evaluation toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply the five segment post-processing rules to a segment file.
    Filter(FilterArgs),
    /// Keep segments sampled more often than the popularity threshold.
    Select(SelectArgs),
    /// Build the snippet dataset from positive and negative summaries.
    Generate(GenerateArgs),
    /// Score a prediction file with the three-aspect recall metrics.
    Evaluate(EvaluateArgs),
    /// Classify prediction connectives and tabulate their distributions.
    Analyze(AnalyzeArgs),
    /// Print split, product, and pair counts for a dataset.
    Stats(StatsArgs),
}

#[derive(Args)]
struct FilterArgs {
    /// JSON file overriding filter defaults (flags override the file).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "out")]
    output: PathBuf,
    /// Where to write rejected segments with their rejection rule.
    #[arg(long)]
    rejects: Option<PathBuf>,
    #[arg(long)]
    min_words: Option<usize>,
    /// Tag untagged segments with the built-in closed-class heuristic.
    #[arg(long)]
    heuristic_pos: bool,
}

#[derive(Args)]
struct SelectArgs {
    /// Keep segments with sample_count strictly greater than this.
    #[arg(long, default_value_t = crate::filter::DEFAULT_POPULARITY_THRESHOLD)]
    threshold: u64,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "out")]
    output: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    #[value(name = "round_robin")]
    RoundRobin,
    #[value(name = "seeded_random")]
    SeededRandom,
    #[value(name = "all_templates")]
    AllTemplates,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    pos: PathBuf,
    #[arg(long)]
    neg: PathBuf,
    #[arg(long, value_enum, default_value_t = StrategyArg::RoundRobin)]
    strategy: StrategyArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Train,validation,test product fractions.
    #[arg(long, default_value = "0.786,0.098,0.116")]
    splits: String,
    #[arg(long = "out")]
    output: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    predictions: PathBuf,
    /// Per-instance score records.
    #[arg(long)]
    report: PathBuf,
    /// Human-readable corpus summary.
    #[arg(long)]
    summary: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    predictions: PathBuf,
    /// Per-prediction classification records.
    #[arg(long = "out")]
    output: PathBuf,
    /// Rendered distribution tables.
    #[arg(long)]
    tables: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    dataset: PathBuf,
}

enum CliError {
    Validation(String),
    Io(String),
}

type CliResult<T> = Result<T, CliError>;

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io(_) | CorpusError::File { .. } => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<FilterError> for CliError {
    fn from(e: FilterError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<TemplateError> for CliError {
    fn from(e: TemplateError) -> Self {
        match e {
            TemplateError::Corpus(c) => c.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Validation(e.to_string())
    }
}

fn init_thread_pool() {
    static INIT: OnceLock<()> = OnceLock::new();
    INIT.get_or_init(|| {
        if let Some(n) = std::env::var("SNIPFORGE_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|n| *n > 0)
        {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    });
}

/// Entry point used by `main` and by tests; diagnostics go to `stderr`,
/// command output (stats) to `stdout`.
pub fn run_with(args: &[String], stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return if e.use_stderr() {
                let _ = writeln!(stderr, "{e}");
                1
            } else {
                let _ = write!(stdout, "{e}");
                0
            };
        }
    };
    init_thread_pool();
    let result = match cli.command {
        Command::Filter(args) => run_filter(args, stderr),
        Command::Select(args) => run_select(args, stderr),
        Command::Generate(args) => run_generate(args, stderr),
        Command::Evaluate(args) => run_evaluate(args, stderr),
        Command::Analyze(args) => run_analyze(args, stderr),
        Command::Stats(args) => run_stats(args, stdout),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Validation(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            1
        }
        Err(CliError::Io(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            2
        }
    }
}

/// Runs the CLI against the process streams.
pub fn run(args: &[String]) -> i32 {
    let mut stdout = std::io::stdout();
    let mut stderr = std::io::stderr();
    run_with(args, &mut stdout, &mut stderr)
}

fn require_input(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "input file {} does not exist",
            path.display()
        )))
    }
}

fn require_distinct(output: &Path, inputs: &[&Path]) -> CliResult<()> {
    for input in inputs {
        let same = output == *input
            || match (output.canonicalize(), input.canonicalize()) {
                (Ok(a), Ok(b)) => a == b,
                _ => false,
            };
        if same {
            return Err(CliError::Validation(format!(
                "output {} would overwrite an input file",
                output.display()
            )));
        }
    }
    Ok(())
}

fn create_output(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[derive(Deserialize, Default)]
struct FilterConfigFile {
    min_words: Option<usize>,
    first_person_words: Option<Vec<String>>,
    leading_connectives: Option<Vec<String>>,
    popularity_threshold: Option<u64>,
    heuristic_pos: Option<bool>,
}

fn load_filter_config(args: &FilterArgs) -> CliResult<FilterConfig> {
    let mut config = FilterConfig::default();
    if let Some(path) = &args.config {
        require_input(path)?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let file: FilterConfigFile = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        if let Some(v) = file.min_words {
            config.min_words = v;
        }
        if let Some(v) = file.first_person_words {
            config.first_person_words = v.into_iter().collect();
        }
        if let Some(v) = file.leading_connectives {
            config.leading_connectives = v.into_iter().collect();
        }
        if let Some(v) = file.popularity_threshold {
            config.popularity_threshold = v;
        }
        if let Some(v) = file.heuristic_pos {
            config.heuristic_pos = v;
        }
    }
    if let Some(v) = args.min_words {
        config.min_words = v;
    }
    if args.heuristic_pos {
        config.heuristic_pos = true;
    }
    config.validate()?;
    Ok(config)
}

#[derive(Serialize)]
struct RejectRow<'a> {
    product_id: &'a str,
    text: &'a str,
    polarity: &'a str,
    rejected_by: &'static str,
}

fn run_filter(args: FilterArgs, stderr: &mut dyn Write) -> CliResult<()> {
    require_input(&args.input)?;
    require_distinct(&args.output, &[&args.input])?;
    if let Some(rejects) = &args.rejects {
        require_distinct(rejects, &[&args.input])?;
    }
    let config = load_filter_config(&args)?;

    let header = FileHeader::new(
        "filter",
        None,
        json!({
            "in": args.input.display().to_string(),
            "filter": config,
        }),
    );
    let mut out = create_output(&args.output)?;
    writeln!(out, "{}", header.encode())?;
    let mut rejects_out = match &args.rejects {
        Some(path) => {
            let mut w = create_output(path)?;
            writeln!(w, "{}", header.encode())?;
            Some(w)
        }
        None => None,
    };

    let mut kept_count = 0usize;
    let mut rejected_count = 0usize;
    for record in read_records::<Segment>(&args.input)? {
        let segment = record?;
        let outcome = filter_segment(&segment, &config)?;
        if outcome.kept() {
            let mut kept = Segment::from_tokens(
                segment.product_id(),
                outcome.transformed_tokens(),
                segment.polarity(),
            );
            if let Some(count) = segment.sample_count() {
                kept = kept.with_sample_count(count);
            }
            if let Some(tags) = outcome.transformed_tags() {
                kept = kept.with_tags(tags.to_vec())?;
            }
            writeln!(out, "{}", kept.encode())?;
            kept_count += 1;
        } else {
            rejected_count += 1;
            if let Some(w) = rejects_out.as_mut() {
                let row = RejectRow {
                    product_id: segment.product_id(),
                    text: segment.text(),
                    polarity: segment.polarity().as_str(),
                    rejected_by: outcome.rejected_by().expect("rejected outcome").as_str(),
                };
                writeln!(w, "{}", serde_json::to_string(&row).expect("reject row"))?;
            }
        }
    }
    out.flush()?;
    if let Some(mut w) = rejects_out {
        w.flush()?;
    }
    let _ = writeln!(stderr, "filter: kept {kept_count}, rejected {rejected_count}");
    Ok(())
}

fn run_select(args: SelectArgs, stderr: &mut dyn Write) -> CliResult<()> {
    require_input(&args.input)?;
    require_distinct(&args.output, &[&args.input])?;
    let config = FilterConfig {
        popularity_threshold: args.threshold,
        ..FilterConfig::default()
    };

    let segments: Vec<Segment> =
        read_records::<Segment>(&args.input)?.collect::<Result<_, _>>()?;
    let total = segments.len();
    let selected = popularity_select(segments, &config)?;

    let header = FileHeader::new(
        "select",
        None,
        json!({
            "in": args.input.display().to_string(),
            "threshold": args.threshold,
        }),
    );
    let mut out = create_output(&args.output)?;
    writeln!(out, "{}", header.encode())?;
    let kept = selected.len();
    for segment in selected {
        writeln!(out, "{}", segment.encode())?;
    }
    out.flush()?;
    let _ = writeln!(stderr, "select: kept {kept} of {total}");
    Ok(())
}

fn parse_splits(raw: &str) -> CliResult<SplitSpec> {
    let parts: Vec<f64> = raw
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Validation(format!("invalid --splits {raw:?}: {e}")))?;
    if parts.len() != 3 {
        return Err(CliError::Validation(format!(
            "--splits expects three comma-separated fractions, got {raw:?}"
        )));
    }
    Ok(SplitSpec::new(parts[0], parts[1], parts[2])?)
}

fn run_generate(args: GenerateArgs, stderr: &mut dyn Write) -> CliResult<()> {
    require_input(&args.pos)?;
    require_input(&args.neg)?;
    require_distinct(&args.output, &[&args.pos, &args.neg])?;
    let split_spec = parse_splits(&args.splits)?;
    let strategy = match args.strategy {
        StrategyArg::RoundRobin => GenerationStrategy::RoundRobin,
        StrategyArg::SeededRandom => GenerationStrategy::SeededRandom { seed: args.seed },
        StrategyArg::AllTemplates => GenerationStrategy::AllTemplates,
    };

    let positives: Vec<Segment> = read_records::<Segment>(&args.pos)?.collect::<Result<_, _>>()?;
    let negatives: Vec<Segment> = read_records::<Segment>(&args.neg)?.collect::<Result<_, _>>()?;
    let build = build_dataset(&positives, &negatives, strategy, &split_spec)?;

    for skipped in &build.skipped {
        let _ = writeln!(
            stderr,
            "generate: skipping product {} (no {} segments)",
            skipped.product_id, skipped.missing
        );
    }
    for id in &build.degenerate {
        let _ = writeln!(
            stderr,
            "generate: warning: instance {id} pairs identical positive and negative text"
        );
    }

    let header = FileHeader::new(
        "generate",
        Some(args.seed),
        json!({
            "pos": args.pos.display().to_string(),
            "neg": args.neg.display().to_string(),
            "strategy": format!("{:?}", args.strategy),
            "splits": [split_spec.train, split_spec.validation, split_spec.test],
        }),
    );
    let mut out = create_output(&args.output)?;
    writeln!(out, "{}", header.encode())?;
    for instance in &build.instances {
        writeln!(out, "{}", instance.encode())?;
    }
    out.flush()?;
    let _ = writeln!(
        stderr,
        "generate: {} instances from {} products ({} skipped)",
        build.instances.len(),
        build.instances.iter().map(|i| i.pair().product_id()).collect::<BTreeSet<_>>().len(),
        build.skipped.len()
    );
    Ok(())
}

fn load_dataset(path: &Path) -> CliResult<Vec<SnippetInstance>> {
    Ok(read_records::<SnippetInstance>(path)?.collect::<Result<_, _>>()?)
}

fn load_predictions(path: &Path) -> CliResult<Vec<PredictionRecord>> {
    Ok(read_records::<PredictionRecord>(path)?.collect::<Result<_, _>>()?)
}

fn write_summary(report: &EvalReport, header: &FileHeader, path: &Path) -> CliResult<()> {
    let mut out = create_output(path)?;
    writeln!(out, "# {}", header.encode())?;
    match &report.corpus {
        Some(means) => {
            writeln!(out, "{:<14} {:>8}  comparison", "metric", "recall")?;
            for (name, value, comparison) in [
                ("rouge-l", means.rouge_l_input, "input opinions and predicted output"),
                ("rouge-3", means.rouge_3_best, "prediction and the most similar reference"),
                ("rouge-4", means.rouge_4_best, "prediction and the most similar reference"),
                (
                    "conn-rouge-2",
                    means.conn_rouge_2,
                    "connecting strings from the prediction and the most similar reference",
                ),
                (
                    "conn-rouge-3",
                    means.conn_rouge_3,
                    "connecting strings from the prediction and the most similar reference",
                ),
            ] {
                writeln!(out, "{name:<14} {value:>8.4}  {comparison}")?;
            }
        }
        None => writeln!(out, "no instances evaluated; corpus means unavailable")?,
    }
    writeln!(
        out,
        "evaluated {} / skipped {}",
        report.counts.evaluated, report.counts.skipped
    )?;
    out.flush()?;
    Ok(())
}

fn run_evaluate(args: EvaluateArgs, stderr: &mut dyn Write) -> CliResult<()> {
    require_input(&args.dataset)?;
    require_input(&args.predictions)?;
    require_distinct(&args.report, &[&args.dataset, &args.predictions])?;
    require_distinct(&args.summary, &[&args.dataset, &args.predictions])?;

    let instances = load_dataset(&args.dataset)?;
    let predictions = load_predictions(&args.predictions)?;
    let report = score_corpus(&predictions, &instances)?;

    let header = FileHeader::new(
        "evaluate",
        None,
        json!({
            "dataset": args.dataset.display().to_string(),
            "predictions": args.predictions.display().to_string(),
        }),
    );
    let mut out = create_output(&args.report)?;
    writeln!(out, "{}", header.encode())?;
    for score in &report.per_instance {
        writeln!(out, "{}", serde_json::to_string(score).expect("score row"))?;
    }
    out.flush()?;
    write_summary(&report, &header, &args.summary)?;
    let _ = writeln!(
        stderr,
        "evaluate: scored {} instances ({} skipped)",
        report.counts.evaluated, report.counts.skipped
    );
    Ok(())
}

#[derive(Serialize)]
struct AnalysisRow<'a> {
    instance_id: &'a str,
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    template_id: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    connective: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    subtype: Option<&'static str>,
}

fn ranked(distribution: &BTreeMap<String, f64>) -> Vec<(&str, f64)> {
    let mut rows: Vec<(&str, f64)> = distribution
        .iter()
        .map(|(k, v)| (k.as_str(), *v))
        .collect();
    rows.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(b.0)));
    rows
}

fn write_tables(report: &AnalysisReport, header: &FileHeader, path: &Path) -> CliResult<()> {
    let mut out = create_output(path)?;
    writeln!(out, "# {}", header.encode())?;
    let pct = |v: f64| format!("{:.2}%", v * 100.0);

    writeln!(
        out,
        "exact matches: {} of {} evaluated ({})",
        report.counts.exact,
        report.counts.evaluated,
        pct(report.exact_match_fraction)
    )?;
    for (connective, share) in ranked(&report.exact_distribution) {
        writeln!(out, "  {:<60} {:>8}", connective, pct(share))?;
    }

    writeln!(
        out,
        "\nnew connecting strings: {} of {} evaluated ({})",
        report.counts.new_fusion,
        report.counts.evaluated,
        pct(report.new_fusion_fraction)
    )?;
    for (connective, share) in ranked(&report.new_distribution) {
        writeln!(out, "  {:<60} {:>8}", connective, pct(share))?;
    }

    writeln!(
        out,
        "\ngeneration errors: {} of {} evaluated ({})",
        report.counts.failures,
        report.counts.evaluated,
        pct(report.error_fraction)
    )?;
    let mut error_rows: Vec<(&'static str, f64)> = report
        .error_distribution
        .iter()
        .map(|(k, v)| (k.as_str(), *v))
        .collect();
    error_rows.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(b.0)));
    for (subtype, share) in error_rows {
        writeln!(out, "  {:<60} {:>8}", subtype, pct(share))?;
    }

    writeln!(out, "\ntop incorrect mixing patterns (share of all failures)")?;
    for pattern in &report.mixing_patterns {
        writeln!(out, "  {:<76} {:>8}", pattern.pattern, pct(pattern.fraction))?;
    }
    out.flush()?;
    Ok(())
}

fn run_analyze(args: AnalyzeArgs, stderr: &mut dyn Write) -> CliResult<()> {
    require_input(&args.dataset)?;
    require_input(&args.predictions)?;
    require_distinct(&args.output, &[&args.dataset, &args.predictions])?;
    require_distinct(&args.tables, &[&args.dataset, &args.predictions])?;

    let instances = load_dataset(&args.dataset)?;
    let predictions = load_predictions(&args.predictions)?;
    let report = analyze_corpus(&predictions, &instances)?;

    let header = FileHeader::new(
        "analyze",
        None,
        json!({
            "dataset": args.dataset.display().to_string(),
            "predictions": args.predictions.display().to_string(),
        }),
    );
    let mut out = create_output(&args.output)?;
    writeln!(out, "{}", header.encode())?;
    for item in &report.per_prediction {
        let row = match &item.class {
            ConnectiveClass::ExactTemplate(id) => AnalysisRow {
                instance_id: &item.instance_id,
                kind: "exact_template",
                template_id: Some(id.get()),
                connective: None,
                subtype: None,
            },
            ConnectiveClass::NewFusion(connective) => AnalysisRow {
                instance_id: &item.instance_id,
                kind: "new_fusion",
                template_id: None,
                connective: Some(connective),
                subtype: None,
            },
            ConnectiveClass::Error(subtype) => AnalysisRow {
                instance_id: &item.instance_id,
                kind: "error",
                template_id: None,
                connective: None,
                subtype: Some(subtype.as_str()),
            },
        };
        writeln!(out, "{}", serde_json::to_string(&row).expect("analysis row"))?;
    }
    out.flush()?;
    write_tables(&report, &header, &args.tables)?;
    let _ = writeln!(
        stderr,
        "analyze: {} exact, {} new fusions, {} errors over {} evaluated",
        report.counts.exact,
        report.counts.new_fusion,
        report.counts.failures,
        report.counts.evaluated
    );
    Ok(())
}

fn run_stats(args: StatsArgs, stdout: &mut dyn Write) -> CliResult<()> {
    require_input(&args.dataset)?;
    let mut split_counts: BTreeMap<Split, usize> = BTreeMap::new();
    let mut split_products: BTreeMap<Split, BTreeSet<String>> = BTreeMap::new();
    let mut product_pairs: BTreeMap<String, BTreeSet<(String, String)>> = BTreeMap::new();
    for record in read_records::<SnippetInstance>(&args.dataset)? {
        let instance = record?;
        *split_counts.entry(instance.split()).or_default() += 1;
        split_products
            .entry(instance.split())
            .or_default()
            .insert(instance.pair().product_id().to_string());
        product_pairs
            .entry(instance.pair().product_id().to_string())
            .or_default()
            .insert((
                instance.pair().positive().text().to_string(),
                instance.pair().negative().text().to_string(),
            ));
    }
    let count = |split: Split| split_counts.get(&split).copied().unwrap_or(0);
    let products = |split: Split| split_products.get(&split).map_or(0, BTreeSet::len);
    writeln!(
        stdout,
        "train {} / validation {} / test {}",
        count(Split::Train),
        count(Split::Validation),
        count(Split::Test)
    )?;
    writeln!(
        stdout,
        "products: train {} / validation {} / test {}",
        products(Split::Train),
        products(Split::Validation),
        products(Split::Test)
    )?;
    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    for pairs in product_pairs.values() {
        *histogram.entry(pairs.len()).or_default() += 1;
    }
    writeln!(stdout, "pairs per product:")?;
    for (pairs, products) in histogram {
        writeln!(stdout, "  {pairs} pairs: {products} products")?;
    }
    Ok(())
}
