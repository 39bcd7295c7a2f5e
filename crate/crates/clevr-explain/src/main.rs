//! Batch command-line entry point wiring the pipeline end to end.
//!
//! Every run prints a one-line summary on success. On failure, a
//! machine-readable JSON error record is printed to stderr and the process
//! exits nonzero. All randomness derives from (seed, question_index) and
//! outputs are written in input order, so results are byte-identical across
//! worker counts.

use clap::{Args, Parser, Subcommand, ValueEnum};
use clevr_explain::explainer::make_record;
use clevr_explain::gen::{generate_dataset, GenConfig};
use clevr_explain::ingest::{
    make_split, parse_questions, parse_scenes, questions_to_json, scenes_to_json, SkippedQuestion,
};
use clevr_explain::metrics::{
    baseline_random_explanations, baseline_random_words, build_instances, convergence_curve,
    evaluate_corpus, GroundTruthRecord, PredictionRecord, Protocol,
};
use clevr_explain::model::{Question, SceneGraph};
use clevr_explain::probes::{make_incomplete, make_irrelevant, pool_entries, PoolEntry};
use clevr_explain::stats::{compute_stats, word_count};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Default seed so bare invocations are reproducible.
const DEFAULT_SEED: u64 = 2021;

#[derive(Parser)]
#[command(name = "clevr-explain", version, about = "Scene-graph QA explanation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    CorrectOnly,
    MaskedMean,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProbeKindArg {
    Completeness,
    Relevance,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineKindArg {
    RandomWords,
    RandomExplanations,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a scene file and a question file.
    GenData(GenDataArgs),
    /// Generate the explanation dataset (plus a skip log of rejected questions).
    Generate(GenerateArgs),
    /// Split images 80/20 into train and validation index lists.
    Split(SplitArgs),
    /// Compute corpus statistics over a generated explanation dataset.
    Stats(StatsArgs),
    /// Generate completeness or relevance probe pairs.
    Probes(ProbesArgs),
    /// Score predictions against multi-reference ground truth.
    Eval(EvalArgs),
    /// Reference-count convergence experiment (leave-one-out self-test).
    Convergence(ConvergenceArgs),
    /// Emit random baseline predictions.
    Baseline(BaselineArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// Output path for the scene file.
    #[arg(long)]
    out_scenes: PathBuf,
    /// Output path for the question file.
    #[arg(long)]
    out_questions: PathBuf,
    #[arg(long, default_value_t = 100)]
    images: usize,
    #[arg(long, default_value_t = 10)]
    questions_per_image: usize,
    /// Number of malformed (disconnected-program) questions to inject.
    #[arg(long, default_value_t = 0)]
    malformed: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    scenes: PathBuf,
    #[arg(long)]
    questions: PathBuf,
    /// Output path for the explanation dataset; the skip log is written next
    /// to it with the extra extension `.skips.json`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u8).range(1..=10))]
    max_explanations: u8,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    workers: u16,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    scenes: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct StatsArgs {
    /// Explanation dataset produced by `generate`.
    #[arg(long)]
    ground_truth: PathBuf,
    /// Question file supplying the question texts.
    #[arg(long)]
    questions: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProbesArgs {
    #[arg(long)]
    scenes: PathBuf,
    #[arg(long)]
    questions: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    kind: ProbeKindArg,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    workers: u16,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    ground_truth: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "correct-only")]
    protocol: ProtocolArg,
}

#[derive(Args)]
struct ConvergenceArgs {
    /// Explanation dataset; only questions with exactly 10 explanations enter
    /// the experiment.
    #[arg(long)]
    ground_truth: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 9)]
    k_max: usize,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    workers: u16,
}

#[derive(Args)]
struct BaselineArgs {
    /// Explanation dataset providing the vocabulary / sampling pool.
    #[arg(long)]
    ground_truth: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    kind: BaselineKindArg,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Debug, Serialize)]
struct ErrorRecord {
    error: String,
    command: String,
}

type CliResult = Result<String, String>;

fn read_file(path: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), String> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| format!("cannot create {}: {e}", parent.display()))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| format!("cannot serialize {}: {e}", path.display()))?;
    text.push('\n');
    write_file(path, &text)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    serde_json::from_slice(&read_file(path)?)
        .map_err(|e| format!("cannot parse {}: {e}", path.display()))
}

fn load_scenes(path: &Path) -> Result<Vec<SceneGraph>, String> {
    parse_scenes(&read_file(path)?).map_err(|e| e.to_string())
}

fn load_questions(path: &Path) -> Result<(Vec<Question>, Vec<SkippedQuestion>), String> {
    let parsed = parse_questions(&read_file(path)?).map_err(|e| e.to_string())?;
    Ok((parsed.questions, parsed.skipped))
}

fn scene_table(scenes: &[SceneGraph]) -> HashMap<u64, &SceneGraph> {
    scenes.iter().map(|s| (s.image_index, s)).collect()
}

/// Run `job` over the questions on a dedicated pool of `workers` threads,
/// collecting results in input order.
fn fan_out<T, F>(questions: &[Question], workers: u16, job: F) -> Result<Vec<T>, String>
where
    T: Send,
    F: Fn(&Question) -> T + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers as usize)
        .build()
        .map_err(|e| format!("cannot build thread pool: {e}"))?;
    Ok(pool.install(|| questions.par_iter().map(|q| job(q)).collect()))
}

fn run_gen_data(args: &GenDataArgs) -> CliResult {
    let (scenes, questions) = generate_dataset(&GenConfig {
        num_images: args.images,
        questions_per_image: args.questions_per_image,
        seed: args.seed,
        malformed: args.malformed,
    });
    write_file(&args.out_scenes, &scenes_to_json(&scenes))?;
    write_file(&args.out_questions, &questions_to_json(&questions))?;
    Ok(format!(
        "gen-data: {} scenes -> {}, {} questions -> {}",
        scenes.len(),
        args.out_scenes.display(),
        questions.len(),
        args.out_questions.display()
    ))
}

fn skip_log_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".skips.json");
    out.with_file_name(name)
}

fn run_generate(args: &GenerateArgs) -> CliResult {
    let scenes = load_scenes(&args.scenes)?;
    let (questions, mut skipped) = load_questions(&args.questions)?;
    let by_image = scene_table(&scenes);
    let seed = args.seed;
    let max = args.max_explanations as usize;
    let results = fan_out(&questions, args.workers, |q| {
        match by_image.get(&q.image_index) {
            Some(scene) => make_record(q, scene, seed, max).map_err(|e| e.to_string()),
            None => Err(format!("no scene for image {}", q.image_index)),
        }
    })?;
    let mut records: Vec<GroundTruthRecord> = Vec::with_capacity(results.len());
    for (q, result) in questions.iter().zip(results) {
        match result {
            Ok(r) => records.push(GroundTruthRecord {
                question_index: r.question_index,
                image_index: r.image_index,
                answer: r.answer,
                explanations: r.explanations,
                question_type: Some(q.question_type.token().to_string()),
            }),
            Err(reason) => skipped.push(SkippedQuestion {
                question_index: q.question_index,
                reason,
            }),
        }
    }
    write_json(&args.out, &records)?;
    write_json(&skip_log_path(&args.out), &skipped)?;
    Ok(format!(
        "generate: {} records, {} skips -> {}",
        records.len(),
        skipped.len(),
        args.out.display()
    ))
}

fn run_split(args: &SplitArgs) -> CliResult {
    let scenes = load_scenes(&args.scenes)?;
    let images: BTreeSet<u64> = scenes.iter().map(|s| s.image_index).collect();
    let (train, val) = make_split(&images, args.seed).map_err(|e| e.to_string())?;
    #[derive(Serialize)]
    struct SplitFile<T: Serialize> {
        train: T,
        val: T,
    }
    write_json(
        &args.out,
        &SplitFile {
            train: &train,
            val: &val,
        },
    )?;
    Ok(format!(
        "split: {} train / {} val images -> {}",
        train.image_indices.len(),
        val.image_indices.len(),
        args.out.display()
    ))
}

fn run_stats(args: &StatsArgs) -> CliResult {
    let records: Vec<GroundTruthRecord> = read_json(&args.ground_truth)?;
    let (questions, _) = load_questions(&args.questions)?;
    let texts: HashMap<u64, &str> = questions
        .iter()
        .map(|q| (q.question_index, q.text.as_str()))
        .collect();
    let question_texts: Vec<String> = records
        .iter()
        .map(|r| {
            texts
                .get(&r.question_index)
                .map(|t| t.to_string())
                .ok_or(format!("no question text for index {}", r.question_index))
        })
        .collect::<Result<_, _>>()?;
    let stats = compute_stats(&records, &question_texts).map_err(|e| e.to_string())?;
    write_json(&args.out, &stats)?;
    Ok(format!(
        "stats: {} questions, vocab {}, mean {:.2} words -> {}",
        stats.n_questions,
        stats.vocabulary_size,
        stats.mean_explanation_words,
        args.out.display()
    ))
}

fn run_probes(args: &ProbesArgs) -> CliResult {
    let scenes = load_scenes(&args.scenes)?;
    let (questions, _) = load_questions(&args.questions)?;
    let by_image = scene_table(&scenes);
    let seed = args.seed;
    let kind_name = match args.kind {
        ProbeKindArg::Completeness => "completeness",
        ProbeKindArg::Relevance => "relevance",
    };
    let results = match args.kind {
        ProbeKindArg::Completeness => fan_out(&questions, args.workers, |q| {
            let scene = by_image.get(&q.image_index)?;
            make_incomplete(q, scene, seed).ok()
        })?,
        ProbeKindArg::Relevance => {
            // The distractor pool is every explanation of every question.
            let pools = fan_out(&questions, args.workers, |q| {
                let scene = by_image.get(&q.image_index)?;
                pool_entries(q, scene, seed).ok()
            })?;
            let pool: Vec<PoolEntry> = pools.into_iter().flatten().flatten().collect();
            fan_out(&questions, args.workers, |q| {
                let scene = by_image.get(&q.image_index)?;
                make_irrelevant(q, scene, &pool, seed).ok()
            })?
        }
    };
    let probes: Vec<_> = results.into_iter().flatten().collect();
    write_json(&args.out, &probes)?;
    Ok(format!(
        "probes: {} {kind_name} pairs from {} questions -> {}",
        probes.len(),
        questions.len(),
        args.out.display()
    ))
}

fn run_eval(args: &EvalArgs) -> CliResult {
    let predictions: Vec<PredictionRecord> = read_json(&args.predictions)?;
    let ground_truth: Vec<GroundTruthRecord> = read_json(&args.ground_truth)?;
    let instances = build_instances(&predictions, &ground_truth).map_err(|e| e.to_string())?;
    let protocol = match args.protocol {
        ProtocolArg::CorrectOnly => Protocol::CorrectOnly,
        ProtocolArg::MaskedMean => Protocol::MaskedMean,
    };
    let report = evaluate_corpus(&instances, protocol).map_err(|e| e.to_string())?;
    write_json(&args.out, &report)?;
    Ok(format!(
        "eval[{}]: n={} acc={:.1} B4={:.1} M={:.1} RL={:.1} C={:.1} -> {}",
        report.protocol,
        report.n_questions,
        report.accuracy * 100.0,
        report.bleu4,
        report.meteor,
        report.rouge_l,
        report.cider,
        args.out.display()
    ))
}

fn run_convergence(args: &ConvergenceArgs) -> CliResult {
    if args.k_max == 0 || args.k_max > 9 {
        return Err("--k-max must be in 1..=9 (10 explanations, one held out)".into());
    }
    let records: Vec<GroundTruthRecord> = read_json(&args.ground_truth)?;
    let sets: Vec<Vec<String>> = records
        .iter()
        .filter(|r| r.explanations.len() == 10)
        .map(|r| r.explanations.clone())
        .collect();
    if sets.is_empty() {
        return Err("no questions with exactly 10 explanations".into());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers as usize)
        .build()
        .map_err(|e| format!("cannot build thread pool: {e}"))?;
    let curve =
        pool.install(|| convergence_curve(&sets, args.k_max, args.trials, args.seed));
    write_json(&args.out, &curve)?;
    Ok(format!(
        "convergence: {} questions, {} trials, k=1..{} -> {}",
        sets.len(),
        args.trials,
        args.k_max,
        args.out.display()
    ))
}

fn run_baseline(args: &BaselineArgs) -> CliResult {
    let records: Vec<GroundTruthRecord> = read_json(&args.ground_truth)?;
    let indices: Vec<u64> = records.iter().map(|r| r.question_index).collect();
    let predictions = match args.kind {
        BaselineKindArg::RandomWords => {
            let vocabulary: BTreeSet<String> = records
                .iter()
                .flat_map(|r| r.explanations.iter())
                .flat_map(|e| e.split_whitespace())
                .map(|w| w.trim_end_matches('.').to_string())
                .filter(|w| !w.is_empty())
                .collect();
            let vocabulary: Vec<String> = vocabulary.into_iter().collect();
            let (total, n) = records
                .iter()
                .flat_map(|r| r.explanations.iter())
                .fold((0usize, 0usize), |(t, n), e| (t + word_count(e), n + 1));
            if n == 0 || vocabulary.is_empty() {
                return Err("ground truth has no explanations".into());
            }
            let words = ((total as f64 / n as f64).round() as usize).max(1);
            baseline_random_words(&indices, &vocabulary, words, args.seed)
        }
        BaselineKindArg::RandomExplanations => {
            let pool: Vec<(String, String)> = records
                .iter()
                .flat_map(|r| r.explanations.iter().map(|e| (r.answer.clone(), e.clone())))
                .collect();
            if pool.is_empty() {
                return Err("ground truth has no explanations".into());
            }
            baseline_random_explanations(&indices, &pool, args.seed)
        }
    };
    write_json(&args.out, &predictions)?;
    let kind_name = match args.kind {
        BaselineKindArg::RandomWords => "random-words",
        BaselineKindArg::RandomExplanations => "random-explanations",
    };
    Ok(format!(
        "baseline[{kind_name}]: {} predictions -> {}",
        predictions.len(),
        args.out.display()
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, result) = match &cli.command {
        Command::GenData(a) => ("gen-data", run_gen_data(a)),
        Command::Generate(a) => ("generate", run_generate(a)),
        Command::Split(a) => ("split", run_split(a)),
        Command::Stats(a) => ("stats", run_stats(a)),
        Command::Probes(a) => ("probes", run_probes(a)),
        Command::Eval(a) => ("eval", run_eval(a)),
        Command::Convergence(a) => ("convergence", run_convergence(a)),
        Command::Baseline(a) => ("baseline", run_baseline(a)),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(error) => {
            let record = ErrorRecord {
                error,
                command: name.to_string(),
            };
            eprintln!("{}", serde_json::to_string(&record).unwrap());
            ExitCode::FAILURE
        }
    }
}
