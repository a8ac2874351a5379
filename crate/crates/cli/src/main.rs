mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use sscc_core::config::Config;
use sscc_core::dataset::{load_dataset, save_dataset, synthesize_dataset, table_stats, Dataset, SynthConfig};
use sscc_core::fsutil::write_atomic;
use sscc_core::kb::{describe, load_kb, save_kb};
use sscc_core::pipeline::{build_kb, BuildOptions};
use sscc_core::query::{validate_pair, Verdict};
use sscc_core::sampler::{generate_corpus, read_corpus, write_corpus};
use sscc_core::template::{load_templates, TemplateLibrary};

use manifest::RunManifest;

/// Exit status when validity falls below `--min-validity`.
const EXIT_BELOW_VALIDITY: u8 = 3;

#[derive(Parser)]
#[command(name = "sscc", version, about = "Build spatial knowledge bases and NL/executable query corpora")]
struct Cli {
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print table and geometry counts of a dataset.
    Stats {
        dataset: PathBuf,
        /// Also write the counts as JSON.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Extract, score and filter relations into a knowledge base.
    BuildKb(BuildKbArgs),
    /// Sample a corpus of NL/executable query pairs from a knowledge base.
    Generate(GenerateArgs),
    /// Execute every corpus query against the dataset and report validity.
    Validate(ValidateArgs),
    /// Write a seeded synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Args)]
struct BuildKbArgs {
    dataset: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    radius_m: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    min_support: Option<u64>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Comma-separated tables allowed as reference objects.
    #[arg(long, value_delimiter = ',')]
    reference_tables: Option<Vec<String>>,
}

#[derive(Args)]
struct GenerateArgs {
    dataset: PathBuf,
    kb: PathBuf,
    #[arg(short = 'n', long)]
    n_pairs: Option<usize>,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    entity_cap: Option<usize>,
    /// Template library JSON (default: the shipped library).
    #[arg(long)]
    templates: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    dataset: PathBuf,
    corpus: PathBuf,
    /// Minimum validity percentage for a zero exit status.
    #[arg(long, default_value_t = 0.0)]
    min_validity: f64,
    /// Report CSV (default: the corpus path with extension `validation.csv`).
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    row_cap: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    points: usize,
    #[arg(long)]
    lines: usize,
    #[arg(long)]
    regions: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Number of tables (default: two per populated geometry kind).
    #[arg(long)]
    tables: Option<usize>,
}

fn load(dir: &Path) -> Result<Dataset> {
    let report = load_dataset(dir)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for r in &report.rejects {
        eprintln!("rejected: {r}");
    }
    Ok(report.dataset)
}

fn stats(dataset: &Path, output: Option<&Path>, cfg: &Config) -> Result<()> {
    let started = Instant::now();
    let d = load(dataset)?;
    println!("dataset {} ({})", d.name, d.crs_note);
    for t in d.tables() {
        println!("  {:<16} {:<7} {:>7}", t.name, t.kind.as_str(), table_stats(t).n_entities);
    }
    let s = d.stats();
    println!("{s}");
    if let Some(out) = output {
        let mut json = serde_json::to_string_pretty(&s)?;
        json.push('\n');
        write_atomic(out, json.as_bytes()).with_context(|| format!("cannot write {}", out.display()))?;
        RunManifest::new("stats", cfg, &[dataset], &[out], started, s.n_entities).write(out)?;
    }
    Ok(())
}

fn build(args: &BuildKbArgs, mut cfg: Config) -> Result<()> {
    let started = Instant::now();
    let e = &mut cfg.extraction;
    e.radius_m = args.radius_m.unwrap_or(e.radius_m);
    e.k = args.k.unwrap_or(e.k);
    e.min_support = args.min_support.unwrap_or(e.min_support);
    if args.reference_tables.is_some() {
        e.reference_tables = args.reference_tables.clone();
    }
    cfg.quality.threshold = args.threshold.unwrap_or(cfg.quality.threshold);
    cfg.validate()?;

    let d = load(&args.dataset)?;
    let opts = BuildOptions {
        extraction: cfg.extraction.clone(),
        quality: cfg.quality.clone(),
        node_capacity: cfg.index.node_capacity,
        timestamp: manifest::timestamp(),
    };
    let (kb, report) = build_kb(&d, &opts)?;
    save_kb(&kb, &args.output)?;
    println!("{}", describe(&kb));
    println!(
        "retained {} of {} candidates in {:.2}s ({:.1} relations/s)",
        report.retained,
        report.entity_filter.kept + report.entity_filter.rejected + report.relation_filter.kept + report.relation_filter.rejected,
        report.elapsed_s,
        report.throughput
    );
    RunManifest::new("build-kb", &cfg, &[&args.dataset], &[&args.output], started, report.retained).write(&args.output)?;
    Ok(())
}

fn generate(args: &GenerateArgs, mut cfg: Config) -> Result<()> {
    let started = Instant::now();
    let s = &mut cfg.sampler;
    s.n_pairs = args.n_pairs.unwrap_or(s.n_pairs);
    s.seed = args.seed.unwrap_or(s.seed);
    s.entity_cap = args.entity_cap.unwrap_or(s.entity_cap);
    cfg.validate()?;

    let d = load(&args.dataset)?;
    let kb = load_kb(&args.kb)?;
    if kb.source_dataset() != d.name {
        eprintln!(
            "warning: knowledge base was built from {:?}, not {:?}",
            kb.source_dataset(),
            d.name
        );
    }
    let lib = match &args.templates {
        Some(path) => {
            let (lib, warnings) = load_templates(path)?;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            lib
        }
        None => TemplateLibrary::default_library(),
    };
    let (corpus, report) = generate_corpus(&kb, &lib, &cfg.sampler)?;
    write_corpus(&args.output, &corpus)?;
    for (qt, t) in &report.per_type {
        println!("  {:<14} {:>4} pairs (quota {}, {} candidates)", qt.as_str(), t.generated, t.quota, t.candidates);
    }
    println!("generated {} of {} pairs; {} entities at the cap", report.generated, report.requested, report.entities_capped);
    for s in &report.shortfall {
        println!("shortfall: {s}");
    }
    let mut inputs: Vec<&Path> = vec![&args.dataset, &args.kb];
    if let Some(t) = &args.templates {
        inputs.push(t);
    }
    RunManifest::new("generate", &cfg, &inputs, &[&args.output], started, corpus.len()).write(&args.output)?;
    Ok(())
}

/// Returns the validity percentage.
fn validate(args: &ValidateArgs, mut cfg: Config) -> Result<f64> {
    let started = Instant::now();
    cfg.validation.row_cap = args.row_cap.unwrap_or(cfg.validation.row_cap);
    cfg.validate()?;
    if !(0.0..=100.0).contains(&args.min_validity) {
        bail!("--min-validity must be a percentage in [0, 100]");
    }
    let d = load(&args.dataset)?;
    let rows = read_corpus(&args.corpus)?;
    let tree = d.build_index(cfg.index.node_capacity)?;
    let verdicts: Vec<Verdict> = rows
        .par_iter()
        .map(|r| validate_pair(&r.exe, &d, &tree, cfg.validation.row_cap))
        .collect();

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "verdict", "stage", "reason", "rows_returned"])?;
    for (r, v) in rows.iter().zip(&verdicts) {
        let stage = v.stage.map(|s| s.to_string()).unwrap_or_default();
        let verdict = if v.valid { "valid" } else { "invalid" };
        w.write_record([r.id.to_string(), verdict.into(), stage, v.reason.clone(), v.rows.to_string()])?;
    }
    let output = args.output.clone().unwrap_or_else(|| args.corpus.with_extension("validation.csv"));
    write_atomic(&output, &w.into_inner()?).with_context(|| format!("cannot write {}", output.display()))?;

    let valid = verdicts.iter().filter(|v| v.valid).count();
    let pct = if rows.is_empty() { 0.0 } else { 100.0 * valid as f64 / rows.len() as f64 };
    println!("{valid}/{} pairs valid ({pct:.1}%)", rows.len());
    RunManifest::new("validate", &cfg, &[&args.dataset, &args.corpus], &[&output], started, rows.len()).write(&output)?;
    Ok(pct)
}

fn synth(args: &SynthArgs, cfg: &Config) -> Result<()> {
    let started = Instant::now();
    let mut sc = SynthConfig::new(args.seed, args.points, args.lines, args.regions);
    if let Some(n) = args.tables {
        if n == 0 {
            bail!("--tables must be at least 1");
        }
        sc = sc.with_tables(n);
    }
    let d = synthesize_dataset(&sc);
    save_dataset(&d, &args.output)?;
    println!("{}", d.stats());
    RunManifest::new("synth", cfg, &[], &[&args.output], started, d.entity_count()).write(&args.output)?;
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .context("cannot configure worker threads")?;
    }
    let cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    match &cli.command {
        Command::Stats { dataset, output } => stats(dataset, output.as_deref(), &cfg)?,
        Command::BuildKb(args) => build(args, cfg)?,
        Command::Generate(args) => generate(args, cfg)?,
        Command::Validate(args) => {
            if validate(args, cfg)? < args.min_validity {
                eprintln!("validity below {}%", args.min_validity);
                return Ok(ExitCode::from(EXIT_BELOW_VALIDITY));
            }
        }
        Command::Synth(args) => synth(args, &cfg)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
