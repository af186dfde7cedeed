use std::fs;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use pebench::config::MetricConfig;
use pebench::fidelity::AnnotationStore;
use pebench::pe::{EmotionLexicon, PatternRuleSet};
use pebench::report::{analyze_corpus, build_report, render, write_session_csv, Format, ReportConfig, Resources};
use pebench::server::{self, AppState};
use pebench::simulator::{generate_corpus, SimParams};
use pebench::stats::DEFAULT_EXACT_THRESHOLD;
use pebench::transcript::{read_corpus_file, write_corpus, CorpusLabel};
use pebench::{Error, Result};

/// Fidelity benchmarking for synthetic therapy dialogue corpora.
#[derive(Debug, Parser)]
#[command(name = "pebench", version, about)]
struct Cli {
    /// JSON file with default settings; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and normalize a transcript file, reporting the session count.
    Validate { corpus: PathBuf },
    /// Write per-session system and PE metrics as CSV.
    Analyze {
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare a real and a synthetic corpus and write the report.
    Compare {
        #[arg(long)]
        real: Option<PathBuf>,
        #[arg(long)]
        synth: Option<PathBuf>,
        /// Report path; the format follows the extension unless --format is given.
        #[arg(long)]
        out: Option<PathBuf>,
        /// json, csv or markdown
        #[arg(long)]
        format: Option<String>,
        /// Largest n_real * n_synth for the exact Mann-Whitney test.
        #[arg(long)]
        exact_threshold: Option<usize>,
        /// Annotation directory to summarize in the report.
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long)]
        no_importance: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic corpus from simulator parameters.
    Simulate {
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the seed in the parameter file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Serve the annotation API over one corpus.
    Serve {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Directory with the built annotation UI, served at `/`.
        #[arg(long)]
        ui: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    /// Emotion lexicon TSV (word<TAB>weight).
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Pattern rule set JSON.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Metric configuration JSON.
    #[arg(long)]
    metric_config: Option<PathBuf>,
}

/// Defaults read from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    real: Option<PathBuf>,
    synth: Option<PathBuf>,
    corpus: Option<PathBuf>,
    lexicon: Option<PathBuf>,
    rules: Option<PathBuf>,
    metric_config: Option<PathBuf>,
    annotations: Option<PathBuf>,
    out: Option<PathBuf>,
    params: Option<PathBuf>,
    seed: Option<u64>,
    format: Option<String>,
    exact_threshold: Option<usize>,
    workers: Option<usize>,
    ui: Option<PathBuf>,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(FileConfig::default()) };
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn required(value: Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    value.ok_or_else(|| Error::InvalidParameter(format!("missing --{flag} (flag or config file)")))
}

fn resources(common: &Common, file: &FileConfig) -> Result<Resources> {
    let mut res = Resources::default();
    if let Some(p) = common.lexicon.as_ref().or(file.lexicon.as_ref()) {
        res.lexicon = EmotionLexicon::load(p)?;
    }
    if let Some(p) = common.rules.as_ref().or(file.rules.as_ref()) {
        res.rules = PatternRuleSet::load(p)?;
    }
    Ok(res)
}

fn report_config(common: &Common, file: &FileConfig) -> Result<ReportConfig> {
    let metrics = match common.metric_config.as_ref().or(file.metric_config.as_ref()) {
        Some(p) => MetricConfig::load(p)?,
        None => MetricConfig::default(),
    };
    Ok(ReportConfig {
        metrics,
        seed: common.seed.or(file.seed).unwrap_or(0),
        workers: common.workers.or(file.workers),
        ..ReportConfig::default()
    })
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn run(cli: Cli) -> Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Validate { corpus } => {
            let parsed = read_corpus_file(&corpus, CorpusLabel::Other)?;
            parsed.normalized(&Default::default())?;
            println!("{} sessions", parsed.len());
        }
        Command::Analyze { corpus, out, common } => {
            let corpus_path = required(corpus.or(file.corpus.clone()), "corpus")?;
            let out = required(out.or(file.out.clone()), "out")?;
            let corpus = read_corpus_file(&corpus_path, CorpusLabel::Other)?;
            let rows = analyze_corpus(&corpus, &resources(&common, &file)?, &report_config(&common, &file)?)?;
            let mut buf = Vec::new();
            write_session_csv(&rows, &mut buf)?;
            write_output(&out, &buf)?;
            let failed = rows.iter().filter(|r| r.system.is_none()).count();
            println!("{} sessions analyzed ({failed} without system metrics) -> {}", rows.len(), out.display());
        }
        Command::Compare { real, synth, out, format, exact_threshold, annotations, no_importance, common } => {
            let real = read_corpus_file(&required(real.or(file.real.clone()), "real")?, CorpusLabel::Real)?;
            let synth = read_corpus_file(&required(synth.or(file.synth.clone()), "synth")?, CorpusLabel::Synthetic)?;
            let out = required(out.or(file.out.clone()), "out")?;
            let format = match format.or(file.format.clone()) {
                Some(f) => f.parse()?,
                None => Format::from_path(&out)?,
            };
            let mut config = report_config(&common, &file)?;
            config.exact_threshold = exact_threshold.or(file.exact_threshold).unwrap_or(DEFAULT_EXACT_THRESHOLD);
            config.importance = !no_importance;
            let annotations = match annotations.or(file.annotations.clone()) {
                Some(dir) => Some(AnnotationStore::open(dir)?.list()?),
                None => None,
            };
            let report = build_report(&real, &synth, &resources(&common, &file)?, &config, annotations.as_deref())?;
            write_output(&out, &render(&report, format)?)?;
            let blocks = report.metric_blocks.iter().chain(&report.pe_blocks);
            let tested = blocks.clone().filter(|b| b.p_value.is_some()).count();
            let significant = blocks.clone().filter(|b| b.p_value.is_some_and(|p| p < 0.05)).count();
            let skipped = blocks.filter(|b| b.skipped.is_some()).count();
            println!(
                "{} real vs {} synthetic sessions: {tested} metrics tested, {significant} differ at p < 0.05, {skipped} skipped -> {}",
                real.len(),
                synth.len(),
                out.display()
            );
        }
        Command::Simulate { params, out, seed } => {
            let mut p = match params.or(file.params.clone()) {
                Some(path) => SimParams::load(&path)?,
                None => SimParams::default(),
            };
            if let Some(s) = seed.or(file.seed) {
                p.seed = s;
            }
            let out = required(out.or(file.out.clone()), "out")?;
            let corpus = generate_corpus(&p)?;
            let mut buf = Vec::new();
            write_corpus(&corpus, &mut buf)?;
            write_output(&out, &buf)?;
            println!("{} sessions -> {}", corpus.len(), out.display());
        }
        Command::Serve { corpus, annotations, port, host, ui } => {
            let corpus_path = required(corpus.or(file.corpus.clone()), "corpus")?;
            let corpus = read_corpus_file(&corpus_path, CorpusLabel::Other)?.normalized(&Default::default())?;
            let store = AnnotationStore::open(required(annotations.or(file.annotations.clone()), "annotations")?)?;
            let state = Arc::new(AppState::new(corpus, store));
            let addr = SocketAddr::new(host, port);
            let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io("<runtime>", e))?;
            println!("serving {} on http://{addr}", corpus_path.display());
            rt.block_on(server::serve(addr, state, ui.or(file.ui.clone())))
                .map_err(|e| Error::io(addr.to_string(), e))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_internal() { 3 } else { 2 })
        }
    }
}
