//! Command-line driver: argument parsing, the scan command and exit codes.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use serde::Deserialize;

use crate::catalog::load_catalog;
use crate::dependency::MustScope;
use crate::ingest::discover_projects;
use crate::ir::serialize_ir;
use crate::pipeline::{analyze_corpus, PipelineOptions, ProjectAnalysis};
use crate::report::{aggregate_corpus, emit_corpus, emit_project_report, OutputFormat, ProjectReport};
use crate::rules::{parse_rule_list, RuleId, Severity, Thresholds};

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_TRIGGERED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum FailOn {
    Never,
    #[default]
    Misuse,
    /// Any finding, informational ones included.
    #[value(name = "any")]
    AnyFinding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScopeArg {
    File,
    Project,
}

#[derive(Parser, Debug)]
#[command(name = "cryptolint", version, about = "Detect cryptographic API misuse in Python, JavaScript and TypeScript projects")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scan one project, or every project of a corpus directory.
    Scan(ScanArgs),
}

#[derive(clap::Args, Debug)]
struct ScanArgs {
    /// Project directory, or corpus root with --corpus.
    target: PathBuf,
    /// Treat each immediate subdirectory of the target as a project.
    #[arg(long)]
    corpus: bool,
    /// JSON file with per-project market, category and language.
    #[arg(long, value_name = "FILE")]
    metadata: Option<PathBuf>,
    /// Crypto API catalog replacing the built-in one.
    #[arg(long, value_name = "FILE", env = "SCANNER_CATALOG")]
    catalog: Option<PathBuf>,
    /// Comma-separated rules to run, e.g. R1,R3,R7.
    #[arg(long, value_name = "LIST")]
    rules: Option<String>,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
    /// Dump the IR as JSON (a directory in corpus mode).
    #[arg(long, value_name = "PATH")]
    emit_ir: Option<PathBuf>,
    /// Dump the dependency graph as JSON (a directory in corpus mode).
    #[arg(long, value_name = "PATH")]
    emit_graph: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "project")]
    must_scope: ScopeArg,
    /// Worker threads; defaults to the logical CPU count.
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u32).range(1..))]
    jobs: Option<u32>,
    #[arg(long, value_enum, default_value = "misuse")]
    fail_on: FailOn,
    /// TOML file with rule thresholds (r4.min_iterations, r1.min_length, r1.min_entropy).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Write the report to a file instead of standard output.
    #[arg(long, short, value_name = "FILE")]
    output: Option<PathBuf>,
    /// Zero all timing fields so reports are byte-identical across runs.
    #[arg(long)]
    reproducible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub target: PathBuf,
    pub corpus_mode: bool,
    pub metadata_file: Option<PathBuf>,
    pub catalog_file: Option<PathBuf>,
    pub enabled_rules: BTreeSet<RuleId>,
    pub output_format: OutputFormat,
    pub emit_ir: Option<PathBuf>,
    pub emit_graph: Option<PathBuf>,
    pub must_scope: MustScope,
    pub thresholds: Thresholds,
    pub parallelism: usize,
    pub fail_on: FailOn,
    pub output: Option<PathBuf>,
    pub reproducible: bool,
}

impl ScanConfig {
    /// Defaults for scanning `target` as a single project.
    pub fn new(target: impl Into<PathBuf>) -> Self {
        ScanConfig {
            target: target.into(),
            corpus_mode: false,
            metadata_file: None,
            catalog_file: None,
            enabled_rules: RuleId::all(),
            output_format: OutputFormat::Text,
            emit_ir: None,
            emit_graph: None,
            must_scope: MustScope::Project,
            thresholds: Thresholds::default(),
            parallelism: default_parallelism(),
            fail_on: FailOn::Misuse,
            output: None,
            reproducible: false,
        }
    }
}

pub fn default_parallelism() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, thiserror::Error)]
pub enum UsageError {
    #[error("{0}")]
    Arguments(#[from] clap::Error),
    #[error("{0}")]
    Rules(#[from] crate::rules::UnknownRule),
    #[error("--rules selects no rule")]
    NoRules,
    #[error("cannot read config {path}: {detail}")]
    Config { path: PathBuf, detail: String },
}

impl UsageError {
    /// Help and version requests surface as clap errors but are not failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            UsageError::Arguments(e) => e.exit_code(),
            _ => EXIT_ERROR,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThresholdFile {
    #[serde(default)]
    r1: R1Keys,
    #[serde(default)]
    r4: R4Keys,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct R1Keys {
    min_length: Option<usize>,
    min_entropy: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct R4Keys {
    min_iterations: Option<u64>,
}

/// Applies a TOML threshold file on top of the defaults.
pub fn load_thresholds(path: &Path) -> Result<Thresholds, UsageError> {
    let err = |detail: String| UsageError::Config {
        path: path.to_path_buf(),
        detail,
    };
    let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let file: ThresholdFile = toml::from_str(&text).map_err(|e| err(e.message().to_string()))?;
    let mut t = Thresholds::default();
    if let Some(v) = file.r4.min_iterations {
        t.r4_min_iterations = v;
    }
    if let Some(v) = file.r1.min_length {
        t.secrets.min_length = v;
    }
    if let Some(v) = file.r1.min_entropy {
        t.secrets.min_entropy = v;
    }
    Ok(t)
}

pub fn parse_args<I, T>(argv: I) -> Result<ScanConfig, UsageError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = std::iter::once(OsString::from("cryptolint")).chain(argv.into_iter().map(Into::into));
    let Command::Scan(a) = Cli::try_parse_from(args)?.command;

    let enabled_rules = match &a.rules {
        Some(list) => parse_rule_list(list)?,
        None => RuleId::all(),
    };
    if enabled_rules.is_empty() {
        return Err(UsageError::NoRules);
    }
    let thresholds = match &a.config {
        Some(path) => load_thresholds(path)?,
        None => Thresholds::default(),
    };
    Ok(ScanConfig {
        target: a.target,
        corpus_mode: a.corpus,
        metadata_file: a.metadata,
        catalog_file: a.catalog,
        enabled_rules,
        output_format: match a.format {
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Text => OutputFormat::Text,
        },
        emit_ir: a.emit_ir,
        emit_graph: a.emit_graph,
        must_scope: match a.must_scope {
            ScopeArg::File => MustScope::File,
            ScopeArg::Project => MustScope::Project,
        },
        thresholds,
        parallelism: a.jobs.map_or_else(default_parallelism, |n| n as usize),
        fail_on: a.fail_on,
        output: a.output,
        reproducible: a.reproducible,
    })
}

/// 1 when any report trips `fail_on`, else 0.
pub fn exit_code(reports: &[ProjectReport], fail_on: FailOn) -> i32 {
    let triggered = match fail_on {
        FailOn::Never => false,
        FailOn::Misuse => reports
            .iter()
            .flat_map(|r| &r.findings)
            .any(|f| f.severity == Severity::Misuse),
        FailOn::AnyFinding => reports.iter().any(|r| !r.findings.is_empty()),
    };
    if triggered {
        EXIT_TRIGGERED
    } else {
        EXIT_CLEAN
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScanError {
    #[error(transparent)]
    Catalog(#[from] crate::catalog::CatalogError),
    #[error(transparent)]
    Ingest(#[from] crate::ingest::IngestError),
    #[error(transparent)]
    Report(#[from] crate::report::ReportError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Output of a scan before it is written anywhere.
#[derive(Debug, Clone)]
pub struct ScanOutcome {
    pub reports: Vec<ProjectReport>,
    pub document: String,
    pub exit_code: i32,
}

fn write_file(path: &Path, contents: &str) -> Result<(), ScanError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| ScanError::Write {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| ScanError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes one artifact per project: to `path` itself for a single project,
/// or to `path/<project_id>.json` in corpus mode.
fn dump_artifacts(
    path: &Path,
    corpus: bool,
    analyses: &[ProjectAnalysis],
    render: impl Fn(&ProjectAnalysis) -> String,
) -> Result<(), ScanError> {
    if !corpus {
        if let Some(a) = analyses.first() {
            write_file(path, &render(a))?;
        }
        return Ok(());
    }
    for a in analyses {
        let name = format!("{}.json", a.report.project_id.replace(['/', '\\'], "_"));
        write_file(&path.join(name), &render(a))?;
    }
    Ok(())
}

/// Runs the pipeline and renders the report document.
pub fn scan(config: &ScanConfig) -> Result<ScanOutcome, ScanError> {
    let catalog = load_catalog(config.catalog_file.as_deref())?;
    let projects = discover_projects(&config.target, config.corpus_mode, config.metadata_file.as_deref())?;
    info!("scanning {} project(s) with {} worker(s)", projects.len(), config.parallelism);

    let opts = PipelineOptions {
        catalog,
        rules: config.enabled_rules.clone(),
        must_scope: config.must_scope,
        thresholds: config.thresholds,
        jobs: config.parallelism.max(1),
    };
    let mut analyses = analyze_corpus(&projects, &opts);

    for a in &analyses {
        let t = a.report.timing;
        eprintln!(
            "timing {}: ir_ms={:.3} graph_ms={:.3} detect_ms={:.3}",
            a.report.project_id, t.ir_ms, t.graph_ms, t.detect_ms
        );
    }
    if config.reproducible {
        for a in &mut analyses {
            a.report.clear_timing();
        }
    }
    if let Some(path) = &config.emit_ir {
        dump_artifacts(path, config.corpus_mode, &analyses, |a| serialize_ir(a.units()))?;
    }
    if let Some(path) = &config.emit_graph {
        dump_artifacts(path, config.corpus_mode, &analyses, |a| a.graph.to_json())?;
    }

    let reports: Vec<ProjectReport> = analyses.into_iter().map(|a| a.report).collect();
    let document = if config.corpus_mode {
        let stats = aggregate_corpus(&reports)?;
        emit_corpus(&reports, &stats, config.output_format)
    } else {
        reports
            .first()
            .map(|r| emit_project_report(r, config.output_format))
            .unwrap_or_default()
    };
    let exit_code = exit_code(&reports, config.fail_on);
    Ok(ScanOutcome {
        reports,
        document,
        exit_code,
    })
}

/// Scans and writes the report to `--output` or `out`; returns the exit code.
pub fn run_scan_to(config: &ScanConfig, out: &mut dyn Write) -> i32 {
    let outcome = match scan(config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    let written = match &config.output {
        Some(path) => write_file(path, &outcome.document),
        None => out
            .write_all(outcome.document.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|source| ScanError::Write {
                path: PathBuf::from("<stdout>"),
                source,
            }),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_ERROR;
    }
    outcome.exit_code
}

pub fn run_scan(config: ScanConfig) -> i32 {
    run_scan_to(&config, &mut io::stdout().lock())
}

/// Entry point used by the binary.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match parse_args(argv) {
        Ok(config) => run_scan(config),
        Err(UsageError::Arguments(e)) => {
            let _ = e.print();
            e.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
