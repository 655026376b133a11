//! Per-project analysis driver: IR extraction, graph construction, taint
//! propagation and rule evaluation, run over a bounded worker pool.

use std::collections::BTreeSet;
use std::time::Instant;

use log::{debug, warn};

use crate::catalog::CryptoApiCatalog;
use crate::dependency::{build_graph, DependencyGraph, MustScope};
use crate::ingest::{enumerate_source_files, majority_language, ProjectDescriptor, ProjectMetadata, SourceFile};
use crate::ir::{lower_source, FileIr, IrUnit, ValueBinding};
use crate::report::{ProjectReport, StageTiming};
use crate::rules::{evaluate_rules, has_misuse, RuleContext, RuleId, Severity, Thresholds};
use crate::taint::{propagate, TaintContext};

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub catalog: CryptoApiCatalog,
    pub rules: BTreeSet<RuleId>,
    pub must_scope: MustScope,
    pub thresholds: Thresholds,
    pub jobs: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            catalog: CryptoApiCatalog::default(),
            rules: RuleId::all(),
            must_scope: MustScope::Project,
            thresholds: Thresholds::default(),
            jobs: 1,
        }
    }
}

/// A finished project: its report plus the intermediate artifacts that the
/// CLI can dump on request.
#[derive(Debug, Clone)]
pub struct ProjectAnalysis {
    pub report: ProjectReport,
    pub graph: DependencyGraph,
    pub values: Vec<ValueBinding>,
}

impl ProjectAnalysis {
    pub fn units(&self) -> &[IrUnit] {
        &self.graph.nodes
    }
}

/// Maps `f` over `items` on a pool of `jobs` workers, preserving order.
#[cfg(feature = "parallel")]
pub fn map_ordered<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    if jobs <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(e) => {
            warn!("falling back to sequential execution: {e}");
            items.iter().map(f).collect()
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_ordered<T, R, F>(items: &[T], _jobs: usize, f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Lowers files, in parallel when already running inside a worker pool.
fn lower_all(files: &[SourceFile], parallel: bool) -> Vec<(String, Option<FileIr>)> {
    let lower = |f: &SourceFile| {
        let ir = match lower_source(f) {
            Ok(ir) => Some(ir),
            Err(e) => {
                warn!("{}: {e}", f.rel_path);
                None
            }
        };
        (f.rel_path.clone(), ir)
    };
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return files.par_iter().map(lower).collect();
    }
    let _ = parallel;
    files.iter().map(lower).collect()
}

pub fn analyze_files(
    project_id: &str,
    metadata: &ProjectMetadata,
    files: &[SourceFile],
    opts: &PipelineOptions,
) -> ProjectAnalysis {
    let started = Instant::now();
    let (language, language_tie) = majority_language(files);

    let ir_start = Instant::now();
    let mut units = Vec::new();
    let mut values = Vec::new();
    let mut partial_files = Vec::new();
    for (path, ir) in lower_all(files, opts.jobs > 1) {
        match ir {
            Some(ir) => {
                if ir.partial {
                    partial_files.push(path);
                }
                units.extend(ir.units);
                values.extend(ir.values);
            }
            None => partial_files.push(path),
        }
    }
    let ir_ms = StageTiming::millis(ir_start.elapsed());

    let graph_start = Instant::now();
    let graph = build_graph(units, &opts.catalog, opts.must_scope);
    let graph_ms = StageTiming::millis(graph_start.elapsed());

    let detect_start = Instant::now();
    let taint = TaintContext::new(&graph, &opts.catalog, &values, opts.thresholds.secrets);
    let chains = propagate(&graph, &taint.identify_sources(), &taint.identify_sinks());
    let ctx = RuleContext::new(project_id, taint, &chains, opts.thresholds);
    let findings = evaluate_rules(&ctx, &opts.rules);
    let detect_ms = StageTiming::millis(detect_start.elapsed());

    let crypto_api_used = graph.nodes.iter().any(|u| opts.catalog.role(u).is_crypto());
    let misuse = has_misuse(&findings);
    debug!(
        "{project_id}: {} units, {} edges, {} chains, {} findings",
        graph.nodes.len(),
        graph.edges.len(),
        chains.len(),
        findings.len()
    );
    let report = ProjectReport {
        project_id: project_id.to_string(),
        metadata: metadata.clone(),
        file_count: files.len(),
        ir_unit_count: graph.nodes.len(),
        language: language.as_str().to_string(),
        language_tie,
        crypto_enabled: crypto_api_used || findings.iter().any(|f| f.severity == Severity::Misuse),
        misuse,
        findings,
        partial_files,
        duration_ms: started.elapsed().as_millis() as u64,
        timing: StageTiming {
            ir_ms,
            graph_ms,
            detect_ms,
        },
    };
    ProjectAnalysis {
        report,
        graph,
        values,
    }
}

pub fn analyze_project(project: &ProjectDescriptor, opts: &PipelineOptions) -> ProjectAnalysis {
    let started = Instant::now();
    let enumeration = enumerate_source_files(project);
    for w in &enumeration.warnings {
        warn!("{}: {}", w.path.display(), w.message);
    }
    let mut analysis = analyze_files(&project.project_id, &project.metadata, &enumeration.files, opts);
    analysis.report.duration_ms = started.elapsed().as_millis() as u64;
    analysis
}

/// Analyzes every project on a pool of `opts.jobs` workers. Results keep the
/// input order, so output is independent of scheduling.
pub fn analyze_corpus(projects: &[ProjectDescriptor], opts: &PipelineOptions) -> Vec<ProjectAnalysis> {
    map_ordered(projects, opts.jobs, |p| analyze_project(p, opts))
}
