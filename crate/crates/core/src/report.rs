//! Per-project findings documents and corpus-level statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::ingest::ProjectMetadata;
use crate::rules::{Finding, RuleId, Severity};

pub const UNKNOWN_LABEL: &str = "Unknown";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Text,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("duplicate project id `{0}`")]
    DuplicateProjectId(String),
}

/// Wall-clock milliseconds per pipeline stage, microsecond resolution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub ir_ms: f64,
    pub graph_ms: f64,
    pub detect_ms: f64,
}

impl StageTiming {
    pub fn millis(d: std::time::Duration) -> f64 {
        d.as_micros() as f64 / 1000.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectReport {
    pub project_id: String,
    pub metadata: ProjectMetadata,
    pub file_count: usize,
    pub ir_unit_count: usize,
    pub language: String,
    pub language_tie: bool,
    pub crypto_enabled: bool,
    pub misuse: bool,
    pub findings: Vec<Finding>,
    pub partial_files: Vec<String>,
    pub duration_ms: u64,
    #[serde(flatten)]
    pub timing: StageTiming,
}

impl ProjectReport {
    /// Rules with at least one misuse-severity finding.
    pub fn misuse_rules(&self) -> BTreeSet<RuleId> {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Misuse)
            .map(|f| f.rule_id)
            .collect()
    }

    /// Zeroes every wall-clock field so documents are byte-comparable.
    pub fn clear_timing(&mut self) {
        self.duration_ms = 0;
        self.timing = StageTiming::default();
    }

    fn language_label(&self) -> String {
        self.metadata
            .declared_language
            .clone()
            .unwrap_or_else(|| self.language.clone())
    }
}

pub fn emit_project_report(report: &ProjectReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        OutputFormat::Text => render_findings(&report.findings),
    }
}

/// One line per finding: `RULE severity file:line message`.
pub fn render_findings(findings: &[Finding]) -> String {
    let mut out = String::new();
    for f in findings {
        let _ = writeln!(out, "{} {} {}:{} {}", f.rule_id, f.severity, f.file, f.line, f.message);
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub crypto_yes: usize,
    pub crypto_no: usize,
    pub misuse_yes: usize,
    pub misuse_no: usize,
}

impl Cell {
    fn add(&mut self, other: &Cell) {
        self.crypto_yes += other.crypto_yes;
        self.crypto_no += other.crypto_no;
        self.misuse_yes += other.misuse_yes;
        self.misuse_no += other.misuse_no;
    }

    pub fn total(&self) -> usize {
        self.crypto_yes + self.crypto_no
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total_projects: usize,
    pub crypto_enabled_count: usize,
    pub misuse_count: usize,
    pub misuse_rate: f64,
    pub by_rule: BTreeMap<RuleId, usize>,
    pub rule_cooccurrence: BTreeMap<String, usize>,
    pub by_language: BTreeMap<String, Cell>,
    pub by_category: BTreeMap<String, Cell>,
    pub by_market: BTreeMap<String, Cell>,
}

fn label(value: Option<&String>) -> String {
    match value.map(|s| s.trim()) {
        Some(s) if !s.is_empty() => s.to_string(),
        _ => UNKNOWN_LABEL.to_string(),
    }
}

impl CorpusStats {
    pub fn from_report(report: &ProjectReport) -> Self {
        let cell = Cell {
            crypto_yes: report.crypto_enabled as usize,
            crypto_no: !report.crypto_enabled as usize,
            misuse_yes: report.misuse as usize,
            misuse_no: !report.misuse as usize,
        };
        let rules = report.misuse_rules();
        let mut cooccurrence = BTreeMap::new();
        for (i, a) in rules.iter().enumerate() {
            for b in rules.iter().skip(i + 1) {
                cooccurrence.insert(format!("{a}+{b}"), 1);
            }
        }
        let mut stats = CorpusStats {
            total_projects: 1,
            crypto_enabled_count: report.crypto_enabled as usize,
            misuse_count: report.misuse as usize,
            misuse_rate: 0.0,
            by_rule: rules.into_iter().map(|r| (r, 1)).collect(),
            rule_cooccurrence: cooccurrence,
            by_language: BTreeMap::from([(label(Some(&report.language_label())), cell)]),
            by_category: BTreeMap::from([(label(report.metadata.category.as_ref()), cell)]),
            by_market: BTreeMap::from([(label(report.metadata.market.as_ref()), cell)]),
        };
        stats.refresh_rate();
        stats
    }

    /// Associative, commutative merge of two partial aggregates.
    pub fn merge(mut self, other: &CorpusStats) -> Self {
        self.total_projects += other.total_projects;
        self.crypto_enabled_count += other.crypto_enabled_count;
        self.misuse_count += other.misuse_count;
        for (k, v) in &other.by_rule {
            *self.by_rule.entry(*k).or_default() += v;
        }
        for (k, v) in &other.rule_cooccurrence {
            *self.rule_cooccurrence.entry(k.clone()).or_default() += v;
        }
        for (mine, theirs) in [
            (&mut self.by_language, &other.by_language),
            (&mut self.by_category, &other.by_category),
            (&mut self.by_market, &other.by_market),
        ] {
            for (k, cell) in theirs {
                mine.entry(k.clone()).or_default().add(cell);
            }
        }
        self.refresh_rate();
        self
    }

    fn refresh_rate(&mut self) {
        self.misuse_rate = if self.crypto_enabled_count > 0 {
            self.misuse_count as f64 / self.crypto_enabled_count as f64
        } else {
            0.0
        };
    }
}

pub fn aggregate_corpus(reports: &[ProjectReport]) -> Result<CorpusStats, ReportError> {
    let mut ids = BTreeSet::new();
    for r in reports {
        if !ids.insert(r.project_id.as_str()) {
            return Err(ReportError::DuplicateProjectId(r.project_id.clone()));
        }
    }
    Ok(reports
        .iter()
        .map(CorpusStats::from_report)
        .fold(CorpusStats::default(), |acc, s| acc.merge(&s)))
}

#[derive(Debug, Serialize)]
struct CorpusDocument<'a> {
    projects: &'a [ProjectReport],
    corpus: &'a CorpusStats,
}

pub fn emit_corpus(reports: &[ProjectReport], stats: &CorpusStats, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => {
            let doc = CorpusDocument {
                projects: reports,
                corpus: stats,
            };
            let mut s = serde_json::to_string_pretty(&doc).expect("corpus serializes");
            s.push('\n');
            s
        }
        OutputFormat::Text => {
            let mut out = String::new();
            for r in reports {
                let _ = writeln!(out, "# {}", r.project_id);
                out.push_str(&render_findings(&r.findings));
            }
            out.push('\n');
            out.push_str(&render_summary(stats));
            out
        }
    }
}

fn count_table(out: &mut String, title: &str, rows: Vec<(String, usize)>) {
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0).max(10);
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "{:<width$}  {:>8}", "label", "projects");
    let mut rows = rows;
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    for (k, v) in rows {
        let _ = writeln!(out, "{k:<width$}  {v:>8}");
    }
    out.push('\n');
}

fn cell_table(out: &mut String, title: &str, cells: &BTreeMap<String, Cell>) {
    let width = cells.keys().map(String::len).max().unwrap_or(0).max(10);
    let _ = writeln!(out, "{title}");
    let _ = writeln!(
        out,
        "{:<width$}  {:>10}  {:>10}  {:>10}  {:>10}",
        "label", "crypto_yes", "crypto_no", "misuse_yes", "misuse_no"
    );
    let mut rows: Vec<(&String, &Cell)> = cells.iter().collect();
    rows.sort_by(|a, b| b.1.misuse_yes.cmp(&a.1.misuse_yes).then_with(|| a.0.cmp(b.0)));
    for (k, c) in rows {
        let _ = writeln!(
            out,
            "{k:<width$}  {:>10}  {:>10}  {:>10}  {:>10}",
            c.crypto_yes, c.crypto_no, c.misuse_yes, c.misuse_no
        );
    }
    out.push('\n');
}

/// Fixed-width tables, one per dimension, rows ordered by misuse count
/// descending then label.
pub fn render_summary(stats: &CorpusStats) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "projects: {}  crypto-enabled: {}  misuse: {}  misuse rate: {:.3}\n",
        stats.total_projects, stats.crypto_enabled_count, stats.misuse_count, stats.misuse_rate
    );
    count_table(
        &mut out,
        "by rule",
        stats.by_rule.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    );
    count_table(
        &mut out,
        "rule co-occurrence",
        stats.rule_cooccurrence.iter().map(|(k, v)| (k.clone(), *v)).collect(),
    );
    cell_table(&mut out, "by language", &stats.by_language);
    cell_table(&mut out, "by category", &stats.by_category);
    cell_table(&mut out, "by market", &stats.by_market);
    out
}
