//! Misuse rules R1-R8 evaluated over the dependency graph, taint chains and
//! origin resolution.

mod checks;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use checks::{
    check_deprecated_primitive, check_ecb_mode, check_fixed_iv_salt, check_fixed_secret,
    check_kdf_config, check_missing_integrity, check_static_seed, check_weak_hash,
};

use crate::catalog::{CryptoApiCatalog, CryptoApiSpec};
use crate::dependency::{DepEdge, DependencyGraph, EdgeKind};
use crate::ir::{ArgPosition, IrUnit};
use crate::taint::{OriginValue, SecretHeuristic, Sensitivity, TaintChain, TaintContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleId {
    R1,
    R2,
    R3,
    R4,
    R5,
    R6,
    R7,
    R8,
}

impl RuleId {
    pub const ALL: [RuleId; 8] = [
        RuleId::R1,
        RuleId::R2,
        RuleId::R3,
        RuleId::R4,
        RuleId::R5,
        RuleId::R6,
        RuleId::R7,
        RuleId::R8,
    ];

    pub fn title(self) -> &'static str {
        match self {
            RuleId::R1 => "hard-coded key or secret",
            RuleId::R2 => "fixed IV or salt",
            RuleId::R3 => "weak hash function",
            RuleId::R4 => "weak key derivation",
            RuleId::R5 => "static PRNG seed",
            RuleId::R6 => "ECB mode",
            RuleId::R7 => "missing integrity protection",
            RuleId::R8 => "deprecated primitive",
        }
    }

    pub fn all() -> BTreeSet<RuleId> {
        Self::ALL.into_iter().collect()
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{}", *self as u8 + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown rule `{0}` (expected R1..R8)")]
pub struct UnknownRule(pub String);

impl FromStr for RuleId {
    type Err = UnknownRule;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        RuleId::ALL
            .into_iter()
            .find(|r| r.to_string().eq_ignore_ascii_case(t))
            .ok_or_else(|| UnknownRule(t.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Misuse,
    Informational,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Misuse => "misuse",
            Severity::Informational => "informational",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confidence {
    Definite,
    Potential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    #[serde(rename = "rule")]
    pub rule_id: RuleId,
    pub severity: Severity,
    pub confidence: Confidence,
    #[serde(skip)]
    pub project_id: String,
    pub file: String,
    pub line: usize,
    pub message: String,
    #[serde(rename = "chain", serialize_with = "chain_hops", deserialize_with = "hops_chain")]
    pub evidence: Option<TaintChain>,
    #[serde(skip)]
    pub resolved_origins: Vec<(ArgPosition, OriginValue)>,
}

fn chain_hops<S: Serializer>(chain: &Option<TaintChain>, s: S) -> Result<S::Ok, S::Error> {
    chain.as_ref().map(|c| &c.hops).serialize(s)
}

fn hops_chain<'de, D: Deserializer<'de>>(d: D) -> Result<Option<TaintChain>, D::Error> {
    let hops: Option<Vec<DepEdge>> = Option::deserialize(d)?;
    Ok(hops.map(|hops| TaintChain {
        source_unit: hops.first().map(|h| h.from_unit.clone()).unwrap_or_default(),
        sink_unit: hops.last().map(|h| h.to_unit.clone()).unwrap_or_default(),
        sensitivity: Sensitivity::Generic,
        hops,
    }))
}

impl Finding {
    pub fn dedup_key(&self) -> (&str, RuleId, &str, usize, &str) {
        (&self.project_id, self.rule_id, &self.file, self.line, &self.message)
    }

    fn sort_key(&self) -> (&str, usize, RuleId, &str) {
        (&self.file, self.line, self.rule_id, &self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub r4_min_iterations: u64,
    pub secrets: SecretHeuristic,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            r4_min_iterations: 10_000,
            secrets: SecretHeuristic::default(),
        }
    }
}

/// Everything a checker reads. Checkers are pure functions of this view.
pub struct RuleContext<'a> {
    pub project_id: &'a str,
    pub taint: TaintContext<'a>,
    pub chains: &'a [TaintChain],
    pub thresholds: Thresholds,
    chains_by_sink: HashMap<&'a str, Vec<&'a TaintChain>>,
    chains_by_source: HashMap<&'a str, Vec<&'a TaintChain>>,
}

impl<'a> RuleContext<'a> {
    pub fn new(
        project_id: &'a str,
        taint: TaintContext<'a>,
        chains: &'a [TaintChain],
        thresholds: Thresholds,
    ) -> Self {
        let mut chains_by_sink: HashMap<&str, Vec<&TaintChain>> = HashMap::new();
        let mut chains_by_source: HashMap<&str, Vec<&TaintChain>> = HashMap::new();
        for c in chains {
            chains_by_sink.entry(c.sink_unit.as_str()).or_default().push(c);
            chains_by_source.entry(c.source_unit.as_str()).or_default().push(c);
        }
        RuleContext {
            project_id,
            taint,
            chains,
            thresholds,
            chains_by_sink,
            chains_by_source,
        }
    }

    pub fn graph(&self) -> &'a DependencyGraph {
        self.taint.graph
    }

    pub fn catalog(&self) -> &'a CryptoApiCatalog {
        self.taint.catalog
    }

    pub fn spec(&self, unit: &IrUnit) -> Option<&'a CryptoApiSpec> {
        self.taint.catalog.lookup_unit(unit)
    }

    /// Chains ending at `unit_id`, in (source, sink) order.
    pub fn chains_into(&self, unit_id: &str) -> &[&'a TaintChain] {
        self.chains_by_sink.get(unit_id).map_or(&[], Vec::as_slice)
    }

    /// Chains starting at `unit_id`, in sink order.
    pub fn chains_from(&self, unit_id: &str) -> &[&'a TaintChain] {
        self.chains_by_source.get(unit_id).map_or(&[], Vec::as_slice)
    }

    /// Potential when the evidence crosses a may edge, or when a may edge
    /// from any unit on the evidence chain enters the trigger.
    pub fn confidence(&self, evidence: Option<&TaintChain>, trigger: &IrUnit) -> Confidence {
        let Some(chain) = evidence else {
            return Confidence::Definite;
        };
        if chain.has_may_hop() {
            return Confidence::Potential;
        }
        let members: BTreeSet<&str> = chain.units().into_iter().collect();
        let behind_may = self
            .graph()
            .incoming(&trigger.unit_id)
            .any(|e| e.kind == EdgeKind::May && members.contains(e.from_unit.as_str()));
        if behind_may {
            Confidence::Potential
        } else {
            Confidence::Definite
        }
    }

    pub fn finding(
        &self,
        rule_id: RuleId,
        severity: Severity,
        file: &str,
        line: usize,
        message: String,
    ) -> Finding {
        Finding {
            rule_id,
            severity,
            confidence: Confidence::Definite,
            project_id: self.project_id.to_string(),
            file: file.to_string(),
            line,
            message,
            evidence: None,
            resolved_origins: Vec::new(),
        }
    }
}

pub fn run_rule(rule: RuleId, ctx: &RuleContext<'_>) -> Vec<Finding> {
    match rule {
        RuleId::R1 => check_fixed_secret(ctx),
        RuleId::R2 => check_fixed_iv_salt(ctx),
        RuleId::R3 => check_weak_hash(ctx),
        RuleId::R4 => check_kdf_config(ctx),
        RuleId::R5 => check_static_seed(ctx),
        RuleId::R6 => check_ecb_mode(ctx),
        RuleId::R7 => check_missing_integrity(ctx),
        RuleId::R8 => check_deprecated_primitive(ctx),
    }
}

/// Union of the enabled checkers, deduplicated and sorted by
/// (file, line, rule).
pub fn evaluate_rules(ctx: &RuleContext<'_>, enabled: &BTreeSet<RuleId>) -> Vec<Finding> {
    let mut findings: Vec<Finding> = enabled.iter().flat_map(|&r| run_rule(r, ctx)).collect();
    findings.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let mut seen = BTreeSet::new();
    findings.retain(|f| {
        seen.insert((
            f.project_id.clone(),
            f.rule_id,
            f.file.clone(),
            f.line,
            f.message.clone(),
        ))
    });
    findings
}

pub fn has_misuse(findings: &[Finding]) -> bool {
    findings.iter().any(|f| f.severity == Severity::Misuse)
}

/// Parses a comma-separated rule list such as "R1,r3, R7".
pub fn parse_rule_list(text: &str) -> Result<BTreeSet<RuleId>, UnknownRule> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(RuleId::from_str)
        .collect()
}
