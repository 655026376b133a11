//! Taint marking and propagation over the dependency graph, and backward
//! resolution of arguments to their concrete origin.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::catalog::{CryptoApiCatalog, Role, SemanticCategory};
use crate::dependency::{DepEdge, DependencyGraph, EdgeKind};
use crate::ir::{ArgTag, Argument, IrUnit, ValueBinding, ValueKind};

/// Name fragments (case-insensitive) marking a value as a credential.
pub const CREDENTIAL_LEXICON: [&str; 9] = [
    "password",
    "passwd",
    "pwd",
    "secret",
    "token",
    "api_key",
    "apikey",
    "private_key",
    "credential",
];

pub const MAX_RESOLUTION_DEPTH: usize = 16;

pub fn is_credential_name(name: &str) -> bool {
    let lower = name.to_lowercase();
    CREDENTIAL_LEXICON.iter().any(|w| lower.contains(w))
}

/// Shannon entropy in bits per character.
pub fn shannon_entropy(text: &str) -> f64 {
    let mut counts: HashMap<char, usize> = HashMap::new();
    let mut total = 0usize;
    for c in text.chars() {
        *counts.entry(c).or_default() += 1;
        total += 1;
    }
    if total == 0 {
        return 0.0;
    }
    counts
        .values()
        .map(|&n| {
            let p = n as f64 / total as f64;
            -p * p.log2()
        })
        .sum()
}

/// Hard-coded secret detector for string constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecretHeuristic {
    pub min_length: usize,
    pub min_entropy: f64,
}

impl Default for SecretHeuristic {
    fn default() -> Self {
        SecretHeuristic {
            min_length: 20,
            min_entropy: 3.5,
        }
    }
}

/// Shortest value carrying a provider prefix that still counts as a key.
const MIN_PREFIXED_LENGTH: usize = 16;

impl SecretHeuristic {
    /// Long high-entropy tokens, or values carrying a known provider prefix.
    /// Whitespace-bearing text and URLs are never secrets.
    pub fn matches(&self, text: &str, catalog: &CryptoApiCatalog) -> bool {
        if text.chars().any(char::is_whitespace) || text.contains("://") {
            return false;
        }
        let len = text.chars().count();
        (len >= self.min_length && shannon_entropy(text) >= self.min_entropy)
            || (len >= MIN_PREFIXED_LENGTH && catalog.has_secret_prefix(text))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OriginKind {
    Literal,
    ExternalInput,
    DynamicRandom,
    Environment,
    Unresolved,
}

impl OriginKind {
    /// Preference when several producers disagree: the most actionable
    /// origin wins.
    fn rank(self) -> u8 {
        match self {
            OriginKind::Literal => 0,
            OriginKind::Environment => 1,
            OriginKind::ExternalInput => 2,
            OriginKind::DynamicRandom => 3,
            OriginKind::Unresolved => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OriginValue {
    pub kind: OriginKind,
    pub literal_text: Option<String>,
    pub resolution_path: Vec<String>,
}

impl OriginValue {
    fn new(kind: OriginKind, path: Vec<String>) -> Self {
        OriginValue {
            kind,
            literal_text: None,
            resolution_path: path,
        }
    }

    fn literal(text: &str, path: Vec<String>) -> Self {
        OriginValue {
            kind: OriginKind::Literal,
            literal_text: Some(text.to_string()),
            resolution_path: path,
        }
    }

    pub fn is_literal(&self) -> bool {
        self.kind == OriginKind::Literal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sensitivity {
    Credential,
    Generic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaintChain {
    pub source_unit: String,
    pub sink_unit: String,
    pub hops: Vec<DepEdge>,
    pub sensitivity: Sensitivity,
}

impl TaintChain {
    pub fn has_may_hop(&self) -> bool {
        self.hops.iter().any(|h| h.kind == EdgeKind::May)
    }

    /// Unit ids along the chain, source first.
    pub fn units(&self) -> Vec<&str> {
        let mut out = vec![self.source_unit.as_str()];
        out.extend(self.hops.iter().map(|h| h.to_unit.as_str()));
        out
    }
}

/// Read-only view over everything origin resolution and source marking need.
#[derive(Clone, Copy)]
pub struct TaintContext<'a> {
    pub graph: &'a DependencyGraph,
    pub catalog: &'a CryptoApiCatalog,
    pub values: &'a [ValueBinding],
    pub secrets: SecretHeuristic,
}

impl<'a> TaintContext<'a> {
    pub fn new(
        graph: &'a DependencyGraph,
        catalog: &'a CryptoApiCatalog,
        values: &'a [ValueBinding],
        secrets: SecretHeuristic,
    ) -> Self {
        TaintContext {
            graph,
            catalog,
            values,
            secrets,
        }
    }

    /// Literal value binding for `name` visible from `unit`: the nearest one
    /// at or above the unit's line in the same file, else any in that file.
    pub fn binding_for(&self, unit: &IrUnit, name: &str) -> Option<&'a ValueBinding> {
        let same: Vec<&ValueBinding> = self
            .values
            .iter()
            .filter(|b| b.file == unit.file && b.name == name)
            .collect();
        same.iter()
            .filter(|b| b.line <= unit.line)
            .max_by_key(|b| b.line)
            .or_else(|| same.first())
            .copied()
    }

    fn secret_literal_arg(&self, unit: &IrUnit) -> bool {
        unit.arguments.iter().any(|a| match a.tag {
            ArgTag::Constant => self.secrets.matches(&a.value, self.catalog),
            ArgTag::Variable => self.binding_for(unit, &a.value).is_some_and(|b| {
                b.kind == ValueKind::Literal && self.secrets.matches(&b.value, self.catalog)
            }),
            _ => false,
        })
    }

    /// Source units: catalog source markers, calls receiving a secret-looking
    /// literal (directly or through a literal binding), and calls consuming a
    /// credential-named value.
    pub fn identify_sources(&self) -> BTreeSet<String> {
        self.graph
            .nodes
            .iter()
            .filter(|u| {
                self.catalog.is_source_marker(&u.call_name)
                    || self.secret_literal_arg(u)
                    || consumes_credential(u)
            })
            .map(|u| u.unit_id.clone())
            .collect()
    }

    /// Sink units: catalog sink markers and hash, cipher, KDF and MAC calls.
    pub fn identify_sinks(&self) -> BTreeSet<String> {
        self.graph
            .nodes
            .iter()
            .filter(|u| {
                self.catalog.is_sink_marker(&u.call_name)
                    || matches!(
                        self.catalog.role(u),
                        Role::Hash | Role::SymmetricCipher | Role::Kdf | Role::Mac
                    )
            })
            .map(|u| u.unit_id.clone())
            .collect()
    }

    pub fn resolve_to_origin(&self, unit: &IrUnit, arg: &Argument) -> OriginValue {
        self.resolve(unit, arg, vec![unit.unit_id.clone()])
    }

    fn resolve(&self, unit: &IrUnit, arg: &Argument, path: Vec<String>) -> OriginValue {
        match arg.tag {
            ArgTag::Constant => OriginValue::literal(&arg.value, path),
            ArgTag::ListLiteral | ArgTag::DictLiteral => {
                let all_constant = arg
                    .element_tags
                    .as_ref()
                    .is_some_and(|t| t.iter().all(|t| *t == ArgTag::Constant));
                if all_constant {
                    OriginValue::literal(&arg.value, path)
                } else {
                    OriginValue::new(OriginKind::Unresolved, path)
                }
            }
            ArgTag::FunctionReturn => {
                let kind = self.callee_origin(unit, &arg.value);
                OriginValue::new(kind.unwrap_or(OriginKind::Unresolved), path)
            }
            ArgTag::Variable if arg.is_expression_digest() => {
                OriginValue::new(OriginKind::Unresolved, path)
            }
            ArgTag::Variable => self.resolve_variable(unit, &arg.value, path),
        }
    }

    /// Origin implied by a callee's catalog entry alone, if any.
    fn callee_origin(&self, context: &IrUnit, call_name: &str) -> Option<OriginKind> {
        let language = crate::catalog::unit_language(context);
        let spec = self.catalog.lookup(call_name, language);
        if spec.is_some_and(|s| {
            matches!(s.role, Role::Prng | Role::KeyMaterial)
                || s.semantic_category == SemanticCategory::Random
        }) {
            return Some(OriginKind::DynamicRandom);
        }
        self.catalog.source_marker(call_name).map(|m| {
            if m.to_lowercase().contains("env") {
                OriginKind::Environment
            } else {
                OriginKind::ExternalInput
            }
        })
    }

    fn resolve_variable(&self, unit: &IrUnit, name: &str, path: Vec<String>) -> OriginValue {
        let producers: BTreeSet<&str> = self
            .graph
            .incoming(&unit.unit_id)
            .filter(|e| e.kind == EdgeKind::Must && e.witness == name)
            .map(|e| e.from_unit.as_str())
            .filter(|p| !path.iter().any(|seen| seen == p))
            .collect();
        if producers.is_empty() {
            return match self.binding_for(unit, name) {
                Some(b) if b.kind == ValueKind::Literal => OriginValue::literal(&b.value, path),
                Some(_) => OriginValue::new(OriginKind::Environment, path),
                None => OriginValue::new(OriginKind::Unresolved, path),
            };
        }
        if path.len() > MAX_RESOLUTION_DEPTH {
            return OriginValue::new(OriginKind::Unresolved, path);
        }
        producers
            .into_iter()
            .filter_map(|p| self.graph.node(p))
            .map(|producer| {
                let mut next = path.clone();
                next.push(producer.unit_id.clone());
                self.resolve_producer(producer, next)
            })
            .min_by_key(|o| o.kind.rank())
            .expect("at least one producer")
    }

    fn resolve_producer(&self, producer: &IrUnit, path: Vec<String>) -> OriginValue {
        if let Some(kind) = self.callee_origin(producer, &producer.call_name) {
            return OriginValue::new(kind, path);
        }
        let role = self.catalog.role(producer);
        if role == Role::None && producer.arguments.len() == 1 {
            return self.resolve(producer, &producer.arguments[0], path);
        }
        OriginValue::new(OriginKind::Unresolved, path)
    }
}

/// True when one of the unit's arguments references a credential-named
/// value (variables, names inside expressions, callee paths of nested calls).
pub fn consumes_credential(unit: &IrUnit) -> bool {
    unit.arguments
        .iter()
        .flat_map(|a| a.referenced_names())
        .any(is_credential_name)
}

fn source_is_credential(unit: &IrUnit) -> bool {
    consumes_credential(unit)
        || is_credential_name(&unit.call_name)
        || unit.produced_as.as_deref().is_some_and(is_credential_name)
        || unit.arguments.iter().any(|a| match &a.position {
            crate::ir::ArgPosition::Keyword(k) => is_credential_name(k),
            _ => false,
        })
}

/// Shortest-path witnesses from each source to each reachable sink.
///
/// Among equally short paths the lexicographically smallest unit-id sequence
/// wins; between parallel edges a must edge is preferred, then the smaller
/// witness. A unit that is both source and sink yields a zero-hop chain.
pub fn propagate(
    graph: &DependencyGraph,
    sources: &BTreeSet<String>,
    sinks: &BTreeSet<String>,
) -> Vec<TaintChain> {
    let mut chains = Vec::new();
    for source in sources {
        let Some(start) = graph.position(source) else {
            continue;
        };
        let parents = shortest_path_tree(graph, start);
        for sink in sinks {
            let Some(target) = graph.position(sink) else {
                continue;
            };
            if target != start && !parents.contains_key(&target) {
                continue;
            }
            let mut hops = Vec::new();
            let mut at = target;
            while at != start {
                let edge = &parents[&at];
                hops.push(edge.clone());
                at = graph.position(&edge.from_unit).expect("edge endpoint");
            }
            hops.reverse();
            let credential = hops.iter().any(|h| is_credential_name(&h.witness))
                || source_is_credential(&graph.nodes[start]);
            chains.push(TaintChain {
                source_unit: source.clone(),
                sink_unit: sink.clone(),
                hops,
                sensitivity: if credential {
                    Sensitivity::Credential
                } else {
                    Sensitivity::Generic
                },
            });
        }
    }
    chains
}

/// BFS from `start` keeping, for every reached node, the edge that ends the
/// lexicographically smallest shortest path to it. Nodes of one layer are
/// ranked by their best path, which is the parent's rank followed by the
/// node's own id.
fn shortest_path_tree(graph: &DependencyGraph, start: usize) -> BTreeMap<usize, DepEdge> {
    let mut parent: BTreeMap<usize, DepEdge> = BTreeMap::new();
    let mut seen = vec![false; graph.nodes.len()];
    seen[start] = true;
    let mut layer = vec![start];
    while !layer.is_empty() {
        // Best incoming edge per newly reached node, keyed by parent rank.
        let mut best: BTreeMap<usize, (usize, &DepEdge)> = BTreeMap::new();
        for (rank, &u) in layer.iter().enumerate() {
            for edge in graph.outgoing(&graph.nodes[u].unit_id) {
                let v = graph.position(&edge.to_unit).expect("edge endpoint");
                if seen[v] {
                    continue;
                }
                let better = match best.get(&v) {
                    None => true,
                    Some((r, e)) => (rank, edge.kind, &edge.witness) < (*r, e.kind, &e.witness),
                };
                if better {
                    best.insert(v, (rank, edge));
                }
            }
        }
        let mut next: Vec<(usize, &str, usize)> = best
            .iter()
            .map(|(&v, (rank, _))| (*rank, graph.nodes[v].unit_id.as_str(), v))
            .collect();
        next.sort();
        for &(_, _, v) in &next {
            seen[v] = true;
            parent.insert(v, best[&v].1.clone());
        }
        layer = next.into_iter().map(|(_, _, v)| v).collect();
    }
    parent
}
