//! Declarative knowledge base of API surfaces: crypto role, semantic
//! category and parameter semantics per call pattern, plus the taint
//! vocabulary (source and sink markers) and risky category pairs.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{detect_language, Language};
use crate::ir::{ArgPosition, Argument, IrUnit};

const DEFAULT_CATALOG: &str = include_str!("default_catalog.json");

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("malformed catalog{}: {detail}", index.map(|i| format!(" (entry {i})")).unwrap_or_default())]
    MalformedCatalog { index: Option<usize>, detail: String },
    #[error("ambiguous pattern {pattern:?} declared twice for language {language}")]
    AmbiguousPattern { pattern: String, language: String },
    #[error("cannot read catalog {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Hash,
    SymmetricCipher,
    Kdf,
    Prng,
    KeyMaterial,
    Mac,
    Signature,
    None,
}

impl Role {
    pub fn is_crypto(self) -> bool {
        self != Role::None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticCategory {
    Protect,
    Upload,
    Mask,
    Persist,
    Transmit,
    Input,
    Random,
    Derive,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LanguageSpec {
    #[serde(alias = "Any")]
    Any,
    #[serde(alias = "Python")]
    Python,
    #[serde(alias = "JavaScript")]
    Javascript,
    #[serde(alias = "TypeScript")]
    Typescript,
}

impl LanguageSpec {
    /// Match strength: 2 for the exact language, 1 for JavaScript specs
    /// applied to TypeScript, 0 for `any`.
    fn affinity(self, language: Language) -> Option<u8> {
        match (self, language) {
            (LanguageSpec::Any, _) => Some(0),
            (LanguageSpec::Python, Language::Python)
            | (LanguageSpec::Javascript, Language::JavaScript)
            | (LanguageSpec::Typescript, Language::TypeScript) => Some(2),
            (LanguageSpec::Javascript, Language::TypeScript) => Some(1),
            _ => None,
        }
    }
}

/// Semantic role of one call parameter, located through
/// [`CryptoApiSpec::param_roles`] or a conventional keyword name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamRole {
    Key,
    Iv,
    Salt,
    Mode,
    Options,
    Iterations,
    Seed,
}

impl ParamRole {
    pub fn keywords(self) -> &'static [&'static str] {
        match self {
            ParamRole::Key => &["key", "password"],
            ParamRole::Iv => &["iv", "nonce"],
            ParamRole::Salt => &["salt"],
            ParamRole::Mode => &["mode"],
            ParamRole::Options => &["options"],
            ParamRole::Iterations => &["iterations", "count", "rounds"],
            ParamRole::Seed => &["seed"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CryptoApiSpec {
    pub pattern: String,
    #[serde(default = "any_language")]
    pub language: LanguageSpec,
    pub role: Role,
    pub semantic_category: SemanticCategory,
    #[serde(default)]
    pub algorithm_param: Option<ArgPosition>,
    #[serde(default)]
    pub weak_algorithms: Vec<String>,
    #[serde(default)]
    pub deprecated: bool,
    #[serde(default)]
    pub param_roles: BTreeMap<ParamRole, ArgPosition>,
}

fn any_language() -> LanguageSpec {
    LanguageSpec::Any
}

impl CryptoApiSpec {
    pub fn is_suffix_pattern(&self) -> bool {
        self.pattern.starts_with("*.")
    }

    /// The argument playing `role` in `unit`: the declared locator first,
    /// then the role's conventional keyword names.
    pub fn param<'u>(&self, unit: &'u IrUnit, role: ParamRole) -> Option<&'u Argument> {
        self.param_roles
            .get(&role)
            .and_then(|pos| locate(unit, pos))
            .or_else(|| role.keywords().iter().find_map(|k| unit.keyword(k)))
    }

    pub fn algorithm<'u>(&self, unit: &'u IrUnit) -> Option<&'u Argument> {
        self.algorithm_param
            .as_ref()
            .and_then(|pos| locate(unit, pos))
            .or_else(|| unit.keyword("algorithm"))
    }
}

fn locate<'u>(unit: &'u IrUnit, pos: &ArgPosition) -> Option<&'u Argument> {
    match pos {
        ArgPosition::Keyword(k) => unit.keyword(k),
        ArgPosition::Index(_) => unit.argument(pos),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceKind {
    Path,
    Url,
    Topic,
    Identifier,
}

/// Constant shapes that identify an external resource beyond paths and
/// URLs, e.g. message topics or storage identifiers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FingerprintPattern {
    pub kind: ResourceKind,
    pub regex: String,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCatalog {
    #[serde(default)]
    notes: Option<String>,
    #[serde(default)]
    specs: Vec<serde_json::Value>,
    #[serde(default)]
    source_markers: Vec<String>,
    #[serde(default)]
    sink_markers: Vec<String>,
    #[serde(default)]
    risky_pairs: Vec<serde_json::Value>,
    #[serde(default)]
    secret_prefixes: Vec<String>,
    #[serde(default)]
    fingerprint_patterns: Vec<FingerprintPattern>,
}

#[derive(Debug, Clone)]
pub struct CryptoApiCatalog {
    pub specs: Vec<CryptoApiSpec>,
    pub source_markers: Vec<String>,
    pub sink_markers: Vec<String>,
    pub risky_pairs: Vec<(SemanticCategory, SemanticCategory)>,
    pub secret_prefixes: Vec<String>,
    pub fingerprint_patterns: Vec<FingerprintPattern>,
    pub notes: Option<String>,
    compiled: Vec<(ResourceKind, Regex)>,
    exact: HashMap<String, Vec<usize>>,
    by_suffix: HashMap<String, Vec<usize>>,
}

impl Default for CryptoApiCatalog {
    fn default() -> Self {
        load_catalog(None).expect("built-in catalog is valid")
    }
}

/// Loads the built-in catalog, extended by the user file when given. A user
/// spec whose pattern equals a default pattern replaces every default with
/// that pattern.
pub fn load_catalog(path: Option<&Path>) -> Result<CryptoApiCatalog, CatalogError> {
    let base = parse_raw(DEFAULT_CATALOG)?;
    let mut specs = parse_specs(&base.specs)?;
    let mut risky = parse_pairs(&base.risky_pairs)?;
    let mut sources = base.source_markers;
    let mut sinks = base.sink_markers;
    let mut prefixes = base.secret_prefixes;
    let mut patterns = base.fingerprint_patterns;
    let mut notes = base.notes;

    if let Some(path) = path {
        let text = std::fs::read_to_string(path).map_err(|source| CatalogError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let user = parse_raw(&text)?;
        let user_specs = parse_specs(&user.specs)?;
        specs.retain(|d| !user_specs.iter().any(|u| u.pattern == d.pattern));
        specs.extend(user_specs);
        risky.extend(parse_pairs(&user.risky_pairs)?);
        sources.extend(user.source_markers);
        sinks.extend(user.sink_markers);
        prefixes.extend(user.secret_prefixes);
        patterns.extend(user.fingerprint_patterns);
        notes = user.notes.or(notes);
    }
    dedup_keep_order(&mut sources);
    dedup_keep_order(&mut sinks);
    dedup_keep_order(&mut prefixes);
    dedup_keep_order(&mut risky);
    for marker in sources.iter().chain(&sinks) {
        check_pattern(marker, None)?;
    }
    build(specs, sources, sinks, risky, prefixes, patterns, notes)
}

/// Builds a catalog from explicit parts, validating patterns and rejecting
/// duplicate `(pattern, language)` specs.
pub fn build(
    specs: Vec<CryptoApiSpec>,
    source_markers: Vec<String>,
    sink_markers: Vec<String>,
    risky_pairs: Vec<(SemanticCategory, SemanticCategory)>,
    secret_prefixes: Vec<String>,
    fingerprint_patterns: Vec<FingerprintPattern>,
    notes: Option<String>,
) -> Result<CryptoApiCatalog, CatalogError> {
    let mut seen = std::collections::BTreeSet::new();
    let mut exact: HashMap<String, Vec<usize>> = HashMap::new();
    let mut by_suffix: HashMap<String, Vec<usize>> = HashMap::new();
    for (i, spec) in specs.iter().enumerate() {
        if !seen.insert((spec.pattern.clone(), spec.language)) {
            return Err(CatalogError::AmbiguousPattern {
                pattern: spec.pattern.clone(),
                language: format!("{:?}", spec.language).to_lowercase(),
            });
        }
        if spec.is_suffix_pattern() {
            by_suffix.entry(last_segment(&spec.pattern).to_string()).or_default().push(i);
        } else {
            exact.entry(spec.pattern.clone()).or_default().push(i);
        }
    }
    let compiled = fingerprint_patterns
        .iter()
        .enumerate()
        .map(|(i, p)| {
            Regex::new(&p.regex)
                .map(|r| (p.kind, r))
                .map_err(|e| CatalogError::MalformedCatalog {
                    index: Some(i),
                    detail: format!("fingerprint pattern: {e}"),
                })
        })
        .collect::<Result<_, _>>()?;
    Ok(CryptoApiCatalog {
        specs,
        source_markers,
        sink_markers,
        risky_pairs,
        secret_prefixes,
        fingerprint_patterns,
        notes,
        compiled,
        exact,
        by_suffix,
    })
}

fn dedup_keep_order<T: PartialEq + Clone>(items: &mut Vec<T>) {
    let mut out: Vec<T> = Vec::with_capacity(items.len());
    for item in items.drain(..) {
        if !out.contains(&item) {
            out.push(item);
        }
    }
    *items = out;
}

fn parse_raw(text: &str) -> Result<RawCatalog, CatalogError> {
    serde_json::from_str(text).map_err(|e| CatalogError::MalformedCatalog {
        index: None,
        detail: e.to_string(),
    })
}

fn parse_specs(values: &[serde_json::Value]) -> Result<Vec<CryptoApiSpec>, CatalogError> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut spec: CryptoApiSpec =
                serde_json::from_value(v.clone()).map_err(|e| CatalogError::MalformedCatalog {
                    index: Some(i),
                    detail: e.to_string(),
                })?;
            spec.pattern = spec.pattern.trim().to_string();
            check_pattern(&spec.pattern, Some(i))?;
            for w in &mut spec.weak_algorithms {
                *w = w.trim().to_lowercase();
            }
            Ok(spec)
        })
        .collect()
}

fn parse_pairs(
    values: &[serde_json::Value],
) -> Result<Vec<(SemanticCategory, SemanticCategory)>, CatalogError> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            serde_json::from_value(v.clone()).map_err(|e| CatalogError::MalformedCatalog {
                index: Some(i),
                detail: format!("risky pair: {e}"),
            })
        })
        .collect()
}

fn check_pattern(pattern: &str, index: Option<usize>) -> Result<(), CatalogError> {
    let body = pattern.strip_prefix("*.").unwrap_or(pattern);
    if body.is_empty() || body.contains('*') || body.split('.').any(str::is_empty) {
        return Err(CatalogError::MalformedCatalog {
            index,
            detail: format!("invalid pattern {pattern:?}"),
        });
    }
    Ok(())
}

fn last_segment(name: &str) -> &str {
    name.rsplit('.').next().unwrap_or(name)
}

/// Match quality of `pattern` against `call_name`: exact matches rank above
/// suffix matches, longer suffixes above shorter ones. Suffix patterns
/// `*.a.b` match `a.b` itself or any name ending in `.a.b`.
pub fn pattern_match(pattern: &str, call_name: &str) -> Option<(bool, usize)> {
    match pattern.strip_prefix("*.") {
        None => (pattern == call_name).then_some((true, pattern.len())),
        Some(suffix) => {
            let hit = call_name == suffix
                || (call_name.len() > suffix.len()
                    && call_name.ends_with(suffix)
                    && call_name.as_bytes()[call_name.len() - suffix.len() - 1] == b'.');
            hit.then_some((false, suffix.len()))
        }
    }
}

/// Language a unit's file was written in, from its extension.
pub fn unit_language(unit: &IrUnit) -> Language {
    detect_language(Path::new(&unit.file), "")
}

impl CryptoApiCatalog {
    pub fn lookup(&self, call_name: &str, language: Language) -> Option<&CryptoApiSpec> {
        let exact = self.exact.get(call_name).into_iter().flatten();
        let suffix = self
            .by_suffix
            .get(last_segment(call_name))
            .into_iter()
            .flatten();
        exact
            .chain(suffix)
            .filter_map(|&i| {
                let spec = &self.specs[i];
                let affinity = spec.language.affinity(language)?;
                let (is_exact, len) = pattern_match(&spec.pattern, call_name)?;
                Some(((is_exact, len, affinity), i))
            })
            .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
            .map(|(_, i)| &self.specs[i])
    }

    pub fn lookup_unit(&self, unit: &IrUnit) -> Option<&CryptoApiSpec> {
        self.lookup(&unit.call_name, unit_language(unit))
    }

    pub fn role(&self, unit: &IrUnit) -> Role {
        self.lookup_unit(unit).map_or(Role::None, |s| s.role)
    }

    pub fn semantic_category(&self, unit: &IrUnit) -> SemanticCategory {
        self.lookup_unit(unit)
            .map_or(SemanticCategory::Other, |s| s.semantic_category)
    }

    pub fn is_risky(&self, from: SemanticCategory, to: SemanticCategory) -> bool {
        self.risky_pairs.contains(&(from, to))
    }

    /// The best-matching source marker for a call name, if any.
    pub fn source_marker(&self, call_name: &str) -> Option<&str> {
        best_marker(&self.source_markers, call_name)
    }

    pub fn is_source_marker(&self, call_name: &str) -> bool {
        self.source_marker(call_name).is_some()
    }

    pub fn is_sink_marker(&self, call_name: &str) -> bool {
        best_marker(&self.sink_markers, call_name).is_some()
    }

    pub fn has_secret_prefix(&self, text: &str) -> bool {
        self.secret_prefixes.iter().any(|p| text.starts_with(p.as_str()))
    }

    /// Kind of the first declared fingerprint pattern matching `text`.
    pub fn resource_kind(&self, text: &str) -> Option<ResourceKind> {
        self.compiled
            .iter()
            .find(|(_, re)| re.is_match(text))
            .map(|(kind, _)| *kind)
    }
}

fn best_marker<'a>(markers: &'a [String], call_name: &str) -> Option<&'a str> {
    markers
        .iter()
        .filter_map(|m| pattern_match(m, call_name).map(|score| (score, m)))
        .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(a.1)))
        .map(|(_, m)| m.as_str())
}
