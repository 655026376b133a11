//! Shared generators and brute-force oracles for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fmt::Write as _;

use cryptolint::catalog::CryptoApiCatalog;
use cryptolint::dependency::{extract_fingerprint, DepEdge, DependencyGraph, EdgeKind, MustScope};
use cryptolint::ingest::ProjectMetadata;
use cryptolint::ir::{ArgPosition, ArgTag, Argument, IrUnit, ParentContext};
use cryptolint::report::{ProjectReport, StageTiming};
use cryptolint::rules::{Confidence, Finding, RuleId, Severity};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Callees spanning every semantic category of the default catalog, plus a
/// few unknown helpers.
pub const CALLEES: &[&str] = &[
    "Crypto.Cipher.AES.new",
    "hmac.new",
    "hashlib.md5",
    "hashlib.sha256",
    "Crypto.Protocol.KDF.PBKDF2",
    "Crypto.Random.get_random_bytes",
    "random.random",
    "os.getenv",
    "requests.post",
    "s3.upload",
    "f.write",
    "json.dump",
    "print",
    "helper",
    "cache.mask",
    "keys.derive_key",
];

pub const VARIABLES: &[&str] = &["a", "b", "data", "key", "salt", "token", "path"];

pub const CONSTANTS: &[&str] = &[
    "'/tmp/out.bin'",
    "'https://api.example.com/upload'",
    "'config.json'",
    "'hello'",
    "42",
    "'sha256'",
];

fn argument<R: Rng>(rng: &mut R, position: ArgPosition) -> Argument {
    let (tag, value, element_tags) = match rng.gen_range(0..6) {
        0 | 1 => (ArgTag::Variable, VARIABLES.choose(rng).unwrap().to_string(), None),
        2 => (ArgTag::Constant, CONSTANTS.choose(rng).unwrap().to_string(), None),
        3 => (ArgTag::FunctionReturn, CALLEES.choose(rng).unwrap().to_string(), None),
        4 => {
            let mut names: Vec<&str> = VARIABLES.choose_multiple(rng, 2).copied().collect();
            names.sort();
            (ArgTag::Variable, format!("expr:binary_operator[{}]", names.join(",")), None)
        }
        _ => (ArgTag::ListLiteral, "[1,2]".to_string(), Some(vec![ArgTag::Constant, ArgTag::Constant])),
    };
    Argument {
        position,
        tag,
        value,
        element_tags,
    }
}

/// A random project of `1..=max_units` units spread over up to three files.
pub fn synthetic_units<R: Rng>(rng: &mut R, max_units: usize) -> Vec<IrUnit> {
    let files = ["app.py", "util.py", "net.py"];
    let n = rng.gen_range(1..=max_units);
    let mut ordinals = [0usize; 3];
    (0..n)
        .map(|_| {
            let f = rng.gen_range(0..files.len());
            let ordinal = ordinals[f];
            ordinals[f] += 1;
            let mut arguments: Vec<Argument> =
                (0..rng.gen_range(0..=3)).map(|i| argument(rng, ArgPosition::Index(i))).collect();
            if rng.gen_bool(0.2) {
                arguments.push(argument(rng, ArgPosition::Keyword("key".into())));
            }
            let produced_as = rng.gen_bool(0.6).then(|| VARIABLES.choose(rng).unwrap().to_string());
            IrUnit {
                unit_id: format!("{}#{ordinal}", files[f]),
                call_name: CALLEES.choose(rng).unwrap().to_string(),
                file: files[f].to_string(),
                line: rng.gen_range(1..=12),
                column: rng.gen_range(0..3),
                scope: if rng.gen_bool(0.5) { "<module>".into() } else { "work".into() },
                parent_context: if produced_as.is_some() {
                    ParentContext::AssignmentRhs
                } else {
                    ParentContext::ExpressionStatement
                },
                produced_as,
                arguments,
            }
        })
        .collect()
}

/// Dependency edges by exhaustive search: a nested loop over (consumer, argument,
/// producer) for must edges and over ordered unit pairs for may edges.
pub fn oracle_edges(units: &[IrUnit], catalog: &CryptoApiCatalog, scope: MustScope) -> BTreeSet<DepEdge> {
    let mut edges = BTreeSet::new();
    let position = |u: &IrUnit| (u.line, u.column, ordinal(&u.unit_id));

    for c in units {
        for a in &c.arguments {
            if a.tag != ArgTag::Variable {
                continue;
            }
            for d in units {
                if d.unit_id == c.unit_id || d.produced_as.as_deref() != Some(a.value.as_str()) {
                    continue;
                }
                let keep = if d.file == c.file {
                    let same_file_defs = units.iter().filter(|x| {
                        x.unit_id != c.unit_id && x.file == c.file && x.produced_as.as_deref() == Some(a.value.as_str())
                    });
                    let preceding: Vec<&IrUnit> = same_file_defs.filter(|x| position(x) < position(c)).collect();
                    if preceding.is_empty() {
                        true
                    } else {
                        preceding.iter().all(|x| position(x) <= position(d)) && position(d) < position(c)
                    }
                } else {
                    scope == MustScope::Project
                };
                if keep {
                    edges.insert(DepEdge {
                        from_unit: d.unit_id.clone(),
                        to_unit: c.unit_id.clone(),
                        kind: EdgeKind::Must,
                        witness: a.value.clone(),
                    });
                }
            }
        }
    }

    for ci in units {
        for cj in units {
            if ci.unit_id == cj.unit_id {
                continue;
            }
            let pair = (catalog.semantic_category(ci), catalog.semantic_category(cj));
            if !catalog.risky_pairs.contains(&pair) {
                continue;
            }
            let mut witnesses = Vec::new();
            if let (Some(fi), Some(fj)) = (extract_fingerprint(ci, catalog), extract_fingerprint(cj, catalog)) {
                if fi == fj {
                    witnesses.push(fi.canonical);
                }
            }
            for v in plain_variables(ci) {
                if plain_variables(cj).contains(&v) {
                    witnesses.push(v);
                }
            }
            for w in witnesses {
                edges.insert(DepEdge {
                    from_unit: ci.unit_id.clone(),
                    to_unit: cj.unit_id.clone(),
                    kind: EdgeKind::May,
                    witness: w,
                });
            }
        }
    }
    edges
}

/// Variable arguments that are plain names, plus the produced variable.
fn plain_variables(u: &IrUnit) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = u
        .arguments
        .iter()
        .filter(|a| a.tag == ArgTag::Variable && !a.value.starts_with("expr:"))
        .map(|a| a.value.clone())
        .collect();
    out.extend(u.produced_as.clone());
    out
}

fn ordinal(unit_id: &str) -> usize {
    unit_id.rsplit('#').next().and_then(|n| n.parse().ok()).unwrap_or(0)
}

/// Transitive closure by Floyd–Warshall over the explicit edge list.
pub fn reachability(graph: &DependencyGraph) -> Vec<Vec<bool>> {
    let n = graph.nodes.len();
    let id = |s: &str| graph.nodes.iter().position(|u| u.unit_id == s).unwrap();
    let mut reach = vec![vec![false; n]; n];
    for e in &graph.edges {
        reach[id(&e.from_unit)][id(&e.to_unit)] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                let via = reach[k].clone();
                for (j, r) in via.into_iter().enumerate() {
                    reach[i][j] |= r;
                }
            }
        }
    }
    reach
}

/// All-pairs hop distances by Floyd–Warshall; `usize::MAX` when unreachable.
pub fn distances(graph: &DependencyGraph) -> Vec<Vec<usize>> {
    let n = graph.nodes.len();
    let id = |s: &str| graph.nodes.iter().position(|u| u.unit_id == s).unwrap();
    let mut dist = vec![vec![usize::MAX; n]; n];
    for (i, row) in dist.iter_mut().enumerate() {
        row[i] = 0;
    }
    for e in &graph.edges {
        let (a, b) = (id(&e.from_unit), id(&e.to_unit));
        dist[a][b] = dist[a][b].min(1);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if dist[i][k] != usize::MAX && dist[k][j] != usize::MAX {
                    dist[i][j] = dist[i][j].min(dist[i][k] + dist[k][j]);
                }
            }
        }
    }
    dist
}

/// Expected (source, sink) pairs: the sink is reachable in one or more
/// steps, or the source is itself a sink.
pub fn oracle_pairs(
    graph: &DependencyGraph,
    sources: &BTreeSet<String>,
    sinks: &BTreeSet<String>,
) -> BTreeSet<(String, String)> {
    let reach = reachability(graph);
    let mut pairs = BTreeSet::new();
    for (i, s) in graph.nodes.iter().enumerate() {
        for (j, t) in graph.nodes.iter().enumerate() {
            if sources.contains(&s.unit_id) && sinks.contains(&t.unit_id) && (i == j || reach[i][j]) {
                pairs.insert((s.unit_id.clone(), t.unit_id.clone()));
            }
        }
    }
    pairs
}

/// Random subset of node ids, each kept with probability `p`.
pub fn random_subset<R: Rng>(rng: &mut R, graph: &DependencyGraph, p: f64) -> BTreeSet<String> {
    graph
        .nodes
        .iter()
        .filter(|_| rng.gen_bool(p))
        .map(|u| u.unit_id.clone())
        .collect()
}

/// A small Python module mixing crypto calls, helpers and I/O.
pub fn synthetic_python<R: Rng>(rng: &mut R, functions: usize) -> String {
    let mut src = String::from("import hashlib\nimport hmac\nimport os\nimport requests\nfrom Crypto.Cipher import AES\n\n");
    for f in 0..functions {
        let _ = writeln!(src, "def handler_{f}(data, token):");
        for s in 0..rng.gen_range(3..8) {
            let line = match rng.gen_range(0..7) {
                0 => format!("    digest_{s} = hashlib.sha256(data).hexdigest()"),
                1 => format!("    key_{s} = os.getenv('KEY_{f}_{s}')"),
                2 => format!("    cipher_{s} = AES.new(token, AES.MODE_GCM)"),
                3 => format!("    resp_{s} = requests.post('https://api.example.com/{f}', json={{'d': data}})"),
                4 => format!("    mac_{s} = hmac.new(token, data, 'sha256').digest()"),
                5 => format!("    items_{s} = [str(x) for x in range({s})]"),
                _ => format!("    print(len(data), {s})"),
            };
            src.push_str(&line);
            src.push('\n');
        }
        src.push_str("    return data\n\n");
    }
    src
}

fn finding(rule: RuleId, severity: Severity) -> Finding {
    Finding {
        rule_id: rule,
        severity,
        confidence: Confidence::Definite,
        project_id: String::new(),
        file: "x.py".into(),
        line: 1,
        message: rule.title().into(),
        evidence: None,
        resolved_origins: Vec::new(),
    }
}

/// Report with the given flags and misuse rules; metadata drawn from small
/// label pools, sometimes absent.
pub fn synthetic_report<R: Rng>(rng: &mut R, id: usize) -> ProjectReport {
    let pick = |rng: &mut R, pool: &[&str]| -> Option<String> {
        rng.gen_bool(0.8).then(|| pool.choose(rng).unwrap().to_string())
    };
    let crypto = rng.gen_bool(0.5);
    let rules: Vec<RuleId> = if crypto {
        RuleId::ALL.iter().copied().filter(|_| rng.gen_bool(0.2)).collect()
    } else {
        Vec::new()
    };
    let metadata = ProjectMetadata {
        market: pick(rng, &["npm", "pypi", "smithery"]),
        category: pick(rng, &["Developer Tools", "Finance", "Search"]),
        declared_language: pick(rng, &["Python", "TypeScript"]),
    };
    let mut findings: Vec<Finding> = rules.iter().map(|&r| finding(r, Severity::Misuse)).collect();
    if crypto && rng.gen_bool(0.3) {
        findings.push(finding(RuleId::R3, Severity::Informational));
    }
    ProjectReport {
        project_id: format!("p{id:04}"),
        metadata,
        file_count: 1,
        ir_unit_count: 1,
        language: "Python".into(),
        language_tie: false,
        crypto_enabled: crypto,
        misuse: !rules.is_empty(),
        findings,
        partial_files: Vec::new(),
        duration_ms: 0,
        timing: StageTiming::default(),
    }
}
