//! Dependency graph over IR units: must edges from Def–Use matching of
//! produced variables, may edges from shared resources or variables between
//! calls whose semantic categories form a risky pair.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::catalog::{CryptoApiCatalog, ResourceKind, SemanticCategory};
use crate::ir::{ArgTag, IrUnit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Must,
    May,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DepEdge {
    #[serde(rename = "from")]
    pub from_unit: String,
    #[serde(rename = "to")]
    pub to_unit: String,
    pub kind: EdgeKind,
    pub witness: String,
}

/// Which producers Def–Use matching may consider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MustScope {
    File,
    #[default]
    Project,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ResourceFingerprint {
    pub kind: ResourceKind,
    pub canonical: String,
}

/// Must edges: for each variable argument `v` of unit `c`, an edge from
/// every producer `d` of `v`. Within `c`'s file only the nearest preceding
/// producer counts (all same-file producers if none precedes); producers in
/// other files all count unless `scope` is [`MustScope::File`].
pub fn build_must_edges(units: &[IrUnit], scope: MustScope) -> Vec<DepEdge> {
    let mut producers: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, u) in units.iter().enumerate() {
        if let Some(v) = u.produced_as.as_deref() {
            producers.entry(v).or_default().push(i);
        }
    }
    let mut edges = BTreeSet::new();
    for (ci, c) in units.iter().enumerate() {
        let consumed: BTreeSet<&str> = c
            .arguments
            .iter()
            .filter(|a| a.tag == ArgTag::Variable)
            .map(|a| a.value.as_str())
            .collect();
        for v in consumed {
            let Some(defs) = producers.get(v) else {
                continue;
            };
            let candidates = defs.iter().copied().filter(|&d| d != ci);
            let (same, other): (Vec<usize>, Vec<usize>) =
                candidates.partition(|&d| units[d].file == c.file);
            let preceding = same
                .iter()
                .copied()
                .filter(|&d| units[d].source_key() < c.source_key())
                .max_by_key(|&d| units[d].source_key());
            let chosen: Vec<usize> = match preceding {
                Some(d) => vec![d],
                None => same,
            };
            let cross = match scope {
                MustScope::Project => other,
                MustScope::File => Vec::new(),
            };
            for d in chosen.into_iter().chain(cross) {
                edges.insert(DepEdge {
                    from_unit: units[d].unit_id.clone(),
                    to_unit: c.unit_id.clone(),
                    kind: EdgeKind::Must,
                    witness: v.to_string(),
                });
            }
        }
    }
    edges.into_iter().collect()
}

static URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[A-Za-z][A-Za-z0-9+.\-]*://\S+$").expect("valid regex"));
static FILENAME: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^[^\s/\\]+\.([A-Za-z0-9]{1,8})$").expect("valid regex")
});

/// Classifies one constant as a resource reference. URLs are checked before
/// paths, paths before catalog-declared identifier shapes.
pub fn fingerprint_of(value: &str, catalog: &CryptoApiCatalog) -> Option<ResourceFingerprint> {
    let text = value.trim();
    if text.is_empty() {
        return None;
    }
    let lowered = || text.to_lowercase();
    if URL.is_match(text) {
        return Some(ResourceFingerprint {
            kind: ResourceKind::Url,
            canonical: lowered(),
        });
    }
    let dotted_file = FILENAME
        .captures(text)
        .is_some_and(|c| c[1].chars().any(|ch| ch.is_ascii_alphabetic()));
    if text.contains('/') || text.contains('\\') || dotted_file {
        return Some(ResourceFingerprint {
            kind: ResourceKind::Path,
            canonical: lowered(),
        });
    }
    catalog.resource_kind(text).map(|kind| ResourceFingerprint {
        kind,
        canonical: text.to_string(),
    })
}

/// Fingerprint of the first constant argument naming a resource.
pub fn extract_fingerprint(unit: &IrUnit, catalog: &CryptoApiCatalog) -> Option<ResourceFingerprint> {
    unit.arguments
        .iter()
        .filter(|a| a.tag == ArgTag::Constant)
        .find_map(|a| fingerprint_of(&a.value, catalog))
}

/// May edges: `ci ⇝ cj` when `(sem(ci), sem(cj))` is a risky pair and the two
/// units share a fingerprint or a variable name. One edge per witness.
pub fn build_may_edges(units: &[IrUnit], catalog: &CryptoApiCatalog) -> Vec<DepEdge> {
    let categories: Vec<SemanticCategory> =
        units.iter().map(|u| catalog.semantic_category(u)).collect();
    let fingerprints: Vec<Option<ResourceFingerprint>> =
        units.iter().map(|u| extract_fingerprint(u, catalog)).collect();
    let variables: Vec<BTreeSet<&str>> =
        units.iter().map(|u| u.variable_names().collect()).collect();

    let mut by_category: BTreeMap<SemanticCategory, Vec<usize>> = BTreeMap::new();
    for (i, c) in categories.iter().enumerate() {
        by_category.entry(*c).or_default().push(i);
    }

    let mut edges = BTreeSet::new();
    for &(from_cat, to_cat) in &catalog.risky_pairs {
        let (Some(sources), Some(targets)) = (by_category.get(&from_cat), by_category.get(&to_cat))
        else {
            continue;
        };
        let mut by_fp: HashMap<&str, Vec<usize>> = HashMap::new();
        let mut by_var: HashMap<&str, Vec<usize>> = HashMap::new();
        for &j in targets {
            if let Some(fp) = &fingerprints[j] {
                by_fp.entry(fp.canonical.as_str()).or_default().push(j);
            }
            for v in &variables[j] {
                by_var.entry(v).or_default().push(j);
            }
        }
        for &i in sources {
            let mut add = |j: usize, witness: &str| {
                if i != j {
                    edges.insert(DepEdge {
                        from_unit: units[i].unit_id.clone(),
                        to_unit: units[j].unit_id.clone(),
                        kind: EdgeKind::May,
                        witness: witness.to_string(),
                    });
                }
            };
            if let Some(fp) = &fingerprints[i] {
                for &j in by_fp.get(fp.canonical.as_str()).into_iter().flatten() {
                    add(j, &fp.canonical);
                }
            }
            for v in &variables[i] {
                for &j in by_var.get(v).into_iter().flatten() {
                    add(j, v);
                }
            }
        }
    }
    edges.into_iter().collect()
}

/// Directed typed graph with adjacency indexes by unit id.
#[derive(Debug, Clone, Default)]
pub struct DependencyGraph {
    pub nodes: Vec<IrUnit>,
    pub edges: Vec<DepEdge>,
    index: HashMap<String, usize>,
    outgoing: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
}

#[derive(Serialize)]
struct GraphDocument<'a> {
    nodes: Vec<&'a str>,
    edges: &'a [DepEdge],
}

impl DependencyGraph {
    /// Assembles a graph from units and edges; duplicate edges are dropped
    /// and edges with unknown endpoints are rejected by panicking, since
    /// they can only come from a construction bug.
    pub fn new(nodes: Vec<IrUnit>, edges: impl IntoIterator<Item = DepEdge>) -> Self {
        let index: HashMap<String, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, u)| (u.unit_id.clone(), i))
            .collect();
        let edges: Vec<DepEdge> = edges.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let mut outgoing = vec![Vec::new(); nodes.len()];
        let mut incoming = vec![Vec::new(); nodes.len()];
        for (e, edge) in edges.iter().enumerate() {
            let from = index[&edge.from_unit];
            let to = index[&edge.to_unit];
            outgoing[from].push(e);
            incoming[to].push(e);
        }
        DependencyGraph {
            nodes,
            edges,
            index,
            outgoing,
            incoming,
        }
    }

    pub fn position(&self, unit_id: &str) -> Option<usize> {
        self.index.get(unit_id).copied()
    }

    pub fn node(&self, unit_id: &str) -> Option<&IrUnit> {
        self.position(unit_id).map(|i| &self.nodes[i])
    }

    pub fn outgoing(&self, unit_id: &str) -> impl Iterator<Item = &DepEdge> {
        self.position(unit_id)
            .into_iter()
            .flat_map(|i| self.outgoing[i].iter().map(|&e| &self.edges[e]))
    }

    pub fn incoming(&self, unit_id: &str) -> impl Iterator<Item = &DepEdge> {
        self.position(unit_id)
            .into_iter()
            .flat_map(|i| self.incoming[i].iter().map(|&e| &self.edges[e]))
    }

    pub fn must_edges(&self) -> impl Iterator<Item = &DepEdge> {
        self.edges.iter().filter(|e| e.kind == EdgeKind::Must)
    }

    pub fn may_edges(&self) -> impl Iterator<Item = &DepEdge> {
        self.edges.iter().filter(|e| e.kind == EdgeKind::May)
    }

    /// `{"nodes": [unit_id...], "edges": [...]}` with nodes in unit order.
    pub fn to_json(&self) -> String {
        let doc = GraphDocument {
            nodes: self.nodes.iter().map(|u| u.unit_id.as_str()).collect(),
            edges: &self.edges,
        };
        serde_json::to_string_pretty(&doc).expect("graph always serializes")
    }
}

pub fn build_graph(units: Vec<IrUnit>, catalog: &CryptoApiCatalog, scope: MustScope) -> DependencyGraph {
    let mut edges = build_must_edges(&units, scope);
    edges.extend(build_may_edges(&units, catalog));
    DependencyGraph::new(units, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::SourceFile;
    use crate::ir::lower_source;

    fn lower(files: &[(&str, &str)]) -> Vec<IrUnit> {
        files
            .iter()
            .flat_map(|(p, s)| lower_source(&SourceFile::from_text(p, s)).unwrap().units)
            .collect()
    }

    fn cat() -> CryptoApiCatalog {
        CryptoApiCatalog::default()
    }

    fn pairs(edges: &[DepEdge], units: &[IrUnit]) -> Vec<(String, String, String)> {
        let name = |id: &str| units.iter().find(|u| u.unit_id == id).unwrap().call_name.clone();
        edges
            .iter()
            .map(|e| (name(&e.from_unit), name(&e.to_unit), e.witness.clone()))
            .collect()
    }

    #[test]
    fn salt_flows_into_kdf() {
        let units = lower(&[(
            "k.py",
            "salt = get_random_bytes(16)\nkey = PBKDF2(password, salt, dkLen=32, count=200000)\n",
        )]);
        let edges = build_must_edges(&units, MustScope::Project);
        assert_eq!(
            pairs(&edges, &units),
            [("get_random_bytes".into(), "PBKDF2".into(), "salt".into())]
        );
    }

    #[test]
    fn no_variables_no_edges() {
        let units = lower(&[("a.py", "f(1)\ng('x')\n")]);
        assert!(build_must_edges(&units, MustScope::Project).is_empty());
    }

    #[test]
    fn linear_chain() {
        let units = lower(&[("a.py", "x = f()\ny = g(x)\nh(y)\n")]);
        let got = pairs(&build_must_edges(&units, MustScope::Project), &units);
        assert_eq!(
            got,
            [
                ("f".into(), "g".into(), "x".into()),
                ("g".into(), "h".into(), "y".into())
            ]
        );
    }

    #[test]
    fn nearest_preceding_definition_wins_within_file() {
        let units = lower(&[
            ("a.py", "k = f()\nk = g()\nuse(k)\nk = late()\n"),
            ("b.py", "k = other()\n"),
        ]);
        let mut got: Vec<_> = pairs(&build_must_edges(&units, MustScope::Project), &units)
            .into_iter()
            .map(|(f, _, _)| f)
            .collect();
        got.sort();
        assert_eq!(got, ["g", "other"]);
        let file_only: Vec<_> = pairs(&build_must_edges(&units, MustScope::File), &units)
            .into_iter()
            .map(|(f, _, _)| f)
            .collect();
        assert_eq!(file_only, ["g"]);
    }

    #[test]
    fn later_definitions_used_when_none_precede() {
        let units = lower(&[("a.py", "def enc():\n    AES.new(key)\nkey = a()\nkey = b()\n")]);
        let mut got: Vec<_> = pairs(&build_must_edges(&units, MustScope::Project), &units)
            .into_iter()
            .map(|(f, _, _)| f)
            .collect();
        got.sort();
        assert_eq!(got, ["a", "b"]);
    }

    #[test]
    fn fingerprints() {
        let c = cat();
        let fp = |s: &str| fingerprint_of(s, &c);
        assert_eq!(
            fp("user.db"),
            Some(ResourceFingerprint { kind: ResourceKind::Path, canonical: "user.db".into() })
        );
        assert_eq!(fp("User.DB ").unwrap().canonical, "user.db");
        assert_eq!(fp("HTTPS://Example.com/x").unwrap().kind, ResourceKind::Url);
        assert_eq!(fp("/tmp/out").unwrap().kind, ResourceKind::Path);
        assert_eq!(fp("topic:orders").unwrap().kind, ResourceKind::Topic);
        assert_eq!(fp("16"), None);
        assert_eq!(fp("127.0.0.1"), None);
        assert_eq!(fp("gemini-2.0-flash-001"), None);
        let units = lower(&[("a.py", "f(1, 2.5)\nupload('user.db')\n")]);
        assert_eq!(extract_fingerprint(&units[0], &c), None);
        assert_eq!(extract_fingerprint(&units[1], &c).unwrap().canonical, "user.db");
    }

    #[test]
    fn may_edge_on_shared_fingerprint() {
        let units = lower(&[(
            "a.py",
            "def a():\n    encrypt(data, 'user.db')\ndef b():\n    upload('user.db')\n",
        )]);
        let got = pairs(&build_may_edges(&units, &cat()), &units);
        assert_eq!(got, [("encrypt".into(), "upload".into(), "user.db".into())]);
    }

    #[test]
    fn may_edge_on_shared_variable() {
        let units = lower(&[("a.py", "key = get_key(password)\nencrypt_cbc(key, data)\n")]);
        let got = pairs(&build_may_edges(&units, &cat()), &units);
        assert_eq!(got, [("get_key".into(), "encrypt_cbc".into(), "key".into())]);
    }

    #[test]
    fn risky_pair_gate() {
        let units = lower(&[("a.py", "helper('user.db')\nupload('user.db')\nprint(x)\nsave(x)\n")]);
        assert!(build_may_edges(&units, &cat()).is_empty());
    }

    #[test]
    fn graph_indexes_and_dedup() {
        let units = lower(&[("a.py", "key = get_key(password)\nencrypt_cbc(key, data)\n")]);
        let g = build_graph(units, &cat(), MustScope::Project);
        assert_eq!(g.must_edges().count(), 1);
        assert_eq!(g.may_edges().count(), 1);
        let first = g.nodes[0].unit_id.clone();
        assert_eq!(g.outgoing(&first).count(), 2);
        assert_eq!(g.incoming(&g.nodes[1].unit_id.clone()).count(), 2);
        let doubled = DependencyGraph::new(g.nodes.clone(), g.edges.iter().chain(&g.edges).cloned());
        assert_eq!(doubled.edges.len(), 2);
        let json: serde_json::Value = serde_json::from_str(&g.to_json()).unwrap();
        assert_eq!(json["edges"][0]["kind"], "must");
        assert_eq!(json["nodes"].as_array().unwrap().len(), 2);
        assert!(build_graph(vec![], &cat(), MustScope::Project).edges.is_empty());
    }
}
