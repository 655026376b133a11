use std::cell::RefCell;
use std::collections::BTreeMap;

use tree_sitter::{Node, Parser, Tree};

use super::lower::{dialect_for, Dialect};
use super::{IrError, ValueBinding};
use crate::ingest::{Language, SourceFile};

pub const MODULE_SCOPE: &str = "<module>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BindingKind {
    Assignment,
    Parameter,
    Import,
    LoopTarget,
    WithTarget,
    FunctionDef,
    ClassDef,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    pub line: usize,
    pub kind: BindingKind,
}

/// Per-file scope-aware bindings plus single-file import aliases.
///
/// Scopes are identified by their `::`-joined function chain, with
/// `<module>` for top level.
#[derive(Debug, Clone, Default)]
pub struct SymbolTable {
    scopes: BTreeMap<String, BTreeMap<String, Vec<Binding>>>,
    imports: BTreeMap<String, String>,
}

impl SymbolTable {
    pub(crate) fn bind(&mut self, scope: &str, name: &str, line: usize, kind: BindingKind) {
        let sites = self
            .scopes
            .entry(scope.to_string())
            .or_default()
            .entry(name.to_string())
            .or_default();
        sites.push(Binding { line, kind });
        sites.sort_by_key(|b| b.line);
    }

    pub(crate) fn alias(&mut self, local: &str, qualified: &str) {
        self.imports.insert(local.to_string(), qualified.to_string());
    }

    /// Qualified name an imported local name refers to.
    pub fn import_target(&self, local: &str) -> Option<&str> {
        self.imports.get(local).map(String::as_str)
    }

    pub fn imports(&self) -> &BTreeMap<String, String> {
        &self.imports
    }

    /// Most recent binding of `name` at or before `line`, searching `scope`
    /// and then its enclosing scopes out to module level.
    pub fn binding_at(&self, scope: &str, name: &str, line: usize) -> Option<&Binding> {
        let mut current = Some(scope);
        while let Some(s) = current {
            if let Some(found) = self
                .scopes
                .get(s)
                .and_then(|names| names.get(name))
                .and_then(|sites| sites.iter().rev().find(|b| b.line <= line))
            {
                return Some(found);
            }
            current = enclosing_scope(s);
        }
        None
    }

    /// Every `(scope, name)` pair with at least one binding.
    pub fn names(&self) -> impl Iterator<Item = (&str, &str)> {
        self.scopes
            .iter()
            .flat_map(|(s, names)| names.keys().map(move |n| (s.as_str(), n.as_str())))
    }
}

fn enclosing_scope(scope: &str) -> Option<&str> {
    if scope == MODULE_SCOPE {
        None
    } else {
        Some(scope.rsplit_once("::").map_or(MODULE_SCOPE, |(outer, _)| outer))
    }
}

/// A parsed file: the concrete syntax tree (whose nodes expose their
/// parents), the source text, and the symbol table built over it.
pub struct AstHandle {
    pub(crate) tree: Tree,
    pub(crate) source: String,
    pub(crate) rel_path: String,
    pub(crate) language: Language,
    pub(crate) symbols: SymbolTable,
    pub(crate) values: Vec<ValueBinding>,
}

impl std::fmt::Debug for AstHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AstHandle")
            .field("file", &self.rel_path)
            .field("language", &self.language)
            .field("partial", &self.is_partial())
            .finish()
    }
}

impl AstHandle {
    pub fn root(&self) -> Node<'_> {
        self.tree.root_node()
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn language(&self) -> Language {
        self.language
    }

    pub fn symbols(&self) -> &SymbolTable {
        &self.symbols
    }

    /// True when the parser had to recover from syntax errors.
    pub fn is_partial(&self) -> bool {
        self.tree.root_node().has_error()
    }

    /// Positions (1-based line, 0-based column) of error and missing nodes.
    pub fn error_sites(&self) -> Vec<(usize, usize)> {
        self.nodes()
            .into_iter()
            .filter(|n| n.is_error() || n.is_missing())
            .map(|n| (n.start_position().row + 1, n.start_position().column))
            .collect()
    }

    /// All nodes in pre-order, named and anonymous.
    pub fn nodes(&self) -> Vec<Node<'_>> {
        let mut out = Vec::new();
        let mut cursor = self.tree.walk();
        loop {
            out.push(cursor.node());
            if cursor.goto_first_child() {
                continue;
            }
            loop {
                if cursor.goto_next_sibling() {
                    break;
                }
                if !cursor.goto_parent() {
                    return out;
                }
            }
        }
    }

    /// Enclosing function/class chain of a node, `<module>` at top level.
    pub fn scope_of(&self, node: Node<'_>) -> String {
        scope_of(dialect_for(self.language), node, &self.source)
    }

    pub fn text<'a>(&'a self, node: Node<'_>) -> &'a str {
        node.utf8_text(self.source.as_bytes()).unwrap_or("")
    }
}

pub(crate) fn scope_of(dialect: &dyn Dialect, node: Node<'_>, src: &str) -> String {
    let mut labels = Vec::new();
    let mut current = node.parent();
    while let Some(n) = current {
        if let Some(label) = dialect.scope_label(n, src) {
            labels.push(label);
        }
        current = n.parent();
    }
    if labels.is_empty() {
        MODULE_SCOPE.to_string()
    } else {
        labels.reverse();
        labels.join("::")
    }
}

thread_local! {
    static PARSERS: RefCell<BTreeMap<&'static str, Parser>> = const { RefCell::new(BTreeMap::new()) };
}

fn grammar(language: Language, path: &str) -> Option<(&'static str, tree_sitter::Language)> {
    match language {
        Language::Python => Some(("python", tree_sitter_python::LANGUAGE.into())),
        Language::JavaScript => Some(("javascript", tree_sitter_javascript::LANGUAGE.into())),
        Language::TypeScript if path.ends_with(".tsx") => {
            Some(("tsx", tree_sitter_typescript::LANGUAGE_TSX.into()))
        }
        Language::TypeScript => Some((
            "typescript",
            tree_sitter_typescript::LANGUAGE_TYPESCRIPT.into(),
        )),
        Language::Unknown => None,
    }
}

/// Parses a source file. Syntax errors never fail the parse: the tree holds
/// error nodes and [`AstHandle::is_partial`] reports it.
pub fn parse_to_ast(file: &SourceFile) -> Result<AstHandle, IrError> {
    let (key, grammar) = grammar(file.language, &file.rel_path)
        .ok_or_else(|| IrError::UnsupportedLanguage(file.rel_path.clone()))?;
    let tree = PARSERS.with(|cell| {
        let mut parsers = cell.borrow_mut();
        let parser = parsers.entry(key).or_insert_with(|| {
            let mut p = Parser::new();
            p.set_language(&grammar).expect("bundled grammar is ABI compatible");
            p
        });
        parser.parse(&file.content, None)
    });
    let tree = tree.ok_or_else(|| IrError::FatalParseError(file.rel_path.clone()))?;

    let mut handle = AstHandle {
        tree,
        source: file.content.clone(),
        rel_path: file.rel_path.clone(),
        language: file.language,
        symbols: SymbolTable::default(),
        values: Vec::new(),
    };
    let dialect = dialect_for(file.language);
    let mut symbols = SymbolTable::default();
    let mut values = Vec::new();
    dialect.collect_bindings(&handle, &mut symbols, &mut values);
    handle.symbols = symbols;
    handle.values = values;
    Ok(handle)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn py(src: &str) -> AstHandle {
        parse_to_ast(&SourceFile::from_text("t.py", src)).unwrap()
    }

    #[test]
    fn minimal_program_has_parent_links() {
        let ast = py("x = 1");
        let assign = ast.nodes().into_iter().find(|n| n.kind() == "assignment").unwrap();
        let lit = assign.child_by_field_name("right").unwrap();
        assert_eq!(lit.kind(), "integer");
        assert_eq!(lit.parent().unwrap().id(), assign.id());
        assert!(ast.root().parent().is_none());
        assert!(!ast.is_partial());
    }

    #[test]
    fn every_node_points_back_to_parent() {
        let ast = py("def f(a):\n    return g(a, [1, 2], {'k': h(3)})\n");
        for node in ast.nodes() {
            if let Some(parent) = node.parent() {
                let mut cursor = parent.walk();
                assert!(parent.children(&mut cursor).any(|c| c.id() == node.id()));
            }
        }
    }

    #[test]
    fn call_parent_is_assignment() {
        let ast = py("salt = get_random_bytes(16)");
        let call = ast.nodes().into_iter().find(|n| n.kind() == "call").unwrap();
        assert_eq!(call.parent().unwrap().kind(), "assignment");
    }

    #[test]
    fn malformed_file_degrades() {
        let ast = py("def f(:\n  x = g(1)\n");
        assert!(ast.is_partial());
        assert!(!ast.error_sites().is_empty());
        assert!(ast.nodes().iter().any(|n| n.kind() == "call"));
    }

    #[test]
    fn unsupported_language() {
        let err = parse_to_ast(&SourceFile::from_text("Makefile", "all:")).unwrap_err();
        assert!(matches!(err, IrError::UnsupportedLanguage(_)));
    }

    #[test]
    fn symbol_table_scope_chain() {
        let ast = py("key = 1\ndef f(p):\n    x = 2\n    def g():\n        return x\n    key = 3\n");
        let s = ast.symbols();
        assert_eq!(s.binding_at("f::g", "x", 5).unwrap().line, 3);
        assert_eq!(s.binding_at("f", "p", 2).unwrap().kind, BindingKind::Parameter);
        assert_eq!(s.binding_at("f", "key", 5).unwrap().line, 1);
        assert_eq!(s.binding_at("f", "key", 6).unwrap().line, 6);
        assert!(s.binding_at("<module>", "x", 10).is_none());
    }

    #[test]
    fn python_import_aliases() {
        let ast = py("import hashlib as hl\nfrom Crypto.Cipher import AES\nfrom . import local\n");
        let s = ast.symbols();
        assert_eq!(s.import_target("hl"), Some("hashlib"));
        assert_eq!(s.import_target("AES"), Some("Crypto.Cipher.AES"));
        assert_eq!(s.import_target("local"), None);
    }

    #[test]
    fn javascript_import_aliases() {
        let src = "const { createHash, randomBytes: rb } = require('node:crypto');\n\
                   import CryptoJS from 'crypto-js';\nimport * as c from 'crypto';\n\
                   import { pbkdf2Sync as kdf } from 'crypto';\n";
        let ast = parse_to_ast(&SourceFile::from_text("a.js", src)).unwrap();
        let s = ast.symbols();
        assert_eq!(s.import_target("createHash"), Some("crypto.createHash"));
        assert_eq!(s.import_target("rb"), Some("crypto.randomBytes"));
        assert_eq!(s.import_target("CryptoJS"), None);
        assert_eq!(s.import_target("c"), Some("crypto"));
        assert_eq!(s.import_target("kdf"), Some("crypto.pbkdf2Sync"));
    }
}
