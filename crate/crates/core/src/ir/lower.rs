//! Generic call-site lowering over any tree-sitter grammar. Language
//! specifics (node kinds, field names, literal syntax) come from a
//! [`Dialect`].

use tree_sitter::Node;

use super::ast::{scope_of, AstHandle, SymbolTable};
use super::javascript::JavaScript;
use super::python::Python;
use super::{
    ArgPosition, ArgTag, Argument, IrUnit, ParentContext, ValueBinding, EXPR_DIGEST_PREFIX,
};
use crate::ingest::{Language, SourceFile};

/// Structural view of an expression used for name rendering.
pub(crate) enum Shape<'t> {
    Ident,
    Member { object: Node<'t>, property: String },
    Call,
    Subscript { value: Node<'t> },
    This,
    Other,
}

pub(crate) trait Dialect: Sync {
    fn call_kinds(&self) -> &'static [&'static str];
    fn callee<'t>(&self, call: Node<'t>) -> Option<Node<'t>>;
    fn arguments<'t>(&self, call: Node<'t>, src: &str) -> Vec<(ArgPosition, Node<'t>)>;
    fn scope_label(&self, node: Node<'_>, src: &str) -> Option<String>;
    /// Wrappers looked through when classifying (parentheses, await, casts).
    fn transparent(&self, kind: &str) -> bool;
    fn shape<'t>(&self, node: Node<'t>, src: &str) -> Shape<'t>;
    fn constant_text(&self, node: Node<'_>, src: &str) -> Option<String>;
    fn is_list(&self, kind: &str) -> bool;
    fn is_dict(&self, kind: &str) -> bool;
    fn list_elements<'t>(&self, node: Node<'t>) -> Vec<Node<'t>>;
    fn dict_entries<'t>(&self, node: Node<'t>, src: &str) -> Vec<(String, Node<'t>)>;
    /// Context of a call given its first non-transparent ancestor, plus the
    /// simple-name target for assignments.
    fn parent_context(
        &self,
        call: Node<'_>,
        parent: Node<'_>,
        src: &str,
    ) -> (ParentContext, Option<String>);
    /// Nodes that are names but not expressions (keyword names, object keys);
    /// skipped when collecting identifiers for a digest.
    fn is_label_field(&self, parent: Node<'_>, child: Node<'_>) -> bool;
    fn collect_bindings(
        &self,
        ast: &AstHandle,
        symbols: &mut SymbolTable,
        values: &mut Vec<ValueBinding>,
    );
}

static PYTHON: Python = Python;
static JAVASCRIPT: JavaScript = JavaScript;

pub(crate) fn dialect_for(language: Language) -> &'static dyn Dialect {
    match language {
        Language::Python => &PYTHON,
        Language::JavaScript | Language::TypeScript | Language::Unknown => &JAVASCRIPT,
    }
}

/// Lowering output for one file.
#[derive(Debug, Clone, Default)]
pub struct FileIr {
    pub units: Vec<IrUnit>,
    pub values: Vec<ValueBinding>,
    pub partial: bool,
}

pub(crate) struct Ctx<'a> {
    pub dialect: &'static dyn Dialect,
    pub src: &'a str,
    pub symbols: &'a SymbolTable,
}

impl<'a> Ctx<'a> {
    pub(crate) fn new(ast: &'a AstHandle) -> Self {
        Ctx {
            dialect: dialect_for(ast.language),
            src: &ast.source,
            symbols: &ast.symbols,
        }
    }

    pub(crate) fn text(&self, node: Node<'_>) -> &'a str {
        node.utf8_text(self.src.as_bytes()).unwrap_or("")
    }

    pub(crate) fn unwrap<'t>(&self, mut node: Node<'t>) -> Node<'t> {
        while self.dialect.transparent(node.kind()) {
            match first_named(node) {
                Some(inner) => node = inner,
                None => break,
            }
        }
        node
    }

    fn is_call(&self, node: Node<'_>) -> bool {
        self.dialect.call_kinds().contains(&node.kind())
    }

    /// Dotted path for a pure name chain (`a`, `a.b.c`, `this.x`); `None` when
    /// the chain contains a call or subscript.
    pub(crate) fn name_chain(&self, node: Node<'_>) -> Option<String> {
        let node = self.unwrap(node);
        match self.dialect.shape(node, self.src) {
            Shape::Ident => Some(self.text(node).to_string()),
            Shape::This => Some("this".to_string()),
            Shape::Member { object, property } => {
                Some(format!("{}.{}", self.name_chain(object)?, property))
            }
            _ => None,
        }
    }

    /// Textual callee path: import aliases applied to the root name, `()`
    /// marking intermediate calls of a chain, `[]` intermediate subscripts.
    pub(crate) fn callee_name(&self, node: Node<'_>) -> String {
        let node = self.unwrap(node);
        match self.dialect.shape(node, self.src) {
            Shape::Ident => {
                let name = self.text(node);
                self.symbols.import_target(name).unwrap_or(name).to_string()
            }
            Shape::This => "this".to_string(),
            Shape::Member { object, property } => {
                format!("{}.{}", self.callee_name(object), property)
            }
            Shape::Call => match self.dialect.callee(node) {
                Some(inner) => format!("{}()", self.callee_name(inner)),
                None => collapse(self.text(node)),
            },
            Shape::Subscript { value } => format!("{}[]", self.callee_name(value)),
            Shape::Other => collapse(self.text(node)),
        }
    }

    fn call_name(&self, call: Node<'_>) -> String {
        match self.dialect.callee(call) {
            Some(callee) => self.callee_name(callee),
            None => collapse(self.text(call)),
        }
    }
}

pub(crate) fn first_named(node: Node<'_>) -> Option<Node<'_>> {
    let mut cursor = node.walk();
    let found = node
        .named_children(&mut cursor)
        .find(|c| c.kind() != "comment");
    found
}

pub(crate) fn named_children(node: Node<'_>) -> Vec<Node<'_>> {
    let mut cursor = node.walk();
    node.named_children(&mut cursor)
        .filter(|c| c.kind() != "comment")
        .collect()
}

pub(crate) fn node_text<'a>(node: Node<'_>, src: &'a str) -> &'a str {
    node.utf8_text(src.as_bytes()).unwrap_or("")
}

/// True when `child` is the node stored under `field` of `parent`.
pub(crate) fn field_is(parent: Node<'_>, field: &str, child: Node<'_>) -> bool {
    parent
        .child_by_field_name(field)
        .is_some_and(|n| n.id() == child.id())
}

pub(crate) fn line_of(node: Node<'_>) -> usize {
    node.start_position().row + 1
}

/// Strips a literal's quote characters (single, double, backtick or a
/// tripled quote) after any alphabetic prefix. Returns `(prefix, body)`.
pub(crate) fn strip_quotes(text: &str) -> (&str, &str) {
    let Some(start) = text.find(['\'', '"', '`']) else {
        return ("", text);
    };
    let (prefix, rest) = text.split_at(start);
    let q = &rest[..1];
    let triple = q.repeat(3);
    let width = if rest.len() >= 6 && rest.starts_with(&triple) && rest.ends_with(&triple) {
        3
    } else if rest.len() >= 2 && rest.ends_with(q) {
        1
    } else {
        return (prefix, &rest[1..]);
    };
    (prefix, &rest[width..rest.len() - width])
}

/// Signed numeric literal text like `-1`, given the unary node fields.
pub(crate) fn signed_number(
    operator: Option<Node<'_>>,
    argument: Option<Node<'_>>,
    number_kinds: &[&str],
    src: &str,
) -> Option<String> {
    let (op, arg) = (operator?, argument?);
    let op = node_text(op, src);
    if (op == "-" || op == "+") && number_kinds.contains(&arg.kind()) {
        Some(format!("{op}{}", node_text(arg, src)))
    } else {
        None
    }
}

fn collapse(text: &str) -> String {
    let joined: String = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if joined.chars().count() > 80 {
        let cut: String = joined.chars().take(77).collect();
        format!("{cut}...")
    } else {
        joined
    }
}

/// Classifies one argument expression into the five IR tags.
pub fn classify_argument(ast: &AstHandle, node: Node<'_>, position: ArgPosition) -> Argument {
    classify(&Ctx::new(ast), node, position)
}

pub(crate) fn classify(ctx: &Ctx<'_>, node: Node<'_>, position: ArgPosition) -> Argument {
    let (tag, value, element_tags) = classify_value(ctx, node);
    Argument {
        position,
        tag,
        value,
        element_tags,
    }
}

fn classify_value(ctx: &Ctx<'_>, node: Node<'_>) -> (ArgTag, String, Option<Vec<ArgTag>>) {
    let node = ctx.unwrap(node);
    let kind = node.kind();
    if let Some(text) = ctx.dialect.constant_text(node, ctx.src) {
        return (ArgTag::Constant, text, None);
    }
    if ctx.dialect.is_list(kind) {
        let mut values = Vec::new();
        let mut tags = Vec::new();
        for el in ctx.dialect.list_elements(node) {
            let (tag, value, _) = classify_value(ctx, el);
            tags.push(tag);
            values.push(serde_json::Value::String(value));
        }
        let text = serde_json::to_string(&values).expect("strings serialize");
        return (ArgTag::ListLiteral, text, Some(tags));
    }
    if ctx.dialect.is_dict(kind) {
        let mut map = serde_json::Map::new();
        let mut tags = Vec::new();
        for (key, el) in ctx.dialect.dict_entries(node, ctx.src) {
            let (tag, value, _) = classify_value(ctx, el);
            tags.push(tag);
            map.insert(key, serde_json::Value::String(value));
        }
        let text = serde_json::to_string(&map).expect("strings serialize");
        return (ArgTag::DictLiteral, text, Some(tags));
    }
    if ctx.is_call(node) {
        return (ArgTag::FunctionReturn, ctx.call_name(node), None);
    }
    if let Some(name) = ctx.name_chain(node) {
        return (ArgTag::Variable, name, None);
    }
    (ArgTag::Variable, digest(ctx, node), None)
}

/// Stable structural digest of a compound expression: its node kind and the
/// name chains it references, in source order without repeats.
fn digest(ctx: &Ctx<'_>, node: Node<'_>) -> String {
    let mut names: Vec<String> = Vec::new();
    collect_names(ctx, node, &mut names);
    format!("{EXPR_DIGEST_PREFIX}{}[{}]", node.kind(), names.join(","))
}

fn collect_names(ctx: &Ctx<'_>, node: Node<'_>, out: &mut Vec<String>) {
    if let Some(name) = ctx.name_chain(node) {
        if !out.contains(&name) {
            out.push(name);
        }
        return;
    }
    if ctx.is_call(node) {
        if let Some(callee) = ctx.dialect.callee(node) {
            collect_names(ctx, callee, out);
        }
        for (_, arg) in ctx.dialect.arguments(node, ctx.src) {
            collect_names(ctx, arg, out);
        }
        return;
    }
    for child in named_children(node) {
        if ctx.dialect.is_label_field(node, child) {
            continue;
        }
        collect_names(ctx, child, out);
    }
}

fn parent_context(ctx: &Ctx<'_>, call: Node<'_>) -> (ParentContext, Option<String>) {
    let mut child = call;
    let mut parent = call.parent();
    while let Some(p) = parent {
        if !ctx.dialect.transparent(p.kind()) {
            break;
        }
        child = p;
        parent = p.parent();
    }
    match parent {
        Some(p) => ctx.dialect.parent_context(child, p, ctx.src),
        None => (ParentContext::Other, None),
    }
}

/// Lowers every call expression of the file, in source order. Extraction is
/// flow-insensitive: calls in unreachable code are included.
pub fn extract_ir(ast: &AstHandle, file: &SourceFile) -> Vec<IrUnit> {
    extract_file(ast, file).units
}

pub fn extract_file(ast: &AstHandle, file: &SourceFile) -> FileIr {
    let ctx = Ctx::new(ast);
    let mut units = Vec::new();
    for node in ast.nodes() {
        if !node.is_named() || !ctx.is_call(node) {
            continue;
        }
        let ordinal = units.len();
        let (parent_context, produced_as) = parent_context(&ctx, node);
        let arguments = ctx
            .dialect
            .arguments(node, ctx.src)
            .into_iter()
            .map(|(pos, arg)| classify(&ctx, arg, pos))
            .collect();
        let start = node.start_position();
        units.push(IrUnit {
            unit_id: format!("{}#{ordinal}", file.rel_path),
            call_name: ctx.call_name(node),
            file: file.rel_path.clone(),
            line: start.row + 1,
            column: start.column,
            scope: scope_of(ctx.dialect, node, ctx.src),
            produced_as,
            parent_context,
            arguments,
        });
    }
    FileIr {
        units,
        values: ast.values.clone(),
        partial: ast.is_partial(),
    }
}
