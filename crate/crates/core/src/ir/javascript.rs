//! JavaScript and TypeScript (including TSX) share one dialect; the
//! TypeScript grammar only adds wrapper and field-definition kinds.

use regex::Regex;
use std::sync::LazyLock;
use tree_sitter::Node;

use super::ast::{scope_of, AstHandle, BindingKind, SymbolTable};
use super::lower::{
    field_is, line_of, named_children, node_text, signed_number, strip_quotes, Ctx, Dialect, Shape,
};
use super::strings::unescape;
use super::{ArgPosition, ParentContext, ValueBinding, ValueKind};

pub(crate) struct JavaScript;

static IDENT_LIKE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[A-Za-z_$][A-Za-z0-9_$]*$").expect("valid regex"));

fn module_name(node: Node<'_>, src: &str) -> String {
    let (_, body) = strip_quotes(node_text(node, src));
    body.strip_prefix("node:").unwrap_or(body).to_string()
}

/// Identifiers bound by a declaration, parameter or destructuring pattern.
fn pattern_names<'t>(node: Node<'t>, out: &mut Vec<Node<'t>>) {
    match node.kind() {
        "identifier" | "shorthand_property_identifier_pattern" => out.push(node),
        "member_expression" | "subscript_expression" | "type_annotation" => {}
        "pair_pattern" => {
            if let Some(v) = node.child_by_field_name("value") {
                pattern_names(v, out);
            }
        }
        "assignment_pattern" | "object_assignment_pattern" => {
            if let Some(l) = node.child_by_field_name("left") {
                pattern_names(l, out);
            }
        }
        "required_parameter" | "optional_parameter" => {
            if let Some(p) = node.child_by_field_name("pattern") {
                pattern_names(p, out);
            }
        }
        _ => {
            for c in named_children(node) {
                pattern_names(c, out);
            }
        }
    }
}

fn require_module(ctx: &Ctx<'_>, value: Node<'_>) -> Option<String> {
    let value = ctx.unwrap(value);
    if value.kind() != "call_expression" {
        return None;
    }
    let callee = value.child_by_field_name("function")?;
    if ctx.text(callee) != "require" {
        return None;
    }
    let args = value.child_by_field_name("arguments")?;
    let first = named_children(args).into_iter().next()?;
    (first.kind() == "string").then(|| module_name(first, ctx.src))
}

impl JavaScript {
    fn bind_pattern(
        &self,
        target: Node<'_>,
        src: &str,
        line: Option<usize>,
        kind: BindingKind,
        symbols: &mut SymbolTable,
    ) {
        let mut names = Vec::new();
        pattern_names(target, &mut names);
        for n in names {
            let line = line.unwrap_or_else(|| line_of(n));
            symbols.bind(&scope_of(self, n, src), node_text(n, src), line, kind);
        }
    }

    /// Default or namespace import: rewritten only when the module name is
    /// itself a usable identifier different from the local one.
    fn whole_module(&self, symbols: &mut SymbolTable, local: &str, module: &str) {
        if IDENT_LIKE.is_match(module) && module != local {
            symbols.alias(local, module);
        }
    }

    fn import_statement(&self, node: Node<'_>, src: &str, symbols: &mut SymbolTable) {
        let Some(source) = node.child_by_field_name("source") else {
            return;
        };
        let module = module_name(source, src);
        let scope = scope_of(self, node, src);
        let line = line_of(node);
        let Some(clause) = named_children(node)
            .into_iter()
            .find(|c| c.kind() == "import_clause")
        else {
            return;
        };
        for part in named_children(clause) {
            match part.kind() {
                "identifier" => {
                    let local = node_text(part, src);
                    symbols.bind(&scope, local, line, BindingKind::Import);
                    self.whole_module(symbols, local, &module);
                }
                "namespace_import" => {
                    if let Some(id) = named_children(part).into_iter().find(|c| c.kind() == "identifier") {
                        let local = node_text(id, src);
                        symbols.bind(&scope, local, line, BindingKind::Import);
                        self.whole_module(symbols, local, &module);
                    }
                }
                "named_imports" => {
                    for spec in named_children(part) {
                        let Some(name) = spec.child_by_field_name("name") else {
                            continue;
                        };
                        let imported = node_text(name, src);
                        let local = spec
                            .child_by_field_name("alias")
                            .map_or(imported, |a| node_text(a, src));
                        symbols.bind(&scope, local, line, BindingKind::Import);
                        symbols.alias(local, &format!("{module}.{imported}"));
                    }
                }
                _ => {}
            }
        }
    }

    fn require_destructure(
        &self,
        name: Node<'_>,
        module: &str,
        src: &str,
        symbols: &mut SymbolTable,
    ) {
        let scope = scope_of(self, name, src);
        let line = line_of(name);
        match name.kind() {
            "identifier" => {
                let local = node_text(name, src);
                symbols.bind(&scope, local, line, BindingKind::Import);
                self.whole_module(symbols, local, module);
            }
            "object_pattern" => {
                for prop in named_children(name) {
                    let (imported, local) = match prop.kind() {
                        "shorthand_property_identifier_pattern" => {
                            (node_text(prop, src), node_text(prop, src))
                        }
                        "pair_pattern" => match (
                            prop.child_by_field_name("key"),
                            prop.child_by_field_name("value"),
                        ) {
                            (Some(k), Some(v)) if v.kind() == "identifier" => {
                                (node_text(k, src), node_text(v, src))
                            }
                            _ => continue,
                        },
                        _ => continue,
                    };
                    symbols.bind(&scope, local, line, BindingKind::Import);
                    symbols.alias(local, &format!("{module}.{imported}"));
                }
            }
            _ => {}
        }
    }

    fn value_of(&self, ctx: &Ctx<'_>, value: Node<'_>) -> Option<(ValueKind, String)> {
        let value = ctx.unwrap(value);
        if let Some(text) = self.constant_text(value, ctx.src) {
            return Some((ValueKind::Literal, text));
        }
        let env_read = match value.kind() {
            "member_expression" => ctx
                .name_chain(value)
                .is_some_and(|n| n.starts_with("process.env.")),
            "subscript_expression" => value
                .child_by_field_name("object")
                .and_then(|o| ctx.name_chain(o))
                .is_some_and(|n| n == "process.env"),
            _ => false,
        };
        env_read.then(|| (ValueKind::Environment, ctx.text(value).to_string()))
    }

    fn push_value(
        &self,
        ctx: &Ctx<'_>,
        file: &str,
        at: Node<'_>,
        name: String,
        value: Node<'_>,
        values: &mut Vec<ValueBinding>,
    ) {
        if let Some((kind, text)) = self.value_of(ctx, value) {
            values.push(ValueBinding {
                name,
                file: file.to_string(),
                line: line_of(value),
                scope: scope_of(self, at, ctx.src),
                kind,
                value: text,
            });
        }
    }
}

impl Dialect for JavaScript {
    fn call_kinds(&self) -> &'static [&'static str] {
        &["call_expression", "new_expression"]
    }

    fn callee<'t>(&self, call: Node<'t>) -> Option<Node<'t>> {
        match call.kind() {
            "new_expression" => call.child_by_field_name("constructor"),
            _ => call.child_by_field_name("function"),
        }
    }

    fn arguments<'t>(&self, call: Node<'t>, _src: &str) -> Vec<(ArgPosition, Node<'t>)> {
        let Some(args) = call.child_by_field_name("arguments") else {
            return Vec::new();
        };
        if args.kind() != "arguments" {
            return vec![(ArgPosition::Index(0), args)];
        }
        named_children(args)
            .into_iter()
            .enumerate()
            .map(|(i, n)| (ArgPosition::Index(i), n))
            .collect()
    }

    fn scope_label(&self, node: Node<'_>, src: &str) -> Option<String> {
        let named = |n: Node<'_>| {
            n.child_by_field_name("name")
                .map(|id| node_text(id, src).to_string())
        };
        match node.kind() {
            "function_declaration"
            | "generator_function_declaration"
            | "method_definition"
            | "class_declaration"
            | "abstract_class_declaration" => named(node),
            "class" => Some(named(node).unwrap_or_else(|| "<anonymous>".to_string())),
            "arrow_function" | "function_expression" | "function" | "generator_function" => {
                let declared = node
                    .parent()
                    .filter(|p| p.kind() == "variable_declarator" && field_is(*p, "value", node))
                    .and_then(|p| p.child_by_field_name("name"))
                    .filter(|n| n.kind() == "identifier")
                    .map(|n| node_text(n, src).to_string());
                Some(named(node).or(declared).unwrap_or_else(|| {
                    if node.kind() == "arrow_function" {
                        "<lambda>".to_string()
                    } else {
                        "<anonymous>".to_string()
                    }
                }))
            }
            _ => None,
        }
    }

    fn transparent(&self, kind: &str) -> bool {
        matches!(
            kind,
            "parenthesized_expression"
                | "await_expression"
                | "as_expression"
                | "satisfies_expression"
                | "non_null_expression"
        )
    }

    fn shape<'t>(&self, node: Node<'t>, src: &str) -> Shape<'t> {
        match node.kind() {
            "identifier" | "super" | "shorthand_property_identifier" => Shape::Ident,
            "this" => Shape::This,
            "member_expression" => match (
                node.child_by_field_name("object"),
                node.child_by_field_name("property"),
            ) {
                (Some(object), Some(prop)) => Shape::Member {
                    object,
                    property: node_text(prop, src).to_string(),
                },
                _ => Shape::Other,
            },
            "call_expression" | "new_expression" => Shape::Call,
            "subscript_expression" => match node.child_by_field_name("object") {
                Some(value) => Shape::Subscript { value },
                None => Shape::Other,
            },
            _ => Shape::Other,
        }
    }

    fn constant_text(&self, node: Node<'_>, src: &str) -> Option<String> {
        match node.kind() {
            "string" => Some(unescape(strip_quotes(node_text(node, src)).1)),
            "template_string" => {
                if named_children(node)
                    .iter()
                    .any(|c| c.kind() == "template_substitution")
                {
                    None
                } else {
                    Some(unescape(strip_quotes(node_text(node, src)).1))
                }
            }
            "number" | "true" | "false" | "null" | "undefined" => {
                Some(node_text(node, src).to_string())
            }
            "unary_expression" => signed_number(
                node.child_by_field_name("operator"),
                node.child_by_field_name("argument"),
                &["number"],
                src,
            ),
            _ => None,
        }
    }

    fn is_list(&self, kind: &str) -> bool {
        kind == "array"
    }

    fn is_dict(&self, kind: &str) -> bool {
        kind == "object"
    }

    fn list_elements<'t>(&self, node: Node<'t>) -> Vec<Node<'t>> {
        named_children(node)
    }

    fn dict_entries<'t>(&self, node: Node<'t>, src: &str) -> Vec<(String, Node<'t>)> {
        named_children(node)
            .into_iter()
            .filter_map(|entry| match entry.kind() {
                "pair" => {
                    let key = entry.child_by_field_name("key")?;
                    let value = entry.child_by_field_name("value")?;
                    let key = self
                        .constant_text(key, src)
                        .unwrap_or_else(|| node_text(key, src).to_string());
                    Some((key, value))
                }
                "shorthand_property_identifier" => Some((node_text(entry, src).to_string(), entry)),
                _ => None,
            })
            .collect()
    }

    fn parent_context(
        &self,
        call: Node<'_>,
        parent: Node<'_>,
        src: &str,
    ) -> (ParentContext, Option<String>) {
        let simple = |n: Option<Node<'_>>| {
            n.filter(|l| l.kind() == "identifier")
                .map(|l| node_text(l, src).to_string())
        };
        match parent.kind() {
            "variable_declarator" if field_is(parent, "value", call) => (
                ParentContext::AssignmentRhs,
                simple(parent.child_by_field_name("name")),
            ),
            "assignment_expression" if field_is(parent, "right", call) => (
                ParentContext::AssignmentRhs,
                simple(parent.child_by_field_name("left")),
            ),
            "augmented_assignment_expression" if field_is(parent, "right", call) => {
                (ParentContext::AssignmentRhs, None)
            }
            "expression_statement" => (ParentContext::ExpressionStatement, None),
            "arguments" => (ParentContext::ArgumentPosition, None),
            "return_statement" => (ParentContext::ReturnValue, None),
            "arrow_function" if field_is(parent, "body", call) => (ParentContext::ReturnValue, None),
            _ => (ParentContext::Other, None),
        }
    }

    fn is_label_field(&self, parent: Node<'_>, child: Node<'_>) -> bool {
        match parent.kind() {
            "pair" => field_is(parent, "key", child),
            "member_expression" => field_is(parent, "property", child),
            _ => false,
        }
    }

    fn collect_bindings(
        &self,
        ast: &AstHandle,
        symbols: &mut SymbolTable,
        values: &mut Vec<ValueBinding>,
    ) {
        let src = ast.source();
        let ctx = Ctx::new(ast);
        let file = ast.rel_path.as_str();
        for node in ast.nodes() {
            match node.kind() {
                "variable_declarator" => {
                    let Some(name) = node.child_by_field_name("name") else {
                        continue;
                    };
                    let value = node.child_by_field_name("value");
                    if let Some(module) = value.and_then(|v| require_module(&ctx, v)) {
                        self.require_destructure(name, &module, src, symbols);
                        continue;
                    }
                    let line = value.map_or(line_of(node), line_of);
                    self.bind_pattern(name, src, Some(line), BindingKind::Assignment, symbols);
                    if let (Some(value), "identifier") = (value, name.kind()) {
                        let n = node_text(name, src).to_string();
                        self.push_value(&ctx, file, node, n, value, values);
                    }
                }
                "assignment_expression" | "augmented_assignment_expression" => {
                    let (Some(left), Some(right)) = (
                        node.child_by_field_name("left"),
                        node.child_by_field_name("right"),
                    ) else {
                        continue;
                    };
                    if left.kind() == "identifier" {
                        let kind = BindingKind::Assignment;
                        self.bind_pattern(left, src, Some(line_of(right)), kind, symbols);
                    }
                    if node.kind() == "assignment_expression" {
                        if let Some(n) = ctx.name_chain(left) {
                            self.push_value(&ctx, file, node, n, right, values);
                        }
                    }
                }
                "field_definition" | "public_field_definition" => {
                    let prop = node
                        .child_by_field_name("property")
                        .or_else(|| node.child_by_field_name("name"));
                    if let (Some(prop), Some(value)) = (prop, node.child_by_field_name("value")) {
                        let n = format!("this.{}", node_text(prop, src));
                        self.push_value(&ctx, file, node, n, value, values);
                    }
                }
                "function_declaration"
                | "generator_function_declaration"
                | "class_declaration"
                | "abstract_class_declaration" => {
                    let kind = if node.kind().contains("class") {
                        BindingKind::ClassDef
                    } else {
                        BindingKind::FunctionDef
                    };
                    if let Some(name) = node.child_by_field_name("name") {
                        symbols.bind(&scope_of(self, node, src), node_text(name, src), line_of(name), kind);
                    }
                }
                "formal_parameters" => {
                    self.bind_pattern(node, src, None, BindingKind::Parameter, symbols);
                }
                "arrow_function" => {
                    if let Some(p) = node.child_by_field_name("parameter") {
                        self.bind_pattern(p, src, None, BindingKind::Parameter, symbols);
                    }
                }
                "catch_clause" => {
                    if let Some(p) = node.child_by_field_name("parameter") {
                        self.bind_pattern(p, src, None, BindingKind::Parameter, symbols);
                    }
                }
                "for_in_statement" => {
                    if let Some(l) = node.child_by_field_name("left") {
                        self.bind_pattern(l, src, None, BindingKind::LoopTarget, symbols);
                    }
                }
                "import_statement" => self.import_statement(node, src, symbols),
                _ => {}
            }
        }
    }
}
