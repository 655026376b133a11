use tree_sitter::Node;

use super::ast::{scope_of, AstHandle, BindingKind, SymbolTable};
use super::lower::{
    field_is, first_named, line_of, named_children, node_text, signed_number, strip_quotes, Ctx,
    Dialect, Shape,
};
use super::strings::unescape;
use super::{ArgPosition, ParentContext, ValueBinding, ValueKind};

pub(crate) struct Python;

const NUMBERS: &[&str] = &["integer", "float"];

impl Python {
    fn string_constant(&self, node: Node<'_>, src: &str) -> Option<String> {
        if named_children(node).iter().any(|c| c.kind() == "interpolation") {
            return None;
        }
        let (prefix, body) = strip_quotes(node_text(node, src));
        if prefix.contains(['r', 'R']) {
            Some(body.to_string())
        } else {
            Some(unescape(body))
        }
    }

    fn bind_targets(
        &self,
        target: Node<'_>,
        src: &str,
        line: usize,
        kind: BindingKind,
        symbols: &mut SymbolTable,
    ) {
        let mut names = Vec::new();
        pattern_names(target, &mut names);
        for n in names {
            symbols.bind(&scope_of(self, n, src), node_text(n, src), line, kind);
        }
    }

    fn bind_parameters(&self, params: Node<'_>, src: &str, symbols: &mut SymbolTable) {
        for p in named_children(params) {
            let mut names = Vec::new();
            pattern_names(p, &mut names);
            for n in names {
                symbols.bind(
                    &scope_of(self, n, src),
                    node_text(n, src),
                    line_of(n),
                    BindingKind::Parameter,
                );
            }
        }
    }

    fn imports(&self, node: Node<'_>, src: &str, symbols: &mut SymbolTable) {
        let scope = scope_of(self, node, src);
        let line = line_of(node);
        let module = node
            .child_by_field_name("module_name")
            .filter(|m| m.kind() == "dotted_name")
            .map(|m| node_text(m, src));
        let relative = node.kind() == "import_from_statement" && module.is_none();
        let mut cursor = node.walk();
        let names: Vec<_> = node.children_by_field_name("name", &mut cursor).collect();
        for name in names {
            let (path, local) = match name.kind() {
                "aliased_import" => {
                    let Some(alias) = name.child_by_field_name("alias") else {
                        continue;
                    };
                    let path = name.child_by_field_name("name").map(|n| node_text(n, src));
                    (path.unwrap_or(""), node_text(alias, src))
                }
                _ => {
                    let path = node_text(name, src);
                    let local = if module.is_some() || relative {
                        path
                    } else {
                        path.split('.').next().unwrap_or(path)
                    };
                    (path, local)
                }
            };
            symbols.bind(&scope, local, line, BindingKind::Import);
            if relative {
                continue;
            }
            let qualified = match module {
                Some(m) => format!("{m}.{path}"),
                None if path.contains('.') && name.kind() != "aliased_import" => continue,
                None => path.to_string(),
            };
            if qualified != local {
                symbols.alias(local, &qualified);
            }
        }
    }

    fn value_binding(
        &self,
        ctx: &Ctx<'_>,
        file: &str,
        node: Node<'_>,
        values: &mut Vec<ValueBinding>,
    ) {
        let (Some(left), Some(right)) = (
            node.child_by_field_name("left"),
            node.child_by_field_name("right"),
        ) else {
            return;
        };
        let Some(name) = ctx.name_chain(left) else {
            return;
        };
        let right = ctx.unwrap(right);
        let (kind, value) = if let Some(text) = self.constant_text(right, ctx.src) {
            (ValueKind::Literal, text)
        } else if right.kind() == "subscript"
            && right
                .child_by_field_name("value")
                .and_then(|v| ctx.name_chain(v))
                .is_some_and(|v| v == "os.environ")
        {
            (ValueKind::Environment, ctx.text(right).to_string())
        } else {
            return;
        };
        values.push(ValueBinding {
            name,
            file: file.to_string(),
            line: line_of(right),
            scope: scope_of(self, node, ctx.src),
            kind,
            value,
        });
    }
}

/// Identifiers bound by an assignment, loop or parameter pattern.
fn pattern_names<'t>(node: Node<'t>, out: &mut Vec<Node<'t>>) {
    match node.kind() {
        "identifier" => out.push(node),
        "attribute" | "subscript" | "type" => {}
        "default_parameter" | "typed_default_parameter" => {
            if let Some(n) = node.child_by_field_name("name") {
                pattern_names(n, out);
            }
        }
        "typed_parameter" => {
            if let Some(n) = first_named(node) {
                pattern_names(n, out);
            }
        }
        _ => {
            for c in named_children(node) {
                pattern_names(c, out);
            }
        }
    }
}

impl Dialect for Python {
    fn call_kinds(&self) -> &'static [&'static str] {
        &["call"]
    }

    fn callee<'t>(&self, call: Node<'t>) -> Option<Node<'t>> {
        call.child_by_field_name("function")
    }

    fn arguments<'t>(&self, call: Node<'t>, src: &str) -> Vec<(ArgPosition, Node<'t>)> {
        let Some(args) = call.child_by_field_name("arguments") else {
            return Vec::new();
        };
        if args.kind() == "generator_expression" {
            return vec![(ArgPosition::Index(0), args)];
        }
        let mut out = Vec::new();
        let mut index = 0;
        for child in named_children(args) {
            if child.kind() == "keyword_argument" {
                if let (Some(name), Some(value)) = (
                    child.child_by_field_name("name"),
                    child.child_by_field_name("value"),
                ) {
                    out.push((ArgPosition::Keyword(node_text(name, src).to_string()), value));
                }
            } else {
                out.push((ArgPosition::Index(index), child));
                index += 1;
            }
        }
        out
    }

    fn scope_label(&self, node: Node<'_>, src: &str) -> Option<String> {
        match node.kind() {
            "function_definition" | "class_definition" => node
                .child_by_field_name("name")
                .map(|n| node_text(n, src).to_string()),
            "lambda" => Some("<lambda>".to_string()),
            _ => None,
        }
    }

    fn transparent(&self, kind: &str) -> bool {
        matches!(kind, "parenthesized_expression" | "await")
    }

    fn shape<'t>(&self, node: Node<'t>, src: &str) -> Shape<'t> {
        match node.kind() {
            "identifier" => Shape::Ident,
            "attribute" => match (
                node.child_by_field_name("object"),
                node.child_by_field_name("attribute"),
            ) {
                (Some(object), Some(attr)) => Shape::Member {
                    object,
                    property: node_text(attr, src).to_string(),
                },
                _ => Shape::Other,
            },
            "call" => Shape::Call,
            "subscript" => match node.child_by_field_name("value") {
                Some(value) => Shape::Subscript { value },
                None => Shape::Other,
            },
            _ => Shape::Other,
        }
    }

    fn constant_text(&self, node: Node<'_>, src: &str) -> Option<String> {
        match node.kind() {
            "string" => self.string_constant(node, src),
            "concatenated_string" => named_children(node)
                .into_iter()
                .map(|s| self.string_constant(s, src))
                .collect(),
            "integer" | "float" | "true" | "false" | "none" => Some(node_text(node, src).to_string()),
            "unary_operator" => signed_number(
                node.child_by_field_name("operator"),
                node.child_by_field_name("argument"),
                NUMBERS,
                src,
            ),
            _ => None,
        }
    }

    fn is_list(&self, kind: &str) -> bool {
        matches!(kind, "list" | "tuple" | "set")
    }

    fn is_dict(&self, kind: &str) -> bool {
        kind == "dictionary"
    }

    fn list_elements<'t>(&self, node: Node<'t>) -> Vec<Node<'t>> {
        named_children(node)
    }

    fn dict_entries<'t>(&self, node: Node<'t>, src: &str) -> Vec<(String, Node<'t>)> {
        named_children(node)
            .into_iter()
            .filter(|c| c.kind() == "pair")
            .filter_map(|pair| {
                let key = pair.child_by_field_name("key")?;
                let value = pair.child_by_field_name("value")?;
                let key = self
                    .constant_text(key, src)
                    .unwrap_or_else(|| node_text(key, src).to_string());
                Some((key, value))
            })
            .collect()
    }

    fn parent_context(
        &self,
        call: Node<'_>,
        parent: Node<'_>,
        src: &str,
    ) -> (ParentContext, Option<String>) {
        match parent.kind() {
            "assignment" if field_is(parent, "right", call) => {
                let target = parent
                    .child_by_field_name("left")
                    .filter(|l| l.kind() == "identifier")
                    .map(|l| node_text(l, src).to_string());
                (ParentContext::AssignmentRhs, target)
            }
            "named_expression" if field_is(parent, "value", call) => {
                let target = parent
                    .child_by_field_name("name")
                    .map(|l| node_text(l, src).to_string());
                (ParentContext::AssignmentRhs, target)
            }
            "augmented_assignment" if field_is(parent, "right", call) => {
                (ParentContext::AssignmentRhs, None)
            }
            "expression_statement" => (ParentContext::ExpressionStatement, None),
            "argument_list" => (ParentContext::ArgumentPosition, None),
            "keyword_argument" if field_is(parent, "value", call) => {
                (ParentContext::ArgumentPosition, None)
            }
            "return_statement" => (ParentContext::ReturnValue, None),
            _ => (ParentContext::Other, None),
        }
    }

    fn is_label_field(&self, parent: Node<'_>, child: Node<'_>) -> bool {
        match parent.kind() {
            "keyword_argument" => field_is(parent, "name", child),
            "pair" => field_is(parent, "key", child),
            "attribute" => field_is(parent, "attribute", child),
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
        for node in ast.nodes() {
            match node.kind() {
                "assignment" | "augmented_assignment" => {
                    let line = node.child_by_field_name("right").map_or(line_of(node), line_of);
                    if let Some(left) = node.child_by_field_name("left") {
                        self.bind_targets(left, src, line, BindingKind::Assignment, symbols);
                    }
                    if node.kind() == "assignment" {
                        self.value_binding(&ctx, &ast.rel_path, node, values);
                    }
                }
                "named_expression" => {
                    if let Some(name) = node.child_by_field_name("name") {
                        let line = node.child_by_field_name("value").map_or(line_of(node), line_of);
                        self.bind_targets(name, src, line, BindingKind::Assignment, symbols);
                    }
                }
                "for_statement" | "for_in_clause" => {
                    if let Some(left) = node.child_by_field_name("left") {
                        self.bind_targets(left, src, line_of(left), BindingKind::LoopTarget, symbols);
                    }
                }
                "as_pattern" => {
                    if let Some(alias) = node.child_by_field_name("alias") {
                        self.bind_targets(alias, src, line_of(alias), BindingKind::WithTarget, symbols);
                    }
                }
                "function_definition" | "class_definition" => {
                    let kind = if node.kind() == "class_definition" {
                        BindingKind::ClassDef
                    } else {
                        BindingKind::FunctionDef
                    };
                    if let Some(name) = node.child_by_field_name("name") {
                        symbols.bind(&scope_of(self, node, src), node_text(name, src), line_of(name), kind);
                    }
                    if let Some(params) = node.child_by_field_name("parameters") {
                        self.bind_parameters(params, src, symbols);
                    }
                }
                "lambda" => {
                    if let Some(params) = node.child_by_field_name("parameters") {
                        self.bind_parameters(params, src, symbols);
                    }
                }
                "import_statement" | "import_from_statement" => self.imports(node, src, symbols),
                _ => {}
            }
        }
    }
}
