//! Language-independent call-site IR.
//!
//! Every call expression in a source file is lowered into an [`IrUnit`]:
//! the resolved callee path, its location and enclosing scope, the
//! semantically tagged arguments, and the variable receiving its result.
//! Front-ends for each language live in sibling modules and share the
//! [`AstHandle`] interface.

mod ast;
mod javascript;
mod lower;
mod python;
mod strings;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::SourceFile;

pub use ast::{parse_to_ast, AstHandle, Binding, BindingKind, SymbolTable};
pub use lower::{classify_argument, extract_file, extract_ir, FileIr};

#[derive(Debug, Error)]
pub enum IrError {
    #[error("unsupported language for {0}")]
    UnsupportedLanguage(String),
    #[error("parser produced no tree for {0}")]
    FatalParseError(String),
    #[error("IR document is not valid: {0}")]
    Deserialize(#[from] serde_json::Error),
}

/// Argument position: zero-based index among positional arguments, or the
/// keyword/option name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArgPosition {
    Index(usize),
    Keyword(String),
}

impl fmt::Display for ArgPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArgPosition::Index(i) => write!(f, "#{i}"),
            ArgPosition::Keyword(k) => f.write_str(k),
        }
    }
}

/// The five argument categories. The serialized names are part of the IR
/// wire format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArgTag {
    Constant,
    ListLiteral,
    DictLiteral,
    FunctionReturn,
    Variable,
}

impl ArgTag {
    pub const ALL: [ArgTag; 5] = [
        ArgTag::Constant,
        ArgTag::ListLiteral,
        ArgTag::DictLiteral,
        ArgTag::FunctionReturn,
        ArgTag::Variable,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Argument {
    pub position: ArgPosition,
    pub tag: ArgTag,
    /// Literal text for constants, the name for variables, the callee for
    /// function returns, and canonical JSON for list/dict literals.
    pub value: String,
    pub element_tags: Option<Vec<ArgTag>>,
}

/// Prefix of the structural digest used as `value` for compound expressions
/// (arithmetic, interpolated strings, subscripts) tagged as variables.
pub const EXPR_DIGEST_PREFIX: &str = "expr:";

impl Argument {
    pub fn is_expression_digest(&self) -> bool {
        self.tag == ArgTag::Variable && self.value.starts_with(EXPR_DIGEST_PREFIX)
    }

    /// Names referenced by this argument: the variable name itself, or the
    /// identifiers listed inside an expression digest.
    pub fn referenced_names(&self) -> Vec<&str> {
        match self.tag {
            ArgTag::Variable if self.is_expression_digest() => digest_names(&self.value),
            ArgTag::Variable | ArgTag::FunctionReturn => vec![self.value.as_str()],
            _ => Vec::new(),
        }
    }

    /// Entries of a dict literal as `(key, value)` pairs.
    pub fn dict_entries(&self) -> Vec<(String, String)> {
        if self.tag != ArgTag::DictLiteral {
            return Vec::new();
        }
        match serde_json::from_str::<serde_json::Map<String, serde_json::Value>>(&self.value) {
            Ok(map) => map
                .into_iter()
                .map(|(k, v)| match v {
                    serde_json::Value::String(s) => (k, s),
                    other => (k, other.to_string()),
                })
                .collect(),
            Err(_) => Vec::new(),
        }
    }
}

fn digest_names(value: &str) -> Vec<&str> {
    let Some(start) = value.find('[') else {
        return Vec::new();
    };
    let inner = value[start + 1..].strip_suffix(']').unwrap_or(&value[start + 1..]);
    inner.split(',').filter(|s| !s.is_empty()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParentContext {
    AssignmentRhs,
    ExpressionStatement,
    ArgumentPosition,
    ReturnValue,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IrUnit {
    pub unit_id: String,
    pub call_name: String,
    pub file: String,
    pub line: usize,
    pub column: usize,
    pub scope: String,
    pub produced_as: Option<String>,
    pub parent_context: ParentContext,
    pub arguments: Vec<Argument>,
}

impl IrUnit {
    /// Variable names this unit touches: plain variable arguments (not
    /// expression digests) and the produced variable.
    pub fn variable_names(&self) -> impl Iterator<Item = &str> {
        self.arguments
            .iter()
            .filter(|a| a.tag == ArgTag::Variable && !a.is_expression_digest())
            .map(|a| a.value.as_str())
            .chain(self.produced_as.as_deref())
    }

    pub fn argument(&self, position: &ArgPosition) -> Option<&Argument> {
        self.arguments.iter().find(|a| &a.position == position)
    }

    pub fn keyword(&self, name: &str) -> Option<&Argument> {
        self.arguments
            .iter()
            .find(|a| matches!(&a.position, ArgPosition::Keyword(k) if k.eq_ignore_ascii_case(name)))
    }

    /// `(line, column, ordinal)`: source order within the unit's file.
    pub fn source_key(&self) -> (usize, usize, usize) {
        (self.line, self.column, ordinal(&self.unit_id))
    }

    /// Last dotted segment of the callee path.
    pub fn final_segment(&self) -> &str {
        self.call_name.rsplit('.').next().unwrap_or(&self.call_name)
    }
}

/// Kind of value a plain (non-call) assignment binds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Literal,
    Environment,
}

/// A name bound by a plain assignment to a literal or an environment read,
/// e.g. `API_KEY = '...'` or `const key = process.env.KEY`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ValueBinding {
    pub name: String,
    pub file: String,
    pub line: usize,
    pub scope: String,
    pub kind: ValueKind,
    pub value: String,
}

pub fn sort_units(units: &mut [IrUnit]) {
    units.sort_by(|a, b| {
        (a.file.as_str(), a.line, a.column, ordinal(&a.unit_id))
            .cmp(&(b.file.as_str(), b.line, b.column, ordinal(&b.unit_id)))
    });
}

fn ordinal(unit_id: &str) -> usize {
    unit_id
        .rsplit_once('#')
        .and_then(|(_, n)| n.parse().ok())
        .unwrap_or(0)
}

/// Serializes units as the IR JSON document: an array sorted by
/// `(file, line, column)` with a fixed key order.
pub fn serialize_ir(units: &[IrUnit]) -> String {
    let mut sorted = units.to_vec();
    sort_units(&mut sorted);
    serde_json::to_string_pretty(&sorted).expect("IR units always serialize")
}

pub fn deserialize_ir(text: &str) -> Result<Vec<IrUnit>, IrError> {
    Ok(serde_json::from_str(text)?)
}

/// Parses and lowers one file. Unsupported languages yield an error;
/// syntax errors yield a partial result flagged in [`FileIr::partial`].
pub fn lower_source(file: &SourceFile) -> Result<FileIr, IrError> {
    let ast = parse_to_ast(file)?;
    Ok(extract_file(&ast, file))
}


#[cfg(test)]
mod tests {
    use super::*;

    fn unit(file: &str, line: usize, column: usize, ord: usize) -> IrUnit {
        IrUnit {
            unit_id: format!("{file}#{ord}"),
            call_name: "f".into(),
            file: file.into(),
            line,
            column,
            scope: "<module>".into(),
            produced_as: None,
            parent_context: ParentContext::ExpressionStatement,
            arguments: vec![],
        }
    }

    #[test]
    fn empty_document() {
        assert_eq!(serialize_ir(&[]), "[]");
    }

    #[test]
    fn golden_single_unit() {
        let u = IrUnit {
            unit_id: "tool.py#0".into(),
            call_name: "get_random_bytes".into(),
            file: "tool.py".into(),
            line: 1,
            column: 7,
            scope: "<module>".into(),
            produced_as: Some("salt".into()),
            parent_context: ParentContext::AssignmentRhs,
            arguments: vec![Argument {
                position: ArgPosition::Index(0),
                tag: ArgTag::Constant,
                value: "16".into(),
                element_tags: None,
            }],
        };
        let expected = r#"[
  {
    "unit_id": "tool.py#0",
    "call_name": "get_random_bytes",
    "file": "tool.py",
    "line": 1,
    "column": 7,
    "scope": "<module>",
    "produced_as": "salt",
    "parent_context": "assignment_rhs",
    "arguments": [
      {
        "position": 0,
        "tag": "constant",
        "value": "16",
        "element_tags": null
      }
    ]
  }
]"#;
        assert_eq!(serialize_ir(&[u]), expected);
    }

    #[test]
    fn sorted_by_location() {
        let units = vec![unit("b.py", 1, 0, 0), unit("a.py", 3, 2, 1), unit("a.py", 3, 0, 0)];
        let back = deserialize_ir(&serialize_ir(&units)).unwrap();
        let order: Vec<_> = back.iter().map(|u| u.unit_id.as_str()).collect();
        assert_eq!(order, ["a.py#0", "a.py#1", "b.py#0"]);
    }

    #[test]
    fn keyword_position_serializes_as_string() {
        let a = Argument {
            position: ArgPosition::Keyword("iv".into()),
            tag: ArgTag::Constant,
            value: "0000".into(),
            element_tags: None,
        };
        let text = serde_json::to_string(&a).unwrap();
        assert!(text.contains(r#""position":"iv""#));
        let back: Argument = serde_json::from_str(&text).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn digest_names_are_recovered() {
        let a = Argument {
            position: ArgPosition::Index(0),
            tag: ArgTag::Variable,
            value: "expr:template_string[this.apiKey,timestamp]".into(),
            element_tags: None,
        };
        assert!(a.is_expression_digest());
        assert_eq!(a.referenced_names(), ["this.apiKey", "timestamp"]);
    }
}
