//! Project discovery and source enumeration.
//!
//! A scan target is either a single project directory or, in corpus mode, a
//! directory whose immediate subdirectories are projects. Optional corpus
//! metadata (market, category, declared language) is joined onto projects by
//! directory name.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

/// Directories never descended into while enumerating sources.
pub const SKIP_DIRS: &[&str] = &[
    "node_modules",
    ".git",
    "vendor",
    "dist",
    "build",
    "__pycache__",
    "venv",
    ".venv",
];

/// Files above this size are treated as generated bundles and skipped.
pub const MAX_FILE_BYTES: u64 = 2 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Language {
    Python,
    JavaScript,
    TypeScript,
    Unknown,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::Python => "Python",
            Language::JavaScript => "JavaScript",
            Language::TypeScript => "TypeScript",
            Language::Unknown => "Unknown",
        }
    }

    pub fn is_supported(self) -> bool {
        self != Language::Unknown
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectMetadata {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub market: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub declared_language: Option<String>,
}

impl ProjectMetadata {
    pub fn is_empty(&self) -> bool {
        self.market.is_none() && self.category.is_none() && self.declared_language.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectDescriptor {
    pub root_path: PathBuf,
    pub project_id: String,
    pub metadata: ProjectMetadata,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub path: PathBuf,
    /// Path relative to the project root, `/`-separated. Used in IR and reports.
    pub rel_path: String,
    pub language: Language,
    pub content: String,
    pub size_bytes: u64,
}

impl SourceFile {
    /// Builds an in-memory source file, mostly for tests and embedding.
    pub fn from_text(rel_path: &str, content: &str) -> Self {
        SourceFile {
            path: PathBuf::from(rel_path),
            rel_path: rel_path.to_string(),
            language: detect_language(Path::new(rel_path), content),
            size_bytes: content.len() as u64,
            content: content.to_string(),
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("scan root does not exist or is not a directory: {0}")]
    NonexistentRoot(PathBuf),
    #[error("malformed metadata file {path} at {location}: {detail}")]
    MalformedMetadata {
        path: PathBuf,
        location: String,
        detail: String,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Non-fatal problems met during enumeration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestWarning {
    pub path: PathBuf,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct Enumeration {
    pub files: Vec<SourceFile>,
    pub warnings: Vec<IngestWarning>,
}

/// Extension-based language detection. `_content` is accepted so shebang
/// detection can be added without changing callers.
pub fn detect_language(path: &Path, _content: &str) -> Language {
    match path.extension().and_then(|e| e.to_str()) {
        Some("py") => Language::Python,
        Some("js" | "mjs" | "cjs") => Language::JavaScript,
        Some("ts" | "tsx") => Language::TypeScript,
        _ => Language::Unknown,
    }
}

#[derive(Debug, Deserialize)]
struct MetadataRecord {
    project_id: Option<String>,
    market: Option<String>,
    category: Option<String>,
    language: Option<String>,
}

/// Parses the corpus metadata file: a JSON array of
/// `{"project_id", "market", "category", "language"}` records.
pub fn load_metadata(path: &Path) -> Result<BTreeMap<String, ProjectMetadata>, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_metadata(path, &text)
}

fn parse_metadata(
    path: &Path,
    text: &str,
) -> Result<BTreeMap<String, ProjectMetadata>, IngestError> {
    let malformed = |location: String, detail: String| IngestError::MalformedMetadata {
        path: path.to_path_buf(),
        location,
        detail,
    };
    let values: Vec<serde_json::Value> = serde_json::from_str(text).map_err(|e| {
        malformed(
            format!("line {} column {}", e.line(), e.column()),
            e.to_string(),
        )
    })?;
    let mut out = BTreeMap::new();
    for (idx, value) in values.into_iter().enumerate() {
        let record: MetadataRecord = serde_json::from_value(value)
            .map_err(|e| malformed(format!("record {idx}"), e.to_string()))?;
        let id = match record.project_id {
            Some(id) if !id.trim().is_empty() => id,
            _ => {
                return Err(malformed(
                    format!("record {idx}"),
                    "missing or empty project_id".to_string(),
                ))
            }
        };
        out.insert(
            id,
            ProjectMetadata {
                market: record.market,
                category: record.category,
                declared_language: record.language,
            },
        );
    }
    Ok(out)
}

/// Lists the projects under `root`.
///
/// Single-project mode yields exactly one descriptor for `root`. Corpus mode
/// yields one descriptor per immediate subdirectory (skip-list directories and
/// hidden directories excluded), sorted by project id.
pub fn discover_projects(
    root: &Path,
    corpus_mode: bool,
    metadata_file: Option<&Path>,
) -> Result<Vec<ProjectDescriptor>, IngestError> {
    if !root.is_dir() {
        return Err(IngestError::NonexistentRoot(root.to_path_buf()));
    }
    let metadata = match metadata_file {
        Some(path) => load_metadata(path)?,
        None => BTreeMap::new(),
    };
    let join = |id: &str| metadata.get(id).cloned().unwrap_or_default();

    let mut projects = Vec::new();
    if corpus_mode {
        let entries = fs::read_dir(root).map_err(|source| IngestError::Io {
            path: root.to_path_buf(),
            source,
        })?;
        for entry in entries {
            let entry = entry.map_err(|source| IngestError::Io {
                path: root.to_path_buf(),
                source,
            })?;
            let path = entry.path();
            if !path.is_dir() {
                continue;
            }
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            if name.starts_with('.') || SKIP_DIRS.contains(&name) {
                continue;
            }
            projects.push(ProjectDescriptor {
                project_id: name.to_string(),
                metadata: join(name),
                root_path: path,
            });
        }
    } else {
        let id = project_id_for(root);
        projects.push(ProjectDescriptor {
            metadata: join(&id),
            project_id: id,
            root_path: root.to_path_buf(),
        });
    }
    projects.sort_by(|a, b| a.project_id.cmp(&b.project_id));

    let mut seen = HashSet::new();
    projects.retain(|p| seen.insert(p.project_id.clone()));
    Ok(projects)
}

fn project_id_for(root: &Path) -> String {
    let canonical = root.canonicalize().unwrap_or_else(|_| root.to_path_buf());
    canonical
        .file_name()
        .and_then(|n| n.to_str())
        .filter(|n| !n.is_empty())
        .unwrap_or("project")
        .to_string()
}

/// Recursively collects analyzable sources under the project root.
///
/// Skip-list directories are pruned, files over [`MAX_FILE_BYTES`] and files
/// that are not valid UTF-8 are reported as warnings and left out. Symlinks are
/// not followed, so no path outside the root is ever returned.
pub fn enumerate_source_files(project: &ProjectDescriptor) -> Enumeration {
    let root = &project.root_path;
    let mut out = Enumeration::default();

    let walker = WalkDir::new(root)
        .follow_links(false)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| {
            e.depth() == 0
                || !e.file_type().is_dir()
                || !e
                    .file_name()
                    .to_str()
                    .is_some_and(|name| SKIP_DIRS.contains(&name))
        });

    for entry in walker {
        let entry = match entry {
            Ok(e) => e,
            Err(err) => {
                out.warnings.push(IngestWarning {
                    path: err.path().map(Path::to_path_buf).unwrap_or_else(|| root.clone()),
                    message: err.to_string(),
                });
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let path = entry.path();
        if detect_language(path, "") == Language::Unknown {
            continue;
        }
        let size = match entry.metadata() {
            Ok(m) => m.len(),
            Err(err) => {
                out.warnings.push(IngestWarning {
                    path: path.to_path_buf(),
                    message: err.to_string(),
                });
                continue;
            }
        };
        if size > MAX_FILE_BYTES {
            out.warnings.push(IngestWarning {
                path: path.to_path_buf(),
                message: format!("skipped: {size} bytes exceeds the {MAX_FILE_BYTES}-byte cap"),
            });
            continue;
        }
        let bytes = match fs::read(path) {
            Ok(b) => b,
            Err(err) => {
                out.warnings.push(IngestWarning {
                    path: path.to_path_buf(),
                    message: err.to_string(),
                });
                continue;
            }
        };
        let content = match String::from_utf8(bytes) {
            Ok(s) => s,
            Err(_) => {
                out.warnings.push(IngestWarning {
                    path: path.to_path_buf(),
                    message: "skipped: not valid UTF-8".to_string(),
                });
                continue;
            }
        };
        let rel_path = path
            .strip_prefix(root)
            .unwrap_or(path)
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        out.files.push(SourceFile {
            language: detect_language(path, &content),
            path: path.to_path_buf(),
            rel_path,
            size_bytes: size,
            content,
        });
    }
    out.files.sort_by(|a, b| a.path.cmp(&b.path));
    out
}

/// Labels a project by the language with the most files. Returns the label
/// and whether the top count was tied; ties resolve to the first language in
/// enum order.
pub fn majority_language(files: &[SourceFile]) -> (Language, bool) {
    let mut counts: BTreeMap<Language, usize> = BTreeMap::new();
    for f in files.iter().filter(|f| f.language.is_supported()) {
        *counts.entry(f.language).or_default() += 1;
    }
    let Some(max) = counts.values().copied().max() else {
        return (Language::Unknown, false);
    };
    let mut top = counts.iter().filter(|(_, &c)| c == max).map(|(l, _)| *l);
    let first = top.next().unwrap_or(Language::Unknown);
    (first, top.next().is_some())
}
