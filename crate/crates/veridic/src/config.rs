//! Toolbox configuration: the YAML document that declares database sources,
//! the tools bound to them, and named toolsets agents subscribe to.
//!
//! The document has three top-level maps:
//!
//! ```yaml
//! sources:
//!   seattle:
//!     kind: postgres
//!     host: localhost
//!     database: seattle
//! tools:
//!   seattle_sql:
//!     kind: postgres-execute-sql
//!     source: seattle
//! toolsets:
//!   west-coast-sql:
//!     - seattle_sql
//! ```
//!
//! Tool kinds may carry a dialect prefix (`postgres-execute-sql`); parsing
//! normalizes them to dialect-agnostic kinds (`execute-sql`, `list-tables`,
//! `describe-table`) and the bound source supplies the dialect. Secrets are
//! referenced by environment-variable name (`password_env: MY_SECRET`),
//! never inlined.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Database dialect of a declared source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SqlDialect {
    Postgres,
    Mysql,
    Sqlite,
}

impl SqlDialect {
    pub fn as_str(&self) -> &'static str {
        match self {
            SqlDialect::Postgres => "postgres",
            SqlDialect::Mysql => "mysql",
            SqlDialect::Sqlite => "sqlite",
        }
    }

    fn parse(s: &str) -> Option<SqlDialect> {
        match s {
            "postgres" => Some(SqlDialect::Postgres),
            "mysql" => Some(SqlDialect::Mysql),
            "sqlite" => Some(SqlDialect::Sqlite),
            _ => None,
        }
    }
}

impl fmt::Display for SqlDialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Dialect-agnostic tool kind. The dialect lives on the bound source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ToolKind {
    ExecuteSql,
    ListTables,
    DescribeTable,
}

impl ToolKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ToolKind::ExecuteSql => "execute-sql",
            ToolKind::ListTables => "list-tables",
            ToolKind::DescribeTable => "describe-table",
        }
    }
}

impl fmt::Display for ToolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A declared database source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceDecl {
    pub name: String,
    pub kind: SqlDialect,
    /// Connection parameters as declared: `host`, `port`, `database`, `user`,
    /// `password_env` (name of an environment variable), or `path` for
    /// sqlite files.
    pub connection: IndexMap<String, String>,
}

/// A tool bound to one declared source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolDecl {
    pub name: String,
    pub kind: ToolKind,
    pub source: String,
}

/// A named, ordered bundle of tools.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolsetDecl {
    pub name: String,
    pub tools: Vec<String>,
}

/// The parsed and validated toolbox document.
///
/// Immutable after parse; safe to share across threads.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ToolboxConfig {
    pub sources: Vec<SourceDecl>,
    pub tools: Vec<ToolDecl>,
    pub toolsets: Vec<ToolsetDecl>,
}

/// Severity of a validation diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// One validation finding, located by a dotted path into the document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub path: String,
    pub message: String,
}

impl Diagnostic {
    fn error(path: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            path: path.into(),
            message: message.into(),
        }
    }

    fn warning(path: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}: {}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("yaml parse error at line {line}, column {column}: {message}")]
    Yaml {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("tool `{decl}` has unknown kind `{kind}` (expected execute-sql, list-tables, or describe-table, optionally prefixed by postgres-/mysql-/sqlite-)")]
    UnknownToolKind { decl: String, kind: String },
    #[error("source `{decl}` has unknown kind `{kind}` (expected postgres, mysql, or sqlite)")]
    UnknownSourceKind { decl: String, kind: String },
    #[error("invalid config:\n{}", format_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("unknown toolset `{0}`")]
    UnknownToolset(String),
}

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| format!("  {d}"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Deserialize)]
struct RawConfig {
    #[serde(default)]
    sources: IndexMap<String, RawSource>,
    #[serde(default)]
    tools: IndexMap<String, RawTool>,
    #[serde(default)]
    toolsets: IndexMap<String, Vec<String>>,
}

#[derive(Debug, Deserialize)]
struct RawSource {
    kind: String,
    #[serde(flatten)]
    connection: IndexMap<String, serde_yaml::Value>,
}

#[derive(Debug, Deserialize)]
struct RawTool {
    kind: String,
    source: Option<String>,
}

/// Splits a possibly dialect-prefixed kind string into its normalized kind
/// and the declared dialect, if any.
fn normalize_tool_kind(raw: &str) -> Option<(ToolKind, Option<SqlDialect>)> {
    let (prefix, bare) = match raw.split_once('-') {
        Some((p, rest)) if SqlDialect::parse(p).is_some() => (SqlDialect::parse(p), rest),
        _ => (None, raw),
    };
    let kind = match bare {
        "execute-sql" => ToolKind::ExecuteSql,
        "list-tables" => ToolKind::ListTables,
        "describe-table" => ToolKind::DescribeTable,
        _ => return None,
    };
    Some((kind, prefix))
}

fn scalar_to_string(v: &serde_yaml::Value) -> Option<String> {
    match v {
        serde_yaml::Value::String(s) => Some(s.clone()),
        serde_yaml::Value::Number(n) => Some(n.to_string()),
        serde_yaml::Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

/// Parses and validates a toolbox document.
///
/// Dialect-prefixed kinds (`postgres-execute-sql`) are accepted and
/// normalized; a prefix that contradicts the bound source's dialect is an
/// error. Any error-severity diagnostic fails the parse; warnings do not.
pub fn parse_config(text: &str) -> Result<ToolboxConfig, ConfigError> {
    let raw: RawConfig = serde_yaml::from_str(text).map_err(|e| {
        let loc = e.location();
        ConfigError::Yaml {
            line: loc.as_ref().map(|l| l.line()).unwrap_or(0),
            column: loc.as_ref().map(|l| l.column()).unwrap_or(0),
            message: e.to_string(),
        }
    })?;

    let mut diags = Vec::new();

    let mut sources = Vec::with_capacity(raw.sources.len());
    for (name, src) in &raw.sources {
        let kind = match SqlDialect::parse(&src.kind) {
            Some(k) => k,
            None => {
                return Err(ConfigError::UnknownSourceKind {
                    decl: name.clone(),
                    kind: src.kind.clone(),
                })
            }
        };
        let mut connection = IndexMap::new();
        for (key, value) in &src.connection {
            match scalar_to_string(value) {
                Some(s) => {
                    connection.insert(key.clone(), s);
                }
                None => diags.push(Diagnostic::error(
                    format!("sources.{name}.{key}"),
                    "connection parameters must be scalar values",
                )),
            }
        }
        sources.push(SourceDecl {
            name: name.clone(),
            kind,
            connection,
        });
    }

    let mut tools = Vec::with_capacity(raw.tools.len());
    for (name, tool) in &raw.tools {
        let (kind, declared_dialect) = match normalize_tool_kind(&tool.kind) {
            Some(pair) => pair,
            None => {
                return Err(ConfigError::UnknownToolKind {
                    decl: name.clone(),
                    kind: tool.kind.clone(),
                })
            }
        };
        let source = match &tool.source {
            Some(s) => s.clone(),
            None => {
                diags.push(Diagnostic::error(
                    format!("tools.{name}"),
                    "tool is missing a `source`",
                ));
                String::new()
            }
        };
        if let Some(declared) = declared_dialect {
            if let Some(src) = sources.iter().find(|s| s.name == source) {
                if src.kind != declared {
                    diags.push(Diagnostic::error(
                        format!("tools.{name}.kind"),
                        format!(
                            "kind is prefixed `{declared}` but source `{source}` is {}",
                            src.kind
                        ),
                    ));
                }
            }
        }
        tools.push(ToolDecl {
            name: name.clone(),
            kind,
            source,
        });
    }

    let toolsets = raw
        .toolsets
        .iter()
        .map(|(name, members)| ToolsetDecl {
            name: name.clone(),
            tools: members.clone(),
        })
        .collect();

    let config = ToolboxConfig {
        sources,
        tools,
        toolsets,
    };
    diags.extend(config.validate());

    let errors: Vec<Diagnostic> = diags
        .iter()
        .filter(|d| d.severity == Severity::Error)
        .cloned()
        .collect();
    if errors.is_empty() {
        Ok(config)
    } else {
        Err(ConfigError::Invalid(errors))
    }
}

impl ToolboxConfig {
    /// Checks every invariant and returns one diagnostic per violation.
    /// An empty list means the config is fully valid.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut diags = Vec::new();

        let mut seen = std::collections::HashSet::new();
        for src in &self.sources {
            if !is_identifier(&src.name) {
                diags.push(Diagnostic::error(
                    format!("sources.{}", src.name),
                    "source name must be a nonempty identifier without whitespace",
                ));
            }
            if !seen.insert(&src.name) {
                diags.push(Diagnostic::error(
                    format!("sources.{}", src.name),
                    format!("duplicate source name `{}`", src.name),
                ));
            }
            match src.kind {
                SqlDialect::Sqlite => {
                    if !src.connection.contains_key("path") {
                        diags.push(Diagnostic::error(
                            format!("sources.{}", src.name),
                            "sqlite source requires a `path` parameter",
                        ));
                    }
                }
                SqlDialect::Postgres | SqlDialect::Mysql => {
                    for required in ["host", "database"] {
                        if !src.connection.contains_key(required) {
                            diags.push(Diagnostic::error(
                                format!("sources.{}", src.name),
                                format!("{} source requires a `{required}` parameter", src.kind),
                            ));
                        }
                    }
                }
            }
            for key in src.connection.keys() {
                if key == "password" || key == "secret" {
                    diags.push(Diagnostic::error(
                        format!("sources.{}.{key}", src.name),
                        "secrets must not be inlined; reference an environment variable via `password_env`",
                    ));
                }
            }
        }

        let mut seen = std::collections::HashSet::new();
        for tool in &self.tools {
            if !is_identifier(&tool.name) {
                diags.push(Diagnostic::error(
                    format!("tools.{}", tool.name),
                    "tool name must be a nonempty identifier without whitespace",
                ));
            }
            if !seen.insert(&tool.name) {
                diags.push(Diagnostic::error(
                    format!("tools.{}", tool.name),
                    format!("duplicate tool name `{}`", tool.name),
                ));
            }
            if !self.sources.iter().any(|s| s.name == tool.source) {
                diags.push(Diagnostic::error(
                    format!("tools.{}.source", tool.name),
                    format!("tool `{}` references undeclared source `{}`", tool.name, tool.source),
                ));
            }
        }

        let mut seen = std::collections::HashSet::new();
        for toolset in &self.toolsets {
            if !seen.insert(&toolset.name) {
                diags.push(Diagnostic::error(
                    format!("toolsets.{}", toolset.name),
                    format!("duplicate toolset name `{}`", toolset.name),
                ));
            }
            if toolset.tools.is_empty() {
                diags.push(Diagnostic::warning(
                    format!("toolsets.{}", toolset.name),
                    format!("toolset `{}` is empty", toolset.name),
                ));
            }
            let mut members = std::collections::HashSet::new();
            for member in &toolset.tools {
                if !self.tools.iter().any(|t| &t.name == member) {
                    diags.push(Diagnostic::error(
                        format!("toolsets.{}", toolset.name),
                        format!(
                            "toolset `{}` references undeclared tool `{member}`",
                            toolset.name
                        ),
                    ));
                }
                if !members.insert(member) {
                    diags.push(Diagnostic::error(
                        format!("toolsets.{}", toolset.name),
                        format!("toolset `{}` lists tool `{member}` twice", toolset.name),
                    ));
                }
            }
        }

        diags
    }

    /// Resolves a toolset to its member tool declarations.
    ///
    /// Output follows the order tools are declared in the config, restricted
    /// to the toolset's members, and is duplicate-free.
    pub fn resolve_toolset(&self, name: &str) -> Result<Vec<&ToolDecl>, ConfigError> {
        let toolset = self
            .toolsets
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| ConfigError::UnknownToolset(name.to_string()))?;
        Ok(self
            .tools
            .iter()
            .filter(|t| toolset.tools.contains(&t.name))
            .collect())
    }

    pub fn source(&self, name: &str) -> Option<&SourceDecl> {
        self.sources.iter().find(|s| s.name == name)
    }

    pub fn tool(&self, name: &str) -> Option<&ToolDecl> {
        self.tools.iter().find(|t| t.name == name)
    }

    /// Serializes back to the external YAML document shape with normalized
    /// kinds. Reparsing the output yields a structurally equal config.
    pub fn to_yaml(&self) -> String {
        #[derive(Serialize)]
        struct OutSource<'a> {
            kind: &'static str,
            #[serde(flatten)]
            connection: &'a IndexMap<String, String>,
        }
        #[derive(Serialize)]
        struct OutTool<'a> {
            kind: &'static str,
            source: &'a str,
        }
        #[derive(Serialize)]
        struct Out<'a> {
            sources: IndexMap<&'a str, OutSource<'a>>,
            tools: IndexMap<&'a str, OutTool<'a>>,
            toolsets: IndexMap<&'a str, &'a Vec<String>>,
        }

        let out = Out {
            sources: self
                .sources
                .iter()
                .map(|s| {
                    (
                        s.name.as_str(),
                        OutSource {
                            kind: s.kind.as_str(),
                            connection: &s.connection,
                        },
                    )
                })
                .collect(),
            tools: self
                .tools
                .iter()
                .map(|t| {
                    (
                        t.name.as_str(),
                        OutTool {
                            kind: t.kind.as_str(),
                            source: &t.source,
                        },
                    )
                })
                .collect(),
            toolsets: self
                .toolsets
                .iter()
                .map(|t| (t.name.as_str(), &t.tools))
                .collect(),
        };
        serde_yaml::to_string(&out).expect("config serialization cannot fail")
    }
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(|c| c.is_whitespace() || c.is_control())
}
