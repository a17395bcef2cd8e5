//! Read-only SQL execution and schema introspection over sqlite, postgres,
//! and mysql behind one dialect-agnostic interface.
//!
//! Every statement is classified before any connection work; anything not
//! provably a single SELECT/CTE is rejected. Sessions are additionally
//! opened read-only where the dialect supports it, so the grounding data
//! can never be changed by this layer.

mod classify;
mod compat;
mod mysql;
mod postgres;
mod sqlite;

pub use classify::{classify_statement, StatementKind};
pub use compat::rewrite_for_sqlite;

use crate::config::{SourceDecl, SqlDialect, ToolboxConfig};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};
use thiserror::Error;

/// A single result value in the five-kind scalar model.
///
/// Decimals carry their exact textual representation so results compare
/// byte-stably across capture and re-execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Scalar {
    Null,
    Bool(bool),
    Int(i64),
    Decimal(String),
    Text(String),
}

impl Scalar {
    /// Renders the value the way agents and reports see it: `NULL` for
    /// nulls, plain digits for numbers, no locale formatting.
    pub fn render(&self) -> String {
        match self {
            Scalar::Null => "NULL".to_string(),
            Scalar::Bool(b) => b.to_string(),
            Scalar::Int(i) => i.to_string(),
            Scalar::Decimal(s) => s.clone(),
            Scalar::Text(s) => s.clone(),
        }
    }

    pub(crate) fn from_f64(f: f64) -> Scalar {
        Scalar::Decimal(format!("{f}"))
    }
}

/// Rows returned by [`SourceHandle::execute_sql`], capped at the requested
/// row limit.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct QueryResult {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Scalar>>,
    pub row_count: usize,
    pub truncated: bool,
    /// Wall-clock execution time. Excluded from serialization and equality
    /// so captured results stay byte-stable across replays.
    #[serde(skip)]
    pub elapsed: Duration,
}

impl PartialEq for QueryResult {
    fn eq(&self, other: &Self) -> bool {
        self.columns == other.columns
            && self.rows == other.rows
            && self.row_count == other.row_count
            && self.truncated == other.truncated
    }
}

impl QueryResult {
    /// Rows rendered to strings and sorted lexicographically, for
    /// order-insensitive comparison between capture and re-execution.
    pub fn canonical_rows(&self) -> Vec<Vec<String>> {
        let mut rendered: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|row| row.iter().map(Scalar::render).collect())
            .collect();
        rendered.sort();
        rendered
    }
}

/// One column of an introspected table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnInfo {
    pub name: String,
    pub declared_type: String,
    pub nullable: bool,
    pub is_primary_key: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForeignKey {
    pub column: String,
    pub referenced_table: String,
    pub referenced_column: String,
}

/// Introspected structure of one table, columns in ordinal order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSchema {
    pub source: String,
    pub table: String,
    pub columns: Vec<ColumnInfo>,
    pub foreign_keys: Vec<ForeignKey>,
}

#[derive(Debug, Error)]
pub enum DataSourceError {
    #[error("read-only violation: statement classified as {kind:?}; only a single SELECT/CTE statement is allowed")]
    ReadOnlyViolation { kind: StatementKind },
    #[error("{dialect} error: {message}")]
    Dialect { dialect: String, message: String },
    #[error("connection to source `{source}` failed: {message}")]
    Connection { source: String, message: String },
    #[error("unknown table `{table}`")]
    UnknownTable { table: String },
    #[error("environment variable `{0}` is not set")]
    MissingEnv(String),
    #[error("source `{0}` is closed")]
    Closed(String),
    #[error("unknown source `{0}`")]
    UnknownSource(String),
}

pub(crate) trait Backend: Send {
    fn execute(&mut self, sql: &str, row_cap: usize) -> Result<QueryResult, DataSourceError>;
    fn list_tables(&mut self) -> Result<Vec<String>, DataSourceError>;
    fn describe_table(&mut self, source: &str, table: &str)
        -> Result<TableSchema, DataSourceError>;
}

/// A handle to one declared source with a lazily opened, internally
/// synchronized connection. Concurrent calls are serialized.
pub struct SourceHandle {
    decl: SourceDecl,
    base_dir: PathBuf,
    backend: Mutex<Option<Box<dyn Backend>>>,
    closed: AtomicBool,
}

impl SourceHandle {
    /// Creates a handle without connecting. `base_dir` anchors relative
    /// sqlite paths (normally the config file's directory).
    pub fn new(decl: SourceDecl, base_dir: impl Into<PathBuf>) -> Self {
        SourceHandle {
            decl,
            base_dir: base_dir.into(),
            backend: Mutex::new(None),
            closed: AtomicBool::new(false),
        }
    }

    pub fn decl(&self) -> &SourceDecl {
        &self.decl
    }

    pub fn name(&self) -> &str {
        &self.decl.name
    }

    /// Filesystem path of a sqlite source, resolved against the base dir.
    pub fn sqlite_path(&self) -> Option<PathBuf> {
        if self.decl.kind != SqlDialect::Sqlite {
            return None;
        }
        let raw = Path::new(self.decl.connection.get("path")?);
        Some(if raw.is_absolute() {
            raw.to_path_buf()
        } else {
            self.base_dir.join(raw)
        })
    }

    /// Drops the live connection and refuses further work.
    pub fn close(&self) {
        self.closed.store(true, Ordering::SeqCst);
        *self.backend.lock().expect("backend lock poisoned") = None;
    }

    fn with_backend<R>(
        &self,
        f: impl FnOnce(&mut dyn Backend) -> Result<R, DataSourceError>,
    ) -> Result<R, DataSourceError> {
        if self.closed.load(Ordering::SeqCst) {
            return Err(DataSourceError::Closed(self.decl.name.clone()));
        }
        let mut guard = self.backend.lock().expect("backend lock poisoned");
        if guard.is_none() {
            *guard = Some(self.connect()?);
        }
        f(guard.as_mut().expect("backend just initialized").as_mut())
    }

    fn connect(&self) -> Result<Box<dyn Backend>, DataSourceError> {
        match self.decl.kind {
            SqlDialect::Sqlite => {
                let path = self.sqlite_path().ok_or_else(|| DataSourceError::Connection {
                    source: self.decl.name.clone(),
                    message: "sqlite source has no `path` parameter".into(),
                })?;
                Ok(Box::new(sqlite::SqliteBackend::open(&self.decl.name, &path)?))
            }
            SqlDialect::Postgres => Ok(Box::new(postgres::PostgresBackend::connect(&self.decl)?)),
            SqlDialect::Mysql => Ok(Box::new(mysql::MysqlBackend::connect(&self.decl)?)),
        }
    }

    /// Executes a read-only statement, returning at most `row_cap` rows.
    ///
    /// Statements that do not classify as a single SELECT/CTE are rejected
    /// before any connection work. Dialect errors come back verbatim with
    /// the dialect name attached, since agents consume them as feedback.
    pub fn execute_sql(&self, sql: &str, row_cap: usize) -> Result<QueryResult, DataSourceError> {
        let kind = classify_statement(sql);
        if kind != StatementKind::ReadOnly {
            return Err(DataSourceError::ReadOnlyViolation { kind });
        }
        let start = Instant::now();
        let mut result = self.with_backend(|b| b.execute(sql, row_cap))?;
        result.elapsed = start.elapsed();
        debug_assert!(result.rows.len() <= row_cap);
        Ok(result)
    }

    /// All user tables in lexicographic order; system catalogs excluded.
    pub fn list_tables(&self) -> Result<Vec<String>, DataSourceError> {
        self.with_backend(|b| b.list_tables())
    }

    /// Columns in ordinal order plus declared foreign keys.
    pub fn describe_table(&self, table: &str) -> Result<TableSchema, DataSourceError> {
        let name = self.decl.name.clone();
        self.with_backend(|b| b.describe_table(&name, table))
    }
}

/// One lazily connected handle per declared source.
pub struct SourcePool {
    handles: IndexMap<String, Arc<SourceHandle>>,
}

impl SourcePool {
    pub fn from_config(config: &ToolboxConfig, base_dir: impl AsRef<Path>) -> Self {
        let base = base_dir.as_ref();
        SourcePool {
            handles: config
                .sources
                .iter()
                .map(|decl| {
                    (
                        decl.name.clone(),
                        Arc::new(SourceHandle::new(decl.clone(), base)),
                    )
                })
                .collect(),
        }
    }

    pub fn handle(&self, name: &str) -> Result<Arc<SourceHandle>, DataSourceError> {
        self.handles
            .get(name)
            .cloned()
            .ok_or_else(|| DataSourceError::UnknownSource(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.handles.keys().map(String::as_str)
    }

    pub fn handles(&self) -> impl Iterator<Item = &Arc<SourceHandle>> {
        self.handles.values()
    }

    pub fn is_empty(&self) -> bool {
        self.handles.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use indexmap::IndexMap;

    fn sqlite_decl(name: &str, path: &str) -> SourceDecl {
        let mut connection = IndexMap::new();
        connection.insert("path".to_string(), path.to_string());
        SourceDecl {
            name: name.to_string(),
            kind: SqlDialect::Sqlite,
            connection,
        }
    }

    fn fixture_db(dir: &std::path::Path) -> std::path::PathBuf {
        let path = dir.join("t.db");
        let conn = rusqlite::Connection::open(&path).unwrap();
        conn.execute_batch(
            "CREATE TABLE crime_data (
                 id INTEGER PRIMARY KEY,
                 offense_date TEXT,
                 offense_category TEXT NOT NULL
             );
             INSERT INTO crime_data VALUES
                 (1, '2023-03-04', 'PROPERTY CRIME'),
                 (2, '2023-05-09', 'VIOLENT CRIME'),
                 (3, '2024-01-15', 'PROPERTY CRIME');",
        )
        .unwrap();
        path
    }

    #[test]
    fn constant_select() {
        let dir = tempfile::tempdir().unwrap();
        let path = fixture_db(dir.path());
        let handle = SourceHandle::new(sqlite_decl("t", path.to_str().unwrap()), dir.path());
        let result = handle.execute_sql("SELECT 1 AS x", 50).unwrap();
        assert_eq!(result.columns, vec!["x"]);
        assert_eq!(result.rows, vec![vec![Scalar::Int(1)]]);
        assert!(!result.truncated);
    }

    #[test]
    fn mutation_rejected_without_connection() {
        // A handle whose path does not even exist: the guard must fire
        // before any connection attempt.
        let handle = SourceHandle::new(sqlite_decl("t", "/nonexistent/nope.db"), "/");
        let err = handle.execute_sql("DELETE FROM crime_data", 50).unwrap_err();
        assert!(matches!(err, DataSourceError::ReadOnlyViolation { .. }));
    }

    #[test]
    fn rows_capped_with_truncated_flag() {
        let dir = tempfile::tempdir().unwrap();
        let path = fixture_db(dir.path());
        let handle = SourceHandle::new(sqlite_decl("t", path.to_str().unwrap()), dir.path());
        let result = handle.execute_sql("SELECT * FROM crime_data", 2).unwrap();
        assert_eq!(result.rows.len(), 2);
        assert_eq!(result.row_count, 2);
        assert!(result.truncated);
        let full = handle.execute_sql("SELECT * FROM crime_data", 3).unwrap();
        assert!(!full.truncated);
    }

    #[test]
    fn list_tables_is_lexicographic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("multi.db");
        let conn = rusqlite::Connection::open(&path).unwrap();
        conn.execute_batch("CREATE TABLE zebra(a); CREATE TABLE apple(a);")
            .unwrap();
        drop(conn);
        let handle = SourceHandle::new(sqlite_decl("m", path.to_str().unwrap()), dir.path());
        assert_eq!(handle.list_tables().unwrap(), vec!["apple", "zebra"]);
    }

    #[test]
    fn empty_database_lists_no_tables() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.db");
        rusqlite::Connection::open(&path).unwrap();
        let handle = SourceHandle::new(sqlite_decl("e", path.to_str().unwrap()), dir.path());
        assert!(handle.list_tables().unwrap().is_empty());
    }

    #[test]
    fn closed_handle_reports_connection_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = fixture_db(dir.path());
        let handle = SourceHandle::new(sqlite_decl("t", path.to_str().unwrap()), dir.path());
        handle.execute_sql("SELECT 1", 50).unwrap();
        handle.close();
        let err = handle.list_tables().unwrap_err();
        assert!(matches!(err, DataSourceError::Closed(_)));
    }

    #[test]
    fn describe_table_reports_columns_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = fixture_db(dir.path());
        let handle = SourceHandle::new(sqlite_decl("t", path.to_str().unwrap()), dir.path());
        let schema = handle.describe_table("crime_data").unwrap();
        let names: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, vec!["id", "offense_date", "offense_category"]);
        let date = &schema.columns[1];
        assert!(date.nullable);
        assert!(!date.is_primary_key);
        assert!(schema.columns[0].is_primary_key);
        assert!(schema.foreign_keys.is_empty());
    }

    #[test]
    fn describe_unknown_table_names_it() {
        let dir = tempfile::tempdir().unwrap();
        let path = fixture_db(dir.path());
        let handle = SourceHandle::new(sqlite_decl("t", path.to_str().unwrap()), dir.path());
        let err = handle.describe_table("nope").unwrap_err();
        assert!(matches!(err, DataSourceError::UnknownTable { ref table } if table == "nope"));
    }

    #[test]
    fn foreign_keys_populated_when_declared() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fk.db");
        let conn = rusqlite::Connection::open(&path).unwrap();
        conn.execute_batch(
            "CREATE TABLE category (id INTEGER PRIMARY KEY, label TEXT);
             CREATE TABLE incident (
                 id INTEGER PRIMARY KEY,
                 category_id INTEGER REFERENCES category(id)
             );",
        )
        .unwrap();
        drop(conn);
        let handle = SourceHandle::new(sqlite_decl("fk", path.to_str().unwrap()), dir.path());
        let schema = handle.describe_table("incident").unwrap();
        assert_eq!(
            schema.foreign_keys,
            vec![ForeignKey {
                column: "category_id".into(),
                referenced_table: "category".into(),
                referenced_column: "id".into(),
            }]
        );
    }

    #[test]
    fn dialect_error_text_is_preserved() {
        let dir = tempfile::tempdir().unwrap();
        let path = fixture_db(dir.path());
        let handle = SourceHandle::new(sqlite_decl("t", path.to_str().unwrap()), dir.path());
        let err = handle.execute_sql("SELECT * FROM missing_table", 50).unwrap_err();
        match err {
            DataSourceError::Dialect { dialect, message } => {
                assert_eq!(dialect, "sqlite");
                assert!(message.contains("missing_table"), "{message}");
            }
            other => panic!("expected dialect error, got {other}"),
        }
    }

    #[test]
    fn scalar_decoding_covers_the_five_kinds() {
        let dir = tempfile::tempdir().unwrap();
        let path = fixture_db(dir.path());
        let handle = SourceHandle::new(sqlite_decl("t", path.to_str().unwrap()), dir.path());
        let result = handle
            .execute_sql("SELECT NULL AS a, 7 AS b, 2.5 AS c, 'hi' AS d", 50)
            .unwrap();
        assert_eq!(
            result.rows[0],
            vec![
                Scalar::Null,
                Scalar::Int(7),
                Scalar::Decimal("2.5".into()),
                Scalar::Text("hi".into()),
            ]
        );
    }

    #[test]
    fn unknown_source_lookup_fails() {
        let pool = SourcePool::from_config(&ToolboxConfig::default(), "/");
        assert!(matches!(
            pool.handle("ghost"),
            Err(DataSourceError::UnknownSource(_))
        ));
    }
}
