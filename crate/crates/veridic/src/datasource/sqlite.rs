//! sqlite backend: reads a database file, opened read-only with
//! `query_only` set as a second line of defense.

use super::compat::rewrite_for_sqlite;
use super::{Backend, ColumnInfo, DataSourceError, ForeignKey, QueryResult, Scalar, TableSchema};
use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};
use std::path::Path;

pub(crate) struct SqliteBackend {
    conn: Connection,
}

impl SqliteBackend {
    pub(crate) fn open(source: &str, path: &Path) -> Result<Self, DataSourceError> {
        let conn = Connection::open_with_flags(
            path,
            OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX,
        )
        .map_err(|e| DataSourceError::Connection {
            source: source.to_string(),
            message: format!("{e} (path: {})", path.display()),
        })?;
        conn.pragma_update(None, "query_only", true)
            .map_err(|e| DataSourceError::Connection {
                source: source.to_string(),
                message: e.to_string(),
            })?;
        Ok(SqliteBackend { conn })
    }

    fn dialect_err(e: rusqlite::Error) -> DataSourceError {
        DataSourceError::Dialect {
            dialect: "sqlite".to_string(),
            message: e.to_string(),
        }
    }
}

fn decode(value: ValueRef<'_>) -> Scalar {
    match value {
        ValueRef::Null => Scalar::Null,
        ValueRef::Integer(i) => Scalar::Int(i),
        ValueRef::Real(f) => Scalar::from_f64(f),
        ValueRef::Text(t) => Scalar::Text(String::from_utf8_lossy(t).into_owned()),
        ValueRef::Blob(b) => Scalar::Text(format!("x'{}'", hex::encode(b))),
    }
}

impl Backend for SqliteBackend {
    fn execute(&mut self, sql: &str, row_cap: usize) -> Result<QueryResult, DataSourceError> {
        let rewritten = rewrite_for_sqlite(sql);
        let mut stmt = self
            .conn
            .prepare(rewritten.trim())
            .map_err(Self::dialect_err)?;
        let columns: Vec<String> = stmt.column_names().iter().map(|c| c.to_string()).collect();
        let n_cols = columns.len();

        let mut rows = Vec::new();
        let mut truncated = false;
        let mut raw = stmt.query([]).map_err(Self::dialect_err)?;
        while let Some(row) = raw.next().map_err(Self::dialect_err)? {
            if rows.len() == row_cap {
                truncated = true;
                break;
            }
            let mut decoded = Vec::with_capacity(n_cols);
            for i in 0..n_cols {
                decoded.push(decode(row.get_ref(i).map_err(Self::dialect_err)?));
            }
            rows.push(decoded);
        }

        let row_count = rows.len();
        Ok(QueryResult {
            columns,
            rows,
            row_count,
            truncated,
            elapsed: Default::default(),
        })
    }

    fn list_tables(&mut self) -> Result<Vec<String>, DataSourceError> {
        let mut stmt = self
            .conn
            .prepare(
                "SELECT name FROM sqlite_schema
                 WHERE type = 'table' AND name NOT LIKE 'sqlite_%'
                 ORDER BY name",
            )
            .map_err(Self::dialect_err)?;
        let names = stmt
            .query_map([], |row| row.get::<_, String>(0))
            .map_err(Self::dialect_err)?
            .collect::<Result<Vec<_>, _>>()
            .map_err(Self::dialect_err)?;
        Ok(names)
    }

    fn describe_table(
        &mut self,
        source: &str,
        table: &str,
    ) -> Result<TableSchema, DataSourceError> {
        let mut stmt = self
            .conn
            .prepare("SELECT name, type, \"notnull\", pk FROM pragma_table_info(?1) ORDER BY cid")
            .map_err(Self::dialect_err)?;
        let columns: Vec<ColumnInfo> = stmt
            .query_map([table], |row| {
                Ok(ColumnInfo {
                    name: row.get(0)?,
                    declared_type: row.get(1)?,
                    nullable: row.get::<_, i64>(2)? == 0,
                    is_primary_key: row.get::<_, i64>(3)? > 0,
                })
            })
            .map_err(Self::dialect_err)?
            .collect::<Result<Vec<_>, _>>()
            .map_err(Self::dialect_err)?;
        if columns.is_empty() {
            return Err(DataSourceError::UnknownTable {
                table: table.to_string(),
            });
        }

        let mut stmt = self
            .conn
            .prepare(
                "SELECT \"from\", \"table\", \"to\" FROM pragma_foreign_key_list(?1)
                 ORDER BY id, seq",
            )
            .map_err(Self::dialect_err)?;
        let foreign_keys = stmt
            .query_map([table], |row| {
                Ok(ForeignKey {
                    column: row.get(0)?,
                    referenced_table: row.get(1)?,
                    referenced_column: row.get::<_, Option<String>>(2)?.unwrap_or_default(),
                })
            })
            .map_err(Self::dialect_err)?
            .collect::<Result<Vec<_>, _>>()
            .map_err(Self::dialect_err)?;

        Ok(TableSchema {
            source: source.to_string(),
            table: table.to_string(),
            columns,
            foreign_keys,
        })
    }
}
