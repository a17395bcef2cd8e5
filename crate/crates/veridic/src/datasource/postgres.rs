//! postgres backend over the native wire protocol.
//!
//! Arbitrary user SQL runs through the simple-query protocol, which delivers
//! every value as text; typed decoding is reserved for the catalog queries
//! this module controls. The session is switched to read-only transactions
//! as a second line of defense behind the statement classifier.

use super::{Backend, ColumnInfo, DataSourceError, ForeignKey, QueryResult, Scalar, TableSchema};
use crate::config::SourceDecl;
use postgres::{Client, NoTls, SimpleQueryMessage};
use std::time::Duration;

pub(crate) struct PostgresBackend {
    client: Client,
}

impl PostgresBackend {
    pub(crate) fn connect(decl: &SourceDecl) -> Result<Self, DataSourceError> {
        let get = |key: &str| decl.connection.get(key).map(String::as_str);
        let mut config = postgres::Config::new();
        config.host(get("host").unwrap_or("localhost"));
        if let Some(port) = get("port") {
            let port = port.parse::<u16>().map_err(|_| DataSourceError::Connection {
                source: decl.name.clone(),
                message: format!("invalid port `{port}`"),
            })?;
            config.port(port);
        }
        if let Some(db) = get("database") {
            config.dbname(db);
        }
        if let Some(user) = get("user") {
            config.user(user);
        }
        if let Some(var) = get("password_env") {
            let password =
                std::env::var(var).map_err(|_| DataSourceError::MissingEnv(var.to_string()))?;
            config.password(&password);
        }
        config.connect_timeout(Duration::from_secs(10));

        let mut client = config.connect(NoTls).map_err(|e| DataSourceError::Connection {
            source: decl.name.clone(),
            message: e.to_string(),
        })?;
        client
            .batch_execute("SET default_transaction_read_only = on")
            .map_err(|e| DataSourceError::Connection {
                source: decl.name.clone(),
                message: e.to_string(),
            })?;
        Ok(PostgresBackend { client })
    }

    fn dialect_err(e: postgres::Error) -> DataSourceError {
        DataSourceError::Dialect {
            dialect: "postgres".to_string(),
            message: e.to_string(),
        }
    }
}

impl Backend for PostgresBackend {
    fn execute(&mut self, sql: &str, row_cap: usize) -> Result<QueryResult, DataSourceError> {
        let messages = self.client.simple_query(sql).map_err(Self::dialect_err)?;
        let mut columns: Vec<String> = Vec::new();
        let mut rows: Vec<Vec<Scalar>> = Vec::new();
        let mut truncated = false;
        for message in messages {
            match message {
                SimpleQueryMessage::RowDescription(desc) => {
                    columns = desc.iter().map(|c| c.name().to_string()).collect();
                }
                SimpleQueryMessage::Row(row) => {
                    if columns.is_empty() {
                        columns = row.columns().iter().map(|c| c.name().to_string()).collect();
                    }
                    if rows.len() == row_cap {
                        truncated = true;
                        continue;
                    }
                    let decoded = (0..row.len())
                        .map(|i| match row.get(i) {
                            Some(text) => Scalar::Text(text.to_string()),
                            None => Scalar::Null,
                        })
                        .collect();
                    rows.push(decoded);
                }
                _ => {}
            }
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
        let rows = self
            .client
            .query(
                "SELECT table_name FROM information_schema.tables
                 WHERE table_schema NOT IN ('pg_catalog', 'information_schema')
                   AND table_type = 'BASE TABLE'
                 ORDER BY table_name",
                &[],
            )
            .map_err(Self::dialect_err)?;
        Ok(rows.iter().map(|r| r.get::<_, String>(0)).collect())
    }

    fn describe_table(
        &mut self,
        source: &str,
        table: &str,
    ) -> Result<TableSchema, DataSourceError> {
        let column_rows = self
            .client
            .query(
                "SELECT column_name, data_type, is_nullable
                 FROM information_schema.columns
                 WHERE table_name = $1
                   AND table_schema NOT IN ('pg_catalog', 'information_schema')
                 ORDER BY ordinal_position",
                &[&table],
            )
            .map_err(Self::dialect_err)?;
        if column_rows.is_empty() {
            return Err(DataSourceError::UnknownTable {
                table: table.to_string(),
            });
        }

        let pk_rows = self
            .client
            .query(
                "SELECT kcu.column_name
                 FROM information_schema.table_constraints tc
                 JOIN information_schema.key_column_usage kcu
                   ON tc.constraint_name = kcu.constraint_name
                  AND tc.table_schema = kcu.table_schema
                 WHERE tc.constraint_type = 'PRIMARY KEY' AND tc.table_name = $1",
                &[&table],
            )
            .map_err(Self::dialect_err)?;
        let pk_columns: Vec<String> = pk_rows.iter().map(|r| r.get::<_, String>(0)).collect();

        let columns = column_rows
            .iter()
            .map(|row| {
                let name: String = row.get(0);
                ColumnInfo {
                    is_primary_key: pk_columns.contains(&name),
                    name,
                    declared_type: row.get(1),
                    nullable: row.get::<_, String>(2) == "YES",
                }
            })
            .collect();

        let fk_rows = self
            .client
            .query(
                "SELECT kcu.column_name, ccu.table_name, ccu.column_name
                 FROM information_schema.table_constraints tc
                 JOIN information_schema.key_column_usage kcu
                   ON tc.constraint_name = kcu.constraint_name
                  AND tc.table_schema = kcu.table_schema
                 JOIN information_schema.constraint_column_usage ccu
                   ON tc.constraint_name = ccu.constraint_name
                  AND tc.table_schema = ccu.table_schema
                 WHERE tc.constraint_type = 'FOREIGN KEY' AND tc.table_name = $1",
                &[&table],
            )
            .map_err(Self::dialect_err)?;
        let foreign_keys = fk_rows
            .iter()
            .map(|row| ForeignKey {
                column: row.get(0),
                referenced_table: row.get(1),
                referenced_column: row.get(2),
            })
            .collect();

        Ok(TableSchema {
            source: source.to_string(),
            table: table.to_string(),
            columns,
            foreign_keys,
        })
    }
}
