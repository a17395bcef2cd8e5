//! mysql backend over the native wire protocol, session pinned to read-only
//! transactions.

use super::{Backend, ColumnInfo, DataSourceError, ForeignKey, QueryResult, Scalar, TableSchema};
use crate::config::SourceDecl;
use mysql::prelude::Queryable;
use mysql::{Conn, OptsBuilder, Value};

pub(crate) struct MysqlBackend {
    conn: Conn,
}

impl MysqlBackend {
    pub(crate) fn connect(decl: &SourceDecl) -> Result<Self, DataSourceError> {
        let get = |key: &str| decl.connection.get(key).map(String::as_str);
        let mut opts = OptsBuilder::new()
            .ip_or_hostname(get("host"))
            .db_name(get("database"))
            .user(get("user"));
        if let Some(port) = get("port") {
            let port = port.parse::<u16>().map_err(|_| DataSourceError::Connection {
                source: decl.name.clone(),
                message: format!("invalid port `{port}`"),
            })?;
            opts = opts.tcp_port(port);
        }
        if let Some(var) = get("password_env") {
            let password =
                std::env::var(var).map_err(|_| DataSourceError::MissingEnv(var.to_string()))?;
            opts = opts.pass(Some(password));
        }

        let mut conn = Conn::new(opts).map_err(|e| DataSourceError::Connection {
            source: decl.name.clone(),
            message: e.to_string(),
        })?;
        conn.query_drop("SET SESSION TRANSACTION READ ONLY")
            .map_err(|e| DataSourceError::Connection {
                source: decl.name.clone(),
                message: e.to_string(),
            })?;
        Ok(MysqlBackend { conn })
    }

    fn dialect_err(e: mysql::Error) -> DataSourceError {
        DataSourceError::Dialect {
            dialect: "mysql".to_string(),
            message: e.to_string(),
        }
    }
}

fn decode(value: Value) -> Scalar {
    match value {
        Value::NULL => Scalar::Null,
        Value::Bytes(b) => Scalar::Text(String::from_utf8_lossy(&b).into_owned()),
        Value::Int(i) => Scalar::Int(i),
        Value::UInt(u) => i64::try_from(u)
            .map(Scalar::Int)
            .unwrap_or_else(|_| Scalar::Decimal(u.to_string())),
        Value::Float(f) => Scalar::from_f64(f64::from(f)),
        Value::Double(d) => Scalar::from_f64(d),
        Value::Date(y, mo, d, h, mi, s, _us) => {
            if (h, mi, s) == (0, 0, 0) {
                Scalar::Text(format!("{y:04}-{mo:02}-{d:02}"))
            } else {
                Scalar::Text(format!("{y:04}-{mo:02}-{d:02} {h:02}:{mi:02}:{s:02}"))
            }
        }
        Value::Time(neg, days, h, mi, s, _us) => {
            let sign = if neg { "-" } else { "" };
            let hours = u32::from(h) + days * 24;
            Scalar::Text(format!("{sign}{hours:02}:{mi:02}:{s:02}"))
        }
    }
}

impl Backend for MysqlBackend {
    fn execute(&mut self, sql: &str, row_cap: usize) -> Result<QueryResult, DataSourceError> {
        let result = self.conn.query_iter(sql).map_err(Self::dialect_err)?;
        let columns: Vec<String> = result
            .columns()
            .as_ref()
            .iter()
            .map(|c| c.name_str().into_owned())
            .collect();
        let mut rows: Vec<Vec<Scalar>> = Vec::new();
        let mut truncated = false;
        for row in result {
            let row = row.map_err(Self::dialect_err)?;
            if rows.len() == row_cap {
                truncated = true;
                continue;
            }
            rows.push(row.unwrap().into_iter().map(decode).collect());
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
        self.conn
            .query(
                "SELECT table_name FROM information_schema.tables
                 WHERE table_schema = DATABASE() AND table_type = 'BASE TABLE'
                 ORDER BY table_name",
            )
            .map_err(Self::dialect_err)
    }

    fn describe_table(
        &mut self,
        source: &str,
        table: &str,
    ) -> Result<TableSchema, DataSourceError> {
        let column_rows: Vec<(String, String, String, String)> = self
            .conn
            .exec(
                "SELECT column_name, column_type, is_nullable, column_key
                 FROM information_schema.columns
                 WHERE table_schema = DATABASE() AND table_name = ?
                 ORDER BY ordinal_position",
                (table,),
            )
            .map_err(Self::dialect_err)?;
        if column_rows.is_empty() {
            return Err(DataSourceError::UnknownTable {
                table: table.to_string(),
            });
        }
        let columns = column_rows
            .into_iter()
            .map(|(name, declared_type, nullable, key)| ColumnInfo {
                name,
                declared_type,
                nullable: nullable == "YES",
                is_primary_key: key == "PRI",
            })
            .collect();

        let fk_rows: Vec<(String, String, String)> = self
            .conn
            .exec(
                "SELECT column_name, referenced_table_name, referenced_column_name
                 FROM information_schema.key_column_usage
                 WHERE table_schema = DATABASE() AND table_name = ?
                   AND referenced_table_name IS NOT NULL
                 ORDER BY ordinal_position",
                (table,),
            )
            .map_err(Self::dialect_err)?;
        let foreign_keys = fk_rows
            .into_iter()
            .map(|(column, referenced_table, referenced_column)| ForeignKey {
                column,
                referenced_table,
                referenced_column,
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
