use std::time::Duration;

use postgres::{Client, Config, NoTls};
use serde_json::Value;

use super::{parse_explain_json_from, ColumnInfo, IngestError, PlanSource, RawPlan, SchemaInfo, TableInfo};

pub const DEFAULT_STATEMENT_TIMEOUT: Duration = Duration::from_secs(60);
const DEFAULT_CONNECT_TIMEOUT: Duration = Duration::from_secs(10);

/// A single-owner PostgreSQL session.
pub struct DatabaseConnection {
    client: Client,
    statement_timeout: Duration,
}

impl std::fmt::Debug for DatabaseConnection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DatabaseConnection")
            .field("closed", &self.client.is_closed())
            .field("statement_timeout", &self.statement_timeout)
            .finish()
    }
}

impl DatabaseConnection {
    /// Connects using a PostgreSQL URI (`postgresql://...`) or key/value DSN.
    pub fn connect(dsn: &str) -> Result<Self, IngestError> {
        let mut config: Config = dsn
            .parse()
            .map_err(|e| IngestError::ConnectionFailure(format!("invalid connection string: {e}")))?;
        if config.get_connect_timeout().is_none() {
            config.connect_timeout(DEFAULT_CONNECT_TIMEOUT);
        }
        let client = config
            .connect(NoTls)
            .map_err(|e| IngestError::ConnectionFailure(describe(&e)))?;
        Ok(Self {
            client,
            statement_timeout: DEFAULT_STATEMENT_TIMEOUT,
        })
    }

    pub fn with_statement_timeout(mut self, timeout: Duration) -> Self {
        self.statement_timeout = timeout;
        self
    }

    pub fn is_closed(&self) -> bool {
        self.client.is_closed()
    }
}

/// The error and its sources, joined with `: `.
fn describe(e: &dyn std::error::Error) -> String {
    let mut out = e.to_string();
    let mut source = e.source();
    while let Some(s) = source {
        let part = s.to_string();
        if !out.contains(&part) {
            out.push_str(": ");
            out.push_str(&part);
        }
        source = s.source();
    }
    out
}

fn map_pg_error(e: postgres::Error) -> IngestError {
    match e.as_db_error() {
        Some(db) if !e.is_closed() => IngestError::QueryError(db.message().to_string()),
        _ => IngestError::ConnectionFailure(describe(&e)),
    }
}

/// Runs `EXPLAIN (FORMAT JSON)` (with `ANALYZE` when requested) and returns
/// the server's JSON document as text.
///
/// The statement runs inside a transaction that is always rolled back, so
/// ANALYZE of a data-modifying statement leaves no trace.
pub fn fetch_plan_text(conn: &mut DatabaseConnection, sql: &str, analyze: bool) -> Result<String, IngestError> {
    if conn.client.is_closed() {
        return Err(IngestError::ConnectionFailure("connection is closed".into()));
    }
    let sql = sql.trim().trim_end_matches(';').trim_end();
    let options = if analyze { "ANALYZE, FORMAT JSON" } else { "FORMAT JSON" };
    let timeout_ms = conn.statement_timeout.as_millis();

    let mut tx = conn.client.transaction().map_err(map_pg_error)?;
    tx.batch_execute(&format!("SET LOCAL statement_timeout = {timeout_ms}"))
        .map_err(map_pg_error)?;
    let row = tx
        .query_one(&format!("EXPLAIN ({options}) {sql}"), &[])
        .map_err(map_pg_error)?;
    let doc: Value = row.try_get(0).map_err(map_pg_error)?;
    tx.rollback().map_err(map_pg_error)?;

    serde_json::to_string_pretty(&doc).map_err(|e| IngestError::MalformedPlan(e.to_string()))
}

pub fn fetch_plan(conn: &mut DatabaseConnection, sql: &str, analyze: bool) -> Result<RawPlan, IngestError> {
    let text = fetch_plan_text(conn, sql, analyze)?;
    parse_explain_json_from(text.as_bytes(), PlanSource::LiveDatabase)
}

const SCHEMA_QUERY: &str = "\
SELECT t.table_schema, t.table_name, c.column_name, c.data_type
FROM information_schema.tables t
LEFT JOIN information_schema.columns c
  ON c.table_schema = t.table_schema AND c.table_name = t.table_name
WHERE t.table_type = 'BASE TABLE'
  AND t.table_schema NOT IN ('pg_catalog', 'information_schema')
  AND t.table_schema NOT LIKE 'pg_toast%'
ORDER BY t.table_schema, t.table_name, c.ordinal_position";

/// Lists user tables with their columns in ordinal order. Tables outside
/// `public` are schema-qualified.
pub fn fetch_schema(conn: &mut DatabaseConnection) -> Result<SchemaInfo, IngestError> {
    if conn.client.is_closed() {
        return Err(IngestError::ConnectionFailure("connection is closed".into()));
    }
    let rows = conn.client.query(SCHEMA_QUERY, &[]).map_err(map_pg_error)?;
    let mut schema = SchemaInfo::default();
    for row in rows {
        let table_schema: String = row.get(0);
        let table_name: String = row.get(1);
        let column: Option<String> = row.get(2);
        let data_type: Option<String> = row.get(3);
        let name = if table_schema == "public" {
            table_name
        } else {
            format!("{table_schema}.{table_name}")
        };
        if schema.tables.last().map(|t| &t.table_name) != Some(&name) {
            schema.tables.push(TableInfo {
                table_name: name,
                columns: Vec::new(),
            });
        }
        if let (Some(column_name), Some(type_name)) = (column, data_type) {
            schema
                .tables
                .last_mut()
                .expect("pushed above")
                .columns
                .push(ColumnInfo { column_name, type_name });
        }
    }
    Ok(schema)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unreachable_server_is_a_connection_failure() {
        // port 1 on loopback refuses connections
        let err = DatabaseConnection::connect("postgresql://nobody@127.0.0.1:1/none?connect_timeout=2").unwrap_err();
        assert!(matches!(err, IngestError::ConnectionFailure(_)), "{err:?}");
    }

    #[test]
    fn garbage_dsn_is_a_connection_failure() {
        let err = DatabaseConnection::connect("postgresql://[bad").unwrap_err();
        assert_eq!(err.code(), "ConnectionFailure");
    }
}
