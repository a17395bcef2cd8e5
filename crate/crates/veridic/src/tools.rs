//! Tool registry and invocation: database primitives (and wrapped agents)
//! exposed as named tools with declared parameter schemas.
//!
//! `invoke` is total. Unknown tools, bad arguments, and invoker failures all
//! come back as error outcomes with actionable text, never as panics or
//! errors — the reasoning loop must always be able to continue on whatever
//! a tool returns.

use crate::datasource::QueryResult;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Scalar kind of one tool parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    String,
    Integer,
    Number,
    Boolean,
}

impl ParamKind {
    fn json_type(&self) -> &'static str {
        match self {
            ParamKind::String => "string",
            ParamKind::Integer => "integer",
            ParamKind::Number => "number",
            ParamKind::Boolean => "boolean",
        }
    }

    fn matches(&self, value: &Value) -> bool {
        match self {
            ParamKind::String => value.is_string(),
            ParamKind::Integer => value.is_i64() || value.is_u64(),
            ParamKind::Number => value.is_number(),
            ParamKind::Boolean => value.is_boolean(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    pub required: bool,
    pub description: String,
}

impl ParamSpec {
    pub fn required(name: &str, kind: ParamKind, description: &str) -> Self {
        ParamSpec {
            name: name.to_string(),
            kind,
            required: true,
            description: description.to_string(),
        }
    }

    pub fn optional(name: &str, kind: ParamKind, description: &str) -> Self {
        ParamSpec {
            required: false,
            ..Self::required(name, kind, description)
        }
    }
}

/// Declared surface of one tool: name, purpose, parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSchema {
    pub name: String,
    pub description: String,
    pub parameters: Vec<ParamSpec>,
}

impl ToolSchema {
    pub fn new(name: &str, description: &str, parameters: Vec<ParamSpec>) -> Self {
        ToolSchema {
            name: name.to_string(),
            description: description.to_string(),
            parameters,
        }
    }

    /// JSON-schema object for the chat-completions tool declaration.
    pub fn parameters_json_schema(&self) -> Value {
        let mut properties = Map::new();
        let mut required = Vec::new();
        for param in &self.parameters {
            properties.insert(
                param.name.clone(),
                serde_json::json!({
                    "type": param.kind.json_type(),
                    "description": param.description,
                }),
            );
            if param.required {
                required.push(Value::String(param.name.clone()));
            }
        }
        serde_json::json!({
            "type": "object",
            "properties": properties,
            "required": required,
        })
    }
}

/// One tool invocation requested by a model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCall {
    pub id: String,
    pub tool: String,
    pub arguments: Map<String, Value>,
}

impl ToolCall {
    pub fn new(id: &str, tool: &str, arguments: Value) -> Self {
        let arguments = match arguments {
            Value::Object(map) => map,
            _ => Map::new(),
        };
        ToolCall {
            id: id.to_string(),
            tool: tool.to_string(),
            arguments,
        }
    }
}

/// What a tool invocation produced, rendered for model consumption.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolOutcome {
    pub call_id: String,
    pub content: String,
    pub is_error: bool,
}

impl ToolOutcome {
    fn error(call_id: &str, message: impl fmt::Display) -> Self {
        ToolOutcome {
            call_id: call_id.to_string(),
            content: message.to_string(),
            is_error: true,
        }
    }
}

/// Implementations produce the text fed back to the model; an `Err` string
/// becomes an error outcome verbatim.
pub trait ToolInvoker: Send + Sync {
    fn invoke(&self, arguments: &Map<String, Value>) -> Result<String, String>;
}

impl<F> ToolInvoker for F
where
    F: Fn(&Map<String, Value>) -> Result<String, String> + Send + Sync,
{
    fn invoke(&self, arguments: &Map<String, Value>) -> Result<String, String> {
        self(arguments)
    }
}

#[derive(Debug, Error)]
pub enum ToolRuntimeError {
    #[error("tool `{0}` is already registered")]
    DuplicateName(String),
}

struct RegisteredTool {
    schema: ToolSchema,
    invoker: Arc<dyn ToolInvoker>,
}

/// Named tools with their schemas and invokers. Built once, then shared
/// immutably; `invoke` may be called concurrently.
#[derive(Default)]
pub struct ToolRegistry {
    tools: Vec<RegisteredTool>,
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(
        &mut self,
        schema: ToolSchema,
        invoker: Arc<dyn ToolInvoker>,
    ) -> Result<(), ToolRuntimeError> {
        if self.tools.iter().any(|t| t.schema.name == schema.name) {
            return Err(ToolRuntimeError::DuplicateName(schema.name));
        }
        self.tools.push(RegisteredTool { schema, invoker });
        Ok(())
    }

    pub fn schemas(&self) -> Vec<ToolSchema> {
        self.tools.iter().map(|t| t.schema.clone()).collect()
    }

    pub fn names(&self) -> Vec<&str> {
        self.tools.iter().map(|t| t.schema.name.as_str()).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tools.iter().any(|t| t.schema.name == name)
    }

    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }

    /// Runs a tool call to completion. Never panics and never returns an
    /// error type: every failure is rendered into the outcome.
    pub fn invoke(&self, call: &ToolCall) -> ToolOutcome {
        let tool = match self.tools.iter().find(|t| t.schema.name == call.tool) {
            Some(t) => t,
            None => return ToolOutcome::error(&call.id, format!("unknown tool: {}", call.tool)),
        };

        for param in &tool.schema.parameters {
            match call.arguments.get(&param.name) {
                None | Some(Value::Null) if param.required => {
                    return ToolOutcome::error(
                        &call.id,
                        format!(
                            "missing required argument `{}` for tool `{}`",
                            param.name, call.tool
                        ),
                    );
                }
                Some(value) if !value.is_null() && !param.kind.matches(value) => {
                    return ToolOutcome::error(
                        &call.id,
                        format!(
                            "argument `{}` of tool `{}` must be a {}",
                            param.name,
                            call.tool,
                            param.kind.json_type()
                        ),
                    );
                }
                _ => {}
            }
        }

        // Models often attach extra fields; ignore them with a notice
        // rather than burning a turn on a hard failure.
        let unexpected: Vec<&str> = call
            .arguments
            .keys()
            .filter(|k| !tool.schema.parameters.iter().any(|p| &p.name == *k))
            .map(String::as_str)
            .collect();

        match tool.invoker.invoke(&call.arguments) {
            Ok(content) => {
                let mut content = if content.is_empty() {
                    "(no output)".to_string()
                } else {
                    content
                };
                if !unexpected.is_empty() {
                    content.push_str(&format!(
                        "\n(note: ignored unexpected argument(s): {})",
                        unexpected.join(", ")
                    ));
                }
                ToolOutcome {
                    call_id: call.id.clone(),
                    content,
                    is_error: false,
                }
            }
            Err(message) => ToolOutcome::error(
                &call.id,
                if message.is_empty() {
                    "tool failed without a message".to_string()
                } else {
                    message
                },
            ),
        }
    }
}

/// Renders a query result as a pipe-delimited table with a header line.
///
/// Nulls render as `NULL`; numbers carry no locale formatting. A truncated
/// result gets a trailing `(truncated to N rows)` notice.
pub fn render_result(result: &QueryResult, row_cap: usize) -> String {
    let mut out = result.columns.join(" | ");
    if result.rows.is_empty() {
        out.push_str("\n(0 rows)");
        return out;
    }
    for row in &result.rows {
        out.push('\n');
        let rendered: Vec<String> = row.iter().map(|v| v.render()).collect();
        out.push_str(&rendered.join(" | "));
    }
    if result.truncated {
        out.push_str(&format!("\n(truncated to {row_cap} rows)"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasource::Scalar;

    fn echo_tool(name: &str) -> (ToolSchema, Arc<dyn ToolInvoker>) {
        let schema = ToolSchema::new(
            name,
            "echoes its sql argument",
            vec![ParamSpec::required("sql", ParamKind::String, "statement")],
        );
        let invoker = Arc::new(|args: &Map<String, Value>| {
            Ok(format!("echo: {}", args["sql"].as_str().unwrap_or("")))
        });
        (schema, invoker)
    }

    #[test]
    fn registered_tool_is_listable() {
        let mut registry = ToolRegistry::new();
        let (schema, invoker) = echo_tool("seattle_sql");
        registry.register(schema, invoker).unwrap();
        assert_eq!(registry.names(), vec!["seattle_sql"]);
    }

    #[test]
    fn duplicate_registration_fails() {
        let mut registry = ToolRegistry::new();
        let (schema, invoker) = echo_tool("seattle_sql");
        registry.register(schema.clone(), invoker.clone()).unwrap();
        let err = registry.register(schema, invoker).unwrap_err();
        assert!(err.to_string().contains("seattle_sql"));
    }

    #[test]
    fn empty_registry_lists_nothing() {
        assert!(ToolRegistry::new().names().is_empty());
    }

    #[test]
    fn unknown_tool_becomes_error_outcome() {
        let registry = ToolRegistry::new();
        let outcome = registry.invoke(&ToolCall::new("c1", "teleport", Value::Null));
        assert!(outcome.is_error);
        assert_eq!(outcome.content, "unknown tool: teleport");
        assert_eq!(outcome.call_id, "c1");
    }

    #[test]
    fn missing_required_argument_is_named() {
        let mut registry = ToolRegistry::new();
        let (schema, invoker) = echo_tool("run_sql");
        registry.register(schema, invoker).unwrap();
        let outcome = registry.invoke(&ToolCall::new("c2", "run_sql", serde_json::json!({})));
        assert!(outcome.is_error);
        assert!(outcome.content.contains("`sql`"), "{}", outcome.content);
    }

    #[test]
    fn wrong_argument_type_is_rejected() {
        let mut registry = ToolRegistry::new();
        let (schema, invoker) = echo_tool("run_sql");
        registry.register(schema, invoker).unwrap();
        let outcome =
            registry.invoke(&ToolCall::new("c3", "run_sql", serde_json::json!({"sql": 7})));
        assert!(outcome.is_error);
        assert!(outcome.content.contains("string"));
    }

    #[test]
    fn extra_arguments_are_ignored_with_notice() {
        let mut registry = ToolRegistry::new();
        let (schema, invoker) = echo_tool("run_sql");
        registry.register(schema, invoker).unwrap();
        let outcome = registry.invoke(&ToolCall::new(
            "c4",
            "run_sql",
            serde_json::json!({"sql": "SELECT 1", "verbose": true}),
        ));
        assert!(!outcome.is_error);
        assert!(outcome.content.starts_with("echo: SELECT 1"));
        assert!(outcome.content.contains("ignored unexpected argument(s): verbose"));
    }

    #[test]
    fn invoker_failure_becomes_error_outcome() {
        let mut registry = ToolRegistry::new();
        let schema = ToolSchema::new("boom", "always fails", vec![]);
        registry
            .register(
                schema,
                Arc::new(|_: &Map<String, Value>| Err("sqlite error: no such table: x".to_string())),
            )
            .unwrap();
        let outcome = registry.invoke(&ToolCall::new("c5", "boom", Value::Null));
        assert!(outcome.is_error);
        assert_eq!(outcome.content, "sqlite error: no such table: x");
    }

    #[test]
    fn outcome_content_is_never_empty() {
        let mut registry = ToolRegistry::new();
        registry
            .register(
                ToolSchema::new("quiet", "returns nothing", vec![]),
                Arc::new(|_: &Map<String, Value>| Ok(String::new())),
            )
            .unwrap();
        let outcome = registry.invoke(&ToolCall::new("c6", "quiet", Value::Null));
        assert!(!outcome.content.is_empty());
    }

    fn sample_result(truncated: bool) -> QueryResult {
        QueryResult {
            columns: vec!["year".into(), "category".into(), "n".into()],
            rows: vec![
                vec![Scalar::Int(2023), Scalar::Text("PROPERTY CRIME".into()), Scalar::Int(28)],
                vec![Scalar::Int(2023), Scalar::Null, Scalar::Int(26)],
            ],
            row_count: 2,
            truncated,
            elapsed: Default::default(),
        }
    }

    #[test]
    fn render_result_pipe_table() {
        let text = render_result(&sample_result(false), 50);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "year | category | n");
        assert_eq!(lines[1], "2023 | PROPERTY CRIME | 28");
        assert_eq!(lines[2], "2023 | NULL | 26");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn render_result_zero_rows() {
        let result = QueryResult {
            columns: vec!["x".into()],
            ..Default::default()
        };
        assert_eq!(render_result(&result, 50), "x\n(0 rows)");
    }

    #[test]
    fn render_result_truncation_footer() {
        let text = render_result(&sample_result(true), 50);
        assert!(text.ends_with("(truncated to 50 rows)"));
    }

    #[test]
    fn json_schema_shape() {
        let schema = ToolSchema::new(
            "ask",
            "asks",
            vec![
                ParamSpec::required("question", ParamKind::String, "the question"),
                ParamSpec::optional("limit", ParamKind::Integer, "row cap"),
            ],
        );
        let json = schema.parameters_json_schema();
        assert_eq!(json["type"], "object");
        assert_eq!(json["properties"]["question"]["type"], "string");
        assert_eq!(json["required"], serde_json::json!(["question"]));
    }
}
