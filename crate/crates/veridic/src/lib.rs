//! Veridic verifies natural-language claims against relational databases.
//!
//! Given a claim and a set of SQL data sources it knows nothing about in
//! advance, the engine explores schemas and data through a team of
//! specialized agents, returns a four-level verdict (`Verified`,
//! `Partly Verified`, `Partly Inaccurate`, `Inaccurate`), and emits the
//! exact read-only SQL queries that reproduce the verdict. Every model
//! interaction can be recorded to a transcript and replayed offline, so
//! whole verification runs are deterministic and testable without network
//! access or model credentials.
//!
//! The crate is organized around a small number of layers:
//!
//! - [`config`] — the YAML toolbox document declaring sources, tools, and
//!   toolsets.
//! - [`datasource`] — read-only SQL execution and schema introspection over
//!   sqlite, postgres, and mysql behind one interface.
//! - [`tools`] — the registry that exposes database primitives (and wrapped
//!   agents) as named, schema-checked tools.
//! - [`gateway`] — chat-completion providers: remote, scripted, recorder,
//!   and replayer.
//! - [`agent`] — the bounded reason/act/observe loop and the agents-as-tools
//!   wrapper.
//! - [`experts`] — the data, schema, and SQL experts plus evidence
//!   extraction.
//! - [`verifier`] — claim verification, report rendering, and evidence
//!   re-execution.
//! - [`bench`] — table/claim benchmark ingestion and evaluation.
//! - [`engine`] — wiring that assembles an environment from a config and a
//!   provider mode.
//!
//! The book under `book/` walks through each layer with runnable examples;
//! its code blocks are compiled and executed as part of `cargo test --doc`.

pub mod agent;
pub mod bench;
pub mod config;
pub mod datasource;
pub mod engine;
pub mod experts;
pub mod gateway;
pub mod tools;
pub mod verifier;

//pub use config::{parse_config, Diagnostic, Severity, SqlDialect, ToolKind, ToolboxConfig};
//pub use datasource::{classify_statement, Scalar, SourceHandle, SourcePool, StatementKind};
//pub use engine::{Environment, EngineSettings, ProviderMode};
//pub use gateway::{ChatMessage, ModelRequest, ModelResponse, Role, Usage};
//pub use verifier::{verify, Claim, VerificationReport, Verdict};

// Keep the book's code examples honest: every fenced Rust block in the
// guide compiles and runs under `cargo test --doc`.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }

    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(configuration, "../../../book/src/configuration.md");
    chapter!(database_tools, "../../../book/src/database-tools.md");
    chapter!(agents, "../../../book/src/agents.md");
    chapter!(verification, "../../../book/src/verification.md");
    chapter!(record_replay, "../../../book/src/record-replay.md");
    chapter!(benchmarking, "../../../book/src/benchmarking.md");
    chapter!(cli, "../../../book/src/cli.md");
}
