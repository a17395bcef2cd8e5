//! Conservative read-only statement classification.
//!
//! The guard admits exactly one statement shape: a single `SELECT`, possibly
//! introduced by a `WITH` clause whose CTE bodies are themselves selects.
//! Everything else — recognized mutations, multiple statements, or anything
//! the prefix parser cannot prove safe — is refused.

use serde::{Deserialize, Serialize};

/// Outcome of classifying one SQL text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatementKind {
    ReadOnly,
    Mutating,
    MultiStatement,
    Unparseable,
}

const MUTATING_KEYWORDS: &[&str] = &[
    "INSERT", "UPDATE", "DELETE", "DROP", "CREATE", "ALTER", "TRUNCATE", "REPLACE", "MERGE",
    "GRANT", "REVOKE", "ATTACH", "DETACH", "PRAGMA", "VACUUM", "REINDEX", "ANALYZE", "BEGIN",
    "COMMIT", "ROLLBACK", "SAVEPOINT", "RELEASE", "SET", "COPY", "CALL", "DO", "LOCK", "IMPORT",
    "LOAD", "EXECUTE", "PREPARE", "DEALLOCATE", "COMMENT", "CLUSTER", "REFRESH", "SECURITY",
    "INSTALL", "UPSERT",
];

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Word(String),
    Punct(char),
    Literal,
}

/// Classifies a statement without touching any database.
///
/// Conservative by construction: anything not provably a single SELECT/CTE
/// is reported as non-read-only.
pub fn classify_statement(sql: &str) -> StatementKind {
    let cleaned = match strip_comments(sql) {
        Some(c) => c,
        None => return StatementKind::Unparseable,
    };
    let statements = split_statements(&cleaned);
    match statements.len() {
        0 => StatementKind::Unparseable,
        1 => classify_single(&statements[0]),
        _ => StatementKind::MultiStatement,
    }
}

fn classify_single(stmt: &str) -> StatementKind {
    let tokens = match tokenize(stmt) {
        Some(t) if !t.is_empty() => t,
        _ => return StatementKind::Unparseable,
    };
    classify_tokens(&tokens)
}

fn classify_tokens(tokens: &[Token]) -> StatementKind {
    let head = match tokens.first() {
        Some(Token::Word(w)) => w.as_str(),
        _ => return StatementKind::Unparseable,
    };
    match head {
        "SELECT" => StatementKind::ReadOnly,
        "WITH" => classify_cte(tokens),
        w if MUTATING_KEYWORDS.contains(&w) => StatementKind::Mutating,
        _ => StatementKind::Unparseable,
    }
}

/// Walks `WITH [RECURSIVE] name [(cols)] AS [NOT MATERIALIZED] (body), ...`
/// checking each CTE body and the trailing main statement.
fn classify_cte(tokens: &[Token]) -> StatementKind {
    let mut i = 1;
    if matches!(tokens.get(i), Some(Token::Word(w)) if w == "RECURSIVE") {
        i += 1;
    }
    loop {
        // CTE name
        match tokens.get(i) {
            Some(Token::Word(_)) => i += 1,
            _ => return StatementKind::Unparseable,
        }
        // optional column list
        if matches!(tokens.get(i), Some(Token::Punct('('))) {
            i = match skip_parens(tokens, i) {
                Some(next) => next,
                None => return StatementKind::Unparseable,
            };
        }
        match tokens.get(i) {
            Some(Token::Word(w)) if w == "AS" => i += 1,
            _ => return StatementKind::Unparseable,
        }
        if matches!(tokens.get(i), Some(Token::Word(w)) if w == "NOT") {
            i += 1;
        }
        if matches!(tokens.get(i), Some(Token::Word(w)) if w == "MATERIALIZED") {
            i += 1;
        }
        if !matches!(tokens.get(i), Some(Token::Punct('('))) {
            return StatementKind::Unparseable;
        }
        // first word of the body decides whether the CTE is a select
        match tokens.get(i + 1) {
            Some(Token::Word(w)) if w == "SELECT" || w == "WITH" || w == "VALUES" => {}
            Some(Token::Word(w)) if MUTATING_KEYWORDS.contains(&w.as_str()) => {
                return StatementKind::Mutating
            }
            _ => return StatementKind::Unparseable,
        }
        i = match skip_parens(tokens, i) {
            Some(next) => next,
            None => return StatementKind::Unparseable,
        };
        if matches!(tokens.get(i), Some(Token::Punct(','))) {
            i += 1;
            continue;
        }
        break;
    }
    match tokens.get(i) {
        Some(Token::Word(w)) if w == "SELECT" => StatementKind::ReadOnly,
        Some(Token::Word(w)) if MUTATING_KEYWORDS.contains(&w.as_str()) => StatementKind::Mutating,
        _ => StatementKind::Unparseable,
    }
}

/// Index just past the parenthesized group opening at `open`.
fn skip_parens(tokens: &[Token], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (offset, token) in tokens[open..].iter().enumerate() {
        match token {
            Token::Punct('(') => depth += 1,
            Token::Punct(')') => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some(open + offset + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// Replaces `--` and `/* */` comments with spaces, leaving string literals
/// intact. Returns `None` on an unterminated construct.
fn strip_comments(sql: &str) -> Option<String> {
    let bytes = sql.as_bytes();
    let mut out = String::with_capacity(sql.len());
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            '\'' | '"' | '`' => {
                let end = scan_literal(sql, i)?;
                out.push_str(&sql[i..end]);
                i = end;
            }
            '-' if bytes.get(i + 1) == Some(&b'-') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                out.push(' ');
            }
            '/' if bytes.get(i + 1) == Some(&b'*') => {
                let mut depth = 1;
                i += 2;
                while i < bytes.len() && depth > 0 {
                    if bytes[i] == b'/' && bytes.get(i + 1) == Some(&b'*') {
                        depth += 1;
                        i += 2;
                    } else if bytes[i] == b'*' && bytes.get(i + 1) == Some(&b'/') {
                        depth -= 1;
                        i += 2;
                    } else {
                        i += 1;
                    }
                }
                if depth > 0 {
                    return None;
                }
                out.push(' ');
            }
            _ => {
                out.push(c);
                i += c.len_utf8();
            }
        }
    }
    Some(out)
}

/// End index (exclusive) of the quoted literal starting at `start`.
/// Doubled quotes escape themselves, as in standard SQL.
fn scan_literal(sql: &str, start: usize) -> Option<usize> {
    let bytes = sql.as_bytes();
    let quote = bytes[start];
    let mut i = start + 1;
    while i < bytes.len() {
        if bytes[i] == quote {
            if bytes.get(i + 1) == Some(&quote) {
                i += 2;
                continue;
            }
            return Some(i + 1);
        }
        i += 1;
    }
    None
}

/// Splits on semicolons outside literals; empty segments are dropped.
fn split_statements(cleaned: &str) -> Vec<String> {
    let mut statements = Vec::new();
    let mut current = String::new();
    let mut i = 0;
    while i < cleaned.len() {
        let c = cleaned.as_bytes()[i] as char;
        match c {
            '\'' | '"' | '`' => {
                // comments are already gone, so an unterminated literal just
                // swallows the rest; tokenize() will refuse it later
                let end = scan_literal(cleaned, i).unwrap_or(cleaned.len());
                current.push_str(&cleaned[i..end]);
                i = end;
            }
            ';' => {
                if !current.trim().is_empty() {
                    statements.push(current.trim().to_string());
                }
                current = String::new();
                i += 1;
            }
            _ => {
                current.push(c);
                i += c.len_utf8();
            }
        }
    }
    if !current.trim().is_empty() {
        statements.push(current.trim().to_string());
    }
    statements
}

fn tokenize(stmt: &str) -> Option<Vec<Token>> {
    let mut tokens = Vec::new();
    let bytes = stmt.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
        } else if c == '\'' || c == '"' || c == '`' {
            i = scan_literal(stmt, i)?;
            tokens.push(Token::Literal);
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() {
                let ch = bytes[i] as char;
                if ch.is_ascii_alphanumeric() || ch == '_' || ch == '$' {
                    i += 1;
                } else {
                    break;
                }
            }
            tokens.push(Token::Word(stmt[start..i].to_ascii_uppercase()));
        } else {
            tokens.push(Token::Punct(c));
            i += c.len_utf8();
        }
    }
    Some(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_cte_is_read_only() {
        assert_eq!(
            classify_statement("WITH t AS (SELECT 1) SELECT * FROM t"),
            StatementKind::ReadOnly
        );
    }

    #[test]
    fn semicolon_separated_statements_are_multi() {
        assert_eq!(
            classify_statement("SELECT 1; DROP TABLE x"),
            StatementKind::MultiStatement
        );
    }

    #[test]
    fn update_is_mutating() {
        assert_eq!(classify_statement("UPDATE t SET a=1"), StatementKind::Mutating);
    }

    #[test]
    fn trailing_semicolon_is_still_one_statement() {
        assert_eq!(classify_statement("SELECT 1;"), StatementKind::ReadOnly);
        assert_eq!(classify_statement("SELECT 1;\n  "), StatementKind::ReadOnly);
    }

    #[test]
    fn semicolon_inside_literal_is_not_a_separator() {
        assert_eq!(
            classify_statement("SELECT 'a;b' AS v"),
            StatementKind::ReadOnly
        );
    }

    #[test]
    fn comments_are_ignored() {
        assert_eq!(
            classify_statement("-- leading note\nSELECT 1 /* inline */ AS x"),
            StatementKind::ReadOnly
        );
    }

    #[test]
    fn mutating_keyword_in_comment_or_literal_is_harmless() {
        assert_eq!(
            classify_statement("SELECT 'DROP TABLE x' AS warning -- DELETE"),
            StatementKind::ReadOnly
        );
    }

    #[test]
    fn cte_hiding_a_mutation_is_caught() {
        assert_eq!(
            classify_statement("WITH d AS (DELETE FROM t RETURNING *) SELECT * FROM d"),
            StatementKind::Mutating
        );
        assert_eq!(
            classify_statement("WITH t AS (SELECT 1) DELETE FROM x"),
            StatementKind::Mutating
        );
    }

    #[test]
    fn recursive_and_multiple_ctes() {
        assert_eq!(
            classify_statement(
                "WITH RECURSIVE n(x) AS (SELECT 1 UNION ALL SELECT x+1 FROM n WHERE x < 5),
                 m AS NOT MATERIALIZED (SELECT * FROM n)
                 SELECT * FROM m"
            ),
            StatementKind::ReadOnly
        );
    }

    #[test]
    fn garbage_is_unparseable() {
        assert_eq!(classify_statement(""), StatementKind::Unparseable);
        assert_eq!(classify_statement("   "), StatementKind::Unparseable);
        assert_eq!(classify_statement("42 things"), StatementKind::Unparseable);
        assert_eq!(classify_statement("EXPLODE ALL"), StatementKind::Unparseable);
        assert_eq!(classify_statement("WITH t AS SELECT 1"), StatementKind::Unparseable);
        assert_eq!(classify_statement("SELECT 'unterminated"), StatementKind::Unparseable);
    }

    #[test]
    fn explain_and_pragma_are_not_provably_safe() {
        // EXPLAIN is harmless but outside the admitted shape.
        assert_eq!(classify_statement("EXPLAIN SELECT 1"), StatementKind::Unparseable);
        assert_eq!(
            classify_statement("PRAGMA journal_mode=DELETE"),
            StatementKind::Mutating
        );
    }

    #[test]
    fn fig_style_grouping_query_is_read_only() {
        let sql = "SELECT\n EXTRACT(YEAR FROM offense_date)::int \n AS year,\n offense_category,\n COUNT(*) AS incident_count\nFROM public.crime_data\nWHERE offense_category IN \n    ('PROPERTY CRIME','VIOLENT CRIME')\n AND offense_date >= '2023-01-01'::date\n AND offense_date < '2025-01-01'::date\nGROUP BY 1, 2\nORDER BY 1, 2;";
        assert_eq!(classify_statement(sql), StatementKind::ReadOnly);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn known_mutations_never_classify_read_only(
                keyword in proptest::sample::select(MUTATING_KEYWORDS),
                tail in "[a-z0-9 ,()=*]{0,40}",
            ) {
                let sql = format!("{keyword} {tail}");
                prop_assert_ne!(classify_statement(&sql), StatementKind::ReadOnly);
            }

            #[test]
            fn select_prefix_with_simple_tail_is_read_only(
                tail in "[a-z0-9_ ,*]{1,40}",
            ) {
                let sql = format!("SELECT {tail}");
                prop_assert_eq!(classify_statement(&sql), StatementKind::ReadOnly);
            }
        }
    }
}
