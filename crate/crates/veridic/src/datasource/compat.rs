//! Portability rewrites for running the common postgres-flavored analytics
//! subset against sqlite.
//!
//! Evidence queries are re-executed verbatim, and agents routinely write
//! `EXTRACT(YEAR FROM d)`, `expr::int` casts, and `public.`-qualified table
//! names. sqlite understands none of those, so its backend applies a
//! narrow, text-level rewrite before preparing a statement:
//!
//! - `EXTRACT(unit FROM expr)` becomes `CAST(strftime('%fmt', expr) AS INTEGER)`
//! - `expr::int` (and friends) becomes `CAST(expr AS INTEGER)`; casts to
//!   date/time/numeric types are dropped, which is the identity for ISO
//!   date strings
//! - a `public.` schema qualifier is removed
//!
//! String literals are never touched. Statements that use none of these
//! constructs pass through unchanged.

/// Applies the sqlite portability rewrites to one statement.
pub fn rewrite_for_sqlite(sql: &str) -> String {
    let pass1 = strip_public_prefix(sql);
    let pass2 = rewrite_extract(&pass1);
    rewrite_casts(&pass2)
}

/// Segments of a statement outside string literals, as (start, end) byte
/// ranges. Literal ranges are skipped by all rewrites.
fn literal_spans(sql: &str) -> Vec<(usize, usize)> {
    let bytes = sql.as_bytes();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\'' || c == b'"' {
            let start = i;
            i += 1;
            while i < bytes.len() {
                if bytes[i] == c {
                    if bytes.get(i + 1) == Some(&c) {
                        i += 2;
                        continue;
                    }
                    i += 1;
                    break;
                }
                i += 1;
            }
            spans.push((start, i));
        } else {
            i += 1;
        }
    }
    spans
}

fn in_literal(spans: &[(usize, usize)], pos: usize) -> bool {
    spans.iter().any(|&(s, e)| pos >= s && pos < e)
}

fn is_ident_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_'
}

fn strip_public_prefix(sql: &str) -> String {
    let spans = literal_spans(sql);
    let bytes = sql.as_bytes();
    let mut out = String::with_capacity(sql.len());
    let mut i = 0;
    while i < bytes.len() {
        if !in_literal(&spans, i)
            && sql[i..].len() >= 7
            && sql[i..i + 7].eq_ignore_ascii_case("public.")
            && (i == 0 || !is_ident_char(bytes[i - 1]))
            && bytes.get(i + 7).is_some_and(|&c| is_ident_char(c) || c == b'"')
        {
            i += 7;
            continue;
        }
        let c = sql[i..].chars().next().expect("in-bounds char");
        out.push(c);
        i += c.len_utf8();
    }
    out
}

fn strftime_format(unit: &str) -> Option<&'static str> {
    match unit.to_ascii_uppercase().as_str() {
        "YEAR" => Some("%Y"),
        "MONTH" => Some("%m"),
        "DAY" => Some("%d"),
        "HOUR" => Some("%H"),
        "MINUTE" => Some("%M"),
        "SECOND" => Some("%S"),
        _ => None,
    }
}

fn rewrite_extract(sql: &str) -> String {
    let spans = literal_spans(sql);
    let bytes = sql.as_bytes();
    let mut out = String::with_capacity(sql.len());
    let mut i = 0;
    'outer: while i < bytes.len() {
        if !in_literal(&spans, i)
            && sql[i..].len() >= 7
            && sql[i..i + 7].eq_ignore_ascii_case("extract")
            && (i == 0 || !is_ident_char(bytes[i - 1]))
        {
            // EXTRACT ( unit FROM expr )
            let mut j = i + 7;
            while j < bytes.len() && bytes[j].is_ascii_whitespace() {
                j += 1;
            }
            if bytes.get(j) == Some(&b'(') {
                if let Some((unit, expr, end)) = parse_extract_args(sql, &spans, j) {
                    if let Some(fmt) = strftime_format(&unit) {
                        let inner = rewrite_extract(&expr);
                        out.push_str(&format!("CAST(strftime('{fmt}', {inner}) AS INTEGER)"));
                        i = end;
                        continue 'outer;
                    }
                }
            }
        }
        let c = sql[i..].chars().next().expect("in-bounds char");
        out.push(c);
        i += c.len_utf8();
    }
    out
}

/// Parses `( unit FROM expr )` starting at the opening paren. Returns the
/// unit word, the expression text, and the index just past the closing
/// paren.
fn parse_extract_args(
    sql: &str,
    spans: &[(usize, usize)],
    open: usize,
) -> Option<(String, String, usize)> {
    let bytes = sql.as_bytes();
    let mut i = open + 1;
    while i < bytes.len() && bytes[i].is_ascii_whitespace() {
        i += 1;
    }
    let unit_start = i;
    while i < bytes.len() && is_ident_char(bytes[i]) {
        i += 1;
    }
    let unit = sql[unit_start..i].to_string();
    if unit.is_empty() {
        return None;
    }
    while i < bytes.len() && bytes[i].is_ascii_whitespace() {
        i += 1;
    }
    if sql[i..].len() < 4 || !sql[i..i + 4].eq_ignore_ascii_case("from") {
        return None;
    }
    i += 4;
    let expr_start = i;
    let mut depth = 1usize;
    while i < bytes.len() {
        if in_literal(spans, i) {
            i += 1;
            continue;
        }
        match bytes[i] {
            b'(' => depth += 1,
            b')' => {
                depth -= 1;
                if depth == 0 {
                    let expr = sql[expr_start..i].trim().to_string();
                    return Some((unit, expr, i + 1));
                }
            }
            _ => {}
        }
        i += 1;
    }
    None
}

/// sqlite affinity for a postgres cast target, or `None` when the cast
/// should be dropped.
fn cast_affinity(type_word: &str) -> Option<Option<&'static str>> {
    match type_word.to_ascii_lowercase().as_str() {
        "int" | "int2" | "int4" | "int8" | "integer" | "bigint" | "smallint" => {
            Some(Some("INTEGER"))
        }
        "float" | "float4" | "float8" | "real" | "double" => Some(Some("REAL")),
        "text" | "varchar" | "char" | "bpchar" | "citext" => Some(Some("TEXT")),
        "date" | "timestamp" | "timestamptz" | "time" | "numeric" | "decimal" | "interval"
        | "boolean" | "bool" => Some(None),
        _ => None,
    }
}

fn rewrite_casts(sql: &str) -> String {
    let spans = literal_spans(sql);
    let bytes = sql.as_bytes();
    let mut out: Vec<u8> = Vec::with_capacity(sql.len());
    let mut i = 0;
    while i < bytes.len() {
        if !in_literal(&spans, i) && bytes[i] == b':' && bytes.get(i + 1) == Some(&b':') {
            let mut j = i + 2;
            let type_start = j;
            while j < bytes.len() && is_ident_char(bytes[j]) {
                j += 1;
            }
            let mut type_word = sql[type_start..j].to_string();
            // two-word target: `double precision`
            if type_word.eq_ignore_ascii_case("double") {
                let mut k = j;
                while k < bytes.len() && bytes[k].is_ascii_whitespace() {
                    k += 1;
                }
                if sql[k..].len() >= 9 && sql[k..k + 9].eq_ignore_ascii_case("precision") {
                    j = k + 9;
                    type_word = "double".to_string();
                }
            }
            if let Some(affinity) = cast_affinity(&type_word) {
                if let Some(expr_start) = expression_start(&out) {
                    let expr: Vec<u8> = out.split_off(expr_start);
                    match affinity {
                        Some(target) => {
                            out.extend_from_slice(b"CAST(");
                            out.extend_from_slice(&expr);
                            out.extend_from_slice(b" AS ");
                            out.extend_from_slice(target.as_bytes());
                            out.push(b')');
                        }
                        None => out.extend_from_slice(&expr),
                    }
                    i = j;
                    continue;
                }
            }
        }
        out.push(bytes[i]);
        i += 1;
    }
    String::from_utf8(out).expect("rewrite preserves utf8")
}

/// Start index of the expression a `::` cast applies to, scanning the
/// already-emitted output backwards: a string literal, a parenthesized
/// group with an optional function name, or a bare identifier/number.
fn expression_start(out: &[u8]) -> Option<usize> {
    if out.is_empty() {
        return None;
    }
    let mut i = out.len();
    let last = out[i - 1];
    if last == b'\'' {
        i -= 1;
        loop {
            if i == 0 {
                return None;
            }
            i -= 1;
            if out[i] == b'\'' {
                // doubled quote inside the literal
                if i > 0 && out[i - 1] == b'\'' {
                    i -= 1;
                    continue;
                }
                return Some(i);
            }
        }
    } else if last == b')' {
        let mut depth = 0usize;
        while i > 0 {
            i -= 1;
            match out[i] {
                b')' => depth += 1,
                b'(' => {
                    depth -= 1;
                    if depth == 0 {
                        // include a preceding function name, if any
                        while i > 0 && is_ident_char(out[i - 1]) {
                            i -= 1;
                        }
                        return Some(i);
                    }
                }
                b'\'' => {
                    // skip backwards over a literal
                    while i > 0 {
                        i -= 1;
                        if out[i] == b'\'' {
                            break;
                        }
                    }
                }
                _ => {}
            }
        }
        None
    } else if is_ident_char(last) {
        while i > 0 && (is_ident_char(out[i - 1]) || out[i - 1] == b'.') {
            i -= 1;
        }
        Some(i)
    } else {
        None
    }
}
