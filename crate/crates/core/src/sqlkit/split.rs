/// Splits SQL text on top-level semicolons.
///
/// Semicolons inside string literals, quoted identifiers and comments do not
/// split. Fragments are trimmed and empty fragments are dropped; the
/// terminating semicolon is not part of the fragment.
pub fn split_statements(text: &str) -> Vec<&str> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\'' | b'"' | b'`' => i = skip_quoted(bytes, i, bytes[i]),
            b'[' => i = skip_quoted(bytes, i, b']'),
            b'-' if bytes.get(i + 1) == Some(&b'-') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                i += 2;
                while i < bytes.len() && !(bytes[i] == b'*' && bytes.get(i + 1) == Some(&b'/')) {
                    i += 1;
                }
                i = (i + 2).min(bytes.len());
            }
            b';' => {
                push_fragment(&mut out, &text[start..i]);
                i += 1;
                start = i;
            }
            _ => i += 1,
        }
    }
    push_fragment(&mut out, &text[start..]);
    out
}

fn push_fragment<'a>(out: &mut Vec<&'a str>, frag: &'a str) {
    let trimmed = frag.trim();
    if !trimmed.is_empty() {
        out.push(trimmed);
    }
}

// Returns the index just past the closing quote; doubled quotes escape.
fn skip_quoted(bytes: &[u8], open: usize, close: u8) -> usize {
    let mut i = open + 1;
    while i < bytes.len() {
        if bytes[i] == close {
            if close != b']' && bytes.get(i + 1) == Some(&close) {
                i += 2;
                continue;
            }
            return i + 1;
        }
        i += 1;
    }
    bytes.len()
}

/// Canonical form used to deduplicate rewrites: whitespace runs collapse to a
/// single space, everything outside single-quoted literals is lowercased and
/// trailing semicolons are dropped.
pub fn normalize_sql(sql: &str) -> String {
    let mut out = String::with_capacity(sql.len());
    let mut in_literal = false;
    let mut pending_space = false;
    for ch in sql.trim().trim_end_matches(';').trim_end().chars() {
        if in_literal {
            out.push(ch);
            if ch == '\'' {
                in_literal = false;
            }
            continue;
        }
        if ch.is_whitespace() {
            pending_space = true;
            continue;
        }
        if pending_space && !out.is_empty() {
            out.push(' ');
        }
        pending_space = false;
        if ch == '\'' {
            in_literal = true;
            out.push(ch);
        } else {
            out.extend(ch.to_lowercase());
        }
    }
    out
}
