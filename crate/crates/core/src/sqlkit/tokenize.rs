use serde::{Deserialize, Serialize};

/// Lowercase word tokens of an identifier.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NameTokens {
    pub tokens: Vec<String>,
}

/// Splits a table or column name into lowercase word tokens.
///
/// Splits on underscores (and any other non-alphanumeric separator) and at
/// every lowercase-to-uppercase transition, so both `snake_case` and
/// `CamelCase` come apart. Digits stay attached to whatever precedes them.
pub fn tokenize_name(name: &str) -> NameTokens {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut prev_lower = false;
    for ch in name.chars() {
        if !ch.is_alphanumeric() {
            flush(&mut tokens, &mut current);
            prev_lower = false;
            continue;
        }
        if ch.is_uppercase() && prev_lower {
            flush(&mut tokens, &mut current);
        }
        if !ch.is_numeric() {
            prev_lower = ch.is_lowercase();
        }
        current.extend(ch.to_lowercase());
    }
    flush(&mut tokens, &mut current);
    NameTokens { tokens }
}

fn flush(tokens: &mut Vec<String>, current: &mut String) {
    if !current.is_empty() {
        tokens.push(std::mem::take(current));
    }
}
