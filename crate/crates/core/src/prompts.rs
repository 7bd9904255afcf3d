//! Prompt templates. The files under `prompts/` are part of the fixture
//! contract: editing a byte changes every digest that depends on it.

pub const SIMPLE_FILTER: &str = include_str!("../prompts/simple_filter.txt");
pub const COMPLEX_FILTER: &str = include_str!("../prompts/complex_filter.txt");
pub const SIMPLE_REWRITE: &str = include_str!("../prompts/simple_rewrite.txt");
pub const INTENT: &str = include_str!("../prompts/intent.txt");
pub const NL_REWRITE: &str = include_str!("../prompts/nl_rewrite.txt");
pub const SIMILARITY: &str = include_str!("../prompts/similarity.txt");
pub const CORRECTION: &str = include_str!("../prompts/correction.txt");

/// Substitutes `{key}` placeholders in one pass, so braces inside the
/// substituted values are never re-expanded. Unknown placeholders are kept.
/// The template's trailing newline is dropped.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let template = template.strip_suffix('\n').unwrap_or(template);
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after.find('}');
        let key = close.map(|c| &after[..c]);
        match key.and_then(|k| vars.iter().find(|(name, _)| *name == k)) {
            Some((_, value)) => {
                out.push_str(value);
                rest = &after[close.unwrap() + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Token estimate of the template with every listed slot left empty.
pub fn overhead_tokens(template: &str, slots: &[&str]) -> usize {
    let empty: Vec<(&str, &str)> = slots.iter().map(|s| (*s, "")).collect();
    crate::llmgate::estimate_tokens(&render(template, &empty))
}
