//! Removal of parenthesized disambiguators such as `Wang Lina (boxer)`.
//!
//! ASCII `()` and fullwidth `（）` pairs are deleted together with their
//! contents, innermost first, until nothing matches. Square and curly
//! brackets are left alone.

use std::sync::OnceLock;

use regex::Regex;

use crate::names::TypedName;

const PAREN_CHARS: [char; 4] = ['(', ')', '（', '）'];

fn innermost_pair() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\([^()（）]*\)|（[^()（）]*）").expect("static regex"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stripped {
    pub text: String,
    /// Parenthesis characters left without a partner.
    pub unbalanced: usize,
}

/// Delete parenthesized spans. If anything was deleted, whitespace runs are
/// collapsed to single spaces and the result trimmed; otherwise the label
/// comes back byte-for-byte.
pub fn strip_parentheticals(label: &str) -> Stripped {
    if !label.contains(PAREN_CHARS) {
        return Stripped {
            text: label.to_string(),
            unbalanced: 0,
        };
    }
    let re = innermost_pair();
    let mut text = label.to_string();
    let mut deleted = false;
    while re.is_match(&text) {
        text = re.replace_all(&text, "").into_owned();
        deleted = true;
    }
    if deleted {
        text = text.split_whitespace().collect::<Vec<_>>().join(" ");
    }
    let unbalanced = text.chars().filter(|c| PAREN_CHARS.contains(c)).count();
    Stripped { text, unbalanced }
}

/// Counters for a cleanup pass.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize)]
pub struct CleanupStats {
    pub names: u64,
    pub changed: u64,
    /// Rows whose label became empty and were dropped.
    pub emptied: u64,
    pub unbalanced: u64,
}

/// Clean one row. Returns `None` (and counts it) if the label empties out.
pub fn clean_name(mut name: TypedName, stats: &mut CleanupStats) -> Option<TypedName> {
    stats.names += 1;
    let stripped = strip_parentheticals(&name.label);
    stats.unbalanced += stripped.unbalanced as u64;
    if stripped.text.is_empty() {
        stats.emptied += 1;
        return None;
    }
    if stripped.text != name.label {
        stats.changed += 1;
        name.label = stripped.text;
    }
    Some(name)
}
