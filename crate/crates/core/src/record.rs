//! Canonical entity records and the identifiers they are keyed by.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdError {
    #[error("invalid item identifier {0:?} (expected Q followed by digits, no leading zero)")]
    Qid(String),
    #[error("invalid language code {0:?} (expected nonempty [a-z0-9-])")]
    LanguageCode(String),
}

/// A Wikidata item identifier. Ordered by its numeric value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Qid(u64);

impl Qid {
    pub fn new(n: u64) -> Option<Self> {
        (n > 0).then_some(Qid(n))
    }

    pub fn number(self) -> u64 {
        self.0
    }
}

impl FromStr for Qid {
    type Err = IdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || IdError::Qid(s.to_string());
        let digits = s.strip_prefix('Q').ok_or_else(err)?;
        let mut bytes = digits.bytes();
        match bytes.next() {
            Some(b'1'..=b'9') => {}
            _ => return Err(err()),
        }
        if !bytes.all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        digits.parse::<u64>().map(Qid).map_err(|_| err())
    }
}

impl fmt::Display for Qid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q{}", self.0)
    }
}

impl Serialize for Qid {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Qid {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = <std::borrow::Cow<'de, str>>::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A full Wikimedia language code such as `kk-arab`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LanguageCode(String);

impl LanguageCode {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The first two characters of the code, used to count languages without
    /// double-counting script or regional variants (`kk`, `kk-arab` → `kk`).
    pub fn higher_level(&self) -> &str {
        match self.0.char_indices().nth(2) {
            Some((i, _)) => &self.0[..i],
            None => &self.0,
        }
    }

    pub fn is_english(&self) -> bool {
        self.0 == "en"
    }
}

impl FromStr for LanguageCode {
    type Err = IdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let valid = !s.is_empty()
            && s.bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-');
        if valid {
            Ok(LanguageCode(s.to_string()))
        } else {
            Err(IdError::LanguageCode(s.to_string()))
        }
    }
}

impl fmt::Display for LanguageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for LanguageCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for LanguageCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = <std::borrow::Cow<'de, str>>::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One Wikidata entity: its labels and direct class memberships.
///
/// `instance_of` holds P31 targets, `subclass_of` P279 targets. Labels are
/// already trimmed and nonempty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityRecord {
    pub qid: Qid,
    pub labels: BTreeMap<LanguageCode, String>,
    pub instance_of: BTreeSet<Qid>,
    pub subclass_of: BTreeSet<Qid>,
}

// Field order is alphabetical so the canonical line has sorted keys.
#[derive(Serialize)]
struct CanonicalLineRef<'a> {
    instance_of: &'a BTreeSet<Qid>,
    labels: &'a BTreeMap<LanguageCode, String>,
    qid: Qid,
    subclass_of: &'a BTreeSet<Qid>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CanonicalLine {
    #[serde(default)]
    instance_of: BTreeSet<Qid>,
    #[serde(default)]
    labels: BTreeMap<LanguageCode, String>,
    qid: Qid,
    #[serde(default)]
    subclass_of: BTreeSet<Qid>,
}

impl EntityRecord {
    pub fn new(qid: Qid) -> Self {
        EntityRecord {
            qid,
            labels: BTreeMap::new(),
            instance_of: BTreeSet::new(),
            subclass_of: BTreeSet::new(),
        }
    }

    pub fn with_label(mut self, code: &str, label: &str) -> Self {
        let code = code.parse().expect("valid language code");
        self.labels.insert(code, label.trim().to_string());
        self
    }

    pub fn with_instance_of(mut self, classes: impl IntoIterator<Item = Qid>) -> Self {
        self.instance_of.extend(classes);
        self
    }

    pub fn with_subclass_of(mut self, classes: impl IntoIterator<Item = Qid>) -> Self {
        self.subclass_of.extend(classes);
        self
    }

    pub fn english_label(&self) -> Option<&str> {
        self.labels
            .iter()
            .find(|(code, _)| code.is_english())
            .map(|(_, label)| label.as_str())
    }

    /// Canonical JSONL line (no trailing newline): sorted keys, sorted arrays.
    pub fn to_canonical_json(&self) -> String {
        let line = CanonicalLineRef {
            instance_of: &self.instance_of,
            labels: &self.labels,
            qid: self.qid,
            subclass_of: &self.subclass_of,
        };
        serde_json::to_string(&line).expect("canonical record serializes")
    }

    pub fn from_canonical_json(line: &str) -> Result<Self, serde_json::Error> {
        let line: CanonicalLine = serde_json::from_str(line)?;
        Ok(EntityRecord {
            qid: line.qid,
            labels: line.labels,
            instance_of: line.instance_of,
            subclass_of: line.subclass_of,
        })
    }
}

/// Shorthand for building qids in fixtures and tests. Panics on zero.
pub fn q(n: u64) -> Qid {
    Qid::new(n).expect("qid numbers start at 1")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qid_parsing_is_strict() {
        assert_eq!("Q7251".parse::<Qid>().unwrap(), q(7251));
        for bad in ["Q0", "Q", "q5", "Q05", "P31", "Q5a", " Q5", "Q-1", ""] {
            assert!(bad.parse::<Qid>().is_err(), "{bad}");
        }
    }

    #[test]
    fn qids_order_numerically() {
        let mut v = vec![q(100), q(9), q(20)];
        v.sort();
        assert_eq!(v, vec![q(9), q(20), q(100)]);
    }

    #[test]
    fn language_code_validation_and_higher_level() {
        let kk: LanguageCode = "kk-arab".parse().unwrap();
        assert_eq!(kk.higher_level(), "kk");
        assert_eq!("en".parse::<LanguageCode>().unwrap().higher_level(), "en");
        assert_eq!("x".parse::<LanguageCode>().unwrap().higher_level(), "x");
        assert!("EN".parse::<LanguageCode>().is_err());
        assert!("".parse::<LanguageCode>().is_err());
        assert!("en_gb".parse::<LanguageCode>().is_err());
    }

    #[test]
    fn canonical_json_has_sorted_keys() {
        let rec = EntityRecord::new(q(7251))
            .with_label("en", "Alan Turing")
            .with_label("de", "Alan Turing")
            .with_instance_of([q(5)]);
        assert_eq!(
            rec.to_canonical_json(),
            r#"{"instance_of":["Q5"],"labels":{"de":"Alan Turing","en":"Alan Turing"},"qid":"Q7251","subclass_of":[]}"#
        );
    }
}
