//! Majority-script detection, allowed-script filtering and script entropy.
//!
//! Script values come from the Unicode Script property tables compiled into
//! `unicode-script`; the Unicode version is reported by [`unicode_version`]
//! and echoed into every report.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;
use unicode_script::{Script, UnicodeScript};

use crate::names::TypedName;
use crate::record::LanguageCode;
use crate::scalar::{mean, Scalar};

/// Bundled allowed-scripts list.
pub const BUILTIN_ALLOWED_SCRIPTS: &str = include_str!("../data/allowed_scripts.tsv");

/// Unicode version of the compiled Script tables, e.g. `17.0.0`.
pub fn unicode_version() -> String {
    let (major, minor, patch) = unicode_script::UNICODE_VERSION;
    format!("{major}.{minor}.{patch}")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScriptError {
    #[error("cannot determine the script of an empty name")]
    EmptyName,
    #[error("script entropy of an empty profile is undefined")]
    EmptyProfile,
    #[error("unknown script name {0:?}")]
    UnknownScript(String),
    #[error("allowed-scripts line {line}: {message}")]
    AllowedScripts { line: usize, message: String },
}

/// A Unicode Script property value. Ordered by its long name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScriptTag(Script);

impl ScriptTag {
    pub const COMMON: ScriptTag = ScriptTag(Script::Common);
    pub const INHERITED: ScriptTag = ScriptTag(Script::Inherited);
    pub const UNKNOWN: ScriptTag = ScriptTag(Script::Unknown);

    pub fn of(c: char) -> Self {
        ScriptTag(c.script())
    }

    pub fn name(self) -> &'static str {
        self.0.full_name()
    }

    /// Common, Inherited and Unknown never win a majority vote.
    pub fn is_neutral(self) -> bool {
        matches!(self.0, Script::Common | Script::Inherited | Script::Unknown)
    }
}

impl PartialOrd for ScriptTag {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ScriptTag {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.name().cmp(other.name())
    }
}

impl fmt::Display for ScriptTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScriptTag {
    type Err = ScriptError;

    /// Long property value names (`Cyrillic`) or ISO 15924 short names (`Cyrl`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Script::from_full_name(s)
            .or_else(|| Script::from_short_name(s))
            .map(ScriptTag)
            .ok_or_else(|| ScriptError::UnknownScript(s.to_string()))
    }
}

/// Most frequent script among the name's codepoints, ignoring Common,
/// Inherited and Unknown. Ties go to the script seen first. A name with only
/// neutral codepoints is Common.
pub fn majority_script(name: &str) -> Result<ScriptTag, ScriptError> {
    if name.is_empty() {
        return Err(ScriptError::EmptyName);
    }
    // (count, first position) per script; few distinct scripts per name.
    let mut tally: Vec<(ScriptTag, usize, usize)> = Vec::with_capacity(2);
    for (pos, c) in name.chars().enumerate() {
        let tag = ScriptTag::of(c);
        if tag.is_neutral() {
            continue;
        }
        match tally.iter_mut().find(|(t, _, _)| *t == tag) {
            Some(entry) => entry.1 += 1,
            None => tally.push((tag, 1, pos)),
        }
    }
    Ok(tally
        .into_iter()
        .min_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)))
        .map(|(tag, _, _)| tag)
        .unwrap_or(ScriptTag::COMMON))
}

/// How names contribute to a [`ScriptProfile`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileGranularity {
    /// One count per name, keyed by its majority script.
    #[default]
    PerName,
    /// One count per non-neutral codepoint (all-neutral names count once as Common).
    PerCodepoint,
}

impl ProfileGranularity {
    pub fn as_str(self) -> &'static str {
        match self {
            ProfileGranularity::PerName => "per-name",
            ProfileGranularity::PerCodepoint => "per-codepoint",
        }
    }
}

impl FromStr for ProfileGranularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-name" => Ok(ProfileGranularity::PerName),
            "per-codepoint" => Ok(ProfileGranularity::PerCodepoint),
            other => Err(format!("unknown granularity {other:?} (per-name|per-codepoint)")),
        }
    }
}

/// Distribution of script tags over one language's names.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScriptProfile {
    counts: BTreeMap<ScriptTag, u64>,
    names: u64,
}

impl ScriptProfile {
    pub fn from_counts(counts: impl IntoIterator<Item = (ScriptTag, u64)>) -> Self {
        let mut p = ScriptProfile::default();
        for (tag, n) in counts {
            *p.counts.entry(tag).or_default() += n;
            p.names += n;
        }
        p
    }

    pub fn add_name(&mut self, name: &str, granularity: ProfileGranularity) {
        if name.is_empty() {
            return;
        }
        self.names += 1;
        match granularity {
            ProfileGranularity::PerName => {
                let tag = majority_script(name).expect("nonempty name");
                *self.counts.entry(tag).or_default() += 1;
            }
            ProfileGranularity::PerCodepoint => {
                let mut any = false;
                for c in name.chars() {
                    let tag = ScriptTag::of(c);
                    if !tag.is_neutral() {
                        *self.counts.entry(tag).or_default() += 1;
                        any = true;
                    }
                }
                if !any {
                    *self.counts.entry(ScriptTag::COMMON).or_default() += 1;
                }
            }
        }
    }

    pub fn merge(&mut self, other: &ScriptProfile) {
        for (&tag, &n) in &other.counts {
            *self.counts.entry(tag).or_default() += n;
        }
        self.names += other.names;
    }

    pub fn counts(&self) -> &BTreeMap<ScriptTag, u64> {
        &self.counts
    }

    /// Number of names added (equals the count total in per-name mode).
    pub fn names(&self) -> u64 {
        self.names
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn entropy<S: Scalar>(&self) -> Result<S, ScriptError> {
        script_entropy(self)
    }
}

/// Shannon entropy in bits of the profile's normalized counts.
pub fn script_entropy<S: Scalar>(profile: &ScriptProfile) -> Result<S, ScriptError> {
    let total = profile.total();
    if total == 0 {
        return Err(ScriptError::EmptyProfile);
    }
    let mut h = S::zero();
    for &n in profile.counts.values() {
        if n == 0 {
            continue;
        }
        let p = S::ratio(n, total);
        h = h - p * p.log2();
    }
    // -0.0 and tiny negative rounding both normalize to zero
    Ok(if h > S::zero() { h } else { S::zero() })
}

/// Allowed scripts per language code.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AllowedScripts {
    map: BTreeMap<LanguageCode, BTreeSet<ScriptTag>>,
}

impl AllowedScripts {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_ALLOWED_SCRIPTS).expect("bundled allowed-scripts list parses")
    }

    pub fn insert(&mut self, language: LanguageCode, scripts: impl IntoIterator<Item = ScriptTag>) {
        self.map.entry(language).or_default().extend(scripts);
    }

    /// `language_code<TAB>Script,Script,...`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        let mut allowed = AllowedScripts::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| ScriptError::AllowedScripts {
                line: line_no,
                message,
            };
            let (code, scripts) = line
                .split_once('\t')
                .ok_or_else(|| err("expected language<TAB>scripts".into()))?;
            let code: LanguageCode = code.trim().parse().map_err(|e| err(format!("{e}")))?;
            let tags = scripts
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(str::parse::<ScriptTag>)
                .collect::<Result<BTreeSet<_>, _>>()
                .map_err(|e| err(e.to_string()))?;
            if tags.is_empty() {
                return Err(err(format!("no scripts listed for {code}")));
            }
            allowed.insert(code, tags);
        }
        Ok(allowed)
    }

    pub fn get(&self, language: &LanguageCode) -> Option<&BTreeSet<ScriptTag>> {
        self.map.get(language)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Judge one label. Languages without an entry pass unfiltered.
    pub fn verdict(&self, language: &LanguageCode, label: &str) -> Verdict {
        let Some(allowed) = self.map.get(language) else {
            return Verdict::Unlisted;
        };
        match majority_script(label) {
            Ok(tag) if allowed.contains(&tag) => Verdict::Kept,
            _ => Verdict::Removed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Kept,
    Removed,
    /// Language absent from the list: kept, with a warning.
    Unlisted,
}

impl Verdict {
    pub fn keeps(self) -> bool {
        !matches!(self, Verdict::Removed)
    }
}

/// Result of partitioning names by allowed script.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterOutcome {
    pub kept: Vec<TypedName>,
    pub removed: Vec<TypedName>,
    /// Languages that had no allowed-scripts entry.
    pub unlisted: BTreeSet<LanguageCode>,
}

/// Partition names into kept and removed. Every input name lands in exactly
/// one side, in input order.
pub fn filter_names(names: impl IntoIterator<Item = TypedName>, allowed: &AllowedScripts) -> FilterOutcome {
    let mut out = FilterOutcome::default();
    for name in names {
        match allowed.verdict(&name.language, &name.label) {
            Verdict::Kept => out.kept.push(name),
            Verdict::Removed => out.removed.push(name),
            Verdict::Unlisted => {
                out.unlisted.insert(name.language.clone());
                out.kept.push(name);
            }
        }
    }
    for lang in &out.unlisted {
        log::warn!("no allowed-scripts entry for {lang}; names passed through unfiltered");
    }
    out
}

/// Per-language profiles.
pub type LanguageProfiles = BTreeMap<LanguageCode, ScriptProfile>;

pub fn profile_names<'a>(
    names: impl IntoIterator<Item = &'a TypedName>,
    granularity: ProfileGranularity,
) -> LanguageProfiles {
    let mut profiles = LanguageProfiles::new();
    for n in names {
        profiles
            .entry(n.language.clone())
            .or_default()
            .add_name(&n.label, granularity);
    }
    profiles
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyRow<S> {
    pub language: LanguageCode,
    pub entropy_before: S,
    pub entropy_after: S,
    pub names_before: u64,
    pub names_after: u64,
    /// Every name was filtered out; `entropy_after` is reported as zero.
    pub emptied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyReport<S> {
    pub rows: Vec<EntropyRow<S>>,
    pub macro_before: S,
    pub macro_after: S,
    pub granularity: ProfileGranularity,
}

fn entropy_or_zero<S: Scalar>(profile: Option<&ScriptProfile>) -> S {
    profile
        .and_then(|p| script_entropy(p).ok())
        .unwrap_or_else(S::zero)
}

/// Per-language entropies before and after filtering plus their unweighted means.
pub fn entropy_report<S: Scalar>(
    before: &LanguageProfiles,
    after: &LanguageProfiles,
    granularity: ProfileGranularity,
) -> EntropyReport<S> {
    let languages: BTreeSet<&LanguageCode> = before.keys().chain(after.keys()).collect();
    let rows: Vec<EntropyRow<S>> = languages
        .into_iter()
        .map(|lang| {
            let b = before.get(lang);
            let a = after.get(lang);
            let names_after = a.map_or(0, ScriptProfile::names);
            EntropyRow {
                language: lang.clone(),
                entropy_before: entropy_or_zero(b),
                entropy_after: entropy_or_zero(a),
                names_before: b.map_or(0, ScriptProfile::names),
                names_after,
                emptied: names_after == 0,
            }
        })
        .collect();
    EntropyReport {
        macro_before: mean(rows.iter().map(|r| r.entropy_before)),
        macro_after: mean(rows.iter().map(|r| r.entropy_after)),
        rows,
        granularity,
    }
}

impl<S: Scalar> EntropyReport<S> {
    pub fn to_tsv(&self) -> String {
        let mut out = format!(
            "# entropy_base=2\tunicode_version={}\tgranularity={}\n",
            unicode_version(),
            self.granularity.as_str()
        );
        let emptied: Vec<&str> = self
            .rows
            .iter()
            .filter(|r| r.emptied)
            .map(|r| r.language.as_str())
            .collect();
        if !emptied.is_empty() {
            out.push_str(&format!("# emptied_languages={}\n", emptied.join(",")));
        }
        out.push_str("language\tentropy_before\tentropy_after\tnames_before\tnames_after\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{:.6}\t{:.6}\t{}\t{}\n",
                r.language,
                r.entropy_before.as_f64(),
                r.entropy_after.as_f64(),
                r.names_before,
                r.names_after
            ));
        }
        out.push_str(&format!(
            "MACRO_AVG\t{:.6}\t{:.6}\t{}\t{}\n",
            self.macro_before.as_f64(),
            self.macro_after.as_f64(),
            self.rows.iter().map(|r| r.names_before).sum::<u64>(),
            self.rows.iter().map(|r| r.names_after).sum::<u64>()
        ));
        out
    }
}
