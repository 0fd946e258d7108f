//! Word-order normalization of PER names against their English label.
//!
//! Each name is split into tokens, each token romanized, and every token
//! permutation scored by edit distance to the English label. The cheapest
//! permutation wins; ties go to the original order, then to the first
//! permutation in lexicographic index order.

pub mod distance;
pub mod romanize;

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io::sanitize_field;
use crate::names::{english_in, group_by_entity, TypedName};
use crate::record::{LanguageCode, Qid};
use crate::scalar::Scalar;
use crate::typing::EntityType;

pub use distance::{edit_distance, edit_distance_with, levenshtein, EditCosts};
pub use romanize::{ExternalRomanizer, RomanizationTable, RomanizeError, Romanizer};

pub const DEFAULT_MAX_TOKENS: usize = 6;

const COMMAS: [char; 3] = [',', '，', '،'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReorderConfig {
    pub max_tokens: usize,
    pub costs: EditCosts,
}

impl Default for ReorderConfig {
    fn default() -> Self {
        ReorderConfig {
            max_tokens: DEFAULT_MAX_TOKENS,
            costs: EditCosts::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    SingleToken,
    TooManyTokens,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReorderDecision {
    pub original: String,
    pub chosen: String,
    pub original_distance: u32,
    pub chosen_distance: u32,
    /// Winning token order as indices into the original tokens.
    pub permutation: Vec<usize>,
    pub skipped: Option<SkipReason>,
}

impl ReorderDecision {
    pub fn reordered(&self) -> bool {
        self.chosen != self.original
    }

    fn unchanged(label: &str, skipped: Option<SkipReason>) -> Self {
        ReorderDecision {
            original: label.to_string(),
            chosen: label.to_string(),
            original_distance: 0,
            chosen_distance: 0,
            permutation: Vec::new(),
            skipped,
        }
    }
}

/// Whitespace tokens with commas stripped; tokens that were only commas vanish.
pub fn tokenize(label: &str) -> Vec<&str> {
    label
        .split_whitespace()
        .map(|t| t.trim_matches(COMMAS))
        .filter(|t| !t.is_empty())
        .collect()
}

/// Rearranges `v` into the next permutation in lexicographic order.
/// Returns false once `v` is the last permutation.
fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

fn join_in<S: AsRef<str>>(parts: &[S], order: &[usize]) -> String {
    order
        .iter()
        .map(|&i| parts[i].as_ref())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Decide with pre-romanized tokens. `romanized[i]` corresponds to `tokens[i]`;
/// it may be empty when the token count rules out a search.
pub fn reorder_tokens(
    label: &str,
    tokens: &[&str],
    romanized: &[String],
    english: &str,
    config: &ReorderConfig,
) -> ReorderDecision {
    if tokens.len() < 2 {
        return ReorderDecision::unchanged(label, Some(SkipReason::SingleToken));
    }
    if tokens.len() > config.max_tokens {
        return ReorderDecision::unchanged(label, Some(SkipReason::TooManyTokens));
    }
    assert_eq!(tokens.len(), romanized.len(), "one romanization per token");
    let target: Vec<char> = english.chars().collect();
    let score = |order: &[usize]| {
        let candidate: Vec<char> = join_in(romanized, order).chars().collect();
        distance::edit_distance_chars(&candidate, &target, config.costs)
    };

    let mut order: Vec<usize> = (0..tokens.len()).collect();
    let original_distance = score(&order);
    let mut best = (original_distance, order.clone());
    while next_permutation(&mut order) {
        let d = score(&order);
        if d < best.0 {
            best = (d, order.clone());
        }
    }
    let (chosen_distance, permutation) = best;
    let identity = permutation.iter().enumerate().all(|(i, &p)| i == p);
    let chosen = if identity {
        label.to_string()
    } else {
        join_in(tokens, &permutation)
    };
    ReorderDecision {
        original: label.to_string(),
        chosen,
        original_distance,
        chosen_distance,
        permutation,
        skipped: None,
    }
}

pub fn reorder_name(
    label: &str,
    english: &str,
    romanizer: &dyn Romanizer,
    config: &ReorderConfig,
) -> Result<ReorderDecision, RomanizeError> {
    let tokens = tokenize(label);
    if tokens.len() < 2 || tokens.len() > config.max_tokens {
        return Ok(reorder_tokens(label, &tokens, &[], english, config));
    }
    let romanized = romanizer.romanize_batch(&tokens)?;
    Ok(reorder_tokens(label, &tokens, &romanized, english, config))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ReorderCounts {
    pub names: u64,
    pub per_names: u64,
    /// English PER labels; they are the target, not a candidate.
    pub reference: u64,
    /// Non-English PER names whose entity has an English label.
    pub evaluated: u64,
    pub no_reference: u64,
    pub reordered: u64,
    pub single_token: u64,
    pub too_many_tokens: u64,
}

impl ReorderCounts {
    pub fn merge(&mut self, other: &ReorderCounts) {
        self.names += other.names;
        self.per_names += other.per_names;
        self.reference += other.reference;
        self.evaluated += other.evaluated;
        self.no_reference += other.no_reference;
        self.reordered += other.reordered;
        self.single_token += other.single_token;
        self.too_many_tokens += other.too_many_tokens;
    }

    /// Reordered names over non-English PER names with an English reference.
    pub fn reordered_fraction<S: Scalar>(&self) -> S {
        S::ratio(self.reordered, self.evaluated)
    }
}

/// One logged decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoggedDecision {
    pub qid: Qid,
    pub language: LanguageCode,
    pub english: String,
    pub decision: ReorderDecision,
}

pub const DECISIONS_HEADER: &str =
    "qid\tlanguage\toriginal\tchosen\toriginal_distance\tchosen_distance\treordered\tenglish\tskipped";

pub fn write_decisions_header<W: Write>(out: &mut W, config: &ReorderConfig, romanizer: &str) -> io::Result<()> {
    writeln!(
        out,
        "# substitution_cost={}\tmax_tokens={}\tromanizer={}\tcommas=stripped_before_permutation",
        config.costs.substitution, config.max_tokens, romanizer
    )?;
    writeln!(out, "{DECISIONS_HEADER}")
}

pub fn write_decision<W: Write>(out: &mut W, logged: &LoggedDecision) -> io::Result<()> {
    let d = &logged.decision;
    let skipped = match d.skipped {
        None => "",
        Some(SkipReason::SingleToken) => "single_token",
        Some(SkipReason::TooManyTokens) => "too_many_tokens",
    };
    writeln!(
        out,
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        logged.qid,
        logged.language,
        sanitize_field(&d.original).0,
        sanitize_field(&d.chosen).0,
        d.original_distance,
        d.chosen_distance,
        u8::from(d.reordered()),
        sanitize_field(&logged.english).0,
        skipped
    )
}

/// Decide many `(label, english)` pairs with one romanizer call for all
/// tokens, then score in parallel. Output order matches input order.
pub fn reorder_pairs(
    pairs: &[(&str, &str)],
    romanizer: &dyn Romanizer,
    config: &ReorderConfig,
) -> Result<Vec<ReorderDecision>, RomanizeError> {
    let searchable = |n: usize| (2..=config.max_tokens).contains(&n);
    let token_lists: Vec<Vec<&str>> = pairs.iter().map(|(label, _)| tokenize(label)).collect();
    let mut flat: Vec<&str> = Vec::new();
    let mut offsets = Vec::with_capacity(token_lists.len());
    for tokens in &token_lists {
        offsets.push(flat.len());
        if searchable(tokens.len()) {
            flat.extend(tokens);
        }
    }
    let romanized = romanizer.romanize_batch(&flat)?;

    Ok(pairs
        .par_iter()
        .zip(token_lists.par_iter())
        .zip(offsets.par_iter())
        .map(|((&(label, english), tokens), &offset)| {
            let rom = if searchable(tokens.len()) {
                &romanized[offset..offset + tokens.len()]
            } else {
                &[]
            };
            reorder_tokens(label, tokens, rom, english, config)
        })
        .collect())
}

/// Reorder a batch of whole entities. Only PER rows of entities that have
/// an English label are considered. Row order inside each group is kept.
pub fn reorder_groups(
    mut groups: Vec<Vec<TypedName>>,
    romanizer: &dyn Romanizer,
    config: &ReorderConfig,
) -> Result<(Vec<Vec<TypedName>>, Vec<LoggedDecision>, ReorderCounts), RomanizeError> {
    let mut counts = ReorderCounts::default();
    let mut tasks: Vec<(usize, usize, String)> = Vec::new();
    for (g, group) in groups.iter().enumerate() {
        counts.names += group.len() as u64;
        let english = english_in(group);
        for (r, name) in group.iter().enumerate() {
            if !name.types.contains(EntityType::Per) {
                continue;
            }
            counts.per_names += 1;
            if name.language.is_english() {
                counts.reference += 1;
                continue;
            }
            match english {
                Some(e) => tasks.push((g, r, e.to_string())),
                None => counts.no_reference += 1,
            }
        }
    }

    let pairs: Vec<(&str, &str)> = tasks
        .iter()
        .map(|(g, r, e)| (groups[*g][*r].label.as_str(), e.as_str()))
        .collect();
    let decisions = reorder_pairs(&pairs, romanizer, config)?;
    drop(pairs);

    let mut logged = Vec::with_capacity(decisions.len());
    for ((g, r, english), decision) in tasks.into_iter().zip(decisions) {
        counts.evaluated += 1;
        match decision.skipped {
            Some(SkipReason::SingleToken) => counts.single_token += 1,
            Some(SkipReason::TooManyTokens) => counts.too_many_tokens += 1,
            None => {}
        }
        let row = &mut groups[g][r];
        if decision.reordered() {
            counts.reordered += 1;
            row.label = decision.chosen.clone();
        }
        logged.push(LoggedDecision {
            qid: row.qid,
            language: row.language.clone(),
            english,
            decision,
        });
    }
    Ok((groups, logged, counts))
}

/// Reorder a full name list grouped by entity. Returns the normalized names
/// and the counters from which the reordered fraction is derived.
pub fn reorder_corpus(
    names: Vec<TypedName>,
    romanizer: &dyn Romanizer,
    config: &ReorderConfig,
) -> Result<(Vec<TypedName>, ReorderCounts), RomanizeError> {
    let groups: Vec<Vec<TypedName>> = group_by_entity(names.into_iter().map(Ok::<_, ()>))
        .map(|g| g.expect("infallible"))
        .collect();
    let (groups, _, counts) = reorder_groups(groups, romanizer, config)?;
    Ok((groups.into_iter().flatten().collect(), counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::q;
    use crate::typing::EntityTypeSet;
    use proptest::prelude::*;

    fn builtin() -> RomanizationTable {
        RomanizationTable::builtin()
    }

    fn decide(label: &str, english: &str) -> ReorderDecision {
        reorder_name(label, english, &builtin(), &ReorderConfig::default()).unwrap()
    }

    #[test]
    fn biden_is_reordered() {
        let d = decide("Байден Джо", "Joe Biden");
        assert_eq!(d.chosen, "Джо Байден");
        assert_eq!(d.original_distance, 10);
        assert_eq!(d.chosen_distance, 6);
        assert!(d.reordered());
    }

    #[test]
    fn levenshtein_costs_agree_on_the_choice() {
        let cfg = ReorderConfig {
            costs: EditCosts::levenshtein(),
            ..Default::default()
        };
        let d = reorder_name("Байден Джо", "Joe Biden", &builtin(), &cfg).unwrap();
        assert_eq!(d.chosen, "Джо Байден");
        assert_eq!(d.chosen_distance, 5);
    }

    #[test]
    fn identity_keeps_label_verbatim() {
        let d = decide("Джо  Байден", "Joe Biden");
        assert_eq!(d.chosen, "Джо  Байден");
        assert!(!d.reordered());
        assert_eq!(decide("Мадонна", "Madonna").skipped, Some(SkipReason::SingleToken));
    }

    #[test]
    fn commas_are_stripped_before_permuting() {
        assert_eq!(tokenize("Байден, Джо"), vec!["Байден", "Джо"]);
        assert_eq!(tokenize("a , b"), vec!["a", "b"]);
        assert_eq!(decide("Байден, Джо", "Joe Biden").chosen, "Джо Байден");
    }

    #[test]
    fn ties_keep_the_original_order() {
        // Both orders are equally far from an unrelated reference.
        let d = decide("ab ab", "zz");
        assert!(!d.reordered());
        let t = RomanizationTable::parse_tsv("").unwrap();
        let d = reorder_name("b a", "x", &t, &ReorderConfig::default()).unwrap();
        assert_eq!(d.original_distance, d.chosen_distance);
        assert_eq!(d.chosen, "b a");
    }

    #[test]
    fn too_many_tokens_are_left_alone() {
        let label = "a b c d e f g";
        let d = decide(label, "g f e d c b a");
        assert_eq!(d.skipped, Some(SkipReason::TooManyTokens));
        assert_eq!(d.chosen, label);
    }

    #[test]
    fn permutations_in_lexicographic_order() {
        let mut v = vec![0, 1, 2];
        let mut seen = vec![v.clone()];
        while next_permutation(&mut v) {
            seen.push(v.clone());
        }
        assert_eq!(
            seen,
            vec![
                vec![0, 1, 2],
                vec![0, 2, 1],
                vec![1, 0, 2],
                vec![1, 2, 0],
                vec![2, 0, 1],
                vec![2, 1, 0]
            ]
        );
    }

    #[test]
    fn corpus_counts_only_per_names_with_reference() {
        let per = EntityTypeSet::single(EntityType::Per);
        let loc = EntityTypeSet::single(EntityType::Loc);
        let names = vec![
            TypedName::new(q(6279), "en", "Joe Biden", per),
            TypedName::new(q(6279), "ru", "Байден Джо", per),
            TypedName::new(q(7), "ru", "Байден Джо", per),
            TypedName::new(q(8), "en", "Moscow Oblast", loc),
            TypedName::new(q(8), "ru", "Область Московская", loc),
        ];
        let (out, counts) = reorder_corpus(names, &builtin(), &ReorderConfig::default()).unwrap();
        assert_eq!(out[1].label, "Джо Байден");
        assert_eq!(out[2].label, "Байден Джо");
        assert_eq!(out[4].label, "Область Московская");
        assert_eq!(counts.per_names, 3);
        assert_eq!(counts.reference, 1);
        assert_eq!(counts.evaluated, 1);
        assert_eq!(counts.no_reference, 1);
        assert_eq!(counts.reordered, 1);
        assert_eq!(counts.reordered_fraction::<f64>(), 1.0);
    }

    #[test]
    fn batched_external_matches_table() {
        let per = EntityTypeSet::single(EntityType::Per);
        let names = vec![
            TypedName::new(q(1), "en", "Joe Biden", per),
            TypedName::new(q(1), "xx", "biden joe", per),
        ];
        let ext = ExternalRomanizer::new("sed 's/j/J/; s/b/B/'");
        let (out, counts) = reorder_corpus(names, &ext, &ReorderConfig::default()).unwrap();
        assert_eq!(out[1].label, "joe biden");
        assert_eq!(counts.reordered, 1);
    }

    fn brute_force(tokens: &[String], english: &str) -> u32 {
        // Independent oracle: all orderings via recursion.
        fn go(rest: &mut Vec<String>, acc: &mut Vec<String>, english: &str, best: &mut u32) {
            if rest.is_empty() {
                *best = (*best).min(edit_distance(&acc.join(" "), english));
                return;
            }
            for i in 0..rest.len() {
                let t = rest.remove(i);
                acc.push(t.clone());
                go(rest, acc, english, best);
                acc.pop();
                rest.insert(i, t);
            }
        }
        let mut best = u32::MAX;
        go(&mut tokens.to_vec(), &mut Vec::new(), english, &mut best);
        best
    }

    proptest! {
        #[test]
        fn chosen_distance_is_minimal_and_stable(
            tokens in proptest::collection::vec("[a-d]{1,3}", 2..5),
            english in "[a-d ]{0,10}",
        ) {
            let label = tokens.join(" ");
            let table = RomanizationTable::new();
            let cfg = ReorderConfig::default();
            let d = reorder_name(&label, &english, &table, &cfg).unwrap();
            prop_assert!(d.chosen_distance <= d.original_distance);
            prop_assert_eq!(d.chosen_distance, brute_force(&tokens, &english));
            let mut sorted_in: Vec<&str> = tokenize(&label);
            let mut sorted_out: Vec<&str> = tokenize(&d.chosen);
            sorted_in.sort();
            sorted_out.sort();
            prop_assert_eq!(sorted_in, sorted_out);
            let again = reorder_name(&d.chosen, &english, &table, &cfg).unwrap();
            prop_assert_eq!(again.chosen, d.chosen);
        }
    }
}
