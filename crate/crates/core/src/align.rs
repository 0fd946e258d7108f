//! Crossing-alignment statistics and reordering evaluation.
//!
//! Word alignment itself is external. This module writes the aligner's
//! `source ||| target` bitext, reads back its `i-j` pair lines, and computes
//! mean crossing alignments (MCA) per language. It also scores reordering
//! output against a gold TSV with accuracy and character LCS F1.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::record::LanguageCode;
use crate::reorder::tokenize;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("reference label is empty")]
    EmptyReference,
    #[error("{outputs} system outputs for {gold} gold examples")]
    CountMismatch { outputs: usize, gold: usize },
    #[error("gold line {line}: {message}")]
    Gold { line: usize, message: String },
    #[error("bitext index line {line}: {message}")]
    Index { line: usize, message: String },
    #[error("{alignments} alignment lines for {names} bitext lines")]
    AlignmentCount { alignments: usize, names: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Token alignment edges between a label (source) and its English label
/// (target). Duplicate edges collapse.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlignmentGraph {
    edges: BTreeSet<(usize, usize)>,
}

impl AlignmentGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_edges<I: IntoIterator<Item = (usize, usize)>>(edges: I) -> Self {
        AlignmentGraph {
            edges: edges.into_iter().collect(),
        }
    }

    /// One-to-one alignment of source token `i` to target `perm[i]`.
    pub fn from_permutation(perm: &[usize]) -> Self {
        Self::from_edges(perm.iter().copied().enumerate())
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Drop edges outside the given token counts. Returns how many went.
    pub fn restrict(&mut self, source_tokens: usize, target_tokens: usize) -> usize {
        let before = self.edges.len();
        self.edges.retain(|&(i, j)| i < source_tokens && j < target_tokens);
        before - self.edges.len()
    }

    pub fn crossing_count(&self) -> u64 {
        crossing_count(self)
    }
}

/// Unordered edge pairs `{(i,j),(k,l)}` with `(i-k)(j-l) < 0`.
///
/// Edges arrive sorted by source index. Walking runs of equal source index,
/// each edge counts previously seen edges with a strictly larger target
/// index; the run is inserted into a Fenwick tree only after it has been
/// queried, so edges sharing a source index never count against each other.
pub fn crossing_count(g: &AlignmentGraph) -> u64 {
    if g.edges.len() < 2 {
        return 0;
    }
    let targets: Vec<usize> = {
        let mut t: Vec<usize> = g.edges.iter().map(|e| e.1).collect();
        t.sort_unstable();
        t.dedup();
        t
    };
    let rank = |j: usize| targets.binary_search(&j).expect("target present");
    let mut tree = vec![0u64; targets.len() + 1];
    let mut inserted = 0u64;
    let mut crossings = 0u64;

    let edges: Vec<(usize, usize)> = g.edges.iter().copied().collect();
    let mut start = 0;
    while start < edges.len() {
        let mut end = start;
        while end < edges.len() && edges[end].0 == edges[start].0 {
            end += 1;
        }
        for &(_, j) in &edges[start..end] {
            let mut pos = rank(j) + 1;
            let mut at_most = 0;
            while pos > 0 {
                at_most += tree[pos];
                pos &= pos - 1;
            }
            crossings += inserted - at_most;
        }
        for &(_, j) in &edges[start..end] {
            let mut pos = rank(j) + 1;
            while pos < tree.len() {
                tree[pos] += 1;
                pos += pos & pos.wrapping_neg();
            }
            inserted += 1;
        }
        start = end;
    }
    crossings
}

/// Parse one aligner output line. `Err` carries the first bad token.
pub fn parse_alignment_line(line: &str) -> Result<AlignmentGraph, String> {
    let mut edges = BTreeSet::new();
    for token in line.split_whitespace() {
        let (i, j) = token
            .split_once('-')
            .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)))
            .ok_or_else(|| token.to_string())?;
        edges.insert((i, j));
    }
    Ok(AlignmentGraph { edges })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AlignmentParseStats {
    pub lines: u64,
    pub malformed: u64,
}

/// One entry per input line; malformed lines yield `None` so the result
/// stays line-aligned with the bitext.
pub fn parse_alignments<R: BufRead>(
    reader: R,
) -> Result<(Vec<Option<AlignmentGraph>>, AlignmentParseStats), EvalError> {
    let mut stats = AlignmentParseStats::default();
    let mut graphs = Vec::new();
    for line in reader.lines() {
        let line = line?;
        stats.lines += 1;
        match parse_alignment_line(&line) {
            Ok(g) => graphs.push(Some(g)),
            Err(token) => {
                log::warn!("alignment line {}: bad pair {token:?}", stats.lines);
                stats.malformed += 1;
                graphs.push(None);
            }
        }
    }
    Ok((graphs, stats))
}

/// One bitext line: whitespace tokens, ` ||| ` separator.
pub fn bitext_line(source: &str, target: &str) -> String {
    format!(
        "{} ||| {}",
        tokenize(source).join(" "),
        tokenize(target).join(" ")
    )
}

pub fn parse_bitext_line(line: &str) -> Option<(Vec<&str>, Vec<&str>)> {
    let (s, t) = line.split_once("|||")?;
    Some((s.split_whitespace().collect(), t.split_whitespace().collect()))
}

/// Sidecar for a bitext file: which language each line belongs to.
pub const BITEXT_INDEX_HEADER: &str = "line\tqid\tlanguage\tsource_tokens\ttarget_tokens";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitextEntry {
    pub language: LanguageCode,
    pub source_tokens: usize,
    pub target_tokens: usize,
}

pub fn read_bitext_index<R: BufRead>(reader: R) -> Result<Vec<BitextEntry>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 && line.starts_with("line\t") || line.is_empty() {
            continue;
        }
        let bad = |message: &str| EvalError::Index {
            line: i + 1,
            message: message.to_string(),
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(bad("expected 5 columns"));
        }
        out.push(BitextEntry {
            language: cols[2].parse().map_err(|_| bad("bad language code"))?,
            source_tokens: cols[3].parse().map_err(|_| bad("bad token count"))?,
            target_tokens: cols[4].parse().map_err(|_| bad("bad token count"))?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McaRow<S> {
    pub language: LanguageCode,
    /// Names with a nonempty alignment.
    pub name_count: u64,
    pub mca: S,
    /// Names whose alignment was empty or malformed.
    pub unaligned: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct McaAccumulator {
    aligned: u64,
    crossings: u64,
    unaligned: u64,
}

/// Mean crossing count per language over aligned names only. Languages
/// without a single aligned name are omitted with a warning.
pub fn mean_crossing_alignments<S: Scalar>(
    items: impl IntoIterator<Item = (LanguageCode, Option<AlignmentGraph>)>,
) -> Vec<McaRow<S>> {
    let mut acc: BTreeMap<LanguageCode, McaAccumulator> = BTreeMap::new();
    for (lang, graph) in items {
        let a = acc.entry(lang).or_default();
        match graph {
            Some(g) if !g.is_empty() => {
                a.aligned += 1;
                a.crossings += crossing_count(&g);
            }
            _ => a.unaligned += 1,
        }
    }
    acc.into_iter()
        .filter_map(|(language, a)| {
            if a.aligned == 0 {
                log::warn!("language {language}: no aligned names, omitted from MCA");
                return None;
            }
            Some(McaRow {
                mca: S::ratio(a.crossings, a.aligned),
                language,
                name_count: a.aligned,
                unaligned: a.unaligned,
            })
        })
        .collect()
}

pub const MCA_HEADER: &str = "language\tname_count\tmca\tunaligned";

pub fn mca_to_tsv<S: Scalar>(rows: &[McaRow<S>]) -> String {
    let mut out = format!("{MCA_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{:.6}\t{}",
            r.language,
            r.name_count,
            r.mca.as_f64(),
            r.unaligned
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin<S> {
    pub low: S,
    pub high: S,
    pub language_count: u64,
}

/// Fixed-width bins starting at 0 covering every language's MCA. Bins are
/// half-open `[low, high)`.
pub fn mca_histogram<S: Scalar>(rows: &[McaRow<S>], bin_width: S) -> Vec<HistogramBin<S>> {
    assert!(bin_width > S::zero(), "bin width must be positive");
    let max = rows.iter().map(|r| r.mca).fold(S::zero(), |a, b| a.max(b));
    let bins = (max / bin_width).floor().to_usize().unwrap_or(0) + 1;
    let mut counts = vec![0u64; bins];
    for r in rows {
        let b = (r.mca / bin_width).floor().to_usize().unwrap_or(0).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, language_count)| HistogramBin {
            low: S::from_count(i as u64) * bin_width,
            high: S::from_count(i as u64 + 1) * bin_width,
            language_count,
        })
        .collect()
}

pub const HISTOGRAM_HEADER: &str = "bin_low\tbin_high\tlanguage_count";

pub fn histogram_to_tsv<S: Scalar>(bins: &[HistogramBin<S>]) -> String {
    let mut out = format!("{HISTOGRAM_HEADER}\n");
    for b in bins {
        let _ = writeln!(
            out,
            "{:.6}\t{:.6}\t{}",
            b.low.as_f64(),
            b.high.as_f64(),
            b.language_count
        );
    }
    out
}

/// Character-level longest common subsequence length.
pub fn lcs_len(a: &[char], b: &[char]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for &ca in a {
        for (j, &cb) in b.iter().enumerate() {
            curr[j + 1] = if ca == cb {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// F1 of LCS-based precision (over the hypothesis) and recall (over the
/// reference).
pub fn lcs_f1<S: Scalar>(hypothesis: &str, reference: &str) -> Result<S, EvalError> {
    let h: Vec<char> = hypothesis.chars().collect();
    let r: Vec<char> = reference.chars().collect();
    if r.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    let l = lcs_len(&h, &r) as u64;
    if l == 0 {
        return Ok(S::zero());
    }
    let p = S::ratio(l, h.len() as u64);
    let rc = S::ratio(l, r.len() as u64);
    let two = S::one() + S::one();
    Ok(two * p * rc / (p + rc))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldReorderingExample {
    pub language: LanguageCode,
    pub input: String,
    pub gold: String,
    pub needs_reordering: bool,
    /// English label for running the reorderer on this example.
    pub english: Option<String>,
}

impl GoldReorderingExample {
    pub fn validate(&self) -> Result<(), String> {
        if self.needs_reordering != (self.input != self.gold) {
            return Err("needs_reordering disagrees with input/gold".into());
        }
        if self.gold.trim().is_empty() {
            return Err("empty gold label".into());
        }
        let mut a = tokenize(&self.input);
        let mut b = tokenize(&self.gold);
        a.sort_unstable();
        b.sort_unstable();
        if a != b {
            return Err("gold is not a permutation of the input tokens".into());
        }
        Ok(())
    }
}

pub const GOLD_HEADER: &str = "language\tinput\tgold\tneeds_reordering\tenglish";

/// Gold TSV: language, input, gold, needs_reordering (0/1), optional english.
/// A header row and `#` comment lines are skipped.
pub fn read_gold<R: BufRead>(reader: R) -> Result<Vec<GoldReorderingExample>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() || line.starts_with('#') || line.starts_with("language\t") {
            continue;
        }
        let bad = |message: String| EvalError::Gold { line: i + 1, message };
        let cols: Vec<&str> = line.split('\t').collect();
        if !(4..=5).contains(&cols.len()) {
            return Err(bad(format!("expected 4 or 5 columns, got {}", cols.len())));
        }
        let needs_reordering = match cols[3] {
            "0" => false,
            "1" => true,
            other => return Err(bad(format!("needs_reordering must be 0 or 1, got {other:?}"))),
        };
        let ex = GoldReorderingExample {
            language: cols[0]
                .parse()
                .map_err(|_| bad(format!("bad language code {:?}", cols[0])))?,
            input: cols[1].to_string(),
            gold: cols[2].to_string(),
            needs_reordering,
            english: cols.get(4).filter(|e| !e.is_empty()).map(|e| e.to_string()),
        };
        ex.validate().map_err(bad)?;
        out.push(ex);
    }
    Ok(out)
}

/// Scores in percent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReorderingScores<S> {
    pub examples: u64,
    pub accuracy: S,
    pub mean_f1: S,
    /// Positive class is "needs reordering"; a system predicts positive
    /// when its output differs from the input.
    pub precision: S,
    pub recall: S,
    pub true_positives: u64,
    pub predicted_positives: u64,
    pub actual_positives: u64,
}

impl<S: Scalar> ReorderingScores<S> {
    pub fn tsv_row(&self, system: &str) -> String {
        format!(
            "{system}\t{}\t{:.1}\t{:.1}\t{:.1}\t{:.1}",
            self.examples,
            self.accuracy.as_f64(),
            self.mean_f1.as_f64(),
            self.precision.as_f64(),
            self.recall.as_f64()
        )
    }
}

pub const SCORES_HEADER: &str = "system\texamples\taccuracy\tmean_f1\tprecision\trecall";

pub fn evaluate_reordering<S: Scalar>(
    outputs: &[String],
    gold: &[GoldReorderingExample],
) -> Result<ReorderingScores<S>, EvalError> {
    if outputs.len() != gold.len() {
        return Err(EvalError::CountMismatch {
            outputs: outputs.len(),
            gold: gold.len(),
        });
    }
    let f1s: Vec<S> = outputs
        .par_iter()
        .zip(gold.par_iter())
        .map(|(o, g)| lcs_f1::<S>(o, &g.gold))
        .collect::<Result<_, _>>()?;
    let f1_sum = f1s.into_iter().fold(S::zero(), |a, b| a + b);

    let mut correct = 0u64;
    let (mut tp, mut predicted, mut actual) = (0u64, 0u64, 0u64);
    for (o, g) in outputs.iter().zip(gold) {
        correct += u64::from(*o == g.gold);
        let changed = *o != g.input;
        predicted += u64::from(changed);
        actual += u64::from(g.needs_reordering);
        tp += u64::from(changed && g.needs_reordering);
    }
    let n = gold.len() as u64;
    let hundred = S::hundred();
    Ok(ReorderingScores {
        examples: n,
        accuracy: S::ratio(correct, n) * hundred,
        mean_f1: if n == 0 {
            S::zero()
        } else {
            f1_sum / S::from_count(n) * hundred
        },
        precision: S::ratio(tp, predicted) * hundred,
        recall: S::ratio(tp, actual) * hundred,
        true_positives: tp,
        predicted_positives: predicted,
        actual_positives: actual,
    })
}

pub fn write_lines<W: Write>(out: &mut W, lines: &[String]) -> io::Result<()> {
    for l in lines {
        writeln!(out, "{l}")?;
    }
    Ok(())
}
