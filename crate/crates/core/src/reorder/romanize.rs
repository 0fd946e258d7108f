//! Pluggable romanization: a table-driven converter and an external-command
//! adapter with a line-in/line-out contract.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};

use rayon::prelude::*;
use thiserror::Error;

pub const BUILTIN_CYRILLIC: &str = include_str!("../../data/romanization/cyrillic.tsv");
pub const BUILTIN_GREEK: &str = include_str!("../../data/romanization/greek.tsv");
pub const BUILTIN_HEBREW: &str = include_str!("../../data/romanization/hebrew.tsv");

#[derive(Debug, Error)]
pub enum RomanizeError {
    #[error("romanization table line {line}: {message}")]
    Table { line: usize, message: String },
    #[error("external romanizer {command:?} failed: {message}")]
    External { command: String, message: String },
}

/// Maps text to a crude Latin transliteration.
pub trait Romanizer: Send + Sync {
    /// Romanize each input independently, preserving order and count.
    fn romanize_batch(&self, texts: &[&str]) -> Result<Vec<String>, RomanizeError>;

    fn romanize(&self, text: &str) -> Result<String, RomanizeError> {
        Ok(self.romanize_batch(&[text])?.pop().unwrap_or_default())
    }
}

/// Longest-match-first substitution table. Unmapped characters pass through.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RomanizationTable {
    entries: HashMap<String, String>,
    max_key_chars: usize,
}

impl RomanizationTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Cyrillic, Greek and Hebrew tables merged.
    pub fn builtin() -> Self {
        let mut table = RomanizationTable::new();
        for text in [BUILTIN_CYRILLIC, BUILTIN_GREEK, BUILTIN_HEBREW] {
            table
                .merge_tsv(text)
                .expect("bundled romanization tables parse");
        }
        table
    }

    /// Insert a mapping. Keys must be nonempty and contain no whitespace, so
    /// romanizing whitespace-separated tokens one at a time is equivalent to
    /// romanizing the joined string.
    pub fn insert(&mut self, source: &str, replacement: &str) -> Result<(), String> {
        if source.is_empty() {
            return Err("empty source sequence".into());
        }
        if source.chars().any(char::is_whitespace) {
            return Err(format!("source {source:?} contains whitespace"));
        }
        if let Some(existing) = self.entries.get(source) {
            if existing != replacement {
                return Err(format!(
                    "conflicting replacements for {source:?}: {existing:?} vs {replacement:?}"
                ));
            }
        }
        self.max_key_chars = self.max_key_chars.max(source.chars().count());
        self.entries.insert(source.to_string(), replacement.to_string());
        Ok(())
    }

    /// `source<TAB>replacement` lines; `#` comment lines and blank lines are
    /// skipped. File order does not matter.
    pub fn parse_tsv(text: &str) -> Result<Self, RomanizeError> {
        let mut table = RomanizationTable::new();
        table.merge_tsv(text)?;
        Ok(table)
    }

    pub fn merge_tsv(&mut self, text: &str) -> Result<(), RomanizeError> {
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (source, replacement) = line.split_once('\t').ok_or_else(|| RomanizeError::Table {
                line: i + 1,
                message: "expected source<TAB>replacement".into(),
            })?;
            self.insert(source, replacement)
                .map_err(|message| RomanizeError::Table { line: i + 1, message })?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Greedy left-to-right, longest match first.
    pub fn apply(&self, text: &str) -> String {
        let chars: Vec<char> = text.chars().collect();
        let mut out = String::with_capacity(text.len());
        let mut key = String::new();
        let mut i = 0;
        'outer: while i < chars.len() {
            let longest = self.max_key_chars.min(chars.len() - i);
            for len in (1..=longest).rev() {
                key.clear();
                key.extend(&chars[i..i + len]);
                if let Some(rep) = self.entries.get(key.as_str()) {
                    out.push_str(rep);
                    i += len;
                    continue 'outer;
                }
            }
            out.push(chars[i]);
            i += 1;
        }
        out
    }
}

impl Romanizer for RomanizationTable {
    fn romanize_batch(&self, texts: &[&str]) -> Result<Vec<String>, RomanizeError> {
        Ok(texts.par_iter().map(|t| self.apply(t)).collect())
    }

    fn romanize(&self, text: &str) -> Result<String, RomanizeError> {
        Ok(self.apply(text))
    }
}

/// Runs a shell command once per batch: one UTF-8 line in, one line out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalRomanizer {
    command: String,
}

impl ExternalRomanizer {
    pub fn new(command: impl Into<String>) -> Self {
        ExternalRomanizer {
            command: command.into(),
        }
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    fn fail(&self, message: impl Into<String>) -> RomanizeError {
        RomanizeError::External {
            command: self.command.clone(),
            message: message.into(),
        }
    }
}

impl Romanizer for ExternalRomanizer {
    fn romanize_batch(&self, texts: &[&str]) -> Result<Vec<String>, RomanizeError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| self.fail(format!("spawn: {e}")))?;

        let mut input = String::new();
        for t in texts {
            input.push_str(&t.replace(['\n', '\r'], " "));
            input.push('\n');
        }
        let mut stdin = child.stdin.take().expect("piped stdin");
        let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()));

        let stdout = child.stdout.take().expect("piped stdout");
        let mut lines = Vec::with_capacity(texts.len());
        for line in BufReader::new(stdout).lines() {
            lines.push(line.map_err(|e| self.fail(format!("reading output: {e}")))?);
        }
        let status = child.wait().map_err(|e| self.fail(format!("wait: {e}")))?;
        let written = writer.join().expect("writer thread");
        if !status.success() {
            return Err(self.fail(format!("exited with {status}")));
        }
        written.map_err(|e| self.fail(format!("writing input: {e}")))?;
        if lines.len() != texts.len() {
            return Err(self.fail(format!(
                "expected {} output lines, got {}",
                texts.len(),
                lines.len()
            )));
        }
        Ok(lines)
    }
}
