//! Final resource files: one combined TSV, one per entity type, a
//! per-language count table and a JSON summary.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::io::{sanitize_field, AtomicFile};
use crate::names::{english_in, TypedName};
use crate::record::{LanguageCode, Qid};
use crate::typing::EntityType;

pub const RESOURCE_HEADER: &str = "wikidata_id\teng\tlabel\tlanguage\ttype";
pub const ALL_FILE: &str = "all_names.tsv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const LANGUAGE_FILE: &str = "language_counts.tsv";

pub fn type_file(t: EntityType) -> &'static str {
    match t {
        EntityType::Per => "per_names.tsv",
        EntityType::Loc => "loc_names.tsv",
        EntityType::Org => "org_names.tsv",
    }
}

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("writing {path}")]
    Io { path: PathBuf, source: io::Error },
    #[error("input out of order: {next} after {previous}")]
    Unsorted { previous: Qid, next: Qid },
}

/// Names per language code.
pub fn language_counts<'a>(names: impl IntoIterator<Item = &'a TypedName>) -> BTreeMap<LanguageCode, u64> {
    let mut counts = BTreeMap::new();
    for n in names {
        *counts.entry(n.language.clone()).or_insert(0) += 1;
    }
    counts
}

/// Languages with exactly one name.
pub fn singleton_languages(counts: &BTreeMap<LanguageCode, u64>) -> BTreeSet<LanguageCode> {
    counts
        .iter()
        .filter(|(_, &n)| n == 1)
        .map(|(l, _)| l.clone())
        .collect()
}

/// Remove every name in a language that has only one name.
pub fn drop_singleton_languages(names: Vec<TypedName>) -> (Vec<TypedName>, BTreeSet<LanguageCode>) {
    let dropped = singleton_languages(&language_counts(&names));
    let kept = names
        .into_iter()
        .filter(|n| !dropped.contains(&n.language))
        .collect();
    (kept, dropped)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ResourceSummary {
    pub total_names: u64,
    pub entities: u64,
    pub language_codes: u64,
    pub higher_level_languages: u64,
    pub per_names: u64,
    pub loc_names: u64,
    pub org_names: u64,
    pub dropped_languages: Vec<String>,
    pub dropped_names: u64,
    pub sanitized_fields: u64,
}

struct Sink {
    file: BufWriter<AtomicFile>,
    path: PathBuf,
}

impl Sink {
    fn create(path: PathBuf) -> Result<Self, EmitError> {
        let file = AtomicFile::create(&path).map_err(|source| EmitError::Io {
            path: path.clone(),
            source,
        })?;
        let mut sink = Sink {
            file: BufWriter::new(file),
            path,
        };
        sink.line(RESOURCE_HEADER)?;
        Ok(sink)
    }

    fn line(&mut self, text: &str) -> Result<(), EmitError> {
        self.file
            .write_all(text.as_bytes())
            .and_then(|_| self.file.write_all(b"\n"))
            .map_err(|source| EmitError::Io {
                path: self.path.clone(),
                source,
            })
    }

    fn commit(self) -> Result<(), EmitError> {
        let path = self.path;
        self.file
            .into_inner()
            .map_err(|e| e.into_error())
            .and_then(AtomicFile::commit)
            .map(|_| ())
            .map_err(|source| EmitError::Io { path, source })
    }
}

/// Streams entity groups (in ascending qid order) into the resource files.
/// Nothing becomes visible until [`ResourceWriter::finish`].
pub struct ResourceWriter {
    dir: PathBuf,
    all: Sink,
    per_type: Vec<(EntityType, Sink)>,
    dropped: BTreeSet<LanguageCode>,
    languages: BTreeMap<LanguageCode, u64>,
    summary: ResourceSummary,
    last: Option<Qid>,
}

impl ResourceWriter {
    pub fn create(dir: &Path, dropped: BTreeSet<LanguageCode>) -> Result<Self, EmitError> {
        std::fs::create_dir_all(dir).map_err(|source| EmitError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let per_type = EntityType::ALL
            .iter()
            .map(|&t| Ok((t, Sink::create(dir.join(type_file(t)))?)))
            .collect::<Result<_, EmitError>>()?;
        Ok(ResourceWriter {
            dir: dir.to_path_buf(),
            all: Sink::create(dir.join(ALL_FILE))?,
            per_type,
            summary: ResourceSummary {
                dropped_languages: dropped.iter().map(|l| l.to_string()).collect(),
                ..Default::default()
            },
            dropped,
            languages: BTreeMap::new(),
            last: None,
        })
    }

    fn clean(&mut self, field: &str) -> String {
        let (text, changed) = sanitize_field(field);
        self.summary.sanitized_fields += u64::from(changed);
        text.into_owned()
    }

    /// Write one entity. Rows are ordered by language code.
    pub fn write_group(&mut self, group: &[TypedName]) -> Result<(), EmitError> {
        let Some(first) = group.first() else {
            return Ok(());
        };
        let qid = first.qid;
        if let Some(previous) = self.last {
            if qid <= previous {
                return Err(EmitError::Unsorted { previous, next: qid });
            }
        }
        self.last = Some(qid);

        let english = english_in(group).unwrap_or("").to_string();
        let mut rows: Vec<&TypedName> = group.iter().collect();
        rows.sort_by(|a, b| a.language.cmp(&b.language));
        let mut wrote_any = false;
        for name in rows {
            if self.dropped.contains(&name.language) {
                self.summary.dropped_names += 1;
                continue;
            }
            let eng = self.clean(&english);
            let label = self.clean(&name.label);
            let line = format!(
                "{}\t{}\t{}\t{}\t{}",
                qid,
                eng,
                label,
                name.language,
                name.types.to_column()
            );
            self.all.line(&line)?;
            self.summary.total_names += 1;
            *self.languages.entry(name.language.clone()).or_insert(0) += 1;
            for (t, sink) in &mut self.per_type {
                if name.types.contains(*t) {
                    sink.line(&line)?;
                    match t {
                        EntityType::Per => self.summary.per_names += 1,
                        EntityType::Loc => self.summary.loc_names += 1,
                        EntityType::Org => self.summary.org_names += 1,
                    }
                }
            }
            wrote_any = true;
        }
        self.summary.entities += u64::from(wrote_any);
        Ok(())
    }

    pub fn finish(mut self) -> Result<ResourceSummary, EmitError> {
        self.summary.language_codes = self.languages.len() as u64;
        self.summary.higher_level_languages = self
            .languages
            .keys()
            .map(|l| l.higher_level())
            .collect::<BTreeSet<_>>()
            .len() as u64;

        let io_err = |path: &Path| {
            let path = path.to_path_buf();
            move |source| EmitError::Io { path, source }
        };
        let mut lang_tsv = String::from("language\tnames\n");
        for (l, n) in &self.languages {
            lang_tsv.push_str(&format!("{l}\t{n}\n"));
        }
        let lang_path = self.dir.join(LANGUAGE_FILE);
        crate::io::write_atomic(&lang_path, lang_tsv.as_bytes()).map_err(io_err(&lang_path))?;
        let summary_path = self.dir.join(SUMMARY_FILE);
        let mut json = serde_json::to_string_pretty(&self.summary).expect("summary serializes");
        json.push('\n');
        crate::io::write_atomic(&summary_path, json.as_bytes()).map_err(io_err(&summary_path))?;

        self.all.commit()?;
        for (_, sink) in self.per_type {
            sink.commit()?;
        }
        Ok(self.summary)
    }
}

/// In-memory convenience: sort, drop singleton languages, write everything.
pub fn emit_resource(mut names: Vec<TypedName>, dir: &Path) -> Result<ResourceSummary, EmitError> {
    names.sort_by(|a, b| (a.qid, &a.language).cmp(&(b.qid, &b.language)));
    let dropped = singleton_languages(&language_counts(&names));
    let mut writer = ResourceWriter::create(dir, dropped)?;
    let mut start = 0;
    while start < names.len() {
        let mut end = start + 1;
        while end < names.len() && names[end].qid == names[start].qid {
            end += 1;
        }
        writer.write_group(&names[start..end])?;
        start = end;
    }
    writer.finish()
}
