//! `TypedName`, the atomic row that flows between the name stages, and its
//! JSONL stage format.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::record::{EntityRecord, LanguageCode, Qid};
use crate::typing::EntityTypeSet;

/// One (entity, language, label) triple with the entity's types.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypedName {
    pub label: String,
    pub language: LanguageCode,
    pub qid: Qid,
    pub types: EntityTypeSet,
}

impl TypedName {
    pub fn new(qid: Qid, language: &str, label: &str, types: EntityTypeSet) -> Self {
        TypedName {
            qid,
            language: language.parse().expect("valid language code"),
            label: label.to_string(),
            types,
        }
    }

    /// One row per label of a typed entity, in language-code order.
    pub fn from_record(record: &EntityRecord, types: EntityTypeSet) -> impl Iterator<Item = TypedName> + '_ {
        record.labels.iter().map(move |(code, label)| TypedName {
            qid: record.qid,
            language: code.clone(),
            label: label.clone(),
            types,
        })
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("typed name serializes")
    }
}

#[derive(Debug, Error)]
pub enum NamesError {
    #[error("failed reading names")]
    Io(#[from] io::Error),
    #[error("malformed name row at line {line}: {message}")]
    Malformed { line: u64, message: String },
}

/// Stream rows from a names JSONL file, failing on the first bad line.
pub fn read_names<R: BufRead>(reader: R) -> impl Iterator<Item = Result<TypedName, NamesError>> {
    reader.lines().enumerate().filter_map(|(i, line)| {
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some(Err(NamesError::Io(e))),
        };
        if line.trim().is_empty() {
            return None;
        }
        Some(
            serde_json::from_str(&line).map_err(|e| NamesError::Malformed {
                line: i as u64 + 1,
                message: e.to_string(),
            }),
        )
    })
}

pub fn write_name<W: Write>(out: &mut W, name: &TypedName) -> io::Result<()> {
    out.write_all(name.to_json_line().as_bytes())?;
    out.write_all(b"\n")
}

/// Groups consecutive rows sharing a qid. Stage files are written entity by
/// entity, so each group is one whole entity.
pub struct EntityGroups<I: Iterator> {
    inner: std::iter::Peekable<I>,
}

impl<I, E> Iterator for EntityGroups<I>
where
    I: Iterator<Item = Result<TypedName, E>>,
{
    type Item = Result<Vec<TypedName>, E>;

    fn next(&mut self) -> Option<Self::Item> {
        let first = match self.inner.next()? {
            Ok(n) => n,
            Err(e) => return Some(Err(e)),
        };
        let qid = first.qid;
        let mut group = vec![first];
        while let Some(Ok(next)) = self.inner.peek() {
            if next.qid != qid {
                break;
            }
            group.push(self.inner.next().unwrap().ok().unwrap());
        }
        Some(Ok(group))
    }
}

pub fn group_by_entity<I, E>(names: I) -> EntityGroups<I::IntoIter>
where
    I: IntoIterator<Item = Result<TypedName, E>>,
{
    EntityGroups {
        inner: names.into_iter().peekable(),
    }
}

/// The English label within one entity group.
pub fn english_in(group: &[TypedName]) -> Option<&str> {
    group
        .iter()
        .find(|n| n.language.is_english())
        .map(|n| n.label.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::q;
    use crate::typing::EntityType;

    fn per() -> EntityTypeSet {
        EntityTypeSet::single(EntityType::Per)
    }

    #[test]
    fn json_line_shape() {
        let n = TypedName::new(q(60834172), "es", "Wang Lina", per());
        assert_eq!(
            n.to_json_line(),
            r#"{"label":"Wang Lina","language":"es","qid":"Q60834172","types":["PER"]}"#
        );
        let back: TypedName = serde_json::from_str(&n.to_json_line()).unwrap();
        assert_eq!(back, n);
    }

    #[test]
    fn groups_follow_qid_runs() {
        let rows = vec![
            TypedName::new(q(1), "en", "a", per()),
            TypedName::new(q(1), "ru", "б", per()),
            TypedName::new(q(2), "en", "c", per()),
        ];
        let groups: Vec<Vec<TypedName>> = group_by_entity(rows.into_iter().map(Ok::<_, ()>))
            .map(Result::unwrap)
            .collect();
        assert_eq!(groups.len(), 2);
        assert_eq!(english_in(&groups[0]), Some("a"));
        assert_eq!(groups[1].len(), 1);
    }

    #[test]
    fn malformed_rows_are_reported_with_line_numbers() {
        let input = "{\"label\":\"a\",\"language\":\"en\",\"qid\":\"Q1\",\"types\":[\"PER\"]}\n\n{\"label\":1}\n";
        let results: Vec<_> = read_names(input.as_bytes()).collect();
        assert!(results[0].is_ok());
        assert!(matches!(results[1], Err(NamesError::Malformed { line: 3, .. })));
    }
}
