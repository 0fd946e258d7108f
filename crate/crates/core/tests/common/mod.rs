//! Shared fixtures: Wikidata-shaped entity lines, a seeded synthetic dump
//! generator and helpers for driving the binary.

#![allow(dead_code)]

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub const HUMAN: u64 = 5;
pub const GEO_REGION: u64 = 82794;
pub const ORGANIZATION: u64 = 43229;
pub const SETTLEMENT: u64 = 486972;
pub const CITY: u64 = 515;
pub const PROTECTED_AREA_RU: u64 = 1959314;
pub const BUSINESS: u64 = 4830453;
pub const UNIVERSITY: u64 = 3918;
pub const FILM: u64 = 11424;

fn claim(property: &str, target: u64, rank: &str) -> String {
    format!(
        r#"{{"mainsnak":{{"snaktype":"value","property":"{property}","datavalue":{{"value":{{"entity-type":"item","numeric-id":{target},"id":"Q{target}"}},"type":"wikibase-entityid"}}}},"type":"statement","rank":"{rank}"}}"#
    )
}

/// One entity in dump JSON.
pub fn entity_json(qid: u64, labels: &[(&str, &str)], p31: &[u64], p279: &[u64]) -> String {
    let labels: Vec<String> = labels
        .iter()
        .map(|(code, value)| {
            format!(
                r#"{}:{{"language":{},"value":{}}}"#,
                serde_json::to_string(code).unwrap(),
                serde_json::to_string(code).unwrap(),
                serde_json::to_string(value).unwrap()
            )
        })
        .collect();
    let mut claims = Vec::new();
    for (prop, targets) in [("P31", p31), ("P279", p279)] {
        if !targets.is_empty() {
            let list: Vec<String> = targets.iter().map(|&t| claim(prop, t, "normal")).collect();
            claims.push(format!(r#""{prop}":[{}]"#, list.join(",")));
        }
    }
    format!(
        r#"{{"type":"item","id":"Q{qid}","labels":{{{}}},"claims":{{{}}}}}"#,
        labels.join(","),
        claims.join(",")
    )
}

/// Dump-array framing: `[`, one entity per line with trailing commas, `]`.
pub fn dump_array(lines: &[String]) -> String {
    let mut out = String::from("[\n");
    for (i, l) in lines.iter().enumerate() {
        out.push_str(l);
        if i + 1 < lines.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str("]\n");
    out
}

/// The class items every synthetic dump starts with.
pub fn class_lines() -> Vec<String> {
    vec![
        entity_json(HUMAN, &[("en", "human")], &[], &[]),
        entity_json(GEO_REGION, &[("en", "geographic region")], &[], &[]),
        entity_json(ORGANIZATION, &[("en", "organization")], &[], &[]),
        entity_json(SETTLEMENT, &[("en", "human settlement")], &[], &[GEO_REGION]),
        entity_json(CITY, &[("en", "city")], &[], &[SETTLEMENT]),
        entity_json(PROTECTED_AREA_RU, &[("en", "protected area of Russia")], &[], &[GEO_REGION]),
        entity_json(BUSINESS, &[("en", "business")], &[], &[ORGANIZATION]),
        entity_json(UNIVERSITY, &[("en", "university")], &[], &[ORGANIZATION]),
        entity_json(FILM, &[("en", "film")], &[], &[]),
    ]
}

/// Latin and Cyrillic spellings that the bundled table maps onto each other.
const GIVEN: [(&str, &str); 8] = [
    ("Ivan", "Иван"),
    ("Pavel", "Павел"),
    ("Anna", "Анна"),
    ("Boris", "Борис"),
    ("Nina", "Нина"),
    ("Oleg", "Олег"),
    ("Vera", "Вера"),
    ("Roman", "Роман"),
];
const FAMILY: [(&str, &str); 8] = [
    ("Petrov", "Петров"),
    ("Smirnov", "Смирнов"),
    ("Volkov", "Волков"),
    ("Orlov", "Орлов"),
    ("Sokolov", "Соколов"),
    ("Lebedev", "Лебедев"),
    ("Morozov", "Морозов"),
    ("Zaitsev", "Заитсев"),
];
const PLACES: [(&str, &str, &str); 4] = [
    ("Novgorod", "Новгород", "Νόβγκοροντ"),
    ("Tver", "Тверь", "Τβερ"),
    ("Kazan", "Казань", "Καζάν"),
    ("Omsk", "Омск", "Ομσκ"),
];

/// Append a seeded synthetic dump of `entities` items (after the class
/// items) in dump-array framing. A few deliberately bad lines are mixed in.
pub fn write_synthetic_dump<W: Write>(out: &mut W, entities: u64, seed: u64) -> io::Result<()> {
    let mut rng = StdRng::seed_from_u64(seed);
    writeln!(out, "[")?;
    for line in class_lines() {
        writeln!(out, "{line},")?;
    }
    writeln!(out, "{{\"id\":\"P31\",\"type\":\"property\",\"labels\":{{}}}},")?;
    writeln!(out, "{{not json,")?;
    for i in 0..entities {
        let qid = 1_000_000 + i;
        let (g, gc) = GIVEN[rng.random_range(0..GIVEN.len())];
        let (f, fc) = FAMILY[rng.random_range(0..FAMILY.len())];
        let (p, pc, pg) = PLACES[rng.random_range(0..PLACES.len())];
        let roll: u32 = rng.random_range(0..100);
        let en_person = format!("{g} {f}");
        let ru_person = if rng.random_bool(0.3) {
            format!("{fc} {gc}")
        } else {
            format!("{gc} {fc}")
        };
        let line = match roll {
            0..=59 => {
                let mut labels: Vec<(&str, String)> = vec![("en", en_person.clone()), ("ru", ru_person)];
                labels.push(("uk", format!("{gc} {fc}")));
                if rng.random_bool(0.1) {
                    labels.push(("es", format!("{en_person} (boxer)")));
                } else {
                    labels.push(("es", en_person.clone()));
                }
                if rng.random_bool(0.05) {
                    labels.push(("kk", en_person.clone()));
                } else {
                    labels.push(("kk", format!("{fc} {gc}")));
                }
                if i == 7 {
                    labels.push(("gv", en_person.clone()));
                }
                let p31 = if rng.random_bool(0.03) {
                    vec![HUMAN, PROTECTED_AREA_RU]
                } else {
                    vec![HUMAN]
                };
                let refs: Vec<(&str, &str)> = labels.iter().map(|(c, v)| (*c, v.as_str())).collect();
                entity_json(qid, &refs, &p31, &[])
            }
            60..=79 => entity_json(qid, &[("en", p), ("ru", pc), ("el", pg), ("de", p)], &[CITY], &[]),
            80..=91 => {
                let en = format!("{f} University");
                let ru = format!("Университет {fc}");
                entity_json(qid, &[("en", &en), ("ru", &ru)], &[UNIVERSITY], &[])
            }
            92..=95 => {
                let en = format!("{p} Holdings");
                entity_json(qid, &[("en", &en), ("ru", pc)], &[BUSINESS, CITY], &[])
            }
            _ => entity_json(qid, &[("en", "Some Film")], &[FILM], &[]),
        };
        if i + 1 < entities {
            writeln!(out, "{line},")?;
        } else {
            writeln!(out, "{line}")?;
        }
    }
    writeln!(out, "]")
}

pub fn synthetic_dump_file(path: &Path, entities: u64, seed: u64) -> io::Result<()> {
    let mut out = io::BufWriter::new(std::fs::File::create(path)?);
    write_synthetic_dump(&mut out, entities, seed)?;
    out.flush()
}

pub fn namebank_bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_namebank"))
}

/// Run the binary in `dir`, silencing logs.
pub fn run_cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(namebank_bin())
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn namebank")
}

pub fn sha256(path: &Path) -> String {
    namebank::io::sha256_file(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
