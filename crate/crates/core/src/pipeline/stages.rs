use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde_json::{json, Value};

use super::{Pipeline, Stage};
use crate::align::{
    self, bitext_line, mca_histogram, mca_to_tsv, histogram_to_tsv, parse_alignments, read_bitext_index,
    read_gold, GoldReorderingExample, BITEXT_INDEX_HEADER, SCORES_HEADER,
};
use crate::cleanup::{clean_name, CleanupStats};
use crate::emit::{singleton_languages, ResourceWriter};
use crate::ingest::ingest_parallel;
use crate::io::{open_input, AtomicFile};
use crate::names::{english_in, group_by_entity, read_names, write_name, TypedName};
use crate::record::{EntityRecord, LanguageCode};
use crate::reorder::{
    reorder_groups, reorder_pairs, write_decision, write_decisions_header, ExternalRomanizer,
    RomanizationTable, ReorderCounts, Romanizer,
};
use crate::script::{entropy_report, AllowedScripts, LanguageProfiles, Verdict};
use crate::store::{build_store, DirStore, EntityStore, StoreError};
use crate::typing::{CensusCounter, EntityType, TypeClassifier};

const NAME_BATCH: usize = 8192;
const ENTITY_BATCH: usize = 4096;
const BUILTIN_GOLD: &str = include_str!("../../data/gold_seed.tsv");

pub(super) fn run(p: &Pipeline, stage: Stage) -> Result<(Vec<PathBuf>, Value)> {
    match stage {
        Stage::Ingest => ingest(p),
        Stage::BuildStore => store(p),
        Stage::TypeInfer => typeinfer(p),
        Stage::Clean => clean(p),
        Stage::FilterScripts => filter_scripts(p),
        Stage::Reorder => reorder(p),
        Stage::Emit => emit(p),
        Stage::Evaluate => evaluate(p),
        Stage::Stats => stats(p),
    }
}

fn create(path: &Path) -> Result<AtomicFile> {
    AtomicFile::create(path).with_context(|| format!("creating {}", path.display()))
}

fn commit(file: AtomicFile) -> Result<PathBuf> {
    let path = file.path().to_path_buf();
    file.commit()
        .with_context(|| format!("writing {}", path.display()))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::with_capacity(1 << 16, file))
}

fn names_in(path: &Path) -> Result<impl Iterator<Item = Result<TypedName>>> {
    let display = path.display().to_string();
    Ok(read_names(open(path)?).map(move |r| r.with_context(|| format!("reading {display}"))))
}

/// Feed fixed-size chunks of an iterator to `f`.
fn in_batches<T, I, F>(items: I, size: usize, mut f: F) -> Result<()>
where
    I: Iterator<Item = Result<T>>,
    F: FnMut(Vec<T>) -> Result<()>,
{
    let mut batch = Vec::with_capacity(size);
    for item in items {
        batch.push(item?);
        if batch.len() == size {
            f(std::mem::replace(&mut batch, Vec::with_capacity(size)))?;
        }
    }
    if !batch.is_empty() {
        f(batch)?;
    }
    Ok(())
}

fn ingest(p: &Pipeline) -> Result<(Vec<PathBuf>, Value)> {
    let dump = &p.config.paths.dump;
    let reader = open_input(dump).with_context(|| format!("opening {}", dump.display()))?;
    let mut out = create(&p.paths.entities())?;
    let stats = ingest_parallel(
        reader,
        p.validated.input_mode,
        p.config.ingest.batch_lines,
        |record: EntityRecord| -> Result<()> {
            out.write_all(record.to_canonical_json().as_bytes())?;
            out.write_all(b"\n")?;
            Ok(())
        },
    )?;
    if stats.skipped() > 0 {
        log::warn!("ingest skipped {} lines", stats.skipped());
    }
    Ok((vec![commit(out)?], serde_json::to_value(stats)?))
}

fn store(p: &Pipeline) -> Result<(Vec<PathBuf>, Value)> {
    let path = p.paths.entities();
    let reader = open(&path)?;
    let records = reader.lines().enumerate().filter_map(|(i, line)| {
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some(Err(StoreError::Io { path: path.clone(), source: e })),
        };
        if line.trim().is_empty() {
            return None;
        }
        Some(
            EntityRecord::from_canonical_json(&line).map_err(|e| StoreError::Corrupt {
                path: path.clone(),
                line: i + 1,
                message: e.to_string(),
            }),
        )
    });
    let (_, stats) = build_store(records, &p.paths.store)?;
    Ok((p.paths.store_files(), serde_json::to_value(stats)?))
}

fn typeinfer(p: &Pipeline) -> Result<(Vec<PathBuf>, Value)> {
    let store = DirStore::open(&p.paths.store)?;
    let classifier = TypeClassifier::from_graph(store.class_graph(), p.validated.roots);
    let mode = p.validated.type_mode;
    let mut out = create(&p.paths.typed())?;
    let mut census = CensusCounter::default();
    let (mut entities, mut typed, mut untyped, mut unlabeled, mut rows) = (0u64, 0u64, 0u64, 0u64, 0u64);

    in_batches(store.records().map(|r| r.map_err(anyhow::Error::from)), ENTITY_BATCH, |batch| {
        let types: Vec<_> = batch.par_iter().map(|r| classifier.classify(r)).collect();
        for (record, t) in batch.iter().zip(types) {
            entities += 1;
            let Some(t) = t else {
                untyped += 1;
                continue;
            };
            typed += 1;
            census.add(t);
            if record.labels.is_empty() {
                unlabeled += 1;
            }
            for name in TypedName::from_record(record, mode.apply(t)) {
                write_name(&mut out, &name)?;
                rows += 1;
            }
        }
        Ok(())
    })?;

    let census = census.finish::<f64>();
    let census_text = format!("combination\tcount\tpercentage\n{}", census.to_tsv());
    let mut census_file = create(&p.paths.type_census())?;
    census_file.write_all(census_text.as_bytes())?;
    Ok((
        vec![commit(out)?, commit(census_file)?],
        json!({
            "entities": entities,
            "typed": typed,
            "untyped": untyped,
            "typed_without_labels": unlabeled,
            "names": rows,
        }),
    ))
}

fn clean(p: &Pipeline) -> Result<(Vec<PathBuf>, Value)> {
    let mut out = create(&p.paths.cleaned())?;
    let mut stats = CleanupStats::default();
    in_batches(names_in(&p.paths.typed())?, NAME_BATCH, |batch| {
        let cleaned: Vec<(Option<TypedName>, CleanupStats)> = batch
            .into_par_iter()
            .map(|n| {
                let mut s = CleanupStats::default();
                (clean_name(n, &mut s), s)
            })
            .collect();
        for (name, s) in cleaned {
            stats.names += s.names;
            stats.changed += s.changed;
            stats.emptied += s.emptied;
            stats.unbalanced += s.unbalanced;
            if let Some(n) = name {
                write_name(&mut out, &n)?;
            }
        }
        Ok(())
    })?;
    Ok((vec![commit(out)?], serde_json::to_value(stats)?))
}

fn allowed_scripts(p: &Pipeline) -> Result<AllowedScripts> {
    match &p.config.scripts.allowed {
        None => Ok(AllowedScripts::builtin()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            AllowedScripts::parse(&text).with_context(|| format!("parsing {}", path.display()))
        }
    }
}

fn filter_scripts(p: &Pipeline) -> Result<(Vec<PathBuf>, Value)> {
    let allowed = allowed_scripts(p)?;
    let granularity = p.validated.granularity;
    let mut kept_out = create(&p.paths.filtered())?;
    let mut removed_out = create(&p.paths.removed())?;
    let mut before = LanguageProfiles::new();
    let mut after = LanguageProfiles::new();
    let mut unlisted: BTreeSet<LanguageCode> = BTreeSet::new();
    let (mut kept, mut removed) = (0u64, 0u64);

    in_batches(names_in(&p.paths.cleaned())?, NAME_BATCH, |batch| {
        let verdicts: Vec<Verdict> = batch
            .par_iter()
            .map(|n| allowed.verdict(&n.language, &n.label))
            .collect();
        for (name, verdict) in batch.iter().zip(verdicts) {
            before
                .entry(name.language.clone())
                .or_default()
                .add_name(&name.label, granularity);
            if verdict == Verdict::Unlisted {
                unlisted.insert(name.language.clone());
            }
            if verdict.keeps() {
                after
                    .entry(name.language.clone())
                    .or_default()
                    .add_name(&name.label, granularity);
                write_name(&mut kept_out, name)?;
                kept += 1;
            } else {
                write_name(&mut removed_out, name)?;
                removed += 1;
            }
        }
        Ok(())
    })?;
    for lang in &unlisted {
        log::warn!("no allowed-scripts entry for {lang}; its names pass unfiltered");
    }

    let report = entropy_report::<f64>(&before, &after, granularity);
    let mut report_file = create(&p.paths.entropy_report())?;
    report_file.write_all(report.to_tsv().as_bytes())?;
    Ok((
        vec![commit(kept_out)?, commit(removed_out)?, commit(report_file)?],
        json!({
            "kept": kept,
            "removed": removed,
            "unlisted_languages": unlisted.iter().map(|l| l.as_str()).collect::<Vec<_>>(),
            "macro_entropy_before": report.macro_before,
            "macro_entropy_after": report.macro_after,
        }),
    ))
}

fn romanizer(p: &Pipeline) -> Result<(Box<dyn Romanizer>, String)> {
    if let Some(cmd) = &p.config.reorder.external_romanizer {
        return Ok((Box::new(ExternalRomanizer::new(cmd.clone())), format!("external:{cmd}")));
    }
    if p.config.reorder.tables.is_empty() {
        return Ok((Box::new(RomanizationTable::builtin()), "builtin".into()));
    }
    let mut table = RomanizationTable::new();
    for path in &p.config.reorder.tables {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        table
            .merge_tsv(&text)
            .with_context(|| format!("parsing {}", path.display()))?;
    }
    let names: Vec<String> = p
        .config
        .reorder
        .tables
        .iter()
        .map(|t| t.file_name().map_or_else(String::new, |f| f.to_string_lossy().into_owned()))
        .collect();
    Ok((Box::new(table), format!("tables:{}", names.join(","))))
}

fn reorder(p: &Pipeline) -> Result<(Vec<PathBuf>, Value)> {
    let (romanizer, description) = romanizer(p)?;
    let config = p.validated.reorder;
    let mut out = create(&p.paths.reordered())?;
    let mut log = create(&p.paths.decisions())?;
    write_decisions_header(&mut log, &config, &description)?;
    let mut counts = ReorderCounts::default();

    let groups = group_by_entity(names_in(&p.paths.filtered())?);
    in_batches(groups, p.config.reorder.batch_entities, |batch| {
        let (groups, decisions, c) = reorder_groups(batch, romanizer.as_ref(), &config)?;
        counts.merge(&c);
        for name in groups.iter().flatten() {
            write_name(&mut out, name)?;
        }
        for d in &decisions {
            write_decision(&mut log, d)?;
        }
        Ok(())
    })?;
    let mut counters = serde_json::to_value(&counts)?;
    counters["reordered_fraction"] = json!(counts.reordered_fraction::<f64>());
    Ok((vec![commit(out)?, commit(log)?], counters))
}

fn emit(p: &Pipeline) -> Result<(Vec<PathBuf>, Value)> {
    let input = p.paths.reordered();
    let mut counts = std::collections::BTreeMap::new();
    for name in names_in(&input)? {
        *counts.entry(name?.language).or_insert(0u64) += 1;
    }
    let dropped = singleton_languages(&counts);
    let mut writer = ResourceWriter::create(&p.paths.output, dropped)?;
    for group in group_by_entity(names_in(&input)?) {
        writer.write_group(&group?)?;
    }
    let summary = writer.finish()?;
    let out = &p.paths.output;
    let mut outputs = vec![out.join(crate::emit::ALL_FILE)];
    outputs.extend(EntityType::ALL.iter().map(|&t| out.join(crate::emit::type_file(t))));
    outputs.push(out.join(crate::emit::LANGUAGE_FILE));
    outputs.push(out.join(crate::emit::SUMMARY_FILE));
    Ok((outputs, serde_json::to_value(summary)?))
}

fn load_gold(p: &Pipeline) -> Result<Vec<GoldReorderingExample>> {
    match &p.config.evaluate.gold {
        None => Ok(read_gold(BUILTIN_GOLD.as_bytes())?),
        Some(path) => read_gold(open(path)?).with_context(|| format!("reading {}", path.display())),
    }
}

/// Reorderer output for each gold example; examples without an English
/// reference pass through unchanged.
pub fn reorder_gold(
    gold: &[GoldReorderingExample],
    romanizer: &dyn Romanizer,
    config: &crate::reorder::ReorderConfig,
) -> Result<Vec<String>> {
    let pairs: Vec<(&str, &str)> = gold
        .iter()
        .filter_map(|g| Some((g.input.as_str(), g.english.as_deref()?)))
        .collect();
    let mut decisions = reorder_pairs(&pairs, romanizer, config)?.into_iter();
    Ok(gold
        .iter()
        .map(|g| match g.english {
            Some(_) => decisions.next().expect("one decision per pair").chosen,
            None => g.input.clone(),
        })
        .collect())
}

fn evaluate(p: &Pipeline) -> Result<(Vec<PathBuf>, Value)> {
    let gold = load_gold(p)?;
    let (romanizer, _) = romanizer(p)?;
    let baseline: Vec<String> = gold.iter().map(|g| g.input.clone()).collect();
    let system = reorder_gold(&gold, romanizer.as_ref(), &p.validated.reorder)?;

    let none = align::evaluate_reordering::<f64>(&baseline, &gold)?;
    let ours = align::evaluate_reordering::<f64>(&system, &gold)?;
    let mut text = format!("{SCORES_HEADER}\n{}\n{}\n", none.tsv_row("none"), ours.tsv_row("edit_distance"));
    let mut counters = json!({
        "examples": gold.len(),
        "none": none,
        "edit_distance": ours,
    });
    if let Some(path) = &p.config.evaluate.system {
        let lines: Vec<String> = open(path)?.lines().collect::<Result<_, _>>()?;
        let external = align::evaluate_reordering::<f64>(&lines, &gold)
            .with_context(|| format!("scoring {}", path.display()))?;
        text.push_str(&external.tsv_row("system"));
        text.push('\n');
        counters["system"] = serde_json::to_value(&external)?;
    }
    let mut out = create(&p.paths.evaluation())?;
    out.write_all(text.as_bytes())?;
    Ok((vec![commit(out)?], counters))
}

fn stats(p: &Pipeline) -> Result<(Vec<PathBuf>, Value)> {
    let mut bitext = create(&p.paths.bitext())?;
    let mut index = create(&p.paths.bitext_index())?;
    writeln!(index, "{BITEXT_INDEX_HEADER}")?;
    let mut lines = 0u64;
    for group in group_by_entity(names_in(&p.stats_names())?) {
        let group = group?;
        let Some(english) = english_in(&group) else {
            continue;
        };
        let target_tokens = crate::reorder::tokenize(english).len();
        for name in &group {
            if name.language.is_english() || !name.types.contains(EntityType::Per) {
                continue;
            }
            let source_tokens = crate::reorder::tokenize(&name.label).len();
            if source_tokens == 0 || target_tokens == 0 {
                continue;
            }
            lines += 1;
            writeln!(bitext, "{}", bitext_line(&name.label, english))?;
            writeln!(
                index,
                "{lines}\t{}\t{}\t{source_tokens}\t{target_tokens}",
                name.qid, name.language
            )?;
        }
    }
    let mut outputs = vec![commit(bitext)?, commit(index)?];
    let mut counters = json!({ "bitext_lines": lines });

    if let Some(path) = &p.config.stats.alignments {
        let entries = read_bitext_index(open(&p.paths.bitext_index())?)?;
        let (graphs, parse) = parse_alignments(open(path)?)?;
        if graphs.len() != entries.len() {
            bail!(align::EvalError::AlignmentCount {
                alignments: graphs.len(),
                names: entries.len(),
            });
        }
        let mut out_of_range = 0usize;
        let items: Vec<_> = entries
            .into_iter()
            .zip(graphs)
            .map(|(e, g)| {
                let g = g.map(|mut g| {
                    out_of_range += g.restrict(e.source_tokens, e.target_tokens);
                    g
                });
                (e.language, g)
            })
            .collect();
        let rows = align::mean_crossing_alignments::<f64>(items);
        let bins = mca_histogram(&rows, p.config.stats.bin_width);
        let mut mca = create(&p.paths.mca())?;
        mca.write_all(mca_to_tsv(&rows).as_bytes())?;
        let mut hist = create(&p.paths.mca_histogram())?;
        hist.write_all(histogram_to_tsv(&bins).as_bytes())?;
        outputs.push(commit(mca)?);
        outputs.push(commit(hist)?);
        counters["alignment_lines"] = json!(parse.lines);
        counters["malformed_alignment_lines"] = json!(parse.malformed);
        counters["out_of_range_edges"] = json!(out_of_range);
        counters["mca_languages"] = json!(rows.len());
    }
    Ok((outputs, counters))
}
