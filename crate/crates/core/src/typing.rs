//! High-level entity types (PER/LOC/ORG): classification by subclass
//! closure, multi-type sets, disambiguation and the type census.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::record::{q, EntityRecord, Qid};
use crate::scalar::Scalar;
use crate::store::ClassGraph;

/// Declaration order is the canonical serialization order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntityType {
    Loc,
    Org,
    Per,
}

impl EntityType {
    pub const ALL: [EntityType; 3] = [EntityType::Loc, EntityType::Org, EntityType::Per];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityType::Loc => "LOC",
            EntityType::Org => "ORG",
            EntityType::Per => "PER",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "LOC" => Ok(EntityType::Loc),
            "ORG" => Ok(EntityType::Org),
            "PER" => Ok(EntityType::Per),
            other => Err(format!("unknown entity type {other:?}")),
        }
    }
}

/// A nonempty subset of {LOC, ORG, PER}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EntityTypeSet(u8);

impl EntityTypeSet {
    pub fn new(types: impl IntoIterator<Item = EntityType>) -> Option<Self> {
        let bits = types.into_iter().fold(0u8, |acc, t| acc | t.bit());
        (bits != 0).then_some(EntityTypeSet(bits))
    }

    pub fn single(t: EntityType) -> Self {
        EntityTypeSet(t.bit())
    }

    /// All seven nonempty subsets.
    pub fn all_subsets() -> impl Iterator<Item = EntityTypeSet> {
        (1u8..8).map(EntityTypeSet)
    }

    pub fn contains(self, t: EntityType) -> bool {
        self.0 & t.bit() != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        false
    }

    /// Members in canonical order (LOC < ORG < PER).
    pub fn iter(self) -> impl Iterator<Item = EntityType> {
        EntityType::ALL.into_iter().filter(move |&t| self.contains(t))
    }

    /// Comma-joined canonical form used in resource rows, e.g. `LOC,PER`.
    pub fn to_column(self) -> String {
        self.joined(",")
    }

    /// `+`-joined form used in the census, e.g. `LOC+ORG`.
    pub fn to_combination(self) -> String {
        self.joined("+")
    }

    fn joined(self, sep: &str) -> String {
        self.iter().map(EntityType::as_str).collect::<Vec<_>>().join(sep)
    }

    /// Collapse to a single type.
    ///
    /// ORG+PER → ORG, LOC+ORG → LOC, LOC+PER → PER, LOC+ORG+PER → ORG.
    pub fn disambiguate(self) -> EntityType {
        use EntityType::*;
        let has = |t| self.contains(t);
        match (has(Loc), has(Org), has(Per)) {
            (true, false, false) => Loc,
            (false, true, false) => Org,
            (false, false, true) => Per,
            (false, true, true) => Org,
            (true, true, false) => Loc,
            (true, false, true) => Per,
            (true, true, true) => Org,
            (false, false, false) => unreachable!("type sets are nonempty"),
        }
    }
}

impl fmt::Display for EntityTypeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_column())
    }
}

impl FromStr for EntityTypeSet {
    type Err = String;

    /// Accepts `,` or `+` separators.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let types = s
            .split([',', '+'])
            .map(|t| t.trim().parse())
            .collect::<Result<Vec<EntityType>, _>>()?;
        EntityTypeSet::new(types).ok_or_else(|| "empty type set".to_string())
    }
}

impl Serialize for EntityTypeSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter().map(EntityType::as_str))
    }
}

impl<'de> Deserialize<'de> for EntityTypeSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let names = Vec::<String>::deserialize(deserializer)?;
        let types = names
            .iter()
            .map(|n| n.parse::<EntityType>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(serde::de::Error::custom)?;
        EntityTypeSet::new(types).ok_or_else(|| serde::de::Error::custom("empty type set"))
    }
}

/// Whether the resource keeps the full type set or one type per entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TypeMode {
    #[default]
    PreserveMulti,
    Disambiguate,
}

impl TypeMode {
    pub fn apply(self, types: EntityTypeSet) -> EntityTypeSet {
        match self {
            TypeMode::PreserveMulti => types,
            TypeMode::Disambiguate => EntityTypeSet::single(types.disambiguate()),
        }
    }
}

impl FromStr for TypeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "preserve-multi" => Ok(TypeMode::PreserveMulti),
            "disambiguate" => Ok(TypeMode::Disambiguate),
            other => Err(format!("unknown type mode {other:?} (preserve-multi|disambiguate)")),
        }
    }
}

/// Root classes for each type. Defaults: human, geographic region, organization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeRoots {
    pub per: Qid,
    pub loc: Qid,
    pub org: Qid,
}

impl Default for TypeRoots {
    fn default() -> Self {
        TypeRoots {
            per: q(5),
            loc: q(82794),
            org: q(43229),
        }
    }
}

/// Precomputed subclass closures of the three roots.
#[derive(Debug, Clone, Default)]
pub struct TypeClassifier {
    pub per: BTreeSet<Qid>,
    pub loc: BTreeSet<Qid>,
    pub org: BTreeSet<Qid>,
}

impl TypeClassifier {
    pub fn from_graph(graph: &ClassGraph, roots: TypeRoots) -> Self {
        TypeClassifier {
            per: graph.descendants(roots.per),
            loc: graph.descendants(roots.loc),
            org: graph.descendants(roots.org),
        }
    }

    pub fn classify(&self, entity: &EntityRecord) -> Option<EntityTypeSet> {
        classify(entity, &self.per, &self.loc, &self.org)
    }
}

/// Types whose closure intersects the entity's direct P31 targets; `None`
/// if no type applies.
pub fn classify(
    entity: &EntityRecord,
    per: &BTreeSet<Qid>,
    loc: &BTreeSet<Qid>,
    org: &BTreeSet<Qid>,
) -> Option<EntityTypeSet> {
    let hits = |set: &BTreeSet<Qid>| entity.instance_of.iter().any(|c| set.contains(c));
    let mut types = Vec::with_capacity(3);
    if hits(loc) {
        types.push(EntityType::Loc);
    }
    if hits(org) {
        types.push(EntityType::Org);
    }
    if hits(per) {
        types.push(EntityType::Per);
    }
    EntityTypeSet::new(types)
}

/// One line of the type census.
#[derive(Debug, Clone, PartialEq)]
pub struct CensusRow<S> {
    pub types: EntityTypeSet,
    pub count: u64,
    pub percentage: S,
}

impl<S: Scalar> CensusRow<S> {
    /// Percentage with two decimals, rounded half-up on the exact ratio.
    pub fn percentage_2dp(&self, total: u64) -> String {
        format_percentage_2dp(self.count, total)
    }
}

/// `100 * count / total` to two decimals, half-up, in exact integer arithmetic.
pub fn format_percentage_2dp(count: u64, total: u64) -> String {
    if total == 0 {
        return "0.00".to_string();
    }
    let scaled = (count as u128) * 10_000 * 2 + total as u128;
    let hundredths = scaled / (2 * total as u128);
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

/// Counts per distinct type set, in descending count order (ties by
/// canonical combination name).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TypeCensus<S> {
    pub rows: Vec<CensusRow<S>>,
    pub total: u64,
}

impl<S: Scalar> TypeCensus<S> {
    pub fn from_counts(counts: &BTreeMap<String, (EntityTypeSet, u64)>) -> Self {
        let total: u64 = counts.values().map(|(_, c)| c).sum();
        let mut rows: Vec<CensusRow<S>> = counts
            .values()
            .map(|&(types, count)| CensusRow {
                types,
                count,
                percentage: S::ratio(count, total) * S::hundred(),
            })
            .collect();
        rows.sort_by(|a, b| {
            b.count
                .cmp(&a.count)
                .then_with(|| a.types.to_combination().cmp(&b.types.to_combination()))
        });
        TypeCensus { rows, total }
    }

    /// `combination<TAB>count<TAB>percentage` lines, no header.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}%\n",
                row.types.to_combination(),
                row.count,
                row.percentage_2dp(self.total)
            ));
        }
        out
    }
}

/// Incremental census accumulator.
#[derive(Debug, Clone, Default)]
pub struct CensusCounter {
    counts: BTreeMap<String, (EntityTypeSet, u64)>,
}

impl CensusCounter {
    pub fn add(&mut self, types: EntityTypeSet) {
        self.counts
            .entry(types.to_combination())
            .or_insert((types, 0))
            .1 += 1;
    }

    pub fn finish<S: Scalar>(&self) -> TypeCensus<S> {
        TypeCensus::from_counts(&self.counts)
    }
}

pub fn type_census<S: Scalar>(types: impl IntoIterator<Item = EntityTypeSet>) -> TypeCensus<S> {
    let mut counter = CensusCounter::default();
    for t in types {
        counter.add(t);
    }
    counter.finish()
}
