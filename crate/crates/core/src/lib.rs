//! Builds a typed multilingual name resource (PER/LOC/ORG) from Wikidata
//! entity dumps.
//!
//! Stages: [`ingest`] streams dump lines into [`record::EntityRecord`]s,
//! [`store`] persists them with the P279 class graph, [`typing`] assigns
//! entity types, [`cleanup`] strips parenthesized disambiguators,
//! [`script`] filters labels by their majority Unicode script, [`reorder`]
//! normalizes PER token order against English, [`emit`] writes the resource
//! and [`align`] holds the evaluation metrics. [`pipeline`] wires the stages
//! behind a config file.
//!
//! Metric code is generic over [`Scalar`]; the aliases below fix it to `f64`.

pub mod align;
pub mod cleanup;
pub mod emit;
pub mod fetch;
pub mod ingest;
pub mod io;
pub mod names;
pub mod pipeline;
pub mod record;
pub mod reorder;
pub mod scalar;
pub mod script;
pub mod store;
pub mod typing;

pub use record::{EntityRecord, LanguageCode, Qid};
pub use scalar::Scalar;
pub use typing::{EntityType, EntityTypeSet};

pub type EntropyReport = script::EntropyReport<f64>;
pub type EntropyRow = script::EntropyRow<f64>;
pub type TypeCensus = typing::TypeCensus<f64>;
pub type McaRow = align::McaRow<f64>;
pub type HistogramBin = align::HistogramBin<f64>;
pub type ReorderingScores = align::ReorderingScores<f64>;

/// Shannon entropy (bits) of a script profile.
pub fn script_entropy(profile: &script::ScriptProfile) -> Result<f64, script::ScriptError> {
    script::script_entropy(profile)
}

/// Character LCS F1 in `[0, 1]`.
pub fn lcs_f1(hypothesis: &str, reference: &str) -> Result<f64, align::EvalError> {
    align::lcs_f1(hypothesis, reference)
}
