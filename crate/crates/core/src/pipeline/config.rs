//! TOML pipeline configuration and command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ingest::{InputMode, DEFAULT_BATCH_LINES};
use crate::record::Qid;
use crate::reorder::{EditCosts, ReorderConfig, DEFAULT_MAX_TOKENS};
use crate::script::{unicode_version, ProfileGranularity};
use crate::typing::{TypeMode, TypeRoots};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub dump: PathBuf,
    pub work: PathBuf,
    /// Defaults to `<work>/store`.
    pub store: Option<PathBuf>,
    pub output: PathBuf,
    /// Defaults to `<work>/run_manifest.jsonl`.
    pub manifest: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            dump: PathBuf::from("dump.json"),
            work: PathBuf::from("work"),
            store: None,
            output: PathBuf::from("output"),
            manifest: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub mode: String,
    pub batch_lines: usize,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            mode: "auto".into(),
            batch_lines: DEFAULT_BATCH_LINES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TypesConfig {
    pub per: String,
    pub loc: String,
    pub org: String,
    pub mode: String,
}

impl Default for TypesConfig {
    fn default() -> Self {
        let roots = TypeRoots::default();
        TypesConfig {
            per: roots.per.to_string(),
            loc: roots.loc.to_string(),
            org: roots.org.to_string(),
            mode: "preserve-multi".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScriptsConfig {
    /// Allowed-scripts TSV; unset uses the bundled list.
    pub allowed: Option<PathBuf>,
    pub granularity: String,
    /// Expected Unicode version of the Script tables; unset skips the check.
    pub unicode_version: Option<String>,
}

impl Default for ScriptsConfig {
    fn default() -> Self {
        ScriptsConfig {
            allowed: None,
            granularity: "per-name".into(),
            unicode_version: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReorderSection {
    /// Romanization tables; empty uses the bundled Cyrillic, Greek and Hebrew tables.
    pub tables: Vec<PathBuf>,
    /// Shell command used instead of tables when set.
    pub external_romanizer: Option<String>,
    pub max_tokens: usize,
    pub substitution_cost: u32,
    /// Entities per romanization batch.
    pub batch_entities: usize,
}

impl Default for ReorderSection {
    fn default() -> Self {
        ReorderSection {
            tables: Vec::new(),
            external_romanizer: None,
            max_tokens: DEFAULT_MAX_TOKENS,
            substitution_cost: EditCosts::default().substitution,
            batch_entities: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    /// Gold TSV; unset uses the bundled seed set.
    pub gold: Option<PathBuf>,
    /// Extra system output to score, one line per gold example.
    pub system: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    /// Names file to build the bitext from; defaults to `<work>/filtered.jsonl`.
    pub names: Option<PathBuf>,
    /// Aligner output matching the bitext line for line.
    pub alignments: Option<PathBuf>,
    pub bin_width: f64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            names: None,
            alignments: None,
            bin_width: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuntimeConfig {
    /// Worker threads; 0 means one per available core.
    pub workers: usize,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig { workers: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub ingest: IngestConfig,
    pub types: TypesConfig,
    pub scripts: ScriptsConfig,
    pub reorder: ReorderSection,
    pub evaluate: EvaluateConfig,
    pub stats: StatsConfig,
    pub runtime: RuntimeConfig,
}

/// Flag overrides; each maps to one config key.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// paths.dump
    #[arg(long, global = true)]
    pub dump: Option<PathBuf>,
    /// paths.work
    #[arg(long, global = true)]
    pub work: Option<PathBuf>,
    /// paths.store
    #[arg(long, global = true)]
    pub store: Option<PathBuf>,
    /// paths.output
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// paths.manifest
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// ingest.mode: auto, dump-array or jsonl
    #[arg(long = "ingest-mode", global = true)]
    pub ingest_mode: Option<String>,
    /// ingest.batch_lines
    #[arg(long, global = true)]
    pub batch_lines: Option<usize>,
    /// types.per
    #[arg(long = "per-root", global = true)]
    pub per_root: Option<String>,
    /// types.loc
    #[arg(long = "loc-root", global = true)]
    pub loc_root: Option<String>,
    /// types.org
    #[arg(long = "org-root", global = true)]
    pub org_root: Option<String>,
    /// types.mode: preserve-multi or disambiguate
    #[arg(long = "type-mode", global = true)]
    pub type_mode: Option<String>,
    /// scripts.allowed
    #[arg(long = "allowed-scripts", global = true)]
    pub allowed_scripts: Option<PathBuf>,
    /// scripts.granularity: per-name or per-codepoint
    #[arg(long, global = true)]
    pub granularity: Option<String>,
    /// scripts.unicode_version
    #[arg(long = "unicode-version", global = true)]
    pub unicode_version: Option<String>,
    /// reorder.tables (repeatable)
    #[arg(long = "romanization-table", global = true)]
    pub romanization_tables: Vec<PathBuf>,
    /// reorder.external_romanizer
    #[arg(long = "external-romanizer", global = true)]
    pub external_romanizer: Option<String>,
    /// reorder.max_tokens
    #[arg(long = "max-tokens", global = true)]
    pub max_tokens: Option<usize>,
    /// reorder.substitution_cost: 2 for indel distance, 1 for Levenshtein
    #[arg(long = "substitution-cost", global = true)]
    pub substitution_cost: Option<u32>,
    /// reorder.batch_entities
    #[arg(long = "batch-entities", global = true)]
    pub batch_entities: Option<usize>,
    /// evaluate.gold
    #[arg(long, global = true)]
    pub gold: Option<PathBuf>,
    /// evaluate.system
    #[arg(long = "system-output", global = true)]
    pub system_output: Option<PathBuf>,
    /// stats.names
    #[arg(long = "stats-names", global = true)]
    pub stats_names: Option<PathBuf>,
    /// stats.alignments
    #[arg(long, global = true)]
    pub alignments: Option<PathBuf>,
    /// stats.bin_width
    #[arg(long = "bin-width", global = true)]
    pub bin_width: Option<f64>,
    /// runtime.workers
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl PipelineConfig {
    /// Parse TOML. Relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, String> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("reading config {}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
            .map_err(|e| format!("config {}: {e}", path.display()))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() && p.as_os_str() != "-" {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.dump);
        fix(&mut self.paths.work);
        fix(&mut self.paths.output);
        self.paths.store.as_mut().map(fix);
        self.paths.manifest.as_mut().map(fix);
        self.scripts.allowed.as_mut().map(fix);
        self.reorder.tables.iter_mut().for_each(fix);
        self.evaluate.gold.as_mut().map(fix);
        self.evaluate.system.as_mut().map(fix);
        self.stats.names.as_mut().map(fix);
        self.stats.alignments.as_mut().map(fix);
    }

    /// Flag values win over file values. Flag paths are taken as given.
    pub fn apply(&mut self, o: &Overrides) {
        set(&mut self.paths.dump, o.dump.clone());
        set(&mut self.paths.work, o.work.clone());
        if o.store.is_some() {
            self.paths.store = o.store.clone();
        }
        set(&mut self.paths.output, o.output.clone());
        if o.manifest.is_some() {
            self.paths.manifest = o.manifest.clone();
        }
        set(&mut self.ingest.mode, o.ingest_mode.clone());
        set(&mut self.ingest.batch_lines, o.batch_lines);
        set(&mut self.types.per, o.per_root.clone());
        set(&mut self.types.loc, o.loc_root.clone());
        set(&mut self.types.org, o.org_root.clone());
        set(&mut self.types.mode, o.type_mode.clone());
        if o.allowed_scripts.is_some() {
            self.scripts.allowed = o.allowed_scripts.clone();
        }
        set(&mut self.scripts.granularity, o.granularity.clone());
        if o.unicode_version.is_some() {
            self.scripts.unicode_version = o.unicode_version.clone();
        }
        if !o.romanization_tables.is_empty() {
            self.reorder.tables = o.romanization_tables.clone();
        }
        if o.external_romanizer.is_some() {
            self.reorder.external_romanizer = o.external_romanizer.clone();
        }
        set(&mut self.reorder.max_tokens, o.max_tokens);
        set(&mut self.reorder.substitution_cost, o.substitution_cost);
        set(&mut self.reorder.batch_entities, o.batch_entities);
        if o.gold.is_some() {
            self.evaluate.gold = o.gold.clone();
        }
        if o.system_output.is_some() {
            self.evaluate.system = o.system_output.clone();
        }
        if o.stats_names.is_some() {
            self.stats.names = o.stats_names.clone();
        }
        if o.alignments.is_some() {
            self.stats.alignments = o.alignments.clone();
        }
        set(&mut self.stats.bin_width, o.bin_width);
        set(&mut self.runtime.workers, o.workers);
    }

    /// Check enumerations, ranges, pins and that referenced resource files exist.
    pub fn validate(&self) -> Result<Validated, String> {
        let input_mode: InputMode = self.ingest.mode.parse().map_err(|e| format!("ingest.mode: {e}"))?;
        if self.ingest.batch_lines == 0 {
            return Err("ingest.batch_lines must be at least 1".into());
        }
        let root = |key: &str, v: &str| -> Result<Qid, String> {
            v.parse().map_err(|_| format!("types.{key}: {v:?} is not an item id"))
        };
        let roots = TypeRoots {
            per: root("per", &self.types.per)?,
            loc: root("loc", &self.types.loc)?,
            org: root("org", &self.types.org)?,
        };
        let type_mode: TypeMode = self.types.mode.parse().map_err(|e| format!("types.mode: {e}"))?;
        let granularity: ProfileGranularity = self
            .scripts
            .granularity
            .parse()
            .map_err(|e| format!("scripts.granularity: {e}"))?;
        if let Some(pin) = &self.scripts.unicode_version {
            let actual = unicode_version();
            if *pin != actual {
                return Err(format!(
                    "scripts.unicode_version pinned to {pin} but Script tables are Unicode {actual}"
                ));
            }
        }
        if self.reorder.max_tokens == 0 {
            return Err("reorder.max_tokens must be at least 1".into());
        }
        let costs = EditCosts {
            substitution: self.reorder.substitution_cost,
        };
        if !costs.is_valid() {
            return Err("reorder.substitution_cost must be 1 or 2".into());
        }
        if self.reorder.batch_entities == 0 {
            return Err("reorder.batch_entities must be at least 1".into());
        }
        if !(self.stats.bin_width > 0.0 && self.stats.bin_width.is_finite()) {
            return Err("stats.bin_width must be positive".into());
        }
        if let Some(cmd) = &self.reorder.external_romanizer {
            if cmd.trim().is_empty() {
                return Err("reorder.external_romanizer is empty".into());
            }
        }
        let files = self
            .scripts
            .allowed
            .iter()
            .map(|p| ("scripts.allowed", p))
            .chain(self.reorder.tables.iter().map(|p| ("reorder.tables", p)))
            .chain(self.evaluate.gold.iter().map(|p| ("evaluate.gold", p)))
            .chain(self.evaluate.system.iter().map(|p| ("evaluate.system", p)))
            .chain(self.stats.alignments.iter().map(|p| ("stats.alignments", p)));
        for (key, path) in files {
            if !path.is_file() {
                return Err(format!("{key}: {} does not exist", path.display()));
            }
        }
        let workers = match self.runtime.workers {
            0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
            n => n,
        };
        Ok(Validated {
            input_mode,
            roots,
            type_mode,
            granularity,
            reorder: ReorderConfig {
                max_tokens: self.reorder.max_tokens,
                costs,
            },
            workers,
        })
    }

    pub fn store_dir(&self) -> PathBuf {
        self.paths
            .store
            .clone()
            .unwrap_or_else(|| self.paths.work.join("store"))
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.paths
            .manifest
            .clone()
            .unwrap_or_else(|| self.paths.work.join("run_manifest.jsonl"))
    }

    /// The effective configuration as JSON, for the manifest.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Parsed, checked values derived from a [`PipelineConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct Validated {
    pub input_mode: InputMode,
    pub roots: TypeRoots,
    pub type_mode: TypeMode,
    pub granularity: ProfileGranularity,
    pub reorder: ReorderConfig,
    pub workers: usize,
}
