//! Stage orchestration. Every stage reads its inputs from the work
//! directory, writes its outputs atomically and appends one line to the run
//! manifest.

pub mod config;
mod stages;

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};
use thiserror::Error;

use crate::io::sha256_file;
use crate::store::{CLASS_GRAPH_FILE, INDEX_FILE, RECORDS_FILE};

pub use config::{Overrides, PipelineConfig, Validated};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    BuildStore,
    TypeInfer,
    Clean,
    FilterScripts,
    Reorder,
    Emit,
    Evaluate,
    Stats,
}

impl Stage {
    /// The order `all` runs.
    pub const CANONICAL: [Stage; 7] = [
        Stage::Ingest,
        Stage::BuildStore,
        Stage::TypeInfer,
        Stage::Clean,
        Stage::FilterScripts,
        Stage::Reorder,
        Stage::Emit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::BuildStore => "build-store",
            Stage::TypeInfer => "typeinfer",
            Stage::Clean => "clean",
            Stage::FilterScripts => "filter-scripts",
            Stage::Reorder => "reorder",
            Stage::Emit => "emit",
            Stage::Evaluate => "evaluate",
            Stage::Stats => "stats",
        }
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            Stage::Ingest,
            Stage::BuildStore,
            Stage::TypeInfer,
            Stage::Clean,
            Stage::FilterScripts,
            Stage::Reorder,
            Stage::Emit,
            Stage::Evaluate,
            Stage::Stats,
        ]
        .into_iter()
        .find(|st| st.name() == s)
        .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("stage {stage}: missing input {}", path.display())]
    MissingArtifact { stage: &'static str, path: PathBuf },
    #[error("stage {stage} failed: {source:#}")]
    Runtime {
        stage: &'static str,
        source: anyhow::Error,
    },
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::MissingArtifact { .. } => 2,
            PipelineError::Runtime { .. } => 3,
        }
    }
}

/// Intermediate file locations under the work directory.
#[derive(Debug, Clone)]
pub struct WorkPaths {
    pub work: PathBuf,
    pub store: PathBuf,
    pub output: PathBuf,
}

impl WorkPaths {
    pub fn entities(&self) -> PathBuf {
        self.work.join("entities.jsonl")
    }
    pub fn typed(&self) -> PathBuf {
        self.work.join("typed.jsonl")
    }
    pub fn type_census(&self) -> PathBuf {
        self.work.join("type_census.tsv")
    }
    pub fn cleaned(&self) -> PathBuf {
        self.work.join("cleaned.jsonl")
    }
    pub fn filtered(&self) -> PathBuf {
        self.work.join("filtered.jsonl")
    }
    pub fn removed(&self) -> PathBuf {
        self.work.join("removed.jsonl")
    }
    pub fn entropy_report(&self) -> PathBuf {
        self.work.join("entropy_report.tsv")
    }
    pub fn reordered(&self) -> PathBuf {
        self.work.join("reordered.jsonl")
    }
    pub fn decisions(&self) -> PathBuf {
        self.work.join("reorder_decisions.tsv")
    }
    pub fn evaluation(&self) -> PathBuf {
        self.work.join("evaluation.tsv")
    }
    pub fn bitext(&self) -> PathBuf {
        self.work.join("bitext.txt")
    }
    pub fn bitext_index(&self) -> PathBuf {
        self.work.join("bitext_index.tsv")
    }
    pub fn mca(&self) -> PathBuf {
        self.work.join("mca.tsv")
    }
    pub fn mca_histogram(&self) -> PathBuf {
        self.work.join("mca_histogram.tsv")
    }
    pub fn store_files(&self) -> Vec<PathBuf> {
        [RECORDS_FILE, INDEX_FILE, CLASS_GRAPH_FILE]
            .iter()
            .map(|f| self.store.join(f))
            .collect()
    }
}

/// What a stage did: the files it read and wrote plus its counters.
#[derive(Debug, Clone)]
pub struct StageReport {
    pub stage: Stage,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub counters: Value,
    pub wall_time_ms: u128,
}

pub struct Pipeline {
    config: PipelineConfig,
    validated: Validated,
    paths: WorkPaths,
    pool: rayon::ThreadPool,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self, PipelineError> {
        let validated = config.validate().map_err(PipelineError::Config)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(validated.workers)
            .build()
            .map_err(|e| PipelineError::Config(format!("worker pool: {e}")))?;
        let paths = WorkPaths {
            work: config.paths.work.clone(),
            store: config.store_dir(),
            output: config.paths.output.clone(),
        };
        Ok(Pipeline {
            config,
            validated,
            paths,
            pool,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn paths(&self) -> &WorkPaths {
        &self.paths
    }

    /// Files a stage needs before it can start.
    fn required_inputs(&self, stage: Stage) -> Vec<PathBuf> {
        let p = &self.paths;
        match stage {
            Stage::Ingest => {
                if self.config.paths.dump.as_os_str() == "-" {
                    Vec::new()
                } else {
                    vec![self.config.paths.dump.clone()]
                }
            }
            Stage::BuildStore => vec![p.entities()],
            Stage::TypeInfer => p.store_files(),
            Stage::Clean => vec![p.typed()],
            Stage::FilterScripts => vec![p.cleaned()],
            Stage::Reorder => vec![p.filtered()],
            Stage::Emit => vec![p.reordered()],
            Stage::Evaluate => Vec::new(),
            Stage::Stats => vec![self.stats_names()],
        }
    }

    fn stats_names(&self) -> PathBuf {
        self.config
            .stats
            .names
            .clone()
            .unwrap_or_else(|| self.paths.filtered())
    }

    /// Run one stage and append its manifest line.
    pub fn run(&self, stage: Stage) -> Result<StageReport, PipelineError> {
        let inputs = self.required_inputs(stage);
        if let Some(missing) = inputs.iter().find(|p| !p.exists()) {
            return Err(PipelineError::MissingArtifact {
                stage: stage.name(),
                path: missing.clone(),
            });
        }
        let runtime = |source: anyhow::Error| PipelineError::Runtime {
            stage: stage.name(),
            source,
        };
        log::info!("stage {} starting", stage.name());
        let started = SystemTime::now();
        let clock = Instant::now();
        let (outputs, counters) = self
            .pool
            .install(|| stages::run(self, stage))
            .map_err(runtime)?;
        let wall_time_ms = clock.elapsed().as_millis();
        log::info!("stage {} done in {wall_time_ms} ms: {counters}", stage.name());

        let report = StageReport {
            stage,
            inputs: inputs
                .into_iter()
                .chain(self.optional_inputs(stage))
                .collect(),
            outputs,
            counters,
            wall_time_ms,
        };
        self.append_manifest(&report, started).map_err(runtime)?;
        Ok(report)
    }

    fn optional_inputs(&self, stage: Stage) -> Vec<PathBuf> {
        let c = &self.config;
        match stage {
            Stage::FilterScripts => c.scripts.allowed.iter().cloned().collect(),
            Stage::Reorder => c.reorder.tables.clone(),
            Stage::Evaluate => c
                .evaluate
                .gold
                .iter()
                .chain(c.evaluate.system.iter())
                .cloned()
                .collect(),
            Stage::Stats => c.stats.alignments.iter().cloned().collect(),
            _ => Vec::new(),
        }
    }

    /// Canonical stages in order, stopping at the first failure.
    pub fn run_all(&self) -> Result<Vec<StageReport>, PipelineError> {
        Stage::CANONICAL.iter().map(|&s| self.run(s)).collect()
    }

    fn append_manifest(&self, report: &StageReport, started: SystemTime) -> anyhow::Result<()> {
        let hashes = |paths: &[PathBuf]| -> anyhow::Result<BTreeMap<String, String>> {
            paths
                .iter()
                .filter(|p| p.is_file())
                .map(|p| Ok((p.display().to_string(), sha256_file(p)?)))
                .collect()
        };
        let line = json!({
            "stage": report.stage.name(),
            "started_unix_ms": started.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis()),
            "wall_time_ms": report.wall_time_ms,
            "inputs": hashes(&report.inputs)?,
            "outputs": hashes(&report.outputs)?,
            "counters": report.counters,
            "config": self.config.to_json(),
        });
        let path = self.config.manifest_path();
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut file = OpenOptions::new().create(true).append(true).open(&path)?;
        writeln!(file, "{line}")?;
        Ok(())
    }
}

/// Manifest lines, oldest first.
pub fn read_manifest(path: &Path) -> anyhow::Result<Vec<Value>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}
