use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use namebank::fetch::{endpoint_from_env, fetch_entity};
use namebank::io::AtomicFile;
use namebank::pipeline::{Overrides, Pipeline, PipelineConfig, PipelineError, Stage};

/// Build a typed multilingual name resource from Wikidata dumps.
#[derive(Debug, Parser)]
#[command(name = "namebank", version)]
struct Cli {
    /// TOML config file. Flags override its values.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stream the dump into canonical entity records.
    Ingest,
    /// Build the entity store and class graph.
    BuildStore,
    /// Assign PER/LOC/ORG types and write the type census.
    Typeinfer,
    /// Remove parenthesized disambiguators from labels.
    Clean,
    /// Drop labels outside their language's allowed scripts.
    FilterScripts,
    /// Normalize PER name token order against English.
    Reorder,
    /// Write the resource TSVs and summary.
    Emit,
    /// Score the reorderer on a gold set.
    Evaluate,
    /// Write aligner bitext; with --alignments, compute MCA.
    Stats,
    /// Run ingest through emit.
    All,
    /// Download entities from Wikidata as canonical JSONL.
    Fetch {
        /// Item ids such as Q7251.
        #[arg(required = true)]
        qids: Vec<String>,
        /// Output file; standard output if omitted.
        #[arg(long, short = 'O')]
        out: Option<PathBuf>,
        /// Entity data endpoint; defaults to $NAMEBANK_WIKIDATA_ENDPOINT or Wikidata.
        #[arg(long)]
        endpoint: Option<String>,
    },
}

fn stage_of(command: &Command) -> Option<Stage> {
    Some(match command {
        Command::Ingest => Stage::Ingest,
        Command::BuildStore => Stage::BuildStore,
        Command::Typeinfer => Stage::TypeInfer,
        Command::Clean => Stage::Clean,
        Command::FilterScripts => Stage::FilterScripts,
        Command::Reorder => Stage::Reorder,
        Command::Emit => Stage::Emit,
        Command::Evaluate => Stage::Evaluate,
        Command::Stats => Stage::Stats,
        Command::All | Command::Fetch { .. } => return None,
    })
}

fn fetch(qids: &[String], out: Option<PathBuf>, endpoint: Option<String>) -> Result<(), String> {
    let endpoint = endpoint.unwrap_or_else(endpoint_from_env);
    let mut lines = String::new();
    for qid in qids {
        let record = fetch_entity(qid, &endpoint).map_err(|e| format!("fetch {qid}: {e}"))?;
        log::info!("fetched {} ({} labels)", record.qid, record.labels.len());
        lines.push_str(&record.to_canonical_json());
        lines.push('\n');
    }
    match out {
        Some(path) => {
            let mut file = AtomicFile::create(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            file.write_all(lines.as_bytes())
                .and_then(|_| file.commit().map(|_| ()))
                .map_err(|e| format!("{}: {e}", path.display()))
        }
        None => std::io::stdout()
            .write_all(lines.as_bytes())
            .map_err(|e| e.to_string()),
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path).map_err(PipelineError::Config)?,
        None => PipelineConfig::default(),
    };
    config.apply(&cli.overrides);
    let pipeline = Pipeline::new(config)?;
    match stage_of(&cli.command) {
        Some(stage) => pipeline.run(stage).map(|_| ()),
        None => pipeline.run_all().map(|_| ()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage_error { 1 } else { 0 });
        }
    };

    if let Command::Fetch { qids, out, endpoint } = cli.command {
        return match fetch(&qids, out, endpoint) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                log::error!("{e}");
                ExitCode::from(3)
            }
        };
    }

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
