//! `herald` command-line front end.
//!
//! Every subcommand works inside one output directory (`--out`, else
//! `paths.output_dir`, else `herald-out`):
//!
//! ```text
//! index.json, ingest_manifest.json      ingest
//! levels.json, stratify_manifest.json   stratify
//! store/                                index-examples
//! informalize/                          informalize
//! augment/                              augment
//! mix/dataset.jsonl, mix/manifest.json  mix
//! validate/                             validate
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use herald_core::augment::{AugmentationStrategy, VariantTally};
use herald_core::corpus::CorpusIndex;
use herald_core::dataset::{mix, DatasetStats, MixPools, MixSpec, NLFLPair, Provenance, Ratio3, RecordType};
use herald_core::depgraph::{build_graph, check_acyclic, schedule, stratify, GraphError};
use herald_core::retrieval::{EmbeddingProvider, ExampleStore, RetrievalError};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::augment::{informal_variants, informalize_synthesized, tactic_augment, variant_pair, AugmentError, FilterSettings};
use crate::backend::BackendError;
use crate::config::{ConfigError, PipelineConfig};
use crate::dataset::{read_pairs, write_pairs};
use crate::export::{parse_jixia_export, serialize_index, ExportError};
use crate::gateway::GatewayError;
use crate::informalize::{read_outputs, InformalizeError, Informalizer, RunOptions, Stop};
use crate::jsonl::{read_jsonl, write_atomic, write_json, write_jsonl, JsonlError};
use crate::source::{ingest_source_dir, SourceError};
use crate::store::{index_examples, read_store, write_store, RawExample, StoreError};
use crate::validator::{BenchItem, ValidateError, Validator, ValidatorConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_PROVIDER: i32 = 3;
pub const EXIT_ENV: i32 = 4;
pub const EXIT_INTERRUPTED: i32 = 130;

const EXIT_HELP: &str = "Exit codes:
  0    success
  2    invalid input: schema error, dependency cycle, bad config or flag
  3    provider exhausted or request budget spent (rerun to resume)
  4    environment: I/O failure or compiler backend unavailable
  130  interrupted by Ctrl-C after flushing finished work (rerun to resume)

Remote roles read their API key from HERALD_API_KEY_<ROLE>
(TRANSLATOR, BACK_TRANSLATOR, NLI_JUDGE, INFORMALIZER, EMBEDDING).";

#[derive(Debug, Parser)]
#[command(name = "herald", version, about = "Build NL-FL parallel datasets from a Lean 4 corpus", after_help = EXIT_HELP)]
pub struct Cli {
    /// Pipeline configuration (TOML). All-mock defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory shared by all stages.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a corpus export or scan .lean sources into index.json.
    Ingest(IngestArgs),
    /// Check the dependency graph for cycles and assign translation levels.
    Stratify(StratifyArgs),
    /// Embed annotated exemplars into a retrieval store.
    IndexExamples(IndexExamplesArgs),
    /// Translate statements level by level, then proofs step by step.
    Informalize(InformalizeArgs),
    /// Tactic-state statement synthesis and informal rewriting.
    Augment(AugmentArgs),
    /// Assemble a training mixture at the configured ratios.
    Mix(MixArgs),
    /// Run the translate / compile / back-translate / judge benchmark.
    Validate(ValidateArgs),
    /// Count records of a dataset file.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
#[group(required = false, multiple = false)]
pub struct IngestArgs {
    /// Corpus export JSON (default: `paths.corpus` from the config).
    #[arg(long)]
    pub export: Option<PathBuf>,
    /// Directory (or file) of .lean sources for the header scanner.
    #[arg(long)]
    pub from_source: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StratifyArgs {
    /// Also write the graph in DOT format.
    #[arg(long)]
    pub emit_dot: Option<PathBuf>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct IndexExamplesArgs {
    /// JSONL of {id, formal_text, informal_text}.
    #[arg(long)]
    pub examples: PathBuf,
    /// Store directory; defaults to <out>/store.
    #[arg(long)]
    pub store: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InformalizeArgs {
    /// Exemplar store; defaults to paths.example_store, then <out>/store if present.
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Stop after this many new records.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Discard earlier output instead of resuming.
    #[arg(long)]
    pub fresh: bool,
    /// Write prompts only; no provider calls.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Tactic-state statement synthesis.
    #[arg(long)]
    pub tactic: bool,
    /// Informal rewriting of translated statements.
    #[arg(long)]
    pub informal: bool,
    #[arg(long)]
    pub dedup_seed: Option<u64>,
    /// Comma-separated strategy tags.
    #[arg(long, value_delimiter = ',')]
    pub strategies: Option<Vec<AugmentationStrategy>>,
}

#[derive(Debug, Args)]
pub struct MixArgs {
    /// original : tactic_aug : informal_aug.
    #[arg(long)]
    pub ratio: Option<Ratio3>,
    /// nl_to_fl : fl_to_nl : general.
    #[arg(long)]
    pub dirmix: Option<Ratio3>,
    #[arg(long)]
    pub total: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// General-domain JSONL; defaults to paths.general.
    #[arg(long)]
    pub general: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// JSONL of {id, informal_text, header?}.
    #[arg(long)]
    pub bench: PathBuf,
    #[arg(long)]
    pub k: Option<u32>,
    /// Name in the summary; defaults to the bench file stem.
    #[arg(long)]
    pub name: Option<String>,
    /// Judge every compiling candidate instead of stopping at the first success.
    #[arg(long)]
    pub no_short_circuit: bool,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Dataset JSONL; defaults to <out>/mix/dataset.jsonl.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Also write the counts as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

/// A failure with its exit code.
#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError { code: EXIT_INPUT, message: message.into() }
    }
}

fn with_code(code: i32, e: impl std::fmt::Display) -> CliError {
    CliError { code, message: e.to_string() }
}

impl From<JsonlError> for CliError {
    fn from(e: JsonlError) -> Self {
        let code = if matches!(e, JsonlError::Io { .. }) { EXIT_ENV } else { EXIT_INPUT };
        with_code(code, e)
    }
}

impl From<ExportError> for CliError {
    fn from(e: ExportError) -> Self {
        with_code(EXIT_INPUT, e)
    }
}

impl From<SourceError> for CliError {
    fn from(e: SourceError) -> Self {
        let code = if matches!(e, SourceError::Corpus(_)) { EXIT_INPUT } else { EXIT_ENV };
        with_code(code, e)
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        with_code(EXIT_INPUT, e)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => with_code(EXIT_ENV, e),
            ConfigError::File(f) => f.into(),
            _ => with_code(EXIT_INPUT, e),
        }
    }
}

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        let code = match e {
            GatewayError::ProviderExhausted { .. } | GatewayError::BudgetExceeded(_) => EXIT_PROVIDER,
            GatewayError::InvalidRequest(_) => EXIT_INPUT,
            GatewayError::Cache { .. } => EXIT_ENV,
        };
        CliError { code, message: format!("{e}; rerun the same command to resume") }
    }
}

impl From<BackendError> for CliError {
    fn from(e: BackendError) -> Self {
        with_code(EXIT_ENV, e)
    }
}

impl From<RetrievalError> for CliError {
    fn from(e: RetrievalError) -> Self {
        let code = if matches!(e, RetrievalError::ProviderError { .. }) { EXIT_PROVIDER } else { EXIT_INPUT };
        with_code(code, e)
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::File(f) => f.into(),
            StoreError::Retrieval(r) => r.into(),
            other => with_code(EXIT_INPUT, other),
        }
    }
}

impl From<InformalizeError> for CliError {
    fn from(e: InformalizeError) -> Self {
        match e {
            InformalizeError::Gateway(g) => g.into(),
            InformalizeError::Retrieval(r) => r.into(),
            InformalizeError::File(f) => f.into(),
            other => with_code(EXIT_INPUT, other),
        }
    }
}

impl From<AugmentError> for CliError {
    fn from(e: AugmentError) -> Self {
        match e {
            AugmentError::Backend(b) => b.into(),
            AugmentError::Gateway(g) => g.into(),
            AugmentError::Prompt(p) => with_code(EXIT_INPUT, p),
        }
    }
}

impl From<ValidateError> for CliError {
    fn from(e: ValidateError) -> Self {
        match e {
            ValidateError::Gateway(g) => g.into(),
            ValidateError::Backend(b) => b.into(),
            ValidateError::File(f) => f.into(),
            other => with_code(EXIT_INPUT, other),
        }
    }
}

/// Where a stage reads and writes.
struct Ctx {
    config: PipelineConfig,
    out: PathBuf,
    digest: String,
}

impl Ctx {
    fn manifest<T: Serialize>(&self, path: &Path, command: &str, seeds: BTreeMap<&str, u64>, details: T) -> Result<(), CliError> {
        let value = json!({
            "command": command,
            "config_digest": self.digest,
            "seeds": seeds,
            "details": details,
        });
        Ok(write_json(path, &value)?)
    }

    fn index(&self) -> Result<CorpusIndex, CliError> {
        let path = self.out.join("index.json");
        let bytes = fs::read(&path).map_err(|e| with_code(EXIT_ENV, format!("{}: {e} (run `herald ingest` first)", path.display())))?;
        Ok(parse_jixia_export(&bytes)?.0)
    }
}

/// Parses `args` and runs the command, returning the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn run(cli: Cli) -> Result<i32, CliError> {
    let mut config = PipelineConfig::load(cli.config.as_deref())?;
    let out = cli.out.clone().unwrap_or_else(|| config.output_dir());
    apply_overrides(&mut config, &cli.command);
    config.validate()?;
    let digest = {
        let mut c = config.clone();
        c.paths.output_dir = None;
        c.gateway.cache_dir = None;
        c.digest()
    };
    let ctx = Ctx { config, out, digest };
    fs::create_dir_all(&ctx.out).map_err(|e| with_code(EXIT_ENV, format!("{}: {e}", ctx.out.display())))?;
    match &cli.command {
        Command::Ingest(a) => cmd_ingest(&ctx, a),
        Command::Stratify(a) => cmd_stratify(&ctx, a),
        Command::IndexExamples(a) => cmd_index_examples(&ctx, a),
        Command::Informalize(a) => cmd_informalize(&ctx, a),
        Command::Augment(a) => cmd_augment(&ctx, a),
        Command::Mix(a) => cmd_mix(&ctx, a),
        Command::Validate(a) => cmd_validate(&ctx, a),
        Command::Stats(a) => cmd_stats(&ctx, a),
    }
}

fn apply_overrides(config: &mut PipelineConfig, command: &Command) {
    let k = &mut config.knobs;
    match command {
        Command::Stratify(a) => {
            if let Some(b) = a.batch_size {
                k.batch_size = b;
            }
        }
        Command::Augment(a) => {
            if let Some(s) = a.dedup_seed {
                k.dedup_seed = s;
            }
            if let Some(s) = &a.strategies {
                k.strategies = s.clone();
            }
        }
        Command::Mix(a) => {
            if let Some(r) = a.ratio {
                k.ratio = r;
            }
            if let Some(r) = a.dirmix {
                k.dirmix = r;
            }
            if a.total.is_some() {
                k.mix_total = a.total;
            }
            if let Some(s) = a.seed {
                k.mix_seed = s;
            }
            if let Some(g) = &a.general {
                config.paths.general = Some(g.clone());
            }
        }
        Command::Validate(a) => {
            if let Some(kk) = a.k {
                k.pass_k = kk;
            }
            if a.no_short_circuit {
                k.short_circuit = false;
            }
        }
        Command::Informalize(a) => {
            if let Some(s) = &a.store {
                config.paths.example_store = Some(s.clone());
            }
        }
        _ => {}
    }
}

fn cmd_ingest(ctx: &Ctx, a: &IngestArgs) -> Result<i32, CliError> {
    let export = if a.from_source.is_none() {
        let path = a.export.clone().or_else(|| ctx.config.paths.corpus.clone());
        Some(path.ok_or_else(|| CliError::input("ingest needs --export, --from-source or paths.corpus in the config"))?)
    } else {
        None
    };
    let (index, warnings, skipped) = if let Some(path) = &export {
        let bytes = fs::read(path).map_err(|e| with_code(EXIT_ENV, format!("{}: {e}", path.display())))?;
        let (index, warnings) = parse_jixia_export(&bytes).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        (index, warnings, 0)
    } else {
        let root = a.from_source.as_ref().expect("checked above");
        let got = ingest_source_dir(root)?;
        for d in &got.diagnostics {
            for n in &d.notes {
                eprintln!("note: {}:{}: {}", d.file, n.line, n.reason);
            }
        }
        let skipped = got.skipped();
        (got.index, got.warnings, skipped)
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    write_atomic(&ctx.out.join("index.json"), serialize_index(&index).as_bytes())?;
    let details = json!({
        "declarations": index.len(),
        "proofs": index.proofs().len(),
        "dangling_dependencies": warnings.len(),
        "skipped_headers": skipped,
    });
    ctx.manifest(&ctx.out.join("ingest_manifest.json"), "ingest", BTreeMap::new(), details)?;
    println!("indexed {} declarations ({} tactic proofs, {} warnings)", index.len(), index.proofs().len(), warnings.len());
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct LevelsFile<'a> {
    depth: usize,
    unresolved_dependencies: usize,
    level_of: &'a BTreeMap<String, u32>,
    levels: &'a [Vec<String>],
    batches: Vec<Vec<String>>,
}

fn cmd_stratify(ctx: &Ctx, a: &StratifyArgs) -> Result<i32, CliError> {
    let index = ctx.index()?;
    let built = build_graph(&index);
    check_acyclic(&built.graph)?;
    let levels = stratify(&built.graph)?;
    let batches = schedule(&levels, ctx.config.knobs.batch_size);
    let file = LevelsFile {
        depth: levels.depth(),
        unresolved_dependencies: built.unresolved,
        level_of: &levels.level_of,
        levels: &levels.levels,
        batches,
    };
    write_json(&ctx.out.join("levels.json"), &file)?;
    if let Some(dot) = &a.emit_dot {
        write_atomic(dot, built.graph.to_dot(Some(&levels)).as_bytes())?;
    }
    let sizes: Vec<usize> = levels.levels.iter().map(Vec::len).collect();
    ctx.manifest(&ctx.out.join("stratify_manifest.json"), "stratify", BTreeMap::new(), json!({"level_sizes": sizes}))?;
    println!("{} declarations in {} levels", levels.level_of.len(), levels.depth());
    Ok(EXIT_OK)
}

fn cmd_index_examples(ctx: &Ctx, a: &IndexExamplesArgs) -> Result<i32, CliError> {
    let raw: Vec<RawExample> = read_jsonl(&a.examples)?;
    let embedder = ctx.config.embedder();
    let store = index_examples(&raw, &embedder)?;
    let dir = a.store.clone().unwrap_or_else(|| ctx.out.join("store"));
    write_store(&dir, &store, Some(&embedder.provider_id()))?;
    println!("stored {} examples of dim {} in {}", store.len(), store.dim(), dir.display());
    Ok(EXIT_OK)
}

fn load_store(ctx: &Ctx) -> Result<Option<ExampleStore>, CliError> {
    let dir = ctx.config.paths.example_store.clone().or_else(|| {
        let d = ctx.out.join("store");
        d.join("meta.json").exists().then_some(d)
    });
    match dir {
        Some(d) => {
            let (store, meta) = read_store(&d)?;
            if store.dim() != ctx.config.embedding.dim {
                return Err(CliError::input(format!(
                    "store {} has dim {} but embedding.dim is {}",
                    d.display(),
                    meta.dim,
                    ctx.config.embedding.dim
                )));
            }
            Ok(Some(store))
        }
        None => Ok(None),
    }
}

static INTERRUPTED: AtomicBool = AtomicBool::new(false);

fn cmd_informalize(ctx: &Ctx, a: &InformalizeArgs) -> Result<i32, CliError> {
    let index = ctx.index()?;
    let registry = ctx.config.templates()?;
    let notes = ctx.config.tactic_notes()?;
    let store = load_store(ctx)?;
    let embedder: Arc<dyn EmbeddingProvider + Send + Sync> = Arc::from(ctx.config.embedder());
    let client = ctx.config.role_client("informalizer");
    let k = &ctx.config.knobs;
    let inf = Informalizer {
        index: &index,
        registry: &registry,
        tactic_notes: &notes,
        store: store.as_ref().map(|s| (s, &*embedder as &(dyn EmbeddingProvider + Sync))),
        client: &client,
        retrieval_k: k.retrieval_k,
        neighbor_limit: k.neighbor_limit,
        max_prompt_chars: k.max_prompt_chars,
        batch_size: k.batch_size,
        config_digest: ctx.digest.clone(),
    };
    let _ = ctrlc::set_handler(|| INTERRUPTED.store(true, Ordering::SeqCst));
    let opts = RunOptions { limit: a.limit, fresh: a.fresh, dry_run: a.dry_run, interrupt: Some(&INTERRUPTED) };
    let dir = ctx.out.join("informalize");
    let summary = inf.run(&dir, opts)?;
    if a.dry_run {
        println!("prompts written to {}", dir.join("prompts.jsonl").display());
        return Ok(EXIT_OK);
    }
    let m = summary.manifest.expect("manifest after a real run");
    println!("{} new records; {} statements and {} proofs in total", summary.written, m.statements, m.proofs);
    match summary.stop {
        Stop::Finished => Ok(EXIT_OK),
        Stop::Limit => {
            println!("stopped at --limit; rerun to continue");
            Ok(EXIT_OK)
        }
        Stop::Interrupted => {
            eprintln!("interrupted; finished records are saved, rerun to resume");
            Ok(EXIT_INTERRUPTED)
        }
    }
}

fn original_pairs(ctx: &Ctx) -> Result<Vec<NLFLPair>, CliError> {
    Ok(read_outputs(&ctx.out.join("informalize"))?)
}

fn cmd_augment(ctx: &Ctx, a: &AugmentArgs) -> Result<i32, CliError> {
    if !a.tactic && !a.informal {
        return Err(CliError::input("choose at least one of --tactic and --informal"));
    }
    let dir = ctx.out.join("augment");
    let k = &ctx.config.knobs;
    let mut details = BTreeMap::new();
    if a.tactic {
        let index = ctx.index()?;
        let backend = ctx.config.backend();
        let settings = FilterSettings {
            header_prelude: ctx.config.backend.header_prelude.clone(),
            timeout: ctx.config.compile_timeout(),
            parallelism: k.candidate_parallelism,
        };
        let aug = tactic_augment(&index, backend.as_ref(), &settings, k.dedup_seed)?;
        write_jsonl(&dir.join("synthesized.jsonl"), &aug.synthesized)?;
        write_jsonl(&dir.join("rejected.jsonl"), &aug.rejected)?;
        write_jsonl(&dir.join("sampled.jsonl"), &aug.sampled)?;
        let registry = ctx.config.templates()?;
        let client = ctx.config.role_client("informalizer");
        let pairs = informalize_synthesized(&aug.sampled, &index, &registry, &client, k.max_prompt_chars)?;
        write_pairs(&pairs, &dir.join("tactic_aug.jsonl"))?;
        details.insert("tactic", json!({
            "synthesized": aug.synthesized.len(),
            "valid": aug.valid.len(),
            "rejected": aug.rejected.len(),
            "n_original": aug.n_original,
            "sampled": aug.sampled.len(),
        }));
        println!(
            "synthesized {}, valid {}, rejected {}, sampled {} (target {})",
            aug.synthesized.len(),
            aug.valid.len(),
            aug.rejected.len(),
            aug.sampled.len(),
            aug.n_original
        );
    }
    if a.informal {
        let originals: Vec<NLFLPair> =
            original_pairs(ctx)?.into_iter().filter(|p| p.record_type == RecordType::Statement).collect();
        let client = ctx.config.role_client("informalizer");
        let mut tally = VariantTally::default();
        let mut variants = Vec::new();
        let mut pairs = Vec::new();
        for p in &originals {
            for v in informal_variants(p, &k.strategies, &client, &mut tally)? {
                pairs.push(variant_pair(p, &v));
                variants.push(v);
            }
        }
        write_jsonl(&dir.join("variants.jsonl"), &variants)?;
        write_pairs(&pairs, &dir.join("informal_aug.jsonl"))?;
        details.insert("informal", json!({"sources": originals.len(), "tally": tally}));
        println!("variants: attempted {}, kept {}, dropped {}", tally.attempted, tally.kept, tally.dropped);
    }
    let seeds = [("dedup_seed", k.dedup_seed)].into_iter().collect();
    ctx.manifest(&dir.join("manifest.json"), "augment", seeds, details)?;
    Ok(EXIT_OK)
}

fn read_optional_pairs(path: &Path) -> Result<Vec<NLFLPair>, CliError> {
    if path.exists() {
        Ok(read_pairs(path)?)
    } else {
        Ok(Vec::new())
    }
}

fn cmd_mix(ctx: &Ctx, _a: &MixArgs) -> Result<i32, CliError> {
    let k = &ctx.config.knobs;
    let original = original_pairs(ctx)?;
    let aug = ctx.out.join("augment");
    let tactic_aug = read_optional_pairs(&aug.join("tactic_aug.jsonl"))?;
    let informal_aug = read_optional_pairs(&aug.join("informal_aug.jsonl"))?;
    let general = match &ctx.config.paths.general {
        Some(p) => read_pairs(p)?,
        None => return Err(CliError::input("no general-domain data: set paths.general or pass --general")),
    };
    if let Some(bad) = general.iter().find(|p| p.provenance != Provenance::General) {
        return Err(CliError::input(format!("general data holds `{}` with provenance {}", bad.id, bad.provenance.as_str())));
    }
    let total = k
        .mix_total
        .unwrap_or(2 * (original.len() + tactic_aug.len() + informal_aug.len()) as u64 + general.len() as u64);
    let spec = MixSpec { provenance: k.ratio, directions: k.dirmix, total, seed: k.mix_seed };
    let pools = MixPools { original: &original, tactic_aug: &tactic_aug, informal_aug: &informal_aug, general: &general };
    let (dataset, manifest) = mix(pools, &spec).map_err(|e| CliError::input(e.to_string()))?;
    if manifest.scaled_down {
        eprintln!("warning: pools too small for {} records; scaled down to {}", manifest.requested_total, manifest.total);
    }
    let dir = ctx.out.join("mix");
    let n = write_pairs(&dataset, &dir.join("dataset.jsonl"))?;
    let seeds = [("mix_seed", k.mix_seed)].into_iter().collect();
    let details = json!({
        "mixing": manifest,
        "direction_ratio": k.dirmix.to_string(),
        "ratio_applied": "before mirroring",
        "records": n,
    });
    ctx.manifest(&dir.join("manifest.json"), "mix", seeds, details)?;
    println!("wrote {n} records to {}", dir.join("dataset.jsonl").display());
    Ok(EXIT_OK)
}

fn cmd_validate(ctx: &Ctx, a: &ValidateArgs) -> Result<i32, CliError> {
    let items: Vec<BenchItem> = read_jsonl(&a.bench)?;
    if items.is_empty() {
        return Err(CliError::input(format!("{} holds no items", a.bench.display())));
    }
    let k = &ctx.config.knobs;
    let backend = ctx.config.backend();
    let validator = Validator {
        translator: ctx.config.role_client("translator"),
        back_translator: ctx.config.role_client("back_translator"),
        judge: ctx.config.role_client("nli_judge"),
        backend: backend.as_ref(),
        config: ValidatorConfig {
            k: k.pass_k,
            short_circuit: k.short_circuit,
            candidate_parallelism: k.candidate_parallelism,
            item_parallelism: k.item_parallelism,
            compile_timeout: ctx.config.compile_timeout(),
            header_prelude: ctx.config.backend.header_prelude.clone(),
        },
    };
    let name = a
        .name
        .clone()
        .or_else(|| a.bench.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "bench".into());
    let dir = ctx.out.join("validate");
    let summary = validator.run_benchmark(&items, &name, &dir)?;
    let table = summary.render_table();
    write_atomic(&dir.join("summary.txt"), table.as_bytes())?;
    let details = json!({"k": k.pass_k, "short_circuit": k.short_circuit, "items": items.len()});
    ctx.manifest(&dir.join("manifest.json"), "validate", BTreeMap::new(), details)?;
    print!("{table}");
    Ok(EXIT_OK)
}

fn cmd_stats(ctx: &Ctx, a: &StatsArgs) -> Result<i32, CliError> {
    let path = a.dataset.clone().unwrap_or_else(|| ctx.out.join("mix").join("dataset.jsonl"));
    let pairs = read_pairs(&path)?;
    let stats = DatasetStats::from_pairs(&pairs);
    if let Some(json_path) = &a.json {
        write_json(json_path, &stats)?;
    }
    print!("{}", stats.render_table());
    Ok(EXIT_OK)
}
