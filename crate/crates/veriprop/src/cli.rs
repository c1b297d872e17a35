//! Command-line driver.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use veriprop_core::align::{Embedder, HashedEmbedder};
use veriprop_core::checks::VerificationReport;
use veriprop_core::extract::{extract_propositions, Document};
use veriprop_core::kb::KnowledgeBase;
use veriprop_core::lora::{
    encode_checkpoint, loss_and_grads, param_counts, train_adapters, AdapterCheckpoint, AdapterPair, InitMode,
    ParamCounts, ToyTask, TrainConfig,
};
use veriprop_core::metrics::{evaluate, render_table};
use veriprop_core::pipeline::{verify_sets, VerifyParams};
use veriprop_core::simcorpus::{generate_document, validate_faults, FaultSpec, SizeParams};

use crate::bundle::{read_bundle, write_bundle, Manifest};
use crate::error::{Error, Result, EXIT_OK, EXIT_USAGE};
use crate::io::{self, KB_ENV};

#[derive(Debug, Parser)]
#[command(name = "veriprop", version, about = "Proposition-level verification of clinical summaries")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract the propositions of one document.
    Extract(ExtractArgs),
    /// Verify a summary against its record.
    Verify(VerifyArgs),
    /// Score verification reports against gold labels.
    Evaluate(EvaluateArgs),
    /// Generate a seeded synthetic corpus bundle.
    GenCorpus(GenCorpusArgs),
    /// Train a low-rank adapter on a toy task and write the loss trace.
    LoraDemo(LoraDemoArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    pub doc: PathBuf,
    /// Knowledge-base directory; the built-in bundle when unset.
    #[arg(long, env = KB_ENV)]
    pub kb: Option<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, required_unless_present = "corpus", requires = "ehr")]
    pub summary: Option<PathBuf>,
    #[arg(long, requires = "summary")]
    pub ehr: Option<PathBuf>,
    /// Verify every pair of a corpus bundle; writes an array of reports.
    #[arg(long, conflicts_with_all = ["summary", "ehr"])]
    pub corpus: Option<PathBuf>,
    #[arg(long, env = KB_ENV)]
    pub kb: Option<PathBuf>,
    #[arg(long)]
    pub tau_match: Option<f64>,
    #[arg(long)]
    pub tau_num: Option<f64>,
    /// JSON lines of precomputed proposition vectors.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// JSON file with `tau_match` and `tau_num`; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads for `--corpus`.
    #[arg(long, default_value_t = 4)]
    pub jobs: usize,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// A report or an array of reports.
    #[arg(long)]
    pub report: PathBuf,
    /// A gold file, an array of gold files, or a directory of them.
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Standard output when unset.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenCorpusArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub docs: usize,
    /// JSON array of `{"kind", "rate", "seed"}` fault specs.
    #[arg(long)]
    pub faults: PathBuf,
    #[arg(long, default_value_t = SizeParams::default().min_props)]
    pub min_props: usize,
    #[arg(long, default_value_t = SizeParams::default().max_props)]
    pub max_props: usize,
    #[arg(long, env = KB_ENV)]
    pub kb: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub jobs: usize,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitArg {
    Zero,
    Gauss,
}

impl From<InitArg> for InitMode {
    fn from(a: InitArg) -> Self {
        match a {
            InitArg::Zero => InitMode::Zero,
            InitArg::Gauss => InitMode::Gauss,
        }
    }
}

#[derive(Debug, Args)]
pub struct LoraDemoArgs {
    /// Output dimension (number of classes).
    #[arg(long)]
    pub d: usize,
    /// Input dimension (number of tokens).
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub r: usize,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub steps: usize,
    #[arg(long, value_enum, default_value_t = InitArg::Zero)]
    pub init: InitArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.0)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    pub batch_size: usize,
    /// Also write the trained adapter; JSON when the name ends in `.json`,
    /// binary otherwise.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Extract(a) => cmd_extract(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::GenCorpus(a) => cmd_gen_corpus(a),
        Command::LoraDemo(a) => cmd_lora_demo(a),
    }
}

fn cmd_extract(a: ExtractArgs) -> Result<()> {
    let kb = io::resolve_kb(a.kb.as_deref())?;
    let doc: Document = io::read_json(&a.doc)?;
    let set = extract_propositions(&doc, &kb).map_err(|e| Error::data(&a.doc, None, e))?;
    io::write_json(&a.output, &set)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    tau_match: Option<f64>,
    tau_num: Option<f64>,
}

/// Flags, then the config file, then defaults.
pub fn resolve_params(tau_match: Option<f64>, tau_num: Option<f64>, config: Option<&Path>) -> Result<VerifyParams> {
    let file: ConfigFile = match config {
        Some(p) => io::read_json(p)?,
        None => ConfigFile::default(),
    };
    let d = VerifyParams::default();
    let params = VerifyParams {
        tau_match: tau_match.or(file.tau_match).unwrap_or(d.tau_match),
        tau_num: tau_num.or(file.tau_num).unwrap_or(d.tau_num),
    };
    if !(0.0..=1.0).contains(&params.tau_match) {
        return Err(Error::Usage(format!("tau-match {} is outside [0, 1]", params.tau_match)));
    }
    if !(params.tau_num >= 0.0 && params.tau_num.is_finite()) {
        return Err(Error::Usage(format!("tau-num {} must be a non-negative number", params.tau_num)));
    }
    Ok(params)
}

/// Extracts and verifies one pair, attributing failures to the file they
/// came from.
pub fn verify_pair(
    summary: (&Document, &Path),
    ehr: (&Document, &Path),
    kb: &KnowledgeBase,
    embedder: Option<(&dyn Embedder, &Path)>,
    params: &VerifyParams,
) -> Result<VerificationReport> {
    let ps = extract_propositions(summary.0, kb).map_err(|e| Error::data(summary.1, None, e))?;
    let pe = extract_propositions(ehr.0, kb).map_err(|e| Error::data(ehr.1, None, e))?;
    let hashed = HashedEmbedder::new(kb);
    match embedder {
        Some((emb, path)) => verify_sets(&ps, &pe, kb, emb, params).map_err(|e| Error::data(path, None, e)),
        None => verify_sets(&ps, &pe, kb, &hashed, params).map_err(|e| Error::Other(e.to_string())),
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Other(e.to_string()))
}

fn cmd_verify(a: VerifyArgs) -> Result<()> {
    let params = resolve_params(a.tau_match, a.tau_num, a.config.as_deref())?;
    let kb = io::resolve_kb(a.kb.as_deref())?;
    let embeddings = a.embeddings.as_deref().map(io::load_embeddings).transpose()?;
    let embedder = embeddings
        .as_ref()
        .zip(a.embeddings.as_deref())
        .map(|(e, p)| (e as &(dyn Embedder + Sync), p));
    if let Some(dir) = &a.corpus {
        let docs = read_bundle(dir)?;
        let reports: Result<Vec<VerificationReport>> = pool(a.jobs)?.install(|| {
            docs.par_iter()
                .map(|d| {
                    let sp = dir.join("summary").join(format!("{}.json", d.id));
                    let ep = dir.join("ehr").join(format!("{}.json", d.id));
                    let emb = embedder.map(|(e, p)| (e as &dyn Embedder, p));
                    verify_pair((&d.summary, &sp), (&d.ehr, &ep), &kb, emb, &params)
                })
                .collect()
        });
        return io::write_json(&a.output, &reports?);
    }
    let (sp, ep) = match (&a.summary, &a.ehr) {
        (Some(s), Some(e)) => (s, e),
        _ => return Err(Error::Usage("verify needs --summary and --ehr, or --corpus".into())),
    };
    let summary: Document = io::read_json(sp)?;
    let ehr: Document = io::read_json(ep)?;
    let emb = embedder.map(|(e, p)| (e as &dyn Embedder, p));
    let report = verify_pair((&summary, sp), (&ehr, ep), &kb, emb, &params)?;
    io::write_json(&a.output, &report)
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let reports = io::read_reports(&a.report)?;
    let golds = io::read_golds(&a.gold)?;
    let metrics = evaluate(&reports, &golds).map_err(|e| Error::data(&a.gold, None, e))?;
    let bytes = match a.format {
        Format::Json => io::to_json_bytes(&metrics),
        Format::Table => render_table(&metrics).into_bytes(),
    };
    match &a.output {
        Some(p) => io::write_atomic(p, &bytes),
        None => std::io::stdout()
            .write_all(&bytes)
            .map_err(|e| Error::io(Path::new("<stdout>"), e)),
    }
}

fn cmd_gen_corpus(a: GenCorpusArgs) -> Result<()> {
    if a.min_props == 0 || a.min_props > a.max_props {
        return Err(Error::Usage(format!("invalid size bounds {}..={}", a.min_props, a.max_props)));
    }
    let size = SizeParams {
        min_props: a.min_props,
        max_props: a.max_props,
    };
    let faults: Vec<FaultSpec> = io::read_json_list(&a.faults)?;
    validate_faults(&faults).map_err(|e| Error::data(&a.faults, None, e))?;
    let kb = io::resolve_kb(a.kb.as_deref())?;
    let docs = pool(a.jobs)?
        .install(|| {
            (0..a.docs)
                .into_par_iter()
                .map(|i| generate_document(a.seed, i, &faults, &kb, size))
                .collect::<std::result::Result<Vec<_>, _>>()
        })
        .map_err(|e| Error::Other(e.to_string()))?;
    let manifest = Manifest::new(a.seed, &faults, size, &docs);
    write_bundle(&a.output, &manifest, &docs)
}

#[derive(Debug, Serialize)]
pub struct DemoConfig {
    pub d: usize,
    pub k: usize,
    pub r: usize,
    pub alpha: f64,
    pub steps: usize,
    pub init: InitArg,
    pub seed: u64,
    pub train: TrainConfig,
}

#[derive(Debug, Serialize)]
pub struct DemoTrace {
    pub config: DemoConfig,
    pub param_counts: ParamCounts,
    /// Mean loss over the whole task before and after training.
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Mini-batch loss before each update.
    pub trace: Vec<f64>,
}

/// Runs the toy adapter experiment.
pub fn lora_demo(a: &LoraDemoArgs) -> Result<(DemoTrace, AdapterPair)> {
    let usage = |e: veriprop_core::lora::LoraError| Error::Usage(e.to_string());
    if a.d == 0 || a.k == 0 {
        return Err(Error::Usage("--d and --k must be positive".into()));
    }
    let train = TrainConfig {
        learning_rate: a.lr,
        weight_decay: a.weight_decay,
        steps: a.steps,
        batch_size: a.batch_size,
        ..TrainConfig::default()
    };
    train.validate().map_err(usage)?;
    let task = ToyTask::new(a.d, a.k, a.r, a.seed).map_err(usage)?;
    let init = AdapterPair::init(a.d, a.k, a.r, a.alpha, a.init.into(), a.seed.wrapping_add(1)).map_err(usage)?;
    let loss = |p: &AdapterPair| {
        loss_and_grads(&task.layer, p, &task.examples)
            .map(|r| r.0)
            .map_err(|e| Error::Other(e.to_string()))
    };
    let initial_loss = loss(&init)?;
    let (trained, trace) =
        train_adapters(&task.layer, init, &task.examples, &train).map_err(|e| Error::Other(e.to_string()))?;
    let out = DemoTrace {
        config: DemoConfig {
            d: a.d,
            k: a.k,
            r: a.r,
            alpha: a.alpha,
            steps: a.steps,
            init: a.init,
            seed: a.seed,
            train,
        },
        param_counts: param_counts(a.d as u64, a.k as u64, a.r as u64),
        initial_loss,
        final_loss: loss(&trained)?,
        trace,
    };
    Ok((out, trained))
}

fn cmd_lora_demo(a: LoraDemoArgs) -> Result<()> {
    let (trace, adapter) = lora_demo(&a)?;
    if let Some(p) = &a.checkpoint {
        let bytes = if p.extension().is_some_and(|x| x == "json") {
            io::to_json_bytes(&AdapterCheckpoint::from(&adapter))
        } else {
            encode_checkpoint(&adapter)
        };
        io::write_atomic(p, &bytes)?;
    }
    io::write_json(&a.output, &trace)
}
