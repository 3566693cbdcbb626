//! Command-line front end: configuration resolution and the `simulate`,
//! `gen-trace` and `analyze` commands.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use shardsim_core::metrics::{deserialize_json, parse_csv_rows, serialize_reports, Aggregates, MetricsError};
use shardsim_core::trace::ClusteredSpec;
use shardsim_core::{
    gen_clustered, gen_uniform, load_trace, AllocatorKind, Experiment, ExperimentConfig, ExperimentError, Fusion,
    ModelError, ReportFormat, SimParams, Trace,
};
use thiserror::Error;

/// Environment variable capping rayon worker threads; 0 means automatic.
pub const THREADS_ENV: &str = "SHARDSIM_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid {field}: {reason}")]
    Usage { field: String, reason: String },
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    fn usage(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Usage { field: field.into(), reason: reason.into() }
    }

    /// 2 for usage errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage { .. } => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidParam { field, reason } => CliError::usage(field, reason),
            ModelError::ZeroShards => CliError::usage("k", "must be at least 1"),
            other => CliError::Runtime(other.into()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config { field, reason } => CliError::usage(field, reason),
            ExperimentError::Model(m) => m.into(),
            other => CliError::Runtime(other.into()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "shardsim", version, about = "Epoch-driven simulator for account-to-shard allocation")]
pub struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Replay a trace and write per-epoch metrics plus a run manifest.
    Simulate(SimulateArgs),
    /// Write a synthetic trace as CSV.
    GenTrace(GenTraceArgs),
    /// Print aggregates of a metrics file.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimulateArgs {
    /// TOML file with the same keys as the flags (underscores for dashes).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub tau: Option<u64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Per-shard capacity; defaults to mean evaluation epoch size / k.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// hash, greedy or pilot.
    #[arg(long)]
    pub allocator: Option<String>,
    /// Starting mapping for pilot: hash or greedy.
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Trailing epochs of history clients use; all by default.
    #[arg(long)]
    pub window: Option<u32>,
    /// Trace CSV file.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Generator spec, e.g. `clustered:communities=16,size=100`.
    #[arg(long)]
    pub gen: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub noisy_mempool: Option<f64>,
    /// Fuse raw interaction counts instead of normalized distributions.
    #[arg(long)]
    pub raw_fusion: bool,
    #[arg(long)]
    pub warmup_fraction: Option<f64>,
    #[arg(long)]
    pub greedy_cap: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct GenTraceArgs {
    /// Generator spec, e.g. `uniform:accounts=100,txs=10,blocks=10,seed=1`.
    #[arg(long)]
    pub gen: String,
    /// Destination CSV file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// Metrics file written by `simulate`.
    pub file: PathBuf,
    /// csv or json; inferred from the extension when omitted.
    #[arg(long)]
    pub format: Option<String>,
}

/// Values read from `--config`.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub k: Option<u32>,
    pub eta: Option<f64>,
    pub tau: Option<u64>,
    pub beta: Option<f64>,
    pub lambda: Option<f64>,
    pub seed: Option<u64>,
    pub allocator: Option<String>,
    pub init: Option<String>,
    pub epochs: Option<usize>,
    pub window: Option<u32>,
    pub trace: Option<PathBuf>,
    pub gen: Option<String>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
    pub noisy_mempool: Option<f64>,
    pub raw_fusion: Option<bool>,
    pub warmup_fraction: Option<f64>,
    pub greedy_cap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceSource {
    File(PathBuf),
    Generator(GenSpec),
}

/// Fully resolved `simulate` configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: SimParams,
    /// `None`: derived per run from the evaluation traffic.
    pub lambda: Option<f64>,
    pub allocator: AllocatorKind,
    pub init_allocator: AllocatorKind,
    pub trace_source: Option<TraceSource>,
    pub epochs: Option<usize>,
    pub history_window: Option<u32>,
    pub out: PathBuf,
    pub format: ReportFormat,
    pub noisy_mempool: f64,
    pub fusion: Fusion,
    pub warmup_fraction: f64,
    pub greedy_cap_factor: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let exp = ExperimentConfig::default();
        RunConfig {
            params: SimParams::default(),
            lambda: None,
            allocator: exp.allocator,
            init_allocator: exp.init,
            trace_source: None,
            epochs: None,
            history_window: None,
            out: PathBuf::from("."),
            format: ReportFormat::Csv,
            noisy_mempool: exp.noisy_mempool,
            fusion: exp.fusion,
            warmup_fraction: exp.warmup_fraction,
            greedy_cap_factor: exp.greedy_cap_factor,
        }
    }
}

impl RunConfig {
    pub fn experiment_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            params: self.params,
            lambda: self.lambda,
            allocator: self.allocator,
            init: self.init_allocator,
            epochs: self.epochs,
            warmup_fraction: self.warmup_fraction,
            history_window: self.history_window,
            noisy_mempool: self.noisy_mempool,
            fusion: self.fusion,
            greedy_cap_factor: self.greedy_cap_factor,
            source: match &self.trace_source {
                Some(TraceSource::File(p)) => p.display().to_string(),
                Some(TraceSource::Generator(g)) => g.to_string(),
                None => String::new(),
            },
        }
    }
}

fn parse_field<T: FromStr>(field: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| CliError::usage(field, e.to_string()))
}

/// Reads `--config` when given and merges it under the flags.
pub fn parse_config(args: &SimulateArgs) -> Result<RunConfig, CliError> {
    let file = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::usage("config", format!("cannot read {}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| CliError::usage("config", e.to_string()))?
        }
        None => FileConfig::default(),
    };
    resolve_config(&file, args)
}

/// Defaults, then `file`, then `args`; validates the result.
pub fn resolve_config(file: &FileConfig, args: &SimulateArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    let p = &mut cfg.params;
    macro_rules! layer {
        ($dst:expr, $name:ident) => {
            if let Some(v) = args.$name.clone().or(file.$name.clone()) {
                $dst = v;
            }
        };
    }
    layer!(p.k, k);
    layer!(p.eta, eta);
    layer!(p.tau, tau);
    layer!(p.beta, beta);
    layer!(p.seed, seed);
    layer!(cfg.noisy_mempool, noisy_mempool);
    layer!(cfg.warmup_fraction, warmup_fraction);
    layer!(cfg.greedy_cap_factor, greedy_cap);
    layer!(cfg.out, out);
    cfg.lambda = args.lambda.or(file.lambda);
    cfg.epochs = args.epochs.or(file.epochs);
    cfg.history_window = args.window.or(file.window);

    if let Some(a) = args.allocator.as_deref().or(file.allocator.as_deref()) {
        cfg.allocator = parse_field("allocator", a)?;
    }
    if let Some(a) = args.init.as_deref().or(file.init.as_deref()) {
        cfg.init_allocator = parse_field("init", a)?;
    }
    if let Some(f) = args.format.as_deref().or(file.format.as_deref()) {
        cfg.format = parse_field("format", f)?;
    }
    if args.raw_fusion || file.raw_fusion == Some(true) {
        cfg.fusion = Fusion::Raw;
    }

    // a flag for one source replaces the file's choice of either
    let (trace, gen) = if args.trace.is_some() || args.gen.is_some() {
        (args.trace.clone(), args.gen.clone())
    } else {
        (file.trace.clone(), file.gen.clone())
    };
    cfg.trace_source = match (trace, gen) {
        (Some(_), Some(_)) => {
            return Err(CliError::usage("trace", "give either a trace file or a generator, not both"))
        }
        (Some(path), None) => Some(TraceSource::File(path)),
        (None, Some(spec)) => Some(TraceSource::Generator(parse_field("gen", &spec)?)),
        (None, None) => None,
    };

    if cfg.epochs == Some(0) {
        return Err(CliError::usage("epochs", "must be at least 1"));
    }
    if cfg.history_window == Some(0) {
        return Err(CliError::usage("window", "must be at least 1"));
    }
    if let Some(l) = cfg.lambda {
        if !(l > 0.0) || !l.is_finite() {
            return Err(CliError::usage("lambda", "must be a finite positive value"));
        }
    }
    cfg.params.validate()?;
    cfg.experiment_config().validate()?;
    Ok(cfg)
}

/// Synthetic trace description, written `kind:key=value,...`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GenSpec {
    Uniform { accounts: usize, txs_per_block: usize, blocks: u64, seed: u64 },
    Clustered(ClusteredSpec),
}

impl GenSpec {
    pub fn generate(&self) -> Result<Trace, shardsim_core::TraceError> {
        match *self {
            GenSpec::Uniform { accounts, txs_per_block, blocks, seed } => {
                gen_uniform(accounts, txs_per_block, blocks, seed)
            }
            GenSpec::Clustered(spec) => gen_clustered(&spec),
        }
    }
}

impl std::fmt::Display for GenSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GenSpec::Uniform { accounts, txs_per_block, blocks, seed } => {
                write!(f, "uniform:accounts={accounts},txs={txs_per_block},blocks={blocks},seed={seed}")
            }
            GenSpec::Clustered(s) => write!(
                f,
                "clustered:communities={},size={},p_intra={},churn={},txs={},blocks={},seed={}",
                s.n_communities, s.accounts_per_community, s.p_intra, s.churn, s.txs_per_block, s.n_blocks, s.seed
            ),
        }
    }
}

#[derive(Debug, Error)]
#[error("{key}: {reason}")]
pub struct GenSpecError {
    pub key: String,
    pub reason: String,
}

impl FromStr for GenSpec {
    type Err = GenSpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |key: &str, reason: String| GenSpecError { key: key.to_owned(), reason };
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut pairs = Vec::new();
        for item in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = item.split_once('=').ok_or_else(|| err(item, "expected key=value".into()))?;
            pairs.push((key.trim(), value.trim()));
        }
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, GenSpecError> {
            v.parse().map_err(|_| GenSpecError { key: key.to_owned(), reason: format!("cannot parse `{v}`") })
        }
        match kind.trim() {
            "uniform" => {
                let (mut accounts, mut txs_per_block, mut blocks, mut seed) = (1000, 100, 1000, 0);
                for (key, v) in pairs {
                    match key {
                        "accounts" => accounts = num(key, v)?,
                        "txs" => txs_per_block = num(key, v)?,
                        "blocks" => blocks = num(key, v)?,
                        "seed" => seed = num(key, v)?,
                        _ => return Err(err(key, "unknown key for uniform".into())),
                    }
                }
                Ok(GenSpec::Uniform { accounts, txs_per_block, blocks, seed })
            }
            "clustered" => {
                let mut spec = ClusteredSpec {
                    n_communities: 16,
                    accounts_per_community: 100,
                    p_intra: 0.9,
                    txs_per_block: 100,
                    n_blocks: 1000,
                    churn: 0.01,
                    seed: 0,
                };
                for (key, v) in pairs {
                    match key {
                        "communities" => spec.n_communities = num(key, v)?,
                        "size" => spec.accounts_per_community = num(key, v)?,
                        "p_intra" => spec.p_intra = num(key, v)?,
                        "churn" => spec.churn = num(key, v)?,
                        "txs" => spec.txs_per_block = num(key, v)?,
                        "blocks" => spec.n_blocks = num(key, v)?,
                        "seed" => spec.seed = num(key, v)?,
                        _ => return Err(err(key, "unknown key for clustered".into())),
                    }
                }
                Ok(GenSpec::Clustered(spec))
            }
            other => Err(err(other, "generator must be `uniform` or `clustered`".into())),
        }
    }
}

/// Paths written by [`cmd_simulate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOutput {
    pub metrics: PathBuf,
    pub manifest: Option<PathBuf>,
    pub aggregates: Aggregates,
}

fn load_source(source: &TraceSource) -> anyhow::Result<Trace> {
    use anyhow::Context;
    match source {
        TraceSource::File(path) => {
            let f = File::open(path).with_context(|| format!("cannot open trace {}", path.display()))?;
            load_trace(BufReader::new(f)).with_context(|| format!("cannot load trace {}", path.display()))
        }
        TraceSource::Generator(spec) => Ok(spec.generate()?),
    }
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<SimulateOutput, CliError> {
    use anyhow::Context;
    let source = cfg.trace_source.as_ref().ok_or_else(|| CliError::usage("trace", "give --trace or --gen"))?;
    let trace = load_source(source)?;
    let exp = Experiment::new(&trace, &cfg.experiment_config())?;
    let manifest = exp.manifest().clone();
    if let Some((first, last, n)) = manifest.split.partial_tail {
        log::info!("blocks {first}..={last} ({n} transactions) form a partial epoch and are not simulated");
    }
    let series = exp.run()?;

    fs::create_dir_all(&cfg.out).with_context(|| format!("cannot create {}", cfg.out.display()))?;
    let metrics = cfg.out.join(format!("{}.metrics.{}", manifest.run_id, cfg.format.extension()));
    let w = BufWriter::new(File::create(&metrics).with_context(|| format!("cannot write {}", metrics.display()))?);
    serialize_reports(&series, cfg.format, w).context("writing metrics")?;
    let manifest_path = match cfg.format {
        ReportFormat::Csv => {
            let path = cfg.out.join(format!("{}.manifest.json", manifest.run_id));
            let mut w =
                BufWriter::new(File::create(&path).with_context(|| format!("cannot write {}", path.display()))?);
            serde_json::to_writer_pretty(&mut w, &manifest).context("writing manifest")?;
            w.flush().context("writing manifest")?;
            Some(path)
        }
        ReportFormat::Json => None,
    };
    Ok(SimulateOutput { metrics, manifest: manifest_path, aggregates: series.aggregates() })
}

/// Account and transaction counts of the written trace.
pub fn cmd_gen_trace(spec: &GenSpec, out: &Path) -> Result<(usize, usize), CliError> {
    use anyhow::Context;
    let trace = spec.generate().map_err(|e| CliError::usage("gen", e.to_string()))?;
    let f = File::create(out).with_context(|| format!("cannot write {}", out.display()))?;
    let mut w = BufWriter::new(f);
    trace.write_csv(&mut w).with_context(|| format!("cannot write {}", out.display()))?;
    w.flush().with_context(|| format!("cannot write {}", out.display()))?;
    Ok((trace.registry().len(), trace.len()))
}

/// Aggregates of a metrics file; the format follows the extension unless given.
pub fn analyze_file(path: &Path, format: Option<ReportFormat>) -> Result<Aggregates, CliError> {
    use anyhow::Context;
    let format = format.unwrap_or(if path.extension().is_some_and(|e| e == "json") {
        ReportFormat::Json
    } else {
        ReportFormat::Csv
    });
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let rows = match format {
        ReportFormat::Csv => parse_csv_rows(BufReader::new(f)),
        ReportFormat::Json => deserialize_json(BufReader::new(f)).and_then(|s| {
            if s.reports.is_empty() {
                Err(MetricsError::Empty)
            } else {
                Ok(s.rows())
            }
        }),
    }
    .with_context(|| format!("cannot analyze {}", path.display()))?;
    Ok(Aggregates::from_rows(&rows))
}

pub fn write_aggregates<W: Write>(agg: &Aggregates, mut w: W) -> io::Result<()> {
    writeln!(w, "{:<28}{:>14}", "metric", "value")?;
    writeln!(w, "{:<28}{:>14}", "epochs", agg.epochs)?;
    writeln!(w, "{:<28}{:>13.2}%", "cross-shard ratio", agg.mean_cross_ratio * 100.0)?;
    writeln!(w, "{:<28}{:>14.4}", "workload deviation", agg.mean_workload_deviation)?;
    writeln!(w, "{:<28}{:>14.4}", "normalized throughput", agg.mean_normalized_throughput)?;
    writeln!(w, "{:<28}{:>14}", "committed migrations", agg.total_committed_mr)
}

/// Applies `SHARDSIM_THREADS` to the global rayon pool.
pub fn configure_threads(value: Option<&str>) -> Result<(), CliError> {
    let Some(v) = value else { return Ok(()) };
    let n: usize = parse_field(THREADS_ENV, v.trim())?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Runtime(e.into()))?;
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads(std::env::var(THREADS_ENV).ok().as_deref())?;
    let stdout = io::stdout();
    match cli.command {
        Command::Simulate(args) => {
            let cfg = parse_config(&args)?;
            let out = cmd_simulate(&cfg)?;
            let mut w = stdout.lock();
            writeln!(w, "metrics: {}", out.metrics.display()).map_err(anyhow::Error::from)?;
            if let Some(m) = &out.manifest {
                writeln!(w, "manifest: {}", m.display()).map_err(anyhow::Error::from)?;
            }
            write_aggregates(&out.aggregates, w).map_err(anyhow::Error::from)?;
        }
        Command::GenTrace(args) => {
            let spec: GenSpec = parse_field("gen", &args.gen)?;
            let (accounts, txs) = cmd_gen_trace(&spec, &args.out)?;
            println!("wrote {}: {accounts} accounts, {txs} transactions", args.out.display());
        }
        Command::Analyze(args) => {
            let format = args.format.as_deref().map(|f| parse_field("format", f)).transpose()?;
            let agg = analyze_file(&args.file, format)?;
            write_aggregates(&agg, stdout.lock()).map_err(anyhow::Error::from)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(argv: &[&str]) -> SimulateArgs {
        let mut full = vec!["shardsim", "simulate"];
        full.extend_from_slice(argv);
        match Cli::try_parse_from(full).unwrap().command {
            Command::Simulate(a) => a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn no_flags_gives_defaults() {
        let cfg = resolve_config(&FileConfig::default(), &args(&[])).unwrap();
        assert_eq!(cfg.params.k, 16);
        assert_eq!(cfg.params.eta, 2.0);
        assert_eq!(cfg.params.tau, 300);
        assert_eq!(cfg.params.beta, 0.0);
        assert_eq!(cfg.params.seed, 0);
        assert_eq!(cfg.allocator, AllocatorKind::PilotDriven);
        assert_eq!(cfg.init_allocator, AllocatorKind::HashRandom);
        assert_eq!(cfg.history_window, None);
        assert_eq!(cfg.lambda, None);
    }

    #[test]
    fn low_eta_names_the_field() {
        let err = resolve_config(&FileConfig::default(), &args(&["--eta", "0.5"])).unwrap_err();
        assert!(matches!(&err, CliError::Usage { field, .. } if field == "eta"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn beta_out_of_range_names_the_field() {
        let err = resolve_config(&FileConfig::default(), &args(&["--beta", "1.5"])).unwrap_err();
        assert!(matches!(&err, CliError::Usage { field, .. } if field == "beta"));
    }

    #[test]
    fn flags_override_file() {
        let file: FileConfig = toml::from_str("k = 4\nbeta = 0.25\nallocator = \"hash\"").unwrap();
        let cfg = resolve_config(&file, &args(&["--k", "32"])).unwrap();
        assert_eq!(cfg.params.k, 32);
        assert_eq!(cfg.params.beta, 0.25);
        assert_eq!(cfg.allocator, AllocatorKind::HashRandom);
    }

    #[test]
    fn unknown_file_key_is_rejected() {
        assert!(toml::from_str::<FileConfig>("kk = 4").is_err());
    }

    #[test]
    fn zero_epochs_is_a_usage_error() {
        let err = resolve_config(&FileConfig::default(), &args(&["--epochs", "0"])).unwrap_err();
        assert!(matches!(&err, CliError::Usage { field, .. } if field == "epochs"));
    }

    #[test]
    fn trace_and_gen_are_exclusive() {
        let err = resolve_config(&FileConfig::default(), &args(&["--trace", "t.csv", "--gen", "uniform"])).unwrap_err();
        assert!(matches!(&err, CliError::Usage { field, .. } if field == "trace"));
    }

    #[test]
    fn gen_spec_round_trips_through_display() {
        for s in [
            "uniform:accounts=100,txs=10,blocks=10,seed=1",
            "clustered:communities=4,size=8,p_intra=1,churn=0,txs=5,blocks=20,seed=3",
        ] {
            let spec: GenSpec = s.parse().unwrap();
            assert_eq!(spec.to_string().parse::<GenSpec>().unwrap(), spec);
        }
    }

    #[test]
    fn gen_spec_errors_name_the_key() {
        assert_eq!("uniform:acounts=3".parse::<GenSpec>().unwrap_err().key, "acounts");
        assert_eq!("uniform:blocks=x".parse::<GenSpec>().unwrap_err().key, "blocks");
        assert_eq!("zipf".parse::<GenSpec>().unwrap_err().key, "zipf");
    }

    #[test]
    fn thread_setting_must_be_numeric() {
        assert!(configure_threads(None).is_ok());
        assert!(configure_threads(Some("0")).is_ok());
        assert_eq!(configure_threads(Some("many")).unwrap_err().exit_code(), 2);
    }
}
