//! Batch front end for derand-lab: subcommand parsing, run configuration,
//! dispatch to the library and CSV/JSON emission.

mod commands;
mod table;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use derand_lab::bits::BitString;
use derand_lab::rng::StreamKey;

pub use table::{format_f64, Format, ResultTable, Value};

pub const DEFAULT_SEED_HEX: &str = "5eed";
/// Bits of each per-replication seed.
pub const REPLICATION_SEED_BITS: usize = 128;

#[derive(Debug, Error, PartialEq)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("timeout: {0}")]
    Timeout(String),
    #[error("{0}")]
    Module(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NotFound(_) | CliError::Timeout(_) => 1,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Parser, Debug, Clone)]
#[command(name = "derand-lab", version, about = "Probabilistic-method constructions and seed-search experiments")]
pub struct Cli {
    /// Root seed in hex; every random choice derives from it.
    #[arg(long, global = true, default_value = DEFAULT_SEED_HEX)]
    pub seed: String,
    /// Draw a fresh 128-bit root seed from the OS instead. It is echoed in
    /// the output header.
    #[arg(long, global = true)]
    pub entropy: bool,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Defaults to json for `el search`, csv otherwise.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Independent repetitions with seeds derived from the root seed.
    #[arg(long, global = true, default_value_t = 1)]
    pub replications: u32,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    #[command(subcommand)]
    Channel(ChannelCmd),
    #[command(subcommand)]
    Code(CodeCmd),
    #[command(subcommand)]
    Lll(LllCmd),
    #[command(subcommand)]
    Problem(ProblemCmd),
    #[command(subcommand)]
    El(ElCmd),
    #[command(subcommand)]
    Hitting(HittingCmd),
}

/// A channel is a JSON file `{"inputs", "outputs", "rows"}` or `bsc:<p>`.
#[derive(Args, Debug, Clone, Serialize)]
pub struct ChannelArgs {
    #[arg(long)]
    pub channel: String,
    /// `uniform` or comma-separated input probabilities.
    #[arg(long, default_value = "uniform")]
    pub q: String,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelCmd {
    /// Entropies and the rate C_Q = I(X:Y) for one input law.
    Info {
        channel: String,
        #[arg(long, default_value = "uniform")]
        q: String,
    },
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodeCmd {
    /// Writes the codebook expanded from the root seed as JSON.
    Gen {
        #[command(flatten)]
        chan: ChannelArgs,
        #[arg(long)]
        rate: f64,
        #[arg(long)]
        n: usize,
    },
    /// Decodes one received block; message 0 means a decoding error.
    Decode {
        #[command(flatten)]
        chan: ChannelArgs,
        #[arg(long)]
        codebook: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        /// Comma-separated output symbols.
        #[arg(long)]
        y: String,
    },
    /// Monte Carlo block error of a seed-generated or stored codebook.
    Error {
        #[command(flatten)]
        chan: ChannelArgs,
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        codebook: Option<PathBuf>,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        /// Trials per codeword.
        #[arg(long, default_value_t = 1000)]
        trials: u64,
    },
    /// Typical-set fractions for channel pairs and independent pairs.
    Aep {
        #[command(flatten)]
        chan: ChannelArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
    },
    /// Error against rate, block length and seed length.
    Tradeoff {
        #[command(flatten)]
        chan: ChannelArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        rates: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        ns: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "128")]
        seed_lengths: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
    },
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LllCmd {
    /// Symmetric condition e p (d + 1) <= 1 and its lower bound.
    Check {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        d: f64,
        #[arg(long)]
        n: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Cycles,
    Balance,
    Ksat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionArg {
    Lowest,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyArg {
    Exhaustive,
    Random,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemCmd {
    /// Writes a random instance: graph text, 0/1 matrix or DIMACS.
    Gen {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
    },
    /// Checks a hex-encoded proof against an instance.
    Verify {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        proof: String,
    },
    /// Resampling solver for cycles or ksat; prints the proof in hex.
    Solve {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long)]
        instance: PathBuf,
        /// Defaults to 100 per bad event.
        #[arg(long)]
        max_resamples: Option<u64>,
        #[arg(long, value_enum, default_value = "lowest")]
        selection: SelectionArg,
    },
    /// How often a uniformly random proof candidate succeeds.
    Rate {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
    },
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElCmd {
    /// Shortest seed whose expansion is an accepted proof.
    Search {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 24)]
        max_seed_bits: usize,
        #[arg(long, value_enum, default_value = "exhaustive")]
        strategy: StrategyArg,
        /// Seeds to try; unlimited for exhaustive search by default.
        #[arg(long)]
        budget: Option<u64>,
        /// Samples behind the acceptance estimate in `delta_log_bits`.
        #[arg(long, default_value_t = 10_000)]
        acceptance_trials: u64,
    },
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HittingCmd {
    /// Draws a hitting set from the root seed, redrawing up to the limit.
    Build {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = derand_lab::hitting::DEFAULT_MAX_RETRIES)]
        max_retries: u32,
    },
    /// Miss measure of given members, or of fresh draws.
    Measure {
        #[arg(long)]
        instance: PathBuf,
        /// Comma-separated universe elements.
        #[arg(long)]
        members: Option<String>,
        #[arg(long, default_value_t = 1)]
        draws: u64,
    },
}

impl Command {
    fn input_paths(&self) -> Vec<String> {
        let mut paths = Vec::new();
        let mut chan = |c: &str| {
            if !c.starts_with("bsc:") {
                paths.push(c.to_string());
            }
        };
        match self {
            Command::Channel(ChannelCmd::Info { channel, .. }) => chan(channel),
            Command::Code(c) => match c {
                CodeCmd::Gen { chan: a, .. } | CodeCmd::Aep { chan: a, .. } | CodeCmd::Tradeoff { chan: a, .. } => {
                    chan(&a.channel)
                }
                CodeCmd::Decode { chan: a, codebook, .. } => {
                    chan(&a.channel);
                    paths.push(codebook.display().to_string());
                }
                CodeCmd::Error { chan: a, codebook, .. } => {
                    chan(&a.channel);
                    paths.extend(codebook.iter().map(|p| p.display().to_string()));
                }
            },
            Command::Lll(_) | Command::Problem(ProblemCmd::Gen { .. }) => {}
            Command::Problem(
                ProblemCmd::Verify { instance, .. } | ProblemCmd::Solve { instance, .. } | ProblemCmd::Rate { instance, .. },
            )
            | Command::El(ElCmd::Search { instance, .. })
            | Command::Hitting(HittingCmd::Build { instance, .. } | HittingCmd::Measure { instance, .. }) => {
                paths.push(instance.display().to_string())
            }
        }
        paths
    }

    /// Commands whose product is a file rather than a table.
    pub fn writes_artifact(&self) -> bool {
        matches!(
            self,
            Command::Code(CodeCmd::Gen { .. }) | Command::Problem(ProblemCmd::Gen { .. })
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything that determines a run's values. Output path, format and
/// thread count are not part of it.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub seed_hex: String,
    pub seed_bits: usize,
    pub replications: u32,
    pub inputs: Vec<InputDigest>,
}

impl ExperimentConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self, CliError> {
        let (seed_hex, seed_bits) = if cli.entropy {
            let mut buf = [0u8; 16];
            getrandom::fill(&mut buf).map_err(|e| CliError::Io(format!("OS entropy: {e}")))?;
            (hex::encode(buf), 128)
        } else {
            let bits = parse_seed(&cli.seed)?;
            (cli.seed.trim().trim_start_matches("0x").to_lowercase(), bits.len())
        };
        let inputs = cli
            .command
            .input_paths()
            .into_iter()
            .map(|path| {
                let bytes = std::fs::read(&path).map_err(|e| CliError::Config(format!("cannot read {path}: {e}")))?;
                Ok(InputDigest {
                    sha256: hex::encode(Sha256::digest(&bytes)),
                    path,
                })
            })
            .collect::<Result<_, CliError>>()?;
        Ok(Self {
            command: cli.command.clone(),
            seed_hex,
            seed_bits,
            replications: cli.replications,
            inputs,
        })
    }

    pub fn seed(&self) -> BitString {
        BitString::from_hex(&self.seed_hex, Some(self.seed_bits)).expect("validated when built")
    }

    pub fn root_key(&self) -> StreamKey {
        StreamKey::from_bits(&self.seed())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of SHA-256 over the JSON echo.
    pub fn hash(&self) -> String {
        hex::encode(&Sha256::digest(self.to_json().as_bytes())[..8])
    }

    /// Same config with the seed of replication `index`.
    pub fn replication(&self, index: u64) -> Self {
        let key = self.root_key().derive("replication").child(index);
        let bytes = &key.as_bytes()[..REPLICATION_SEED_BITS / 8];
        Self {
            seed_hex: hex::encode(bytes),
            seed_bits: REPLICATION_SEED_BITS,
            replications: 1,
            ..self.clone()
        }
    }
}

pub fn parse_seed(hex_str: &str) -> Result<BitString, CliError> {
    let s = hex_str.trim().trim_start_matches("0x");
    if s.is_empty() {
        return Ok(BitString::new());
    }
    if !s.chars().all(|c| c.is_ascii_hexdigit()) {
        return Err(CliError::Config(format!("seed `{hex_str}` is not hex")));
    }
    BitString::from_hex(s, None).map_err(|e| CliError::Config(format!("seed: {e}")))
}

pub enum Outcome {
    Table(ResultTable),
    /// File contents, such as a codebook or an instance.
    Artifact(String),
}

pub fn run(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let start = std::time::Instant::now();
    let mut out = commands::dispatch(config)?;
    if let Outcome::Table(t) = &mut out {
        t.config_hash = config.hash();
        t.wall_time_secs = start.elapsed().as_secs_f64();
    }
    Ok(out)
}

pub fn run_table(config: &ExperimentConfig) -> Result<ResultTable, CliError> {
    match run(config)? {
        Outcome::Table(t) => Ok(t),
        Outcome::Artifact(_) => Err(CliError::Config("command writes a file, not a table".into())),
    }
}

pub struct Replicated {
    pub tables: Vec<ResultTable>,
    /// Mean and standard deviation of each numeric cell across replications.
    pub summary: ResultTable,
    /// For tables with `n` and `error` columns: in how many replications
    /// error strictly falls as `n` grows, per remaining key.
    pub trend: Option<ResultTable>,
}

/// Runs `r` replications, concurrently; results keep replication order.
pub fn replicate(config: &ExperimentConfig, r: u32) -> Result<Replicated, CliError> {
    if r == 0 {
        return Err(CliError::Config("replication count must be at least 1".into()));
    }
    if config.command.writes_artifact() {
        return Err(CliError::Config("replications apply to table-producing commands".into()));
    }
    let tables = (0..r as u64)
        .into_par_iter()
        .map(|i| run_table(&config.replication(i)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut summary = summarize(&tables)?;
    summary.config_hash = config.hash();
    let trend = trend(&tables).map(|mut t| {
        t.config_hash = config.hash();
        t
    });
    Ok(Replicated { tables, summary, trend })
}

fn summarize(tables: &[ResultTable]) -> Result<ResultTable, CliError> {
    let first = &tables[0];
    if tables.iter().any(|t| t.rows.len() != first.rows.len() || t.columns != first.columns) {
        return Err(CliError::Module("replications produced differently shaped tables".into()));
    }
    let r = tables.len() as f64;
    // Per column: copy it if constant, else mean and sd if numeric, else drop.
    enum Kind {
        Constant,
        Numeric,
        Skip,
    }
    let kinds: Vec<Kind> = (0..first.columns.len())
        .map(|c| {
            let cells = || tables.iter().flat_map(|t| t.rows.iter().map(move |row| &row[c]));
            if (0..first.rows.len()).all(|i| tables.iter().all(|t| t.rows[i][c] == first.rows[i][c])) {
                Kind::Constant
            } else if cells().all(|v| v.as_f64().is_some()) {
                Kind::Numeric
            } else {
                Kind::Skip
            }
        })
        .collect();
    let mut columns = vec!["replications".to_string()];
    for (name, kind) in first.columns.iter().zip(&kinds) {
        match kind {
            Kind::Constant => columns.push(name.clone()),
            Kind::Numeric => {
                columns.push(format!("{name}_mean"));
                columns.push(format!("{name}_sd"));
            }
            Kind::Skip => {}
        }
    }
    let mut out = ResultTable::new(&format!("{} summary", first.title), &[]);
    out.columns = columns;
    for i in 0..first.rows.len() {
        let mut row = vec![Value::from(tables.len())];
        for (c, kind) in kinds.iter().enumerate() {
            match kind {
                Kind::Constant => row.push(first.rows[i][c].clone()),
                Kind::Numeric => {
                    let xs: Vec<f64> = tables.iter().map(|t| t.rows[i][c].as_f64().expect("numeric")).collect();
                    let mean = xs.iter().sum::<f64>() / r;
                    let sd = if xs.len() > 1 {
                        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt()
                    } else {
                        0.0
                    };
                    row.push(mean.into());
                    row.push(sd.into());
                }
                Kind::Skip => {}
            }
        }
        out.rows.push(row);
    }
    Ok(out)
}

fn trend(tables: &[ResultTable]) -> Option<ResultTable> {
    let first = &tables[0];
    let n_col = first.column("n")?;
    let e_col = first.column("error")?;
    let key_cols: Vec<usize> = ["rate", "seed_length"].iter().filter_map(|c| first.column(c)).collect();
    let key_of = |row: &[Value]| key_cols.iter().map(|&c| row[c].to_string()).collect::<Vec<_>>();
    let mut keys: Vec<Vec<String>> = Vec::new();
    for row in &first.rows {
        let k = key_of(row);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let mut names: Vec<&str> = key_cols.iter().map(|&c| first.columns[c].as_str()).collect();
    names.extend(["decreasing_replications", "replications"]);
    let mut out = ResultTable::new(&format!("{} trend", first.title), &names);
    for k in keys {
        let decreasing = tables
            .iter()
            .filter(|t| {
                let mut pts: Vec<(f64, f64)> = t
                    .rows
                    .iter()
                    .filter(|row| key_of(row) == k)
                    .map(|row| (row[n_col].as_f64().unwrap_or(0.0), row[e_col].as_f64().unwrap_or(0.0)))
                    .collect();
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                pts.windows(2).all(|w| w[1].1 < w[0].1)
            })
            .count();
        let mut row: Vec<Value> = k.into_iter().map(Value::Text).collect();
        row.push(decreasing.into());
        row.push(tables.len().into());
        out.push(row);
    }
    Some(out)
}

fn csv_header(config: &ExperimentConfig, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "# derand-lab {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(out, "# config_hash: {}", config.hash())?;
    writeln!(out, "# config: {}", config.to_json())
}

fn json_doc(config: &ExperimentConfig, body: serde_json::Value) -> serde_json::Value {
    serde_json::json!({
        "tool": "derand-lab",
        "version": env!("CARGO_PKG_VERSION"),
        "config_hash": config.hash(),
        "config": config,
        "result": body,
    })
}

pub fn write_table(
    config: &ExperimentConfig,
    table: &ResultTable,
    format: Format,
    out: &mut dyn Write,
) -> std::io::Result<()> {
    match format {
        Format::Csv => {
            csv_header(config, out)?;
            table.write_csv_body(out)
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, &json_doc(config, table.to_json_value()))?;
            writeln!(out)
        }
    }
}

pub fn write_replicated(
    config: &ExperimentConfig,
    rep: &Replicated,
    format: Format,
    out: &mut dyn Write,
) -> std::io::Result<()> {
    match format {
        Format::Csv => {
            csv_header(config, out)?;
            for (i, t) in rep.tables.iter().enumerate() {
                writeln!(out, "# replication {i} seed {}", config.replication(i as u64).seed_hex)?;
                t.write_csv_body(out)?;
            }
            writeln!(out, "# summary")?;
            rep.summary.write_csv_body(out)?;
            if let Some(t) = &rep.trend {
                writeln!(out, "# trend")?;
                t.write_csv_body(out)?;
            }
            Ok(())
        }
        Format::Json => {
            let body = serde_json::json!({
                "replications": rep.tables.iter().map(ResultTable::to_json_value).collect::<Vec<_>>(),
                "summary": rep.summary.to_json_value(),
                "trend": rep.trend.as_ref().map(ResultTable::to_json_value),
            });
            serde_json::to_writer_pretty(&mut *out, &json_doc(config, body))?;
            writeln!(out)
        }
    }
}

/// Parses, runs and writes; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("derand-lab: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        // Fails only if a pool already exists, as in repeated in-process calls.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    let config = ExperimentConfig::from_cli(cli)?;
    let format = cli.format.unwrap_or(match cli.command {
        Command::El(_) => Format::Json,
        _ => Format::Csv,
    });
    let mut buf = Vec::new();
    let start = std::time::Instant::now();
    if cli.replications == 1 {
        match run(&config)? {
            Outcome::Table(t) => write_table(&config, &t, format, &mut buf)?,
            Outcome::Artifact(text) => buf.extend_from_slice(text.as_bytes()),
        }
    } else {
        let rep = replicate(&config, cli.replications)?;
        write_replicated(&config, &rep, format, &mut buf)?;
    }
    eprintln!("derand-lab: wall time {:.3} s", start.elapsed().as_secs_f64());
    match &cli.out {
        Some(path) => std::fs::write(path, &buf)?,
        None => std::io::stdout().write_all(&buf)?,
    }
    Ok(())
}
