//! Command-line front end. Every command is deterministic given its inputs
//! and seed; exit codes are 0 on success, 1 when `check-condition` finds the
//! condition violated, and 2 on usage, config or input errors.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::channel::less_noisy_condition;
use crate::codec::{apply_write, decode, encode, CodecError, FreezeBits};
use crate::config::{ConfigError, ExperimentConfig};
use crate::construction::{
    build_partition, containment_report, estimate_profile, exact_profile, ConstructionError, IndexPartition,
};
use crate::harness::{run_experiment, ExperimentReport, TrialSetup};
use crate::polar::{bits_to_string, parse_bits, BitBlock, PolarError};
use crate::rng;

const ENCODE_STREAM_DOMAIN: u32 = 4;
const TRANSMIT_STREAM_DOMAIN: u32 = 5;

#[derive(Debug, Parser)]
#[command(name = "wom-polar", version, about = "Joint WOM and error-control polar coding")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the seed the command would take from the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate both entropy profiles and build the index partition.
    Construct,
    /// Evaluate the less-noisy condition I(X;Y) >= I(X;S).
    CheckCondition,
    /// Run the end-to-end experiment (and any sweeps) against a partition.
    Simulate {
        #[arg(long)]
        partition: PathBuf,
    },
    /// Encode a message against a cell state.
    Encode {
        #[arg(long)]
        partition: PathBuf,
        /// Cell state as an ASCII 0/1 string.
        #[arg(long)]
        state: PathBuf,
        /// Message as an ASCII 0/1 string of length |F \ G|.
        #[arg(long)]
        message: PathBuf,
        /// Freeze bits as an ASCII 0/1 string; defaults to the config policy.
        #[arg(long)]
        freeze: Option<PathBuf>,
    },
    /// Decode a read-back into the message bits.
    Decode {
        #[arg(long)]
        partition: PathBuf,
        /// Space-separated symbol indices, or an ASCII 0/1 string for binary outputs.
        #[arg(long)]
        observation: PathBuf,
        #[arg(long)]
        freeze: Option<PathBuf>,
    },
    /// Program a codeword over cells: a cell at 0 stays 0.
    ApplyWrite {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        codeword: PathBuf,
    },
    /// Pass stored bits through the configured read channel.
    Transmit {
        #[arg(long)]
        codeword: PathBuf,
    },
    /// Exact entropy profiles by enumeration (N <= 8).
    ExactOracle,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: ConfigError },
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("missing required flag --{0}")]
    MissingFlag(&'static str),
    #[error("partition has N = {partition}, config has N = {config}")]
    LengthMismatch { partition: usize, config: usize },
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("{0}")]
    Csv(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| CliError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T, config: Option<&ExperimentConfig>) -> Result<(), CliError> {
    let mut value = serde_json::to_value(value).expect("artifact serializes");
    if let (Some(config), Some(map)) = (config, value.as_object_mut()) {
        map.insert("config".into(), config.to_value());
    }
    let mut text = serde_json::to_string(&value).expect("artifact serializes");
    text.push('\n');
    write_text(path, &text)
}

fn input_error(path: &Path, message: impl ToString) -> CliError {
    CliError::Input {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

fn load_config(global: &GlobalArgs) -> Result<ExperimentConfig, CliError> {
    let path = global.config.as_deref().ok_or(CliError::MissingFlag("config"))?;
    ExperimentConfig::parse(&read_text(path)?).map_err(|source| CliError::Config {
        path: path.to_path_buf(),
        source,
    })
}

fn load_partition(path: &Path, config: &ExperimentConfig) -> Result<IndexPartition, CliError> {
    let partition: IndexPartition =
        serde_json::from_str(&read_text(path)?).map_err(|e| input_error(path, e))?;
    if partition.n() != config.n {
        return Err(CliError::LengthMismatch {
            partition: partition.n(),
            config: config.n,
        });
    }
    Ok(partition)
}

fn load_bits(path: &Path) -> Result<Vec<u8>, CliError> {
    parse_bits(&read_text(path)?).map_err(|e| input_error(path, e))
}

fn load_block(path: &Path) -> Result<BitBlock, CliError> {
    BitBlock::new(load_bits(path)?).map_err(|e| input_error(path, e))
}

fn load_freeze(
    path: Option<&Path>,
    config: &ExperimentConfig,
    partition: &IndexPartition,
) -> Result<FreezeBits, CliError> {
    match path {
        Some(path) => FreezeBits::new(load_bits(path)?).map_err(|e| input_error(path, e)),
        None => Ok(config.codec.freeze.bits(partition.freeze_len())),
    }
}

/// Reads channel outputs: whitespace-separated symbol indices, or a single
/// 0/1 string of length `n`.
fn load_symbols(path: &Path, n: usize) -> Result<Vec<usize>, CliError> {
    let text = read_text(path)?;
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.len() == 1 && n > 1 && tokens[0].len() == n {
        let bits = parse_bits(tokens[0]).map_err(|e| input_error(path, e))?;
        return Ok(bits.into_iter().map(usize::from).collect());
    }
    tokens
        .iter()
        .map(|t| t.parse::<usize>().map_err(|e| input_error(path, format!("symbol `{t}`: {e}"))))
        .collect()
}

fn out_path(global: &GlobalArgs) -> Result<&Path, CliError> {
    global.out.as_deref().ok_or(CliError::MissingFlag("out"))
}

fn symbols_to_string(y: &[usize]) -> String {
    y.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

/// Runs a parsed command, writing human-readable output to `stdout`.
/// Returns the process exit code.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let g = &cli.global;
    let mut say = |line: String| {
        let _ = writeln!(stdout, "{line}");
    };
    match &cli.command {
        Command::Construct => {
            let config = load_config(g)?;
            let out = out_path(g)?;
            let c = &config.construction;
            let seed = g.seed.unwrap_or(c.seed);
            let model = config.model();
            let channel = config.read_channel();
            let state = estimate_profile(&model, None, config.n, c.samples, seed)?;
            let observation = estimate_profile(&model, Some(&channel), config.n, c.samples, seed)?;
            let partition = build_partition(&state, &observation, c.threshold_high, c.threshold_low)?;
            let report = containment_report(&partition);

            let mut echo = config.clone();
            echo.construction.seed = seed;
            write_json(&out.join("profile_state.json"), &state, Some(&echo))?;
            write_json(&out.join("profile_observation.json"), &observation, Some(&echo))?;
            write_json(&out.join("partition.json"), &partition, Some(&echo))?;

            say(format!("N = {}", config.n));
            say(format!("|F| = {}", partition.f().len()));
            say(format!("|G| = {}", partition.g().len()));
            say(format!("message bits = {}", partition.message_len()));
            say(format!("design rate = {:.4}", report.design_rate));
            say(format!(
                "containment G ⊆ F: {} ({} violations)",
                if report.holds { "holds" } else { "fails" },
                report.violations.len()
            ));
            Ok(0)
        }
        Command::CheckCondition => {
            let config = load_config(g)?;
            let c = less_noisy_condition(&config.model(), &config.read_channel());
            say(format!("I(X;S) = {:.4}", c.i_xs));
            say(format!("I(X;Y) = {:.4}", c.i_xy));
            say(format!("margin = {:+.4}", c.margin));
            say(format!("verdict: {}", if c.holds { "holds" } else { "fails" }));
            Ok(if c.holds { 0 } else { 1 })
        }
        Command::Simulate { partition } => {
            let config = load_config(g)?;
            let out = out_path(g)?;
            let partition = load_partition(partition, &config)?;
            let mut reports = Vec::new();
            for mut point in config.points() {
                if let Some(seed) = g.seed {
                    point.harness.seed = seed;
                }
                let model = point.model();
                let channel = point.read_channel();
                let freeze = point.codec.freeze.bits(partition.freeze_len());
                let setup = TrialSetup {
                    model: &model,
                    channel: &channel,
                    partition: &partition,
                    freeze: &freeze,
                };
                let report = run_experiment(&setup, point.harness.trials, point.harness.seed, point.to_value())?;
                say(format!(
                    "{} beta={} gamma={}: FER {:.4} [{:.4}, {:.4}] BER {:.5} write fraction {:.4}",
                    point.channel,
                    point.beta,
                    point.gamma,
                    report.frame_error_rate.rate,
                    report.frame_error_rate.ci_low,
                    report.frame_error_rate.ci_high,
                    report.bit_error_rate,
                    report.mean_write_fraction
                ));
                reports.push((point, report));
            }
            let json: Vec<&ExperimentReport> = reports.iter().map(|(_, r)| r).collect();
            let mut text = serde_json::to_string_pretty(&json).expect("reports serialize");
            text.push('\n');
            write_text(&out.join("report.json"), &text)?;
            write_text(&out.join("report.csv"), &reports_csv(&reports)?)?;
            Ok(0)
        }
        Command::Encode {
            partition,
            state,
            message,
            freeze,
        } => {
            let config = load_config(g)?;
            let out = out_path(g)?;
            let partition = load_partition(partition, &config)?;
            let s = load_block(state)?;
            let message = load_bits(message)?;
            let freeze = load_freeze(freeze.as_deref(), &config, &partition)?;
            let seed = g.seed.unwrap_or(config.harness.seed);
            let mut rng = rng::stream(seed, rng::stream_id(ENCODE_STREAM_DOMAIN, 0));
            let r = encode(&s, &partition, &message, &freeze, &config.model(), &mut rng)?;
            write_text(out, &r.codeword.to_string())?;
            say(format!("wom violations = {}", r.wom_violations));
            Ok(0)
        }
        Command::Decode {
            partition,
            observation,
            freeze,
        } => {
            let config = load_config(g)?;
            let out = out_path(g)?;
            let partition = load_partition(partition, &config)?;
            let y = load_symbols(observation, partition.n())?;
            let freeze = load_freeze(freeze.as_deref(), &config, &partition)?;
            let message = decode(&y, &partition, &freeze, &config.model(), &config.read_channel())?;
            write_text(out, &bits_to_string(&message))?;
            say(format!("decoded {} message bits", message.len()));
            Ok(0)
        }
        Command::ApplyWrite { state, codeword } => {
            let out = out_path(g)?;
            let s = load_block(state)?;
            let x = load_block(codeword)?;
            let stored = apply_write(&s, &x)?;
            write_text(out, &stored.to_string())?;
            say(format!("violations = {}", crate::codec::count_wom_violations(&s, &x)));
            Ok(0)
        }
        Command::Transmit { codeword } => {
            let config = load_config(g)?;
            let out = out_path(g)?;
            let x = load_block(codeword)?;
            let seed = g.seed.unwrap_or(config.harness.seed);
            let mut rng = rng::stream(seed, rng::stream_id(TRANSMIT_STREAM_DOMAIN, 0));
            let y = config.read_channel().transmit(&x, &mut rng);
            write_text(out, &symbols_to_string(&y))?;
            Ok(0)
        }
        Command::ExactOracle => {
            let config = load_config(g)?;
            let out = out_path(g)?;
            let model = config.model();
            let state = exact_profile(&model, None, config.n)?;
            let observation = exact_profile(&model, Some(&config.read_channel()), config.n)?;
            write_json(&out.join("exact_state.json"), &state, Some(&config))?;
            write_json(&out.join("exact_observation.json"), &observation, Some(&config))?;
            for (i, (s, o)) in state.values.iter().zip(&observation.values).enumerate() {
                say(format!("{:>3}  state {:.10}  observation {:.10}", i + 1, s, o));
            }
            Ok(0)
        }
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    beta: f64,
    gamma: f64,
    channel: String,
    #[serde(rename = "N")]
    n: usize,
    trials: usize,
    seed: u64,
    design_rate: f64,
    message_len: usize,
    frame_errors: usize,
    fer: f64,
    fer_ci_low: f64,
    fer_ci_high: f64,
    ci_method: &'a str,
    ber: f64,
    mean_write_fraction: f64,
    violation_frame_rate: f64,
    violation_cell_rate: f64,
    containment_holds: bool,
    less_noisy_margin: f64,
}

/// One row per config point.
fn reports_csv(reports: &[(ExperimentConfig, ExperimentReport)]) -> Result<String, CliError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for (point, r) in reports {
        let fer = &r.frame_error_rate;
        writer
            .serialize(CsvRow {
                beta: point.beta,
                gamma: point.gamma,
                channel: point.channel.to_string(),
                n: r.n,
                trials: r.trials,
                seed: r.seed,
                design_rate: r.design_rate,
                message_len: r.message_len,
                frame_errors: fer.successes,
                fer: fer.rate,
                fer_ci_low: fer.ci_low,
                fer_ci_high: fer.ci_high,
                ci_method: match fer.ci_method {
                    crate::harness::CiMethod::Normal => "normal",
                    crate::harness::CiMethod::Wilson => "wilson",
                },
                ber: r.bit_error_rate,
                mean_write_fraction: r.mean_write_fraction,
                violation_frame_rate: r.violation_frame_rate,
                violation_cell_rate: r.violation_cell_rate,
                containment_holds: r.containment_holds,
                less_noisy_margin: r.less_noisy_margin,
            })
            .map_err(|e| CliError::Csv(e.to_string()))?;
    }
    let bytes = writer.into_inner().map_err(|e| CliError::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

impl From<PolarError> for CliError {
    fn from(e: PolarError) -> Self {
        CliError::Codec(CodecError::Polar(e))
    }
}
