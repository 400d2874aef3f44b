//! Command implementations behind the `bitflip` binary.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use bitflip_qec::config;
use bitflip_qec::decoder::{parse_stream_line, pauli_frame_update, DecoderWeights, LookupTable};
use bitflip_qec::device::Device;
use bitflip_qec::latency::{write_timeline_csv, LatencyModel};
use bitflip_qec::protocol::{
    parity_distribution, Experiment, ExperimentConfig, ExperimentResult, ProtocolKind,
};
use bitflip_qec::qubit::DataBits;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] bitflip_qec::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) | Self::Model(_) => 2,
            Self::Io { .. } => 3,
        }
    }
}

fn io_error(path: impl AsRef<Path>) -> impl FnOnce(io::Error) -> CliError {
    let path = path.as_ref().display().to_string();
    move |source| CliError::Io { path, source }
}

#[derive(Debug, Parser)]
#[command(
    name = "bitflip",
    version,
    about = "Bit-flip code simulator, decoder and latency model"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and print a results row.
    Run(RunArgs),
    /// Run every requested (protocol, N) pair.
    Sweep(SweepArgs),
    /// Dump the decoder lookup table.
    Table(TableArgs),
    /// Decode a recorded syndrome stream.
    Decode(DecodeArgs),
    /// Report latency budgets and optionally export a timeline.
    Latency(LatencyArgs),
    /// Joint parity distribution after one cycle for all eight inputs.
    Parity(ParityArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in device preset (`table-s1` or `noiseless`).
    #[arg(long, default_value = config::DEFAULT_PRESET)]
    pub preset: String,
    /// Override a configuration key, e.g. `device.qubits.D1.t1=30`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trajectories: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    pub show_config: bool,
    /// Output path; standard output when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    #[arg(long)]
    pub protocol: Option<String>,
    #[arg(long)]
    pub cycles: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    /// Comma-separated protocols, or `all`.
    #[arg(long, default_value = "all")]
    pub protocols: String,
    /// Cycle counts as a list (`1,3,5`) or range (`1..8`).
    #[arg(long, default_value = "1..8")]
    pub cycles: String,
}

#[derive(Debug, Args)]
pub struct WeightArgs {
    #[arg(long, default_value_t = 1.0)]
    pub w_data: f64,
    #[arg(long, default_value_t = 1.0)]
    pub w_meas: f64,
    /// Syndromes come from cycles with ancilla reset.
    #[arg(long)]
    pub reset: bool,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[arg(long)]
    pub cycles: usize,
    #[command(flatten)]
    pub weights: WeightArgs,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Stream file, one record per line; `-` reads standard input.
    pub input: PathBuf,
    #[command(flatten)]
    pub weights: WeightArgs,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LatencyArgs {
    /// Six pipeline stage durations in ns, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub steps: Option<Vec<u64>>,
    /// Export the event timeline of this protocol as CSV.
    #[arg(long)]
    pub timeline: Option<String>,
    #[arg(long, default_value_t = 2)]
    pub cycles: usize,
    /// Timeline CSV path; standard output when absent.
    #[arg(long)]
    pub timeline_output: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = config::DEFAULT_PRESET)]
    pub preset: String,
}

#[derive(Debug, Args)]
pub struct ParityArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Table(a) => cmd_table(a),
        Command::Decode(a) => cmd_decode(a),
        Command::Latency(a) => cmd_latency(a),
        Command::Parity(a) => cmd_parity(a),
    }
}

fn load_config(common: &ConfigArgs, extra: &[String]) -> Result<ExperimentConfig, CliError> {
    let text = match &common.config {
        Some(p) => Some(fs::read_to_string(p).map_err(io_error(p))?),
        None => None,
    };
    let mut overrides = common.overrides.clone();
    if let Some(s) = common.seed {
        overrides.push(format!("experiment.master_seed={s}"));
    }
    if let Some(k) = common.trajectories {
        overrides.push(format!("experiment.n_trajectories={k}"));
    }
    overrides.extend_from_slice(extra);
    Ok(config::load(&common.preset, text.as_deref(), &overrides)?)
}

/// Writes `bytes` to `path` through a sibling temporary file, or to standard
/// output when no path is given.
pub fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    let Some(path) = path else {
        let mut out = io::stdout().lock();
        return out
            .write_all(bytes)
            .and_then(|_| out.flush())
            .map_err(io_error("<stdout>"));
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_error(path))?;
    tmp.write_all(bytes).map_err(io_error(path))?;
    tmp.persist(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e.error,
    })?;
    Ok(())
}

fn run_one(exp: &Experiment, threads: Option<usize>) -> Result<ExperimentResult, CliError> {
    Ok(match threads {
        Some(t) => exp.run_with_threads(t)?,
        None => exp.run()?,
    })
}

fn results_csv(rows: &[ExperimentResult]) -> String {
    let mut s = format!("{}\n", ExperimentResult::CSV_HEADER);
    for r in rows {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

fn cmd_run(a: RunArgs) -> Result<(), CliError> {
    let mut extra = Vec::new();
    if let Some(p) = &a.protocol {
        extra.push(format!("experiment.protocol=\"{p}\""));
    }
    if let Some(n) = a.cycles {
        extra.push(format!("experiment.n_cycles={n}"));
    }
    let cfg = load_config(&a.common, &extra)?;
    if a.common.show_config {
        return write_output(
            a.common.output.as_deref(),
            config::to_annotated_toml(&cfg).as_bytes(),
        );
    }
    let r = run_one(&Experiment::new(cfg)?, a.common.threads)?;
    write_output(a.common.output.as_deref(), results_csv(&[r]).as_bytes())
}

/// Parses `all` or a comma-separated protocol list.
pub fn parse_protocols(s: &str) -> Result<Vec<ProtocolKind>, CliError> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(ProtocolKind::ALL.to_vec());
    }
    s.split(',')
        .map(|p| {
            p.trim().parse().map_err(|_| {
                CliError::Usage(format!("--protocols: unknown protocol `{}`", p.trim()))
            })
        })
        .collect()
}

/// Parses `a..b` (inclusive) or a comma-separated list of cycle counts.
pub fn parse_cycles(s: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Usage(format!("--cycles: cannot parse `{s}`"));
    let n = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    let v: Vec<usize> = match s.split_once("..") {
        Some((lo, hi)) => (n(lo)?..=n(hi.trim_start_matches('='))?).collect(),
        None => s.split(',').map(n).collect::<Result<_, _>>()?,
    };
    if v.is_empty() {
        return Err(bad());
    }
    Ok(v)
}

fn cmd_sweep(a: SweepArgs) -> Result<(), CliError> {
    let protocols = parse_protocols(&a.protocols)?;
    let cycles = parse_cycles(&a.cycles)?;
    let base = load_config(&a.common, &[])?;
    if a.common.show_config {
        return write_output(
            a.common.output.as_deref(),
            config::to_annotated_toml(&base).as_bytes(),
        );
    }
    let mut rows = Vec::new();
    for &p in &protocols {
        for &n in &cycles {
            let mut cfg = base.clone();
            cfg.protocol = p;
            cfg.n_cycles = n;
            rows.push(run_one(&Experiment::new(cfg)?, a.common.threads)?);
        }
    }
    write_output(a.common.output.as_deref(), results_csv(&rows).as_bytes())
}

fn weights(w: &WeightArgs) -> Result<DecoderWeights, CliError> {
    DecoderWeights::new(w.w_data, w.w_meas)
        .map_err(|e| CliError::Usage(format!("--w-data/--w-meas: {e}")))
}

fn cmd_table(a: TableArgs) -> Result<(), CliError> {
    let table = LookupTable::build(a.cycles, a.weights.reset, &weights(&a.weights)?)?;
    let mut out = Vec::new();
    table.dump(&mut out).map_err(io_error("<buffer>"))?;
    write_output(a.output.as_deref(), &out)
}

/// Decodes every non-blank line; returns the output text.
pub fn decode_stream<R: BufRead>(
    input: R,
    reset: bool,
    w: &DecoderWeights,
) -> Result<String, CliError> {
    let mut tables: HashMap<usize, LookupTable> = HashMap::new();
    let mut out = String::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(io_error("<input>"))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_stream_line(&line, reset)
            .map_err(|e| CliError::Usage(format!("line {}: {e}", i + 1)))?;
        let n = record.history.len();
        let table = match tables.entry(n) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => e.insert(LookupTable::build(n, reset, w)?),
        };
        let c = table.decode(&record.history)?;
        match record.data {
            Some(d) => out.push_str(&format!("{c} {}\n", pauli_frame_update(d, c))),
            None => out.push_str(&format!("{c}\n")),
        }
    }
    Ok(out)
}

fn cmd_decode(a: DecodeArgs) -> Result<(), CliError> {
    let w = weights(&a.weights)?;
    let text = if a.input.as_os_str() == "-" {
        decode_stream(io::stdin().lock(), a.weights.reset, &w)?
    } else {
        let f = fs::File::open(&a.input).map_err(io_error(&a.input))?;
        decode_stream(io::BufReader::new(f), a.weights.reset, &w)?
    };
    write_output(a.output.as_deref(), text.as_bytes())
}

/// Human-readable budget report.
pub fn latency_report(model: &LatencyModel) -> String {
    let mut s = String::from("# pipeline (ns)\n");
    for step in model.steps() {
        s.push_str(&format!(
            "{:<45} {:>5}  {}\n",
            step.name, step.duration_ns, step.actor
        ));
    }
    s.push_str(&format!("{:<45} {:>5}\n\n", "roundtrip", model.roundtrip()));
    s.push_str("# added latency vs uncorrected (ns)\nprotocol        per_cycle  fixed\n");
    for p in ProtocolKind::ALL {
        let b = model.protocol_latency(p);
        s.push_str(&format!(
            "{:<15} {:>9}  {}\n",
            p.name(),
            b.per_cycle,
            b.fixed
        ));
    }
    s
}

fn cmd_latency(a: LatencyArgs) -> Result<(), CliError> {
    let model = match &a.steps {
        Some(v) => {
            let durations: [u64; 6] = v
                .as_slice()
                .try_into()
                .map_err(|_| CliError::Usage("--steps takes exactly six durations".into()))?;
            LatencyModel::with_durations(durations)
        }
        None => LatencyModel::default(),
    };
    write_output(None, latency_report(&model).as_bytes())?;
    if let Some(p) = &a.timeline {
        let protocol: ProtocolKind = p
            .parse()
            .map_err(|_| CliError::Usage(format!("--timeline: unknown protocol `{p}`")))?;
        let text = match &a.config {
            Some(path) => Some(fs::read_to_string(path).map_err(io_error(path))?),
            None => None,
        };
        let cfg = config::load(&a.preset, text.as_deref(), &[])?;
        let events = model.build_timeline(protocol, a.cycles, &cfg.params);
        let mut out = Vec::new();
        write_timeline_csv(&events, &mut out).map_err(io_error("<buffer>"))?;
        write_output(a.timeline_output.as_deref(), &out)?;
    }
    Ok(())
}

fn cmd_parity(a: ParityArgs) -> Result<(), CliError> {
    let cfg = load_config(&a.common, &[])?;
    if a.common.show_config {
        return write_output(
            a.common.output.as_deref(),
            config::to_annotated_toml(&cfg).as_bytes(),
        );
    }
    let device = Device::new(cfg.params.clone(), cfg.error_model)?;
    let compute = || -> Result<String, CliError> {
        let mut s = String::from("input,ee,eo,oe,oo\n");
        for v in 0..8 {
            let d = DataBits::from_int(v);
            let p = parity_distribution(d, &device, cfg.master_seed, cfg.n_trajectories)?;
            s.push_str(&format!("{d},{},{},{},{}\n", p[0], p[1], p[2], p[3]));
        }
        Ok(s)
    };
    let text = match a.common.threads {
        Some(t) => rayon_pool(t)?.install(compute)?,
        None => compute()?,
    };
    write_output(a.common.output.as_deref(), text.as_bytes())
}

fn rayon_pool(threads: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("--threads: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_lists() {
        assert_eq!(parse_cycles("1..8").unwrap(), (1..=8).collect::<Vec<_>>());
        assert_eq!(parse_cycles("1..=3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_cycles("2, 5").unwrap(), vec![2, 5]);
        assert!(parse_cycles("x").is_err());
    }

    #[test]
    fn protocol_lists() {
        assert_eq!(parse_protocols("all").unwrap().len(), 6);
        assert_eq!(
            parse_protocols("dec,uncorrected").unwrap(),
            vec![ProtocolKind::Dec, ProtocolKind::Uncorrected]
        );
        let err = parse_protocols("dec,decoder").unwrap_err();
        assert!(err.to_string().contains("decoder"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn decode_examples() {
        let w = DecoderWeights::default();
        assert_eq!(
            decode_stream("10 10 10\n".as_bytes(), true, &w).unwrap(),
            "100\n"
        );
        assert_eq!(decode_stream("".as_bytes(), false, &w).unwrap(), "");
        let err = decode_stream("00\n\n1x\n".as_bytes(), false, &w).unwrap_err();
        assert!(err.to_string().starts_with("line 3:"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn report_lists_budgets() {
        let r = latency_report(&LatencyModel::default());
        assert!(r.contains("roundtrip                                       590"));
        assert!(r
            .lines()
            .any(|l| l.starts_with("dec ") && l.ends_with("1300")));
        assert!(r
            .lines()
            .any(|l| l.starts_with("rec ") && l.contains("560")));
    }
}
