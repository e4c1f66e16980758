//! Command-line front end: `key = value` config files, flag overrides, CSV
//! results and a plain-text summary.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::detectors::{Detector, MSchedule};
use crate::error::{Error, Result};
use crate::sim::{run_experiment, QrOrdering, SimConfig, TrialStats};

pub const SNR_CONVENTION: &str =
    "snr definition: total received signal power per receive antenna / noise power per receive antenna; sigma^2 = n_tx / 10^(snr_db/10)";
pub const NODE_CONVENTION: &str =
    "one visited node = one single-row squared-residual evaluation for one candidate symbol";

const DEFAULT_OUT: &str = "ulbc_results.csv";

const KNOWN_KEYS: [&str; 11] = [
    "n_tx",
    "n_rx",
    "constellation",
    "schedule",
    "snr",
    "trials",
    "seed",
    "detectors",
    "ordering",
    "workers",
    "out",
];

#[derive(Debug, Parser)]
#[command(name = "ulbc-qrdm", version, about = "MIMO lattice detector experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a Monte Carlo experiment and write CSV results.
    Run(ConfigArgs),
    /// Print the ULBC lower bound, the QRD-M node count and the ULBC upper bound.
    Bounds(ConfigArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Config file with one `key = value` per line.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n_tx: Option<String>,
    #[arg(long)]
    pub n_rx: Option<String>,
    /// Complex constellation size C (4, 16, 64, ...).
    #[arg(long)]
    pub constellation: Option<String>,
    /// Comma-separated beam widths, first detection stage first.
    #[arg(long)]
    pub schedule: Option<String>,
    /// SNR points in dB: `0,4,8`, `start:step:stop`, `inf` for noiseless.
    #[arg(long)]
    pub snr: Option<String>,
    #[arg(long)]
    pub trials: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Comma-separated subset of babai,sd,qrdm,ulbc_paper,ulbc_strict,ml.
    #[arg(long)]
    pub detectors: Option<String>,
    /// plain | sorted
    #[arg(long)]
    pub ordering: Option<String>,
    /// Worker threads (0 = all cores). Does not affect results.
    #[arg(long)]
    pub workers: Option<String>,
    /// CSV output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ConfigArgs {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        let mut push = |key: &'static str, value: &Option<String>| {
            if let Some(value) = value {
                v.push((key, value.clone()));
            }
        };
        push("n_tx", &self.n_tx);
        push("n_rx", &self.n_rx);
        push("constellation", &self.constellation);
        push("schedule", &self.schedule);
        push("snr", &self.snr);
        push("trials", &self.trials);
        push("seed", &self.seed);
        push("detectors", &self.detectors);
        push("ordering", &self.ordering);
        push("workers", &self.workers);
        if let Some(out) = &self.out {
            v.push(("out", out.display().to_string()));
        }
        v
    }
}

/// A parsed configuration plus where to write the CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub sim: SimConfig,
    pub out: PathBuf,
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
        let key = key.trim();
        let key = if key == "constellation_size" { "constellation" } else { key };
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::Config(format!("line {}: unknown key '{key}'", lineno + 1)));
        }
        pairs.push((key.to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

fn bad(key: &str, value: &str, why: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: invalid value '{value}': {why}"))
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| bad(key, value, e))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

/// `a,b,c` or `start:step:stop` (inclusive).
pub fn parse_snr_grid(value: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = value.split(':').collect();
    if parts.len() == 3 {
        let start: f64 = parse_num("snr", parts[0])?;
        let step: f64 = parse_num("snr", parts[1])?;
        let stop: f64 = parse_num("snr", parts[2])?;
        if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
            return Err(bad("snr", value, "range needs finite start <= stop and a positive step"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        return Ok((0..count).map(|k| start + step * k as f64).collect());
    }
    let grid: Vec<f64> = parse_list("snr", value)?;
    if grid.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
        return Err(bad("snr", value, "values must be numbers or +inf"));
    }
    Ok(grid)
}

/// Combines file pairs and flag overrides (flags win) into a validated config.
pub fn build_config(file_pairs: &[(String, String)], overrides: &[(&str, String)]) -> Result<RunSettings> {
    let mut sim = SimConfig::default();
    let mut schedule: Option<Vec<usize>> = None;
    let mut out = PathBuf::from(DEFAULT_OUT);

    let all = file_pairs
        .iter()
        .map(|(k, v)| (k.as_str(), v.as_str()))
        .chain(overrides.iter().map(|(k, v)| (*k, v.as_str())));
    for (key, value) in all {
        match key {
            "n_tx" => sim.n_tx = parse_num(key, value)?,
            "n_rx" => sim.n_rx = parse_num(key, value)?,
            "constellation" | "constellation_size" => sim.constellation_size = parse_num(key, value)?,
            "schedule" => schedule = Some(parse_list(key, value)?),
            "snr" => sim.snr_grid = parse_snr_grid(value)?,
            "trials" => sim.trials_per_snr = parse_num(key, value)?,
            "seed" => sim.master_seed = parse_num(key, value)?,
            "detectors" => {
                let mut ds: Vec<Detector> = parse_list(key, value)?;
                ds.sort_unstable();
                ds.dedup();
                sim.detectors = ds;
            }
            "ordering" => sim.ordering = parse_num::<QrOrdering>(key, value)?,
            "workers" => sim.workers = parse_num(key, value)?,
            "out" => out = PathBuf::from(value),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
    }

    let alphabet = sim.alphabet().map_err(|e| Error::Config(format!("constellation: {e}")))?;
    sim.schedule = match schedule {
        Some(widths) => MSchedule::new(widths, sim.n_s()).map_err(|e| Error::Config(format!("schedule: {e}")))?,
        None => MSchedule::geometric(sim.n_s(), alphabet.q()),
    };
    sim.validate()?;
    Ok(RunSettings { sim, out })
}

/// Loads the optional config file and applies the flag overrides.
pub fn parse_config(args: &ConfigArgs) -> Result<RunSettings> {
    let file_pairs = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("config: cannot read {}: {e}", path.display())))?;
            parse_config_text(&text)?
        }
        None => Vec::new(),
    };
    build_config(&file_pairs, &args.overrides())
}

fn fmt_list<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// Config echo written as `#` lines ahead of the CSV header.
pub fn config_echo(sim: &SimConfig) -> Vec<String> {
    vec![
        format!("ulbc-qrdm {}", env!("CARGO_PKG_VERSION")),
        format!("n_tx = {}", sim.n_tx),
        format!("n_rx = {}", sim.n_rx),
        format!("constellation = {}", sim.constellation_size),
        format!("schedule = {}", sim.schedule),
        format!("snr = {}", fmt_list(&sim.snr_grid)),
        format!("trials = {}", sim.trials_per_snr),
        format!("seed = {}", sim.master_seed),
        format!("detectors = {}", fmt_list(&sim.detectors)),
        format!("ordering = {}", sim.ordering),
        "channel = flat i.i.d. Rayleigh, unit-variance complex gains".to_string(),
        SNR_CONVENTION.to_string(),
        format!("nodes: {NODE_CONVENTION}"),
    ]
}

pub const CSV_HEADER: &str = "snr_db,detector,trials,vector_error_rate,symbol_error_rate,nodes_mean,nodes_max,nodes_min,f_lb,f_qrdm,f_ub,ulbc_equals_qrdm_fraction,early_termination_fraction";

/// One CSV data row.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputRow {
    pub snr_db: f64,
    pub detector: Detector,
    pub trials: u64,
    pub vector_error_rate: f64,
    pub symbol_error_rate: f64,
    pub nodes_mean: f64,
    pub nodes_max: u64,
    pub nodes_min: u64,
    pub f_lb: u64,
    pub f_qrdm: u64,
    pub f_ub: u64,
    /// `None` unless the row is a ULBC detector and QRD-M ran alongside it.
    pub ulbc_equals_qrdm_fraction: Option<f64>,
    pub early_termination_fraction: Option<f64>,
}

/// Rows ordered by SNR ascending, then detector name.
pub fn output_rows(sim: &SimConfig, stats: &TrialStats) -> Vec<OutputRow> {
    let has_qrdm = sim.detectors.contains(&Detector::Qrdm);
    let b = stats.bounds;
    let mut rows = Vec::new();
    for point in &stats.per_snr {
        for (&detector, s) in &point.detectors {
            let trials = s.trials as f64;
            rows.push(OutputRow {
                snr_db: point.snr_db,
                detector,
                trials: s.trials,
                vector_error_rate: s.vector_errors as f64 / trials,
                symbol_error_rate: s.symbol_errors as f64 / (trials * stats.n_tx as f64),
                nodes_mean: s.nodes_mean(),
                nodes_max: s.node_max,
                nodes_min: s.node_min,
                f_lb: b.lower,
                f_qrdm: b.qrdm,
                f_ub: b.upper,
                ulbc_equals_qrdm_fraction: (detector.is_ulbc() && has_qrdm).then(|| s.equals_qrdm as f64 / trials),
                early_termination_fraction: detector.is_ulbc().then(|| s.early_terminations as f64 / trials),
            });
        }
    }
    rows.sort_by(|a, b| {
        a.snr_db
            .total_cmp(&b.snr_db)
            .then_with(|| a.detector.name().cmp(b.detector.name()))
    });
    rows
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn write_csv<W: Write>(w: &mut W, sim: &SimConfig, stats: &TrialStats) -> io::Result<()> {
    for line in config_echo(sim) {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "{CSV_HEADER}")?;
    for r in output_rows(sim, stats) {
        writeln!(
            w,
            "{},{},{},{:.6},{:.6},{:.6},{},{},{},{},{},{},{}",
            r.snr_db,
            r.detector,
            r.trials,
            r.vector_error_rate,
            r.symbol_error_rate,
            r.nodes_mean,
            r.nodes_max,
            r.nodes_min,
            r.f_lb,
            r.f_qrdm,
            r.f_ub,
            opt(r.ulbc_equals_qrdm_fraction),
            opt(r.early_termination_fraction),
        )?;
    }
    Ok(())
}

pub fn summary_table(sim: &SimConfig, stats: &TrialStats) -> String {
    let mut s = format!(
        "{}x{} MIMO, {}-QAM, schedule [{}], ordering {}, {} trials/point\n",
        sim.n_rx, sim.n_tx, sim.constellation_size, sim.schedule, sim.ordering, sim.trials_per_snr
    );
    s += &format!(
        "bounds: f_lb = {}, f_qrdm = {}, f_ub = {}\n",
        stats.bounds.lower, stats.bounds.qrdm, stats.bounds.upper
    );
    s += &format!(
        "{:>7} {:<12} {:>9} {:>9} {:>11} {:>8} {:>8} {:>8}\n",
        "snr_db", "detector", "VER", "SER", "nodes_mean", "min", "max", "/f_qrdm"
    );
    for r in output_rows(sim, stats) {
        s += &format!(
            "{:>7} {:<12} {:>9.5} {:>9.5} {:>11.2} {:>8} {:>8} {:>8.4}\n",
            r.snr_db,
            r.detector.name(),
            r.vector_error_rate,
            r.symbol_error_rate,
            r.nodes_mean,
            r.nodes_min,
            r.nodes_max,
            r.nodes_mean / r.f_qrdm as f64,
        );
    }
    s
}

/// Runs the experiment, writes the CSV to `settings.out` and returns the summary.
pub fn run(settings: &RunSettings) -> Result<String> {
    let stats = run_experiment(&settings.sim)?;
    write_csv_file(&settings.out, &settings.sim, &stats)?;
    Ok(summary_table(&settings.sim, &stats))
}

pub fn write_csv_file(path: &Path, sim: &SimConfig, stats: &TrialStats) -> Result<()> {
    let io_err = |e: io::Error| Error::Config(format!("out: cannot write {}: {e}", path.display()));
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    write_csv(&mut w, sim, stats).map_err(io_err)?;
    w.flush().map_err(io_err)
}

pub fn bounds_text(sim: &SimConfig) -> Result<String> {
    let b = sim.bounds()?;
    Ok(format!("f_lb = {}\nf_qrdm = {}\nf_ub = {}\n", b.lower, b.qrdm, b.upper))
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match &cli.command {
        Command::Run(args) => parse_config(args).and_then(|settings| {
            let summary = run(&settings)?;
            Ok(format!("{summary}wrote {}\n", settings.out.display()))
        }),
        Command::Bounds(args) => parse_config(args).and_then(|settings| bounds_text(&settings.sim)),
    };
    match outcome {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
