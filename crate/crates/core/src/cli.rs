//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage or parse error, 3 data error, 4 a
//! verification suite failed.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::cone::{exit_radius_sweep, null_subspace_sweep, random_probe_matrix, ConeProbeResult};
use crate::error::Error;
use crate::fmt::{human, machine};
use crate::lemma::{run_lemma, LemmaId, VerifierConfig, DEFAULT_STEP, DEFAULT_TOL};
use crate::power::{power_table, PowerSpec};
use crate::stats::{compute_statistics, Region, SufficientStats};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "hotelling-rao", version, about = "Hotelling T² and Rao U tests for means with covariates")]
pub struct Cli {
    /// Worker threads (default: all cores). Output does not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute T², U, W and M for a CSV data file.
    Stats(StatsArgs),
    /// Run randomized verifiers of the matrix inequalities and region shapes.
    Verify(VerifyArgs),
    /// Monte Carlo size and power table.
    Power(PowerArgs),
    /// Exit radii of the acceptance regions along random rays.
    Geometry(GeometryArgs),
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// CSV with one observation per row; a non-numeric first row is a header.
    pub input: PathBuf,
    /// Number of leading columns in the tested block.
    #[arg(long)]
    pub p1: usize,
    #[arg(long, conflicts_with = "tsv")]
    pub json: bool,
    #[arg(long)]
    pub tsv: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// `all` or one verifier id such as L2_PENROSE.
    #[arg(long, default_value = "all")]
    pub lemma: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    #[arg(long, default_value_t = 1)]
    pub split: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: f64,
}

const POWER_FLAGS: [&str; 7] = ["n", "p", "p1", "alpha", "reps", "seed", "theta_grid"];

#[derive(Debug, Args)]
pub struct PowerArgs {
    /// JSON config with keys n, p, p1, alpha, reps, seed, theta_grid and optional sigma.
    #[arg(long, conflicts_with_all = POWER_FLAGS)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub p1: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Mean vectors separated by `;`, components by `,`, e.g. "0,0,0;0.5,0,0".
    #[arg(long)]
    pub theta_grid: Option<String>,
    /// Write the TSV table here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the run manifest here instead of stderr.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GeometryArgs {
    #[arg(long, default_value = "t2")]
    pub region: String,
    #[arg(long, default_value_t = 100)]
    pub directions: usize,
    /// Extra directions drawn from the subspace where the adjusted mean vanishes.
    #[arg(long, default_value_t = 0)]
    pub null_directions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub dim: usize,
    #[arg(long, default_value_t = 2)]
    pub split: usize,
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    #[arg(long, default_value_t = 20)]
    pub n: usize,
}

/// Provenance record written next to every power table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
    pub started: String,
    pub finished: String,
}

/// SHA-256 of the config's JSON serialization (fixed field order, shortest round-trip floats).
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

enum Failure {
    Usage(String),
    Data(String),
    Verify,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::OutOfRange(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(format!("I/O error: {e}"))
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    // Commands write into buffers so they can run inside a sized thread pool.
    let mut out_buf = Vec::new();
    let mut err_buf = Vec::new();
    let result = match cli.threads {
        Some(0) => Err(Failure::Usage("--threads must be at least 1".into())),
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.command, &mut out_buf, &mut err_buf)),
            Err(e) => Err(Failure::Data(format!("cannot start thread pool: {e}"))),
        },
        None => dispatch(&cli.command, &mut out_buf, &mut err_buf),
    };
    let _ = out.write_all(&out_buf);
    let _ = err.write_all(&err_buf);
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Data(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_DATA
        }
        Err(Failure::Verify) => EXIT_VERIFY,
    }
}

fn dispatch(cmd: &Command, out: &mut Vec<u8>, err: &mut Vec<u8>) -> CmdResult {
    match cmd {
        Command::Stats(a) => cmd_stats(a, out),
        Command::Verify(a) => cmd_verify(a, out, err),
        Command::Power(a) => cmd_power(a, out, err),
        Command::Geometry(a) => cmd_geometry(a, out),
    }
}

/// Reads a numeric CSV. The first row is treated as a header when any of its
/// fields fails to parse as a number.
pub fn read_csv<R: io::Read>(reader: R) -> std::result::Result<DMatrix<f64>, String> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| format!("malformed CSV: {e}"))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(format!("line {}: {e}", i + 1)),
        }
    }
    let p = match rows.first() {
        Some(r) => r.len(),
        None => return Err("input contains no data rows".into()),
    };
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
        return Err(format!("data row {} has {} fields, expected {p}", i + 1, r.len()));
    }
    Ok(DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]))
}

#[derive(Serialize)]
struct StatsOutput {
    n: usize,
    p: usize,
    p1: usize,
    xbar: Vec<f64>,
    t2: f64,
    u: f64,
    w: f64,
    m: f64,
}

fn cmd_stats(a: &StatsArgs, out: &mut dyn Write) -> CmdResult {
    let file = File::open(&a.input).map_err(|e| Failure::Usage(format!("{}: {e}", a.input.display())))?;
    let data = read_csv(io::BufReader::new(file)).map_err(Failure::Usage)?;
    let p = data.ncols();
    if a.p1 == 0 || a.p1 >= p {
        return Err(Failure::Usage(format!("--p1 {} must satisfy 0 < p1 < p = {p}", a.p1)));
    }
    let stats = SufficientStats::from_data(&data, a.p1)?;
    let t = compute_statistics(&stats)?;
    let o = StatsOutput { n: stats.n(), p, p1: a.p1, xbar: stats.xbar().iter().copied().collect(), t2: t.t2, u: t.u, w: t.w, m: t.m };
    if a.json {
        writeln!(out, "{}", serde_json::to_string(&o).expect("stats serialize"))?;
    } else if a.tsv {
        let xbar_cols: Vec<String> = (1..=p).map(|j| format!("xbar{j}")).collect();
        writeln!(out, "n\tp\tp1\t{}\tt2\tu\tw\tm", xbar_cols.join("\t"))?;
        let xbar: Vec<String> = o.xbar.iter().map(|&x| machine(x)).collect();
        writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}", o.n, o.p, o.p1, xbar.join("\t"), machine(o.t2), machine(o.u), machine(o.w), machine(o.m))?;
    } else {
        let xbar: Vec<String> = o.xbar.iter().map(|&x| human(x)).collect();
        writeln!(out, "n     {}", o.n)?;
        writeln!(out, "p     {}", o.p)?;
        writeln!(out, "p1    {}", o.p1)?;
        writeln!(out, "xbar  {}", xbar.join(" "))?;
        writeln!(out, "T2    {}", human(o.t2))?;
        writeln!(out, "U     {}", human(o.u))?;
        writeln!(out, "W     {}", human(o.w))?;
        writeln!(out, "M     {}", human(o.m))?;
    }
    Ok(())
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let lemmas: Vec<LemmaId> = if a.lemma.eq_ignore_ascii_case("all") {
        LemmaId::ALL.to_vec()
    } else {
        vec![a.lemma.parse()?]
    };
    let mut cfg = VerifierConfig::new(a.seed, a.trials, a.dim, a.split).with_tol(a.tol);
    cfg.step = a.step;
    cfg.validate()?;
    let mut failed = Vec::new();
    for lemma in lemmas {
        let report = run_lemma(&cfg, lemma)?;
        writeln!(out, "{}", report.to_json_line())?;
        if !report.verdict.is_success() {
            failed.push(lemma.name());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        writeln!(err, "verification failed: {}", failed.join(", "))?;
        Err(Failure::Verify)
    }
}

/// Parses `"a,b,c;d,e,f"` into mean vectors.
pub fn parse_theta_grid(s: &str) -> std::result::Result<Vec<Vec<f64>>, String> {
    s.split(';')
        .map(|point| {
            point
                .split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|e| format!("theta grid entry {x:?}: {e}")))
                .collect()
        })
        .collect()
}

fn power_spec(a: &PowerArgs) -> std::result::Result<PowerSpec, Failure> {
    if let Some(path) = &a.config {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        return serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())));
    }
    let p = a.p.unwrap_or(3);
    let theta_grid = match &a.theta_grid {
        Some(s) => parse_theta_grid(s).map_err(Failure::Usage)?,
        None => vec![vec![0.0; p]],
    };
    Ok(PowerSpec {
        n: a.n.unwrap_or(20),
        p,
        p1: a.p1.unwrap_or(1),
        alpha: a.alpha.unwrap_or(0.05),
        reps: a.reps.unwrap_or(10_000),
        seed: a.seed.unwrap_or(0),
        sigma: None,
        theta_grid,
    })
}

fn write_to(path: &Path, bytes: &[u8]) -> CmdResult {
    std::fs::write(path, bytes).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn cmd_power(a: &PowerArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let spec = power_spec(a)?;
    let cfg = spec.to_config()?;
    let started = now();
    let table = power_table(&cfg)?;
    let tsv = table.to_tsv();
    match &a.out {
        Some(path) => write_to(path, tsv.as_bytes())?,
        None => out.write_all(tsv.as_bytes())?,
    }
    let manifest = RunManifest {
        command: "power".into(),
        config_hash: config_hash(&spec),
        seed: spec.seed,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        started,
        finished: now(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    match &a.manifest {
        Some(path) => write_to(path, json.as_bytes())?,
        None => err.write_all(json.as_bytes())?,
    }
    Ok(())
}

#[derive(Serialize)]
struct GeometrySummary {
    summary: bool,
    region: Region,
    n: usize,
    k: f64,
    directions: usize,
    null_directions: usize,
    finite: usize,
    infinite: usize,
    any_infinite: bool,
}

fn cmd_geometry(a: &GeometryArgs, out: &mut dyn Write) -> CmdResult {
    let region: Region = a.region.parse()?;
    if !(a.k > 0.0 && a.k.is_finite()) {
        return Err(Failure::Usage(format!("--k {} must be positive", a.k)));
    }
    if a.split == 0 || a.split >= a.dim {
        return Err(Failure::Usage(format!("--split {} must satisfy 0 < p1 < p = {}", a.split, a.dim)));
    }
    if a.n < 2 {
        return Err(Failure::Usage(format!("--n {} must be at least 2", a.n)));
    }
    let s = random_probe_matrix(a.seed, a.dim, a.split)?;
    let mut probes: Vec<ConeProbeResult> = exit_radius_sweep(region, &s, a.n, a.k, a.directions, a.seed)?;
    probes.extend(null_subspace_sweep(region, &s, a.n, a.k, a.null_directions, a.seed)?);
    for probe in &probes {
        writeln!(out, "{}", probe.to_json_line())?;
    }
    let infinite = probes.iter().filter(|p| !p.exit_radius.is_finite()).count();
    let summary = GeometrySummary {
        summary: true,
        region,
        n: a.n,
        k: a.k,
        directions: a.directions,
        null_directions: a.null_directions,
        finite: probes.len() - infinite,
        infinite,
        any_infinite: infinite > 0,
    };
    writeln!(out, "{}", serde_json::to_string(&summary).expect("summary serializes"))?;
    Ok(())
}
