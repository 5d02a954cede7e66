use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use hyperadiabatic::check::Checker;
use hyperadiabatic::config::{ConfigError, OutputFormat, Overrides};
use hyperadiabatic::hamiltonian::{build, ModelKind};
use hyperadiabatic::metrics::{switching_estimate, Averaging, SwitchingEstimate};
use hyperadiabatic::sweep::{self, load_or_run, CacheStatus, SweepError};

const DEFAULT_CACHE_DIR: &str = ".hyperadiabatic-cache";

#[derive(Parser)]
#[command(
    name = "hyperadiabatic",
    version,
    about = "Adiabatic state-preparation error sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a T sweep and write one record per grid point.
    Sweep(Flags),
    /// Print switching-estimate coefficients for a model.
    Estimate {
        #[command(flatten)]
        flags: Flags,
        /// Derivative orders to evaluate.
        #[arg(long, value_delimiter = ',', default_value = "1,2")]
        orders: Vec<u32>,
    },
    /// Write (s, value, deriv1) samples of one coupling schedule as CSV.
    ScheduleDump {
        #[command(flatten)]
        flags: Flags,
        /// Number of equally spaced samples including both ends.
        #[arg(long, default_value_t = 201)]
        points: usize,
        /// Index of the coupling to dump.
        #[arg(long, default_value_t = 0)]
        coupling: usize,
    },
    /// Run the acceptance property suite.
    Check {
        /// Worker threads (0 for all cores).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Run only these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
}

#[derive(Args, Default)]
#[command(allow_negative_numbers = true)]
struct Flags {
    /// Flat key = value config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    k1: Option<f64>,
    #[arg(long)]
    k2: Option<f64>,
    #[arg(long)]
    k3: Option<f64>,
    /// Smoothing order.
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    tmin: Option<f64>,
    #[arg(long)]
    tmax: Option<f64>,
    /// Grid points per decade.
    #[arg(long)]
    ppd: Option<u32>,
    #[arg(long)]
    tau0: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    averaging: Option<Averaging>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long)]
    s_start: Option<f64>,
    #[arg(long)]
    s_end: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<OutputFormat>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Always recompute and do not write the cache.
    #[arg(long)]
    no_cache: bool,
}

impl Flags {
    fn resolve(&self) -> Result<Overrides, ConfigError> {
        let file = match &self.config {
            Some(p) => Overrides::from_file(p)?,
            None => Overrides::default(),
        };
        let flags = Overrides {
            model: self.model,
            k: self.k,
            k1: self.k1,
            k2: self.k2,
            k3: self.k3,
            n: self.n,
            tmin: self.tmin,
            tmax: self.tmax,
            ppd: self.ppd,
            tau0: self.tau0,
            samples: self.samples,
            averaging: self.averaging,
            rtol: self.rtol,
            atol: self.atol,
            s_start: self.s_start,
            s_end: self.s_end,
            workers: self.workers,
            out: self.out.clone(),
            format: self.format,
            cache: self.no_cache.then_some(false),
            cache_dir: self.cache_dir.clone(),
            ..Overrides::default()
        };
        Ok(file.merge(flags))
    }
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<SweepError> for Failure {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::InvalidConfig(_) | SweepError::Hamiltonian(_) => {
                Failure::Config(e.to_string())
            }
            other => Failure::Numerical(other.to_string()),
        }
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    match path {
        Some(p) => File::create(p)
            .map(|f| Box::new(BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|e| Failure::Numerical(format!("cannot write {}: {e}", p.display()))),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn run_sweep_command(flags: &Flags) -> Result<(), Failure> {
    let o = flags.resolve()?;
    let cfg = o.sweep_config()?;
    cfg.validate()?;
    let cache_dir = match o.cache {
        Some(false) => None,
        _ => Some(
            o.cache_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR)),
        ),
    };
    let (records, status) = load_or_run(&cfg, cache_dir.as_deref())?;
    if status == CacheStatus::Hit {
        eprintln!("cache hit {}", sweep::cache_key(&cfg));
    }
    let failed = records.iter().filter(|r| !r.ok()).count();
    let out = open_output(o.out.as_deref())?;
    match o.format.unwrap_or_default() {
        OutputFormat::Csv => sweep::write_csv(&records, out)?,
        OutputFormat::Json => sweep::write_json(&cfg, &records, out)?,
    }
    if failed > 0 {
        for r in records.iter().filter(|r| !r.ok()) {
            eprintln!("T = {}: {}", r.t, r.error.as_deref().unwrap_or(""));
        }
        return Err(Failure::Numerical(format!("{failed} grid points failed")));
    }
    Ok(())
}

fn run_estimate(flags: &Flags, orders: &[u32]) -> Result<(), Failure> {
    let o = flags.resolve()?;
    let spec = o.model_spec()?;
    let path = build(&spec).map_err(|e| Failure::Config(e.to_string()))?;
    let base = build(&spec.base()).map_err(|e| Failure::Config(e.to_string()))?;
    let mut rows: Vec<(&str, SwitchingEstimate)> = Vec::new();
    for &n in orders {
        for (label, p) in [("path", &path), ("base", &base)] {
            let est = switching_estimate(p, n).map_err(|e| Failure::Numerical(e.to_string()))?;
            rows.push((label, est));
        }
    }
    let mut out = open_output(o.out.as_deref())?;
    let io_err = |e: io::Error| Failure::Numerical(e.to_string());
    match o.format.unwrap_or_default() {
        OutputFormat::Json => {
            let v: Vec<_> = rows
                .iter()
                .map(|(l, e)| json!({"path": l, "estimate": e}))
                .collect();
            serde_json::to_writer_pretty(&mut out, &json!({"model": spec, "estimates": v}))
                .map_err(|e| Failure::Numerical(e.to_string()))?;
            writeln!(out).map_err(io_err)?;
        }
        OutputFormat::Csv => {
            writeln!(out, "path,order,b_start,b_end,b").map_err(io_err)?;
            for (l, e) in &rows {
                writeln!(
                    out,
                    "{l},{},{:?},{:?},{:?}",
                    e.order, e.b_start, e.b_end, e.b
                )
                .map_err(io_err)?;
            }
        }
    }
    out.flush().map_err(io_err)
}

fn run_schedule_dump(flags: &Flags, points: usize, coupling: usize) -> Result<(), Failure> {
    let o = flags.resolve()?;
    let spec = o.model_spec()?;
    let path = build(&spec).map_err(|e| Failure::Config(e.to_string()))?;
    let Some(c) = path.couplings().get(coupling) else {
        return Err(Failure::Config(format!(
            "model {} has {} couplings",
            spec.model,
            path.couplings().len()
        )));
    };
    if points < 2 {
        return Err(Failure::Config("need at least 2 points".into()));
    }
    let mut w = csv::Writer::from_writer(open_output(o.out.as_deref())?);
    let csv_err = |e: csv::Error| Failure::Numerical(e.to_string());
    w.write_record(["s", "value", "deriv1"]).map_err(csv_err)?;
    for i in 0..points {
        let s = i as f64 / (points - 1) as f64;
        let v = c
            .schedule
            .value(s)
            .map_err(|e| Failure::Numerical(e.to_string()))?;
        let d = c
            .schedule
            .deriv1(s)
            .map_err(|e| Failure::Numerical(e.to_string()))?;
        w.write_record([format!("{s:?}"), format!("{v:?}"), format!("{d:?}")])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Failure::Numerical(e.to_string()))
}

fn run_check(workers: usize, only: &[u32]) -> Result<(), Failure> {
    let checker = Checker::new(workers);
    let ids: Vec<u32> = if only.is_empty() {
        (1..=8).collect()
    } else {
        only.to_vec()
    };
    let mut failed = Vec::new();
    for id in ids {
        let Some(outcome) = checker.run(id) else {
            return Err(Failure::Config(format!("no criterion {id}")));
        };
        println!("{outcome}");
        if !outcome.passed {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Numerical(format!("failed criteria: {failed:?}")))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Sweep(flags) => run_sweep_command(flags),
        Command::Estimate { flags, orders } => run_estimate(flags, orders),
        Command::ScheduleDump {
            flags,
            points,
            coupling,
        } => run_schedule_dump(flags, *points, *coupling),
        Command::Check { workers, only } => run_check(*workers, only),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
