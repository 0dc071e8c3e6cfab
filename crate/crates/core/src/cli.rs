//! Command-line front end for the `hvasicek` binary.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::asymptotics::{b_constant, fluctuation_law};
use crate::error::{Error, Result};
use crate::estimators::estimate;
use crate::hermite::{GridSpec, HermiteSimulator, HermiteSpec, SimOptions};
use crate::io::{self, RunManifest, Settings};
use crate::mc::{self, Experiment};
use crate::vasicek::{ou_path, vasicek_path, VasicekParams};

#[derive(Debug, Parser)]
#[command(name = "hvasicek", version, about = "Vasicek models driven by Hermite processes: simulation, drift estimation and Monte Carlo checks")]
pub struct Cli {
    /// Log verbosity (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    pub log: String,
    /// Suppress the JSON summary printed after experiments.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a driver, OU or state path and write it as `t,value` CSV.
    Simulate(SimulateArgs),
    /// Estimate (a, b) from a path CSV.
    Estimate(EstimateArgs),
    /// Print the constants and fluctuation law for (q, H, a) as JSON.
    Constants(ConstantsArgs),
    /// Monte Carlo consistency experiment.
    McConsistency(ExperimentArgs),
    /// Monte Carlo convergence-rate experiment.
    McRate(ExperimentArgs),
    /// Monte Carlo limit-distribution experiment.
    McDist(ExperimentArgs),
    /// Monte Carlo convergence of the G_T functional.
    GtConverge(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PathKind {
    /// The Hermite process itself.
    Driver,
    /// `∫_0^t e^{-a(t-u)} dZ_u`.
    Ou,
    /// The Vasicek state started at 0.
    State,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 1)]
    pub q: u32,
    #[arg(long = "H")]
    pub h: f64,
    #[arg(long = "T")]
    pub horizon: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "driver")]
    pub kind: PathKind,
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, default_value_t = 0.0)]
    pub b: f64,
    /// Internal fGn points per output step when q >= 2.
    #[arg(long, default_value_t = 32)]
    pub refinement: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub q: u32,
    #[arg(long = "H")]
    pub h: f64,
}

#[derive(Debug, Args)]
pub struct ConstantsArgs {
    #[arg(long, default_value_t = 1)]
    pub q: u32,
    #[arg(long = "H")]
    pub h: f64,
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
}

/// Every flag overrides the same-named key of `--config`.
#[derive(Debug, Args, Default)]
pub struct ExperimentArgs {
    /// Flat `key = value` settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Re-run exactly the configuration recorded in a manifest.
    #[arg(long, conflicts_with = "config")]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub q: Option<u32>,
    #[arg(long = "H")]
    pub h: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    /// Comma-separated horizons.
    #[arg(long)]
    pub horizons: Option<String>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores). Does not affect results.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub refinement: Option<usize>,
    #[arg(long)]
    pub max_step_variance_error: Option<f64>,
    /// hermite or zero.
    #[arg(long)]
    pub driver: Option<String>,
    #[arg(long)]
    pub require_ks: bool,
    #[arg(long)]
    pub gt_points_per_rate: Option<f64>,
    /// Output directory; defaults to $HVASICEK_OUT_DIR/<experiment>-<seed>, else runs/<experiment>-<seed>.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ExperimentArgs {
    fn overrides(&self) -> Settings {
        let mut s = Settings::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                s.insert(k.to_string(), v);
            }
        };
        put("q", self.q.map(|v| v.to_string()));
        put("H", self.h.map(io::fmt_f64));
        put("a", self.a.map(io::fmt_f64));
        put("b", self.b.map(io::fmt_f64));
        put("horizons", self.horizons.clone());
        put("dt", self.dt.map(io::fmt_f64));
        put("replications", self.replications.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("workers", self.workers.map(|v| v.to_string()));
        put("refinement", self.refinement.map(|v| v.to_string()));
        put("max_step_variance_error", self.max_step_variance_error.map(io::fmt_f64));
        put("driver", self.driver.clone());
        put("require_ks", self.require_ks.then(|| "true".to_string()));
        put("gt_points_per_rate", self.gt_points_per_rate.map(io::fmt_f64));
        s
    }

    /// Resolves the configuration: manifest, else config file then flags (flags win).
    pub fn resolve(&self, experiment: Experiment) -> Result<mc::MCConfig> {
        if let Some(m) = &self.manifest {
            let mut c = RunManifest::read(m)?.config;
            if c.experiment != experiment {
                return Err(Error::config(format!(
                    "manifest records a {} experiment, not {experiment}",
                    c.experiment
                )));
            }
            if let Some(w) = self.workers {
                c.workers = w;
            }
            c.validate()?;
            return Ok(c);
        }
        let mut s = match &self.config {
            Some(p) => io::parse_settings(&fs::read_to_string(p)?)?,
            None => Settings::new(),
        };
        s.extend(self.overrides());
        io::config_from_settings(&s, Some(experiment))
    }
}

fn spec_of(q: u32, h: f64) -> Result<HermiteSpec> {
    HermiteSpec::new(q, h)
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let spec = spec_of(args.q, args.h)?;
    let grid = GridSpec::new(args.horizon, args.n)?;
    let opts = SimOptions { refinement: args.refinement, ..SimOptions::default() };
    let z = HermiteSimulator::with_options(spec, grid, opts)?.sample(args.seed);
    let path = match args.kind {
        PathKind::Driver => z,
        PathKind::Ou => ou_path(args.a, &z)?,
        PathKind::State => vasicek_path(VasicekParams::new(args.a, args.b)?, &z)?,
    };
    io::write_path_file(&path, &args.out)
}

fn estimate_cmd(args: &EstimateArgs) -> Result<()> {
    let spec = spec_of(args.q, args.h)?;
    let path = io::read_path_file(&args.input)?;
    let r = estimate(&path, &spec)?;
    print_json(&serde_json::to_value(r)?)
}

fn constants(args: &ConstantsArgs) -> Result<()> {
    let spec = spec_of(args.q, args.h)?;
    let law = fluctuation_law(&spec, args.a)?;
    let b = b_constant(&spec).ok();
    print_json(&json!({
        "q": spec.q(),
        "H": spec.h(),
        "a": args.a,
        "H0": spec.h0(),
        "c": spec.c(),
        "B": b,
        "H_Gamma_2H": spec.stationary_moment(),
        "fluctuation_law": law,
    }))
}

fn experiment(args: &ExperimentArgs, which: Experiment, quiet: bool) -> Result<()> {
    let config = args.resolve(which)?;
    let started = chrono::Utc::now();
    let result = mc::run(&config)?;
    let dir = args
        .out
        .clone()
        .unwrap_or_else(|| io::default_out_dir().join(format!("{which}-{}", config.master_seed)));
    let manifest = RunManifest::new(&result, started);
    io::write_experiment(&dir, &result, &manifest)?;
    for w in &result.summary.warnings {
        eprintln!("warning: {w}");
    }
    if quiet {
        return Ok(());
    }
    print_json(&json!({
        "out": dir,
        "wall_time_secs": result.wall_time_secs,
        "summary": result.summary,
    }))
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate_cmd(a),
        Command::Constants(a) => constants(a),
        Command::McConsistency(a) => experiment(a, Experiment::Consistency, cli.quiet),
        Command::McRate(a) => experiment(a, Experiment::Rate, cli.quiet),
        Command::McDist(a) => experiment(a, Experiment::Distribution, cli.quiet),
        Command::GtConverge(a) => experiment(a, Experiment::GtConverge, cli.quiet),
    }
}

/// Parses `argv`, runs the command and returns the process exit code:
/// 0 on success, 1 on usage or input errors, 2 on numerical or experiment errors.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let _ = env_logger::Builder::new().parse_filters(&cli.log).try_init();
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
