//! Command-line front end: `solve`, `rates`, `weights` and `check`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{ArgAction, Args, Parser, Subcommand};
use log::info;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiment::{header_line, run_apriori_suite, run_studies, RunConfig};
use crate::flux::FluxScheme;
use crate::kernel::WeightKernel;
use crate::mesh::Grid1D;
use crate::noise::generate_path;
use crate::stepper::{Discretization, TimeSchedule};

/// Output directory used when neither `--out` nor the environment sets one.
pub const DEFAULT_OUT_DIR: &str = "stochfrac-out";
pub const OUT_DIR_ENV: &str = "STOCHFRAC_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "stochfrac", version, about = "Finite volume solver and Monte Carlo rate studies for fractional stochastic conservation laws")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Increase log detail (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one path (or the deterministic problem) and write snapshot profiles.
    Solve(Options),
    /// Run the coupled Monte Carlo error study and write the rate table.
    Rates(Options),
    /// Write the fractional weights G_0..G_imax.
    Weights(Options),
    /// Run the a priori diagnostic suite.
    Check(Options),
}

#[derive(Debug, Clone, Args)]
pub struct Options {
    /// Flat `key = value` configuration file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub dx: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final time.
    #[arg(long = "T", value_name = "T")]
    pub t_final: Option<f64>,
    /// Truncation half-width in cells (overrides the domain half-width).
    #[arg(long = "K", value_name = "K")]
    pub k_cells: Option<usize>,
    #[arg(long, value_parser = parse_flux)]
    pub flux: Option<FluxScheme>,
    #[arg(long, value_parser = ["on", "off"])]
    pub sigma: Option<String>,
    #[arg(long)]
    pub preset: Option<String>,
    /// Output directory (falls back to $STOCHFRAC_OUT_DIR).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Write a per-step CSV trace (solve only).
    #[arg(long)]
    pub trace: bool,
    /// Largest weight index (weights only).
    #[arg(long, default_value_t = 20)]
    pub imax: usize,
}

fn parse_flux(s: &str) -> std::result::Result<FluxScheme, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Applies a `key = value` file to every configuration. `#` starts a comment.
pub fn apply_config_file(path: &Path, configs: &mut [RunConfig]) -> Result<()> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("{}:{}: expected `key = value`", path.display(), n + 1)))?;
        for c in configs.iter_mut() {
            c.set(key, value)?;
        }
    }
    Ok(())
}

/// Preset, then config file, then flags.
pub fn resolve_configs(opts: &Options) -> Result<Vec<RunConfig>> {
    let mut configs = match &opts.preset {
        Some(name) => RunConfig::preset(name)?,
        None => vec![RunConfig::default()],
    };
    if let Some(path) = &opts.config {
        apply_config_file(path, &mut configs)?;
    }
    for c in &mut configs {
        if let Some(v) = opts.seed {
            c.seed = v;
        }
        if let Some(v) = opts.paths {
            c.n_paths = v;
        }
        if let Some(v) = opts.lambda {
            c.lambda = v;
        }
        if let Some(v) = opts.t_final {
            c.t_final = v;
        }
        if let Some(v) = opts.flux {
            c.flux = v;
        }
        if let Some(v) = &opts.sigma {
            c.sigma = v == "on";
        }
        if let Some(v) = opts.threads {
            c.threads = Some(v);
        }
    }
    Ok(configs)
}

pub fn out_dir(opts: &Options) -> PathBuf {
    opts.out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn short_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Largest `2^-m` not exceeding `dt`.
fn dyadic_floor(dt: f64) -> f64 {
    2f64.powi(dt.log2().floor() as i32)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve(o) => solve(&o),
        Command::Rates(o) => rates(&o),
        Command::Weights(o) => weights(&o),
        Command::Check(o) => check(&o),
    }
}

/// Default cell width for `solve`.
const SOLVE_DX: f64 = 1.0 / 32.0;
/// Default cell width for `weights`.
const WEIGHTS_DX: f64 = 0.1;
/// Default cell width for `check`.
const CHECK_DX: f64 = 6.0 / 96.0;

fn first(configs: Vec<RunConfig>) -> RunConfig {
    configs.into_iter().next().expect("resolve_configs yields at least one config")
}

fn solve(opts: &Options) -> Result<()> {
    let c = first(resolve_configs(opts)?);
    let dx = opts.dx.unwrap_or(SOLVE_DX);
    let grid = match opts.k_cells {
        Some(k) => Grid1D::new(dx, k)?,
        None => Grid1D::covering(c.half_width, dx)?,
    };
    let problem = Arc::new(c.problem());
    problem.validate(-2.0, 2.0)?;
    let disc = Discretization::new(problem.clone(), grid)?;
    let cfl = disc.cfl(c.cfl_safety)?;
    let dt = opts.dt.unwrap_or_else(|| dyadic_floor(cfl.dt.min(0.25)));
    if dt > disc.monotone_dt_limit() {
        log::warn!("dt={dt:e} exceeds the monotonicity limit {:e}", disc.monotone_dt_limit());
    }
    let mut times: Vec<f64> = c.snapshot_times.iter().copied().filter(|&t| t < c.t_final).collect();
    times.push(c.t_final);
    let schedule = TimeSchedule::new(dt, c.t_final, &times)?;
    let path = if problem.noise.is_off() {
        None
    } else {
        Some(generate_path(c.seed, 0, schedule.n_steps.max(1), problem.noise.n_modes(), dt)?)
    };
    let dir = out_dir(opts);
    let mut trace = if opts.trace { Some(create(&dir, "trace.csv")?) } else { None };
    let snaps = disc.evolve(&schedule, path.as_ref(), trace.as_mut().map(|w| w as &mut dyn Write))?;
    if let Some(mut w) = trace {
        w.flush()?;
    }
    let hash = short_hash(&format!("{};solve;dx={dx:?};dt={dt:?};K={}", c.canonical(), grid.k()));
    let mut out = create(&dir, "profile.csv")?;
    writeln!(out, "{}", header_line(&hash, c.seed, 1))?;
    writeln!(out, "t,x,u")?;
    for (t, u) in snaps.times.iter().zip(&snaps.states) {
        for (i, v) in grid.indices().zip(u.values()) {
            writeln!(out, "{t},{:?},{v:e}", grid.center(i))?;
        }
    }
    out.flush()?;
    println!(
        "solved lambda={} dx={dx} dt={dt} K={} to T={}; profiles in {}",
        c.lambda,
        grid.k(),
        c.t_final,
        dir.join("profile.csv").display()
    );
    Ok(())
}

fn rates(opts: &Options) -> Result<()> {
    let configs = resolve_configs(opts)?;
    if opts.dx.is_some() || opts.dt.is_some() || opts.k_cells.is_some() {
        log::warn!("--dx, --dt and --K do not apply to rates; set dx_levels/dt_levels in a config file");
    }
    let report = run_studies(&configs)?;
    let dir = out_dir(opts);
    let mut csv = create(&dir, "rates.csv")?;
    report.write_csv(&mut csv)?;
    csv.flush()?;
    let mut txt = create(&dir, "rates.txt")?;
    report.write_text(&mut txt)?;
    txt.flush()?;
    report.write_text(std::io::stdout().lock())?;
    info!("wrote {}", dir.join("rates.csv").display());
    Ok(())
}

fn weights(opts: &Options) -> Result<()> {
    let c = first(resolve_configs(opts)?);
    let dx = opts.dx.unwrap_or(WEIGHTS_DX);
    let kernel = WeightKernel::new(c.lambda, dx, opts.imax)?;
    let hash = short_hash(&format!("weights;lambda={:?};dx={dx:?};imax={}", c.lambda, opts.imax));
    let dir = out_dir(opts);
    let mut out = create(&dir, "weights.csv")?;
    writeln!(out, "{}", header_line(&hash, c.seed, 0))?;
    kernel.write_csv(&mut out)?;
    out.flush()?;
    println!("wrote {} weights to {}", opts.imax + 1, dir.join("weights.csv").display());
    Ok(())
}

fn check(opts: &Options) -> Result<()> {
    let mut c = first(resolve_configs(opts)?);
    if opts.paths.is_none() && opts.preset.is_none() && opts.config.is_none() {
        c.n_paths = 200;
    }
    let report = run_apriori_suite(&c, opts.dx.unwrap_or(CHECK_DX))?;
    let dir = out_dir(opts);
    let mut txt = create(&dir, "check.txt")?;
    report.write_text(&mut txt)?;
    txt.flush()?;
    let mut csv = create(&dir, "check.csv")?;
    report.write_csv(&mut csv)?;
    csv.flush()?;
    report.write_text(std::io::stdout().lock())?;
    Ok(())
}

/// Process exit code for a result: 0 success, 1 invalid input, 2 numerical
/// failure.
pub fn exit_code(result: &Result<()>) -> i32 {
    match result {
        Ok(()) => 0,
        Err(e) if e.is_numerical() => 2,
        Err(_) => 1,
    }
}
