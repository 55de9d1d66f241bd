//! Monte Carlo strong-error studies.
//!
//! Every path is run at a fine reference resolution and at each coarse level,
//! all driven by the same Brownian path (coarse increments are exact sums of
//! fine ones). The reference snapshot is restricted onto each coarse grid and
//! the L¹ distance averaged over paths; a level's error is the largest of
//! these means over the snapshot times.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use log::{debug, info, warn};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::diagnostics::{self, check_apriori, mean_se, AprioriReport, MeanSe, Verdict};
use crate::error::{Error, Result};
use crate::flux::FluxScheme;
use crate::mesh::{l1_distance, restrict, Grid1D};
use crate::noise::{generate_path, BrownianPath, NoiseSpec};
use crate::stepper::{whole_multiple, CflReport, Discretization, ProblemSpec, TimeSchedule};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fractional orders of the benchmark study.
pub const STUDY_LAMBDAS: [f64; 5] = [0.1, 0.3, 0.5, 0.65, 0.8];

/// What to do when a level's time step exceeds the monotonicity limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CflPolicy {
    /// Run the step verbatim and log a warning.
    Warn,
    /// Split each step into `2^m` equal substeps, with the smallest `m`
    /// that brings the substep under the limit.
    Substep,
}

impl FromStr for CflPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "warn" => Ok(Self::Warn),
            "substep" => Ok(Self::Substep),
            other => Err(Error::Config(format!("unknown CFL policy `{other}` (warn|substep)"))),
        }
    }
}

impl fmt::Display for CflPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Warn => "warn",
            Self::Substep => "substep",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub lambda: f64,
    pub half_width: f64,
    pub t_final: f64,
    pub dt_ref: f64,
    pub ref_dx: f64,
    /// Coarse levels, ascending and paired index by index with `dx_levels`.
    pub dt_levels: Vec<f64>,
    pub dx_levels: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
    pub snapshot_times: Vec<f64>,
    pub flux: FluxScheme,
    pub sigma: bool,
    pub cfl_policy: CflPolicy,
    pub cfl_safety: f64,
    /// Worker cap; `None` uses every available core. Never affects results.
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            half_width: 3.0,
            t_final: 1.0,
            dt_ref: 2f64.powi(-12),
            ref_dx: 6.0 / 6144.0,
            dt_levels: (5..=9).rev().map(|m| 2f64.powi(-m)).collect(),
            dx_levels: [768.0, 384.0, 192.0, 96.0, 48.0].iter().map(|n| 6.0 / n).collect(),
            n_paths: 5000,
            seed: 42,
            snapshot_times: vec![0.25, 0.5, 0.75, 1.0],
            flux: FluxScheme::Godunov,
            sigma: true,
            cfl_policy: CflPolicy::Substep,
            cfl_safety: 0.5,
            threads: None,
        }
    }
}

fn lambda_tag(lambda: f64) -> String {
    // 0.1 -> "01", 0.65 -> "065"
    format!("{lambda}").replace('.', "")
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value.trim().parse().map_err(|_| Error::Config(format!("`{key}` expects a number, got `{value}`")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| parse_f64(key, v)).collect()
}

fn parse_switch(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        other => Err(Error::Config(format!("`{key}` expects on|off, got `{other}`"))),
    }
}

fn parse_count(key: &str, value: &str) -> Result<u64> {
    value.trim().parse().map_err(|_| Error::Config(format!("`{key}` expects a non-negative integer, got `{value}`")))
}

impl RunConfig {
    /// Names accepted by [`RunConfig::preset`].
    pub fn preset_names() -> Vec<String> {
        let mut names = vec!["paper".to_string(), "desk".to_string()];
        for scale in ["paper", "desk"] {
            names.extend(STUDY_LAMBDAS.iter().map(|&l| format!("{scale}-lambda{}", lambda_tag(l))));
        }
        names
    }

    /// `paper-lambdaXX` (5000 paths, reference `Δx = 6/6144`) and
    /// `desk-lambdaXX` (200 paths). Desk presets with `λ > 0.5` use the
    /// coarser reference `Δx = 6/1536`, `Δt = 2^-10`, since the nonlocal
    /// stability limit makes the finest reference prohibitively expensive.
    /// `paper` and `desk` expand to all five orders.
    pub fn preset(name: &str) -> Result<Vec<RunConfig>> {
        let single = |scale: &str, lambda: f64| {
            let mut c = RunConfig { lambda, ..RunConfig::default() };
            if scale == "desk" {
                c.n_paths = 200;
                if lambda > 0.5 {
                    c.ref_dx = 6.0 / 1536.0;
                    c.dt_ref = 2f64.powi(-10);
                }
            }
            c
        };
        if name == "paper" || name == "desk" {
            return Ok(STUDY_LAMBDAS.iter().map(|&l| single(name, l)).collect());
        }
        for scale in ["paper", "desk"] {
            for &l in &STUDY_LAMBDAS {
                if name == format!("{scale}-lambda{}", lambda_tag(l)) {
                    return Ok(vec![single(scale, l)]);
                }
            }
        }
        Err(Error::Config(format!("unknown preset `{name}` (one of {})", Self::preset_names().join(", "))))
    }

    /// Applies one `key = value` setting; unknown keys are rejected by name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "lambda" => self.lambda = parse_f64(key, v)?,
            "half_width" => self.half_width = parse_f64(key, v)?,
            "T" | "t_final" => self.t_final = parse_f64(key, v)?,
            "dt_ref" => self.dt_ref = parse_f64(key, v)?,
            "ref_dx" => self.ref_dx = parse_f64(key, v)?,
            "dt_levels" => self.dt_levels = parse_list(key, v)?,
            "dx_levels" => self.dx_levels = parse_list(key, v)?,
            "paths" | "n_paths" => self.n_paths = parse_count(key, v)? as usize,
            "seed" => self.seed = parse_count(key, v)?,
            "snapshots" | "snapshot_times" => self.snapshot_times = parse_list(key, v)?,
            "flux" => self.flux = v.parse()?,
            "sigma" => self.sigma = parse_switch(key, v)?,
            "cfl_policy" => self.cfl_policy = v.parse()?,
            "cfl_safety" => self.cfl_safety = parse_f64(key, v)?,
            "threads" => self.threads = Some(parse_count(key, v)? as usize),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Every setting that influences results, in a fixed textual form.
    pub fn canonical(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        format!(
            "lambda={:?};half_width={:?};T={:?};dt_ref={:?};ref_dx={:?};dt_levels={};dx_levels={};paths={};seed={};snapshots={};flux={};sigma={};cfl_policy={};cfl_safety={:?}",
            self.lambda,
            self.half_width,
            self.t_final,
            self.dt_ref,
            self.ref_dx,
            list(&self.dt_levels),
            list(&self.dx_levels),
            self.n_paths,
            self.seed,
            list(&self.snapshot_times),
            self.flux,
            if self.sigma { "on" } else { "off" },
            self.cfl_policy,
            self.cfl_safety
        )
    }

    pub fn problem(&self) -> ProblemSpec {
        let p = ProblemSpec::experiment(self.lambda, self.flux);
        if self.sigma {
            p
        } else {
            p.with_noise(NoiseSpec::off())
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return bad(format!("lambda = {} outside (0, 1)", self.lambda));
        }
        if !(self.half_width > 0.0 && self.t_final > 0.0) {
            return bad("half_width and T must be positive".into());
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return bad(format!("cfl_safety = {} outside (0, 1]", self.cfl_safety));
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        if self.n_paths < 2 && self.sigma {
            return bad("a stochastic study needs at least two paths".into());
        }
        if self.n_paths < 1 {
            return bad("n_paths must be at least 1".into());
        }
        if self.dt_levels.len() != self.dx_levels.len() || self.dt_levels.len() < 2 {
            return bad("dt_levels and dx_levels must pair up, with at least two levels".into());
        }
        for w in self.dx_levels.windows(2).chain(self.dt_levels.windows(2)) {
            if !(w[0] < w[1]) {
                return bad("levels must be strictly ascending".into());
            }
        }
        if self.snapshot_times.is_empty() {
            return bad("at least one snapshot time is required".into());
        }
        let ref_grid = Grid1D::covering(self.half_width, self.ref_dx)?;
        for &dt in self.dt_levels.iter().chain(std::iter::once(&self.dt_ref)) {
            TimeSchedule::new(dt, self.t_final, &self.snapshot_times)?;
            if whole_multiple(dt, self.dt_ref).is_none() {
                return bad(format!("level dt = {dt} is not a multiple of dt_ref = {}", self.dt_ref));
            }
        }
        for &dx in &self.dx_levels {
            Grid1D::covering(self.half_width, dx)?;
            match whole_multiple(dx, self.ref_dx) {
                Some(r) if r >= 2 && ref_grid.k() % r == 0 => {}
                _ => return bad(format!("level dx = {dx} is not a compatible multiple of ref_dx = {}", self.ref_dx)),
            }
        }
        Ok(())
    }
}

/// 16 hex digits of the SHA-256 of the canonical configuration(s).
pub fn config_hash(configs: &[RunConfig]) -> String {
    let mut h = Sha256::new();
    for c in configs {
        h.update(c.canonical().as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Provenance header carried by every output file.
pub fn header_line(config_hash: &str, seed: u64, n_paths: usize) -> String {
    format!("# stochfrac {VERSION} config_hash={config_hash} seed={seed} n_paths={n_paths}")
}

/// One resolution of a study: nominal step, integration step count per
/// nominal step, and the discretization.
#[derive(Debug)]
pub struct Level {
    pub dx: f64,
    pub dt: f64,
    pub substeps: usize,
    pub cfl: CflReport,
    pub disc: Discretization,
}

impl Level {
    pub fn plan(
        problem: Arc<ProblemSpec>,
        half_width: f64,
        dx: f64,
        dt: f64,
        policy: CflPolicy,
        safety: f64,
    ) -> Result<Level> {
        let disc = Discretization::new(problem, Grid1D::covering(half_width, dx)?)?;
        let cfl = disc.cfl(safety)?;
        let limit = disc.monotone_dt_limit();
        let mut substeps = 1;
        if dt > cfl.dt {
            let ratios = CflReport::ratios_for(disc.problem(), disc.kernel(), dx, dt);
            info!(
                "dx={dx:e} dt={dt:e} exceeds cfl_dt={:e} (|f'|dt/dx={:.3}, G0 dt/dx={:.3})",
                cfl.dt, ratios.advective_ratio, ratios.nonlocal_ratio
            );
        }
        match policy {
            CflPolicy::Warn if dt > limit => {
                warn!("dx={dx:e} dt={dt:e} exceeds the monotonicity limit {limit:e}; running verbatim")
            }
            CflPolicy::Substep => {
                while dt / substeps as f64 > limit * (1.0 + 1e-12) {
                    substeps *= 2;
                }
                if substeps > 1 {
                    info!("dx={dx:e} dt={dt:e}: {substeps} substeps of {:e}", dt / substeps as f64);
                }
            }
            CflPolicy::Warn => {}
        }
        Ok(Level { dx, dt, substeps, cfl, disc })
    }

    pub fn step_dt(&self) -> f64 {
        self.dt / self.substeps as f64
    }
}

/// Per-resolution row of a rate table.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub dx: f64,
    pub dt: f64,
    pub substeps: usize,
    pub error: f64,
    pub se: f64,
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub lambda: f64,
    pub rows: Vec<RateRow>,
    pub aborted: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub config_hash: String,
    pub seed: u64,
    pub n_paths: usize,
    pub tables: Vec<RateTable>,
}

/// `log₂(e_k / e_{k-1}) / log₂(dx_k / dx_{k-1})` for `k >= 1`.
pub fn estimate_rate(errors: &[f64], dxs: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != dxs.len() || errors.len() < 2 {
        return Err(Error::InvalidParameter("rates need two or more paired errors and widths".into()));
    }
    if let Some(e) = errors.iter().chain(dxs).find(|&&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidParameter(format!("rates need strictly positive entries, got {e}")));
    }
    Ok((1..errors.len()).map(|k| (errors[k] / errors[k - 1]).log2() / (dxs[k] / dxs[k - 1]).log2()).collect())
}

/// `0.52 E-2` style: two decimals against a fixed power of ten.
fn table_number(x: f64) -> String {
    if x == 0.0 {
        return "0.00 E+0".into();
    }
    // mantissa in [0.1, 10) for powers -2 and -1, matching e.g. "12.5 E-2"
    let e = x.abs().log10().floor() as i32;
    let exp = if e <= -3 { e + 1 } else { -2 };
    let m = x / 10f64.powi(exp);
    format!("{m:.2} E{exp}")
}

impl RateReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", header_line(&self.config_hash, self.seed, self.n_paths))?;
        writeln!(out, "lambda,dx,error,se,rate")?;
        for t in &self.tables {
            for r in &t.rows {
                let rate = r.rate.map(|v| format!("{v:e}")).unwrap_or_default();
                writeln!(out, "{:?},{:e},{:e},{:e},{rate}", t.lambda, r.dx, r.error, r.se)?;
            }
        }
        Ok(())
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", header_line(&self.config_hash, self.seed, self.n_paths))?;
        for t in &self.tables {
            writeln!(out)?;
            writeln!(out, "lambda = {}", t.lambda)?;
            writeln!(out, "{:>10} {:>10} {:>10} {:>6}", "dx", "Error", "(se)", "Rate")?;
            for r in &t.rows {
                let rate = r.rate.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into());
                writeln!(
                    out,
                    "{:>10} {:>10} {:>10} {:>6}",
                    table_number(r.dx),
                    table_number(r.error),
                    format!("{:.1e}", r.se),
                    rate
                )?;
            }
            if t.aborted > 0 {
                writeln!(out, "({} aborted paths excluded)", t.aborted)?;
            }
        }
        Ok(())
    }
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Fraction of aborted paths beyond which a study fails.
pub const MAX_ABORT_FRACTION: f64 = 1e-3;

/// Splits path results into successes and the abort count, failing when
/// too many paths aborted or any failure was not numerical.
fn triage<T>(results: Vec<Result<T>>) -> Result<(Vec<T>, usize)> {
    let total = results.len();
    let mut ok = Vec::with_capacity(total);
    let mut first = None;
    let mut aborted = 0;
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(e) if matches!(e, Error::NonFiniteState { .. }) => {
                aborted += 1;
                first.get_or_insert(e.to_string());
            }
            Err(e) => return Err(e),
        }
    }
    if aborted as f64 > MAX_ABORT_FRACTION * total as f64 {
        return Err(Error::StudyFailed { aborted, total, first: first.unwrap_or_default() });
    }
    if aborted > 0 {
        warn!("{aborted} of {total} paths aborted and are excluded: {}", first.unwrap_or_default());
    }
    Ok((ok, aborted))
}

fn evolve_level(level: &Level, config: &RunConfig, path: Option<&BrownianPath>) -> Result<crate::stepper::Snapshots> {
    let schedule = TimeSchedule::new(level.step_dt(), config.t_final, &config.snapshot_times)?;
    level.disc.evolve(&schedule, path, None)
}

/// Runs the coupled study for one configuration.
pub fn run_error_study(config: &RunConfig) -> Result<RateTable> {
    run_error_study_for(config, Arc::new(config.problem()))
}

/// As [`run_error_study`] with a custom problem in place of the benchmark.
pub fn run_error_study_for(config: &RunConfig, problem: Arc<ProblemSpec>) -> Result<RateTable> {
    config.validate()?;
    problem.validate(-2.0, 2.0)?;
    let plan = |dx, dt| Level::plan(problem.clone(), config.half_width, dx, dt, config.cfl_policy, config.cfl_safety);
    let reference = plan(config.ref_dx, config.dt_ref)?;
    let levels = config
        .dx_levels
        .iter()
        .zip(&config.dt_levels)
        .map(|(&dx, &dt)| plan(dx, dt))
        .collect::<Result<Vec<_>>>()?;
    let dt_fine = levels.iter().chain(std::iter::once(&reference)).map(Level::step_dt).fold(f64::INFINITY, f64::min);
    let n_fine = whole_multiple(config.t_final, dt_fine).expect("dyadic steps divide T");
    let ratios: Vec<usize> =
        levels.iter().map(|l| whole_multiple(l.dx, config.ref_dx).expect("validated")).collect();
    let n_modes = problem.noise.n_modes();
    // without noise every path is the same deterministic run
    let n_runs = if problem.noise.is_off() { 1 } else { config.n_paths };
    info!(
        "lambda={} study: {n_runs} paths, reference dx={:e} ({} substeps), fine dt={dt_fine:e}",
        config.lambda, config.ref_dx, reference.substeps
    );

    let run_path = |pid: u64| -> Result<Vec<Vec<f64>>> {
        let path = if problem.noise.is_off() {
            None
        } else {
            Some(generate_path(config.seed, pid, n_fine, n_modes, dt_fine)?)
        };
        let fine = evolve_level(&reference, config, path.as_ref())?;
        let mut out = Vec::with_capacity(levels.len());
        for (level, &r) in levels.iter().zip(&ratios) {
            let coarse = evolve_level(level, config, path.as_ref())?;
            let d = coarse
                .states
                .iter()
                .zip(&fine.states)
                .map(|(c, f)| l1_distance(c, &restrict(f, r)?))
                .collect::<Result<Vec<_>>>()?;
            out.push(d);
        }
        debug!("path {pid} done");
        Ok(out)
    };

    let pool = thread_pool(config.threads)?;
    let results: Vec<Result<Vec<Vec<f64>>>> = pool.install(|| (0..n_runs as u64).into_par_iter().map(run_path).collect());
    let (paths, aborted) = triage(results)?;

    let mut rows = Vec::with_capacity(levels.len());
    for (li, level) in levels.iter().enumerate() {
        let mut worst = MeanSe { mean: f64::NEG_INFINITY, se: 0.0 };
        for si in 0..config.snapshot_times.len() {
            let column: Vec<f64> = paths.iter().map(|p| p[li][si]).collect();
            let est = if column.len() == 1 { MeanSe { mean: column[0], se: 0.0 } } else { mean_se(&column)? };
            if est.mean > worst.mean {
                worst = est;
            }
        }
        rows.push(RateRow {
            dx: level.dx,
            dt: level.dt,
            substeps: level.substeps,
            error: worst.mean,
            se: worst.se,
            rate: None,
        });
    }
    let errors: Vec<f64> = rows.iter().map(|r| r.error).collect();
    let dxs: Vec<f64> = rows.iter().map(|r| r.dx).collect();
    if let Ok(rates) = estimate_rate(&errors, &dxs) {
        for (row, rate) in rows.iter_mut().skip(1).zip(rates) {
            row.rate = Some(rate);
        }
    }
    Ok(RateTable { lambda: config.lambda, rows, aborted })
}

/// Runs each configuration in turn and bundles the tables with provenance.
pub fn run_studies(configs: &[RunConfig]) -> Result<RateReport> {
    let first = configs.first().ok_or_else(|| Error::Config("no study configured".into()))?;
    let tables = configs.iter().map(run_error_study).collect::<Result<Vec<_>>>()?;
    Ok(RateReport { config_hash: config_hash(configs), seed: first.seed, n_paths: first.n_paths, tables })
}

/// A priori checks at one fixed grid across the configured time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct AprioriSuiteReport {
    pub lambda: f64,
    pub dx: f64,
    /// In order of decreasing `dt`.
    pub levels: Vec<(f64, AprioriReport)>,
    /// Mean overshoot never grows by more than 2 combined SE as `dt` shrinks.
    pub overshoot_monotone: bool,
    pub config_hash: String,
    pub seed: u64,
}

/// Bound on the experiment's state range beyond which the noise vanishes.
pub const STATE_BOUND: f64 = 1.0;

impl AprioriSuiteReport {
    pub fn verdict(&self) -> Verdict {
        let worst = self.levels.iter().map(|(_, r)| r.verdict()).fold(Verdict::Pass, |a, v| match (a, v) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Warn, _) | (_, Verdict::Warn) => Verdict::Warn,
            _ => Verdict::Pass,
        });
        if self.overshoot_monotone {
            worst
        } else {
            Verdict::Fail
        }
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.levels.first().map_or(0, |(_, r)| r.n_paths);
        writeln!(out, "{}", header_line(&self.config_hash, self.seed, n))?;
        writeln!(out, "lambda = {}, dx = {:e}", self.lambda, self.dx)?;
        for (dt, r) in &self.levels {
            writeln!(out)?;
            writeln!(out, "dt = {dt:e}")?;
            r.write_text(&mut out)?;
        }
        writeln!(out)?;
        writeln!(out, "overshoot non-increasing in dt: {}", if self.overshoot_monotone { "yes" } else { "no" })?;
        writeln!(out, "suite: {}", self.verdict())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.levels.first().map_or(0, |(_, r)| r.n_paths);
        writeln!(out, "{}", header_line(&self.config_hash, self.seed, n))?;
        writeln!(out, "dt,estimate,t,mean,se,bound,verdict")?;
        for (dt, r) in &self.levels {
            for c in &r.checks {
                writeln!(out, "{dt:e},{},{},{:e},{:e},{:e},{}", c.estimate, c.t, c.lhs, c.se, c.bound, c.verdict)?;
            }
            writeln!(out, "{dt:e},overshoot,,{:e},{:e},{:e},", r.overshoot.mean, r.overshoot.se, r.worst_overshoot)?;
        }
        Ok(())
    }
}

/// Runs the experiment problem verbatim (no substeps) on the grid of width
/// `dx` at every configured time step, coupling all steps to one Brownian
/// path per Monte Carlo index.
pub fn run_apriori_suite(config: &RunConfig, dx: f64) -> Result<AprioriSuiteReport> {
    let mut dts = config.dt_levels.clone();
    dts.sort_by(|a, b| b.total_cmp(a));
    if dts.is_empty() || config.n_paths < 2 {
        return Err(Error::InvalidParameter("the suite needs time steps and at least two paths".into()));
    }
    let problem = Arc::new(config.problem());
    problem.validate(-2.0, 2.0)?;
    let disc = Discretization::new(problem.clone(), Grid1D::covering(config.half_width, dx)?)?;
    let u0 = disc.initial_condition()?;
    let schedules =
        dts.iter().map(|&dt| TimeSchedule::new(dt, config.t_final, &config.snapshot_times)).collect::<Result<Vec<_>>>()?;
    let dt_fine = *dts.last().expect("non-empty");
    let limit = disc.monotone_dt_limit();
    for &dt in &dts {
        if dt > limit {
            warn!("suite dt={dt:e} exceeds the monotonicity limit {limit:e} at dx={dx:e}; running verbatim");
        }
    }
    let n_fine = whole_multiple(config.t_final, dt_fine).expect("validated schedule");
    let n_modes = problem.noise.n_modes();
    let run_path = |pid: u64| -> Result<Vec<diagnostics::PathDiagnostics>> {
        let path = if problem.noise.is_off() {
            None
        } else {
            Some(generate_path(config.seed, pid, n_fine, n_modes, dt_fine)?)
        };
        schedules
            .iter()
            .map(|s| disc.evolve(s, path.as_ref(), None).map(|snaps| diagnostics::collect(pid, &snaps)))
            .collect()
    };
    let pool = thread_pool(config.threads)?;
    let results: Vec<_> = pool.install(|| (0..config.n_paths as u64).into_par_iter().map(run_path).collect());
    let (paths, _) = triage(results)?;
    let mut levels = Vec::with_capacity(dts.len());
    for (k, &dt) in dts.iter().enumerate() {
        let per_level: Vec<_> = paths.iter().map(|p| p[k].clone()).collect();
        let stats = diagnostics::aggregate(&per_level, STATE_BOUND)?;
        levels.push((dt, check_apriori(&stats, &u0, STATE_BOUND)));
    }
    let overshoot_monotone = levels.windows(2).all(|w| {
        let (a, b) = (w[0].1.overshoot, w[1].1.overshoot);
        b.mean <= a.mean + 2.0 * (a.se * a.se + b.se * b.se).sqrt()
    });
    Ok(AprioriSuiteReport {
        lambda: config.lambda,
        dx,
        levels,
        overshoot_monotone,
        config_hash: config_hash(std::slice::from_ref(config)),
        seed: config.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_of_power_laws() {
        let dxs = [0.125, 0.25, 0.5, 1.0];
        let lin: Vec<f64> = dxs.iter().map(|d| 3.0 * d).collect();
        assert!(estimate_rate(&lin, &dxs).unwrap().iter().all(|&r| (r - 1.0).abs() < 1e-15));
        let root: Vec<f64> = dxs.iter().map(|d: &f64| 0.7 * d.sqrt()).collect();
        assert!(estimate_rate(&root, &dxs).unwrap().iter().all(|&r| (r - 0.5).abs() < 1e-15));
        assert!(estimate_rate(&[1.0, 0.0], &[1.0, 2.0]).is_err());
        assert!(estimate_rate(&[1.0, -1.0], &[1.0, 2.0]).is_err());
        assert!(estimate_rate(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn reference_rates_agree_with_reference_errors_up_to_rounding() {
        // two significant digits in the errors: each lies within ±0.005E-2
        let dxs = [0.78e-2, 1.56e-2, 3.12e-2, 6.25e-2, 12.5e-2];
        let errors = [0.52e-2, 1.07e-2, 2.05e-2, 3.81e-2, 6.97e-2];
        let printed = [1.02, 0.93, 0.89, 0.88];
        let h = 0.005e-2;
        let exact_dx: Vec<f64> = [768.0, 384.0, 192.0, 96.0, 48.0].iter().map(|n| 6.0 / n).collect();
        let central = estimate_rate(&errors, &exact_dx).unwrap();
        for k in 1..5 {
            let lo = ((errors[k] - h) / (errors[k - 1] + h)).log2();
            let hi = ((errors[k] + h) / (errors[k - 1] - h)).log2();
            assert!(central[k - 1] >= lo && central[k - 1] <= hi);
            assert!((central[k - 1] - printed[k - 1]).abs() < 0.025, "row {k}");
            // the last printed rate sits 0.001 above what its rounded errors allow
            let slack = if k == 4 { 0.01 } else { 0.005 };
            assert!(printed[k - 1] >= lo - slack && printed[k - 1] <= hi + slack, "row {k}");
        }
        assert!(dxs.iter().zip(&exact_dx).all(|(a, b)| (a - b).abs() < 0.01e-2));
    }

    #[test]
    fn table_numbers_use_a_fixed_exponent() {
        assert_eq!(table_number(6.0 / 768.0), "0.78 E-2");
        assert_eq!(table_number(0.125), "12.50 E-2");
        assert_eq!(table_number(0.0697), "6.97 E-2");
        assert_eq!(table_number(0.00052), "0.52 E-3");
    }

    #[test]
    fn presets_and_defaults_validate() {
        RunConfig::default().validate().unwrap();
        for name in RunConfig::preset_names() {
            for c in RunConfig::preset(&name).unwrap() {
                c.validate().unwrap();
            }
        }
        assert_eq!(RunConfig::preset("desk").unwrap().len(), 5);
        let d = &RunConfig::preset("desk-lambda08").unwrap()[0];
        assert_eq!((d.n_paths, d.ref_dx), (200, 6.0 / 1536.0));
        assert!(RunConfig::preset("paper-lambda09").is_err());
    }

    #[test]
    fn validation_catches_misaligned_levels() {
        let mut c = RunConfig::default();
        c.dt_levels[0] = 0.003;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.dx_levels[2] = 6.0 / 200.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.snapshot_times = vec![0.3];
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.dx_levels.pop();
        assert!(c.validate().is_err());
    }

    #[test]
    fn settings_round_trip_and_unknown_keys_are_named() {
        let mut c = RunConfig::default();
        c.set("lambda", " 0.3").unwrap();
        c.set("dt_levels", "0.125, 0.25").unwrap();
        c.set("sigma", "off").unwrap();
        c.set("flux", "eo").unwrap();
        assert_eq!((c.lambda, c.dt_levels.clone(), c.sigma, c.flux), (0.3, vec![0.125, 0.25], false, FluxScheme::EngquistOsher));
        let err = c.set("lamda", "0.3").unwrap_err();
        assert!(err.to_string().contains("lamda"));
        assert!(c.set("paths", "-3").is_err());
    }

    #[test]
    fn hash_ignores_threads_but_not_seed() {
        let a = RunConfig::default();
        let b = RunConfig { threads: Some(3), ..a.clone() };
        let c = RunConfig { seed: 7, ..a.clone() };
        assert_eq!(config_hash(&[a.clone()]), config_hash(&[b]));
        assert_ne!(config_hash(&[a.clone()]), config_hash(&[c]));
        assert_eq!(config_hash(&[a]).len(), 16);
    }

    #[test]
    fn substeps_bring_the_step_under_the_limit() {
        let p = Arc::new(ProblemSpec::experiment(0.8, FluxScheme::Godunov));
        let l = Level::plan(p.clone(), 3.0, 6.0 / 768.0, 2f64.powi(-9), CflPolicy::Substep, 0.5).unwrap();
        assert!(l.substeps > 1 && l.substeps.is_power_of_two());
        assert!(l.step_dt() <= l.disc.monotone_dt_limit());
        assert!(2.0 * l.step_dt() > l.disc.monotone_dt_limit());
        let w = Level::plan(p, 3.0, 6.0 / 768.0, 2f64.powi(-9), CflPolicy::Warn, 0.5).unwrap();
        assert_eq!(w.substeps, 1);
        let p = Arc::new(ProblemSpec::experiment(0.5, FluxScheme::Godunov));
        let l = Level::plan(p, 3.0, 6.0 / 768.0, 2f64.powi(-9), CflPolicy::Substep, 0.5).unwrap();
        assert_eq!(l.substeps, 1);
    }

    #[test]
    fn frozen_study_measures_projection_discrepancy_only() {
        // f = 0, A = 0, σ = 0: every level keeps its projection of u0
        let config = RunConfig {
            sigma: false,
            ref_dx: 6.0 / 384.0,
            dt_ref: 2f64.powi(-6),
            dx_levels: vec![6.0 / 192.0, 6.0 / 96.0, 6.0 / 48.0],
            dt_levels: vec![2f64.powi(-6), 2f64.powi(-5), 2f64.powi(-4)],
            n_paths: 1,
            ..RunConfig::default()
        };
        let problem = Arc::new(
            config
                .problem()
                .with_flux(crate::flux::FluxSpec::zero())
                .with_diffusion(crate::function::ScalarFn::zero()),
        );
        let table = run_error_study_for(&config, problem).unwrap();
        let e: Vec<f64> = table.rows.iter().map(|r| r.error).collect();
        assert!(e.iter().all(|&x| x > 0.0 && x < 1e-3), "{e:?}");
        assert!(table.rows.iter().all(|r| r.se == 0.0));
    }
}
