//! Per-path monitors and their ensemble statistics: L¹/L² norms, BV
//! seminorm, extreme values and mass at each snapshot, checked against the
//! a priori bounds the scheme should satisfy in expectation.

use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::mesh::{bv_seminorm, LatticeFunction};
use crate::stepper::Snapshots;

/// Monitored quantities, in report column order.
pub const FIELDS: [&str; 6] = ["l1", "l2", "bv", "min_u", "max_u", "mass"];

/// Monitored quantities of one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotDiagnostics {
    pub t: f64,
    pub l1: f64,
    pub l2: f64,
    pub bv: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub mass: f64,
}

impl SnapshotDiagnostics {
    pub fn of(t: f64, u: &LatticeFunction) -> Self {
        Self { t, l1: u.l1_norm(), l2: u.lp_norm(2.0), bv: bv_seminorm(u), min_u: u.min(), max_u: u.max(), mass: u.mass() }
    }

    fn fields(&self) -> [f64; 6] {
        [self.l1, self.l2, self.bv, self.min_u, self.max_u, self.mass]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathDiagnostics {
    pub path_id: u64,
    pub snapshots: Vec<SnapshotDiagnostics>,
    /// Extreme cell values over every step, not only the snapshots.
    pub running_min: f64,
    pub running_max: f64,
}

impl PathDiagnostics {
    /// Worst excursion outside `[0, m]` over the whole run.
    pub fn overshoot(&self, m: f64) -> f64 {
        (self.running_max - m).max(-self.running_min).max(0.0)
    }
}

pub fn collect(path_id: u64, snaps: &Snapshots) -> PathDiagnostics {
    let snapshots = snaps.times.iter().zip(&snaps.states).map(|(&t, u)| SnapshotDiagnostics::of(t, u)).collect();
    PathDiagnostics { path_id, snapshots, running_min: snaps.running_min, running_max: snaps.running_max }
}

/// Sample mean and its standard error `s/√n` (with `n - 1` in `s²`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

/// Mean and standard error of `values`, independent of their order: the
/// values are sorted before summation. Requires at least two values.
pub fn mean_se(values: &[f64]) -> Result<MeanSe> {
    let n = values.len();
    if n < 2 {
        return Err(Error::EnsembleTooSmall(n));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v[0] == v[n - 1] {
        return Ok(MeanSe { mean: v[0], se: 0.0 });
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    let mut dev: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
    dev.sort_by(f64::total_cmp);
    let var = dev.iter().sum::<f64>() / (n - 1) as f64;
    Ok(MeanSe { mean, se: (var / n as f64).sqrt() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotStats {
    pub t: f64,
    /// Indexed as [`FIELDS`].
    pub fields: [MeanSe; 6],
    /// Smallest `min_u` and largest `max_u` over all paths.
    pub min_u: f64,
    pub max_u: f64,
}

impl SnapshotStats {
    pub fn field(&self, name: &str) -> Option<MeanSe> {
        FIELDS.iter().position(|&f| f == name).map(|k| self.fields[k])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub n_paths: usize,
    pub snapshots: Vec<SnapshotStats>,
    /// Per-path worst excursion outside `[0, m]` for the `m` given to
    /// [`aggregate`].
    pub overshoot: MeanSe,
    pub worst_overshoot: f64,
}

/// Ensemble statistics over paths sharing one grid and snapshot set.
pub fn aggregate(paths: &[PathDiagnostics], m: f64) -> Result<EnsembleStats> {
    let first = paths.first().ok_or(Error::EnsembleTooSmall(0))?;
    if paths.len() < 2 {
        return Err(Error::EnsembleTooSmall(paths.len()));
    }
    let times: Vec<f64> = first.snapshots.iter().map(|s| s.t).collect();
    for p in paths {
        if p.snapshots.len() != times.len() || p.snapshots.iter().zip(&times).any(|(s, &t)| s.t != t) {
            return Err(Error::InvalidParameter(format!("path {} has a different snapshot set", p.path_id)));
        }
    }
    let mut snapshots = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        let mut fields = [MeanSe { mean: 0.0, se: 0.0 }; 6];
        for (f, slot) in fields.iter_mut().enumerate() {
            let column: Vec<f64> = paths.iter().map(|p| p.snapshots[k].fields()[f]).collect();
            *slot = mean_se(&column)?;
        }
        let min_u = paths.iter().map(|p| p.snapshots[k].min_u).fold(f64::INFINITY, f64::min);
        let max_u = paths.iter().map(|p| p.snapshots[k].max_u).fold(f64::NEG_INFINITY, f64::max);
        snapshots.push(SnapshotStats { t, fields, min_u, max_u });
    }
    let over: Vec<f64> = paths.iter().map(|p| p.overshoot(m)).collect();
    let worst_overshoot = over.iter().copied().fold(0.0, f64::max);
    Ok(EnsembleStats { n_paths: paths.len(), snapshots, overshoot: mean_se(&over)?, worst_overshoot })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Warn,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pass => "PASS",
            Self::Warn => "WARN",
            Self::Fail => "FAIL",
        })
    }
}

/// One inequality `lhs <= bound + 3 se` at one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub estimate: &'static str,
    pub t: f64,
    pub lhs: f64,
    pub se: f64,
    pub bound: f64,
    pub verdict: Verdict,
}

/// Statistical tolerance in standard errors.
pub const SE_BAND: f64 = 3.0;
/// Amplification allowed before a BV check fails outright.
pub const BV_RELAXED: f64 = 1.1;

#[derive(Debug, Clone, PartialEq)]
pub struct AprioriReport {
    pub checks: Vec<BoundCheck>,
    pub m: f64,
    pub overshoot: MeanSe,
    pub worst_overshoot: f64,
    pub n_paths: usize,
}

impl AprioriReport {
    pub fn verdict(&self) -> Verdict {
        self.checks.iter().map(|c| c.verdict).fold(Verdict::Pass, |acc, v| match (acc, v) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Warn, _) | (_, Verdict::Warn) => Verdict::Warn,
            _ => Verdict::Pass,
        })
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "a priori checks over {} paths (tolerance {SE_BAND} SE)", self.n_paths)?;
        for c in &self.checks {
            writeln!(
                out,
                "  {:<5} t={:<5} E={:.6e} se={:.2e} bound={:.6e}  {}",
                c.estimate, c.t, c.lhs, c.se, c.bound, c.verdict
            )?;
        }
        writeln!(
            out,
            "  max principle on [0, {}]: mean overshoot {:.3e} (se {:.2e}), worst {:.3e}",
            self.m, self.overshoot.mean, self.overshoot.se, self.worst_overshoot
        )?;
        writeln!(out, "overall: {}", self.verdict())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "estimate,t,mean,se,bound,verdict")?;
        for c in &self.checks {
            writeln!(out, "{},{},{:e},{:e},{:e},{}", c.estimate, c.t, c.lhs, c.se, c.bound, c.verdict)?;
        }
        writeln!(out, "overshoot,,{:e},{:e},{:e},", self.overshoot.mean, self.overshoot.se, self.worst_overshoot)
    }
}

/// `E‖u(t)‖_{L¹} <= ‖u₀‖_{L¹}` and `E|u(t)|_BV <= |u₀|_BV` at every snapshot,
/// each with a `3 SE` band. A BV check failing at factor 1 is retried at
/// factor 1.1 and reported as WARN if it holds there. Excursions outside
/// `[0, m]` are reported, not judged.
pub fn check_apriori(stats: &EnsembleStats, u0: &LatticeFunction, m: f64) -> AprioriReport {
    let (l1_0, bv_0) = (u0.l1_norm(), bv_seminorm(u0));
    let mut checks = Vec::new();
    for s in &stats.snapshots {
        let l1 = s.field("l1").expect("known field");
        let within = |e: MeanSe, b: f64| e.mean <= b + SE_BAND * e.se;
        checks.push(BoundCheck {
            estimate: "l1",
            t: s.t,
            lhs: l1.mean,
            se: l1.se,
            bound: l1_0,
            verdict: if within(l1, l1_0) { Verdict::Pass } else { Verdict::Fail },
        });
        let bv = s.field("bv").expect("known field");
        let (bound, verdict) = if within(bv, bv_0) {
            (bv_0, Verdict::Pass)
        } else if within(bv, BV_RELAXED * bv_0) {
            (BV_RELAXED * bv_0, Verdict::Warn)
        } else {
            (BV_RELAXED * bv_0, Verdict::Fail)
        };
        checks.push(BoundCheck { estimate: "bv", t: s.t, lhs: bv.mean, se: bv.se, bound, verdict });
    }
    AprioriReport {
        checks,
        m,
        overshoot: stats.overshoot,
        worst_overshoot: stats.worst_overshoot,
        n_paths: stats.n_paths,
    }
}
