//! Brownian increments and the multiplicative noise term.
//!
//! Increments are generated at the finest time step of a study and summed
//! upward, so every resolution of one Monte Carlo path sees the same
//! Brownian motion. Every draw is addressed by `(seed, path_id, step, mode)`:
//! the path id selects a ChaCha stream and the `(step, mode)` pair fixes the
//! word position inside it, so the same tuple yields the same number no
//! matter which thread asks or in what order.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::function::ScalarFn;
use crate::mesh::LatticeFunction;
use crate::special::pairwise_sum;

// each normal draw consumes two u64, i.e. four 32-bit words of the stream
const WORDS_PER_DRAW: u128 = 4;

fn rng_for(seed: u64, path_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_id);
    rng
}

pub(crate) fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box–Muller with u1 in (0, 1] and u2 in [0, 1)
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// The standard normal draw behind fine increment `(step, mode)` of a path.
pub fn standard_draw(seed: u64, path_id: u64, step: usize, mode: usize, n_modes: usize) -> f64 {
    let mut rng = rng_for(seed, path_id);
    rng.set_word_pos((step * n_modes + mode) as u128 * WORDS_PER_DRAW);
    standard_normal(&mut rng)
}

/// Fine-level Brownian increments of one Monte Carlo path.
#[derive(Debug, Clone)]
pub struct BrownianPath {
    dt_fine: f64,
    n_modes: usize,
    seed: u64,
    path_id: u64,
    // step-major: increments[step * n_modes + mode]
    increments: Vec<f64>,
}

/// Draws `n_fine_steps` increments of variance `dt_fine` for each of
/// `n_modes` independent Brownian motions.
pub fn generate_path(seed: u64, path_id: u64, n_fine_steps: usize, n_modes: usize, dt_fine: f64) -> Result<BrownianPath> {
    if n_fine_steps < 1 || n_modes < 1 {
        return Err(Error::InvalidParameter("a path needs at least one step and one mode".into()));
    }
    if !(dt_fine > 0.0) {
        return Err(Error::InvalidParameter(format!("fine step must be positive, got {dt_fine}")));
    }
    let mut rng = rng_for(seed, path_id);
    let scale = dt_fine.sqrt();
    let increments = (0..n_fine_steps * n_modes).map(|_| scale * standard_normal(&mut rng)).collect();
    Ok(BrownianPath { dt_fine, n_modes, seed, path_id, increments })
}

impl BrownianPath {
    pub fn dt_fine(&self) -> f64 {
        self.dt_fine
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_steps(&self) -> usize {
        self.increments.len() / self.n_modes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path_id(&self) -> u64 {
        self.path_id
    }

    pub fn fine(&self, step: usize, mode: usize) -> f64 {
        self.increments[step * self.n_modes + mode]
    }

    /// Number of fine steps in one step of size `level_dt`.
    pub fn level_ratio(&self, level_dt: f64) -> Result<usize> {
        let ratio = level_dt / self.dt_fine;
        let rounded = ratio.round();
        if rounded < 1.0 || (ratio - rounded).abs() > 1e-9 * rounded {
            return Err(Error::MisalignedLevel { level_dt, dt_fine: self.dt_fine });
        }
        Ok(rounded as usize)
    }

    fn window(&self, ratio: usize, n: usize, mode: usize, buf: &mut Vec<f64>) -> f64 {
        buf.clear();
        buf.extend((n * ratio..(n + 1) * ratio).map(|s| self.fine(s, mode)));
        pairwise_sum(buf)
    }

    /// Increment over `[n level_dt, (n+1) level_dt)`: the pairwise sum of the
    /// fine increments in the window. Along dyadic levels each coarse
    /// increment is bit-for-bit the sum of its two halves.
    pub fn coarse_increment(&self, level_dt: f64, n: usize, mode: usize) -> Result<f64> {
        let ratio = self.level_ratio(level_dt)?;
        if (n + 1) * ratio > self.n_steps() || mode >= self.n_modes {
            return Err(Error::WindowOutOfRange { window: n, level_dt });
        }
        Ok(self.window(ratio, n, mode, &mut Vec::with_capacity(ratio)))
    }

    /// All increments at step `level_dt`, step-major like the fine array.
    pub fn aggregate(&self, level_dt: f64) -> Result<Vec<f64>> {
        let ratio = self.level_ratio(level_dt)?;
        let n_level = self.n_steps() / ratio;
        let mut buf = Vec::with_capacity(ratio);
        let mut out = Vec::with_capacity(n_level * self.n_modes);
        for n in 0..n_level {
            for mode in 0..self.n_modes {
                out.push(self.window(ratio, n, mode, &mut buf));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NoiseMode {
    Scalar,
    FiniteCylindrical,
}

/// Multiplicative noise `σ(u) dW` (scalar) or `Σ_k h_k(u) dβ_k`
/// (cylindrical, truncated to finitely many modes).
#[derive(Debug, Clone)]
pub struct NoiseSpec {
    mode: NoiseMode,
    coefficients: Vec<ScalarFn>,
    /// States beyond which every coefficient vanishes.
    pub sigma_cutoff: f64,
}

impl NoiseSpec {
    pub fn scalar(sigma: ScalarFn, sigma_cutoff: f64) -> Self {
        Self { mode: NoiseMode::Scalar, coefficients: vec![sigma], sigma_cutoff }
    }

    pub fn off() -> Self {
        Self::scalar(ScalarFn::zero(), 0.0)
    }

    /// Modes `h_k = a_k · base` for the given square-summable coefficients.
    pub fn cylindrical(base: ScalarFn, amplitudes: &[f64], sigma_cutoff: f64) -> Self {
        let coefficients = amplitudes
            .iter()
            .enumerate()
            .map(|(k, &a)| {
                let b = base.clone();
                ScalarFn::new(format!("{}*{a}#{k}", base.name()), a.abs() * base.lipschitz(), move |u| a * b.eval(u))
            })
            .collect();
        Self { mode: NoiseMode::FiniteCylindrical, coefficients, sigma_cutoff }
    }

    pub fn mode(&self) -> &NoiseMode {
        &self.mode
    }

    pub fn n_modes(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[ScalarFn] {
        &self.coefficients
    }

    pub fn is_off(&self) -> bool {
        self.coefficients.iter().all(ScalarFn::is_zero)
    }

    /// Lipschitz constant of the combined coefficient, `(Σ_k L_k²)^{1/2}`.
    pub fn lipschitz(&self) -> f64 {
        self.coefficients.iter().map(|c| c.lipschitz().powi(2)).sum::<f64>().sqrt()
    }

    /// Sampled check that every coefficient vanishes beyond the cutoff.
    pub fn respects_cutoff(&self, reach: f64, samples: usize) -> bool {
        let m = self.sigma_cutoff;
        (0..=samples).all(|k| {
            let u = m + 1e-12 + reach * k as f64 / samples as f64;
            self.coefficients.iter().all(|c| c.eval(u) == 0.0 && c.eval(-u) == 0.0)
        })
    }

    /// Sampled check of the declared Lipschitz constants on `[lo, hi]`.
    pub fn lipschitz_holds(&self, lo: f64, hi: f64, samples: usize) -> bool {
        self.coefficients.iter().all(|c| c.sampled_lipschitz(lo, hi, samples) <= c.lipschitz() * (1.0 + 1e-9))
    }

    /// `out[i] += Σ_k h_k(U_i) ΔW_k` for one step's increments `dw[k]`.
    pub(crate) fn accumulate(&self, u: &[f64], dw: &[f64], out: &mut [f64]) {
        for (c, &w) in self.coefficients.iter().zip(dw) {
            if w == 0.0 || c.is_zero() {
                continue;
            }
            for (o, &v) in out.iter_mut().zip(u) {
                *o += c.eval(v) * w;
            }
        }
    }
}

/// The noise contribution of step `n` at time step `level_dt`.
pub fn noise_term(
    spec: &NoiseSpec,
    u: &LatticeFunction,
    path: &BrownianPath,
    level_dt: f64,
    n: usize,
) -> Result<LatticeFunction> {
    let dw = (0..spec.n_modes())
        .map(|k| path.coarse_increment(level_dt, n, k))
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![0.0; u.values().len()];
    spec.accumulate(u.values(), &dw, &mut out);
    Ok(LatticeFunction::from_raw(*u.grid(), out))
}
