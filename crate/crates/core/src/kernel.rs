//! Discrete fractional Laplacian weights on a uniform grid.
//!
//! The weight `G̃_i` couples cells whose indices differ by `i`. It is the
//! integral over cell 0 of the measure `dμ(z) = d_λ |z|^{-1-2λ} dz`
//! (restricted to `|z| > dx/2`) of the displacements landing in cell `i`,
//! with the opposite sign, plus the total outflow on the diagonal. Closed
//! forms exist for every `λ ∈ (0, 1)`; [`quadrature_oracle`] evaluates the
//! defining double integral numerically and is used to check them.
//!
//! Facts relied on elsewhere: `G̃_i = G̃_{-i}`, `G̃_0 > 0`, `G̃_i < 0` for
//! `i ≠ 0`, and `Σ_i G̃_i = 0`, so the tail beyond `n` is
//! `Σ_{j ≥ n} G̃_j = -½ Σ_{|j| < n} G̃_j`.

use std::f64::consts::{LN_2, PI};
use std::io::Write;

use crate::error::{Error, Result};
use crate::special::{gamma, integrate_adaptive};

/// Within this distance of 1/2 (but not at 1/2) the generic closed form loses
/// too many digits and weights are computed by quadrature instead.
pub const HALF_ORDER_BAND: f64 = 1e-4;

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("fractional order must lie in (0, 1), got {lambda}")))
    }
}

/// Normalisation `d_λ = 2^{2λ} Γ((1+2λ)/2) / (√π Γ(1-λ))`.
pub fn d_lambda(lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(2f64.powf(2.0 * lambda) * gamma(0.5 + lambda) / (PI.sqrt() * gamma(1.0 - lambda)))
}

/// Closed-form weight `G̃_i`.
fn closed_form(lambda: f64, dx: f64, d: f64, i: u64) -> f64 {
    if lambda == 0.5 {
        return match i {
            0 => d * (2.0 + 2.0 * LN_2),
            1 => -d,
            _ => {
                let i = i as f64;
                d * (-1.0 / (i * i)).ln_1p()
            }
        };
    }
    let p = 1.0 - 2.0 * lambda;
    let c = d * dx.powf(p) / (2.0 * lambda * p);
    match i {
        0 => 2.0 * c * (1.0 - lambda * 2f64.powf(2.0 * lambda)),
        1 => c * (2f64.powf(p) + lambda * 2f64.powf(2.0 * lambda) - 2.0),
        _ => {
            // -(i-1)^p + 2 i^p - (i+1)^p = -i^p [expm1(p ln(1-1/i)) + expm1(p ln(1+1/i))]
            let x = i as f64;
            let lo = (p * (-1.0 / x).ln_1p()).exp_m1();
            let hi = (p * (1.0 / x).ln_1p()).exp_m1();
            c * x.powf(p) * (lo + hi)
        }
    }
}

/// Weight `G̃_i` for order `lambda` and cell width `dx`.
pub fn weight(lambda: f64, dx: f64, i: i64) -> Result<f64> {
    check_lambda(lambda)?;
    if !(dx > 0.0) {
        return Err(Error::InvalidParameter(format!("cell width must be positive, got {dx}")));
    }
    let d = d_lambda(lambda)?;
    weight_with(lambda, dx, d, i.unsigned_abs())
}

fn weight_with(lambda: f64, dx: f64, d: f64, i: u64) -> Result<f64> {
    if lambda != 0.5 && (lambda - 0.5).abs() < HALF_ORDER_BAND {
        let scale = d * dx.powf(1.0 - 2.0 * lambda) / (1.0 + i as f64).powi(3);
        quadrature_oracle(lambda, dx, i as i64, 1e-12 * scale)
    } else {
        Ok(closed_form(lambda, dx, d, i))
    }
}

/// `μ` of the set of `z` in `[lo, hi)` with `|z| > r` where `r = dx/2`.
fn measure_outside(lo: f64, hi: f64, r: f64, lambda: f64, d: f64) -> f64 {
    // μ([p, q]) for 0 < p < q, written to avoid cancellation when p ≈ q
    let positive = |p: f64, q: f64| -> f64 {
        if q <= p {
            0.0
        } else if q.is_infinite() {
            d * p.powf(-2.0 * lambda) / (2.0 * lambda)
        } else {
            -d * p.powf(-2.0 * lambda) * (-2.0 * lambda * (q / p).ln()).exp_m1() / (2.0 * lambda)
        }
    };
    let right = positive(lo.max(r), hi);
    let left = positive((-hi).max(r), -lo);
    right + left
}

/// Evaluates `G̃_i` directly from its defining double integral: the inner
/// `z`-integral in closed form, the outer integral over cell 0 by adaptive
/// Gauss–Kronrod quadrature to absolute accuracy `tol`.
pub fn quadrature_oracle(lambda: f64, dx: f64, i: i64, tol: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if !(dx > 0.0 && tol > 0.0) {
        return Err(Error::InvalidParameter("dx and tol must be positive".into()));
    }
    let d = d_lambda(lambda)?;
    let r = 0.5 * dx;
    let target_lo = (i as f64 - 0.5) * dx;
    let target_hi = (i as f64 + 0.5) * dx;
    let total = if i == 0 { measure_outside(f64::NEG_INFINITY, f64::INFINITY, r, lambda, d) } else { 0.0 };
    let integrand = |x: f64| {
        // displacements z with x + z inside cell i
        total - measure_outside(target_lo - x, target_hi - x, r, lambda, d)
    };
    // the integrand has a kink at x = 0 when |i| <= 1
    let left = integrate_adaptive(integrand, -r, 0.0, 0.5 * tol, 4000)?;
    let right = integrate_adaptive(integrand, 0.0, r, 0.5 * tol, 4000)?;
    Ok(left + right)
}

/// `Σ_{j ≥ n} G̃_j`, via the zero total sum: `-½ (G̃_0 + 2 Σ_{0<j<n} G̃_j)`.
pub fn tail_sum(lambda: f64, dx: f64, n: usize) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidParameter("tail index must be at least 1".into()));
    }
    Ok(WeightKernel::new(lambda, dx, n)?.tail(n))
}

/// Telescoped closed form of the tail `Σ_{j ≥ n} G̃_j` for `n ≥ 2`:
/// `-c (n^p - (n-1)^p)` with `p = 1 - 2λ`, or `-d ln(n/(n-1))` at `λ = 1/2`.
pub fn tail_sum_direct(lambda: f64, dx: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter("direct tail needs n >= 2".into()));
    }
    let d = d_lambda(lambda)?;
    let x = n as f64;
    if lambda == 0.5 {
        return Ok(-d * (1.0 / (x - 1.0)).ln_1p());
    }
    let p = 1.0 - 2.0 * lambda;
    let c = d * dx.powf(p) / (2.0 * lambda * p);
    // n^p - (n-1)^p = -n^p expm1(p ln(1 - 1/n))
    Ok(c * x.powf(p) * (p * (-1.0 / x).ln_1p()).exp_m1())
}

/// Precomputed one-sided weights `G̃_0..=G̃_{i_max}` with prefix sums.
#[derive(Debug, Clone)]
pub struct WeightKernel {
    lambda: f64,
    dx: f64,
    d_lambda: f64,
    weights: Vec<f64>,
    // prefix[n] = Σ_{|j| < n} G̃_j for n = 1..=i_max + 1 (prefix[0] unused)
    prefix: Vec<f64>,
}

impl WeightKernel {
    pub fn new(lambda: f64, dx: f64, i_max: usize) -> Result<Self> {
        check_lambda(lambda)?;
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::InvalidParameter(format!("cell width must be positive, got {dx}")));
        }
        let d = d_lambda(lambda)?;
        let weights = (0..=i_max as u64)
            .map(|i| weight_with(lambda, dx, d, i))
            .collect::<Result<Vec<_>>>()?;
        let mut prefix = vec![0.0; i_max + 2];
        prefix[1] = weights[0];
        for n in 2..=i_max + 1 {
            prefix[n] = prefix[n - 1] + 2.0 * weights[n - 1];
        }
        Ok(Self { lambda, dx, d_lambda: d, weights, prefix })
    }

    /// Kernel covering every offset on a grid of half-width `k`.
    pub fn for_half_width(lambda: f64, dx: f64, k: usize) -> Result<Self> {
        Self::new(lambda, dx, 2 * k)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn d_lambda(&self) -> f64 {
        self.d_lambda
    }

    pub fn i_max(&self) -> usize {
        self.weights.len() - 1
    }

    /// `G̃_i`, accessed by `|i|`.
    pub fn get(&self, i: isize) -> f64 {
        self.weights[i.unsigned_abs()]
    }

    pub fn diagonal(&self) -> f64 {
        self.weights[0]
    }

    pub fn one_sided(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ_{|j| < n} G̃_j` for `1 <= n <= i_max + 1`; zero for `n = 0`.
    pub fn symmetric_partial_sum(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            self.prefix[n]
        }
    }

    /// `Σ_{j ≥ n} G̃_j` for `0 <= n <= i_max + 1`. At `n = 0` this is
    /// `G̃_0 + Σ_{j ≥ 1} G̃_j = G̃_0 / 2`.
    pub fn tail(&self, n: usize) -> f64 {
        if n == 0 {
            self.weights[0] - 0.5 * self.prefix[1]
        } else {
            -0.5 * self.prefix[n]
        }
    }

    /// Writes `i,G_i` rows for `i = 0..=i_max`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "i,G_i")?;
        for (i, g) in self.weights.iter().enumerate() {
            writeln!(out, "{i},{g:e}")?;
        }
        Ok(())
    }
}
