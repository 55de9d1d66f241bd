//! Monotone two-point numerical fluxes.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::function::ScalarFn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FluxScheme {
    #[default]
    Godunov,
    EngquistOsher,
    LaxFriedrichs,
}

impl FromStr for FluxScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "godunov" => Ok(Self::Godunov),
            "eo" | "engquist_osher" | "engquist-osher" => Ok(Self::EngquistOsher),
            "llf" | "lf" | "lax_friedrichs" | "lax-friedrichs" => Ok(Self::LaxFriedrichs),
            other => Err(Error::Config(format!("unknown flux scheme `{other}` (godunov|eo|llf)"))),
        }
    }
}

impl fmt::Display for FluxScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Godunov => "godunov",
            Self::EngquistOsher => "eo",
            Self::LaxFriedrichs => "llf",
        })
    }
}

/// `½ min(1, |u|)²`: Burgers' flux clipped outside `[-1, 1]`.
pub fn clipped_burgers(u: f64) -> f64 {
    let m = u.abs().min(1.0);
    0.5 * m * m
}

/// `u⁺ (1 - u)⁺`.
pub fn clipped_sigma(u: f64) -> f64 {
    u.max(0.0) * (1.0 - u).max(0.0)
}

/// A physical flux `f` and the monotone numerical flux built from it.
///
/// `breakpoints` must contain every point where `f` changes monotonicity
/// (interior extrema and the ends of flat stretches), sorted ascending.
#[derive(Debug, Clone)]
pub struct FluxSpec {
    pub f: ScalarFn,
    pub breakpoints: Vec<f64>,
    pub scheme: FluxScheme,
    /// Artificial viscosity of the Lax–Friedrichs flux; must be at least `L_f`.
    pub lf_theta: f64,
}

impl FluxSpec {
    pub fn new(f: ScalarFn, mut breakpoints: Vec<f64>, scheme: FluxScheme) -> Self {
        breakpoints.sort_by(f64::total_cmp);
        let lf_theta = f.lipschitz();
        Self { f, breakpoints, scheme, lf_theta }
    }

    pub fn zero() -> Self {
        Self::new(ScalarFn::zero(), Vec::new(), FluxScheme::Godunov)
    }

    /// `u²/2`, Lipschitz on `[-bound, bound]`.
    pub fn burgers(scheme: FluxScheme, bound: f64) -> Self {
        Self::new(ScalarFn::new("burgers", bound, |u| 0.5 * u * u), vec![0.0], scheme)
    }

    pub fn clipped_burgers(scheme: FluxScheme) -> Self {
        Self::new(ScalarFn::new("clipped_burgers", 1.0, clipped_burgers), vec![-1.0, 0.0, 1.0], scheme)
    }

    pub fn with_lf_theta(mut self, theta: f64) -> Self {
        self.lf_theta = theta;
        self
    }

    pub fn is_zero(&self) -> bool {
        self.f.is_zero()
    }

    /// Lipschitz constant of the numerical flux in each argument.
    pub fn numerical_lipschitz(&self) -> f64 {
        match self.scheme {
            FluxScheme::Godunov | FluxScheme::EngquistOsher => self.f.lipschitz(),
            FluxScheme::LaxFriedrichs => 0.5 * (self.f.lipschitz() + self.lf_theta),
        }
    }

    /// Bound on `∂₁F(u, ·) - ∂₂F(·, u)`, the advective part of the diagonal
    /// coefficient that explicit monotonicity must dominate.
    pub fn self_coupling(&self) -> f64 {
        match self.scheme {
            FluxScheme::Godunov | FluxScheme::EngquistOsher => self.f.lipschitz(),
            FluxScheme::LaxFriedrichs => self.lf_theta.max(self.f.lipschitz()),
        }
    }

    /// `f` at each breakpoint, for [`FluxSpec::numerical_flux_with`].
    pub fn breakpoint_values(&self) -> Vec<f64> {
        self.breakpoints.iter().map(|&p| self.f.eval(p)).collect()
    }

    /// `F(a, b)`.
    pub fn numerical_flux(&self, a: f64, b: f64) -> f64 {
        self.numerical_flux_with(a, b, self.f.eval(a), self.f.eval(b), &self.breakpoint_values())
    }

    /// `F(a, b)` given `fa = f(a)`, `fb = f(b)` and [`FluxSpec::breakpoint_values`].
    pub fn numerical_flux_with(&self, a: f64, b: f64, fa: f64, fb: f64, break_values: &[f64]) -> f64 {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let inside = self.breakpoints.iter().zip(break_values).filter(move |(&p, _)| p > lo && p < hi);
        match self.scheme {
            FluxScheme::Godunov => {
                if a <= b {
                    inside.map(|(_, &v)| v).fold(fa.min(fb), f64::min)
                } else {
                    inside.map(|(_, &v)| v).fold(fa.max(fb), f64::max)
                }
            }
            FluxScheme::EngquistOsher => {
                // ∫_lo^hi |f'|, exact given the breakpoints
                let (f_lo, f_hi) = if a <= b { (fa, fb) } else { (fb, fa) };
                let mut prev = f_lo;
                let mut variation = 0.0;
                for (_, &v) in inside {
                    variation += (v - prev).abs();
                    prev = v;
                }
                variation += (f_hi - prev).abs();
                let mean = 0.5 * (fa + fb);
                if a <= b {
                    mean - 0.5 * variation
                } else {
                    mean + 0.5 * variation
                }
            }
            FluxScheme::LaxFriedrichs => 0.5 * (fa + fb) - 0.5 * self.lf_theta * (b - a),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SCHEMES: [FluxScheme; 3] = [FluxScheme::Godunov, FluxScheme::EngquistOsher, FluxScheme::LaxFriedrichs];

    #[test]
    fn clipped_functions() {
        assert_eq!(clipped_burgers(0.5), 0.125);
        assert_eq!(clipped_burgers(3.0), 0.5);
        assert_eq!(clipped_burgers(-3.0), 0.5);
        assert_eq!(clipped_sigma(0.5), 0.25);
        assert_eq!(clipped_sigma(-1.0), 0.0);
        assert_eq!(clipped_sigma(2.0), 0.0);
        let max = (0..=1000).map(|k| clipped_sigma(k as f64 / 1000.0)).fold(0.0, f64::max);
        assert_eq!(max, 0.25);
    }

    #[test]
    fn godunov_burgers_against_dense_sampling() {
        let flux = FluxSpec::burgers(FluxScheme::Godunov, 2.0);
        let sample = |a: f64, b: f64| -> Vec<f64> {
            (0..=10_000).map(|k| a + (b - a) * k as f64 / 10_000.0).map(|u| 0.5 * u * u).collect()
        };
        let max = sample(-1.0, 1.0).into_iter().fold(f64::MIN, f64::max);
        assert_eq!(flux.numerical_flux(1.0, -1.0), max);
        assert_eq!(max, 0.5);
        let min = sample(0.0, 1.0).into_iter().fold(f64::MAX, f64::min);
        assert_eq!(flux.numerical_flux(0.0, 1.0), min);
        assert_eq!(flux.numerical_flux(-0.5, 1.0), 0.0);
    }

    #[test]
    fn engquist_osher_burgers_closed_form() {
        // F(a, b) = max(a, 0)²/2 + min(b, 0)²/2 for Burgers
        let flux = FluxSpec::burgers(FluxScheme::EngquistOsher, 2.0);
        let clipped = FluxSpec::clipped_burgers(FluxScheme::EngquistOsher);
        // clipped: variation of ½min(1,|u|)² across [-1.5, 1.5] is 1
        assert!((clipped.numerical_flux(-1.5, 1.5) - (0.5 - 0.5)).abs() < 1e-15);
        assert!((clipped.numerical_flux(1.5, -1.5) - (0.5 + 0.5)).abs() < 1e-15);
        for (a, b) in [(1.0, -1.0), (-0.5, 0.7), (0.3, 0.9), (-0.8, -0.2), (0.6, -1.2)] {
            let want = 0.5 * f64::max(a, 0.0).powi(2) + 0.5 * f64::min(b, 0.0).powi(2);
            assert!((flux.numerical_flux(a, b) - want).abs() < 1e-15, "({a}, {b})");
        }
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in SCHEMES {
            assert_eq!(s.to_string().parse::<FluxScheme>().unwrap(), s);
        }
        assert!("roe".parse::<FluxScheme>().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn monotone_in_each_argument(a in -2.0f64..2.0, b in -2.0f64..2.0, eps in 1e-6f64..0.5, which in 0usize..3) {
            let flux = FluxSpec::clipped_burgers(SCHEMES[which]);
            let base = flux.numerical_flux(a, b);
            prop_assert!(flux.numerical_flux(a + eps, b) >= base - 1e-15);
            prop_assert!(flux.numerical_flux(a, b + eps) <= base + 1e-15);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1_000))]
        #[test]
        fn consistent(u in -3.0f64..3.0) {
            for s in SCHEMES {
                let flux = FluxSpec::clipped_burgers(s);
                prop_assert!((flux.numerical_flux(u, u) - clipped_burgers(u)).abs() <= 1e-16);
                let b = FluxSpec::burgers(s, 3.0);
                prop_assert!((b.numerical_flux(u, u) - 0.5 * u * u).abs() <= 1e-15);
            }
        }
    }
}
