use std::fmt;
use std::sync::Arc;

/// A named scalar function `ℝ → ℝ` together with a Lipschitz constant valid
/// on the states the solver visits.
#[derive(Clone)]
pub struct ScalarFn {
    name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    lipschitz: f64,
}

impl ScalarFn {
    pub fn new(name: impl Into<String>, lipschitz: f64, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), f: Arc::new(f), lipschitz }
    }

    pub fn zero() -> Self {
        Self::new("zero", 0.0, |_| 0.0)
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        (self.f)(u)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// True when the function is identically zero by construction.
    pub fn is_zero(&self) -> bool {
        self.name == "zero"
    }

    /// Largest difference quotient over a uniform sample of `[lo, hi]`.
    pub fn sampled_lipschitz(&self, lo: f64, hi: f64, samples: usize) -> f64 {
        let h = (hi - lo) / samples as f64;
        (0..samples)
            .map(|k| {
                let a = lo + k as f64 * h;
                ((self.eval(a + h) - self.eval(a)) / h).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Checks monotone non-decrease over a uniform sample of `[lo, hi]`.
    pub fn is_nondecreasing_on(&self, lo: f64, hi: f64, samples: usize) -> bool {
        let h = (hi - lo) / samples as f64;
        (0..samples).all(|k| {
            let a = lo + k as f64 * h;
            self.eval(a + h) >= self.eval(a)
        })
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarFn").field("name", &self.name).field("lipschitz", &self.lipschitz).finish()
    }
}
