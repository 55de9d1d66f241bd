//! The fully discrete explicit scheme
//!
//! ```text
//! U_i^{n+1} = U_i^n - Δt/Δx [F(U_i, U_{i+1}) - F(U_{i-1}, U_i)]
//!                   - Δt/Δx Σ_j G̃_{j-i} A(U_j)
//!                   + σ(U_i) ΔW_n
//! ```
//!
//! on the truncated grid `-K..=K`. Outside the grid the state is extended by
//! its boundary values, so the part of the nonlocal sum reaching past cell
//! `±K` collapses to `A(U_{±K})` times a kernel tail. The advective faces
//! past the boundary use the same extension.

use std::io::Write;
use std::sync::Arc;

use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::{Error, Result};
use crate::flux::{clipped_sigma, FluxScheme, FluxSpec};
use crate::function::ScalarFn;
use crate::kernel::WeightKernel;
use crate::mesh::{bv_seminorm, project_initial, Grid1D, LatticeFunction};
use crate::noise::{BrownianPath, NoiseSpec};

/// Gauss–Legendre order used for the initial projection.
pub const DEFAULT_QUAD_ORDER: usize = 5;

/// `2 exp(1/(x² - 1))` on `(-1, 1)`, zero elsewhere.
pub fn bump_initial(x: f64) -> f64 {
    if x.abs() < 1.0 {
        2.0 * (1.0 / (x * x - 1.0)).exp()
    } else {
        0.0
    }
}

/// `(u - 1/2)⁺`.
pub fn half_threshold(u: f64) -> f64 {
    (u - 0.5).max(0.0)
}

#[derive(Debug, Clone)]
pub struct InitialData {
    pub u0: ScalarFn,
    /// Points where `u0` is not smooth; cells straddling one are split.
    pub kinks: Vec<f64>,
}

/// Flux, degenerate diffusion `A`, noise, initial data and fractional order.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub flux: FluxSpec,
    pub diffusion: ScalarFn,
    pub noise: NoiseSpec,
    pub initial: InitialData,
    pub lambda: f64,
}

impl ProblemSpec {
    /// The benchmark problem: `A(u) = (u - ½)⁺`, `f(u) = ½ min(1, |u|)²`,
    /// `σ(u) = u⁺(1 - u)⁺`, `u0 = 2 exp(1/(x²-1))` on `(-1, 1)`.
    pub fn experiment(lambda: f64, scheme: FluxScheme) -> Self {
        Self {
            flux: FluxSpec::clipped_burgers(scheme),
            diffusion: ScalarFn::new("half_threshold", 1.0, half_threshold),
            noise: NoiseSpec::scalar(ScalarFn::new("clipped_sigma", 1.0, clipped_sigma), 1.0),
            initial: InitialData { u0: ScalarFn::new("bump", f64::INFINITY, bump_initial), kinks: vec![-1.0, 1.0] },
            lambda,
        }
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_flux(mut self, flux: FluxSpec) -> Self {
        self.flux = flux;
        self
    }

    pub fn with_diffusion(mut self, diffusion: ScalarFn) -> Self {
        self.diffusion = diffusion;
        self
    }

    pub fn with_initial(mut self, u0: ScalarFn, kinks: Vec<f64>) -> Self {
        self.initial = InitialData { u0, kinks };
        self
    }

    /// Sampled checks of the structural assumptions on `[lo, hi]`: `A(0) = 0`,
    /// `A` non-decreasing, `λ ∈ (0, 1)`, `lf_theta >= L_f`.
    pub fn validate(&self, lo: f64, hi: f64) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::InvalidParameter(format!("fractional order {} outside (0, 1)", self.lambda)));
        }
        if self.diffusion.eval(0.0) != 0.0 {
            return Err(Error::InvalidParameter("diffusion nonlinearity must vanish at 0".into()));
        }
        if !self.diffusion.is_nondecreasing_on(lo, hi, 10_000) {
            return Err(Error::InvalidParameter("diffusion nonlinearity must be non-decreasing".into()));
        }
        if self.flux.scheme == FluxScheme::LaxFriedrichs && self.flux.lf_theta < self.flux.f.lipschitz() {
            return Err(Error::InvalidParameter("Lax–Friedrichs viscosity below the flux Lipschitz constant".into()));
        }
        Ok(())
    }
}

/// Kernel tails and interior row sums of the truncated nonlocal operator.
#[derive(Debug, Clone)]
struct TruncationData {
    // T(K + i) and T(K - i): the kernel mass reaching past each boundary
    tail_left: Vec<f64>,
    tail_right: Vec<f64>,
    // Σ_{|j|<K} G̃_{j-i}
    interior_sum: Vec<f64>,
}

impl TruncationData {
    fn new(kernel: &WeightKernel, k: usize) -> Self {
        let ki = k as isize;
        let mut tail_left = Vec::with_capacity(2 * k + 1);
        let mut tail_right = Vec::with_capacity(2 * k + 1);
        let mut interior_sum = Vec::with_capacity(2 * k + 1);
        for i in -ki..=ki {
            let left = (ki + i) as usize;
            let right = (ki - i) as usize;
            tail_left.push(kernel.tail(left));
            tail_right.push(kernel.tail(right));
            // the full row sums to zero, so the interior part is minus both tails
            interior_sum.push(-(kernel.tail(left) + kernel.tail(right)));
        }
        Self { tail_left, tail_right, interior_sum }
    }
}

/// `Σ_{|j|<K} G̃_{j-i} A(U_j) - ½A(U_{-K}) Σ_{|j|<K+i} G̃_j - ½A(U_K) Σ_{|j|<K-i} G̃_j`,
/// divided by `dx`, by direct summation.
///
/// Uses the zero row sum to write each row as `Σ_j G̃_{j-i} (A_j - A_i)`, which
/// vanishes exactly on constant states.
pub fn nonlocal_term(u: &LatticeFunction, kernel: &WeightKernel, a_fn: &ScalarFn) -> Result<LatticeFunction> {
    check_kernel(u.grid(), kernel)?;
    let k = u.grid().k();
    let trunc = TruncationData::new(kernel, k);
    let a: Vec<f64> = u.values().iter().map(|&v| a_fn.eval(v)).collect();
    let mut out = vec![0.0; a.len()];
    direct_nonlocal(kernel, &trunc, &a, &mut out);
    Ok(LatticeFunction::from_raw(*u.grid(), out))
}

fn check_kernel(grid: &Grid1D, kernel: &WeightKernel) -> Result<()> {
    if kernel.i_max() < 2 * grid.k() {
        return Err(Error::GridMismatch(format!(
            "kernel covers offsets up to {} but the grid needs {}",
            kernel.i_max(),
            2 * grid.k()
        )));
    }
    if (kernel.dx() - grid.dx()).abs() > 1e-14 * grid.dx() {
        return Err(Error::GridMismatch(format!("kernel dx {} against grid dx {}", kernel.dx(), grid.dx())));
    }
    Ok(())
}

/// Active range of the interior part of `a` (cells 1..2K in storage order).
fn interior_support(a: &[f64]) -> Option<(usize, usize)> {
    let n = a.len();
    let first = (1..n - 1).find(|&j| a[j] != 0.0)?;
    let last = (1..n - 1).rev().find(|&j| a[j] != 0.0)?;
    Some((first, last))
}

fn direct_nonlocal(kernel: &WeightKernel, trunc: &TruncationData, a: &[f64], out: &mut [f64]) {
    let n = a.len();
    let inv_dx = 1.0 / kernel.dx();
    let g = kernel.one_sided();
    let (a_left, a_right) = (a[0], a[n - 1]);
    let support = interior_support(a);
    for (p, o) in out.iter_mut().enumerate() {
        let ai = a[p];
        let mut acc = trunc.tail_left[p] * (a_left - ai) + trunc.tail_right[p] * (a_right - ai);
        if ai == 0.0 {
            if let Some((lo, hi)) = support {
                for q in lo..=hi {
                    acc += g[q.abs_diff(p)] * a[q];
                }
            }
        } else {
            for q in 1..n - 1 {
                acc += g[q.abs_diff(p)] * (a[q] - ai);
            }
        }
        *o = acc * inv_dx;
    }
}

/// Smallest `2^a 3^b >= n`.
fn smooth_length(n: usize) -> usize {
    let mut best = n.next_power_of_two();
    let mut three = 1;
    while three < best {
        let candidate = three * (n.div_ceil(three)).next_power_of_two();
        best = best.min(candidate);
        three *= 3;
    }
    best
}

/// Circular convolution with the kernel row via real FFTs.
struct FftConvolver {
    len: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
    kernel_hat: Vec<Complex<f64>>,
}

impl std::fmt::Debug for FftConvolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftConvolver").field("len", &self.len).finish()
    }
}

impl FftConvolver {
    fn new(kernel: &WeightKernel, k: usize) -> Self {
        // interior sources 1..2K against targets 0..=2K: offsets up to 2K - 1
        // in magnitude, which must not alias
        let len = smooth_length(4 * k - 1);
        let mut planner = RealFftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let mut row = vec![0.0; len];
        row[0] = kernel.diagonal();
        for m in 1..2 * k {
            let gm = kernel.get(m as isize);
            row[m] = gm;
            row[len - m] = gm;
        }
        let mut kernel_hat = forward.make_output_vec();
        forward.process(&mut row, &mut kernel_hat).expect("fft length matches plan");
        let scale = 1.0 / len as f64;
        kernel_hat.iter_mut().for_each(|c| *c *= scale);
        Self { len, forward, inverse, kernel_hat }
    }

    fn scratch(&self) -> FftScratch {
        FftScratch {
            signal: self.forward.make_input_vec(),
            spectrum: self.forward.make_output_vec(),
            fwd: self.forward.make_scratch_vec(),
            inv: self.inverse.make_scratch_vec(),
        }
    }

    /// `c_p = Σ_q G̃_{|p-q|} a_q` over interior cells `q`, for every cell `p`.
    fn convolve(&self, a: &[f64], s: &mut FftScratch, out: &mut [f64]) {
        let n = a.len();
        s.signal.iter_mut().for_each(|v| *v = 0.0);
        s.signal[1..n - 1].copy_from_slice(&a[1..n - 1]);
        self.forward
            .process_with_scratch(&mut s.signal, &mut s.spectrum, &mut s.fwd)
            .expect("fft length matches plan");
        for (c, h) in s.spectrum.iter_mut().zip(&self.kernel_hat) {
            *c *= h;
        }
        // the inverse transform requires purely real DC and Nyquist bins
        if let Some(first) = s.spectrum.first_mut() {
            first.im = 0.0;
        }
        if let Some(last) = s.spectrum.last_mut() {
            last.im = 0.0;
        }
        self.inverse
            .process_with_scratch(&mut s.spectrum, &mut s.signal, &mut s.inv)
            .expect("fft length matches plan");
        out.copy_from_slice(&s.signal[..n]);
    }
}

struct FftScratch {
    signal: Vec<f64>,
    spectrum: Vec<Complex<f64>>,
    fwd: Vec<Complex<f64>>,
    inv: Vec<Complex<f64>>,
}

/// Grids up to this many cells always use direct summation.
const DIRECT_ONLY_CELLS: usize = 256;

/// The truncated nonlocal operator on one grid, choosing direct summation
/// over the support of `A(U)` or an FFT convolution by estimated cost.
#[derive(Debug)]
struct NonlocalOperator {
    kernel: Arc<WeightKernel>,
    trunc: TruncationData,
    fft: Option<FftConvolver>,
}

impl NonlocalOperator {
    fn new(kernel: Arc<WeightKernel>, grid: &Grid1D) -> Self {
        let trunc = TruncationData::new(&kernel, grid.k());
        let fft = (grid.cell_count() > DIRECT_ONLY_CELLS).then(|| FftConvolver::new(&kernel, grid.k()));
        Self { kernel, trunc, fft }
    }

    fn apply(&self, a: &[f64], out: &mut [f64], force_fft: bool, scratch: &mut Option<FftScratch>) {
        let n = a.len();
        let support = interior_support(a);
        let fft = match (&self.fft, support) {
            (Some(fft), _) if force_fft => fft,
            (Some(fft), Some((lo, hi))) => {
                let fft_cost = 6 * fft.len * (usize::BITS - fft.len.leading_zeros()) as usize;
                if n * (hi - lo + 1) <= fft_cost {
                    return direct_nonlocal(&self.kernel, &self.trunc, a, out);
                }
                fft
            }
            (_, None) if a[0] == 0.0 && a[n - 1] == 0.0 => {
                out.iter_mut().for_each(|v| *v = 0.0);
                return;
            }
            _ => return direct_nonlocal(&self.kernel, &self.trunc, a, out),
        };
        let s = scratch.get_or_insert_with(|| fft.scratch());
        fft.convolve(a, s, out);
        let t = &self.trunc;
        let inv_dx = 1.0 / self.kernel.dx();
        let (a_left, a_right) = (a[0], a[n - 1]);
        for (p, o) in out.iter_mut().enumerate() {
            let ai = a[p];
            *o = (*o - ai * t.interior_sum[p] + t.tail_left[p] * (a_left - ai) + t.tail_right[p] * (a_right - ai))
                * inv_dx;
        }
    }
}

/// `[F(U_i, U_{i+1}) - F(U_{i-1}, U_i)] / dx` with constant extension past
/// both boundaries.
pub fn advective_term(u: &LatticeFunction, flux: &FluxSpec) -> LatticeFunction {
    let mut faces = Vec::new();
    let mut out = vec![0.0; u.values().len()];
    advective_into(u.values(), u.grid().dx(), flux, &mut faces, &mut out);
    LatticeFunction::from_raw(*u.grid(), out)
}

fn advective_into(u: &[f64], dx: f64, flux: &FluxSpec, faces: &mut Vec<f64>, out: &mut [f64]) {
    if flux.is_zero() {
        out.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let n = u.len();
    let bv = flux.breakpoint_values();
    // f(U_p) is stashed in `out` until the differences overwrite it
    for (o, &v) in out.iter_mut().zip(u) {
        *o = flux.f.eval(v);
    }
    faces.clear();
    faces.push(out[0]);
    for p in 0..n - 1 {
        faces.push(flux.numerical_flux_with(u[p], u[p + 1], out[p], out[p + 1], &bv));
    }
    faces.push(out[n - 1]);
    let inv_dx = 1.0 / dx;
    for (p, o) in out.iter_mut().enumerate() {
        *o = (faces[p + 1] - faces[p]) * inv_dx;
    }
}

/// A time step satisfying both stability heuristics, with the two ratios
/// `‖f'‖∞ Δt/Δx` and `G̃_0 Δt/Δx` they are usually quoted in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CflReport {
    pub dt: f64,
    pub advective_ratio: f64,
    pub nonlocal_ratio: f64,
}

impl CflReport {
    pub fn ratios_for(problem: &ProblemSpec, kernel: &WeightKernel, dx: f64, dt: f64) -> Self {
        Self {
            dt,
            advective_ratio: problem.flux.f.lipschitz() * dt / dx,
            nonlocal_ratio: kernel.diagonal() * dt / dx,
        }
    }
}

/// `safety / (2 L_F/Δx + L_A G̃_0/Δx)` where `L_F` is the Lipschitz constant
/// of the numerical flux in each argument.
pub fn cfl_dt(problem: &ProblemSpec, kernel: &WeightKernel, dx: f64, safety: f64) -> Result<CflReport> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::InvalidParameter(format!("CFL safety factor must lie in (0, 1], got {safety}")));
    }
    let rate = 2.0 * problem.flux.numerical_lipschitz() / dx + problem.diffusion.lipschitz() * kernel.diagonal() / dx;
    let dt = if rate > 0.0 { safety / rate } else { f64::INFINITY };
    Ok(CflReport::ratios_for(problem, kernel, dx, dt))
}

/// Largest step keeping every diagonal coefficient of the deterministic
/// update non-negative: `Δx / (L_adv + L_A G̃_0)`.
pub fn monotone_dt_limit(problem: &ProblemSpec, kernel: &WeightKernel, dx: f64) -> f64 {
    let rate = problem.flux.self_coupling() + problem.diffusion.lipschitz() * kernel.diagonal();
    if rate > 0.0 {
        dx / rate
    } else {
        f64::INFINITY
    }
}

/// State of one path: `U^n` and `t = n Δt`.
#[derive(Debug, Clone)]
pub struct SchemeState {
    pub u: LatticeFunction,
    pub step_index: u64,
    pub dt: f64,
}

impl SchemeState {
    pub fn new(u: LatticeFunction, dt: f64) -> Self {
        Self { u, step_index: 0, dt }
    }

    pub fn t(&self) -> f64 {
        self.step_index as f64 * self.dt
    }
}

/// Step count and snapshot steps for a run to `t_final`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSchedule {
    pub dt: f64,
    pub n_steps: usize,
    pub snapshot_steps: Vec<usize>,
}

pub(crate) fn whole_multiple(t: f64, dt: f64) -> Option<usize> {
    let r = t / dt;
    let n = r.round();
    ((r - n).abs() <= 1e-9 * n.max(1.0) && n >= 0.0).then_some(n as usize)
}

impl TimeSchedule {
    pub fn new(dt: f64, t_final: f64, snapshot_times: &[f64]) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        let n_steps = whole_multiple(t_final, dt)
            .ok_or_else(|| Error::InvalidParameter(format!("final time {t_final} is not a multiple of dt = {dt}")))?;
        let snapshot_steps = snapshot_times
            .iter()
            .map(|&t| match whole_multiple(t, dt) {
                Some(s) if s <= n_steps => Ok(s),
                _ => Err(Error::InvalidParameter(format!("snapshot time {t} is not a step of dt = {dt} within [0, {t_final}]"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dt, n_steps, snapshot_steps })
    }

    pub fn t_final(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }
}

/// States recorded at the requested times, in request order, with the
/// extreme cell values reached at any step of the run.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshots {
    pub times: Vec<f64>,
    pub states: Vec<LatticeFunction>,
    pub running_min: f64,
    pub running_max: f64,
}

impl Snapshots {
    pub fn at(&self, t: f64) -> Option<&LatticeFunction> {
        self.times.iter().position(|&s| (s - t).abs() < 1e-12).map(|k| &self.states[k])
    }
}

/// Per-path scratch buffers for [`Discretization::step`].
pub struct Workspace {
    a: Vec<f64>,
    adv: Vec<f64>,
    nl: Vec<f64>,
    faces: Vec<f64>,
    fft: Option<FftScratch>,
}

/// A problem on a fixed grid with its precomputed kernel data. Immutable
/// and shared read-only between Monte Carlo paths.
#[derive(Debug)]
pub struct Discretization {
    problem: Arc<ProblemSpec>,
    grid: Grid1D,
    kernel: Arc<WeightKernel>,
    nonlocal: NonlocalOperator,
}

impl Discretization {
    pub fn new(problem: Arc<ProblemSpec>, grid: Grid1D) -> Result<Self> {
        let kernel = Arc::new(WeightKernel::for_half_width(problem.lambda, grid.dx(), grid.k())?);
        Self::with_kernel(problem, grid, kernel)
    }

    pub fn with_kernel(problem: Arc<ProblemSpec>, grid: Grid1D, kernel: Arc<WeightKernel>) -> Result<Self> {
        check_kernel(&grid, &kernel)?;
        if (kernel.lambda() - problem.lambda).abs() > 0.0 {
            return Err(Error::InvalidParameter("kernel order differs from the problem's".into()));
        }
        let nonlocal = NonlocalOperator::new(kernel.clone(), &grid);
        Ok(Self { problem, grid, kernel, nonlocal })
    }

    pub fn problem(&self) -> &ProblemSpec {
        &self.problem
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn kernel(&self) -> &WeightKernel {
        &self.kernel
    }

    pub fn workspace(&self) -> Workspace {
        let n = self.grid.cell_count();
        Workspace { a: vec![0.0; n], adv: vec![0.0; n], nl: vec![0.0; n], faces: Vec::with_capacity(n + 1), fft: None }
    }

    pub fn initial_condition(&self) -> Result<LatticeFunction> {
        let init = &self.problem.initial;
        project_initial(|x| init.u0.eval(x), &init.kinks, self.grid, DEFAULT_QUAD_ORDER)
    }

    pub fn cfl(&self, safety: f64) -> Result<CflReport> {
        cfl_dt(&self.problem, &self.kernel, self.grid.dx(), safety)
    }

    pub fn monotone_dt_limit(&self) -> f64 {
        monotone_dt_limit(&self.problem, &self.kernel, self.grid.dx())
    }

    /// Semi-discrete right-hand side without noise: advective plus nonlocal
    /// term, as the rate `dU/dt = -rhs`.
    pub fn rhs(&self, u: &[f64], ws: &mut Workspace, out: &mut [f64]) {
        self.fill_terms(u, ws, false);
        for ((o, a), n) in out.iter_mut().zip(&ws.adv).zip(&ws.nl) {
            *o = a + n;
        }
    }

    /// Nonlocal term through the FFT path regardless of the cost estimate
    /// (for cross-checking the two evaluation routes).
    pub fn nonlocal_fft(&self, u: &LatticeFunction) -> LatticeFunction {
        let mut ws = self.workspace();
        self.fill_terms(u.values(), &mut ws, true);
        LatticeFunction::from_raw(self.grid, ws.nl)
    }

    fn fill_terms(&self, u: &[f64], ws: &mut Workspace, force_fft: bool) {
        let p = &self.problem;
        advective_into(u, self.grid.dx(), &p.flux, &mut ws.faces, &mut ws.adv);
        if p.diffusion.is_zero() {
            ws.nl.iter_mut().for_each(|v| *v = 0.0);
        } else {
            for (a, &v) in ws.a.iter_mut().zip(u) {
                *a = p.diffusion.eval(v);
            }
            self.nonlocal.apply(&ws.a, &mut ws.nl, force_fft, &mut ws.fft);
        }
    }

    /// Advances `state` by `dt` with noise increments `dw` (one per mode).
    pub fn step(&self, state: &mut SchemeState, dt: f64, dw: &[f64], ws: &mut Workspace) -> Result<()> {
        self.fill_terms(state.u.values(), ws, false);
        let u = state.u.values_mut();
        // noise is evaluated at U^n, so accumulate it before updating
        ws.a.iter_mut().for_each(|v| *v = 0.0);
        if !self.problem.noise.is_off() {
            self.problem.noise.accumulate(u, dw, &mut ws.a);
        }
        for (p, v) in u.iter_mut().enumerate() {
            *v += -dt * (ws.adv[p] + ws.nl[p]) + ws.a[p];
        }
        state.step_index += 1;
        if let Some(p) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step: state.step_index, cell: p as isize - self.grid.k() as isize });
        }
        Ok(())
    }

    /// Runs from the projected initial data, recording the requested
    /// snapshots. `path` must be given unless the noise is switched off.
    pub fn evolve(
        &self,
        schedule: &TimeSchedule,
        path: Option<&BrownianPath>,
        mut trace: Option<&mut dyn Write>,
    ) -> Result<Snapshots> {
        let n_modes = self.problem.noise.n_modes();
        let increments = match (self.problem.noise.is_off(), path) {
            (true, _) => None,
            (false, Some(path)) => {
                if path.n_modes() != n_modes {
                    return Err(Error::InvalidParameter(format!(
                        "path has {} modes, the noise needs {n_modes}",
                        path.n_modes()
                    )));
                }
                let inc = path.aggregate(schedule.dt)?;
                if inc.len() < schedule.n_steps * n_modes {
                    return Err(Error::WindowOutOfRange { window: inc.len() / n_modes, level_dt: schedule.dt });
                }
                Some(inc)
            }
            (false, None) => return Err(Error::InvalidParameter("noise is on but no Brownian path was given".into())),
        };
        let zeros = vec![0.0; n_modes];
        let mut state = SchemeState::new(self.initial_condition()?, schedule.dt);
        let mut ws = self.workspace();
        let mut recorded: Vec<Option<LatticeFunction>> = vec![None; schedule.snapshot_steps.len()];
        let record = |state: &SchemeState, recorded: &mut Vec<Option<LatticeFunction>>| {
            for (slot, &s) in recorded.iter_mut().zip(&schedule.snapshot_steps) {
                if s as u64 == state.step_index {
                    *slot = Some(state.u.clone());
                }
            }
        };
        if let Some(w) = trace.as_deref_mut() {
            writeln!(w, "step,t,min_u,max_u,mass,bv")?;
            trace_line(w, &state)?;
        }
        record(&state, &mut recorded);
        let (mut running_min, mut running_max) = (state.u.min(), state.u.max());
        for n in 0..schedule.n_steps {
            let dw = match &increments {
                Some(inc) => &inc[n * n_modes..(n + 1) * n_modes],
                None => &zeros[..],
            };
            self.step(&mut state, schedule.dt, dw, &mut ws)?;
            record(&state, &mut recorded);
            running_min = running_min.min(state.u.min());
            running_max = running_max.max(state.u.max());
            if let Some(w) = trace.as_deref_mut() {
                trace_line(w, &state)?;
            }
        }
        let times = schedule.snapshot_steps.iter().map(|&s| s as f64 * schedule.dt).collect();
        let states = recorded.into_iter().map(|s| s.expect("every snapshot step is reached")).collect();
        Ok(Snapshots { times, states, running_min, running_max })
    }
}

fn trace_line(w: &mut dyn Write, state: &SchemeState) -> std::io::Result<()> {
    writeln!(
        w,
        "{},{},{:e},{:e},{:e},{:e}",
        state.step_index,
        state.t(),
        state.u.min(),
        state.u.max(),
        state.u.mass(),
        bv_seminorm(&state.u)
    )
}
