//! Reference TV flow by implicit time stepping.
//!
//! Each step solves `u = argmin 1/2 ||u - g||^2 + dt J(u)` through its dual:
//! `u = g - dt D^T z` with `z` in the unit ball of the dual norm, found by
//! accelerated projected gradient iterations warm-started from the previous
//! step. This is
//! slow but independent of the event-driven solver, which makes it both the
//! correctness oracle and the benchmark opponent.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::decompose;
use crate::tv1d::{evolve, PiecewiseFlow, Signal};
use crate::tv2d::Image;

/// The flow stops once `J(psi) <= STOP_RATIO J(f)`.
pub const STOP_RATIO: f64 = 1e-8;

/// Smallest signal length accepted by [`benchmark`].
pub const MIN_BENCH_LEN: usize = 64;

/// Regularizer of the reference flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "1d")]
    OneD,
    #[serde(rename = "2d-aniso")]
    Anisotropic,
    #[serde(rename = "2d-iso")]
    Isotropic,
}

impl Variant {
    /// Dual gradient step: `1 / ||D D^T||` for forward differences.
    fn dual_step(self) -> f64 {
        match self {
            Variant::OneD => 0.25,
            Variant::Anisotropic | Variant::Isotropic => 0.125,
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1d" => Ok(Variant::OneD),
            "2d-aniso" => Ok(Variant::Anisotropic),
            "2d-iso" => Ok(Variant::Isotropic),
            other => Err(Error::invalid(format!(
                "unknown variant {other:?}; expected 1d, 2d-aniso or 2d-iso"
            ))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::OneD => "1d",
            Variant::Anisotropic => "2d-aniso",
            Variant::Isotropic => "2d-iso",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub dt: f64,
    /// Iteration cap of each inner dual solve.
    pub inner_iters: usize,
    /// Inner solves stop when the dual residual `dt max |z_{n+1} - z_n|`,
    /// the resulting bound on the per-iteration change of `u`, is below this.
    pub inner_tol: f64,
    pub variant: Variant,
    /// Cap on the number of implicit steps.
    pub max_steps: usize,
}

impl BaselineConfig {
    pub fn new(dt: f64, variant: Variant) -> Self {
        BaselineConfig {
            dt,
            variant,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if self.inner_tol.is_nan() || self.inner_tol <= 0.0 {
            return Err(Error::invalid("inner tolerance must be positive"));
        }
        if self.inner_iters == 0 {
            return Err(Error::invalid("inner iteration cap must be positive"));
        }
        Ok(())
    }
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            dt: 1e-3,
            inner_iters: 200_000,
            inner_tol: 1e-9,
            variant: Variant::OneD,
            max_steps: 100_000_000,
        }
    }
}

/// Totals of one reference run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub steps: usize,
    pub final_time: f64,
    pub inner_iterations: usize,
    pub initial_tv: f64,
    pub final_tv: f64,
}

/// Stored reference trajectory at the multiples of `dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub summary: BaselineSummary,
}

/// Dual state of the implicit step on a `rows x cols` grid.
///
/// The dual problem `min ||g - dt D^T z||^2` over the dual ball is solved by
/// accelerated projected gradient: each iteration projects a gradient step
/// taken from an extrapolated point `y`.
struct DualSolver {
    rows: usize,
    cols: usize,
    variant: Variant,
    /// Dual variable of the horizontal differences; the last column stays 0.
    zx: Vec<f64>,
    /// Dual variable of the vertical differences; the last row stays 0.
    zy: Vec<f64>,
    yx: Vec<f64>,
    yy: Vec<f64>,
}

impl DualSolver {
    fn new(rows: usize, cols: usize, variant: Variant) -> Self {
        let n = rows * cols;
        DualSolver {
            rows,
            cols,
            variant,
            zx: vec![0.0; n],
            zy: vec![0.0; n],
            yx: vec![0.0; n],
            yy: vec![0.0; n],
        }
    }

    /// `u = g - dt D^T z`, with `(D^T z)_i = z_{i-1} - z_i` along each axis.
    fn primal(&self, zx: &[f64], zy: &[f64], g: &[f64], dt: f64, u: &mut [f64]) {
        let (m, k) = (self.rows, self.cols);
        for r in 0..m {
            for c in 0..k {
                let i = r * k + c;
                let mut div = -zx[i] - zy[i];
                if c > 0 {
                    div += zx[i - 1];
                }
                if r > 0 {
                    div += zy[i - k];
                }
                u[i] = g[i] - dt * div;
            }
        }
    }

    /// Projected gradient step from `y` followed by extrapolation with weight
    /// `beta`; returns the largest change of `z`.
    fn dual_update(&mut self, u: &[f64], scale: f64, beta: f64) -> f64 {
        let (m, k) = (self.rows, self.cols);
        let mut change: f64 = 0.0;
        for r in 0..m {
            for c in 0..k {
                let i = r * k + c;
                let gx = if c + 1 < k { u[i + 1] - u[i] } else { 0.0 };
                let gy = if r + 1 < m { u[i + k] - u[i] } else { 0.0 };
                let mut x = self.yx[i] + scale * gx;
                let mut y = self.yy[i] + scale * gy;
                match self.variant {
                    Variant::OneD | Variant::Anisotropic => {
                        x = x.clamp(-1.0, 1.0);
                        y = y.clamp(-1.0, 1.0);
                    }
                    Variant::Isotropic => {
                        let n = x.hypot(y);
                        if n > 1.0 {
                            x /= n;
                            y /= n;
                        }
                    }
                }
                let (dx, dy) = (x - self.zx[i], y - self.zy[i]);
                change = change.max(dx.abs()).max(dy.abs());
                self.zx[i] = x;
                self.zy[i] = y;
                self.yx[i] = x + beta * dx;
                self.yy[i] = y + beta * dy;
            }
        }
        change
    }

    /// Single-row version of `primal` at `y` followed by `dual_update`.
    fn iterate_1d(&mut self, g: &[f64], dt: f64, scale: f64, beta: f64, u: &mut [f64]) -> f64 {
        let (z, y) = (&mut self.zx, &mut self.yx);
        let n = g.len();
        let mut prev = 0.0;
        for i in 0..n {
            u[i] = g[i] - dt * (prev - y[i]);
            prev = y[i];
        }
        let mut change: f64 = 0.0;
        for i in 0..n - 1 {
            let x = (y[i] + scale * (u[i + 1] - u[i])).clamp(-1.0, 1.0);
            let d = x - z[i];
            change = change.max(d.abs());
            z[i] = x;
            y[i] = x + beta * d;
        }
        change
    }

    /// Implicit step from `g`; writes the result to `u` and returns the iteration count.
    fn solve(&mut self, g: &[f64], cfg: &BaselineConfig, u: &mut [f64]) -> std::result::Result<usize, f64> {
        let scale = cfg.variant.dual_step() / cfg.dt;
        // Warm start from the previous step's dual, with the momentum reset.
        self.yx.copy_from_slice(&self.zx);
        self.yy.copy_from_slice(&self.zy);
        let mut momentum = 1.0f64;
        let mut change = f64::INFINITY;
        for it in 1..=cfg.inner_iters {
            let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            let beta = (momentum - 1.0) / next;
            momentum = next;
            change = if self.rows == 1 && cfg.variant == Variant::OneD {
                self.iterate_1d(g, cfg.dt, scale, beta, u)
            } else {
                self.primal(&self.yx, &self.yy, g, cfg.dt, u);
                self.dual_update(u, scale, beta)
            };
            if cfg.dt * change <= cfg.inner_tol {
                self.primal(&self.zx, &self.zy, g, cfg.dt, u);
                return Ok(it);
            }
        }
        Err(cfg.dt * change)
    }
}

/// Regularizer value on a `rows x cols` grid.
fn energy(values: &[f64], rows: usize, cols: usize, variant: Variant) -> f64 {
    let mut total = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            let gx = if c + 1 < cols { values[i + 1] - values[i] } else { 0.0 };
            let gy = if r + 1 < rows { values[i + cols] - values[i] } else { 0.0 };
            total += match variant {
                Variant::Isotropic => gx.hypot(gy),
                _ => gx.abs() + gy.abs(),
            };
        }
    }
    total
}

/// Runs the reference flow on a `rows x cols` grid until `J <= STOP_RATIO J(f)`.
///
/// `observer(t, state)` sees the initial state and every implicit step.
pub fn baseline_run(
    values: &[f64],
    rows: usize,
    cols: usize,
    cfg: &BaselineConfig,
    mut observer: impl FnMut(f64, &[f64]),
) -> Result<BaselineSummary> {
    cfg.validate()?;
    if rows == 0 || cols == 0 || values.len() != rows * cols {
        return Err(Error::invalid("grid shape does not match the data"));
    }
    if cfg.variant == Variant::OneD && rows != 1 {
        return Err(Error::invalid("the 1d variant needs a single row"));
    }
    let initial_tv = energy(values, rows, cols, cfg.variant);
    let mut summary = BaselineSummary {
        steps: 0,
        final_time: 0.0,
        inner_iterations: 0,
        initial_tv,
        final_tv: initial_tv,
    };
    observer(0.0, values);
    if initial_tv == 0.0 {
        return Ok(summary);
    }

    let mut solver = DualSolver::new(rows, cols, cfg.variant);
    let mut g = values.to_vec();
    let mut u = vec![0.0; values.len()];
    loop {
        let iterations = solver.solve(&g, cfg, &mut u).map_err(|residual| Error::NonConvergence {
            step: summary.steps + 1,
            time: summary.final_time,
            iterations: cfg.inner_iters,
            residual,
        })?;
        summary.steps += 1;
        summary.inner_iterations += iterations;
        summary.final_time = summary.steps as f64 * cfg.dt;
        summary.final_tv = energy(&u, rows, cols, cfg.variant);
        observer(summary.final_time, &u);
        if summary.final_tv <= STOP_RATIO * initial_tv {
            return Ok(summary);
        }
        if summary.steps >= cfg.max_steps {
            return Err(Error::StepLimit {
                steps: summary.steps,
                time: summary.final_time,
                tv_ratio: summary.final_tv / initial_tv,
            });
        }
        std::mem::swap(&mut g, &mut u);
    }
}

fn collect(values: &[f64], rows: usize, cols: usize, cfg: &BaselineConfig) -> Result<BaselineTrajectory> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    let summary = baseline_run(values, rows, cols, cfg, |t, s| {
        times.push(t);
        states.push(s.to_vec());
    })?;
    Ok(BaselineTrajectory { times, states, summary })
}

/// Reference 1D flow; `cfg.variant` must be [`Variant::OneD`].
pub fn baseline_flow(f: &Signal, cfg: &BaselineConfig) -> Result<BaselineTrajectory> {
    if cfg.variant != Variant::OneD {
        return Err(Error::invalid("1D input needs the 1d variant"));
    }
    collect(f.values(), 1, f.len(), cfg)
}

/// Reference 2D flow, anisotropic or isotropic.
pub fn baseline_flow_2d(img: &Image, cfg: &BaselineConfig) -> Result<BaselineTrajectory> {
    if cfg.variant == Variant::OneD {
        return Err(Error::invalid("2D input needs the 2d-aniso or 2d-iso variant"));
    }
    collect(img.data(), img.rows(), img.cols(), cfg)
}

/// Largest `||psi_ref(t) - psi(t)|| / ||f||` over the reference time steps.
pub fn sup_discrepancy(flow: &PiecewiseFlow, cfg: &BaselineConfig) -> Result<f64> {
    let f = flow.initial();
    let scale = f.norm();
    let mut worst: f64 = 0.0;
    let mut failure = None;
    baseline_run(f.values(), 1, f.len(), cfg, |t, s| match flow.sample(t) {
        Ok(exact) => {
            let d: f64 = s.iter().zip(exact.values()).map(|(a, b)| (a - b) * (a - b)).sum();
            worst = worst.max(d.sqrt() / scale);
        }
        Err(e) => failure = Some(e),
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(worst),
    }
}

/// Timing comparison of the reference flow against the event-driven solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub length: usize,
    pub repeats: usize,
    pub dt: f64,
    pub events: usize,
    pub baseline_steps: usize,
    /// Median wall-clock seconds of the reference flow to extinction.
    pub baseline_seconds: f64,
    /// Median wall-clock seconds of `evolve` followed by `decompose`.
    pub fast_seconds: f64,
    pub speedup: f64,
    /// Largest relative L2 distance between the two trajectories.
    pub discrepancy: f64,
    pub threads: usize,
    pub host: String,
}

impl fmt::Display for BenchmarkReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "signal length      {}", self.length)?;
        writeln!(f, "repeats            {}", self.repeats)?;
        writeln!(f, "events             {}", self.events)?;
        writeln!(f, "reference dt       {:e}", self.dt)?;
        writeln!(f, "reference steps    {}", self.baseline_steps)?;
        writeln!(f, "reference median   {:.6} s", self.baseline_seconds)?;
        writeln!(f, "fast median        {:.6} s", self.fast_seconds)?;
        writeln!(f, "speedup            {:.1}x", self.speedup)?;
        writeln!(f, "max discrepancy    {:.3e}", self.discrepancy)?;
        write!(f, "host               {} ({} thread)", self.host, self.threads)
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Times `repeats` runs of both solvers on one thread and compares their trajectories.
pub fn benchmark(f: &Signal, repeats: usize, cfg: &BaselineConfig) -> Result<BenchmarkReport> {
    if f.len() < MIN_BENCH_LEN {
        return Err(Error::invalid(format!(
            "benchmark needs a signal of length >= {MIN_BENCH_LEN}, got {}",
            f.len()
        )));
    }
    if cfg.variant != Variant::OneD {
        return Err(Error::invalid("benchmark compares 1D flows"));
    }
    let repeats = repeats.max(1);

    // Warm-up, also the flow used for the discrepancy.
    let flow = evolve(f, 0.0)?;
    let events = flow.num_events();
    std::hint::black_box(decompose(&flow));

    let mut fast = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        let flow = evolve(std::hint::black_box(f), 0.0)?;
        std::hint::black_box(decompose(&flow));
        fast.push(start.elapsed().as_secs_f64());
    }

    let mut slow = Vec::with_capacity(repeats);
    let mut steps = 0;
    for _ in 0..repeats {
        let start = Instant::now();
        let summary = baseline_run(f.values(), 1, f.len(), cfg, |_, s| {
            std::hint::black_box(s);
        })?;
        slow.push(start.elapsed().as_secs_f64());
        steps = summary.steps;
    }

    let discrepancy = sup_discrepancy(&flow, cfg)?;
    let (baseline_seconds, fast_seconds) = (median(slow), median(fast));
    Ok(BenchmarkReport {
        length: f.len(),
        repeats,
        dt: cfg.dt,
        events,
        baseline_steps: steps,
        baseline_seconds,
        fast_seconds,
        speedup: baseline_seconds / fast_seconds.max(f64::MIN_POSITIVE),
        discrepancy,
        threads: 1,
        host: format!("{}-{}", std::env::consts::ARCH, std::env::consts::OS),
    })
}
