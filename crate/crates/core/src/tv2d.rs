//! Adaptive explicit scheme for the 2D anisotropic TV flow.
//!
//! Each step computes the exact 1D negative subgradient of every row (`Px`)
//! and every column (`Py`) and moves along `P = Px + Py` with the step
//! `dt = delta J_ani / ||P||^2`, for which
//! `||psi_{k+1}||^2 - ||psi_k||^2 = (delta^2 - 2 delta) J_ani^2 / ||P||^2`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tv1d::subgradient_of;

/// A snapshot is stored when the time has grown by this factor since the last one.
pub const SNAPSHOT_GROWTH: f64 = 1.05;

/// Relative violation of the per-step norm identity that is treated as a bug.
pub const IDENTITY_FAILURE: f64 = 1e-6;

/// Grayscale image stored row-major, with Neumann boundaries on both axes.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "{rows}x{cols} image needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite pixel at row {}, column {}",
                i / cols,
                i % cols
            )));
        }
        Ok(Image { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("image rows differ in length"));
        }
        Image::new(rows.len(), cols, rows.concat())
    }

    pub fn constant(rows: usize, cols: usize, value: f64) -> Result<Self> {
        Image::new(rows, cols, vec![value; rows * cols])
    }

    pub(crate) fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let data = (0..rows * cols).map(|i| f(i / cols, i % cols)).collect();
        Image { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Row-wise and column-wise negative subgradients of an image.
pub fn aniso_subgradients(img: &Image) -> (Image, Image) {
    let (m, k) = (img.rows, img.cols);
    let px: Vec<f64> = img
        .data
        .par_chunks(k)
        .flat_map_iter(|row| subgradient_of(row, 0.0))
        .collect();
    let cols: Vec<Vec<f64>> = (0..k)
        .into_par_iter()
        .map(|c| subgradient_of(&img.column(c), 0.0))
        .collect();
    let py = Image::from_fn(m, k, |r, c| cols[c][r]);
    (
        Image {
            rows: m,
            cols: k,
            data: px,
        },
        py,
    )
}

/// Anisotropic total variation: sum of absolute forward differences along both axes.
pub fn aniso_tv(img: &Image) -> f64 {
    let along_rows: f64 = img
        .data
        .chunks(img.cols)
        .map(|row| row.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>())
        .sum();
    let along_cols: f64 = img
        .data
        .windows(img.cols + 1)
        .map(|w| (w[img.cols] - w[0]).abs())
        .sum();
    along_rows + along_cols
}

/// One explicit step: the subgradients and the adaptive step size.
#[derive(Clone, Debug, PartialEq)]
pub struct AnisoStep {
    pub px: Image,
    pub py: Image,
    pub tv: f64,
    /// `||Px + Py||^2 / J_ani`.
    pub lambda_tilde: f64,
    pub dt: f64,
}

/// Computes the step at `img` for the given `delta`. `None` when `J_ani = 0`.
pub fn aniso_step(img: &Image, delta: f64) -> Result<Option<AnisoStep>> {
    check_delta(delta)?;
    step_at(img, delta, 0)
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 2.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("delta must lie in (0, 2), got {delta}")))
    }
}

fn step_at(img: &Image, delta: f64, index: usize) -> Result<Option<AnisoStep>> {
    let tv = aniso_tv(img);
    if tv == 0.0 {
        return Ok(None);
    }
    let (px, py) = aniso_subgradients(img);
    let p_sq: f64 = px.data.iter().zip(&py.data).map(|(a, b)| (a + b) * (a + b)).sum();
    if p_sq == 0.0 {
        return Err(Error::Stall { step: index, tv });
    }
    let lambda_tilde = p_sq / tv;
    Ok(Some(AnisoStep {
        px,
        py,
        tv,
        lambda_tilde,
        dt: delta / lambda_tilde,
    }))
}

/// Diagnostics of one explicit step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Time after the step.
    pub time: f64,
    pub dt: f64,
    /// `J_ani` before the step.
    pub tv: f64,
    pub lambda_tilde: f64,
    /// Measured `||psi_{k+1}||^2 - ||psi_k||^2`.
    pub norm_change: f64,
    /// `(delta^2 - 2 delta) J_ani^2 / ||P||^2`.
    pub predicted_change: f64,
}

impl StepRecord {
    /// Relative violation of the norm identity.
    pub fn identity_error(&self) -> f64 {
        (self.norm_change - self.predicted_change).abs() / self.predicted_change.abs()
    }
}

/// Thinned trajectory of the explicit anisotropic flow.
#[derive(Clone, Debug, PartialEq)]
pub struct AnisoTrajectory {
    pub delta: f64,
    pub mean: f64,
    pub initial_tv: f64,
    /// Times of the stored frames; the first is 0 and the last is the final step.
    pub times: Vec<f64>,
    pub frames: Vec<Image>,
    /// One record per step taken.
    pub steps: Vec<StepRecord>,
    /// Whether `J_ani` fell to the stopping level within the step budget.
    pub converged: bool,
}

impl AnisoTrajectory {
    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn final_frame(&self) -> &Image {
        self.frames.last().expect("trajectory has an initial frame")
    }

    pub fn max_identity_error(&self) -> f64 {
        self.steps.iter().map(StepRecord::identity_error).fold(0.0, f64::max)
    }
}

/// Runs the explicit scheme until `J_ani <= stop_ratio J_ani(psi_0)` or `max_steps` steps.
///
/// The flow preserves the mean, so it is evolved on the zero-mean part of the
/// image; this keeps the per-step norm changes free of cancellation against
/// the constant.
pub fn aniso_flow(img: &Image, delta: f64, stop_ratio: f64, max_steps: usize) -> Result<AnisoTrajectory> {
    check_delta(delta)?;
    if stop_ratio.is_nan() || stop_ratio < 0.0 {
        return Err(Error::invalid("stop ratio must be >= 0"));
    }
    let mean = img.mean();
    let mut psi = img.map(|v| v - mean);
    let initial_tv = aniso_tv(&psi);
    let mut out = AnisoTrajectory {
        delta,
        mean,
        initial_tv,
        times: vec![0.0],
        frames: vec![img.clone()],
        steps: Vec::new(),
        converged: initial_tv == 0.0,
    };
    let stop_tv = stop_ratio * initial_tv;
    let mut t = 0.0;
    let mut last_kept = 0.0;
    let mut tv = initial_tv;

    while !out.converged && out.steps.len() < max_steps {
        let index = out.steps.len();
        let Some(step) = step_at(&psi, delta, index)? else {
            out.converged = true;
            break;
        };
        let next_data: Vec<f64> = psi
            .data
            .iter()
            .zip(step.px.data.iter().zip(&step.py.data))
            .map(|(v, (a, b))| v + step.dt * (a + b))
            .collect();
        let norm_change: f64 = next_data.iter().zip(&psi.data).map(|(n, o)| (n - o) * (n + o)).sum();
        let predicted_change = (delta * delta - 2.0 * delta) * step.tv / step.lambda_tilde;
        let record = StepRecord {
            time: t + step.dt,
            dt: step.dt,
            tv: step.tv,
            lambda_tilde: step.lambda_tilde,
            norm_change,
            predicted_change,
        };
        if record.identity_error() > IDENTITY_FAILURE {
            return Err(Error::Internal(format!(
                "norm identity violated at step {index}: measured {norm_change:e}, predicted {predicted_change:e}"
            )));
        }
        t = record.time;
        psi.data = next_data;
        out.steps.push(record);
        tv = aniso_tv(&psi);
        out.converged = tv <= stop_tv;
        if t >= SNAPSHOT_GROWTH * last_kept || out.converged || out.steps.len() == max_steps {
            last_kept = t;
            out.times.push(t);
            out.frames.push(psi.map(|v| v + mean));
        }
    }
    debug_assert!(tv >= 0.0);
    Ok(out)
}

/// Numerical spectral bands of a 2D trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct Bands2d {
    /// Half-open time intervals `[lo, hi)`.
    pub edges: Vec<(f64, f64)>,
    pub bands: Vec<Image>,
    /// Structure not resolved by the time grid: what remains at the end of the trajectory.
    pub residual: Image,
    pub mean: f64,
    /// Spacing of the uniform time grid.
    pub grid_step: f64,
}

/// Linear interpolation of the trajectory at time `t`.
fn frame_at(traj: &AnisoTrajectory, t: f64) -> Vec<f64> {
    let i = traj.times.partition_point(|&s| s <= t);
    if i == 0 {
        return traj.frames[0].data.clone();
    }
    if i == traj.times.len() {
        return traj.final_frame().data.clone();
    }
    let (t0, t1) = (traj.times[i - 1], traj.times[i]);
    let w = (t - t0) / (t1 - t0);
    traj.frames[i - 1]
        .data
        .iter()
        .zip(&traj.frames[i].data)
        .map(|(a, b)| a + w * (b - a))
        .collect()
}

/// Integrates `t psi''(t)` over each band on a uniform grid of `samples` times
/// spanning the trajectory plus one extra step.
///
/// Second differences are taken on the resampled trajectory. By summation by
/// parts the bands covering `[0, infinity)` plus the residual and the mean
/// reproduce the initial image up to rounding.
pub fn spectral_bands_2d(traj: &AnisoTrajectory, edges: &[(f64, f64)], samples: usize) -> Result<Bands2d> {
    if samples < 3 {
        return Err(Error::invalid("band integration needs at least 3 time samples"));
    }
    if let Some((lo, hi)) = edges.iter().find(|(lo, hi)| !(*lo >= 0.0 && lo < hi)) {
        return Err(Error::invalid(format!("band [{lo}, {hi}) must satisfy 0 <= lo < hi")));
    }
    let first = &traj.frames[0];
    let (m, k) = (first.rows, first.cols);
    let zeros = Image::from_fn(m, k, |_, _| 0.0);
    let t_end = traj.final_time();
    if t_end == 0.0 {
        return Ok(Bands2d {
            edges: edges.to_vec(),
            bands: vec![zeros; edges.len()],
            residual: first.map(|v| v - traj.mean),
            mean: traj.mean,
            grid_step: 0.0,
        });
    }

    // The grid runs one step past the final frame so that a kink at the end
    // of the trajectory is still an interior point.
    let h = t_end / (samples - 2) as f64;
    let grid: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|j| frame_at(traj, j as f64 * h))
        .collect();
    let mut bands = vec![vec![0.0; m * k]; edges.len()];
    for j in 1..samples - 1 {
        let t = j as f64 * h;
        for (band, _) in bands.iter_mut().zip(edges).filter(|(_, (lo, hi))| *lo <= t && t < *hi) {
            for (i, b) in band.iter_mut().enumerate() {
                *b += t * (grid[j + 1][i] - 2.0 * grid[j][i] + grid[j - 1][i]) / h;
            }
        }
    }
    let t_tail = (samples - 2) as f64 * h;
    let residual = Image::from_fn(m, k, |r, c| {
        let i = r * k + c;
        grid[samples - 2][i] - traj.mean - t_tail * (grid[samples - 1][i] - grid[samples - 2][i]) / h
    });
    Ok(Bands2d {
        edges: edges.to_vec(),
        bands: bands
            .into_iter()
            .map(|data| Image { rows: m, cols: k, data })
            .collect(),
        residual,
        mean: traj.mean,
        grid_step: h,
    })
}
