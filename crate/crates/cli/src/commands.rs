use std::io::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use tvflow::baseline::{self, baseline_run, BaselineConfig, Variant};
use tvflow::io;
use tvflow::kmd::{build_dictionary, fit};
use tvflow::nalgebra::DMatrix;
use tvflow::rdmd::{rdmd_from, rdmd_relative_error, recover_components, reparametrize, Reparametrization, SegmentModes};
use tvflow::tv2d::{aniso_flow, spectral_bands_2d, AnisoTrajectory};
use tvflow::{decompose, evolve, filter_band, spectrum, synth, Error, PiecewiseFlow, SpectralSet};

use crate::args::{
    Bands2dArgs, BenchArgs, FilterArgs, Flow2dArgs, FlowArgs, Input1d, Input2d, KmdArgs, RdmdArgs, SpectrumArgs,
};

pub type Result<T> = std::result::Result<T, Error>;

/// Writes to `out` atomically, or to standard output.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => io::write_atomic(path, text.as_bytes()),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(path) => io::write_json(path, value),
        None => emit(None, &(serde_json::to_string_pretty(value)? + "\n")),
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// A flow JSON is read as is; a signal CSV is evolved.
fn load_flow(input: &Input1d) -> Result<PiecewiseFlow> {
    if is_json(&input.input) {
        io::read_json(&input.input)
    } else {
        evolve(&io::read_signal_csv(&input.input)?, input.tol)
    }
}

fn verify_1d(flow: &PiecewiseFlow, dt: f64) -> Result<()> {
    let cfg = BaselineConfig::new(dt, Variant::OneD);
    let d = baseline::sup_discrepancy(flow, &cfg)?;
    eprintln!("verify: max relative L2 discrepancy to the implicit reference (dt = {dt:e}): {d:.3e}");
    Ok(())
}

pub fn flow(args: &FlowArgs) -> Result<()> {
    let flow = load_flow(&args.input)?;
    eprintln!(
        "{} events, extinction time {}, mean {}",
        flow.num_events(),
        flow.extinction_time(),
        flow.mean()
    );
    if args.verify {
        verify_1d(&flow, args.dt)?;
    }
    emit_json(args.out.as_deref(), &flow)
}

pub fn spectrum_cmd(args: &SpectrumArgs) -> Result<()> {
    let set = decompose(&load_flow(&args.input)?);
    match args.out.as_deref() {
        Some(path) if is_json(path) => io::write_json(path, &set),
        out => emit(out, &io::format_spectrum_csv(&spectrum(&set))),
    }
}

pub fn filter(args: &FilterArgs) -> Result<()> {
    let flow = load_flow(&args.input)?;
    if args.verify {
        verify_1d(&flow, args.verify_dt)?;
    }
    let set = decompose(&flow);
    let (lo, hi) = args.band.resolve(flow.extinction_time());
    let band = filter_band(&set, flow.initial().len(), lo, hi, args.include_mean)?;
    let kept = set.times().iter().filter(|&&t| lo <= t && t < hi).count();
    eprintln!("band [{lo}, {hi}): {kept} of {} components", set.len());
    emit(args.out.as_deref(), &io::format_signal_csv(band.values()))
}

#[derive(Serialize)]
struct RdmdReport<'a> {
    reparametrization: &'a Reparametrization,
    segments: &'a [SegmentModes],
    components: &'a SpectralSet,
    relative_error: f64,
}

pub fn rdmd(args: &RdmdArgs) -> Result<()> {
    let set = decompose(&load_flow(&args.input)?);
    if set.is_empty() {
        return Err(Error::InvalidInput("the signal is constant; there is nothing to decompose".into()));
    }
    let rep = reparametrize(&set)?;
    let segments = rdmd_from(&set, &rep, args.dt)?;
    let components = recover_components(&segments, &rep)?;
    let relative_error = rdmd_relative_error(&segments, &set, &rep);
    eprintln!("{} segments, relative reconstruction error {relative_error:.3e}", segments.len());
    emit_json(
        args.out.as_deref(),
        &RdmdReport {
            reparametrization: &rep,
            segments: &segments,
            components: &components,
            relative_error,
        },
    )
}

pub fn kmd(args: &KmdArgs) -> Result<()> {
    let flow = load_flow(&args.input)?;
    let set = decompose(&flow);
    let m = flow.initial().len();
    let t_end = flow.extinction_time();
    let horizon = if t_end > 0.0 { args.horizon * t_end } else { 1.0 };
    let dt = args.dt.unwrap_or(horizon / 256.0);
    let samples = (horizon / dt).ceil() as usize + 1;

    let mut snapshots = DMatrix::zeros(m, samples);
    for j in 0..samples {
        for (i, v) in set.evaluate(m, j as f64 * dt).into_iter().enumerate() {
            snapshots[(i, j)] = v;
        }
    }
    if args.noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        let normal = Normal::new(0.0, args.noise).map_err(|e| Error::InvalidInput(e.to_string()))?;
        snapshots.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    }

    let rate_max = match args.rate_max {
        Some(r) => r,
        None => set.times().first().map_or(1.0, |t1| 1.25 / t1),
    };
    let rates: Vec<f64> = (1..=args.atoms)
        .map(|k| -rate_max * k as f64 / args.atoms as f64)
        .collect();
    let dict = build_dictionary(&rates, dt, samples)?;
    let result = fit(&snapshots, &dict, args.sparsity, args.threshold)?;
    eprintln!(
        "{} active rates {:?}, relative residual {:.3e}{}",
        result.active_lambdas.len(),
        result.active_lambdas,
        result.residual,
        if result.ill_conditioned {
            " (stopped: ill-conditioned active set)"
        } else {
            ""
        }
    );
    emit_json(args.out.as_deref(), &result)
}

fn run_2d(input: &Input2d) -> Result<AnisoTrajectory> {
    let img = io::read_image(&input.input)?;
    let traj = aniso_flow(&img, input.delta, input.stop_ratio, input.max_steps)?;
    eprintln!(
        "{} steps to t = {}, {} frames kept, max norm-identity error {:.3e}{}",
        traj.steps.len(),
        traj.final_time(),
        traj.frames.len(),
        traj.max_identity_error(),
        if traj.converged { "" } else { " (step budget exhausted)" }
    );
    Ok(traj)
}

/// Largest `||frame - reference(t)|| / ||f||` over the stored frames, with the
/// reference taken at the nearest multiple of `dt`.
fn verify_2d(traj: &AnisoTrajectory, dt: f64) -> Result<f64> {
    let first = &traj.frames[0];
    let scale = first.norm();
    let targets: Vec<usize> = traj.times.iter().map(|t| (t / dt).round() as usize).collect();
    let mut worst: f64 = 0.0;
    let mut last = first.data().to_vec();
    let mut step = 0usize;
    let cfg = BaselineConfig::new(dt, Variant::Anisotropic);
    let distance = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    baseline_run(first.data(), first.rows(), first.cols(), &cfg, |_, state| {
        for (frame, _) in traj.frames.iter().zip(&targets).filter(|(_, &k)| k == step) {
            worst = worst.max(distance(frame.data(), state) / scale);
        }
        last.copy_from_slice(state);
        step += 1;
    })?;
    for (frame, _) in traj.frames.iter().zip(&targets).filter(|(_, &k)| k >= step) {
        worst = worst.max(distance(frame.data(), &last) / scale);
    }
    Ok(worst)
}

pub fn flow2d(args: &Flow2dArgs) -> Result<()> {
    let traj = run_2d(&args.input)?;
    if args.verify {
        let d = verify_2d(&traj, args.dt)?;
        eprintln!("verify: max relative L2 discrepancy to the implicit reference (dt = {:e}): {d:.3e}", args.dt);
    }
    let index = io::write_trajectory_dir(&args.out, &traj)?;
    eprintln!("wrote {} frames to {}", index.frames.len(), args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct BandsIndex {
    edges: Vec<(f64, f64)>,
    files: Vec<String>,
    residual: String,
    mean: f64,
    grid_step: f64,
    final_time: f64,
}

pub fn bands2d(args: &Bands2dArgs) -> Result<()> {
    let traj = run_2d(&args.input)?;
    let total = traj.final_time();
    let edges: Vec<(f64, f64)> = args.bands.iter().map(|b| b.resolve(total)).collect();
    let bands = spectral_bands_2d(&traj, &edges, args.samples)?;
    std::fs::create_dir_all(&args.out)?;
    let mut files = Vec::with_capacity(bands.bands.len());
    for (i, band) in bands.bands.iter().enumerate() {
        let name = format!("band_{i:02}.csv");
        io::write_matrix_csv(&args.out.join(&name), band)?;
        files.push(name);
    }
    io::write_matrix_csv(&args.out.join("residual.csv"), &bands.residual)?;
    io::write_json(
        &args.out.join("index.json"),
        &BandsIndex {
            edges,
            files,
            residual: "residual.csv".into(),
            mean: bands.mean,
            grid_step: bands.grid_step,
            final_time: total,
        },
    )?;
    eprintln!("wrote {} bands to {}", bands.bands.len(), args.out.display());
    Ok(())
}

pub fn bench(args: &BenchArgs) -> Result<()> {
    let signal = match &args.input {
        Some(path) => io::read_signal_csv(path)?,
        None => synth::natural_row(args.length, args.seed),
    };
    let report = baseline::benchmark(&signal, args.repeats, &BaselineConfig::new(args.dt, Variant::OneD))?;
    println!("{report}");
    if let Some(path) = &args.out {
        io::write_json(path, &report)?;
    }
    Ok(())
}
