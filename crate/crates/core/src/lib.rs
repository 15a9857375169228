//! Fast exact total-variation flow and its spectral decomposition.
//!
//! The 1D flow is solved event by event ([`tv1d`]), which makes the TV
//! spectral decomposition a closed-form byproduct ([`spectral`]). The same
//! event list drives the time-rescaled DMD analysis ([`rdmd`]) and a
//! decay-profile Koopman fit ([`kmd`]). [`tv2d`] extends the fast subgradient
//! to an adaptive explicit scheme for the anisotropic 2D flow, and
//! [`baseline`] is the slow implicit reference solver.

pub mod baseline;
pub mod dmd;
pub mod error;
pub mod io;
pub mod kmd;
pub mod rdmd;
pub mod spectral;
pub mod synth;
pub mod tv1d;
pub mod tv2d;

pub use error::{Error, Result};
pub use tv1d::{
    detect_plateaus, evolve, next_merge_time, sample, subgradient, NegSubgradient, PiecewiseFlow, PlateauPartition,
    Signal,
};
pub use spectral::{decompose, filter_band, spectrum, SpectralComponent, SpectralSet, SpectrumAtom};
pub use kmd::{build_dictionary, fit, koopman_eigenfunction, DecayFit, ProfileDictionary};
pub use tv2d::{aniso_flow, aniso_subgradients, aniso_tv, spectral_bands_2d, AnisoTrajectory, Bands2d, Image};
pub use baseline::{baseline_flow, baseline_flow_2d, benchmark, BaselineConfig, BenchmarkReport, Variant};
pub use nalgebra;
