//! Seeded synthetic inputs for tests, benchmarks and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tv1d::Signal;
use crate::tv2d::Image;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform values in `[0, 1)`.
pub fn uniform_signal(len: usize, seed: u64) -> Signal {
    let mut r = rng(seed);
    Signal::new((0..len.max(1)).map(|_| r.random::<f64>()).collect()).expect("finite samples")
}

/// Uniform pixels in `[0, 1)`.
pub fn uniform_image(rows: usize, cols: usize, seed: u64) -> Image {
    let mut r = rng(seed);
    Image::new(rows, cols, (0..rows * cols).map(|_| r.random::<f64>()).collect()).expect("finite pixels")
}

/// A scan line resembling a row of a natural photograph: piecewise-constant
/// objects with sharp edges, smooth shading, fine texture and sensor noise,
/// quantized to 8 bits and scaled to `[0, 1]`.
pub fn natural_row(len: usize, seed: u64) -> Signal {
    let len = len.max(1);
    let mut r = rng(seed);
    let mut objects = vec![0.0; len];
    let mut level = r.random::<f64>();
    let mut i = 0;
    while i < len {
        let width = r.random_range(4..=len.div_ceil(8).max(5));
        for v in objects.iter_mut().skip(i).take(width) {
            *v = level;
        }
        i += width;
        level = (level + r.random_range(-0.35..0.35)).clamp(0.05, 0.95);
    }
    let phase = r.random::<f64>() * std::f64::consts::TAU;
    let values = objects
        .iter()
        .enumerate()
        .map(|(i, &o)| {
            let x = i as f64 / len as f64;
            let shading = 0.08 * (std::f64::consts::TAU * 1.5 * x + phase).sin();
            let texture = 0.02 * (i as f64 * 0.9).sin() * (i as f64 * 0.13).cos();
            let noise = 0.015 * (r.random::<f64>() - 0.5);
            let v = (o + shading + texture + noise).clamp(0.0, 1.0);
            (v * 255.0).round() / 255.0
        })
        .collect();
    Signal::new(values).expect("finite samples")
}

/// Indicator of `[start, start + width)` on a signal of length `len`, times `height`.
pub fn box_pulse(len: usize, start: usize, width: usize, height: f64) -> Signal {
    Signal::new(
        (0..len)
            .map(|i| if i >= start && i < start + width { height } else { 0.0 })
            .collect(),
    )
    .expect("finite samples")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_for_a_seed() {
        assert_eq!(natural_row(100, 4), natural_row(100, 4));
        assert_ne!(natural_row(100, 4), natural_row(100, 5));
        assert_eq!(uniform_signal(10, 1), uniform_signal(10, 1));
    }

    #[test]
    fn natural_row_is_quantized_and_in_range() {
        let row = natural_row(700, 0);
        assert_eq!(row.len(), 700);
        assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(row.iter().all(|&v| ((v * 255.0).round() - v * 255.0).abs() < 1e-9));
    }

    #[test]
    fn box_pulse_shape() {
        assert_eq!(box_pulse(6, 2, 2, 1.0).values(), &[0., 0., 1., 1., 0., 0.]);
    }
}
