//! Shared workloads for the criterion benches.
//!
//! Every workload is seeded, so repeated runs time the same inputs.

use tvflow::synth;
use tvflow::tv2d::Image;
use tvflow::Signal;

/// Signal lengths of the 1D benches; 700 is the width of a typical photo row.
pub const LENGTHS: [usize; 4] = [64, 256, 700, 4096];

/// Side lengths of the square images of the 2D benches.
pub const IMAGE_SIDES: [usize; 2] = [32, 64];

pub const SEED: u64 = 2024;

/// Synthetic natural-image scan line of the given length.
pub fn row(len: usize) -> Signal {
    synth::natural_row(len, SEED)
}

/// Image whose rows are independent synthetic scan lines.
pub fn image(side: usize) -> Image {
    let data: Vec<f64> = (0..side as u64)
        .flat_map(|r| synth::natural_row(side, SEED + r).into_vec())
        .collect();
    Image::new(side, side, data).expect("finite pixels")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn workloads_have_the_requested_shape() {
        assert_eq!(row(700).len(), 700);
        let img = image(32);
        assert_eq!((img.rows(), img.cols()), (32, 32));
        assert_eq!(image(32), img);
    }
}
