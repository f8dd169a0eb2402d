//! Shared inputs for the benchmarks in `benches/`.

use elgauss_core::align::to_grayscale;
use elgauss_core::synth::{board, BoardSpec};
use elgauss_core::{Ellipse, GrayImage};

/// Two overlapping ellipses with semi-diameters of `size` and `size / 2`.
pub fn ellipse_pair(size: f64) -> (Ellipse, Ellipse) {
    let a = Ellipse::new(0.0, 0.0, size, size / 2.0, 0.3).expect("valid ellipse");
    let b = Ellipse::new(size / 4.0, size / 8.0, size * 0.9, size * 0.6, -0.4).expect("valid ellipse");
    (a, b)
}

/// A jittered synthetic board, `width` columns wide, as grey levels.
pub fn jittered_board(width: usize) -> GrayImage {
    let spec = BoardSpec {
        width,
        ..BoardSpec::default()
    };
    to_grayscale(&board(&spec, 42).jittered)
}
