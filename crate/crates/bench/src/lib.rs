//! Fixtures shared by the benchmarks.

use lightcast::linalg::{gram, DenseMatrix};
use lightcast::series::{make_windows, WindowedDataset};
use lightcast::synth::SynthSpec;

/// Windows over a noisy seasonal series of `n` points.
pub fn seasonal_windows(n: usize, d: usize) -> WindowedDataset {
    let series = SynthSpec::Seasonal {
        n,
        period: 12.0,
        amplitude: 10.0,
        trend: 0.01,
        level: 50.0,
        noise_sd: 1.0,
        seed: 3,
    }
    .generate()
    .expect("valid spec");
    make_windows(&series, d).expect("series longer than window")
}

/// Well-conditioned `n × n` SPD matrix and right-hand side.
pub fn spd_system(n: usize) -> (DenseMatrix, Vec<f64>) {
    let rows: Vec<Vec<f64>> = (0..2 * n).map(|i| (0..n).map(|j| weyl(i * n + j)).collect()).collect();
    let mut a = gram(&DenseMatrix::from_rows(&rows).expect("rectangular")).expect("gram");
    for i in 0..n {
        a[(i, i)] += 1.0;
    }
    let b = (0..n).map(|i| (i as f64).sin()).collect();
    (a, b)
}

fn weyl(k: usize) -> f64 {
    ((k as f64) * 0.7548776662).fract() - 0.5
}
