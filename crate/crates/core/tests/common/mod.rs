#![allow(dead_code)]

use chsurf::model::ModelParams;
use chsurf::spectral::{Field, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random trigonometric polynomial with modes `|m|, |n| <= kmax`, as
/// coefficient list `(m, n, a_cos, a_sin)`.
pub fn random_modes(kmax: i32, amp: f64, seed: u64) -> Vec<(f64, f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    for m in 0..=kmax {
        for n in -kmax..=kmax {
            if m == 0 && n <= 0 {
                continue;
            }
            let decay = 1.0 / (1.0 + (m * m + n * n) as f64);
            modes.push((
                m as f64,
                n as f64,
                amp * decay * rng.gen_range(-1.0..1.0),
                amp * decay * rng.gen_range(-1.0..1.0),
            ));
        }
    }
    modes
}

pub fn eval_modes(modes: &[(f64, f64, f64, f64)], mean: f64, x: f64, y: f64) -> f64 {
    modes.iter().fold(mean, |acc, &(m, n, a, b)| {
        let arg = m * x + n * y;
        acc + a * arg.cos() + b * arg.sin()
    })
}

/// Analytic `(f_x, f_y, lap f)`.
pub fn eval_derivs(modes: &[(f64, f64, f64, f64)], x: f64, y: f64) -> (f64, f64, f64) {
    modes.iter().fold((0.0, 0.0, 0.0), |(fx, fy, lap), &(m, n, a, b)| {
        let arg = m * x + n * y;
        let d = -a * arg.sin() + b * arg.cos();
        let v = a * arg.cos() + b * arg.sin();
        (fx + m * d, fy + n * d, lap - (m * m + n * n) * v)
    })
}

pub fn smooth_field(grid: Grid, kmax: i32, amp: f64, mean: f64, seed: u64) -> Field {
    let modes = random_modes(kmax, amp, seed);
    Field::from_fn(grid, |x, y| eval_modes(&modes, mean, x, y))
}

/// Mean-zero uniform noise.
pub fn noise_field(grid: Grid, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = Field::from_values(grid, (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let m = f.mean();
    f.map(|v| v - m)
}

pub fn params() -> ModelParams {
    ModelParams::default()
}
