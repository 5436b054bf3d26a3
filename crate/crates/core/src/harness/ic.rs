//! Initial conditions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::spectral::{Field, Grid};

/// Smooth data for convergence studies:
/// `phi0 = 0.3 cos(3x) + 0.5 cos(y)`, `rho0 = 0.2 sin(2x) + 0.25 sin(y)`.
pub fn ic_smooth(grid: Grid) -> (Field, Field) {
    (
        Field::from_fn(grid, |x, y| 0.3 * (3.0 * x).cos() + 0.5 * y.cos()),
        Field::from_fn(grid, |x, y| 0.2 * (2.0 * x).sin() + 0.25 * y.sin()),
    )
}

/// Uniform `[-1, 1]` noise from the generator with its spatial mean removed.
fn zero_mean_noise(grid: Grid, rng: &mut ChaCha8Rng) -> Field {
    let values: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Field::from_values(grid, values.into_iter().map(|v| v - mean).collect()).expect("length matches grid")
}

/// Quenched homogeneous mixture: `phi_bar + amp * noise`,
/// `rho_bar + amp * noise`.
///
/// Noise is drawn from ChaCha8 seeded with `seed` (all `phi` samples first,
/// then all `rho` samples, row-major) and made exactly mean-zero, so the
/// fields are reproducible across platforms and their means equal the
/// requested averages.
pub fn ic_spinodal(grid: Grid, phi_bar: f64, rho_bar: f64, amp: f64, seed: u64) -> (Field, Field) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi_noise = zero_mean_noise(grid, &mut rng);
    let rho_noise = zero_mean_noise(grid, &mut rng);
    (
        phi_noise.map(|n| phi_bar + amp * n),
        rho_noise.map(|n| rho_bar + amp * n),
    )
}
