//! Fluid-surfactant free energy, chemical potentials and the quadratized
//! (auxiliary-variable) formulation.
//!
//! The free energy of a pair `(phi, rho)` is
//!
//! ```text
//! E = int  1/2 |grad phi|^2 + alpha/2 (lap phi)^2 + (phi^2 - 1)^2 / (4 eps^2)
//!        + beta/2 |grad rho|^2 + rho^2 (rho - rho_s)^2 / (4 eta^2)
//!        - theta rho |grad phi|^2  dx
//! ```
//!
//! The quadratized energy replaces the two quartic wells by `U^2 / (4 eps^2)`
//! and `V^2 / (4 eta^2)` with `U = phi^2 - 1` and `V = rho (rho - rho_s)`.
//!
//! Gradient-squared integrals use [`Spectral::dirichlet`] so that the energy
//! pairs exactly with the discrete Laplacian used by the time steppers.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::spectral::{inner_unchecked, Field, Grid, Spectral};

/// Physical constants of the model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    m_phi: f64,
    m_rho: f64,
    alpha: f64,
    beta: f64,
    eps: f64,
    eta: f64,
    theta: f64,
    rho_s: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            m_phi: 2.5e-4,
            m_rho: 2.5e-4,
            alpha: 2.5e-4,
            beta: 1.0,
            eps: 0.05,
            eta: 0.08,
            theta: 0.3,
            rho_s: 1.0,
        }
    }
}

impl ModelParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        m_phi: f64,
        m_rho: f64,
        alpha: f64,
        beta: f64,
        eps: f64,
        eta: f64,
        theta: f64,
        rho_s: f64,
    ) -> Result<Self> {
        let p = ModelParams {
            m_phi,
            m_rho,
            alpha,
            beta,
            eps,
            eta,
            theta,
            rho_s,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("m_phi", self.m_phi),
            ("m_rho", self.m_rho),
            ("beta", self.beta),
            ("eps", self.eps),
            ("eta", self.eta),
            ("rho_s", self.rho_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        for (name, v) in [("alpha", self.alpha), ("theta", self.theta)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn m_phi(&self) -> f64 {
        self.m_phi
    }
    pub fn m_rho(&self) -> f64 {
        self.m_rho
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn eps(&self) -> f64 {
        self.eps
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn rho_s(&self) -> f64 {
        self.rho_s
    }
}

/// Partial parameter set, e.g. from a config file. Unset entries keep the
/// base value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    pub m_phi: Option<f64>,
    pub m_rho: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub eps: Option<f64>,
    pub eta: Option<f64>,
    pub theta: Option<f64>,
    pub rho_s: Option<f64>,
}

impl ParamOverrides {
    pub fn apply(&self, base: ModelParams) -> Result<ModelParams> {
        ModelParams::new(
            self.m_phi.unwrap_or(base.m_phi),
            self.m_rho.unwrap_or(base.m_rho),
            self.alpha.unwrap_or(base.alpha),
            self.beta.unwrap_or(base.beta),
            self.eps.unwrap_or(base.eps),
            self.eta.unwrap_or(base.eta),
            self.theta.unwrap_or(base.theta),
            self.rho_s.unwrap_or(base.rho_s),
        )
    }
}

/// Fields of one earlier time level, kept for two-step schemes.
#[derive(Clone, Debug, PartialEq)]
pub struct History {
    pub phi: Field,
    pub rho: Field,
    pub u_aux: Field,
    pub v_aux: Field,
}

/// Solution at one time level.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub phi: Field,
    pub rho: Field,
    pub u_aux: Field,
    pub v_aux: Field,
    pub time: f64,
    pub step: u64,
    pub prev: Option<History>,
}

impl SimState {
    /// Initial state at `t = 0` with the auxiliary variables set exactly
    /// from the phase fields.
    pub fn initial(phi0: Field, rho0: Field, p: &ModelParams) -> Result<Self> {
        ensure_grids(&[&phi0, &rho0])?;
        let (u_aux, v_aux) = init_aux(&phi0, &rho0, p);
        Ok(SimState {
            phi: phi0,
            rho: rho0,
            u_aux,
            v_aux,
            time: 0.0,
            step: 0,
            prev: None,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.phi.grid()
    }

    pub fn validate(&self) -> Result<()> {
        ensure_grids(&[&self.phi, &self.rho, &self.u_aux, &self.v_aux])?;
        if let Some(h) = &self.prev {
            ensure_grids(&[&self.phi, &h.phi, &h.rho, &h.u_aux, &h.v_aux])?;
        }
        Ok(())
    }

    pub(crate) fn as_history(&self) -> History {
        History {
            phi: self.phi.clone(),
            rho: self.rho.clone(),
            u_aux: self.u_aux.clone(),
            v_aux: self.v_aux.clone(),
        }
    }
}

pub(crate) fn ensure_grids(fields: &[&Field]) -> Result<()> {
    let first = fields[0].grid();
    for f in &fields[1..] {
        if f.grid() != first {
            return Err(Error::GridMismatch {
                left: first.to_string(),
                right: f.grid().to_string(),
            });
        }
    }
    Ok(())
}

/// `H(phi) = phi`
pub fn h_of(phi: &Field) -> Field {
    phi.clone()
}

/// `G(rho) = rho - rho_s / 2`
pub fn g_of(rho: &Field, p: &ModelParams) -> Field {
    let half = 0.5 * p.rho_s;
    rho.map(|r| r - half)
}

/// Auxiliary variables `U = phi^2 - 1`, `V = rho (rho - rho_s)`.
pub fn init_aux(phi0: &Field, rho0: &Field, p: &ModelParams) -> (Field, Field) {
    let rho_s = p.rho_s;
    (phi0.map(|f| f * f - 1.0), rho0.map(|r| r * (r - rho_s)))
}

/// Terms shared by both energies: everything except the two wells.
fn quadratic_part(sp: &Spectral, phi: &Field, rho: &Field, p: &ModelParams) -> f64 {
    let lap = sp.laplacian(phi);
    0.5 * sp.dirichlet(phi) + 0.5 * p.alpha * inner_unchecked(&lap, &lap)
        + 0.5 * p.beta * sp.dirichlet(rho)
        - p.theta * inner_unchecked(rho, &sp.grad_sq(phi))
}

fn sum_sq(f: &Field) -> f64 {
    inner_unchecked(f, f)
}

/// Original free energy `E(phi, rho)`.
pub fn energy_original(sp: &Spectral, phi: &Field, rho: &Field, p: &ModelParams) -> Result<f64> {
    ensure_grids(&[phi, rho])?;
    let (u, v) = init_aux(phi, rho, p);
    Ok(quadratic_part(sp, phi, rho, p)
        + sum_sq(&u) / (4.0 * p.eps * p.eps)
        + sum_sq(&v) / (4.0 * p.eta * p.eta))
}

/// Quadratized energy with the state's own auxiliary variables.
pub fn energy_quadratized(sp: &Spectral, state: &SimState, p: &ModelParams) -> Result<f64> {
    ensure_grids(&[&state.phi, &state.rho, &state.u_aux, &state.v_aux])?;
    Ok(quadratic_part(sp, &state.phi, &state.rho, p)
        + sum_sq(&state.u_aux) / (4.0 * p.eps * p.eps)
        + sum_sq(&state.v_aux) / (4.0 * p.eta * p.eta))
}

/// `mu_phi = -lap phi + alpha lap^2 phi + phi (phi^2 - 1) / eps^2 + 2 theta div(rho grad phi)`
pub fn mu_phi_continuous(sp: &Spectral, phi: &Field, rho: &Field, p: &ModelParams) -> Result<Field> {
    ensure_grids(&[phi, rho])?;
    let inv_eps2 = 1.0 / (p.eps * p.eps);
    let mut mu = sp.apply_symbol(phi, |k2| k2 + p.alpha * k2 * k2);
    mu.axpy(1.0, &phi.map(|f| inv_eps2 * f * (f * f - 1.0)));
    mu.axpy(2.0 * p.theta, &sp.div_a_grad(rho, phi));
    Ok(mu)
}

/// `mu_rho = -beta lap rho + rho (rho - rho_s)(rho - rho_s/2) / eta^2 - theta |grad phi|^2`
pub fn mu_rho_continuous(sp: &Spectral, phi: &Field, rho: &Field, p: &ModelParams) -> Result<Field> {
    ensure_grids(&[phi, rho])?;
    let inv_eta2 = 1.0 / (p.eta * p.eta);
    let rho_s = p.rho_s;
    let mut mu = sp.apply_symbol(rho, |k2| p.beta * k2);
    mu.axpy(
        1.0,
        &rho.map(|r| inv_eta2 * r * (r - rho_s) * (r - 0.5 * rho_s)),
    );
    mu.axpy(-p.theta, &sp.grad_sq(phi));
    Ok(mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn smooth_random(grid: Grid, seed: u64, kmax: i32, amp: f64, offset: f64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut terms = Vec::new();
        for mx in -kmax..=kmax {
            for my in -kmax..=kmax {
                terms.push((mx as f64, my as f64, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..6.28)));
            }
        }
        Field::from_fn(grid, |x, y| {
            offset
                + amp
                    * terms
                        .iter()
                        .map(|&(a, b, c, ph)| c * (a * x + b * y + ph).cos() / (1.0 + a * a + b * b))
                        .sum::<f64>()
        })
    }

    #[test]
    fn params_validate() {
        assert!(ModelParams::new(1.0, 1.0, 0.0, 1.0, 0.1, 0.1, 0.0, 1.0).is_ok());
        assert!(ModelParams::new(0.0, 1.0, 0.0, 1.0, 0.1, 0.1, 0.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, -1.0, 1.0, 0.1, 0.1, 0.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, 0.0, 1.0, 0.1, 0.1, f64::NAN, 1.0).is_err());
        let over = ParamOverrides {
            theta: Some(0.1),
            ..Default::default()
        };
        let p = over.apply(ModelParams::default()).unwrap();
        assert_eq!(p.theta(), 0.1);
        assert_eq!(p.eps(), 0.05);
    }

    #[test]
    fn defaults_match_experiment_values() {
        let p = ModelParams::default();
        assert_eq!(
            (p.m_phi(), p.m_rho(), p.alpha(), p.beta(), p.eps(), p.eta(), p.theta(), p.rho_s()),
            (2.5e-4, 2.5e-4, 2.5e-4, 1.0, 0.05, 0.08, 0.3, 1.0)
        );
    }

    #[test]
    fn energy_of_constant_states() {
        let grid = Grid::square(32).unwrap();
        let sp = Spectral::new(grid);
        let p = ModelParams::default();
        let e = energy_original(&sp, &Field::constant(grid, 1.0), &Field::zeros(grid), &p).unwrap();
        assert!(e.abs() < 1e-12);
        // phi = 0: only the phi well contributes, |Omega| / (4 eps^2) = 400 pi^2.
        let e = energy_original(&sp, &Field::zeros(grid), &Field::zeros(grid), &p).unwrap();
        assert_relative_eq!(e, 400.0 * PI * PI, max_relative = 1e-12);
    }

    #[test]
    fn energy_of_cosine_matches_closed_form() {
        let grid = Grid::square(64).unwrap();
        let sp = Spectral::new(grid);
        let p = ModelParams::default();
        let phi = Field::from_fn(grid, |x, _| x.cos());
        let e = energy_original(&sp, &phi, &Field::zeros(grid), &p).unwrap();
        // int sin^2 = int cos^2 = 2 pi^2, int sin^4 = 3 pi^2 / 2 over [0, 2pi]^2
        let exact = 0.5 * 2.0 * PI * PI
            + 0.5 * p.alpha() * 2.0 * PI * PI
            + (1.5 * PI * PI) / (4.0 * p.eps() * p.eps());
        assert_relative_eq!(e, exact, max_relative = 1e-12);
    }

    #[test]
    fn substitution_identity() {
        let grid = Grid::square(32).unwrap();
        let sp = Spectral::new(grid);
        let p = ModelParams::default();
        let phi = smooth_random(grid, 1, 4, 1.0, 0.0);
        let rho = smooth_random(grid, 2, 4, 0.3, 0.2);
        let state = SimState::initial(phi.clone(), rho.clone(), &p).unwrap();
        let e0 = energy_original(&sp, &phi, &rho, &p).unwrap();
        let e1 = energy_quadratized(&sp, &state, &p).unwrap();
        assert_relative_eq!(e0, e1, max_relative = 1e-10);

        let flat = SimState::initial(Field::constant(grid, 1.0), Field::zeros(grid), &p).unwrap();
        assert!(energy_quadratized(&sp, &flat, &p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn chemical_potentials_of_constant_states() {
        let grid = Grid::square(16).unwrap();
        let sp = Spectral::new(grid);
        let p = ModelParams::default();
        let one = Field::constant(grid, 1.0);
        let zero = Field::zeros(grid);
        assert!(mu_phi_continuous(&sp, &one, &zero, &p).unwrap().max_abs() < 1e-12);
        assert!(mu_phi_continuous(&sp, &(&one * -1.0), &Field::constant(grid, 0.4), &p)
            .unwrap()
            .max_abs()
            < 1e-12);
        assert!(mu_rho_continuous(&sp, &Field::constant(grid, 0.3), &zero, &p).unwrap().max_abs() < 1e-12);
        assert!(mu_rho_continuous(&sp, &zero, &Field::constant(grid, p.rho_s()), &p)
            .unwrap()
            .max_abs()
            < 1e-12);
    }

    #[test]
    fn mu_phi_of_cosine() {
        let grid = Grid::square(64).unwrap();
        let sp = Spectral::new(grid);
        let p = ModelParams::default();
        let phi = Field::from_fn(grid, |x, _| x.cos());
        let mu = mu_phi_continuous(&sp, &phi, &Field::zeros(grid), &p).unwrap();
        let inv = 1.0 / (p.eps() * p.eps());
        let expected = Field::from_fn(grid, |x, _| {
            let c = x.cos();
            c + p.alpha() * c + inv * (c * c * c - c)
        });
        assert!((&mu - &expected).max_abs() < 1e-10);
    }

    #[test]
    fn h_g_and_aux() {
        let grid = Grid::square(8).unwrap();
        let p = ModelParams::default();
        assert_eq!(h_of(&Field::zeros(grid)).max_abs(), 0.0);
        assert_eq!(g_of(&Field::constant(grid, 0.5), &p).max_abs(), 0.0);
        let (u, v) = init_aux(&Field::constant(grid, 1.0), &Field::zeros(grid), &p);
        assert_eq!(u.max_abs(), 0.0);
        assert_eq!(v.max_abs(), 0.0);

        let phi = smooth_random(grid, 3, 2, 1.0, 0.1);
        let rho = smooth_random(grid, 4, 2, 1.0, 0.3);
        let (u, v) = init_aux(&phi, &rho, &p);
        let g = g_of(&rho, &p);
        for k in 0..grid.len() {
            let (f, r) = (phi.values()[k], rho.values()[k]);
            assert_eq!(u.values()[k], f * f - 1.0);
            assert_eq!(v.values()[k], r * (r - 1.0));
            assert_eq!(g.values()[k], r - 0.5);
        }
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let sp = Spectral::new(Grid::square(8).unwrap());
        let a = Field::zeros(Grid::square(8).unwrap());
        let b = Field::zeros(Grid::square(16).unwrap());
        assert!(matches!(energy_original(&sp, &a, &b, &ModelParams::default()), Err(Error::GridMismatch { .. })));
    }
}
