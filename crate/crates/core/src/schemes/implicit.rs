//! Fully implicit second-order reference integrator.
//!
//! Implicit midpoint rule on the original (non-quadratized) system:
//!
//! ```text
//! (phi^{n+1} - phi^n) / dt = M_phi lap mu_phi(phi^{n+1/2}, rho^{n+1/2})
//! (rho^{n+1} - rho^n) / dt = M_rho lap mu_rho(phi^{n+1/2}, rho^{n+1/2})
//! ```
//!
//! with `x^{n+1/2} = (x^n + x^{n+1}) / 2`. Each potential is split into a
//! constant-coefficient linear part `L` and a remainder `N`; one sweep solves
//! the linear part exactly in Fourier space with `N` frozen at the current
//! iterate, and the new iterate is relaxed by the damping factor. Meant as a
//! small-step oracle, not a production scheme.

use crate::error::{Error, Result};
use crate::model::{init_aux, mu_phi_continuous, mu_rho_continuous, ModelParams, SimState};
use crate::spectral::{Field, Spectral};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImplicitOptions {
    pub nl_tol: f64,
    pub nl_max: usize,
    pub damping: f64,
}

impl Default for ImplicitOptions {
    fn default() -> Self {
        ImplicitOptions {
            nl_tol: 1e-10,
            nl_max: 200,
            damping: 0.5,
        }
    }
}

/// Symbol coefficients (in powers of `|k|^2`) of the frozen linear parts.
struct Splitting {
    /// `L_phi = s_phi + (1 - 2 theta rho_bar)(-lap) + alpha lap^2`
    phi: [f64; 3],
    /// `L_rho = s_rho + beta (-lap)`
    rho: [f64; 2],
}

impl Splitting {
    fn new(p: &ModelParams, rho_bar: f64) -> Self {
        let inv_eps2 = 1.0 / (p.eps() * p.eps());
        let inv_eta2 = 1.0 / (p.eta() * p.eta());
        // Centres of the ranges of the well curvatures for phi in [-1, 1]
        // and rho in [0, rho_s].
        let s_phi = 0.5 * inv_eps2;
        let s_rho = 0.125 * inv_eta2 * p.rho_s() * p.rho_s();
        Splitting {
            phi: [s_phi, 1.0 - 2.0 * p.theta() * rho_bar, p.alpha()],
            rho: [s_rho, p.beta()],
        }
    }
}

fn poly(c: &[f64], k2: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * k2 + a)
}

/// Solves `(x - x0)/dt = M lap (L (x + x0)/2 + N)` for `x` with `N` given.
fn midpoint_linear_solve(sp: &Spectral, lin: &[f64], mobility: f64, dt: f64, x0: &Field, nonlinear: &Field) -> Field {
    // (1/dt + M k^2 L/2) x = (1/dt - M k^2 L/2) x0 - M k^2 N
    let half = 0.5 * mobility;
    let inv_dt = 1.0 / dt;
    let denom = |k2: f64| inv_dt + half * k2 * poly(lin, k2);
    let mut out = sp.apply_symbol(x0, |k2| (inv_dt - half * k2 * poly(lin, k2)) / denom(k2));
    out.axpy(
        1.0,
        &sp.apply_symbol(nonlinear, |k2| -mobility * k2 / denom(k2)),
    );
    out
}

/// One implicit-midpoint step. The auxiliary variables of the result are
/// rebuilt from the new phase fields.
pub fn step_reference_implicit(
    sp: &Spectral,
    state: &SimState,
    p: &ModelParams,
    dt: f64,
    opts: &ImplicitOptions,
) -> Result<SimState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    state.validate()?;
    let split = Splitting::new(p, state.rho.mean());
    let (phi0, rho0) = (&state.phi, &state.rho);
    let (mut phi, mut rho) = (phi0.clone(), rho0.clone());
    let mut residual = f64::INFINITY;

    for _ in 0..opts.nl_max {
        let phi_mid = lin_mid(phi0, &phi);
        let rho_mid = lin_mid(rho0, &rho);
        let mut n_phi = mu_phi_continuous(sp, &phi_mid, &rho_mid, p)?;
        n_phi.axpy(-1.0, &sp.apply_polynomial(&split.phi, &phi_mid));
        let mut n_rho = mu_rho_continuous(sp, &phi_mid, &rho_mid, p)?;
        n_rho.axpy(-1.0, &sp.apply_polynomial(&split.rho, &rho_mid));

        let phi_new = midpoint_linear_solve(sp, &split.phi, p.m_phi(), dt, phi0, &n_phi);
        let rho_new = midpoint_linear_solve(sp, &split.rho, p.m_rho(), dt, rho0, &n_rho);

        let d_phi = &phi_new - &phi;
        let d_rho = &rho_new - &rho;
        let scale = (phi.norm_l2() + rho.norm_l2()).max(f64::MIN_POSITIVE);
        residual = (d_phi.norm_l2() + d_rho.norm_l2()) / scale;
        if !residual.is_finite() {
            return Err(Error::Diverged {
                step: state.step + 1,
                field: "implicit iterate",
            });
        }
        if residual <= opts.nl_tol {
            phi = phi_new;
            rho = rho_new;
            let (u_aux, v_aux) = init_aux(&phi, &rho, p);
            return Ok(SimState {
                phi,
                rho,
                u_aux,
                v_aux,
                time: state.time + dt,
                step: state.step + 1,
                prev: Some(state.as_history()),
            });
        }
        phi.axpy(opts.damping, &d_phi);
        rho.axpy(opts.damping, &d_rho);
    }
    Err(Error::NonlinearNoConvergence {
        iters: opts.nl_max,
        residual,
    })
}

fn lin_mid(a: &Field, b: &Field) -> Field {
    a.zip_map(b, |x, y| 0.5 * (x + y))
}
