//! Linear, decoupled IEQ steppers.
//!
//! Both schemes write the time derivative as `gamma (x^{n+1} - x_hist) / dt`:
//!
//! | scheme | gamma | x_hist                     | extrapolant x*       |
//! |--------|-------|----------------------------|----------------------|
//! | LS1    | 1     | x^n                        | x^n                  |
//! | LS2    | 3/2   | (4 x^n - x^{n-1}) / 3      | 2 x^n - x^{n-1}      |
//!
//! Eliminating the auxiliary variables through
//! `V^{n+1} = 2 G* rho^{n+1} + (V_hist - 2 G* rho_hist)` (and the analogue
//! for `U`) leaves one linear equation per phase variable,
//!
//! ```text
//! gamma (rho - rho_hist) / dt = M_rho lap (P rho + g1),   P = -beta lap + (2/eta^2) G*^2
//! gamma (phi - phi_hist) / dt = M_phi lap (Q phi + g2),   Q = -lap + alpha lap^2 + (2/eps^2) H*^2 + w div(rho^{n+1} grad .)
//! ```
//!
//! Applying `lap^{-1}` gives a problem for the increment `d = x - x_hist`,
//! which is mean-zero because the mean of each unknown is fixed by its
//! history:
//!
//! ```text
//! A d = -Pi (g + P x_hist),   A = Pi (-(gamma / (M dt)) lap^{-1} + P) Pi
//! ```
//!
//! (resp. `Q`, `g2`). `A` is symmetric positive definite in L2 whenever the
//! gradient coefficient of `Q` stays positive.
//!
//! The coupling weight `w` is `theta` for LS1 (the Crank-Nicolson average
//! puts the other `theta` on the explicit side) and `2 theta` for LS2.

use crate::error::{Error, Result};
use crate::model::{g_of, h_of, History, ModelParams, SimState};
use crate::spectral::{inner_unchecked, Field, Spectral};

use super::krylov::{krylov_solve_from, KrylovMethod, KrylovOutcome};
use super::{SolverOptions, StepReport};

/// A step together with the chemical potentials it produced.
#[derive(Clone, Debug)]
pub struct StepDetail {
    pub state: SimState,
    pub report: StepReport,
    pub mu_rho: Field,
    pub mu_phi: Field,
}

fn mean_zero(f: &Field) -> Field {
    let m = f.mean();
    f.map(|v| v - m)
}

/// Eliminated operator of the surfactant sub-step.
pub struct RhoOperator<'a> {
    sp: &'a Spectral,
    time_coeff: f64,
    beta: f64,
    well: Field,
    well_mean: f64,
}

impl<'a> RhoOperator<'a> {
    /// `g_star` is `G` evaluated at the explicit extrapolant.
    pub fn new(sp: &'a Spectral, p: &ModelParams, dt: f64, gamma: f64, g_star: &Field) -> Self {
        let scale = 2.0 / (p.eta() * p.eta());
        let well = g_star.map(|g| scale * g * g);
        let well_mean = well.mean();
        RhoOperator {
            sp,
            time_coeff: gamma / (p.m_rho() * dt),
            beta: p.beta(),
            well,
            well_mean,
        }
    }

    /// `P r` without the mean projection; used to recover the potential.
    fn p_of(&self, r: &Field) -> Field {
        let mut out = self.sp.apply_symbol(r, |k2| self.beta * k2);
        out.axpy(1.0, &(&self.well * r));
        out
    }

    pub fn apply(&self, x: &Field) -> Field {
        let x = mean_zero(x);
        let (c, beta) = (self.time_coeff, self.beta);
        let mut out = self
            .sp
            .apply_symbol(&x, |k2| if k2 == 0.0 { 0.0 } else { c / k2 + beta * k2 });
        out.axpy(1.0, &(&self.well * &x));
        mean_zero(&out)
    }

    /// Exact inverse of the operator with the well coefficient replaced by
    /// its mean.
    pub fn precondition(&self, r: &Field) -> Field {
        let (c, m, beta) = (self.time_coeff, self.well_mean, self.beta);
        self.sp
            .apply_symbol(r, |k2| if k2 == 0.0 { 0.0 } else { k2 / (c + m * k2 + beta * k2 * k2) })
    }
}

/// Eliminated operator of the phase sub-step.
pub struct PhiOperator<'a> {
    sp: &'a Spectral,
    time_coeff: f64,
    alpha: f64,
    well: Field,
    well_mean: f64,
    rho_new: &'a Field,
    coupling: f64,
    gradient_coeff_min: f64,
    gradient_coeff_mean: f64,
}

impl<'a> PhiOperator<'a> {
    /// `h_star` is `H` at the explicit extrapolant, `coupling` the implicit
    /// weight `w` of `div(rho^{n+1} grad phi)`.
    pub fn new(
        sp: &'a Spectral,
        p: &ModelParams,
        dt: f64,
        gamma: f64,
        h_star: &Field,
        rho_new: &'a Field,
        coupling: f64,
    ) -> Self {
        let scale = 2.0 / (p.eps() * p.eps());
        let well = h_star.map(|h| scale * h * h);
        let well_mean = well.mean();
        PhiOperator {
            sp,
            time_coeff: gamma / (p.m_phi() * dt),
            alpha: p.alpha(),
            well,
            well_mean,
            rho_new,
            coupling,
            gradient_coeff_min: 1.0 - coupling * rho_new.max(),
            gradient_coeff_mean: 1.0 - coupling * rho_new.mean(),
        }
    }

    /// True when `1 - w max(rho^{n+1}) <= 0`, i.e. the gradient block of the
    /// bilinear form may be indefinite.
    pub fn indefinite_risk(&self) -> bool {
        self.gradient_coeff_min <= 0.0
    }

    fn q_of(&self, x: &Field) -> Field {
        let alpha = self.alpha;
        let mut out = self.sp.apply_symbol(x, |k2| k2 + alpha * k2 * k2);
        out.axpy(1.0, &(&self.well * x));
        if self.coupling != 0.0 {
            out.axpy(self.coupling, &self.sp.div_a_grad(self.rho_new, x));
        }
        out
    }

    pub fn apply(&self, x: &Field) -> Field {
        let x = mean_zero(x);
        let (c, alpha) = (self.time_coeff, self.alpha);
        let mut out = self
            .sp
            .apply_symbol(&x, |k2| if k2 == 0.0 { 0.0 } else { c / k2 + k2 + alpha * k2 * k2 });
        out.axpy(1.0, &(&self.well * &x));
        if self.coupling != 0.0 {
            out.axpy(self.coupling, &self.sp.div_a_grad(self.rho_new, &x));
        }
        mean_zero(&out)
    }

    pub fn precondition(&self, r: &Field) -> Field {
        let (c, m, alpha) = (self.time_coeff, self.well_mean, self.alpha);
        let b = self.gradient_coeff_mean.max(0.0);
        self.sp.apply_symbol(r, |k2| {
            if k2 == 0.0 {
                0.0
            } else {
                k2 / (c + m * k2 + b * k2 * k2 + alpha * k2 * k2 * k2)
            }
        })
    }
}

/// Time-level data seen by the surfactant sub-step. It carries no
/// time-`n+1` phase information.
pub struct RhoStepInput<'a> {
    pub rho_hist: &'a Field,
    pub v_hist: &'a Field,
    pub rho_star: &'a Field,
    pub phi_star: &'a Field,
    pub guess: &'a Field,
}

pub struct RhoStepOutput {
    pub rho: Field,
    pub v_aux: Field,
    pub mu: Field,
    pub krylov: KrylovOutcome,
}

/// Surfactant sub-step: solves for `rho^{n+1}` and closes `V^{n+1}`.
pub fn solve_rho_step(
    sp: &Spectral,
    p: &ModelParams,
    dt: f64,
    gamma: f64,
    input: RhoStepInput<'_>,
    opts: &SolverOptions,
) -> Result<RhoStepOutput> {
    let g_star = g_of(input.rho_star, p);
    let d = input.v_hist - &(&(&g_star * input.rho_hist) * 2.0);
    let inv_eta2 = 1.0 / (p.eta() * p.eta());
    let mut g1 = sp.nonlinear(&(&g_star * &d) * inv_eta2);
    g1.axpy(-p.theta(), &sp.nonlinear(sp.grad_sq(input.phi_star)));

    let op = RhoOperator::new(sp, p, dt, gamma, &g_star);
    // Unknown is the mean-zero increment over the history level, so the
    // solver tolerance is relative to the update rather than the state.
    let mut src = g1.clone();
    src.axpy(1.0, &op.p_of(input.rho_hist));
    let mut rhs = mean_zero(&src);
    rhs.scale(-1.0);
    flush_roundoff(&mut rhs, &[&src]);

    let guess = mean_zero(&(input.guess - input.rho_hist));
    let krylov = krylov_solve_from(
        |x: &Field| op.apply(x),
        &rhs,
        |r: &Field| op.precondition(r),
        opts,
        Some(&guess),
        false,
    )?;
    let rho = input.rho_hist + &krylov.x;

    let mut mu = op.p_of(&rho);
    mu.axpy(1.0, &g1);
    let v_aux = &(&(&g_star * &rho) * 2.0) + &d;
    Ok(RhoStepOutput { rho, v_aux, mu, krylov })
}

/// Time-level data seen by the phase sub-step: history, extrapolant and
/// the new surfactant field. The surfactant potential is not an input.
pub struct PhiStepInput<'a> {
    pub phi_hist: &'a Field,
    pub u_hist: &'a Field,
    pub phi_star: &'a Field,
    /// Phase field entering the explicit half of the coupling term.
    pub phi_explicit: &'a Field,
    pub rho_new: &'a Field,
    pub coupling_implicit: f64,
    pub coupling_explicit: f64,
    pub guess: &'a Field,
}

pub struct PhiStepOutput {
    pub phi: Field,
    pub u_aux: Field,
    pub mu: Field,
    pub krylov: KrylovOutcome,
}

/// Phase sub-step: solves for `phi^{n+1}` and closes `U^{n+1}`.
pub fn solve_phi_step(
    sp: &Spectral,
    p: &ModelParams,
    dt: f64,
    gamma: f64,
    input: PhiStepInput<'_>,
    opts: &SolverOptions,
) -> Result<PhiStepOutput> {
    let h_star = h_of(input.phi_star);
    let s = input.u_hist - &(&(&h_star * input.phi_hist) * 2.0);
    let inv_eps2 = 1.0 / (p.eps() * p.eps());
    let mut g2 = sp.nonlinear(&(&h_star * &s) * inv_eps2);
    if input.coupling_explicit != 0.0 {
        g2.axpy(
            input.coupling_explicit,
            &sp.div_a_grad(input.rho_new, input.phi_explicit),
        );
    }

    let op = PhiOperator::new(sp, p, dt, gamma, &h_star, input.rho_new, input.coupling_implicit);
    let force_fallback = op.indefinite_risk();
    if force_fallback {
        log::warn!(
            "phase operator gradient coefficient 1 - w max(rho) = {:.3e} <= 0; using the nonsymmetric fallback",
            op.gradient_coeff_min
        );
    }
    // Unknown is the mean-zero increment over the history level, so the
    // solver tolerance is relative to the update rather than the state.
    let mut src = g2.clone();
    src.axpy(1.0, &op.q_of(input.phi_hist));
    let mut rhs = mean_zero(&src);
    rhs.scale(-1.0);
    flush_roundoff(&mut rhs, &[&src]);

    let guess = mean_zero(&(input.guess - input.phi_hist));
    let krylov = krylov_solve_from(
        |x: &Field| op.apply(x),
        &rhs,
        |r: &Field| op.precondition(r),
        opts,
        Some(&guess),
        force_fallback,
    )?;
    let phi = input.phi_hist + &krylov.x;

    let mut mu = op.q_of(&phi);
    mu.axpy(1.0, &g2);
    let u_aux = &(&(&h_star * &phi) * 2.0) + &s;
    Ok(PhiStepOutput { phi, u_aux, mu, krylov })
}

/// Zeroes a right-hand side that is pure cancellation error of the terms
/// it was assembled from, e.g. for a spatially constant state.
fn flush_roundoff(rhs: &mut Field, terms: &[&Field]) {
    let scale: f64 = terms.iter().map(|t| t.max_abs()).sum();
    if rhs.max_abs() <= 1e3 * f64::EPSILON * scale {
        rhs.scale(0.0);
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt.is_finite() && dt > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")))
    }
}

fn stage_error(step: u64, stage: &'static str) -> impl FnOnce(Error) -> Error {
    move |e| Error::StepFailure {
        step,
        stage,
        source: Box::new(e),
    }
}

fn finite_or_diverged(step: u64, fields: [(&'static str, &Field); 4]) -> Result<()> {
    for (name, f) in fields {
        if !f.is_finite() {
            return Err(Error::Diverged { step, field: name });
        }
    }
    Ok(())
}

fn lin_comb(a: f64, x: &Field, b: f64, y: &Field) -> Field {
    x.zip_map(y, |u, v| a * u + b * v)
}

/// First-order step with full detail.
pub fn step_ls1_detailed(
    sp: &Spectral,
    state: &SimState,
    p: &ModelParams,
    dt: f64,
    opts: &SolverOptions,
) -> Result<StepDetail> {
    check_dt(dt)?;
    opts.validate()?;
    state.validate()?;
    let next = state.step + 1;

    let rho_out = solve_rho_step(
        sp,
        p,
        dt,
        1.0,
        RhoStepInput {
            rho_hist: &state.rho,
            v_hist: &state.v_aux,
            rho_star: &state.rho,
            phi_star: &state.phi,
            guess: &state.rho,
        },
        opts,
    )
    .map_err(stage_error(next, "surfactant solve"))?;

    let phi_out = solve_phi_step(
        sp,
        p,
        dt,
        1.0,
        PhiStepInput {
            phi_hist: &state.phi,
            u_hist: &state.u_aux,
            phi_star: &state.phi,
            phi_explicit: &state.phi,
            rho_new: &rho_out.rho,
            coupling_implicit: p.theta(),
            coupling_explicit: p.theta(),
            guess: &state.phi,
        },
        opts,
    )
    .map_err(stage_error(next, "phase solve"))?;

    finish(state, dt, rho_out, phi_out)
}

/// Second-order BDF2 step with full detail. Requires one level of history.
pub fn step_ls2_detailed(
    sp: &Spectral,
    state: &SimState,
    p: &ModelParams,
    dt: f64,
    opts: &SolverOptions,
) -> Result<StepDetail> {
    check_dt(dt)?;
    opts.validate()?;
    state.validate()?;
    let prev: &History = state
        .prev
        .as_ref()
        .ok_or(Error::MissingHistory("the BDF2 step needs the previous time level"))?;
    let next = state.step + 1;
    let third = 1.0 / 3.0;

    let rho_hist = lin_comb(4.0 * third, &state.rho, -third, &prev.rho);
    let v_hist = lin_comb(4.0 * third, &state.v_aux, -third, &prev.v_aux);
    let rho_star = lin_comb(2.0, &state.rho, -1.0, &prev.rho);
    let phi_star = lin_comb(2.0, &state.phi, -1.0, &prev.phi);

    let rho_out = solve_rho_step(
        sp,
        p,
        dt,
        1.5,
        RhoStepInput {
            rho_hist: &rho_hist,
            v_hist: &v_hist,
            rho_star: &rho_star,
            phi_star: &phi_star,
            guess: &rho_star,
        },
        opts,
    )
    .map_err(stage_error(next, "surfactant solve"))?;

    let phi_hist = lin_comb(4.0 * third, &state.phi, -third, &prev.phi);
    let u_hist = lin_comb(4.0 * third, &state.u_aux, -third, &prev.u_aux);
    let phi_out = solve_phi_step(
        sp,
        p,
        dt,
        1.5,
        PhiStepInput {
            phi_hist: &phi_hist,
            u_hist: &u_hist,
            phi_star: &phi_star,
            phi_explicit: &state.phi,
            rho_new: &rho_out.rho,
            coupling_implicit: 2.0 * p.theta(),
            coupling_explicit: 0.0,
            guess: &phi_star,
        },
        opts,
    )
    .map_err(stage_error(next, "phase solve"))?;

    finish(state, dt, rho_out, phi_out)
}

fn finish(state: &SimState, dt: f64, rho_out: RhoStepOutput, phi_out: PhiStepOutput) -> Result<StepDetail> {
    let next = state.step + 1;
    finite_or_diverged(
        next,
        [
            ("rho", &rho_out.rho),
            ("V", &rho_out.v_aux),
            ("phi", &phi_out.phi),
            ("U", &phi_out.u_aux),
        ],
    )?;
    let report = StepReport {
        iters_rho: rho_out.krylov.iters,
        iters_phi: phi_out.krylov.iters,
        residual_rho: rho_out.krylov.residual,
        residual_phi: phi_out.krylov.residual,
        dt,
        fallback_used: rho_out.krylov.method == KrylovMethod::BiCgStab
            || phi_out.krylov.method == KrylovMethod::BiCgStab,
    };
    let new_state = SimState {
        phi: phi_out.phi,
        rho: rho_out.rho,
        u_aux: phi_out.u_aux,
        v_aux: rho_out.v_aux,
        time: state.time + dt,
        step: next,
        prev: Some(state.as_history()),
    };
    Ok(StepDetail {
        state: new_state,
        report,
        mu_rho: rho_out.mu,
        mu_phi: phi_out.mu,
    })
}

/// One first-order linear decoupled step.
pub fn step_ls1(
    sp: &Spectral,
    state: &SimState,
    p: &ModelParams,
    dt: f64,
    opts: &SolverOptions,
) -> Result<(SimState, StepReport)> {
    step_ls1_detailed(sp, state, p, dt, opts).map(|d| (d.state, d.report))
}

/// One second-order BDF2 step.
pub fn step_ls2(
    sp: &Spectral,
    state: &SimState,
    p: &ModelParams,
    dt: f64,
    opts: &SolverOptions,
) -> Result<(SimState, StepReport)> {
    step_ls2_detailed(sp, state, p, dt, opts).map(|d| (d.state, d.report))
}

/// Both sides of the discrete energy balance of a first-order step.
#[derive(Clone, Copy, Debug)]
pub struct EnergyBalance {
    /// Energy change plus all squared-increment terms.
    pub lhs: f64,
    /// `-M_phi dt ||grad mu_phi||^2 - M_rho dt ||grad mu_rho||^2`
    pub rhs: f64,
}

impl EnergyBalance {
    pub fn relative_mismatch(&self) -> f64 {
        (self.lhs - self.rhs).abs() / self.rhs.abs().max(f64::MIN_POSITIVE)
    }
}

/// Assembles the first-order energy balance term by term from the states
/// before and after a step and the step's chemical potentials.
pub fn ls1_energy_balance(
    sp: &Spectral,
    p: &ModelParams,
    before: &SimState,
    step: &StepDetail,
) -> EnergyBalance {
    let after = &step.state;
    let dt = step.report.dt;
    let sq = |f: &Field| inner_unchecked(f, f);
    let three_terms = |norm: &dyn Fn(&Field) -> f64, new: &Field, old: &Field| {
        norm(new) - norm(old) + norm(&(new - old))
    };
    let dirichlet = |f: &Field| sp.dirichlet(f);
    let lap_sq = |f: &Field| sq(&sp.laplacian(f));

    let lhs = 0.5 * p.beta() * three_terms(&dirichlet, &after.rho, &before.rho)
        + 0.5 * three_terms(&dirichlet, &after.phi, &before.phi)
        + 0.5 * p.alpha() * three_terms(&lap_sq, &after.phi, &before.phi)
        + three_terms(&sq, &after.u_aux, &before.u_aux) / (4.0 * p.eps() * p.eps())
        + three_terms(&sq, &after.v_aux, &before.v_aux) / (4.0 * p.eta() * p.eta())
        - p.theta()
            * (inner_unchecked(&after.rho, &sp.grad_sq(&after.phi))
                - inner_unchecked(&before.rho, &sp.grad_sq(&before.phi)));
    let rhs = -p.m_phi() * dt * sp.dirichlet(&step.mu_phi) - p.m_rho() * dt * sp.dirichlet(&step.mu_rho);
    EnergyBalance { lhs, rhs }
}
