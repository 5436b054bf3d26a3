//! Time integrators.
//!
//! * [`step_ls1`]: first order, linear, decoupled, unconditionally energy
//!   stable for the quadratized energy.
//! * [`step_ls2`]: BDF2 analogue with second-order extrapolation.
//! * [`step_reference_implicit`]: implicit midpoint oracle.
//!
//! [`Stepper`] bundles a scheme with its parameters and bootstraps LS2 with
//! one LS1 step.

pub mod ieq;
pub mod implicit;
pub mod krylov;

use std::fmt;
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{ModelParams, SimState};
use crate::spectral::Spectral;

pub use ieq::{
    ls1_energy_balance, step_ls1, step_ls1_detailed, step_ls2, step_ls2_detailed, EnergyBalance, PhiOperator,
    RhoOperator, StepDetail,
};
pub use implicit::{step_reference_implicit, ImplicitOptions};
pub use krylov::{krylov_solve, krylov_solve_from, KrylovMethod, KrylovOutcome};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preconditioner {
    #[default]
    ConstantCoefficient,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
    pub precond: Preconditioner,
    /// Switch to BiCGSTAB when CG detects non-positive curvature.
    pub fallback: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rel_tol: 1e-10,
            max_iter: 500,
            precond: Preconditioner::ConstantCoefficient,
            fallback: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-2) {
            return Err(Error::InvalidParameter(format!(
                "rel_tol must lie in (0, 1e-2], got {}",
                self.rel_tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Solver statistics of one step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepReport {
    pub iters_rho: usize,
    pub iters_phi: usize,
    pub residual_rho: f64,
    pub residual_phi: f64,
    pub dt: f64,
    pub fallback_used: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Ls1,
    Ls2,
    Implicit,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Ls1 => "ls1",
            Scheme::Ls2 => "ls2",
            Scheme::Implicit => "implicit",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ls1" => Ok(Scheme::Ls1),
            "ls2" => Ok(Scheme::Ls2),
            "implicit" => Ok(Scheme::Implicit),
            other => Err(Error::Config(format!(
                "unknown scheme {other:?} (expected ls1, ls2 or implicit)"
            ))),
        }
    }
}

/// Advances one trajectory with a fixed scheme and step size.
#[derive(Clone, Debug)]
pub struct Stepper {
    pub sp: Spectral,
    pub params: ModelParams,
    pub scheme: Scheme,
    pub dt: f64,
    pub solver: SolverOptions,
    pub implicit: ImplicitOptions,
}

impl Stepper {
    pub fn new(sp: Spectral, params: ModelParams, scheme: Scheme, dt: f64, solver: SolverOptions) -> Self {
        Stepper {
            sp,
            params,
            scheme,
            dt,
            solver,
            implicit: ImplicitOptions::default(),
        }
    }

    pub fn advance(&self, state: &SimState) -> Result<(SimState, StepReport)> {
        match self.scheme {
            Scheme::Ls1 => step_ls1(&self.sp, state, &self.params, self.dt, &self.solver),
            Scheme::Ls2 if state.prev.is_none() => step_ls1(&self.sp, state, &self.params, self.dt, &self.solver),
            Scheme::Ls2 => step_ls2(&self.sp, state, &self.params, self.dt, &self.solver),
            Scheme::Implicit => {
                let next = step_reference_implicit(&self.sp, state, &self.params, self.dt, &self.implicit)?;
                Ok((
                    next,
                    StepReport {
                        dt: self.dt,
                        ..StepReport::default()
                    },
                ))
            }
        }
    }

    /// Takes `n` steps from `state`.
    pub fn run(&self, mut state: SimState, n: u64) -> Result<SimState> {
        for _ in 0..n {
            state = self.advance(&state)?.0;
        }
        Ok(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{Field, Grid};

    #[test]
    fn options_validate() {
        assert!(SolverOptions::default().validate().is_ok());
        for bad in [0.0, 0.5, -1.0] {
            let o = SolverOptions {
                rel_tol: bad,
                ..SolverOptions::default()
            };
            assert!(o.validate().is_err());
        }
        let o = SolverOptions {
            max_iter: 0,
            ..SolverOptions::default()
        };
        assert!(o.validate().is_err());
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in [Scheme::Ls1, Scheme::Ls2, Scheme::Implicit] {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("bdf3".parse::<Scheme>().is_err());
    }

    #[test]
    fn ls2_stepper_bootstraps_with_ls1() {
        let grid = Grid::square(16).unwrap();
        let p = ModelParams::default();
        let phi = Field::from_fn(grid, |x, y| 0.3 * (3.0 * x).cos() + 0.5 * y.cos());
        let rho = Field::from_fn(grid, |x, y| 0.2 * (2.0 * x).sin() + 0.25 * y.sin());
        let s0 = SimState::initial(phi, rho, &p).unwrap();
        let opts = SolverOptions::default();
        let ls2 = Stepper::new(Spectral::new(grid), p, Scheme::Ls2, 1e-3, opts);
        let ls1 = Stepper::new(Spectral::new(grid), p, Scheme::Ls1, 1e-3, opts);
        let a = ls2.advance(&s0).unwrap().0;
        let b = ls1.advance(&s0).unwrap().0;
        assert_eq!(a.phi, b.phi);
        assert!(a.prev.is_some());
        let c = ls2.advance(&a).unwrap().0;
        assert_eq!(c.step, 2);
    }
}
