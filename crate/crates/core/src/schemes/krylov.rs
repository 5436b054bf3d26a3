//! Matrix-free Krylov solvers on [`Field`]s.
//!
//! Preconditioned conjugate gradients is the primary method. A
//! non-positive curvature `(p, A p) <= 0` or a non-finite scalar stops CG;
//! with the fallback enabled the solve restarts from the CG iterate with
//! preconditioned BiCGSTAB, which does not need symmetry.

use crate::error::{Error, Result};
use crate::spectral::Field;

use super::{Preconditioner, SolverOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KrylovMethod {
    Cg,
    BiCgStab,
}

#[derive(Clone, Debug)]
pub struct KrylovOutcome {
    pub x: Field,
    /// Iterations summed over both methods when the fallback ran.
    pub iters: usize,
    /// Final `||A x - b|| / ||b||`.
    pub residual: f64,
    pub method: KrylovMethod,
}

fn dot(a: &Field, b: &Field) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum()
}

fn norm(a: &Field) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `apply(x) = rhs` from a zero initial guess.
pub fn krylov_solve<A, M>(apply: A, rhs: &Field, precond: M, opts: &SolverOptions) -> Result<KrylovOutcome>
where
    A: Fn(&Field) -> Field,
    M: Fn(&Field) -> Field,
{
    krylov_solve_from(apply, rhs, precond, opts, None, false)
}

/// Like [`krylov_solve`] with an optional initial guess. `force_fallback`
/// skips CG entirely.
pub fn krylov_solve_from<A, M>(
    apply: A,
    rhs: &Field,
    precond: M,
    opts: &SolverOptions,
    x0: Option<&Field>,
    force_fallback: bool,
) -> Result<KrylovOutcome>
where
    A: Fn(&Field) -> Field,
    M: Fn(&Field) -> Field,
{
    rhs.check_finite("Krylov right-hand side")?;
    let precond = |r: &Field| match opts.precond {
        Preconditioner::ConstantCoefficient => precond(r),
        Preconditioner::None => r.clone(),
    };
    let x0 = x0.cloned().unwrap_or_else(|| Field::zeros(*rhs.grid()));
    let b_norm = norm(rhs);
    if b_norm == 0.0 {
        return Ok(KrylovOutcome {
            x: Field::zeros(*rhs.grid()),
            iters: 0,
            residual: 0.0,
            method: KrylovMethod::Cg,
        });
    }

    if force_fallback {
        if !opts.fallback {
            return Err(Error::KrylovBreakdown {
                iters: 0,
                reason: "operator may be indefinite and the fallback method is disabled".into(),
            });
        }
        return bicgstab(&apply, rhs, &precond, opts, x0, b_norm, 0);
    }

    match pcg(&apply, rhs, &precond, opts, x0, b_norm)? {
        CgResult::Converged(out) => Ok(out),
        CgResult::Breakdown { x, iters, reason } => {
            if !opts.fallback {
                return Err(Error::KrylovBreakdown { iters, reason });
            }
            log::warn!("CG breakdown after {iters} iterations ({reason}); switching to BiCGSTAB");
            // restart from the last finite iterate
            let start = if x.is_finite() { x } else { Field::zeros(*rhs.grid()) };
            bicgstab(&apply, rhs, &precond, opts, start, b_norm, iters)
        }
    }
}

enum CgResult {
    Converged(KrylovOutcome),
    Breakdown { x: Field, iters: usize, reason: String },
}

fn pcg<A, M>(apply: &A, b: &Field, precond: &M, opts: &SolverOptions, mut x: Field, b_norm: f64) -> Result<CgResult>
where
    A: Fn(&Field) -> Field,
    M: Fn(&Field) -> Field,
{
    let mut r = b - &apply(&x);
    let mut res = norm(&r) / b_norm;
    if res <= opts.rel_tol {
        return Ok(CgResult::Converged(KrylovOutcome {
            x,
            iters: 0,
            residual: res,
            method: KrylovMethod::Cg,
        }));
    }
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);

    for it in 1..=opts.max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap.is_finite() && pap > 0.0 && rz.is_finite()) {
            return Ok(CgResult::Breakdown {
                x,
                iters: it - 1,
                reason: format!("non-positive curvature (p, Ap) = {pap:.3e}"),
            });
        }
        let alpha = rz / pap;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        res = norm(&r) / b_norm;
        if !res.is_finite() {
            return Ok(CgResult::Breakdown {
                x,
                iters: it,
                reason: "non-finite residual".into(),
            });
        }
        if res <= opts.rel_tol {
            // guard against drift of the recursive residual
            let true_res = norm(&(b - &apply(&x))) / b_norm;
            if true_res <= opts.rel_tol {
                return Ok(CgResult::Converged(KrylovOutcome {
                    x,
                    iters: it,
                    residual: true_res,
                    method: KrylovMethod::Cg,
                }));
            }
            r = b - &apply(&x);
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        let mut p_new = z.clone();
        p_new.axpy(beta, &p);
        p = p_new;
    }
    Err(Error::KrylovNoConvergence {
        iters: opts.max_iter,
        residual: res,
    })
}

fn bicgstab<A, M>(
    apply: &A,
    b: &Field,
    precond: &M,
    opts: &SolverOptions,
    mut x: Field,
    b_norm: f64,
    prior_iters: usize,
) -> Result<KrylovOutcome>
where
    A: Fn(&Field) -> Field,
    M: Fn(&Field) -> Field,
{
    let mut r = b - &apply(&x);
    let mut res = norm(&r) / b_norm;
    let done = |x: Field, iters: usize, residual: f64| KrylovOutcome {
        x,
        iters: prior_iters + iters,
        residual,
        method: KrylovMethod::BiCgStab,
    };
    if res <= opts.rel_tol {
        return Ok(done(x, 0, res));
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = Field::zeros(*b.grid());
    let mut p = Field::zeros(*b.grid());

    for it in 1..=opts.max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || !rho_new.is_finite() {
            return Err(Error::KrylovBreakdown {
                iters: prior_iters + it,
                reason: "BiCGSTAB: (r_hat, r) vanished".into(),
            });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        // p = r + beta (p - omega v)
        p.axpy(-omega, &v);
        p.scale(beta);
        p.axpy(1.0, &r);

        let p_hat = precond(&p);
        v = apply(&p_hat);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::KrylovBreakdown {
                iters: prior_iters + it,
                reason: "BiCGSTAB: (r_hat, v) vanished".into(),
            });
        }
        alpha = rho / denom;
        x.axpy(alpha, &p_hat);
        let mut s = r.clone();
        s.axpy(-alpha, &v);
        res = norm(&s) / b_norm;
        if res <= opts.rel_tol {
            let true_res = norm(&(b - &apply(&x))) / b_norm;
            if true_res <= opts.rel_tol {
                return Ok(done(x, it, true_res));
            }
        }

        let s_hat = precond(&s);
        let t = apply(&s_hat);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        x.axpy(omega, &s_hat);
        r = s;
        r.axpy(-omega, &t);
        res = norm(&r) / b_norm;
        if !res.is_finite() {
            return Err(Error::KrylovBreakdown {
                iters: prior_iters + it,
                reason: "BiCGSTAB: non-finite residual".into(),
            });
        }
        if res <= opts.rel_tol {
            let true_res = norm(&(b - &apply(&x))) / b_norm;
            if true_res <= opts.rel_tol {
                return Ok(done(x, it, true_res));
            }
            r = b - &apply(&x);
        }
        if omega == 0.0 {
            return Err(Error::KrylovBreakdown {
                iters: prior_iters + it,
                reason: "BiCGSTAB: stabilization step vanished".into(),
            });
        }
    }
    Err(Error::KrylovNoConvergence {
        iters: prior_iters + opts.max_iter,
        residual: res,
    })
}
