//! Per-step observables.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{energy_original, energy_quadratized, init_aux, ModelParams, SimState};
use crate::schemes::StepReport;
use crate::spectral::{Field, Spectral};

/// One row of the diagnostics time series. Field order is the CSV column
/// order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub step: u64,
    pub time: f64,
    pub e_original: f64,
    pub e_modified: f64,
    pub mass_phi: f64,
    pub mass_rho: f64,
    /// `||U - (phi^2 - 1)||_2`
    pub aux_err_u: f64,
    /// `||V - rho (rho - rho_s)||_2`
    pub aux_err_v: f64,
    /// Pearson correlation of `rho` with `|grad phi|^2`.
    pub corr_rho_grad: f64,
    pub iters_rho: usize,
    pub iters_phi: usize,
}

pub const CSV_COLUMNS: [&str; 11] = [
    "step",
    "time",
    "e_original",
    "e_modified",
    "mass_phi",
    "mass_rho",
    "aux_err_u",
    "aux_err_v",
    "corr_rho_grad",
    "iters_rho",
    "iters_phi",
];

/// Pearson correlation of the nodal values; zero when either field is
/// constant.
pub fn pearson(a: &Field, b: &Field) -> f64 {
    let (ma, mb) = (a.mean(), b.mean());
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.values().iter().zip(b.values()) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    let denom = (saa * sbb).sqrt();
    if denom > 0.0 {
        sab / denom
    } else {
        0.0
    }
}

pub fn collect(sp: &Spectral, state: &SimState, p: &ModelParams, report: &StepReport) -> Result<DiagnosticsRow> {
    let (u_exact, v_exact) = init_aux(&state.phi, &state.rho, p);
    Ok(DiagnosticsRow {
        step: state.step,
        time: state.time,
        e_original: energy_original(sp, &state.phi, &state.rho, p)?,
        e_modified: energy_quadratized(sp, state, p)?,
        mass_phi: state.phi.mean(),
        mass_rho: state.rho.mean(),
        aux_err_u: (&state.u_aux - &u_exact).norm_l2(),
        aux_err_v: (&state.v_aux - &v_exact).norm_l2(),
        corr_rho_grad: pearson(&state.rho, &sp.grad_sq(&state.phi)),
        iters_rho: report.iters_rho,
        iters_phi: report.iters_phi,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DissipationCheck {
    pub passed: bool,
    /// Index of the first row whose modified energy exceeds its
    /// predecessor's by more than the slack.
    pub first_violation: Option<usize>,
}

/// Passes iff `e_modified[i + 1] <= e_modified[i] + tol * |e_modified[i]|`
/// for every consecutive pair.
pub fn assert_dissipation(series: &[DiagnosticsRow], tol: f64) -> DissipationCheck {
    let first_violation = series
        .windows(2)
        .position(|w| w[1].e_modified > w[0].e_modified + tol * w[0].e_modified.abs())
        .map(|i| i + 1);
    DissipationCheck {
        passed: first_violation.is_none(),
        first_violation,
    }
}
