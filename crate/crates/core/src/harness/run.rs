//! Experiment drivers.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::{assert_dissipation, collect, DiagnosticsRow};
use crate::error::{Error, Result};
use crate::model::SimState;
use crate::schemes::{Scheme, StepReport, Stepper};
use crate::spectral::{Field, Spectral};

use super::config::{InitialCondition, RunConfig};
use super::ic::{ic_smooth, ic_spinodal};
use super::snapshot::{read_snapshot_on, write_snapshot, FieldId};

/// Builds the initial state described by `cfg.ic`.
pub fn initial_state(cfg: &RunConfig) -> Result<SimState> {
    let (phi, rho) = match &cfg.ic {
        InitialCondition::Smooth => ic_smooth(cfg.grid),
        InitialCondition::Spinodal {
            phi_bar,
            rho_bar,
            amplitude,
            seed,
        } => ic_spinodal(cfg.grid, *phi_bar, *rho_bar, *amplitude, *seed),
        InitialCondition::File { phi, rho } => (load_ic(cfg, phi)?, load_ic(cfg, rho)?),
    };
    SimState::initial(phi, rho, &cfg.params)
}

fn load_ic(cfg: &RunConfig, path: &Path) -> Result<Field> {
    let (field, _) = read_snapshot_on(path, cfg.grid.lx, cfg.grid.ly)?;
    if *field.grid() != cfg.grid {
        return Err(Error::GridMismatch {
            left: cfg.grid.to_string(),
            right: format!("{} in {}", field.grid(), path.display()),
        });
    }
    Ok(field)
}

fn stepper(cfg: &RunConfig) -> Stepper {
    let sp = Spectral::new(cfg.grid).with_dealias(cfg.dealias);
    Stepper::new(sp, cfg.params, cfg.scheme, cfg.dt, cfg.solver)
}

/// Summed time steps drift by round-off that grows with `time`.
fn snapshot_due(requested: f64, time: f64, dt: f64) -> bool {
    requested <= time + 1e-9 * (dt + time.abs())
}

/// A snapshot set written at one requested time.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotRecord {
    pub requested: f64,
    pub time: f64,
    pub step: u64,
    pub paths: Vec<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub rows: Vec<DiagnosticsRow>,
    pub final_state: SimState,
    pub snapshots: Vec<SnapshotRecord>,
    pub csv_path: PathBuf,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    // fail early on read-only directories
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
    fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

fn write_snapshot_set(dir: &Path, index: usize, state: &SimState) -> Result<Vec<PathBuf>> {
    let fields = [
        (FieldId::Phi, &state.phi),
        (FieldId::Rho, &state.rho),
        (FieldId::U, &state.u_aux),
        (FieldId::V, &state.v_aux),
    ];
    let mut paths = Vec::with_capacity(fields.len());
    for (id, field) in fields {
        let path = dir.join(format!("snapshot_{index:03}_{}.chsf", id.name()));
        write_snapshot(&path, field, state.time, id)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Integrates `cfg` from its initial data, recording diagnostics every
/// `series_every` steps (plus the first and last step) into `csv_path` and,
/// when `snapshot_dir` is given, snapshot sets at the configured times.
fn integrate(cfg: &RunConfig, csv_path: &Path, snapshot_dir: Option<&Path>) -> Result<RunSummary> {
    cfg.validate()?;
    let stepper = stepper(cfg);
    let mut state = initial_state(cfg)?;
    let n_steps = cfg.n_steps();
    let every = cfg.output.series_every;

    let mut writer = csv::Writer::from_path(csv_path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(csv_path, io),
        other => Error::Config(format!("{}: {other:?}", csv_path.display())),
    })?;
    let mut rows = Vec::new();
    let mut record = |row: DiagnosticsRow, rows: &mut Vec<DiagnosticsRow>| -> Result<()> {
        writer.serialize(&row)?;
        rows.push(row);
        Ok(())
    };

    let mut snapshots = Vec::new();
    let pending = &cfg.output.snapshot_times;
    let take_snapshots = |state: &SimState, snapshots: &mut Vec<SnapshotRecord>| -> Result<()> {
        let Some(dir) = snapshot_dir else { return Ok(()) };
        while let Some(&t) = pending.get(snapshots.len()) {
            if !snapshot_due(t, state.time, cfg.dt) {
                break;
            }
            let paths = write_snapshot_set(dir, snapshots.len(), state)?;
            snapshots.push(SnapshotRecord {
                requested: t,
                time: state.time,
                step: state.step,
                paths,
            });
        }
        Ok(())
    };

    let sp = &stepper.sp;
    record(collect(sp, &state, &cfg.params, &StepReport::default())?, &mut rows)?;
    take_snapshots(&state, &mut snapshots)?;
    let progress_every = (n_steps / 20).max(1);
    for k in 1..=n_steps {
        let (next, report) = stepper.advance(&state)?;
        state = next;
        if k % every == 0 || k == n_steps {
            record(collect(sp, &state, &cfg.params, &report)?, &mut rows)?;
        }
        take_snapshots(&state, &mut snapshots)?;
        if k % progress_every == 0 {
            log::info!("{} dt={} step {k}/{n_steps} t={:.6}", cfg.scheme, cfg.dt, state.time);
        }
    }
    writer.flush().map_err(|e| Error::io(csv_path, e))?;
    if snapshot_dir.is_some() && snapshots.len() < pending.len() {
        log::warn!(
            "{} snapshot time(s) lie beyond t_end = {} and were not written",
            pending.len() - snapshots.len(),
            state.time
        );
    }
    Ok(RunSummary {
        rows,
        final_state: state,
        snapshots,
        csv_path: csv_path.to_path_buf(),
    })
}

/// Runs one trajectory, writing `diagnostics.csv` and snapshot files into
/// the output directory.
pub fn run_simulation(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let dir = &cfg.output.dir;
    create_dir(dir)?;
    integrate(cfg, &dir.join("diagnostics.csv"), Some(dir))
}

/// Advances `cfg` to `t_end` without recording anything.
pub fn run_to_end(cfg: &RunConfig) -> Result<SimState> {
    cfg.validate()?;
    stepper(cfg).run(initial_state(cfg)?, cfg.n_steps())
}

/// `||phi_a - phi_b||_2 + ||rho_a - rho_b||_2`.
pub fn combined_error(a: &SimState, b: &SimState) -> f64 {
    (&a.phi - &b.phi).norm_l2() + (&a.rho - &b.rho).norm_l2()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub scheme: String,
    pub dt: f64,
    pub steps: u64,
    pub error: f64,
    /// `error / sqrt(|domain|)`, the root-mean-square form of the same norm.
    pub error_rms: f64,
    /// Observed order against the previous (larger) step of the ladder.
    pub order: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    pub benchmark_dt: f64,
    pub t_end: f64,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn column(&self, scheme: Scheme) -> Vec<&ConvergenceRow> {
        self.rows.iter().filter(|r| r.scheme == scheme.name()).collect()
    }
}

impl fmt::Display for ConvergenceTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "errors at t = {} against LS2 with dt = {:e}",
            self.t_end, self.benchmark_dt
        )?;
        writeln!(
            f,
            "{:<8} {:>12} {:>8} {:>12} {:>12} {:>7}",
            "scheme", "dt", "steps", "error", "error_rms", "order"
        )?;
        for r in &self.rows {
            let order = r.order.map_or_else(|| "-".to_string(), |o| format!("{o:.3}"));
            writeln!(
                f,
                "{:<8} {:>12.4e} {:>8} {:>12.4e} {:>12.4e} {:>7}",
                r.scheme, r.dt, r.steps, r.error, r.error_rms, order
            )?;
        }
        Ok(())
    }
}

fn with_label(label: impl FnOnce() -> String) -> impl FnOnce(Error) -> Error {
    move |e| Error::Run {
        label: label(),
        source: Box::new(e),
    }
}

/// Temporal convergence study. Every ladder entry of every scheme is
/// compared with an LS2 run at `benchmark_dt` on the same grid; runs execute
/// in parallel. Writes `convergence.csv` into the output directory.
pub fn run_convergence(
    base: &RunConfig,
    ladder: &[f64],
    benchmark_dt: f64,
    schemes: &[Scheme],
) -> Result<ConvergenceTable> {
    if ladder.is_empty() {
        return Err(Error::Config("the time-step ladder is empty".into()));
    }
    if ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("the time-step ladder must be strictly decreasing".into()));
    }
    let min = ladder[ladder.len() - 1];
    if !(benchmark_dt > 0.0 && benchmark_dt < min) {
        return Err(Error::Config(format!(
            "benchmark dt {benchmark_dt} must lie strictly below the smallest ladder entry {min}"
        )));
    }
    create_dir(&base.output.dir)?;

    let mut jobs = vec![(Scheme::Ls2, benchmark_dt)];
    for &scheme in schemes {
        jobs.extend(ladder.iter().map(|&dt| (scheme, dt)));
    }
    let finals: Vec<(SimState, u64)> = jobs
        .par_iter()
        .map(|&(scheme, dt)| {
            let cfg = RunConfig {
                scheme,
                dt,
                ..base.clone()
            };
            run_to_end(&cfg)
                .map(|s| (s, cfg.n_steps()))
                .map_err(with_label(|| format!("{scheme} run with dt = {dt}")))
        })
        .collect::<Result<_>>()?;

    let reference = &finals[0].0;
    let mut rows = Vec::new();
    for (i, &scheme) in schemes.iter().enumerate() {
        let start = 1 + i * ladder.len();
        let mut prev: Option<(f64, f64)> = None;
        for (j, &dt) in ladder.iter().enumerate() {
            let (state, steps) = &finals[start + j];
            let error = combined_error(state, reference);
            let error_rms = error / base.grid.area().sqrt();
            let order = prev.map(|(dt0, e0)| (e0 / error).log2() / (dt0 / dt).log2());
            rows.push(ConvergenceRow {
                scheme: scheme.name().into(),
                dt,
                steps: *steps,
                error,
                error_rms,
                order,
            });
            prev = Some((dt, error));
        }
    }
    let table = ConvergenceTable {
        benchmark_dt,
        t_end: base.t_end,
        rows,
    };
    let path = base.output.dir.join("convergence.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for r in &table.rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(table)
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScanOutcome {
    /// Modified energy never rose beyond the slack.
    Dissipative,
    /// Index of the first offending CSV row.
    Violation { row: usize },
    /// The run itself failed.
    Failed(String),
    /// Completed; no assertion applies to this scheme.
    Completed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanEntry {
    pub scheme: Scheme,
    pub dt: f64,
    pub csv_path: PathBuf,
    pub outcome: ScanOutcome,
}

impl ScanEntry {
    /// Failures of the implicit reference are reported, not held against
    /// the scan.
    pub fn passed(&self) -> bool {
        match self.outcome {
            ScanOutcome::Dissipative | ScanOutcome::Completed => true,
            ScanOutcome::Violation { .. } => false,
            ScanOutcome::Failed(_) => self.scheme == Scheme::Implicit,
        }
    }
}

pub fn energy_csv_name(scheme: Scheme, dt: f64) -> String {
    format!("energy_{}_dt{:e}.csv", scheme.name(), dt)
}

/// Energy-stability scan: one diagnostics series per `(scheme, dt)`,
/// written to `energy_<scheme>_dt<dt>.csv`. Modified-energy dissipation is
/// checked for LS1 and LS2 with relative slack `10 * rel_tol`.
pub fn run_energy_scan(base: &RunConfig, dts: &[f64], schemes: &[Scheme]) -> Result<Vec<ScanEntry>> {
    if dts.is_empty() || schemes.is_empty() {
        return Ok(Vec::new());
    }
    create_dir(&base.output.dir)?;
    let jobs: Vec<(Scheme, f64)> = schemes
        .iter()
        .flat_map(|&s| dts.iter().map(move |&dt| (s, dt)))
        .collect();
    let tol = 10.0 * base.solver.rel_tol;
    let entries = jobs
        .par_iter()
        .map(|&(scheme, dt)| {
            let cfg = RunConfig {
                scheme,
                dt,
                ..base.clone()
            };
            let csv_path = base.output.dir.join(energy_csv_name(scheme, dt));
            let outcome = match integrate(&cfg, &csv_path, None) {
                Ok(_) if scheme == Scheme::Implicit => ScanOutcome::Completed,
                Ok(summary) => match assert_dissipation(&summary.rows, tol).first_violation {
                    None => ScanOutcome::Dissipative,
                    Some(row) => ScanOutcome::Violation { row },
                },
                Err(e) => ScanOutcome::Failed(e.to_string()),
            };
            ScanEntry {
                scheme,
                dt,
                csv_path,
                outcome,
            }
        })
        .collect();
    Ok(entries)
}

/// Human-readable summary of a snapshot file.
pub fn inspect_snapshot(path: &Path) -> Result<String> {
    let (field, header) = super::snapshot::read_snapshot(path)?;
    let v = field.values();
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(format!(
        "{}\n  field  {}\n  grid   {} x {}\n  time   {}\n  min    {min:.6e}\n  max    {max:.6e}\n  mean   {:.6e}\n",
        path.display(),
        header.field_id.name(),
        header.nx,
        header.ny,
        header.time,
        field.mean()
    ))
}
