//! Run configuration.
//!
//! Files are TOML with the sections `[grid]`, `[params]`, `[run]`,
//! `[solver]`, `[ic]` and `[output]`:
//!
//! ```toml
//! [grid]
//! nx = 128
//! ny = 128
//!
//! [run]
//! scheme = "ls2"
//! dt = 1e-3
//! t_end = 50.0
//!
//! [ic]
//! kind = "spinodal"
//! phi_bar = 0.0
//! seed = 7
//!
//! [output]
//! dir = "out"
//! series_every = 100
//! snapshot_times = [1.0, 10.0, 50.0]
//! ```
//!
//! Every key is optional. The command line builds a [`RawConfig`] of its
//! own which is overlaid on the file, so flags win.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{ModelParams, ParamOverrides};
use crate::schemes::{Preconditioner, Scheme, SolverOptions};
use crate::spectral::Grid;

#[derive(Clone, Debug, PartialEq)]
pub enum InitialCondition {
    Smooth,
    Spinodal {
        phi_bar: f64,
        rho_bar: f64,
        amplitude: f64,
        seed: u64,
    },
    /// Two CHSF snapshots holding `phi` and `rho`.
    File { phi: PathBuf, rho: PathBuf },
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub series_every: u64,
    pub snapshot_times: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub grid: Grid,
    pub dealias: bool,
    pub params: ModelParams,
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    pub solver: SolverOptions,
    pub ic: InitialCondition,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid: Grid::square(128).expect("valid default grid"),
            dealias: false,
            params: ModelParams::default(),
            scheme: Scheme::Ls2,
            dt: 1e-3,
            t_end: 0.1,
            solver: SolverOptions::default(),
            ic: InitialCondition::Smooth,
            output: OutputConfig {
                dir: PathBuf::from("out"),
                series_every: 1,
                snapshot_times: Vec::new(),
            },
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= self.dt) {
            return Err(Error::Config(format!(
                "t_end must be at least dt, got t_end = {} and dt = {}",
                self.t_end, self.dt
            )));
        }
        if self.output.series_every == 0 {
            return Err(Error::Config("series_every must be at least 1".into()));
        }
        let times = &self.output.snapshot_times;
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::Config("snapshot times must be finite and non-negative".into()));
        }
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config("snapshot_times must be sorted".into()));
        }
        if let InitialCondition::Spinodal { amplitude, .. } = self.ic {
            if !(amplitude >= 0.0 && amplitude.is_finite()) {
                return Err(Error::Config(format!("amplitude must be non-negative, got {amplitude}")));
            }
        }
        self.solver.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Number of steps to reach `t_end`; the last step may overshoot when
    /// `t_end` is not a multiple of `dt`.
    pub fn n_steps(&self) -> u64 {
        let ratio = self.t_end / self.dt;
        let n = ratio.round();
        if (ratio - n).abs() <= 1e-9 * ratio.max(1.0) {
            n as u64
        } else {
            ratio.ceil() as u64
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        RawConfig::from_toml_str(text)?.resolve()
    }

    pub fn load(path: &Path) -> Result<Self> {
        RawConfig::load(path)?.resolve()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub lx: Option<f64>,
    pub ly: Option<f64>,
    pub dealias: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub scheme: Option<Scheme>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub rel_tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub precond: Option<Preconditioner>,
    pub fallback: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IcKind {
    Smooth,
    Spinodal,
    File,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcSection {
    pub kind: Option<IcKind>,
    pub phi_bar: Option<f64>,
    pub rho_bar: Option<f64>,
    pub amplitude: Option<f64>,
    pub seed: Option<u64>,
    pub phi: Option<PathBuf>,
    pub rho: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub series_every: Option<u64>,
    pub snapshot_times: Option<Vec<f64>>,
}

/// A partially specified configuration.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub params: ParamOverrides,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub ic: IcSection,
    #[serde(default)]
    pub output: OutputSection,
}

macro_rules! overlay {
    ($base:expr, $top:expr; $($field:ident),*) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )*
    };
}

impl RawConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Entries set in `top` replace those of `self`.
    pub fn overlay(mut self, top: &RawConfig) -> RawConfig {
        overlay!(self.grid, top.grid; nx, ny, lx, ly, dealias);
        overlay!(self.params, top.params; m_phi, m_rho, alpha, beta, eps, eta, theta, rho_s);
        overlay!(self.run, top.run; scheme, dt, t_end);
        overlay!(self.solver, top.solver; rel_tol, max_iter, precond, fallback);
        overlay!(self.ic, top.ic; kind, phi_bar, rho_bar, amplitude, seed, phi, rho);
        overlay!(self.output, top.output; dir, series_every, snapshot_times);
        self
    }

    /// Fills unset entries with defaults and validates the result.
    pub fn resolve(&self) -> Result<RunConfig> {
        let d = RunConfig::default();
        let nx = self.grid.nx.unwrap_or(d.grid.nx);
        let grid = Grid::new(
            nx,
            self.grid.ny.unwrap_or(nx),
            self.grid.lx.unwrap_or(2.0 * PI),
            self.grid.ly.unwrap_or(2.0 * PI),
        )
        .map_err(|e| Error::Config(e.to_string()))?;
        let params = self
            .params
            .apply(ModelParams::default())
            .map_err(|e| Error::Config(e.to_string()))?;
        let solver = SolverOptions {
            rel_tol: self.solver.rel_tol.unwrap_or(d.solver.rel_tol),
            max_iter: self.solver.max_iter.unwrap_or(d.solver.max_iter),
            precond: self.solver.precond.unwrap_or(d.solver.precond),
            fallback: self.solver.fallback.unwrap_or(d.solver.fallback),
        };

        let ic = &self.ic;
        let spinodal_keys = ic.phi_bar.is_some() || ic.rho_bar.is_some() || ic.amplitude.is_some() || ic.seed.is_some();
        let file_keys = ic.phi.is_some() || ic.rho.is_some();
        let kind = match ic.kind {
            Some(k) => k,
            None if file_keys => IcKind::File,
            None if spinodal_keys => IcKind::Spinodal,
            None => IcKind::Smooth,
        };
        let ic = match kind {
            IcKind::Smooth => InitialCondition::Smooth,
            IcKind::Spinodal => InitialCondition::Spinodal {
                phi_bar: ic.phi_bar.unwrap_or(0.0),
                rho_bar: ic.rho_bar.unwrap_or(0.2),
                amplitude: ic.amplitude.unwrap_or(1e-3),
                seed: ic.seed.unwrap_or(0),
            },
            IcKind::File => match (&ic.phi, &ic.rho) {
                (Some(phi), Some(rho)) => InitialCondition::File {
                    phi: phi.clone(),
                    rho: rho.clone(),
                },
                _ => return Err(Error::Config("file initial data needs both `phi` and `rho` paths".into())),
            },
        };

        let cfg = RunConfig {
            grid,
            dealias: self.grid.dealias.unwrap_or(d.dealias),
            params,
            scheme: self.run.scheme.unwrap_or(d.scheme),
            dt: self.run.dt.unwrap_or(d.dt),
            t_end: self.run.t_end.unwrap_or(d.t_end),
            solver,
            ic,
            output: OutputConfig {
                dir: self.output.dir.clone().unwrap_or(d.output.dir),
                series_every: self.output.series_every.unwrap_or(d.output.series_every),
                snapshot_times: self.output.snapshot_times.clone().unwrap_or_default(),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
