use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chsurf::harness::config::{IcKind, RawConfig};
use chsurf::harness::{
    inspect_snapshot, run_convergence, run_energy_scan, run_simulation, RunConfig, ScanOutcome,
};
use chsurf::schemes::{Preconditioner, Scheme};
use chsurf::Result;

#[derive(Parser)]
#[command(name = "chsurf", version, about = "Fluid-surfactant Cahn-Hilliard solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trajectory, writing diagnostics.csv and snapshots.
    Simulate(ConfigArgs),
    /// Temporal convergence study against a small-step LS2 benchmark.
    Converge {
        #[command(flatten)]
        config: ConfigArgs,
        /// Strictly decreasing time steps.
        #[arg(long, value_delimiter = ',', default_value = "1e-2,5e-3,2.5e-3,1.25e-3,6.25e-4,3.125e-4,1.5625e-4")]
        ladder: Vec<f64>,
        #[arg(long, default_value_t = 7.8125e-5)]
        benchmark_dt: f64,
        #[arg(long, value_delimiter = ',', default_value = "ls1,ls2")]
        schemes: Vec<Scheme>,
    },
    /// Energy series for several schemes and time steps.
    EnergyScan {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_delimiter = ',', default_value = "1e-2,1e-3,5e-4,1e-4")]
        dts: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "ls1,ls2")]
        schemes: Vec<Scheme>,
    },
    /// Print the header and value range of a snapshot file.
    Inspect { snapshot: PathBuf },
}

/// Mirrors every config-file key; flags override the file.
#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    lx: Option<f64>,
    #[arg(long)]
    ly: Option<f64>,
    #[arg(long)]
    dealias: Option<bool>,

    #[arg(long)]
    m_phi: Option<f64>,
    #[arg(long)]
    m_rho: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    rho_s: Option<f64>,

    #[arg(long)]
    scheme: Option<Scheme>,
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    t_end: Option<f64>,

    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, value_parser = parse_precond)]
    precond: Option<Preconditioner>,
    #[arg(long)]
    fallback: Option<bool>,

    /// smooth, spinodal or file.
    #[arg(long, value_parser = parse_ic)]
    ic: Option<IcKind>,
    #[arg(long, allow_negative_numbers = true)]
    phi_bar: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    rho_bar: Option<f64>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Initial phase field (CHSF) for file initial data.
    #[arg(long)]
    ic_phi: Option<PathBuf>,
    /// Initial surfactant field (CHSF) for file initial data.
    #[arg(long)]
    ic_rho: Option<PathBuf>,

    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    series_every: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    snapshot_times: Option<Vec<f64>>,
}

fn parse_precond(s: &str) -> std::result::Result<Preconditioner, String> {
    match s {
        "constant-coefficient" => Ok(Preconditioner::ConstantCoefficient),
        "none" => Ok(Preconditioner::None),
        _ => Err("expected constant-coefficient or none".into()),
    }
}

fn parse_ic(s: &str) -> std::result::Result<IcKind, String> {
    match s {
        "smooth" => Ok(IcKind::Smooth),
        "spinodal" => Ok(IcKind::Spinodal),
        "file" => Ok(IcKind::File),
        _ => Err("expected smooth, spinodal or file".into()),
    }
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let file = match &self.config {
            Some(path) => RawConfig::load(path)?,
            None => RawConfig::default(),
        };
        let mut cli = RawConfig::default();
        cli.grid.nx = self.nx;
        cli.grid.ny = self.ny;
        cli.grid.lx = self.lx;
        cli.grid.ly = self.ly;
        cli.grid.dealias = self.dealias;
        cli.params.m_phi = self.m_phi;
        cli.params.m_rho = self.m_rho;
        cli.params.alpha = self.alpha;
        cli.params.beta = self.beta;
        cli.params.eps = self.eps;
        cli.params.eta = self.eta;
        cli.params.theta = self.theta;
        cli.params.rho_s = self.rho_s;
        cli.run.scheme = self.scheme;
        cli.run.dt = self.dt;
        cli.run.t_end = self.t_end;
        cli.solver.rel_tol = self.rel_tol;
        cli.solver.max_iter = self.max_iter;
        cli.solver.precond = self.precond;
        cli.solver.fallback = self.fallback;
        cli.ic.kind = self.ic;
        cli.ic.phi_bar = self.phi_bar;
        cli.ic.rho_bar = self.rho_bar;
        cli.ic.amplitude = self.amplitude;
        cli.ic.seed = self.seed;
        cli.ic.phi = self.ic_phi.clone();
        cli.ic.rho = self.ic_rho.clone();
        cli.output.dir = self.out.clone();
        cli.output.series_every = self.series_every;
        cli.output.snapshot_times = self.snapshot_times.clone();
        file.overlay(&cli).resolve()
    }
}

/// Returns whether every assertion held.
fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Simulate(args) => {
            let cfg = args.resolve()?;
            let summary = run_simulation(&cfg)?;
            let last = summary.rows.last().expect("initial row is always written");
            println!(
                "{} steps of {} to t = {:.6}: e_modified = {:.6e}, corr_rho_grad = {:.4}",
                last.step, cfg.scheme, last.time, last.e_modified, last.corr_rho_grad
            );
            println!("diagnostics: {}", summary.csv_path.display());
            for s in &summary.snapshots {
                println!("snapshot t = {:.6} (step {}): {}", s.time, s.step, s.paths[0].display());
            }
            Ok(true)
        }
        Command::Converge {
            config,
            ladder,
            benchmark_dt,
            schemes,
        } => {
            let cfg = config.resolve()?;
            let table = run_convergence(&cfg, &ladder, benchmark_dt, &schemes)?;
            print!("{table}");
            Ok(true)
        }
        Command::EnergyScan { config, dts, schemes } => {
            let cfg = config.resolve()?;
            let entries = run_energy_scan(&cfg, &dts, &schemes)?;
            let mut ok = true;
            for e in &entries {
                let status = match &e.outcome {
                    ScanOutcome::Dissipative => "dissipative".to_string(),
                    ScanOutcome::Completed => "completed".to_string(),
                    ScanOutcome::Violation { row } => format!("energy increase at row {row}"),
                    ScanOutcome::Failed(msg) => format!("failed: {msg}"),
                };
                let verdict = if e.passed() { "ok  " } else { "FAIL" };
                println!("{verdict} {:<8} dt = {:<10e} {status}", e.scheme, e.dt);
                ok &= e.passed();
            }
            Ok(ok)
        }
        Command::Inspect { snapshot } => {
            print!("{}", inspect_snapshot(&snapshot)?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
