//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line per
//! criterion (written straight to stderr so it shows without
//! `--nocapture`) and then asserts it.

mod common;

use std::io::Write;
use std::path::Path;

use chsurf::diagnostics::{assert_dissipation, collect};
use chsurf::harness::{
    combined_error, ic_smooth, ic_spinodal, run_convergence, run_energy_scan, run_simulation, run_to_end,
    InitialCondition, OutputConfig, RunConfig, ScanOutcome,
};
use chsurf::model::{energy_original, init_aux, mu_phi_continuous, mu_rho_continuous, ModelParams, SimState};
use chsurf::schemes::{
    ls1_energy_balance, step_ls1, step_ls1_detailed, PhiOperator, RhoOperator, Scheme, SolverOptions, StepReport,
    Stepper,
};
use chsurf::spectral::{Field, Grid, Spectral};
use common::*;

fn report(name: &str, pass: bool, detail: &str) -> bool {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn note(text: &str) {
    let _ = writeln!(std::io::stderr().lock(), "     {text}");
}

fn base(dir: &Path, n: usize) -> RunConfig {
    RunConfig {
        grid: Grid::square(n).unwrap(),
        output: OutputConfig {
            dir: dir.to_path_buf(),
            series_every: 1,
            snapshot_times: Vec::new(),
        },
        ..RunConfig::default()
    }
}

fn spinodal(seed: u64) -> InitialCondition {
    InitialCondition::Spinodal {
        phi_bar: 0.0,
        rho_bar: 0.2,
        amplitude: 1e-3,
        seed,
    }
}

const LADDER: [f64; 7] = [1e-2, 5e-3, 2.5e-3, 1.25e-3, 6.25e-4, 3.125e-4, 1.5625e-4];
const TABLE_LS1: [f64; 7] = [4.21e-4, 2.16e-4, 1.09e-4, 5.52e-5, 2.77e-5, 1.38e-5, 6.95e-6];
const TABLE_LS2: [f64; 7] = [8.15e-5, 2.18e-5, 5.63e-6, 1.42e-6, 3.55e-7, 8.48e-8, 2.10e-8];

#[test]
fn convergence_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        t_end: 0.1,
        ic: InitialCondition::Smooth,
        ..base(dir.path(), 128)
    };
    let table = run_convergence(&cfg, &LADDER, 7.8125e-5, &[Scheme::Ls1, Scheme::Ls2]).unwrap();
    for line in table.to_string().lines() {
        note(line);
    }

    let mut ok = true;
    for (scheme, band, reference) in [
        (Scheme::Ls1, (0.9, 1.1), TABLE_LS1),
        (Scheme::Ls2, (1.8, 2.2), TABLE_LS2),
    ] {
        let col = table.column(scheme);
        let orders: Vec<f64> = col.iter().filter_map(|r| r.order).collect();
        let orders_ok = orders.iter().all(|o| (band.0..=band.1).contains(o));
        ok &= report(
            &format!("convergence/{scheme} orders in [{}, {}]", band.0, band.1),
            orders_ok,
            &format!("{:.3?}", orders),
        );

        // The published errors are root-mean-square norms; the raw
        // quadrature norm on [0, 2pi]^2 is larger by exactly 2 pi.
        let ratios: Vec<f64> = col.iter().zip(reference).map(|(r, t)| r.error_rms / t).collect();
        let raw: Vec<f64> = col.iter().zip(reference).map(|(r, t)| r.error / t).collect();
        let mag_ok = ratios.iter().all(|q| (0.5..=2.0).contains(q));
        ok &= report(
            &format!("convergence/{scheme} magnitudes within 2x of the published column"),
            mag_ok,
            &format!("rms / published = {:.3?}", ratios),
        );
        note(&format!("quadrature-norm / published = {:.3?}", raw));
    }
    let ls2 = table.column(Scheme::Ls2);
    let monotone = table.column(Scheme::Ls1).windows(2).all(|w| w[1].error < w[0].error)
        && ls2.windows(2).all(|w| w[1].error < w[0].error);
    ok &= report("convergence/errors decrease down the ladder", monotone, "");
    assert!(ok, "convergence table criteria failed");
}

#[test]
fn unconditional_stability() {
    let dir = tempfile::tempdir().unwrap();
    let solver = SolverOptions::default();
    let dts = [1e-4, 1e-3, 1e-2, 1e-1, 1.0];
    let mut ok = true;
    for &dt in &dts {
        let cfg = RunConfig {
            scheme: Scheme::Ls1,
            dt,
            t_end: 100.0 * dt,
            ic: spinodal(42),
            solver,
            ..base(dir.path(), 64)
        };
        let entries = run_energy_scan(&cfg, &[dt], &[Scheme::Ls1]).unwrap();
        let e = &entries[0];
        let series: Vec<chsurf::diagnostics::DiagnosticsRow> = csv::Reader::from_path(&e.csv_path)
            .unwrap()
            .deserialize()
            .map(|r| r.unwrap())
            .collect();
        let steps_ok = series.len() == 101;
        let check = assert_dissipation(&series, 10.0 * solver.rel_tol);
        let first = series.first().unwrap().e_modified;
        let last = series.last().unwrap().e_modified;
        let pass = steps_ok && check.passed && e.outcome == ScanOutcome::Dissipative;
        ok &= report(
            &format!("stability/LS1 dt = {dt:e}, 100 steps"),
            pass,
            &format!("e_modified {first:.6e} -> {last:.6e}, first violation {:?}", check.first_violation),
        );
    }
    assert!(ok);
}

#[test]
fn discrete_energy_identity() {
    let grid = Grid::square(32).unwrap();
    let sp = Spectral::new(grid);
    let p = ModelParams::default();
    let (phi, rho) = ic_smooth(grid);
    let mut state = SimState::initial(phi, rho, &p).unwrap();
    let opts = SolverOptions::default();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let detail = step_ls1_detailed(&sp, &state, &p, 1e-3, &opts).unwrap();
        worst = worst.max(ls1_energy_balance(&sp, &p, &state, &detail).relative_mismatch());
        state = detail.state;
    }
    let pass = report(
        "energy identity: 20 LS1 steps on 32^2 balance to 1e-7",
        worst <= 1e-7,
        &format!("worst relative mismatch {worst:.3e}"),
    );
    assert!(pass);
}

#[test]
fn mass_conservation() {
    let grid = Grid::square(32).unwrap();
    let p = ModelParams::default();
    let (phi, rho) = ic_spinodal(grid, -0.1, 0.2, 1e-3, 3);
    let s0 = SimState::initial(phi, rho, &p).unwrap();
    let mut ok = true;
    for scheme in [Scheme::Ls1, Scheme::Ls2] {
        let stepper = Stepper::new(Spectral::new(grid), p, scheme, 1e-3, SolverOptions::default());
        let s = stepper.run(s0.clone(), 1000).unwrap();
        let d_phi = (s.phi.mean() - s0.phi.mean()).abs();
        let d_rho = (s.rho.mean() - s0.rho.mean()).abs();
        ok &= report(
            &format!("mass/{scheme}: 1000 steps drift <= 1e-10"),
            d_phi <= 1e-10 && d_rho <= 1e-10,
            &format!("phi {d_phi:.2e}, rho {d_rho:.2e}"),
        );
    }
    assert!(ok);
}

#[test]
fn step_operators_are_spd() {
    let grid = Grid::square(32).unwrap();
    let sp = Spectral::new(grid);
    let p = ModelParams::default();
    let dt = 1e-3;
    let s0 = SimState::initial(smooth_field(grid, 4, 0.8, 0.0, 5), smooth_field(grid, 4, 0.3, 0.2, 6), &p).unwrap();
    let (s1, _) = step_ls1(&sp, &s0, &p, dt, &SolverOptions::default()).unwrap();
    let g_star = chsurf::model::g_of(&s0.rho, &p);
    let h_star = chsurf::model::h_of(&s0.phi);

    let mut ok = true;
    for (label, gamma, coupling) in [("LS1", 1.0, p.theta()), ("LS2", 1.5, 2.0 * p.theta())] {
        let rho_op = RhoOperator::new(&sp, &p, dt, gamma, &g_star);
        let phi_op = PhiOperator::new(&sp, &p, dt, gamma, &h_star, &s1.rho, coupling);
        let guard = !phi_op.indefinite_risk();
        let (mut worst_sym, mut min_pos) = (0.0f64, f64::INFINITY);
        let applies: [&dyn Fn(&Field) -> Field; 2] = [&|x| rho_op.apply(x), &|x| phi_op.apply(x)];
        for k in 0..20 {
            let f = noise_field(grid, 1000 + 2 * k);
            let g = noise_field(grid, 1001 + 2 * k);
            let scale = f.norm_l2() * g.norm_l2();
            for apply in applies {
                let afg = sp.inner(&apply(&f), &g).unwrap();
                let fag = sp.inner(&f, &apply(&g)).unwrap();
                worst_sym = worst_sym.max((afg - fag).abs() / scale);
                min_pos = min_pos.min(sp.inner(&apply(&f), &f).unwrap() / (f.norm_l2() * f.norm_l2()));
            }
        }
        ok &= report(
            &format!("SPD/{label} operators on 20 random mean-zero pairs"),
            guard && worst_sym <= 1e-9 && min_pos > 0.0,
            &format!(
                "max |<Af,g> - <f,Ag>| / |f||g| = {worst_sym:.2e}, min <Af,f>/|f|^2 = {min_pos:.3e}, guard quiet: {guard}"
            ),
        );
    }
    assert!(ok);
}

#[test]
fn variational_consistency() {
    let grid = Grid::square(64).unwrap();
    let sp = Spectral::new(grid);
    let p = ModelParams::default();
    let h = 1e-4;
    let (mut worst_phi, mut worst_rho) = (0.0f64, 0.0f64);
    for seed in 0..5u64 {
        let phi = smooth_field(grid, 6, 0.8, 0.0, 10 * seed);
        let rho = smooth_field(grid, 6, 0.3, 0.2, 10 * seed + 1);
        let psi = smooth_field(grid, 6, 1.0, 0.0, 10 * seed + 2);
        let e = |a: &Field, b: &Field| energy_original(&sp, a, b, &p).unwrap();
        let d_phi = (e(&(&phi + &(&psi * h)), &rho) - e(&(&phi - &(&psi * h)), &rho)) / (2.0 * h);
        let d_rho = (e(&phi, &(&rho + &(&psi * h))) - e(&phi, &(&rho - &(&psi * h)))) / (2.0 * h);
        let mu_phi = sp.inner(&mu_phi_continuous(&sp, &phi, &rho, &p).unwrap(), &psi).unwrap();
        let mu_rho = sp.inner(&mu_rho_continuous(&sp, &phi, &rho, &p).unwrap(), &psi).unwrap();
        worst_phi = worst_phi.max((d_phi - mu_phi).abs() / mu_phi.abs());
        worst_rho = worst_rho.max((d_rho - mu_rho).abs() / mu_rho.abs());
    }
    let pass = report(
        "Gateaux derivatives of the energy match mu_phi and mu_rho on 64^2 to 1e-6",
        worst_phi <= 1e-6 && worst_rho <= 1e-6,
        &format!("worst relative error mu_phi {worst_phi:.2e}, mu_rho {worst_rho:.2e}"),
    );
    assert!(pass);
}

#[test]
fn implicit_oracle_gap_is_first_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        t_end: 0.01,
        ic: InitialCondition::Smooth,
        ..base(dir.path(), 32)
    };
    let gap = |dt: f64| {
        let ls1 = run_to_end(&RunConfig {
            scheme: Scheme::Ls1,
            dt,
            ..cfg.clone()
        })
        .unwrap();
        let oracle = run_to_end(&RunConfig {
            scheme: Scheme::Implicit,
            dt,
            ..cfg.clone()
        })
        .unwrap();
        combined_error(&ls1, &oracle)
    };
    let (a, b) = (gap(1e-3), gap(5e-4));
    let ratio = a / b;
    let pass = report(
        "oracle: LS1 vs implicit gap halves with dt (ratio 2.0 +- 0.4)",
        (1.6..=2.4).contains(&ratio),
        &format!("gap(1e-3) = {a:.3e}, gap(5e-4) = {b:.3e}, ratio {ratio:.3}"),
    );
    assert!(pass);
}

#[test]
fn spinodal_decomposition() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        scheme: Scheme::Ls2,
        dt: 1e-3,
        t_end: 50.0,
        ic: spinodal(1),
        output: OutputConfig {
            dir: dir.path().to_path_buf(),
            series_every: 1000,
            snapshot_times: vec![0.0, 1.0, 10.0, 20.0, 50.0],
        },
        ..base(dir.path(), 128)
    };
    let summary = run_simulation(&cfg).unwrap();
    let at_snapshots: Vec<_> = summary
        .snapshots
        .iter()
        .map(|s| summary.rows.iter().find(|r| r.step == s.step).expect("row at snapshot step"))
        .collect();
    for r in &at_snapshots {
        note(&format!(
            "t = {:>5.1}: e_modified = {:.6e}, corr_rho_grad = {:.4}",
            r.time, r.e_modified, r.corr_rho_grad
        ));
    }
    let decreasing = at_snapshots.len() == 5 && at_snapshots.windows(2).all(|w| w[1].e_modified < w[0].e_modified);
    let last = summary.rows.last().unwrap();
    let first = &summary.rows[0];
    let drift = (last.mass_phi - first.mass_phi).abs().max((last.mass_rho - first.mass_rho).abs());
    let mut ok = report(
        "spinodal: e_modified strictly decreasing between snapshots",
        decreasing,
        "",
    );
    ok &= report(
        "spinodal: corr_rho_grad > 0.5 at t = 50",
        last.corr_rho_grad > 0.5 && (last.time - 50.0).abs() < 1e-6,
        &format!("corr_rho_grad = {:.4} (initial {:.4})", last.corr_rho_grad, first.corr_rho_grad),
    );
    ok &= report("spinodal: mass drift <= 1e-10", drift <= 1e-10, &format!("{drift:.2e}"));
    assert!(ok);
}

#[test]
fn auxiliary_drift_is_first_order() {
    let grid = Grid::square(64).unwrap();
    let sp = Spectral::new(grid);
    let p = ModelParams::default();
    let (phi, rho) = ic_smooth(grid);
    let s0 = SimState::initial(phi, rho, &p).unwrap();
    let drift = |dt: f64| {
        let n = (0.05 / dt).round() as u64;
        let stepper = Stepper::new(sp.clone(), p, Scheme::Ls1, dt, SolverOptions::default());
        let s = stepper.run(s0.clone(), n).unwrap();
        let row = collect(&sp, &s, &p, &StepReport::default()).unwrap();
        let (u, _) = init_aux(&s.phi, &s.rho, &p);
        assert_eq!(row.aux_err_u, (&s.u_aux - &u).norm_l2());
        (row.aux_err_u, row.aux_err_v)
    };
    let d: Vec<(f64, f64)> = [2e-3, 1e-3, 5e-4].iter().map(|&dt| drift(dt)).collect();
    let ratios = [d[0].0 / d[1].0, d[1].0 / d[2].0];
    note(&format!(
        "V drift ratios {:.3} {:.3}",
        d[0].1 / d[1].1,
        d[1].1 / d[2].1
    ));
    let pass = report(
        "auxiliary drift ||U - (phi^2 - 1)|| at t = 0.05 halves with dt (2.0 +- 0.3)",
        ratios.iter().all(|r| (1.7..=2.3).contains(r)),
        &format!(
            "drift {:.3e} {:.3e} {:.3e}, ratios {:.3} {:.3}",
            d[0].0, d[1].0, d[2].0, ratios[0], ratios[1]
        ),
    );
    assert!(pass);
}
