//! Experiment harness: configuration, initial data, snapshot I/O and the
//! drivers used by the command-line tool.

pub mod config;
pub mod ic;
pub mod run;
pub mod snapshot;

pub use config::{InitialCondition, OutputConfig, RawConfig, RunConfig};
pub use ic::{ic_smooth, ic_spinodal};
pub use run::{
    combined_error, energy_csv_name, initial_state, inspect_snapshot, run_convergence, run_energy_scan,
    run_simulation, run_to_end, ConvergenceRow, ConvergenceTable, RunSummary, ScanEntry, ScanOutcome,
    SnapshotRecord,
};
pub use snapshot::{read_snapshot, read_snapshot_on, write_snapshot, FieldId, SnapshotHeader};
