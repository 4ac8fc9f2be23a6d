//! Configuration, diagnostics CSV, VTK snapshots, reference files and study
//! tables.

mod config;
mod csv;
mod reference;
mod table;
mod vtk;

pub use config::{
    parse_config, DiagnosticsConfig, GridConfig, PhysicsConfig, RunConfig, SchemeConfig,
    StudyConfig,
};
pub use csv::{csv_row, write_diagnostics_csv, DiagnosticsCsv, CSV_COLUMNS};
pub use reference::{read_reference, write_reference};
pub use table::{eoc_csv, eoc_text};
pub use vtk::{snapshot_text, write_snapshot};
