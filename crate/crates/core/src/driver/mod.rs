//! Configuration, the adaptive loop and result output.

pub mod adapt;
pub mod config;
pub mod output;

pub use adapt::{adaptive_loop, run_uniform, ConvergenceRow, PointData, RunResult, Snapshot, StopReason};
pub use config::{AdaptConfig, AdaptSettings, DualStrategy, GoalConfig, MeshConfig, ProblemConfig, ReferenceConfig};
pub use output::{rows_to_csv, write_csv, write_outputs, write_vtk, CSV_HEADER};
