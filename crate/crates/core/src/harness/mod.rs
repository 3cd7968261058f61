//! Named scenarios, JSON configuration, single runs, refinement studies and
//! the CSV trajectory format used by the command-line tool.

pub mod config;
pub mod files;
pub mod run;
pub mod scenario;
pub mod study;

pub use config::{RunConfig, StudyPlan};
pub use files::{diagnose, read_trajectory, write_run};
pub use run::{run, RunOutput, RunReport};
pub use scenario::{Scenario, SCENARIOS};
pub use study::{run_study, write_study, StudyReport};

use crate::error::Error;

/// Process exit status for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Json(_) | Error::Io(_) | Error::Csv(_) | Error::InvalidTheta(_) => 2,
        _ => 3,
    }
}

/// Exit status when validation finds a violated hypothesis.
pub const VALIDATION_FAILURE: i32 = 4;
