//! Library side of the `cage` command: acceptance checks, reference models
//! and run reports.

pub mod checks;
pub mod oracle;
pub mod report;
