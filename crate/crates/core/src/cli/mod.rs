//! Command-line surface: configuration, subcommands and file output.

mod commands;
mod config;

pub use commands::{
    cmd_bounds, cmd_chi_map, cmd_convergence, cmd_inflation, cmd_lengthscales, cmd_spectrum, fmt_f64,
    write_outputs, Outputs, RESOLVED_CONFIG,
};
pub use config::{
    BackgroundConfig, BoundsConfig, ChiMapConfig, EnsembleConfig, GeometryConfig, LengthScalesConfig,
    ObservationConfig, RunConfig,
};

use crate::error::Error;

/// Process exit code for an error: 2 for numerical failures, 1 for everything else.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        2
    } else {
        1
    }
}

/// One-line JSON error record for the diagnostic stream.
pub fn error_line(e: &Error) -> String {
    serde_json::json!({ "error": e.kind(), "exit_code": exit_code(e), "message": e.to_string() }).to_string()
}
