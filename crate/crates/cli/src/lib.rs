//! Pipeline runner and exit-code conventions behind the `korpus` binary.

pub mod pipeline;

use korpus::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_STAGE: i32 = 3;
pub const EXIT_INTEGRITY: i32 = 4;

/// Maps an error to the process exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        Error::Integrity(_) | Error::Parse { .. } => EXIT_INTEGRITY,
        _ => EXIT_STAGE,
    }
}
