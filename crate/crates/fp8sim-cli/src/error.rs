use std::fmt;

/// CLI failure classes, one per exit code.
///
/// Invalid flags exit 2 through clap before any of this runs; these two cover
/// everything after argument parsing.
#[derive(Debug)]
pub enum CliError {
    /// Bad or missing settings: unknown config keys, unparseable values,
    /// out-of-range parameters. Exits 2, like a usage error.
    Config(String),
    /// Unreadable or unwritable files and malformed file contents, including
    /// artifact schema mismatches. Exits 1.
    Data(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Data(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_exit_codes_match_error_class() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::Data("x".into()).exit_code(), 1);
    }
}
