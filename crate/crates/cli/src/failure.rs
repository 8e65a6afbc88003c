use std::io::ErrorKind;
use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes. Kept in sync with the table printed by `--help`.
pub mod code {
    pub const OK: u8 = 0;
    pub const USAGE: u8 = 2;
    pub const CONFIG_PARSE: u8 = 3;
    pub const MISSING_INPUT: u8 = 4;
    pub const INVALID_CONFIG: u8 = 5;
    pub const DIVERGENCE: u8 = 6;
    pub const INTEGRITY: u8 = 7;
    pub const THRESHOLD: u8 = 8;
    pub const IO: u8 = 9;
    pub const OTHER: u8 = 10;
}

pub const EXIT_CODE_HELP: &str = "\
Exit codes:
  0   success
  2   usage: bad command line
  3   config-parse: config file or --set value is not valid TOML or does not fit the schema
  4   missing-input: a config file, dataset or model does not exist
  5   invalid-config: values parse but are inconsistent, e.g. a model used with the wrong system or step
  6   divergence: a trajectory left the finite bound
  7   integrity: bad magic, unknown format version, checksum mismatch, or a replayed input changed
  8   threshold: an acceptance threshold given by flag or config was violated
  9   io: reading or writing a file failed
  10  other: numerical failure such as a singular mass matrix or a non-finite training loss

Errors print one line to stderr: `error: <category>: <message>`.

Environment:
  NEURVEC_OUT_DIR   output directory when --out is not given (default: neurvec-out)
  NEURVEC_WORKERS   size of the batch thread pool; overrides `workers` from the config";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    ConfigParse(String),

    #[error("{}: not found", .0.display())]
    MissingInput(PathBuf),

    #[error("{0}")]
    InvalidConfig(String),

    #[error("{0}")]
    Integrity(String),

    #[error("{0}")]
    Threshold(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] neurvec::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == ErrorKind::NotFound {
            CliError::MissingInput(path)
        } else {
            CliError::Io { path, source }
        }
    }

    pub fn category(&self) -> &'static str {
        match self.code() {
            code::USAGE => "usage",
            code::CONFIG_PARSE => "config-parse",
            code::MISSING_INPUT => "missing-input",
            code::INVALID_CONFIG => "invalid-config",
            code::DIVERGENCE => "divergence",
            code::INTEGRITY => "integrity",
            code::THRESHOLD => "threshold",
            code::IO => "io",
            _ => "other",
        }
    }

    pub fn code(&self) -> u8 {
        use neurvec::Error as E;
        match self {
            CliError::Usage(_) => code::USAGE,
            CliError::ConfigParse(_) => code::CONFIG_PARSE,
            CliError::MissingInput(_) => code::MISSING_INPUT,
            CliError::InvalidConfig(_) => code::INVALID_CONFIG,
            CliError::Integrity(_) => code::INTEGRITY,
            CliError::Threshold(_) => code::THRESHOLD,
            CliError::Io { .. } => code::IO,
            CliError::Core(e) => match e {
                E::Divergence { .. } => code::DIVERGENCE,
                E::BadMagic { .. }
                | E::FormatVersionMismatch { .. }
                | E::ChecksumMismatch { .. }
                | E::TruncatedFile
                | E::Metadata(_) => code::INTEGRITY,
                E::Io { source, .. } if source.kind() == ErrorKind::NotFound => code::MISSING_INPUT,
                E::Io { .. } => code::IO,
                E::DimensionMismatch { .. }
                | E::UnsupportedSystem(_)
                | E::InvalidPlan(_)
                | E::ModelSystemMismatch { .. }
                | E::StepSizeMismatch { .. }
                | E::SamplingMismatch { .. }
                | E::InvalidConfig(_)
                | E::EmptySplit { .. }
                | E::ShapeMismatch(_)
                | E::TimeAxisMismatch
                | E::EmptyRange { .. } => code::INVALID_CONFIG,
                E::SingularMassMatrix { .. }
                | E::RejectionBudgetExceeded { .. }
                | E::NonFiniteLoss { .. }
                | E::DegenerateVariance => code::OTHER,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_distinct_per_category() {
        let cases = [
            CliError::Usage(String::new()),
            CliError::ConfigParse(String::new()),
            CliError::MissingInput(PathBuf::new()),
            CliError::InvalidConfig(String::new()),
            CliError::Core(neurvec::Error::Divergence { step: 1, row: 0, component: 0, value: 1e9 }),
            CliError::Integrity(String::new()),
            CliError::Threshold(String::new()),
            CliError::Io { path: PathBuf::new(), source: std::io::Error::other("x") },
            CliError::Core(neurvec::Error::DegenerateVariance),
        ];
        let codes: Vec<u8> = cases.iter().map(CliError::code).collect();
        assert_eq!(codes, vec![2, 3, 4, 5, 6, 7, 8, 9, 10]);
        let mut cats: Vec<&str> = cases.iter().map(CliError::category).collect();
        cats.dedup();
        assert_eq!(cats.len(), cases.len());
    }

    #[test]
    fn not_found_maps_to_missing_input() {
        let e = CliError::io("a.nvds", std::io::Error::from(ErrorKind::NotFound));
        assert_eq!(e.code(), code::MISSING_INPUT);
        let core = CliError::Core(neurvec::Error::Io {
            path: "b".into(),
            source: std::io::Error::from(ErrorKind::NotFound),
        });
        assert_eq!(core.code(), code::MISSING_INPUT);
        let corrupt = CliError::Core(neurvec::Error::ChecksumMismatch { stored: 1, computed: 2 });
        assert_eq!(corrupt.category(), "integrity");
    }
}
