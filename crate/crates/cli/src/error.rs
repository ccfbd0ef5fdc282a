use std::path::Path;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] weakcorr::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use weakcorr::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
            CliError::Core(e) => match e {
                E::Config(_) | E::SiteOutOfRange { .. } | E::TimeNotOnGrid(_) => EXIT_CONFIG,
                E::Numerical { .. } | E::NotNormalized { .. } | E::Trajectories { .. } => {
                    EXIT_NUMERICAL
                }
                E::Schema { .. } | E::Parse(_) | E::Io(_) | E::Json(_) | E::Csv(_) => EXIT_IO,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categories_have_distinct_codes() {
        let config = CliError::Config("x".into()).exit_code();
        let numerical = CliError::from(weakcorr::Error::Numerical {
            message: "x".into(),
            residual: 1.0,
        })
        .exit_code();
        let io = CliError::from(weakcorr::Error::Schema {
            expected: "a".into(),
            found: "b".into(),
        })
        .exit_code();
        assert_eq!(
            (config, numerical, io),
            (EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO)
        );
    }
}
