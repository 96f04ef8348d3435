use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("stage {stage}{}: {source}", context_suffix(.context))]
    Stage {
        stage: &'static str,
        context: String,
        #[source]
        source: effx_core::Error,
    },
    #[error("stage {stage}: missing or stale upstream output: {message}")]
    Upstream { stage: &'static str, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn context_suffix(c: &str) -> String {
    if c.is_empty() {
        String::new()
    } else {
        format!(" [{c}]")
    }
}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

impl CliError {
    pub fn stage(stage: &'static str, context: impl Into<String>) -> impl FnOnce(effx_core::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Stage { stage, context, source }
    }

    pub fn io(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io { path: path.display().to_string(), source }
    }

    pub fn exit_code(&self) -> i32 {
        use effx_core::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Stage { source: E::Schema(_), .. } => EXIT_CONFIG,
            CliError::Stage { source: E::Numeric(_), .. } => EXIT_NUMERIC,
            CliError::Stage { .. } | CliError::Upstream { .. } | CliError::Io { .. } => EXIT_DATA,
        }
    }
}
