use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    /// Invalid model or scenario configuration. Raised before any integration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Several configuration problems collected in one pass.
    #[error("configuration invalid:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    #[error("non-finite derivative in slot `{slot}` at t = {time:.6} s")]
    NonFiniteState { slot: String, time: f64 },

    #[error("non-finite network solution at step {step}")]
    NonFiniteSolution { step: u64 },

    #[error("DC link collapsed (v_dc = {v_dc:.4}) at t = {time:.6} s")]
    DcLinkCollapse { v_dc: f64, time: f64 },

    #[error("event at t = {t} s is before current time {now} s")]
    EventInPast { t: f64, now: f64 },

    #[error("singular network matrix: {0}")]
    Singular(String),

    #[error("{context}: {source}")]
    Annotated {
        context: String,
        #[source]
        source: Box<SimError>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
}

impl SimError {
    pub fn config(msg: impl Into<String>) -> Self {
        SimError::Config(msg.into())
    }

    pub fn annotate(self, context: impl Into<String>) -> Self {
        SimError::Annotated {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping annotations.
    pub fn root(&self) -> &SimError {
        match self {
            SimError::Annotated { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code used by the CLI: 2 config, 3 numeric abort, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            SimError::Config(_)
            | SimError::Validation(_)
            | SimError::EventInPast { .. }
            | SimError::Singular(_)
            | SimError::Parse { .. } => 2,
            SimError::NonFiniteState { .. }
            | SimError::NonFiniteSolution { .. }
            | SimError::DcLinkCollapse { .. } => 3,
            SimError::Io { .. } => 4,
            SimError::Annotated { .. } => unreachable!(),
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
