//! Process exit codes by error category.

use std::fmt;

use crate::config::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCategory {
    Other = 1,
    Config = 2,
    Data = 3,
    Diverged = 4,
    Checkpoint = 5,
    Mismatch = 6,
}

impl ExitCategory {
    pub fn code(self) -> u8 {
        self as u8
    }
}

/// `compare --full` results outside the reference tolerances.
#[derive(Debug)]
pub struct ReproductionMismatch(pub Vec<String>);

impl fmt::Display for ReproductionMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} result(s) outside reference tolerance: {}", self.0.len(), self.0.join("; "))
    }
}

impl std::error::Error for ReproductionMismatch {}

fn classify_core(e: &hopdeq::Error) -> ExitCategory {
    use hopdeq::Error::*;
    match e {
        InvalidConfig(_) | InvalidArchitecture(_) | UnknownMapKind(_) | WrongVariant { .. } => ExitCategory::Config,
        Idx(_) | IdxTruncated { .. } | EmptyDataset | Io(_) => ExitCategory::Data,
        Diverged { .. } | TrainingDiverged { .. } | NonFiniteAdjoint { .. } | NonFinite { .. } => ExitCategory::Diverged,
        Checkpoint(_) => ExitCategory::Checkpoint,
        _ => ExitCategory::Other,
    }
}

/// The first recognised error in the cause chain decides the category.
pub fn classify(err: &anyhow::Error) -> ExitCategory {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return ExitCategory::Config;
        }
        if cause.is::<ReproductionMismatch>() {
            return ExitCategory::Mismatch;
        }
        if let Some(e) = cause.downcast_ref::<hopdeq::Error>() {
            return classify_core(e);
        }
        if cause.is::<std::io::Error>() || cause.is::<csv::Error>() {
            return ExitCategory::Data;
        }
    }
    ExitCategory::Other
}
