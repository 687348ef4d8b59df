use thiserror::Error;

use crate::formulation::Stage;
use crate::model::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario ({count} violations), first: {first}")]
    InvalidScenario { first: Violation, count: usize },

    #[error("intraday session {session} needs settled stages: {detail}")]
    MissingStage { session: usize, detail: String },

    #[error("intraday session {session} does not exist (scenario has {sessions})")]
    UnknownSession { session: usize, sessions: usize },

    #[error("{stage} program is infeasible")]
    Infeasible { stage: Stage },

    #[error("{stage} solve failed: {source}")]
    Solver {
        stage: Stage,
        #[source]
        source: milp::SolverError,
    },

    #[error("demand {demand} has no profile {profile}")]
    UnknownProfile { demand: String, profile: String },

    #[error("unknown demand {0}")]
    UnknownDemand(String),

    #[error("{0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for failures caused by solver resource limits rather than by
    /// the instance.
    pub fn is_resource_limit(&self) -> bool {
        matches!(
            self,
            Error::Solver {
                source: milp::SolverError::NodeLimit { .. }
                    | milp::SolverError::IterationLimit(_)
                    | milp::SolverError::TooManyBinaries { .. },
                ..
            }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
