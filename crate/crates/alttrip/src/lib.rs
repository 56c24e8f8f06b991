//! `alttrip` command line tool and HTTP service.

pub mod cli;
pub mod constraints_file;
pub mod server;

use alttrip_core::bundle::BundleError;
use alttrip_core::dataset::DatasetError;
use alttrip_core::eval::EvalError;
use alttrip_core::itrnet::ItrError;
use alttrip_core::planner::PlanError;
use alttrip_core::poigraph::GraphError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Divergence(String),
    #[error("{0}")]
    Other(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => 2,
            AppError::Data(_) => 3,
            AppError::Divergence(_) => 4,
            AppError::Other(_) => 1,
        }
    }
}

impl From<DatasetError> for AppError {
    fn from(e: DatasetError) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<GraphError> for AppError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::NonFiniteLoss(_) => AppError::Divergence(e.to_string()),
            GraphError::InvalidConfig(_) => AppError::Usage(e.to_string()),
            _ => AppError::Data(e.to_string()),
        }
    }
}

impl From<ItrError> for AppError {
    fn from(e: ItrError) -> Self {
        match e {
            ItrError::NonFiniteLoss(_) => AppError::Divergence(e.to_string()),
            ItrError::InvalidConfig(_) => AppError::Usage(e.to_string()),
            _ => AppError::Data(e.to_string()),
        }
    }
}

impl From<BundleError> for AppError {
    fn from(e: BundleError) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<PlanError> for AppError {
    fn from(e: PlanError) -> Self {
        match e {
            PlanError::InvalidQuery(_) | PlanError::InvalidId(_) | PlanError::ConstraintUnsupported => {
                AppError::Usage(e.to_string())
            }
            _ => AppError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for AppError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Training { ref message, .. } if message.contains("diverged") => {
                AppError::Divergence(e.to_string())
            }
            EvalError::InvalidFold(_) => AppError::Usage(e.to_string()),
            _ => AppError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Other(e.to_string())
    }
}
