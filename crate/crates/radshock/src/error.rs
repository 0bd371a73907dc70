//! Top-level error for batch runs and its exit-code mapping.

use std::path::PathBuf;

use thiserror::Error;

use crate::evolution::EvolutionError;
use crate::flux::FluxError;
use crate::profile::ProfileError;
use crate::regularity::RegularityError;
use crate::shock::ShockError;
use crate::system::SystemError;

/// Failure classes with their process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    Config = 2,
    Admissibility = 3,
    Numerical = 4,
}

#[derive(Debug, Error)]
pub enum Cause {
    #[error(transparent)]
    Flux(#[from] FluxError),
    #[error(transparent)]
    Shock(#[from] ShockError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Regularity(#[from] RegularityError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("{module}::{operation}: {cause}")]
    Operation {
        module: &'static str,
        operation: &'static str,
        cause: Cause,
    },
    /// A post-condition on computed output, such as the residual of a jump.
    #[error("check `{check}` failed: {detail}")]
    Check {
        check: &'static str,
        detail: String,
        failure: Failure,
    },
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl Error {
    pub fn op(module: &'static str, operation: &'static str) -> impl FnOnce(Cause) -> Error {
        move |cause| Error::Operation {
            module,
            operation,
            cause,
        }
    }

    pub fn failure(&self) -> Failure {
        match self {
            Error::Config(_) | Error::Io { .. } => Failure::Config,
            Error::Check { failure, .. } => *failure,
            Error::Operation { cause, .. } => cause.failure(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.failure() as i32
    }
}

impl Cause {
    pub fn failure(&self) -> Failure {
        match self {
            Cause::Flux(_) => Failure::Config,
            Cause::Shock(e) => shock_failure(e),
            Cause::Profile(e) => profile_failure(e),
            Cause::Regularity(e) => match e {
                RegularityError::Shock(s) => shock_failure(s),
                RegularityError::NotConvex(_) | RegularityError::AboveThreshold { .. } => Failure::Admissibility,
                RegularityError::OrderTooHigh(_) | RegularityError::InvalidRadiation(_) => Failure::Config,
                RegularityError::NotDifferentiable(_) => Failure::Config,
            },
            Cause::System(e) => system_failure(e),
            Cause::Evolution(e) => match e {
                EvolutionError::Grid(_) | EvolutionError::DomainTooSmall { .. } => Failure::Config,
                EvolutionError::InvalidEpsilon(_) | EvolutionError::Dimension { .. } => Failure::Config,
                EvolutionError::Profile(p) => profile_failure(p),
                EvolutionError::System(s) => system_failure(s),
                EvolutionError::Cfl { .. } | EvolutionError::NonFinite { .. } | EvolutionError::WaveExited { .. } => {
                    Failure::Numerical
                }
            },
        }
    }
}

fn shock_failure(e: &ShockError) -> Failure {
    match e {
        ShockError::NotScalar(_) | ShockError::BadBranch { .. } => Failure::Config,
        ShockError::NonFinite(_) | ShockError::OutsideBranch { .. } => Failure::Numerical,
        _ => Failure::Admissibility,
    }
}

fn profile_failure(e: &ProfileError) -> Failure {
    match e {
        ProfileError::Shock(s) => shock_failure(s),
        ProfileError::InvalidEpsilon(_) => Failure::Config,
        ProfileError::EpsilonTooLarge { .. } | ProfileError::NoProfileAtEpsilon { .. } => Failure::Admissibility,
        _ => Failure::Numerical,
    }
}

fn system_failure(e: &SystemError) -> Failure {
    match e {
        SystemError::Dimension { .. }
        | SystemError::ZeroVector(_)
        | SystemError::InvalidR(_)
        | SystemError::BadFamily { .. }
        | SystemError::InvalidComplement => Failure::Config,
        SystemError::NotStrictlyHyperbolic { .. }
        | SystemError::MainAssumption { .. }
        | SystemError::CoincidentStates
        | SystemError::RankineHugoniot { .. }
        | SystemError::DegenerateCoupling => Failure::Admissibility,
        SystemError::Shock(s) => shock_failure(s),
        SystemError::Profile(p) => profile_failure(p),
        _ => Failure::Numerical,
    }
}
