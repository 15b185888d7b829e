use alloc::string::String;
use alloc::vec::Vec;

/// Everything that can go wrong while evaluating geometry on a coordinate box.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    #[error("point {point:?} lies outside the metric domain")]
    OutOfDomain { point: Vec<f64> },
    #[error("curve left the domain at parameter {lambda}")]
    Boundary { lambda: f64 },
    #[error("invalid time function: {0}")]
    InvalidTimeFunction(String),
    #[error("unsupported metric: {0}")]
    UnsupportedMetric(String),
    #[error("no convergence after {iterations} iterations (best residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("target at framed distance {distance} exceeds normal radius {radius}")]
    OutOfRadius { distance: f64, radius: f64 },
    #[error("radius error: {0}")]
    Radius(String),
    #[error("degenerate frame: {0}")]
    DegenerateFrame(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("lattice resolution error: {0}")]
    Resolution(String),
    #[error("target unreachable at every refinement level")]
    Unreachable,
    #[error("pair outside the convex-neighbourhood regime: {0}")]
    OutOfRegime(String),
    #[error("bound `{bound}` degenerate: {source}")]
    Bound {
        bound: &'static str,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn out_of_domain<const D: usize>(p: &crate::linalg::Point<D>) -> Self {
        Error::OutOfDomain {
            point: p.iter().copied().collect(),
        }
    }

    pub(crate) fn bound(bound: &'static str, source: Error) -> Self {
        Error::Bound {
            bound,
            source: alloc::boxed::Box::new(source),
        }
    }
}
