use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sample count must be even and at least 2, got {0}")]
    OddSampleCount(usize),

    #[error("generalized eigensolver did not converge for replicate {replicate} after {iterations} iterations")]
    NoConvergence { replicate: usize, iterations: usize },

    #[error("cannot form {k} clusters from {points} points")]
    TooFewPoints { k: usize, points: usize },

    #[error("degenerate rectangle [{x_min}, {x_max}] x [{y_min}, {y_max}]")]
    DegenerateRegion {
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
    },

    #[error("point ({re}, {im}) lies outside the grid bounds")]
    PointOutsideGrid { re: f64, im: f64 },

    #[error("stationary profile is not positive at radius {radius}")]
    NonPositiveProfile { radius: f64 },

    #[error("integrator failed at t = {t}: {reason}")]
    Integrator { t: f64, reason: String },

    #[error("estimator overflow at node ({h}, {k}) of replicate {replicate}")]
    EstimatorOverflow { replicate: usize, h: usize, k: usize },

    #[error("non-positive bandwidth inputs: EG = {eg}, Lnorm2 = {lnorm2}")]
    NonPositiveBandwidth { eg: f64, lnorm2: f64 },

    #[error("all points coincide; a kernel bandwidth cannot be estimated")]
    DegenerateSample,

    #[error("QR factorization failed for replicate {replicate} at node ({h}, {k})")]
    Factorization { replicate: usize, h: usize, k: usize },

    #[error("cluster {cluster}, replicate {replicate}: {source}")]
    Cluster {
        cluster: usize,
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub(crate) fn for_job(self, cluster: usize, replicate: usize) -> Error {
        Error::Cluster {
            cluster,
            replicate,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
