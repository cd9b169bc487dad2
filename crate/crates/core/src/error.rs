use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QcavError {
    #[error("cutoff too small: discarded tail probability {tail:e} at cutoff {cutoff} (need < 1e-12)")]
    CutoffTooSmall { cutoff: usize, tail: f64 },

    #[error("fock:{n} exceeds cutoff {cutoff}")]
    FockAboveCutoff { n: usize, cutoff: usize },

    #[error("cat amplitude must be nonzero")]
    DegenerateCat,

    #[error("invalid state spec '{0}'")]
    StateSpecParse(String),

    #[error("invalid grid spec '{0}'")]
    GridSpecParse(String),

    #[error("amplitudes are not normalized: norm^2 = {0}")]
    NotNormalized(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("phase undefined at mu=0")]
    PhaseUndefined,

    #[error("convolution domain too small around alpha = {re}{im:+}i")]
    ConvolutionDomainTooSmall { re: f64, im: f64 },

    #[error("grid spacing {0} exceeds 0.1")]
    GridTooCoarse(f64),

    #[error("time step {dt} violates stability guard; use dt <= {max_dt:e}")]
    UnstableStep { dt: f64, max_dt: f64 },

    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("no coupling: lambda = 0")]
    NoCoupling,

    #[error("jump series not converged at n = {n}: term norm {norm:e}")]
    SeriesNotConverged { n: usize, norm: f64 },

    #[error("evaluation failed at ({re}, {im}): {source}")]
    AtPoint {
        re: f64,
        im: f64,
        #[source]
        source: Box<QcavError>,
    },
}

pub type Result<T> = std::result::Result<T, QcavError>;
