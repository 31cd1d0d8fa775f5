use thiserror::Error;

/// Error type shared by all numerical modules of the crate.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid diffusion time t = {0}: must be strictly positive")]
    NonPositiveTime(f64),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("region outside sampled grid: {0}")]
    RegionOutsideGrid(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("height y = {y} outside domain [-{y1}, {y1}]")]
    HeightOutsideDomain { y: f64, y1: f64 },

    #[error("depth s = {s} outside scan limits [{s_minus}, {s_plus}]")]
    DepthOutsideScanLimits { s: f64, s_minus: f64, s_plus: f64 },

    #[error("invalid phantom parameters: {0}")]
    InvalidPhantom(String),

    #[error("sigma property violated: {0}")]
    SigmaProperty(String),

    #[error("invalid linear system: {0}")]
    InvalidSystem(String),

    #[error("relaxation parameter omega = {0} outside (0, 2)")]
    InvalidRelaxation(f64),

    #[error("invalid stability experiment: {0}")]
    InvalidStability(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
