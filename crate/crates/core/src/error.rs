use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("series did not converge after {iterations} terms (y = {y}, nu = {nu})")]
    SeriesNonConvergence { iterations: usize, y: f64, nu: f64 },

    #[error("maximized likelihood of family `{family}` is not integrable over the statistic space (tail {tail_low:.3e} at t = {t_low}, {tail_high:.3e} at t = {t_high})")]
    NonIntegrable {
        family: String,
        t_low: f64,
        tail_low: f64,
        t_high: f64,
        tail_high: f64,
    },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("input error: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
