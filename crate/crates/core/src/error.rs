use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("Newton iteration did not reach tolerance at t = {t} (dt = {dt}, residual {residual:e})")]
    NewtonDiverged { t: f64, dt: f64, residual: f64 },

    #[error("time step fell below the minimum at t = {t} (dt = {dt:e})")]
    StepTooSmall { t: f64, dt: f64 },

    #[error("projected relaxation did not converge after {sweeps} sweeps (last update {update:e})")]
    NotConverged { sweeps: usize, update: f64 },

    #[error("explicit curl stepping blew up at t = {t}: max |curl H| = {max_curl}")]
    BlowUp { t: f64, max_curl: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
}
