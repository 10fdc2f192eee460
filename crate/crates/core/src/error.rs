use thiserror::Error;

/// Errors surfaced by the library.
///
/// `Validation` covers parameter-set invariants, `Domain` covers per-call
/// argument domains (negative investment, price at or below zero, evaluation
/// at a singular point), `Solver` covers shooting/bisection failures and
/// `Eval` covers inconsistent inputs to the Monte Carlo layer.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    Validation(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("evaluation error: {0}")]
    Eval(String),
}

pub type Result<T> = std::result::Result<T, Error>;
