use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistillError {
    #[error("invalid input: {0}")]
    Domain(String),

    #[error("groups {first} and {second} have different inverse temperatures ({beta_first} vs {beta_second})")]
    MixedBeta {
        first: usize,
        second: usize,
        beta_first: f64,
        beta_second: f64,
    },

    #[error(
        "atom budget exceeded: {required} classes needed, budget is {budget}; \
         use the asymptotic formulas or the Berry-Esseen bound instead"
    )]
    AtomBudget { required: f64, budget: usize },

    #[error("degenerate fluctuations: {0}")]
    ZeroFluctuation(String),

    #[error("spectrum is not flagged incommensurable (or has near-rational gap ratios); exact pure-state path unavailable")]
    Commensurable,

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, DistillError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(DistillError::Domain(msg.into()))
}
