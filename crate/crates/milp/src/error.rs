use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("malformed model: {0}")]
    Malformed(String),
    #[error("numerical instability: pivot magnitude {0:e} below tolerance floor")]
    NumericalInstability(f64),
    #[error("singular basis encountered during refactorization")]
    SingularBasis,
    #[error("simplex iteration limit ({0}) reached")]
    IterationLimit(usize),
    #[error("warm-start basis has {got} entries, expected {expected}")]
    BasisShape { expected: usize, got: usize },
}
