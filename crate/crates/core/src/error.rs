use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("characteristic {0} is not an odd prime")]
    BadCharacteristic(u64),
    #[error("field size {0} exceeds the table limit {1}")]
    FieldTooLarge(u64, u64),
    #[error("modulus has degree {got}, expected {want}")]
    WrongDegree { got: usize, want: usize },
    #[error("modulus is reducible over F_{0}")]
    ReducibleModulus(u64),
    #[error("modulus is irreducible but x is not a multiplicative generator")]
    NotPrimitive,
    #[error("no valid eta exists in a field of order {0}; need q^n >= 5")]
    InfeasibleField(u64),
    #[error("q = {q} lies outside the feasible range for n = {n}; the search is vacuous there")]
    OutOfBounds { q: u64, n: u32 },
    #[error("group element parameters are singular (ad - bc = 0)")]
    SingularParameters,
    #[error("stabilizer size {got} does not match the expected {want}")]
    StabilizerSize { got: usize, want: usize },
    #[error("scan size guard tripped: {0}")]
    SizeGuard(String),
    #[error("search invariant violated: {0}")]
    SearchInvariant(String),
    #[error("cache file is invalid: {0}")]
    BadCache(String),
    #[error("witness verification failed: {0}")]
    BadWitness(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
