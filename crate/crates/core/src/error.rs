use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("modulus must be at least 2, got {0}")]
    InvalidModulus(u64),
    #[error("modulus {n} is too large (limit {limit})")]
    ModulusTooLarge { n: u64, limit: u64 },
    #[error("{m} and {n} are not coprime")]
    NotCoprime { m: u64, n: u64 },
    #[error("{0} is not a prime power")]
    NotPrimePower(u32),
    #[error("{d} does not divide {n}")]
    NotADivisor { d: u32, n: u32 },
    #[error("arity must be at least 1")]
    ZeroArity,
    #[error("projection index {index} out of range for arity {arity}")]
    IndexOutOfRange { index: u32, arity: u32 },
    #[error("element {value} out of range for Z_{modulus}")]
    ElementOutOfRange { value: u64, modulus: u32 },
    #[error("arity mismatch: expected {expected}, found {found}")]
    ArityMismatch { expected: u32, found: u32 },
    #[error("modulus mismatch: expected {expected}, found {found}")]
    ModulusMismatch { expected: u32, found: u32 },
    #[error("table length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("a table of {entries} entries exceeds the limit of {limit}")]
    TableTooLarge { entries: u128, limit: usize },
    #[error("malformed packed key: {0}")]
    MalformedKey(&'static str),
    #[error("operation does not preserve M")]
    DoesNotPreserveM,
    #[error("operation is not compatible")]
    NotCompatible,
    #[error("budget exceeded: {needed} members needed, budget is {budget}")]
    BudgetExceeded { needed: String, budget: usize },
    #[error("closure incomplete: {0}")]
    Incomplete(String),
    #[error("closed-form indicator disagrees with the definition at index {index}")]
    IndicatorMismatch { index: usize },
    #[error("unknown clone name `{0}`")]
    UnknownName(String),
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
}
