use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{function} is undefined at {value}")]
    Domain { function: &'static str, value: f64 },

    #[error("empty input to {0}")]
    EmptyInput(&'static str),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    /// Every category of a responsibility row has zero unnormalized mass.
    #[error("degenerate responsibility row at site {site}: every category is impossible")]
    DegenerateRow { site: usize },

    #[error("objective became non-finite ({value}) at sweep {sweep}")]
    NonFiniteObjective { sweep: usize, value: f64 },

    /// A product distribution charges a category whose base measure is zero.
    #[error("site {site} places mass on category {category} outside the base measure support")]
    SupportMismatch { site: usize, category: usize },

    #[error("state space of {size:e} assignments exceeds the enumeration cap {cap:e}")]
    StateSpaceTooLarge { size: f64, cap: f64 },

    #[error("every assignment has zero posterior weight")]
    AllImpossible,
}
