use alloc::string::String;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A state or matrix violates its structural invariants.
    #[error("invalid state: {0}")]
    InvalidState(String),
    /// An argument lies outside the domain of the operation.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// `d * F <= 1`: no number of local sensors gives an advantage.
    #[error("no quantum advantage possible: d*F = {0} <= 1")]
    NoAdvantagePossible(f64),
    #[error("node index {index} out of range for {num_nodes} nodes")]
    IndexOutOfRange { index: usize, num_nodes: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("layout mismatch: expected {expected} qubits, found {found}")]
    LayoutMismatch { expected: usize, found: usize },
    /// The requested circuit needs more qubits than the dense kernel holds.
    #[error("{qubits} qubits exceed the density-matrix kernel cap of {cap}")]
    UnsupportedScale { qubits: usize, cap: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! precondition {
    ($($arg:tt)*) => {
        $crate::Error::Precondition(alloc::format!($($arg)*))
    };
}

macro_rules! invalid_state {
    ($($arg:tt)*) => {
        $crate::Error::InvalidState(alloc::format!($($arg)*))
    };
}

pub(crate) use invalid_state;
pub(crate) use precondition;
