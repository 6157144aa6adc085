use thiserror::Error;

/// Errors raised by the emulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is not a probability in [0, 1]")]
    InvalidProbability { name: &'static str, value: f64 },

    #[error("enumeration over 2^{length} realizations exceeds the cap of 2^{cap}")]
    EnumerationTooLarge { length: usize, cap: usize },

    #[error("realization has length {actual}, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("index {index} out of range for length {length}")]
    IndexOutOfRange { index: usize, length: usize },

    #[error("{n} qubits exceeds the supported maximum of {max}")]
    TooManyQubits { n: usize, max: usize },

    #[error("qubit {qubit} out of range for a {n}-qubit register")]
    QubitOutOfRange { qubit: usize, n: usize },

    #[error("gate targets must be distinct, got {0:?}")]
    RepeatedTarget(Vec<usize>),

    #[error("fluctuator {0} is already attached")]
    DuplicateFluctuator(u32),

    #[error("fluctuator {0} is not attached")]
    UnknownFluctuator(u32),

    #[error("matrix is not column-stochastic: {0:?}")]
    NotStochastic([[f64; 2]; 2]),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("expectation value has imaginary residue {0:e}")]
    ComplexExpectation(f64),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("the SWAP-network brickwork requires an even qubit count, got {0}")]
    OddQubitCount(usize),

    #[error("invalid permutation: {0:?}")]
    InvalidPermutation(Vec<usize>),

    #[error("parameter vectors must have length {expected}, got {actual}")]
    ParamLength { expected: usize, actual: usize },

    #[error("slot (qubit {qubit}, time {time}) is not in the noise grid")]
    SlotOutsideGrid { qubit: usize, time: usize },

    #[error("the global optimum is zero, approximation ratio undefined")]
    ZeroOptimum,

    #[error("finite-difference step {0} outside (0, 1e-3]")]
    InvalidStep(f64),

    #[error("generator cycle index {k} outside 1..={r}")]
    InvalidGenerator { k: usize, r: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    /// True for errors caused by bad input rather than by a failed computation.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::NotStochastic(_) | Error::ComplexExpectation(_) | Error::Io { .. } | Error::UnknownFluctuator(_) | Error::DuplicateFluctuator(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::InvalidProbability { name, value })
    }
}
