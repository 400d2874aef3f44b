use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("operator is not unitary (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("duplicate qubit {0} in operator support")]
    DuplicateSupport(crate::QubitId),

    #[error("operator dimension {actual} does not match support of {qubits} qubit(s)")]
    DimensionMismatch { actual: usize, qubits: usize },

    #[error("Kraus operators are not trace preserving (deviation {deviation:.3e})")]
    NotTracePreserving { deviation: f64 },

    #[error("unphysical coherence times: T2 = {t2} exceeds 2*T1 with T1 = {t1}")]
    UnphysicalCoherence { t1: f64, t2: f64 },

    #[error("invalid duration {0}")]
    InvalidDuration(f64),

    #[error("projection onto {qubit} = {outcome} has probability {probability:.3e}")]
    DegenerateProjection {
        qubit: crate::QubitId,
        outcome: u8,
        probability: f64,
    },

    #[error("{0} and {1} are not a connected data-ancilla pair")]
    Disconnected(crate::QubitId, crate::QubitId),

    #[error("number of rounds {0} outside 1..=8 (the lookup table supports up to eight cycles)")]
    RoundsOutOfRange(usize),

    #[error("majority input of {0} bits outside 1..=32")]
    MajorityWidth(usize),

    #[error("decoder weights must be nonnegative and not both zero")]
    InvalidWeights,

    #[error("invalid config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("{0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
