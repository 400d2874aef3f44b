//! Simulation and decoding toolkit for the three-qubit bit-flip code with two
//! parity ancillas.

pub mod config;
pub mod decoder;
pub mod device;
pub mod error;
pub mod latency;
pub mod ops;
pub mod protocol;
pub mod qubit;
pub mod rng;
pub mod state;

pub use error::{Error, Result};
pub use ops::{damping_channel, KrausChannel, UnitaryOp, C64};
pub use qubit::{DataBits, QubitId};
pub use rng::TrajectoryRng;
pub use state::DensityMatrix;
