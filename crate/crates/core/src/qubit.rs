use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Number of qubits in the register (three data, two ancilla).
pub const NUM_QUBITS: usize = 5;

/// Hilbert-space dimension of the full register.
pub const DIM: usize = 1 << NUM_QUBITS;

/// One of the five physical qubits.
///
/// The discriminant is the tensor position: `D1` is the leftmost (most
/// significant) factor, so the basis label `|d1 d2 d3 at ab>` reads left to
/// right as a binary number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QubitId {
    D1 = 0,
    D2 = 1,
    D3 = 2,
    At = 3,
    Ab = 4,
}

impl QubitId {
    pub const ALL: [QubitId; NUM_QUBITS] = [Self::D1, Self::D2, Self::D3, Self::At, Self::Ab];
    pub const DATA: [QubitId; 3] = [Self::D1, Self::D2, Self::D3];
    pub const ANCILLAS: [QubitId; 2] = [Self::At, Self::Ab];

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    /// Bit mask of this qubit inside a basis-state index.
    #[inline]
    pub fn mask(self) -> usize {
        1 << (NUM_QUBITS - 1 - self.index())
    }

    pub fn is_data(self) -> bool {
        self.index() < 3
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::D1 => "D1",
            Self::D2 => "D2",
            Self::D3 => "D3",
            Self::At => "At",
            Self::Ab => "Ab",
        }
    }
}

impl fmt::Display for QubitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QubitId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|q| q.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown qubit `{s}`")))
    }
}

/// Basis-state index of `|d1 d2 d3 at ab>` given per-qubit bits.
pub fn basis_index(bits: [u8; NUM_QUBITS]) -> usize {
    bits.iter()
        .fold(0, |acc, &b| (acc << 1) | usize::from(b & 1))
}

/// Three data bits `(d1, d2, d3)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct DataBits(pub [u8; 3]);

impl DataBits {
    pub fn from_int(v: u8) -> Self {
        Self([(v >> 2) & 1, (v >> 1) & 1, v & 1])
    }

    pub fn to_int(self) -> u8 {
        (self.0[0] << 2) | (self.0[1] << 1) | self.0[2]
    }

    pub fn xor(self, other: DataBits) -> DataBits {
        Self::from_int(self.to_int() ^ other.to_int())
    }
}

impl fmt::Display for DataBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.0[0], self.0[1], self.0[2])
    }
}

impl FromStr for DataBits {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = s.as_bytes();
        if bytes.len() != 3 || !bytes.iter().all(|b| *b == b'0' || *b == b'1') {
            return Err(Error::Parse(format!(
                "expected three binary digits, got `{s}`"
            )));
        }
        Ok(Self([bytes[0] - b'0', bytes[1] - b'0', bytes[2] - b'0']))
    }
}
