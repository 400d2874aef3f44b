//! Classical decoding engines: single-round syndrome mapping, multi-round
//! minimum-weight decoding compiled into lookup tables, majority vote and
//! Pauli-frame updates.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::qubit::{DataBits, QubitId};

/// Rounds a lookup table can hold.
pub const MAX_ROUNDS: usize = 8;

/// Widest input the majority engine accepts.
pub const MAX_MAJORITY_BITS: usize = 32;

/// Outcome pair of one stabilizer round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Syndrome {
    pub a_t: u8,
    pub a_b: u8,
}

impl Syndrome {
    pub fn new(a_t: u8, a_b: u8) -> Self {
        Self {
            a_t: a_t & 1,
            a_b: a_b & 1,
        }
    }

    fn bits(self) -> u8 {
        (self.a_t << 1) | self.a_b
    }
}

/// Stored ancilla outcomes of an `N`-round experiment.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SyndromeHistory {
    rounds: Vec<Syndrome>,
    reset_mode: bool,
}

impl SyndromeHistory {
    pub fn new(rounds: Vec<Syndrome>, reset_mode: bool) -> Result<Self> {
        check_rounds(rounds.len())?;
        Ok(Self { rounds, reset_mode })
    }

    /// Decodes a key built by [`SyndromeHistory::key`].
    pub fn from_key(key: usize, n_rounds: usize, reset_mode: bool) -> Result<Self> {
        check_rounds(n_rounds)?;
        let rounds = (0..n_rounds)
            .map(|r| {
                let shift = 2 * (n_rounds - 1 - r);
                Syndrome::new(((key >> (shift + 1)) & 1) as u8, ((key >> shift) & 1) as u8)
            })
            .collect();
        Ok(Self { rounds, reset_mode })
    }

    pub fn rounds(&self) -> &[Syndrome] {
        &self.rounds
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn reset_mode(&self) -> bool {
        self.reset_mode
    }

    /// Round-major key with `a_t` before `a_b`; the first round is most
    /// significant.
    pub fn key(&self) -> usize {
        self.rounds
            .iter()
            .fold(0, |acc, s| (acc << 2) | usize::from(s.bits()))
    }

    /// The key as a string of `2N` binary digits.
    pub fn key_string(&self) -> String {
        self.rounds
            .iter()
            .flat_map(|s| [s.a_t, s.a_b])
            .map(|b| char::from(b'0' + b))
            .collect()
    }
}

fn check_rounds(n: usize) -> Result<()> {
    if (1..=MAX_ROUNDS).contains(&n) {
        Ok(())
    } else {
        Err(Error::RoundsOutOfRange(n))
    }
}

/// X corrections on `(D1, D2, D3)`, encoded `c1*4 + c2*2 + c3`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Correction(u8);

impl Correction {
    pub const NONE: Correction = Correction(0);

    pub fn new(c1: u8, c2: u8, c3: u8) -> Self {
        Self(((c1 & 1) << 2) | ((c2 & 1) << 1) | (c3 & 1))
    }

    pub fn from_int(v: u8) -> Self {
        Self(v & 0b111)
    }

    pub fn to_int(self) -> u8 {
        self.0
    }

    pub fn bits(self) -> DataBits {
        DataBits::from_int(self.0)
    }

    pub fn is_none(self) -> bool {
        self.0 == 0
    }

    /// Register mask (see [`QubitId::mask`]) of the data qubits to flip.
    pub fn qubit_mask(self) -> usize {
        let bits = self.bits().0;
        QubitId::DATA
            .iter()
            .zip(bits)
            .filter(|(_, b)| *b == 1)
            .fold(0, |acc, (q, _)| acc | q.mask())
    }
}

impl fmt::Display for Correction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.bits().fmt(f)
    }
}

/// Relative weights of data flips and measurement errors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecoderWeights {
    w_data: f64,
    w_meas: f64,
}

impl DecoderWeights {
    pub fn new(w_data: f64, w_meas: f64) -> Result<Self> {
        let ok = |w: f64| w.is_finite() && w >= 0.0;
        if !ok(w_data) || !ok(w_meas) || (w_data == 0.0 && w_meas == 0.0) {
            return Err(Error::InvalidWeights);
        }
        Ok(Self { w_data, w_meas })
    }

    pub fn w_data(&self) -> f64 {
        self.w_data
    }

    pub fn w_meas(&self) -> f64 {
        self.w_meas
    }

    pub fn cost(&self, data_flips: u32, meas_errors: u32) -> f64 {
        self.w_data * f64::from(data_flips) + self.w_meas * f64::from(meas_errors)
    }
}

impl Default for DecoderWeights {
    fn default() -> Self {
        Self {
            w_data: 1.0,
            w_meas: 1.0,
        }
    }
}

/// A candidate explanation of a syndrome history.
///
/// `data_flips[n][i]` flips data qubit `i` just before round `n`'s parity
/// map; `meas_errors[n]` flips the stored `(a_t, a_b)` of round `n`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ErrorHypothesis {
    pub data_flips: Vec<[u8; 3]>,
    pub meas_errors: Vec<[u8; 2]>,
}

impl ErrorHypothesis {
    pub fn none(n_rounds: usize) -> Self {
        Self {
            data_flips: vec![[0; 3]; n_rounds],
            meas_errors: vec![[0; 2]; n_rounds],
        }
    }

    /// Net correction: parity of the flips on each data qubit.
    pub fn net_correction(&self) -> Correction {
        let mut c = [0u8; 3];
        for f in &self.data_flips {
            for i in 0..3 {
                c[i] ^= f[i] & 1;
            }
        }
        Correction::new(c[0], c[1], c[2])
    }

    pub fn cost(&self, w: &DecoderWeights) -> f64 {
        let data: u32 = self
            .data_flips
            .iter()
            .flatten()
            .map(|&b| u32::from(b))
            .sum();
        let meas: u32 = self
            .meas_errors
            .iter()
            .flatten()
            .map(|&b| u32::from(b))
            .sum();
        w.cost(data, meas)
    }
}

/// Forward model: the syndrome history a hypothesis would produce.
///
/// Without ancilla reset each stored outcome is the running XOR of all
/// parities mapped so far.
pub fn predicted_syndrome(h: &ErrorHypothesis, reset_mode: bool) -> SyndromeHistory {
    let mut frame = [0u8; 3];
    let mut accumulated = [0u8; 2];
    let rounds = h
        .data_flips
        .iter()
        .zip(&h.meas_errors)
        .map(|(flips, meas)| {
            for i in 0..3 {
                frame[i] ^= flips[i] & 1;
            }
            let parity = [frame[0] ^ frame[1], frame[1] ^ frame[2]];
            let shown = if reset_mode {
                parity
            } else {
                accumulated = [accumulated[0] ^ parity[0], accumulated[1] ^ parity[1]];
                accumulated
            };
            Syndrome::new(shown[0] ^ meas[0], shown[1] ^ meas[1])
        })
        .collect();
    SyndromeHistory { rounds, reset_mode }
}

/// Correction for a single round with reset: the syndrome names the one data
/// qubit touching exactly the flagged stabilizers.
pub fn single_round_correction(s: Syndrome) -> Correction {
    match (s.a_t, s.a_b) {
        (0, 0) => Correction::new(0, 0, 0),
        (1, 0) => Correction::new(1, 0, 0),
        (1, 1) => Correction::new(0, 1, 0),
        _ => Correction::new(0, 0, 1),
    }
}

/// Whether `(cost, correction)` beats the incumbent under the cost order with
/// ties going to the smaller correction encoding.
pub fn preferred(cost: f64, corr: Correction, best_cost: f64, best: Correction) -> bool {
    let tol = 1e-9 * best_cost.abs().max(1.0);
    if cost < best_cost - tol {
        true
    } else if cost <= best_cost + tol {
        corr < best
    } else {
        false
    }
}

const STATES: usize = 32;

/// Viterbi state: data frame in bits 4..2, running `a_t`/`a_b` parities in
/// bits 1..0 (always zero with reset).
#[inline]
fn state_index(frame: u8, acc: u8) -> usize {
    usize::from((frame << 2) | acc)
}

/// Minimum-weight decoding of a syndrome history.
///
/// Dynamic program over the 32 states of (data frame, accumulated parity),
/// choosing the data flips of each round; the measurement errors of a round
/// are then fixed by the observation. Returns the net correction of the
/// cheapest hypothesis, ties broken towards the smaller correction.
pub fn min_weight_decode(m: &SyndromeHistory, w: &DecoderWeights) -> Result<Correction> {
    check_rounds(m.len())?;
    let cost = m.rounds.iter().fold(initial_costs(), |cost, s| {
        advance(&cost, s.bits(), m.reset_mode, w)
    });
    Ok(cheapest(&cost))
}

type Costs = [f64; STATES];

fn initial_costs() -> Costs {
    let mut cost = [f64::INFINITY; STATES];
    cost[0] = 0.0;
    cost
}

/// One Viterbi step: every data-flip pattern out of every reachable state,
/// charging the readout errors needed to match `observed`.
fn advance(cost: &Costs, observed: u8, reset_mode: bool, w: &DecoderWeights) -> Costs {
    let mut next = [f64::INFINITY; STATES];
    for (state, &c) in cost.iter().enumerate() {
        if !c.is_finite() {
            continue;
        }
        let frame = (state >> 2) as u8;
        let acc = (state & 0b11) as u8;
        for flips in 0u8..8 {
            let x = frame ^ flips;
            let parity = (((x >> 2) ^ (x >> 1)) & 1) << 1 | (((x >> 1) ^ x) & 1);
            let shown = if reset_mode { parity } else { acc ^ parity };
            let next_acc = if reset_mode { 0 } else { shown };
            let errors = (observed ^ shown).count_ones();
            let total = c + w.cost(flips.count_ones(), errors);
            let slot = &mut next[state_index(x, next_acc)];
            if total < *slot {
                *slot = total;
            }
        }
    }
    next
}

fn cheapest(cost: &Costs) -> Correction {
    let mut best_cost = f64::INFINITY;
    let mut best = Correction(0b111);
    for (state, &c) in cost.iter().enumerate() {
        let corr = Correction((state >> 2) as u8);
        if c.is_finite() && preferred(c, corr, best_cost, best) {
            best_cost = c;
            best = corr;
        }
    }
    best
}

/// Precomputed decoder output for every `2N`-bit syndrome key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LookupTable {
    n_rounds: usize,
    reset_mode: bool,
    entries: Vec<Correction>,
}

impl LookupTable {
    /// Decodes every key, sharing the dynamic-program prefix between keys
    /// with common leading rounds.
    pub fn build(n_rounds: usize, reset_mode: bool, w: &DecoderWeights) -> Result<Self> {
        check_rounds(n_rounds)?;
        let mut entries = vec![Correction::NONE; 1 << (2 * n_rounds)];
        fill(&mut entries, 0, n_rounds, &initial_costs(), reset_mode, w);
        Ok(Self {
            n_rounds,
            reset_mode,
            entries,
        })
    }

    pub fn n_rounds(&self) -> usize {
        self.n_rounds
    }

    pub fn reset_mode(&self) -> bool {
        self.reset_mode
    }

    pub fn entries(&self) -> &[Correction] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Looks up a history; it must match the table's round count.
    pub fn decode(&self, m: &SyndromeHistory) -> Result<Correction> {
        if m.len() != self.n_rounds {
            return Err(Error::RoundsOutOfRange(m.len()));
        }
        Ok(self.entries[m.key()])
    }

    /// One line per key, ascending: `<2N-bit key> <3-bit correction>`.
    pub fn dump<W: Write>(&self, mut out: W) -> io::Result<()> {
        let width = 2 * self.n_rounds;
        for (key, c) in self.entries.iter().enumerate() {
            writeln!(out, "{key:0width$b} {c}")?;
        }
        Ok(())
    }
}

fn fill(
    entries: &mut [Correction],
    prefix: usize,
    remaining: usize,
    cost: &Costs,
    reset_mode: bool,
    w: &DecoderWeights,
) {
    if remaining == 0 {
        entries[prefix] = cheapest(cost);
        return;
    }
    for observed in 0u8..4 {
        let next = advance(cost, observed, reset_mode, w);
        fill(
            entries,
            (prefix << 2) | usize::from(observed),
            remaining - 1,
            &next,
            reset_mode,
            w,
        );
    }
}

/// Strict majority: 1 iff more than half the bits are set.
pub fn majority(bits: &[u8]) -> Result<u8> {
    if bits.is_empty() || bits.len() > MAX_MAJORITY_BITS {
        return Err(Error::MajorityWidth(bits.len()));
    }
    let ones = bits.iter().filter(|&&b| b & 1 == 1).count();
    Ok(u8::from(2 * ones > bits.len()))
}

/// Applies a correction classically to measured data bits.
pub fn pauli_frame_update(data: DataBits, c: Correction) -> DataBits {
    data.xor(c.bits())
}

/// One parsed line of a syndrome stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StreamRecord {
    pub history: SyndromeHistory,
    pub data: Option<DataBits>,
}

impl FromStr for StreamRecord {
    type Err = Error;

    /// Whitespace inside a line is ignored. An even digit count is a pure
    /// syndrome key; an odd count carries three trailing data bits.
    fn from_str(line: &str) -> Result<Self> {
        parse_stream_line(line, false)
    }
}

/// Parses `2N` syndrome digits, optionally followed by three data bits.
pub fn parse_stream_line(line: &str, reset_mode: bool) -> Result<StreamRecord> {
    let digits: Vec<u8> = line
        .chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(Error::Parse(format!("unexpected character `{other}`"))),
        })
        .collect::<Result<_>>()?;
    let (syndrome, data) = if digits.len() % 2 == 1 {
        if digits.len() < 5 {
            return Err(Error::Parse(format!(
                "{} digits is too short for syndromes plus three data bits",
                digits.len()
            )));
        }
        let split = digits.len() - 3;
        let d = &digits[split..];
        (&digits[..split], Some(DataBits([d[0], d[1], d[2]])))
    } else {
        (&digits[..], None)
    };
    let rounds = syndrome
        .chunks(2)
        .map(|p| Syndrome::new(p[0], p[1]))
        .collect();
    Ok(StreamRecord {
        history: SyndromeHistory::new(rounds, reset_mode)?,
        data,
    })
}
