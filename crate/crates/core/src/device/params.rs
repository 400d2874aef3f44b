use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::check_coherence;
use crate::qubit::{QubitId, NUM_QUBITS};

/// A resonator-connected pair carrying static ZZ crosstalk.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CouplingPair {
    AtD1,
    AtD2,
    AbD2,
    AbD3,
    D1D2,
    D2D3,
}

impl CouplingPair {
    pub const ALL: [CouplingPair; 6] = [
        Self::AtD1,
        Self::AtD2,
        Self::AbD2,
        Self::AbD3,
        Self::D1D2,
        Self::D2D3,
    ];

    pub fn qubits(self) -> (QubitId, QubitId) {
        use QubitId::*;
        match self {
            Self::AtD1 => (At, D1),
            Self::AtD2 => (At, D2),
            Self::AbD2 => (Ab, D2),
            Self::AbD3 => (Ab, D3),
            Self::D1D2 => (D1, D2),
            Self::D2D3 => (D2, D3),
        }
    }

    pub fn contains(self, q: QubitId) -> bool {
        let (a, b) = self.qubits();
        a == q || b == q
    }

    pub fn key(self) -> &'static str {
        match self {
            Self::AtD1 => "At-D1",
            Self::AtD2 => "At-D2",
            Self::AbD2 => "Ab-D2",
            Self::AbD3 => "Ab-D3",
            Self::D1D2 => "D1-D2",
            Self::D2D3 => "D2-D3",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// A data-ancilla pair joined by a cross-resonance CNOT (data is control).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CrPair {
    D1At,
    D2At,
    D2Ab,
    D3Ab,
}

impl CrPair {
    pub const ALL: [CrPair; 4] = [Self::D1At, Self::D2At, Self::D2Ab, Self::D3Ab];

    pub fn new(data: QubitId, ancilla: QubitId) -> Result<Self> {
        use QubitId::*;
        match (data, ancilla) {
            (D1, At) => Ok(Self::D1At),
            (D2, At) => Ok(Self::D2At),
            (D2, Ab) => Ok(Self::D2Ab),
            (D3, Ab) => Ok(Self::D3Ab),
            _ => Err(Error::Disconnected(data, ancilla)),
        }
    }

    pub fn data(self) -> QubitId {
        match self {
            Self::D1At => QubitId::D1,
            Self::D2At | Self::D2Ab => QubitId::D2,
            Self::D3Ab => QubitId::D3,
        }
    }

    pub fn ancilla(self) -> QubitId {
        match self {
            Self::D1At | Self::D2At => QubitId::At,
            Self::D2Ab | Self::D3Ab => QubitId::Ab,
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Self::D1At => "D1-At",
            Self::D2At => "D2-At",
            Self::D2Ab => "D2-Ab",
            Self::D3Ab => "D3-Ab",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Per-qubit characterization. Coherence times in microseconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitParams {
    /// Transition frequency in GHz; informational only.
    pub f01: f64,
    pub t1: f64,
    pub t2: f64,
    /// Readout assignment error averaged over both states.
    pub readout_error: f64,
    /// Probability of a physical flip caused by measuring the qubit.
    pub backaction: f64,
    pub gate_error_1q: f64,
}

/// CNOT gate length in ns and ZX over-rotation in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateParams {
    pub duration: f64,
    pub overrotation: f64,
}

/// All physical inputs of the noise model.
///
/// Durations are in ns, coherence times in µs and ZZ couplings in kHz, the
/// units of the parameter file.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviceParams {
    pub qubits: [QubitParams; NUM_QUBITS],
    zz_coupling: [f64; 6],
    gates: [GateParams; 4],
    ancilla_flip: [f64; 2],
    pub t_1q: f64,
    pub t_m: f64,
    pub t_depl: f64,
    pub lag_rec: f64,
}

/// Two-qubit randomized-benchmarking errors of the device, keyed like
/// [`CrPair::ALL`].
pub const TABLE_S1_EPS_2Q: [f64; 4] = [0.07, 0.075, 0.07, 0.035];

pub const DEFAULT_GATE_DURATION_NS: f64 = 400.0;
pub const DEFAULT_T_1Q_NS: f64 = 40.0;
pub const DEFAULT_T_M_NS: f64 = 500.0;
pub const DEFAULT_T_DEPL_NS: f64 = 600.0;
/// Processor aggregation plus forwarding (400 ns) and correction with reset
/// (160 ns).
pub const DEFAULT_LAG_REC_NS: f64 = 560.0;

/// Over-rotation attributed entirely to a two-qubit gate error `eps`, from
/// `eps ~ beta^2 / 4`.
pub fn overrotation_from_error(eps: f64) -> f64 {
    2.0 * eps.sqrt()
}

impl DeviceParams {
    /// The characterized device with placeholder timings.
    pub fn table_s1() -> Self {
        let q = |f01, t2, t1, readout_error, gate_error_1q| QubitParams {
            f01,
            t1,
            t2,
            readout_error,
            backaction: 0.0,
            gate_error_1q,
        };
        let qubits = [
            q(5.412, 12.0, 29.0, 0.25, 0.0015),
            q(5.220, 10.0, 7.7, 0.13, 0.01),
            q(5.408, 38.0, 42.0, 0.22, 0.001),
            q(5.313, 26.0, 48.0, 0.075, 0.003),
            q(5.362, 39.0, 49.0, 0.135, 0.004),
        ];
        let gates = TABLE_S1_EPS_2Q.map(|eps| GateParams {
            duration: DEFAULT_GATE_DURATION_NS,
            overrotation: overrotation_from_error(eps),
        });
        let e = TABLE_S1_EPS_2Q;
        Self {
            qubits,
            zz_coupling: [30.0, 25.0, 8.0, 35.0, 32.0, 72.0],
            gates,
            ancilla_flip: [e[0] + e[1], e[2] + e[3]],
            t_1q: DEFAULT_T_1Q_NS,
            t_m: DEFAULT_T_M_NS,
            t_depl: DEFAULT_T_DEPL_NS,
            lag_rec: DEFAULT_LAG_REC_NS,
        }
    }

    /// Table timings with every noise source switched off.
    pub fn noiseless() -> Self {
        let mut p = Self::table_s1();
        for q in &mut p.qubits {
            q.t1 = f64::INFINITY;
            q.t2 = f64::INFINITY;
            q.readout_error = 0.0;
            q.backaction = 0.0;
            q.gate_error_1q = 0.0;
        }
        p.zz_coupling = [0.0; 6];
        for g in &mut p.gates {
            g.overrotation = 0.0;
        }
        p.ancilla_flip = [0.0; 2];
        p
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "table-s1" => Some(Self::table_s1()),
            "noiseless" => Some(Self::noiseless()),
            _ => None,
        }
    }

    pub fn qubit(&self, q: QubitId) -> &QubitParams {
        &self.qubits[q.index()]
    }

    pub fn qubit_mut(&mut self, q: QubitId) -> &mut QubitParams {
        &mut self.qubits[q.index()]
    }

    pub fn zz_khz(&self, pair: CouplingPair) -> f64 {
        self.zz_coupling[pair.index()]
    }

    pub fn set_zz_khz(&mut self, pair: CouplingPair, khz: f64) {
        self.zz_coupling[pair.index()] = khz;
    }

    pub fn gate(&self, pair: CrPair) -> &GateParams {
        &self.gates[pair.index()]
    }

    pub fn gate_mut(&mut self, pair: CrPair) -> &mut GateParams {
        &mut self.gates[pair.index()]
    }

    /// Probability that ancilla `a` flips during the entangling block.
    pub fn ancilla_flip(&self, a: QubitId) -> f64 {
        match a {
            QubitId::At => self.ancilla_flip[0],
            QubitId::Ab => self.ancilla_flip[1],
            _ => 0.0,
        }
    }

    pub fn set_ancilla_flip(&mut self, a: QubitId, p: f64) {
        match a {
            QubitId::At => self.ancilla_flip[0] = p,
            QubitId::Ab => self.ancilla_flip[1] = p,
            _ => panic!("{a} is not an ancilla"),
        }
    }

    /// Length of the first simultaneous CNOT pair (D2-At with D3-Ab).
    pub fn tau1(&self) -> f64 {
        self.gate(CrPair::D2At)
            .duration
            .max(self.gate(CrPair::D3Ab).duration)
    }

    /// Length of the second simultaneous CNOT pair (D1-At with D2-Ab).
    pub fn tau2(&self) -> f64 {
        self.gate(CrPair::D1At)
            .duration
            .max(self.gate(CrPair::D2Ab).duration)
    }

    /// Entangling block, ancilla readout and cavity depletion.
    pub fn cycle_duration(&self) -> f64 {
        self.tau1() + self.tau2() + self.t_m + self.t_depl
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: String, reason: String| Err(Error::Config { key, reason });
        for q in QubitId::ALL {
            let p = self.qubit(q);
            let key = |field: &str| format!("device.qubits.{q}.{field}");
            if check_coherence(p.t1, p.t2).is_err() {
                return bad(
                    key("t2"),
                    format!("need 0 < t2 <= 2*t1, got t1 = {}, t2 = {}", p.t1, p.t2),
                );
            }
            for (field, v) in [
                ("readout_error", p.readout_error),
                ("backaction", p.backaction),
                ("gate_error_1q", p.gate_error_1q),
            ] {
                if !(0.0..=1.0).contains(&v) {
                    return bad(key(field), format!("probability {v} outside [0, 1]"));
                }
            }
        }
        for pair in CouplingPair::ALL {
            if !self.zz_khz(pair).is_finite() {
                return bad(
                    format!("device.zz_coupling.{}", pair.key()),
                    "must be finite".into(),
                );
            }
        }
        for pair in CrPair::ALL {
            let g = self.gate(pair);
            if !(g.duration >= 0.0 && g.duration.is_finite()) {
                return bad(
                    format!("device.gates.{}.duration", pair.key()),
                    format!("duration {} must be finite and >= 0", g.duration),
                );
            }
            if !g.overrotation.is_finite() {
                return bad(
                    format!("device.gates.{}.overrotation", pair.key()),
                    "must be finite".into(),
                );
            }
        }
        for a in QubitId::ANCILLAS {
            let v = self.ancilla_flip(a);
            if !(0.0..=1.0).contains(&v) {
                return bad(
                    format!("device.ancilla_flip.{a}"),
                    format!("probability {v} outside [0, 1]"),
                );
            }
        }
        for (field, v) in [
            ("t_1q", self.t_1q),
            ("t_m", self.t_m),
            ("t_depl", self.t_depl),
            ("lag_rec", self.lag_rec),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(
                    format!("device.{field}"),
                    format!("duration {v} must be finite and >= 0"),
                );
            }
        }
        Ok(())
    }

    pub fn to_raw(&self) -> RawDevice {
        RawDevice {
            t_1q: self.t_1q,
            t_m: self.t_m,
            t_depl: self.t_depl,
            lag_rec: self.lag_rec,
            qubits: QubitId::ALL
                .iter()
                .map(|q| (q.to_string(), *self.qubit(*q)))
                .collect(),
            zz_coupling: CouplingPair::ALL
                .iter()
                .map(|p| (p.key().to_string(), self.zz_khz(*p)))
                .collect(),
            gates: CrPair::ALL
                .iter()
                .map(|p| (p.key().to_string(), *self.gate(*p)))
                .collect(),
            ancilla_flip: QubitId::ANCILLAS
                .iter()
                .map(|a| (a.to_string(), self.ancilla_flip(*a)))
                .collect(),
        }
    }

    /// Converts and validates the file representation, naming the offending
    /// key on failure.
    pub fn from_raw(raw: &RawDevice) -> Result<Self> {
        let missing = |key: String| Error::Config {
            key,
            reason: "missing".into(),
        };
        let unknown = |key: String| Error::Config {
            key,
            reason: "unknown key".into(),
        };
        for k in raw.qubits.keys() {
            if k.parse::<QubitId>()
                .map(|q| q.to_string() != *k)
                .unwrap_or(true)
            {
                return Err(unknown(format!("device.qubits.{k}")));
            }
        }
        for k in raw.zz_coupling.keys() {
            if !CouplingPair::ALL.iter().any(|p| p.key() == k) {
                return Err(unknown(format!("device.zz_coupling.{k}")));
            }
        }
        for k in raw.gates.keys() {
            if !CrPair::ALL.iter().any(|p| p.key() == k) {
                return Err(unknown(format!("device.gates.{k}")));
            }
        }
        for k in raw.ancilla_flip.keys() {
            if k != "At" && k != "Ab" {
                return Err(unknown(format!("device.ancilla_flip.{k}")));
            }
        }

        let mut qubits = Vec::with_capacity(NUM_QUBITS);
        for q in QubitId::ALL {
            let p = raw
                .qubits
                .get(q.name())
                .ok_or_else(|| missing(format!("device.qubits.{q}")))?;
            qubits.push(*p);
        }
        let mut zz_coupling = [0.0; 6];
        for pair in CouplingPair::ALL {
            zz_coupling[pair.index()] = *raw
                .zz_coupling
                .get(pair.key())
                .ok_or_else(|| missing(format!("device.zz_coupling.{}", pair.key())))?;
        }
        let mut gates = Vec::with_capacity(4);
        for pair in CrPair::ALL {
            gates.push(
                *raw.gates
                    .get(pair.key())
                    .ok_or_else(|| missing(format!("device.gates.{}", pair.key())))?,
            );
        }
        let mut ancilla_flip = [0.0; 2];
        for (i, a) in QubitId::ANCILLAS.iter().enumerate() {
            ancilla_flip[i] = *raw
                .ancilla_flip
                .get(a.name())
                .ok_or_else(|| missing(format!("device.ancilla_flip.{a}")))?;
        }
        let params = Self {
            qubits: qubits.try_into().expect("five qubits"),
            zz_coupling,
            gates: gates.try_into().expect("four gates"),
            ancilla_flip,
            t_1q: raw.t_1q,
            t_m: raw.t_m,
            t_depl: raw.t_depl,
            lag_rec: raw.lag_rec,
        };
        params.validate()?;
        Ok(params)
    }

    /// TOML `[device]` section with non-characterized defaults annotated.
    pub fn to_annotated_toml(&self) -> String {
        const PLACEHOLDER: &str = "  # placeholder default, not a device measurement";
        const DERIVED: &str = "  # derived from two-qubit RB error";
        let mut s = String::new();
        let _ = writeln!(s, "[device]");
        let _ = writeln!(s, "t_1q = {:?}{PLACEHOLDER}", self.t_1q);
        let _ = writeln!(s, "t_m = {:?}{PLACEHOLDER}", self.t_m);
        let _ = writeln!(s, "t_depl = {:?}", self.t_depl);
        let _ = writeln!(s, "lag_rec = {:?}", self.lag_rec);
        for q in QubitId::ALL {
            let p = self.qubit(q);
            let _ = writeln!(s, "\n[device.qubits.{q}]");
            let _ = writeln!(s, "f01 = {:?}", p.f01);
            let _ = writeln!(s, "t1 = {:?}", p.t1);
            let _ = writeln!(s, "t2 = {:?}", p.t2);
            let _ = writeln!(s, "readout_error = {:?}", p.readout_error);
            let _ = writeln!(s, "backaction = {:?}{PLACEHOLDER}", p.backaction);
            let _ = writeln!(s, "gate_error_1q = {:?}", p.gate_error_1q);
        }
        let _ = writeln!(s, "\n[device.zz_coupling]");
        for pair in CouplingPair::ALL {
            let _ = writeln!(s, "\"{}\" = {:?}", pair.key(), self.zz_khz(pair));
        }
        for pair in CrPair::ALL {
            let g = self.gate(pair);
            let _ = writeln!(s, "\n[device.gates.\"{}\"]", pair.key());
            let _ = writeln!(s, "duration = {:?}{PLACEHOLDER}", g.duration);
            let _ = writeln!(s, "overrotation = {:?}{DERIVED}", g.overrotation);
        }
        let _ = writeln!(s, "\n[device.ancilla_flip]");
        for a in QubitId::ANCILLAS {
            let _ = writeln!(
                s,
                "{a} = {:?}  # calibration input, defaults to summed RB error",
                self.ancilla_flip(a)
            );
        }
        s
    }
}

/// File representation of [`DeviceParams`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDevice {
    pub t_1q: f64,
    pub t_m: f64,
    pub t_depl: f64,
    pub lag_rec: f64,
    pub qubits: BTreeMap<String, QubitParams>,
    pub zz_coupling: BTreeMap<String, f64>,
    pub gates: BTreeMap<String, GateParams>,
    pub ancilla_flip: BTreeMap<String, f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_values() {
        let p = DeviceParams::table_s1();
        assert_eq!(p.qubit(QubitId::D1).t2, 12.0);
        assert_eq!(p.qubit(QubitId::D1).t1, 29.0);
        assert_eq!(p.qubit(QubitId::D2).readout_error, 0.13);
        assert_eq!(p.zz_khz(CouplingPair::AtD1), 30.0);
        assert_eq!(p.zz_khz(CouplingPair::D2D3), 72.0);
        assert!((p.gate(CrPair::D3Ab).overrotation - 2.0 * 0.035f64.sqrt()).abs() < 1e-15);
        assert!((p.ancilla_flip(QubitId::At) - 0.145).abs() < 1e-15);
        assert!(p.validate().is_ok());
        assert!(DeviceParams::noiseless().validate().is_ok());
    }

    #[test]
    fn rejects_disconnected_pairs() {
        assert!(CrPair::new(QubitId::D1, QubitId::Ab).is_err());
        assert!(CrPair::new(QubitId::D3, QubitId::At).is_err());
        assert!(CrPair::new(QubitId::At, QubitId::D1).is_err());
    }

    #[test]
    fn validation_names_offending_key() {
        let mut p = DeviceParams::table_s1();
        p.qubit_mut(QubitId::D2).t2 = 20.0;
        match p.validate() {
            Err(Error::Config { key, .. }) => assert_eq!(key, "device.qubits.D2.t2"),
            other => panic!("unexpected {other:?}"),
        }
        let mut p = DeviceParams::table_s1();
        p.set_ancilla_flip(QubitId::Ab, 1.5);
        match p.validate() {
            Err(Error::Config { key, .. }) => assert_eq!(key, "device.ancilla_flip.Ab"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn annotated_toml_reloads() {
        for p in [DeviceParams::table_s1(), DeviceParams::noiseless()] {
            let text = p.to_annotated_toml();
            #[derive(Deserialize)]
            struct File {
                device: RawDevice,
            }
            let file: File = toml::from_str(&text).unwrap();
            assert_eq!(DeviceParams::from_raw(&file.device).unwrap(), p);
        }
    }

    #[test]
    fn unknown_pair_key_is_rejected() {
        let mut raw = DeviceParams::table_s1().to_raw();
        raw.zz_coupling.insert("D1-D3".into(), 1.0);
        match DeviceParams::from_raw(&raw) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "device.zz_coupling.D1-D3"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
