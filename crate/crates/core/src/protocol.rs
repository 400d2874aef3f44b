//! Protocol engine: quantum-trajectory Monte Carlo of the repeated parity
//! measurement cycle under each correction strategy.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoder::{
    majority, pauli_frame_update, single_round_correction, Correction, DecoderWeights, LookupTable,
    Syndrome, SyndromeHistory, MAX_ROUNDS,
};
use crate::device::{CoherentErrorModel, DampingLayer, Device, DeviceParams};
use crate::error::{Error, Result};
use crate::latency::processor_roundtrip;
use crate::qubit::{basis_index, DataBits, QubitId};
use crate::rng::TrajectoryRng;
use crate::state::DensityMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    Uncorrected,
    Rec,
    Dec,
    DecPfu,
    PostProcessed,
    FreeDecay,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 6] = [
        Self::Uncorrected,
        Self::Rec,
        Self::Dec,
        Self::DecPfu,
        Self::PostProcessed,
        Self::FreeDecay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Uncorrected => "uncorrected",
            Self::Rec => "rec",
            Self::Dec => "dec",
            Self::DecPfu => "dec-pfu",
            Self::PostProcessed => "post-processed",
            Self::FreeDecay => "free-decay",
        }
    }

    /// Whether the data readout is corrected in software rather than by gates.
    pub fn uses_frame(self) -> bool {
        matches!(self, Self::DecPfu | Self::PostProcessed)
    }

    fn decodes(self) -> bool {
        matches!(self, Self::Dec | Self::DecPfu | Self::PostProcessed)
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown protocol `{s}`")))
    }
}

/// How physical X corrections are modelled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrectionModel {
    /// Each gate independently fails with the single-qubit gate error.
    #[default]
    Incoherent,
    /// One simultaneous layer carrying ZZ crosstalk for the gate duration.
    CoherentZz,
}

impl CorrectionModel {
    pub fn name(self) -> &'static str {
        match self {
            Self::Incoherent => "incoherent",
            Self::CoherentZz => "coherent-zz",
        }
    }
}

impl fmt::Display for CorrectionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorrectionModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "incoherent" => Ok(Self::Incoherent),
            "coherent-zz" => Ok(Self::CoherentZz),
            _ => Err(Error::Parse(format!("unknown correction model `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub protocol: ProtocolKind,
    pub n_cycles: usize,
    pub n_trajectories: u64,
    pub master_seed: u64,
    pub initial_state: DataBits,
    pub error_model: CoherentErrorModel,
    pub weights: DecoderWeights,
    pub params: DeviceParams,
    /// Physical DEC corrections suffer the Processor lag and gate errors.
    pub noisy_dec_correction: bool,
    pub correction_model: CorrectionModel,
}

impl ExperimentConfig {
    pub fn new(protocol: ProtocolKind, n_cycles: usize, params: DeviceParams) -> Self {
        Self {
            protocol,
            n_cycles,
            n_trajectories: 1,
            master_seed: 0,
            initial_state: DataBits([1, 1, 1]),
            error_model: CoherentErrorModel::E2,
            weights: DecoderWeights::default(),
            params,
            noisy_dec_correction: false,
            correction_model: CorrectionModel::Incoherent,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_ROUNDS).contains(&self.n_cycles) {
            return Err(Error::RoundsOutOfRange(self.n_cycles));
        }
        if self.n_trajectories == 0 {
            return Err(Error::Config {
                key: "experiment.n_trajectories".into(),
                reason: "must be at least 1".into(),
            });
        }
        if self.initial_state.0.iter().any(|&b| b > 1) {
            return Err(Error::Config {
                key: "experiment.initial_state".into(),
                reason: "bits must be 0 or 1".into(),
            });
        }
        self.params.validate()
    }
}

/// Deterministic faults injected into an otherwise stochastic trajectory.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FaultInjection {
    /// `(slot, qubit)`: X before cycle `slot + 1`; slot `n_cycles` precedes
    /// the data readout.
    pub data_flips: Vec<(usize, QubitId)>,
    /// `(round, ancilla)`: the stored outcome of that round is inverted.
    pub stored_flips: Vec<(usize, QubitId)>,
}

impl FaultInjection {
    pub fn data_flip(slot: usize, q: QubitId) -> Self {
        Self {
            data_flips: vec![(slot, q)],
            ..Self::default()
        }
    }

    pub fn stored_flip(round: usize, ancilla: QubitId) -> Self {
        Self {
            stored_flips: vec![(round, ancilla)],
            ..Self::default()
        }
    }

    fn apply_data(&self, slot: usize, state: &mut DensityMatrix) {
        for &(s, q) in &self.data_flips {
            if s == slot {
                state.apply_pauli_x(q);
            }
        }
    }

    fn stored(&self, round: usize, a: QubitId) -> bool {
        self.stored_flips
            .iter()
            .filter(|&&(r, q)| r == round && q == a)
            .count()
            % 2
            == 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrajectoryRecord {
    /// Stored classical outcomes, readout errors included; absent for free
    /// decay.
    pub syndromes: Option<SyndromeHistory>,
    /// Final data readout. For active DEC with perfect gates the correction
    /// is already folded in.
    pub data_bits: DataBits,
    pub corrected_bits: DataBits,
    pub majority_bit: u8,
    pub correction_applied: Correction,
    /// Per-round data corrections issued by REC; empty otherwise.
    pub round_corrections: Vec<Correction>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub protocol: ProtocolKind,
    pub n_cycles: usize,
    pub n_trajectories: u64,
    pub master_seed: u64,
    /// Mean of `d1, d2, d3, m`.
    pub means: [f64; 4],
    pub std_errors: [f64; 4],
}

impl ExperimentResult {
    fn from_counts(config: &ExperimentConfig, counts: [u64; 4]) -> Self {
        let k = config.n_trajectories;
        let means = counts.map(|c| c as f64 / k as f64);
        Self {
            protocol: config.protocol,
            n_cycles: config.n_cycles,
            n_trajectories: k,
            master_seed: config.master_seed,
            means,
            std_errors: means.map(|p| standard_error(p, k)),
        }
    }

    pub fn m_mean(&self) -> f64 {
        self.means[3]
    }

    pub fn m_stderr(&self) -> f64 {
        self.std_errors[3]
    }

    pub const CSV_HEADER: &'static str =
        "protocol,N,K,seed,d1_mean,d2_mean,d3_mean,m_mean,m_stderr";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.protocol,
            self.n_cycles,
            self.n_trajectories,
            self.master_seed,
            self.means[0],
            self.means[1],
            self.means[2],
            self.means[3],
            self.std_errors[3]
        )
    }
}

/// Binomial standard error of a mean `p` over `k` samples.
pub fn standard_error(p: f64, k: u64) -> f64 {
    (p * (1.0 - p) / k as f64).sqrt()
}

/// Everything compiled once per experiment and shared across trajectories.
#[derive(Clone, Debug)]
pub struct Experiment {
    config: ExperimentConfig,
    device: Device,
    table: Option<LookupTable>,
    damp_dec_lag: DampingLayer,
    damp_free: DampingLayer,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let device = Device::new(config.params.clone(), config.error_model)?;
        let table = if config.protocol.decodes() {
            Some(LookupTable::build(config.n_cycles, false, &config.weights)?)
        } else {
            None
        };
        let p = &config.params;
        let damp_dec_lag = DampingLayer::new(p, processor_roundtrip(&[]) as f64)?;
        let damp_free = DampingLayer::new(p, config.n_cycles as f64 * p.cycle_duration())?;
        Ok(Self {
            config,
            device,
            table,
            damp_dec_lag,
            damp_free,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    fn initial_state(&self) -> DensityMatrix {
        let d = self.config.initial_state.0;
        DensityMatrix::basis(basis_index([d[0], d[1], d[2], 0, 0]))
    }

    pub fn run_trajectory(&self, index: u64) -> Result<TrajectoryRecord> {
        self.run_trajectory_with_faults(index, &FaultInjection::default())
    }

    pub fn run_trajectory_with_faults(
        &self,
        index: u64,
        faults: &FaultInjection,
    ) -> Result<TrajectoryRecord> {
        let cfg = &self.config;
        let mut rng = TrajectoryRng::new(cfg.master_seed, index);
        let mut state = self.initial_state();
        let n = cfg.n_cycles;
        let protocol = cfg.protocol;
        let coherent = cfg.correction_model == CorrectionModel::CoherentZz;

        let mut rounds = Vec::with_capacity(n);
        let mut round_corrections = Vec::new();
        if protocol == ProtocolKind::FreeDecay {
            for slot in 0..n {
                faults.apply_data(slot, &mut state);
            }
            self.damp_free.apply(&mut state);
        } else {
            let with_correction = protocol == ProtocolKind::Rec;
            for round in 0..n {
                faults.apply_data(round, &mut state);
                let (s, corr) = run_cycle(
                    &mut state,
                    &self.device,
                    &mut rng,
                    with_correction,
                    coherent,
                    |a| faults.stored(round, a),
                )?;
                rounds.push(s);
                if let Some(c) = corr {
                    round_corrections.push(c);
                }
            }
        }
        faults.apply_data(n, &mut state);
        let syndromes = if rounds.is_empty() {
            None
        } else {
            Some(SyndromeHistory::new(rounds, protocol == ProtocolKind::Rec)?)
        };

        let correction = match (&self.table, &syndromes) {
            (Some(table), Some(m)) => table.decode(m)?,
            _ => Correction::NONE,
        };

        let active_noisy = protocol == ProtocolKind::Dec && cfg.noisy_dec_correction;
        if active_noisy {
            self.damp_dec_lag.apply(&mut state);
            self.device
                .apply_correction(&mut state, correction.qubit_mask(), coherent, &mut rng);
        }
        let raw = measure_data_final(&mut state, self.device.params(), &self.device, &mut rng)?;

        let (data_bits, corrected_bits) = match protocol {
            // perfect gates before a measurement act as a relabelling
            ProtocolKind::Dec if !active_noisy => {
                let d = pauli_frame_update(raw, correction);
                (d, d)
            }
            p if p.uses_frame() => (raw, pauli_frame_update(raw, correction)),
            _ => (raw, raw),
        };
        Ok(TrajectoryRecord {
            syndromes,
            data_bits,
            corrected_bits,
            majority_bit: majority(&corrected_bits.0)?,
            correction_applied: correction,
            round_corrections,
        })
    }

    /// Runs all trajectories on the current rayon pool. Counts are integers,
    /// so the result does not depend on scheduling.
    pub fn run(&self) -> Result<ExperimentResult> {
        let counts = (0..self.config.n_trajectories)
            .into_par_iter()
            .map(|i| {
                let r = self.run_trajectory(i)?;
                let d = r.corrected_bits.0;
                Ok([d[0], d[1], d[2], r.majority_bit].map(u64::from))
            })
            .try_reduce(
                || [0; 4],
                |a, b| Ok([a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]),
            )?;
        Ok(ExperimentResult::from_counts(&self.config, counts))
    }

    /// Runs on a dedicated pool with `threads` workers.
    pub fn run_with_threads(&self, threads: usize) -> Result<ExperimentResult> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config {
                key: "threads".into(),
                reason: e.to_string(),
            })?;
        pool.install(|| self.run())
    }
}

/// One cycle: entangling block, ancilla readout, depletion and, for REC,
/// feedback. Draw order: coherent-error flips, projections (At, Ab), readout
/// errors (At, Ab), back-action (At, Ab), then correction gates.
///
/// `stored_fault` inverts the stored bit of an ancilla on top of readout
/// errors. Returns the stored syndrome and, with feedback, the data
/// correction issued.
pub fn run_cycle(
    state: &mut DensityMatrix,
    device: &Device,
    rng: &mut TrajectoryRng,
    with_correction: bool,
    coherent_zz: bool,
    stored_fault: impl Fn(QubitId) -> bool,
) -> Result<(Syndrome, Option<Correction>)> {
    let params = device.params();
    device.entangling_operation(state, rng);
    device.damp_measure.apply(state);
    let mut bits = [0u8; 2];
    for (b, a) in bits.iter_mut().zip(QubitId::ANCILLAS) {
        *b = state.measure(a, rng)?;
    }
    for (b, a) in bits.iter_mut().zip(QubitId::ANCILLAS) {
        let readout_flip = rng.chance(params.qubit(a).readout_error);
        *b ^= u8::from(readout_flip ^ stored_fault(a));
    }
    for a in QubitId::ANCILLAS {
        if rng.chance(params.qubit(a).backaction) {
            state.apply_pauli_x(a);
        }
    }
    device.damp_depletion.apply(state);
    let syndrome = Syndrome::new(bits[0], bits[1]);
    if !with_correction {
        return Ok((syndrome, None));
    }
    device.damp_lag_rec.apply(state);
    let corr = single_round_correction(syndrome);
    let reset = QubitId::ANCILLAS
        .iter()
        .zip(bits)
        .filter(|(_, b)| *b == 1)
        .fold(0, |m, (a, _)| m | a.mask());
    device.apply_correction(state, corr.qubit_mask() | reset, coherent_zz, rng);
    Ok((syndrome, Some(corr)))
}

/// Damping for the readout window, projection of D1..D3, then readout errors
/// in the same order.
pub fn measure_data_final(
    state: &mut DensityMatrix,
    params: &DeviceParams,
    device: &Device,
    rng: &mut TrajectoryRng,
) -> Result<DataBits> {
    device.damp_measure.apply(state);
    let mut bits = [0u8; 3];
    for (b, q) in bits.iter_mut().zip(QubitId::DATA) {
        *b = state.measure(q, rng)?;
    }
    for (b, q) in bits.iter_mut().zip(QubitId::DATA) {
        *b ^= u8::from(rng.chance(params.qubit(q).readout_error));
    }
    Ok(DataBits(bits))
}

pub fn run_trajectory(config: &ExperimentConfig, index: u64) -> Result<TrajectoryRecord> {
    Experiment::new(config.clone())?.run_trajectory(index)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    Experiment::new(config.clone())?.run()
}

/// Empirical `(ee, eo, oe, oo)` frequencies of the stored syndrome after one
/// cycle without feedback.
pub fn parity_distribution(
    initial: DataBits,
    device: &Device,
    master_seed: u64,
    k: u64,
) -> Result<[f64; 4]> {
    let d = initial.0;
    let start = DensityMatrix::basis(basis_index([d[0], d[1], d[2], 0, 0]));
    let counts = (0..k)
        .into_par_iter()
        .map(|i| {
            let mut rng = TrajectoryRng::new(master_seed, i);
            let mut state = start.clone();
            let (s, _) = run_cycle(&mut state, device, &mut rng, false, false, |_| false)?;
            let mut c = [0u64; 4];
            c[usize::from(2 * s.a_t + s.a_b)] = 1;
            Ok(c)
        })
        .try_reduce(
            || [0; 4],
            |a, b| Ok([a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]),
        )?;
    Ok(counts.map(|c| c as f64 / k.max(1) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noiseless(protocol: ProtocolKind, n: usize) -> ExperimentConfig {
        ExperimentConfig::new(protocol, n, DeviceParams::noiseless())
    }

    #[test]
    fn protocol_names_round_trip() {
        for p in ProtocolKind::ALL {
            assert_eq!(p.name().parse::<ProtocolKind>().unwrap(), p);
        }
        assert!("decoder".parse::<ProtocolKind>().is_err());
    }

    #[test]
    fn noiseless_cycle_is_a_fixed_point() {
        let dev = Device::new(DeviceParams::noiseless(), CoherentErrorModel::E2).unwrap();
        let start = DensityMatrix::basis(basis_index([1, 1, 1, 0, 0]));
        let mut state = start.clone();
        let mut rng = TrajectoryRng::new(0, 0);
        let (s, c) = run_cycle(&mut state, &dev, &mut rng, true, false, |_| false).unwrap();
        assert_eq!(s, Syndrome::new(0, 0));
        assert_eq!(c, Some(Correction::NONE));
        assert!(state.distance(&start) < 1e-12);
    }

    #[test]
    fn feedback_repairs_injected_flip_and_resets() {
        let dev = Device::new(DeviceParams::noiseless(), CoherentErrorModel::E2).unwrap();
        let start = DensityMatrix::basis(basis_index([1, 1, 1, 0, 0]));
        let mut state = start.clone();
        state.apply_pauli_x(QubitId::D1);
        let mut rng = TrajectoryRng::new(0, 0);
        let (s, c) = run_cycle(&mut state, &dev, &mut rng, true, false, |_| false).unwrap();
        assert_eq!(s, Syndrome::new(1, 0));
        assert_eq!(c, Some(Correction::new(1, 0, 0)));
        assert!(state.distance(&start) < 1e-12);
    }

    #[test]
    fn certain_readout_error_on_at_corrupts_d1() {
        let mut params = DeviceParams::noiseless();
        params.qubit_mut(QubitId::At).readout_error = 1.0;
        let dev = Device::new(params, CoherentErrorModel::E2).unwrap();
        let mut state = DensityMatrix::basis(basis_index([1, 1, 1, 0, 0]));
        let mut rng = TrajectoryRng::new(0, 0);
        let (s, c) = run_cycle(&mut state, &dev, &mut rng, true, false, |_| false).unwrap();
        assert_eq!(s, Syndrome::new(1, 0));
        assert_eq!(c, Some(Correction::new(1, 0, 0)));
        assert_eq!(state.excited_probability(QubitId::D1), 0.0);
    }

    #[test]
    fn final_readout_examples() {
        let mut params = DeviceParams::noiseless();
        let dev = Device::new(params.clone(), CoherentErrorModel::E2).unwrap();
        let mut rng = TrajectoryRng::new(0, 0);
        let mut state = DensityMatrix::basis(basis_index([1, 1, 1, 0, 0]));
        let bits = measure_data_final(&mut state, &params, &dev, &mut rng).unwrap();
        assert_eq!(bits, DataBits([1, 1, 1]));

        params.qubit_mut(QubitId::D1).readout_error = 1.0;
        let dev = Device::new(params.clone(), CoherentErrorModel::E2).unwrap();
        let mut state = DensityMatrix::basis(basis_index([1, 1, 1, 0, 0]));
        let bits = measure_data_final(&mut state, &params, &dev, &mut rng).unwrap();
        assert_eq!(bits, DataBits([0, 1, 1]));
    }

    #[test]
    fn single_trajectory_means_are_binary() {
        let mut cfg = ExperimentConfig::new(ProtocolKind::Dec, 3, DeviceParams::table_s1());
        cfg.master_seed = 11;
        let r = run_experiment(&cfg).unwrap();
        assert!(r.means.iter().all(|&m| m == 0.0 || m == 1.0));
    }

    #[test]
    fn noiseless_dec_at_eight_cycles() {
        let mut cfg = noiseless(ProtocolKind::Dec, 8);
        cfg.n_trajectories = 1000;
        assert_eq!(run_experiment(&cfg).unwrap().m_mean(), 1.0);
    }

    #[test]
    fn injected_d2_flip_is_decoded() {
        let exp = Experiment::new(noiseless(ProtocolKind::Dec, 3)).unwrap();
        let r = exp
            .run_trajectory_with_faults(0, &FaultInjection::data_flip(1, QubitId::D2))
            .unwrap();
        assert_eq!(r.correction_applied, Correction::new(0, 1, 0));
        assert_eq!(r.majority_bit, 1);
        assert_eq!(r.corrected_bits, DataBits([1, 1, 1]));
    }

    #[test]
    fn stored_flip_paths() {
        let fault = FaultInjection::stored_flip(0, QubitId::At);
        let dec = Experiment::new(noiseless(ProtocolKind::Dec, 3)).unwrap();
        let r = dec.run_trajectory_with_faults(0, &fault).unwrap();
        assert_eq!(r.correction_applied, Correction::NONE);
        assert_eq!(r.majority_bit, 1);

        let rec = Experiment::new(noiseless(ProtocolKind::Rec, 3)).unwrap();
        let r = rec.run_trajectory_with_faults(0, &fault).unwrap();
        assert_eq!(r.round_corrections[0], Correction::new(1, 0, 0));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(Experiment::new(noiseless(ProtocolKind::Dec, 9)).is_err());
        let mut cfg = noiseless(ProtocolKind::Dec, 2);
        cfg.n_trajectories = 0;
        assert!(Experiment::new(cfg).is_err());
    }

    #[test]
    fn standard_error_formula() {
        assert_eq!(standard_error(0.5, 100), 0.05);
        assert_eq!(standard_error(1.0, 7), 0.0);
    }

    #[test]
    fn parity_labels_without_noise() {
        let dev = Device::new(DeviceParams::noiseless(), CoherentErrorModel::E2).unwrap();
        let p = parity_distribution(DataBits([0, 0, 0]), &dev, 1, 20).unwrap();
        assert_eq!(p, [1.0, 0.0, 0.0, 0.0]);
        let p = parity_distribution(DataBits([1, 0, 1]), &dev, 1, 20).unwrap();
        assert_eq!(p, [0.0, 0.0, 0.0, 1.0]);
    }
}
