//! Physical noise model: cross-resonance CNOTs with ZZ crosstalk, the
//! entangling block, correction gates and decoherence layers.

mod params;

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::DMatrix;

pub use params::{
    overrotation_from_error, CouplingPair, CrPair, DeviceParams, GateParams, QubitParams,
    RawDevice, DEFAULT_GATE_DURATION_NS, DEFAULT_LAG_REC_NS, DEFAULT_T_1Q_NS, DEFAULT_T_DEPL_NS,
    DEFAULT_T_M_NS, TABLE_S1_EPS_2Q,
};

use crate::error::Result;
use crate::ops::{damping_channel, BlockSuperop, SparseOperator, UnitaryOp, C64};
use crate::qubit::{QubitId, DIM};
use crate::rng::TrajectoryRng;
use crate::state::DensityMatrix;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Converts a ZZ coupling in kHz to an angular frequency in rad/ns.
///
/// The tabulated couplings are ordinary frequencies, so a ZZ term of `eta`
/// kHz produces a phase oscillation with period `1 / eta`.
pub fn zz_angular_rad_per_ns(khz: f64) -> f64 {
    2.0 * PI * khz * 1e-6
}

/// How coherent CNOT errors enter the entangling block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum CoherentErrorModel {
    /// ZX over-rotation inside the CR Hamiltonian.
    E1,
    /// No over-rotation; ancillas flip stochastically after the CNOTs.
    #[default]
    E2,
}

impl std::str::FromStr for CoherentErrorModel {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "e1" => Ok(Self::E1),
            "e2" => Ok(Self::E2),
            _ => Err(crate::Error::Parse(format!("unknown error model `{s}`"))),
        }
    }
}

impl std::fmt::Display for CoherentErrorModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::E1 => "e1",
            Self::E2 => "e2",
        })
    }
}

/// Pairs whose ZZ crosstalk survives the echoed CR gate on `pair`: every
/// connection except those touching the gate's data qubit.
pub fn coupling_set(pair: CrPair) -> Vec<CouplingPair> {
    CouplingPair::ALL
        .into_iter()
        .filter(|c| !c.contains(pair.data()))
        .collect()
}

/// Full-register Pauli string with X on `x_mask` qubits and Z on `z_mask`
/// qubits (masks over basis-index bits).
fn pauli_string(x_mask: usize, z_mask: usize) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(DIM, DIM);
    for col in 0..DIM {
        let sign = if (col & z_mask).count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        m[(col ^ x_mask, col)] = C64::from(sign);
    }
    m
}

fn zz_term(pair: CouplingPair) -> DMatrix<C64> {
    let (a, b) = pair.qubits();
    pauli_string(0, a.mask() | b.mask())
}

fn exp_minus_i(generator: &DMatrix<C64>) -> DMatrix<C64> {
    (generator * C64::new(0.0, -1.0)).exp()
}

/// `Rz(-pi/2)`: relative phase `-i` on `|1>`.
fn z90() -> DMatrix<C64> {
    let p = C64::from_polar(1.0, FRAC_PI_4);
    DMatrix::from_row_slice(2, 2, &[p, ZERO, ZERO, p.conj()])
}

/// `Rx(-pi/2) = (I + iX) / sqrt(2)`.
fn x90() -> DMatrix<C64> {
    let d = C64::from(FRAC_1_SQRT_2);
    let o = C64::new(0.0, FRAC_1_SQRT_2);
    DMatrix::from_row_slice(2, 2, &[d, o, o, d])
}

/// The CR-based CNOT with control `d` and target `a`:
/// `Z90(d) X90(a) exp(-i H t)` with
/// `H t = ((pi/2 + beta)/2) Z_d X_a + sum_C 2 pi eta_kn t Z_k Z_n`.
///
/// With zero over-rotation and crosstalk this is an exact CNOT up to a global
/// phase; the rotation signs are chosen for that.
pub fn cr_unitary(
    d: QubitId,
    a: QubitId,
    params: &DeviceParams,
    model: CoherentErrorModel,
) -> Result<UnitaryOp> {
    let pair = CrPair::new(d, a)?;
    let gate = params.gate(pair);
    let beta = match model {
        CoherentErrorModel::E1 => gate.overrotation,
        CoherentErrorModel::E2 => 0.0,
    };
    let mut generator = pauli_string(a.mask(), d.mask()) * C64::from((FRAC_PI_2 + beta) / 2.0);
    for c in coupling_set(pair) {
        let phase = zz_angular_rad_per_ns(params.zz_khz(c)) * gate.duration;
        if phase != 0.0 {
            generator += zz_term(c) * C64::from(phase);
        }
    }
    let evolution = exp_minus_i(&generator);
    let rotations = UnitaryOp::new(vec![d], z90())?.to_full_matrix()
        * UnitaryOp::new(vec![a], x90())?.to_full_matrix();
    UnitaryOp::new(QubitId::ALL.to_vec(), rotations * evolution)
}

/// Correction layer selecting `{I, X}` per qubit through `mask` (basis-index
/// bits, see [`QubitId::mask`]).
///
/// With `coherent_zz` the X product is generated over `t_1q` together with
/// the ZZ crosstalk of every connected pair; otherwise it is the exact Pauli
/// product.
pub fn correction_unitary(mask: usize, params: &DeviceParams, coherent_zz: bool) -> UnitaryOp {
    let support = QubitId::ALL.to_vec();
    let paulis = pauli_string(mask & (DIM - 1), 0);
    let matrix = if coherent_zz {
        let mut generator = if mask == 0 {
            DMatrix::zeros(DIM, DIM)
        } else {
            paulis * C64::from(FRAC_PI_2)
        };
        for c in CouplingPair::ALL {
            let phase = zz_angular_rad_per_ns(params.zz_khz(c)) * params.t_1q;
            if phase != 0.0 {
                generator += zz_term(c) * C64::from(phase);
            }
        }
        exp_minus_i(&generator)
    } else {
        paulis
    };
    UnitaryOp::new(support, matrix).expect("Hermitian generator yields a unitary")
}

/// Average gate fidelity between two unitaries on the full register.
pub fn average_gate_fidelity(u: &DMatrix<C64>, target: &DMatrix<C64>) -> f64 {
    let d = u.nrows() as f64;
    let overlap = (target.adjoint() * u).trace().norm_sqr();
    (overlap + d) / (d * (d + 1.0))
}

/// Applies X on `q` unless the gate fails, which happens with `p_fail`.
/// Always consumes one draw.
pub fn incoherent_gate_failure(
    state: &mut DensityMatrix,
    q: QubitId,
    p_fail: f64,
    rng: &mut TrajectoryRng,
) {
    if !rng.chance(p_fail) {
        state.apply_pauli_x(q);
    }
}

/// Amplitude and phase damping of every qubit for one duration.
#[derive(Clone, Debug)]
pub struct DampingLayer {
    channels: Vec<BlockSuperop>,
}

impl DampingLayer {
    pub fn new(params: &DeviceParams, duration_ns: f64) -> Result<Self> {
        let mut channels = Vec::with_capacity(QubitId::ALL.len());
        for q in QubitId::ALL {
            let p = params.qubit(q);
            // coherence times are tabulated in microseconds
            let ch = damping_channel(p.t1 * 1e3, p.t2 * 1e3, duration_ns)?.on(q);
            channels.push(ch.compile());
        }
        Ok(Self { channels })
    }

    pub fn apply(&self, state: &mut DensityMatrix) {
        for ch in &self.channels {
            state.apply_superop(ch);
        }
    }
}

/// Noise model compiled once per experiment and shared across trajectories.
#[derive(Clone, Debug)]
pub struct Device {
    params: DeviceParams,
    model: CoherentErrorModel,
    first_pair: SparseOperator,
    second_pair: SparseOperator,
    pub(crate) damp_tau1: DampingLayer,
    pub(crate) damp_tau2: DampingLayer,
    pub(crate) damp_measure: DampingLayer,
    pub(crate) damp_depletion: DampingLayer,
    pub(crate) damp_lag_rec: DampingLayer,
    pub(crate) damp_1q: DampingLayer,
}

impl Device {
    pub fn new(params: DeviceParams, model: CoherentErrorModel) -> Result<Self> {
        params.validate()?;
        let pair =
            |d, a| -> Result<SparseOperator> { Ok(cr_unitary(d, a, &params, model)?.embed()) };
        use QubitId::*;
        let first_pair = pair(D3, Ab)?.mul(&pair(D2, At)?);
        let second_pair = pair(D2, Ab)?.mul(&pair(D1, At)?);
        Ok(Self {
            damp_tau1: DampingLayer::new(&params, params.tau1())?,
            damp_tau2: DampingLayer::new(&params, params.tau2())?,
            damp_measure: DampingLayer::new(&params, params.t_m)?,
            damp_depletion: DampingLayer::new(&params, params.t_depl)?,
            damp_lag_rec: DampingLayer::new(&params, params.lag_rec)?,
            damp_1q: DampingLayer::new(&params, params.t_1q)?,
            first_pair,
            second_pair,
            params,
            model,
        })
    }

    pub fn params(&self) -> &DeviceParams {
        &self.params
    }

    pub fn model(&self) -> CoherentErrorModel {
        self.model
    }

    /// Parity-mapping block: CNOTs D2-At with D3-Ab, damping for `tau1`, then
    /// D1-At with D2-Ab, damping for `tau2`. Under the E2 model each ancilla
    /// then flips with its calibrated probability (one draw each, At first).
    pub fn entangling_operation(&self, state: &mut DensityMatrix, rng: &mut TrajectoryRng) {
        state.apply_sparse(&self.first_pair);
        self.damp_tau1.apply(state);
        state.apply_sparse(&self.second_pair);
        self.damp_tau2.apply(state);
        if self.model == CoherentErrorModel::E2 {
            for a in QubitId::ANCILLAS {
                if rng.chance(self.params.ancilla_flip(a)) {
                    state.apply_pauli_x(a);
                }
            }
        }
    }

    /// Applies X on every qubit in `mask`, either as independent gates that
    /// fail with the single-qubit gate error or as one coherent layer with ZZ
    /// crosstalk; either way followed by damping for `t_1q`.
    pub fn apply_correction(
        &self,
        state: &mut DensityMatrix,
        mask: usize,
        coherent_zz: bool,
        rng: &mut TrajectoryRng,
    ) {
        if coherent_zz {
            state.apply_unitary(&correction_unitary(mask, &self.params, true));
        } else {
            for q in QubitId::ALL.into_iter().filter(|q| mask & q.mask() != 0) {
                let p_fail = self.params.qubit(q).gate_error_1q;
                incoherent_gate_failure(state, q, p_fail, rng);
            }
        }
        self.damp_1q.apply(state);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit::basis_index;

    fn cnot(d: QubitId, a: QubitId) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(DIM, DIM);
        for col in 0..DIM {
            let row = if col & d.mask() != 0 {
                col ^ a.mask()
            } else {
                col
            };
            m[(row, col)] = C64::from(1.0);
        }
        m
    }

    #[test]
    fn ideal_cr_is_cnot() {
        let p = DeviceParams::noiseless();
        for pair in CrPair::ALL {
            let (d, a) = (pair.data(), pair.ancilla());
            for model in [CoherentErrorModel::E1, CoherentErrorModel::E2] {
                let u = cr_unitary(d, a, &p, model).unwrap().to_full_matrix();
                let f = average_gate_fidelity(&u, &cnot(d, a));
                assert!(f >= 1.0 - 1e-10, "{pair:?}: {f}");
            }
        }
    }

    #[test]
    fn ideal_cr_basis_action() {
        let p = DeviceParams::noiseless();
        let u = cr_unitary(QubitId::D1, QubitId::At, &p, CoherentErrorModel::E2).unwrap();
        for (input, output) in [
            ([1, 0, 0, 0, 0], [1, 0, 0, 1, 0]),
            ([0, 0, 0, 0, 0], [0, 0, 0, 0, 0]),
            ([0, 0, 0, 1, 0], [0, 0, 0, 1, 0]),
        ] {
            let mut rho = DensityMatrix::basis(basis_index(input));
            rho.apply_unitary(&u);
            assert!(rho.distance(&DensityMatrix::basis(basis_index(output))) < 1e-10);
        }
    }

    #[test]
    fn coupling_set_excludes_data_qubit() {
        for pair in CrPair::ALL {
            let set = coupling_set(pair);
            assert!(set.iter().all(|c| !c.contains(pair.data())));
        }
        assert_eq!(
            coupling_set(CrPair::D2At),
            vec![CouplingPair::AtD1, CouplingPair::AbD3]
        );
    }

    #[test]
    fn crosstalk_degrades_fidelity_monotonically() {
        let pair = CrPair::D2At;
        let (d, a) = (pair.data(), pair.ancilla());
        let target = cnot(d, a);
        let fidelity = |scale: f64| {
            let mut p = DeviceParams::noiseless();
            let table = DeviceParams::table_s1();
            for c in CouplingPair::ALL {
                p.set_zz_khz(c, scale * table.zz_khz(c));
            }
            let u = cr_unitary(d, a, &p, CoherentErrorModel::E2).unwrap();
            average_gate_fidelity(&u.to_full_matrix(), &target)
        };
        let (f0, f1, f2) = (fidelity(0.0), fidelity(1.0), fidelity(2.0));
        assert!(f0 > 1.0 - 1e-12);
        assert!(f1 < 1.0 && f2 < f1, "{f1} {f2}");
    }

    #[test]
    fn overrotation_degrades_fidelity() {
        let p = DeviceParams::table_s1();
        let mut no_zz = p.clone();
        for c in CouplingPair::ALL {
            no_zz.set_zz_khz(c, 0.0);
        }
        let u = cr_unitary(QubitId::D1, QubitId::At, &no_zz, CoherentErrorModel::E1).unwrap();
        let f = average_gate_fidelity(&u.to_full_matrix(), &cnot(QubitId::D1, QubitId::At));
        // beta^2 / 4 per the RB relation, diluted by the idle qubits
        assert!(f < 1.0 - 1e-3);
    }

    #[test]
    fn zz_phase_period_matches_frequency() {
        // a ZZ term of eta kHz returns to identity (up to sign) after 1/eta
        let mut p = DeviceParams::noiseless();
        p.set_zz_khz(CouplingPair::D1D2, 100.0);
        p.t_1q = 1e4 / 2.0; // half a period of 10 us: exp(-i pi ZZ) = -I
        let u = correction_unitary(0, &p, true).to_full_matrix();
        let f = average_gate_fidelity(&u, &DMatrix::identity(DIM, DIM));
        assert!(f > 1.0 - 1e-12, "{f}");
        p.t_1q = 1e4 / 4.0; // quarter period: exp(-i pi/2 ZZ) = -i ZZ
        let u = correction_unitary(0, &p, true).to_full_matrix();
        let zz = zz_term(CouplingPair::D1D2);
        assert!(average_gate_fidelity(&u, &zz) > 1.0 - 1e-12);
    }

    #[test]
    fn correction_unitary_cases() {
        let p = DeviceParams::noiseless();
        let id = correction_unitary(0, &p, true).to_full_matrix();
        assert!((id - DMatrix::<C64>::identity(DIM, DIM)).camax() < 1e-12);

        let x1 = UnitaryOp::pauli_x(QubitId::D1).to_full_matrix();
        let u = correction_unitary(QubitId::D1.mask(), &p, true).to_full_matrix();
        assert!(average_gate_fidelity(&u, &x1) > 1.0 - 1e-12);
        let exact = correction_unitary(QubitId::D1.mask(), &p, false).to_full_matrix();
        assert!((exact - x1).camax() < 1e-15);

        let mut zz = DeviceParams::noiseless();
        zz.set_zz_khz(CouplingPair::D2D3, 72.0);
        let x2 = UnitaryOp::pauli_x(QubitId::D2).to_full_matrix();
        let u = correction_unitary(QubitId::D2.mask(), &zz, true).to_full_matrix();
        assert!(average_gate_fidelity(&u, &x2) < 1.0);
    }

    #[test]
    fn gate_failure_extremes() {
        let mut rng = TrajectoryRng::from_seed(5);
        let start = DensityMatrix::basis(0);
        let mut rho = start.clone();
        incoherent_gate_failure(&mut rho, QubitId::D2, 0.0, &mut rng);
        assert_eq!(rho, DensityMatrix::basis(QubitId::D2.mask()));
        let mut rho = start.clone();
        incoherent_gate_failure(&mut rho, QubitId::D2, 1.0, &mut rng);
        assert_eq!(rho, start);
    }

    #[test]
    fn gate_failure_statistics() {
        let mut rng = TrajectoryRng::from_seed(17);
        let trials = 100_000;
        let start = DensityMatrix::basis(0);
        let mut flipped = 0;
        for _ in 0..trials {
            let mut rho = start.clone();
            incoherent_gate_failure(&mut rho, QubitId::D2, 0.01, &mut rng);
            if rho.excited_probability(QubitId::D2) > 0.5 {
                flipped += 1;
            }
        }
        let frac = flipped as f64 / trials as f64;
        assert!((frac - 0.99).abs() < 0.003, "{frac}");
    }

    fn noiseless_device(model: CoherentErrorModel) -> Device {
        Device::new(DeviceParams::noiseless(), model).unwrap()
    }

    #[test]
    fn noiseless_entangling_maps_parities() {
        let dev = noiseless_device(CoherentErrorModel::E2);
        let mut rng = TrajectoryRng::from_seed(1);
        for v in 0..8u8 {
            let (d1, d2, d3) = ((v >> 2) & 1, (v >> 1) & 1, v & 1);
            let mut rho = DensityMatrix::basis(basis_index([d1, d2, d3, 0, 0]));
            dev.entangling_operation(&mut rho, &mut rng);
            let want = DensityMatrix::basis(basis_index([d1, d2, d3, d1 ^ d2, d2 ^ d3]));
            assert!(rho.distance(&want) < 1e-9, "input {v:03b}");
        }
    }

    #[test]
    fn forced_ancilla_flip() {
        let mut p = DeviceParams::noiseless();
        p.set_ancilla_flip(QubitId::At, 1.0);
        let dev = Device::new(p, CoherentErrorModel::E2).unwrap();
        let mut rng = TrajectoryRng::from_seed(2);
        let mut rho = DensityMatrix::basis(0);
        dev.entangling_operation(&mut rho, &mut rng);
        assert!(rho.distance(&DensityMatrix::basis(QubitId::At.mask())) < 1e-12);
    }

    #[test]
    fn models_agree_without_overrotation_or_flips() {
        let mut p = DeviceParams::table_s1();
        for pair in CrPair::ALL {
            p.gate_mut(pair).overrotation = 0.0;
        }
        p.set_ancilla_flip(QubitId::At, 0.0);
        p.set_ancilla_flip(QubitId::Ab, 0.0);
        let e1 = Device::new(p.clone(), CoherentErrorModel::E1).unwrap();
        let e2 = Device::new(p, CoherentErrorModel::E2).unwrap();
        let start = DensityMatrix::basis(basis_index([1, 0, 1, 0, 0]));
        let (mut a, mut b) = (start.clone(), start);
        e1.entangling_operation(&mut a, &mut TrajectoryRng::from_seed(3));
        e2.entangling_operation(&mut b, &mut TrajectoryRng::from_seed(3));
        assert!(a.distance(&b) < 1e-15);
    }

    #[test]
    fn cr_unitary_rejects_disconnected() {
        let p = DeviceParams::table_s1();
        assert!(cr_unitary(QubitId::D1, QubitId::Ab, &p, CoherentErrorModel::E2).is_err());
    }
}
