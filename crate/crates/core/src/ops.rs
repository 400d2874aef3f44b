//! Unitary operators and single-qubit Kraus channels, plus the compiled forms
//! used on the hot path of the simulator.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qubit::{QubitId, DIM};

pub type C64 = Complex64;

/// Invariant tolerance for unitarity and trace preservation.
pub const INVARIANT_TOL: f64 = 1e-10;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Unitary acting on an ordered list of qubits.
///
/// Within the support, the first listed qubit is the most significant bit of
/// the local matrix index.
#[derive(Clone, Debug)]
pub struct UnitaryOp {
    support: Vec<QubitId>,
    matrix: DMatrix<C64>,
}

impl UnitaryOp {
    pub fn new(support: Vec<QubitId>, matrix: DMatrix<C64>) -> Result<Self> {
        for (i, q) in support.iter().enumerate() {
            if support[..i].contains(q) {
                return Err(Error::DuplicateSupport(*q));
            }
        }
        let dim = 1usize << support.len();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                actual: matrix.nrows(),
                qubits: support.len(),
            });
        }
        let deviation = unitarity_deviation(&matrix);
        if deviation > INVARIANT_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self { support, matrix })
    }

    /// Single-qubit Pauli X.
    pub fn pauli_x(q: QubitId) -> Self {
        let x = DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        Self {
            support: vec![q],
            matrix: x,
        }
    }

    pub fn identity() -> Self {
        Self {
            support: Vec::new(),
            matrix: DMatrix::identity(1, 1),
        }
    }

    pub fn support(&self) -> &[QubitId] {
        &self.support
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// The operator embedded on the full register, identity elsewhere.
    pub fn embed(&self) -> SparseOperator {
        let mut rows = Vec::with_capacity(DIM);
        for i in 0..DIM {
            let local_row = self.local_index(i);
            let cleared = self.support.iter().fold(i, |acc, q| acc & !q.mask());
            let mut row = Vec::new();
            for local_col in 0..self.matrix.ncols() {
                let v = self.matrix[(local_row, local_col)];
                if v != ZERO {
                    row.push((cleared | self.global_bits(local_col), v));
                }
            }
            rows.push(row);
        }
        SparseOperator { rows }
    }

    pub fn to_full_matrix(&self) -> DMatrix<C64> {
        self.embed().to_dense()
    }

    fn local_index(&self, global: usize) -> usize {
        self.support
            .iter()
            .fold(0, |acc, q| (acc << 1) | usize::from(global & q.mask() != 0))
    }

    fn global_bits(&self, local: usize) -> usize {
        let k = self.support.len();
        self.support
            .iter()
            .enumerate()
            .filter(|(pos, _)| local & (1 << (k - 1 - pos)) != 0)
            .fold(0, |acc, (_, q)| acc | q.mask())
    }
}

/// Max-norm of `U^dagger U - I`.
pub fn unitarity_deviation(u: &DMatrix<C64>) -> f64 {
    let prod = u.adjoint() * u;
    let id = DMatrix::<C64>::identity(u.nrows(), u.ncols());
    (prod - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Row-sparse operator on the full 32-dimensional register.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    rows: Vec<Vec<(usize, C64)>>,
}

impl SparseOperator {
    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        assert_eq!(m.nrows(), DIM);
        let rows = (0..DIM)
            .map(|i| {
                (0..DIM)
                    .filter(|&j| m[(i, j)] != ZERO)
                    .map(|j| (j, m[(i, j)]))
                    .collect()
            })
            .collect();
        Self { rows }
    }

    pub fn rows(&self) -> &[Vec<(usize, C64)>] {
        &self.rows
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Operator product `self * rhs`.
    pub fn mul(&self, rhs: &SparseOperator) -> SparseOperator {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut acc = [ZERO; DIM];
                for &(k, a) in row {
                    for &(j, b) in &rhs.rows[k] {
                        acc[j] += a * b;
                    }
                }
                acc.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != ZERO)
                    .map(|(j, v)| (j, *v))
                    .collect()
            })
            .collect();
        SparseOperator { rows }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(DIM, DIM);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j)] = v;
            }
        }
        m
    }
}

/// Single-qubit channel in Kraus form.
#[derive(Clone, Debug)]
pub struct KrausChannel {
    qubit: QubitId,
    operators: Vec<Matrix2<C64>>,
}

impl KrausChannel {
    pub fn new(qubit: QubitId, operators: Vec<Matrix2<C64>>) -> Result<Self> {
        let deviation = completeness_deviation(&operators);
        if deviation > INVARIANT_TOL {
            return Err(Error::NotTracePreserving { deviation });
        }
        Ok(Self { qubit, operators })
    }

    pub fn qubit(&self) -> QubitId {
        self.qubit
    }

    pub fn operators(&self) -> &[Matrix2<C64>] {
        &self.operators
    }

    /// The same channel retargeted at another qubit.
    pub fn on(&self, qubit: QubitId) -> Self {
        Self {
            qubit,
            operators: self.operators.clone(),
        }
    }

    pub fn completeness_deviation(&self) -> f64 {
        completeness_deviation(&self.operators)
    }

    /// Superoperator on the 2x2 block of the channel's qubit.
    pub fn compile(&self) -> BlockSuperop {
        let mut terms = Vec::new();
        for r in 0..2 {
            for c in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        let coeff: C64 = self
                            .operators
                            .iter()
                            .map(|k| k[(r, a)] * k[(c, b)].conj())
                            .sum();
                        if coeff != ZERO {
                            terms.push((2 * r + c, 2 * a + b, coeff));
                        }
                    }
                }
            }
        }
        BlockSuperop {
            qubit: self.qubit,
            terms,
        }
    }
}

fn completeness_deviation(ops: &[Matrix2<C64>]) -> f64 {
    let sum: Matrix2<C64> = ops.iter().map(|k| k.adjoint() * k).sum();
    (sum - Matrix2::identity())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Sparse 4x4 superoperator acting on `vec(B)` of each 2x2 qubit block,
/// stored as `(out, in, coefficient)` with the flattening `2*row + col`.
#[derive(Clone, Debug)]
pub struct BlockSuperop {
    qubit: QubitId,
    terms: Vec<(usize, usize, C64)>,
}

impl BlockSuperop {
    pub fn qubit(&self) -> QubitId {
        self.qubit
    }

    pub fn terms(&self) -> &[(usize, usize, C64)] {
        &self.terms
    }
}

/// Combined amplitude and phase damping over a duration `t`.
///
/// Excited population decays by `exp(-t/t1)` and the off-diagonal coherence
/// by `exp(-t/t2)`. Times share a unit; infinite times mean no decay. Built
/// for `D1` and retargeted with [`KrausChannel::on`].
pub fn damping_channel(t1: f64, t2: f64, t: f64) -> Result<KrausChannel> {
    check_coherence(t1, t2)?;
    if t.is_nan() || t < 0.0 {
        return Err(Error::InvalidDuration(t));
    }
    let decay_factor = |rate: f64| if rate == 0.0 { 1.0 } else { (-t * rate).exp() };
    let gamma = 1.0 - decay_factor(1.0 / t1);
    let f = decay_factor((1.0 / t2 - 0.5 / t1).max(0.0));

    let keep = C64::from((1.0 - gamma).sqrt());
    let decay = C64::from(gamma.sqrt());
    let amplitude = [
        Matrix2::new(ONE, ZERO, ZERO, keep),
        Matrix2::new(ZERO, decay, ZERO, ZERO),
    ];
    let phase = [
        Matrix2::identity() * C64::from(((1.0 + f) / 2.0).sqrt()),
        Matrix2::new(ONE, ZERO, ZERO, -ONE) * C64::from(((1.0 - f) / 2.0).sqrt()),
    ];
    let operators = amplitude
        .iter()
        .flat_map(|a| phase.iter().map(move |p| a * p))
        .filter(|k| k.iter().any(|z| *z != ZERO))
        .collect();
    KrausChannel::new(QubitId::D1, operators)
}

pub fn check_coherence(t1: f64, t2: f64) -> Result<()> {
    if t1.is_nan() || t2.is_nan() || t1 <= 0.0 || t2 <= 0.0 || t2 > 2.0 * t1 {
        return Err(Error::UnphysicalCoherence { t1, t2 });
    }
    Ok(())
}
