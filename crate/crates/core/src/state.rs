use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::ops::{BlockSuperop, KrausChannel, SparseOperator, UnitaryOp, C64};
use crate::qubit::{QubitId, DIM};
use crate::rng::TrajectoryRng;

/// Smallest outcome probability a projection may renormalize by.
pub const MIN_PROJECTION_PROBABILITY: f64 = 1e-15;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Dense density matrix of the five-qubit register, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    elements: Vec<C64>,
}

impl DensityMatrix {
    /// Pure computational basis state `|index><index|`.
    pub fn basis(index: usize) -> Self {
        assert!(index < DIM, "basis index {index} out of range");
        let mut elements = vec![ZERO; DIM * DIM];
        elements[index * DIM + index] = C64::new(1.0, 0.0);
        Self { elements }
    }

    /// `|psi><psi|` for a (not necessarily normalized) state vector.
    pub fn from_pure(psi: &[C64]) -> Self {
        assert_eq!(psi.len(), DIM);
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        let mut elements = vec![ZERO; DIM * DIM];
        for i in 0..DIM {
            for j in 0..DIM {
                elements[i * DIM + j] = psi[i] * psi[j].conj() / norm;
            }
        }
        Self { elements }
    }

    pub fn from_matrix(m: &DMatrix<C64>) -> Self {
        assert_eq!((m.nrows(), m.ncols()), (DIM, DIM));
        let elements = (0..DIM * DIM).map(|k| m[(k / DIM, k % DIM)]).collect();
        Self { elements }
    }

    pub fn to_matrix(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(DIM, DIM, &self.elements)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.elements[row * DIM + col]
    }

    pub fn trace(&self) -> C64 {
        (0..DIM).map(|i| self.get(i, i)).sum()
    }

    /// Max-norm of `rho - rho^dagger`.
    pub fn hermiticity_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..DIM {
            for j in i..DIM {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue; `O(n^3)`, meant for tests.
    pub fn min_eigenvalue(&self) -> f64 {
        let m = self.to_matrix();
        let hermitian = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        hermitian
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Max-norm distance to another state.
    pub fn distance(&self, other: &DensityMatrix) -> f64 {
        self.elements
            .iter()
            .zip(&other.elements)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Probability that `q` reads 1.
    pub fn excited_probability(&self, q: QubitId) -> f64 {
        let mask = q.mask();
        (0..DIM)
            .filter(|i| i & mask != 0)
            .map(|i| self.get(i, i).re)
            .sum()
    }

    /// Reduced single-qubit state of `q` as `[[r00, r01], [r10, r11]]`.
    pub fn reduced(&self, q: QubitId) -> [[C64; 2]; 2] {
        let mask = q.mask();
        let mut out = [[ZERO; 2]; 2];
        for i in (0..DIM).filter(|i| i & mask == 0) {
            out[0][0] += self.get(i, i);
            out[0][1] += self.get(i, i | mask);
            out[1][0] += self.get(i | mask, i);
            out[1][1] += self.get(i | mask, i | mask);
        }
        out
    }

    /// `rho -> U rho U^dagger` with the unitary embedded on the register.
    pub fn apply_unitary(&mut self, u: &UnitaryOp) {
        self.apply_sparse(&u.embed());
    }

    /// `rho -> U rho U^dagger` for a precompiled full-register operator.
    pub fn apply_sparse(&mut self, u: &SparseOperator) {
        let rows = u.rows();
        let mut left = vec![ZERO; DIM * DIM];
        for (i, row) in rows.iter().enumerate() {
            let out = &mut left[i * DIM..(i + 1) * DIM];
            for &(k, v) in row {
                let src = &self.elements[k * DIM..(k + 1) * DIM];
                for (o, s) in out.iter_mut().zip(src) {
                    *o += v * s;
                }
            }
        }
        for i in 0..DIM {
            let src = &left[i * DIM..(i + 1) * DIM];
            for (j, row) in rows.iter().enumerate() {
                self.elements[i * DIM + j] = row.iter().map(|&(l, v)| src[l] * v.conj()).sum();
            }
        }
    }

    pub fn apply_channel(&mut self, ch: &KrausChannel) {
        self.apply_superop(&ch.compile());
    }

    /// Applies a compiled single-qubit channel by local contraction over the
    /// qubit's 2x2 blocks.
    pub fn apply_superop(&mut self, op: &BlockSuperop) {
        let mask = op.qubit().mask();
        for i in (0..DIM).filter(|i| i & mask == 0) {
            for j in (0..DIM).filter(|j| j & mask == 0) {
                let idx = [
                    i * DIM + j,
                    i * DIM + (j | mask),
                    (i | mask) * DIM + j,
                    (i | mask) * DIM + (j | mask),
                ];
                let block = idx.map(|k| self.elements[k]);
                let mut out = [ZERO; 4];
                for &(o, a, c) in op.terms() {
                    out[o] += c * block[a];
                }
                for (k, v) in idx.iter().zip(out) {
                    self.elements[*k] = v;
                }
            }
        }
    }

    /// X conjugation on `q`; a pure index permutation.
    pub fn apply_pauli_x(&mut self, q: QubitId) {
        let mask = q.mask();
        let old = self.elements.clone();
        for i in 0..DIM {
            for j in 0..DIM {
                self.elements[i * DIM + j] = old[(i ^ mask) * DIM + (j ^ mask)];
            }
        }
    }

    /// Projects `q` onto `outcome` and renormalizes.
    pub fn project(&mut self, q: QubitId, outcome: u8) -> Result<()> {
        let mask = q.mask();
        let wanted = if outcome == 1 { mask } else { 0 };
        let p1 = self.excited_probability(q);
        let probability = if outcome == 1 { p1 } else { 1.0 - p1 };
        if probability < MIN_PROJECTION_PROBABILITY {
            return Err(Error::DegenerateProjection {
                qubit: q,
                outcome,
                probability,
            });
        }
        let scale = 1.0 / probability;
        for i in 0..DIM {
            for j in 0..DIM {
                let e = &mut self.elements[i * DIM + j];
                if i & mask == wanted && j & mask == wanted {
                    *e *= scale;
                } else {
                    *e = ZERO;
                }
            }
        }
        Ok(())
    }

    /// Stochastic projective measurement of `q` in the computational basis.
    ///
    /// Consumes exactly one uniform draw: the outcome is 1 iff the draw falls
    /// below the excited-state probability.
    pub fn measure(&mut self, q: QubitId, rng: &mut TrajectoryRng) -> Result<u8> {
        let p1 = self.excited_probability(q);
        let outcome = u8::from(rng.uniform() < p1);
        self.project(q, outcome)?;
        Ok(outcome)
    }

    /// Checks the trace and Hermiticity invariants at `tol`.
    pub fn check(&self, tol: f64) -> std::result::Result<(), String> {
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > tol {
            return Err(format!("trace {tr} deviates from 1"));
        }
        let h = self.hermiticity_deviation();
        if h > tol {
            return Err(format!("hermiticity deviation {h:.3e}"));
        }
        Ok(())
    }
}
