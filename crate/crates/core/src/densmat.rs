//! Dense density matrices on at most [`MAX_QUBITS`] qubits.
//!
//! Qubit 0 is the most significant bit of a basis index. Noisy two-qubit
//! gates apply the ideal unitary with probability `p` and otherwise replace
//! the pair by `I/4`; noisy measurements use the POVM
//! `E_i = eta |i><i| + (1 - eta) |1-i><1-i|`. Single-qubit gates are perfect.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

use crate::bell_algebra::BellDiagonalState;
use crate::error::{invalid_state, precondition};
use crate::math;
use crate::metrology::{GhzDiagonalState, SensingProblem};
use crate::{Error, Result};

pub const MAX_QUBITS: usize = 6;

/// Tolerance for the Hermiticity, trace and positivity checks.
pub const VALIDATION_TOLERANCE: f64 = 1e-9;

pub type Matrix = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn pauli_x() -> Matrix {
    Matrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> Matrix {
    let i = Complex64::new(0.0, 1.0);
    Matrix::from_row_slice(2, 2, &[ZERO, -i, i, ZERO])
}

pub fn pauli_z() -> Matrix {
    Matrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

pub fn hadamard() -> Matrix {
    let s = c(1.0 / math::sqrt(2.0));
    Matrix::from_row_slice(2, 2, &[s, s, s, -s])
}

/// CNOT with the first listed qubit as control.
pub fn cnot() -> Matrix {
    let mut m = Matrix::zeros(4, 4);
    m[(0, 0)] = ONE;
    m[(1, 1)] = ONE;
    m[(2, 3)] = ONE;
    m[(3, 2)] = ONE;
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementBasis {
    Computational,
    /// Eigenbasis of `X`; outcome 0 is `|+>`.
    X,
}

/// Gate and measurement quality at the node performing an operation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisySpec {
    pub cnot_fidelity: f64,
    pub measurement_fidelity: f64,
}

impl NoisySpec {
    pub fn new(cnot_fidelity: f64, measurement_fidelity: f64) -> Result<Self> {
        check_unit(cnot_fidelity, "CNOT fidelity")?;
        check_unit(measurement_fidelity, "measurement fidelity")?;
        Ok(Self {
            cnot_fidelity,
            measurement_fidelity,
        })
    }

    pub fn perfect() -> Self {
        Self {
            cnot_fidelity: 1.0,
            measurement_fidelity: 1.0,
        }
    }
}

fn check_unit(value: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(precondition!("{what} {value} outside [0, 1]"));
    }
    Ok(())
}

/// One outcome of a measurement, with the normalized post-measurement state
/// (absent when the outcome has zero probability).
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBranch {
    pub outcome: u8,
    pub probability: f64,
    pub state: Option<DensityMatrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    num_qubits: usize,
    data: Matrix,
}

fn check_size(num_qubits: usize) -> Result<()> {
    if num_qubits == 0 {
        return Err(precondition!("density matrix needs at least one qubit"));
    }
    if num_qubits > MAX_QUBITS {
        return Err(Error::UnsupportedScale {
            qubits: num_qubits,
            cap: MAX_QUBITS,
        });
    }
    Ok(())
}

#[inline]
fn shift(num_qubits: usize, qubit: usize) -> usize {
    num_qubits - 1 - qubit
}

impl DensityMatrix {
    /// Validates `data`, clipping eigenvalues in `[-1e-9, 0)` to zero.
    pub fn new(num_qubits: usize, data: Matrix) -> Result<Self> {
        check_size(num_qubits)?;
        let dim = 1usize << num_qubits;
        if data.nrows() != dim || data.ncols() != dim {
            return Err(invalid_state!(
                "{}x{} matrix for {num_qubits} qubits",
                data.nrows(),
                data.ncols()
            ));
        }
        let rho = Self { num_qubits, data };
        rho.check_hermitian_and_trace()?;
        let (values, vectors) = rho.eigh();
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -VALIDATION_TOLERANCE {
            return Err(invalid_state!("negative eigenvalue {min}"));
        }
        if min >= 0.0 {
            return Ok(rho);
        }
        let clipped: Vec<f64> = values.iter().map(|&v| v.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        let diag = Matrix::from_diagonal(&nalgebra::DVector::from_iterator(
            dim,
            clipped.iter().map(|&v| c(v / total)),
        ));
        let data = &vectors * diag * vectors.adjoint();
        Ok(Self { num_qubits, data })
    }

    fn from_raw(num_qubits: usize, data: Matrix) -> Self {
        Self { num_qubits, data }
    }

    fn check_hermitian_and_trace(&self) -> Result<()> {
        let dim = self.dim();
        for i in 0..dim {
            for j in i..dim {
                let gap = (self.data[(i, j)] - self.data[(j, i)].conj()).norm();
                if gap > VALIDATION_TOLERANCE {
                    return Err(invalid_state!("not Hermitian at ({i}, {j}): gap {gap}"));
                }
            }
        }
        let trace = self.data.trace();
        if (trace - ONE).norm() > VALIDATION_TOLERANCE {
            return Err(invalid_state!("trace {trace} differs from 1"));
        }
        Ok(())
    }

    /// Re-checks all invariants.
    pub fn validate(&self) -> Result<()> {
        self.check_hermitian_and_trace()?;
        let min = self.eigh().0.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -VALIDATION_TOLERANCE {
            return Err(invalid_state!("negative eigenvalue {min}"));
        }
        Ok(())
    }

    pub fn from_pure(amplitudes: &[Complex64]) -> Result<Self> {
        let dim = amplitudes.len();
        if !dim.is_power_of_two() || dim < 2 {
            return Err(precondition!("state vector length {dim} is not a power of two"));
        }
        let num_qubits = dim.trailing_zeros() as usize;
        check_size(num_qubits)?;
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if math::abs(norm - 1.0) > VALIDATION_TOLERANCE {
            return Err(invalid_state!("state vector norm^2 {norm}"));
        }
        let data = Matrix::from_fn(dim, dim, |i, j| amplitudes[i] * amplitudes[j].conj());
        Ok(Self::from_raw(num_qubits, data))
    }

    /// Computational basis state `|index>`.
    pub fn basis_state(num_qubits: usize, index: usize) -> Result<Self> {
        check_size(num_qubits)?;
        let dim = 1usize << num_qubits;
        if index >= dim {
            return Err(precondition!("basis index {index} out of range"));
        }
        let mut data = Matrix::zeros(dim, dim);
        data[(index, index)] = ONE;
        Ok(Self::from_raw(num_qubits, data))
    }

    /// `(|0...0> + |1...1>) / sqrt 2`.
    pub fn ghz(num_qubits: usize) -> Result<Self> {
        check_size(num_qubits)?;
        let dim = 1usize << num_qubits;
        let mut amplitudes = vec![ZERO; dim];
        let s = c(1.0 / math::sqrt(2.0));
        amplitudes[0] = s;
        amplitudes[dim - 1] = s;
        Self::from_pure(&amplitudes)
    }

    pub fn maximally_mixed(num_qubits: usize) -> Result<Self> {
        check_size(num_qubits)?;
        let dim = 1usize << num_qubits;
        Ok(Self::from_raw(
            num_qubits,
            Matrix::from_diagonal_element(dim, dim, c(1.0 / dim as f64)),
        ))
    }

    pub fn from_bell_diagonal(state: &BellDiagonalState) -> Self {
        let [l1, l2, l3, l4] = state.lambdas();
        let mut data = Matrix::zeros(4, 4);
        data[(0, 0)] = c((l1 + l2) / 2.0);
        data[(3, 3)] = c((l1 + l2) / 2.0);
        data[(0, 3)] = c((l1 - l2) / 2.0);
        data[(3, 0)] = c((l1 - l2) / 2.0);
        data[(1, 1)] = c((l3 + l4) / 2.0);
        data[(2, 2)] = c((l3 + l4) / 2.0);
        data[(1, 2)] = c((l3 - l4) / 2.0);
        data[(2, 1)] = c((l3 - l4) / 2.0);
        Self::from_raw(2, data)
    }

    pub fn from_ghz_diagonal(state: &GhzDiagonalState) -> Result<Self> {
        let q = state.num_qubits() as usize;
        check_size(q)?;
        let dim = 1usize << q;
        let mut data = Matrix::zeros(dim, dim);
        for (index, lambda) in state.iter() {
            let b = index.bitstring() as usize;
            let flipped = dim - 1 - b;
            let sign = if index.is_plus() { 1.0 } else { -1.0 };
            data[(b, b)] += c(lambda / 2.0);
            data[(flipped, flipped)] += c(lambda / 2.0);
            data[(b, flipped)] += c(sign * lambda / 2.0);
            data[(flipped, b)] += c(sign * lambda / 2.0);
        }
        Ok(Self::from_raw(q, data))
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.num_qubits
    }

    pub fn matrix(&self) -> &Matrix {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        self.data.trace().re
    }

    /// Eigenvalues (ascending) and the matching unitary of eigenvectors as columns.
    pub fn eigh(&self) -> (Vec<f64>, Matrix) {
        let eig = SymmetricEigen::new(self.data.clone());
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = Matrix::from_fn(self.dim(), self.dim(), |r, col| {
            eig.eigenvectors[(r, order[col])]
        });
        (values, vectors)
    }

    /// `self (x) other`, with `self`'s qubits first.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let q = self.num_qubits + other.num_qubits;
        check_size(q)?;
        Ok(Self::from_raw(q, self.data.kronecker(&other.data)))
    }

    /// Reorders qubits so that new qubit `k` is old qubit `order[k]`.
    pub fn permute(&self, order: &[usize]) -> Result<Self> {
        let q = self.num_qubits;
        let mut seen = vec![false; q];
        if order.len() != q {
            return Err(precondition!("permutation of length {} for {q} qubits", order.len()));
        }
        for &o in order {
            if o >= q || seen[o] {
                return Err(precondition!("invalid qubit permutation {order:?}"));
            }
            seen[o] = true;
        }
        let map = |new: usize| -> usize {
            let mut old = 0;
            for (k, &o) in order.iter().enumerate() {
                old |= ((new >> shift(q, k)) & 1) << shift(q, o);
            }
            old
        };
        let index: Vec<usize> = (0..self.dim()).map(map).collect();
        let data = Matrix::from_fn(self.dim(), self.dim(), |i, j| self.data[(index[i], index[j])]);
        Ok(Self::from_raw(q, data))
    }

    fn check_qubits(&self, qubits: &[usize]) -> Result<()> {
        for (k, &qubit) in qubits.iter().enumerate() {
            if qubit >= self.num_qubits {
                return Err(precondition!(
                    "qubit {qubit} out of range for {} qubits",
                    self.num_qubits
                ));
            }
            if qubits[..k].contains(&qubit) {
                return Err(precondition!("qubit {qubit} listed twice"));
            }
        }
        Ok(())
    }

    /// Embeds a `2^k x 2^k` operator acting on `qubits` (first listed is most
    /// significant) into the full register.
    fn embed(&self, op: &Matrix, qubits: &[usize]) -> Matrix {
        let q = self.num_qubits;
        let dim = self.dim();
        let mask: usize = qubits.iter().map(|&k| 1 << shift(q, k)).sum();
        let sub = |full: usize| -> usize {
            qubits
                .iter()
                .fold(0, |acc, &k| (acc << 1) | ((full >> shift(q, k)) & 1))
        };
        Matrix::from_fn(dim, dim, |i, j| {
            if i & !mask != j & !mask {
                ZERO
            } else {
                op[(sub(i), sub(j))]
            }
        })
    }

    pub fn apply_unitary(&self, unitary: &Matrix, qubits: &[usize]) -> Result<Self> {
        self.check_qubits(qubits)?;
        let k = qubits.len();
        if unitary.nrows() != 1 << k || unitary.ncols() != 1 << k {
            return Err(precondition!("operator size does not match {k} qubits"));
        }
        let gap = (unitary * unitary.adjoint() - Matrix::identity(1 << k, 1 << k))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if gap > VALIDATION_TOLERANCE {
            return Err(precondition!("operator is not unitary (deviation {gap})"));
        }
        Ok(self.conjugate(&self.embed(unitary, qubits)))
    }

    fn conjugate(&self, full: &Matrix) -> Self {
        Self::from_raw(self.num_qubits, full * &self.data * full.adjoint())
    }

    /// Replaces the listed qubits by the maximally mixed state.
    pub fn depolarize(&self, qubits: &[usize]) -> Result<Self> {
        self.check_qubits(qubits)?;
        let q = self.num_qubits;
        let mask: usize = qubits.iter().map(|&k| 1 << shift(q, k)).sum();
        let settings: Vec<usize> = (0..self.dim()).filter(|s| s & !mask == 0).collect();
        let weight = 1.0 / settings.len() as f64;
        let data = Matrix::from_fn(self.dim(), self.dim(), |i, j| {
            if i & mask != j & mask {
                return ZERO;
            }
            let (ri, rj) = (i & !mask, j & !mask);
            settings
                .iter()
                .map(|&s| self.data[(ri | s, rj | s)])
                .sum::<Complex64>()
                * weight
        });
        Ok(Self::from_raw(q, data))
    }

    /// `p CNOT rho CNOT + (1 - p) I/4 (x) tr_(c,t) rho`.
    pub fn noisy_cnot(&self, control: usize, target: usize, fidelity: f64) -> Result<Self> {
        check_unit(fidelity, "CNOT fidelity")?;
        let ideal = self.apply_unitary(&cnot(), &[control, target])?;
        if fidelity == 1.0 {
            return Ok(ideal);
        }
        let noisy = self.depolarize(&[control, target])?;
        Ok(Self::from_raw(
            self.num_qubits,
            ideal.data * c(fidelity) + noisy.data * c(1.0 - fidelity),
        ))
    }

    /// Unnormalized post-measurement operators for outcomes 0 and 1.
    fn measure_raw(&self, qubit: usize, basis: MeasurementBasis, eta: f64) -> [Matrix; 2] {
        let q = self.num_qubits;
        let rotated = match basis {
            MeasurementBasis::Computational => self.data.clone(),
            MeasurementBasis::X => self.conjugate(&self.embed(&hadamard(), &[qubit])).data,
        };
        let bit = 1 << shift(q, qubit);
        // project onto the qubit's value v: keep entries where both indices have bit = v
        let project = |v: usize| -> Matrix {
            Matrix::from_fn(self.dim(), self.dim(), |i, j| {
                if (i & bit != 0) as usize == v && (j & bit != 0) as usize == v {
                    rotated[(i, j)]
                } else {
                    ZERO
                }
            })
        };
        let (p0, p1) = (project(0), project(1));
        let mut branches = [
            &p0 * c(eta) + &p1 * c(1.0 - eta),
            &p1 * c(eta) + &p0 * c(1.0 - eta),
        ];
        if basis == MeasurementBasis::X {
            let h = self.embed(&hadamard(), &[qubit]);
            for branch in &mut branches {
                *branch = &h * &*branch * h.adjoint();
            }
        }
        branches
    }

    /// Both outcomes of a noisy single-qubit measurement.
    pub fn noisy_measure_branches(
        &self,
        qubit: usize,
        basis: MeasurementBasis,
        eta: f64,
    ) -> Result<[MeasurementBranch; 2]> {
        self.check_qubits(&[qubit])?;
        check_unit(eta, "measurement fidelity")?;
        let [b0, b1] = self.measure_raw(qubit, basis, eta);
        let make = |outcome: u8, raw: Matrix| {
            let probability = raw.trace().re.max(0.0);
            let state = (probability > 0.0)
                .then(|| Self::from_raw(self.num_qubits, raw * c(1.0 / probability)));
            MeasurementBranch {
                outcome,
                probability,
                state,
            }
        };
        Ok([make(0, b0), make(1, b1)])
    }

    /// Samples a noisy single-qubit measurement.
    pub fn noisy_measure<R: Rng + ?Sized>(
        &self,
        qubit: usize,
        basis: MeasurementBasis,
        eta: f64,
        rng: &mut R,
    ) -> Result<MeasurementBranch> {
        let [b0, b1] = self.noisy_measure_branches(qubit, basis, eta)?;
        let draw: f64 = rng.gen();
        Ok(if draw < b0.probability { b0 } else { b1 })
    }

    /// Traces out the listed qubits; the remaining ones keep their order.
    pub fn partial_trace(&self, traced: &[usize]) -> Result<Self> {
        self.check_qubits(traced)?;
        let q = self.num_qubits;
        if traced.len() == q {
            return Err(precondition!("cannot trace out every qubit"));
        }
        let kept: Vec<usize> = (0..q).filter(|k| !traced.contains(k)).collect();
        let compose = |kept_bits: usize, traced_bits: usize| -> usize {
            let mut full = 0;
            for (pos, &k) in kept.iter().enumerate() {
                full |= ((kept_bits >> (kept.len() - 1 - pos)) & 1) << shift(q, k);
            }
            for (pos, &k) in traced.iter().enumerate() {
                full |= ((traced_bits >> (traced.len() - 1 - pos)) & 1) << shift(q, k);
            }
            full
        };
        let reduced_dim = 1 << kept.len();
        let traced_dim = 1 << traced.len();
        let data = Matrix::from_fn(reduced_dim, reduced_dim, |i, j| {
            (0..traced_dim)
                .map(|t| self.data[(compose(i, t), compose(j, t))])
                .sum()
        });
        Ok(Self::from_raw(kept.len(), data))
    }

    /// `Re tr(rho O)` for a full-register observable.
    pub fn expectation(&self, observable: &Matrix) -> Result<f64> {
        if observable.nrows() != self.dim() || observable.ncols() != self.dim() {
            return Err(precondition!("observable size does not match the register"));
        }
        Ok((&self.data * observable).trace().re)
    }

    /// Conjugates by `exp(-i sum_i x_i H_i)` with `H_i = 1/2 sum_k Z_(i,k)`.
    pub fn encode_phases(&self, x: &[f64], problem: &SensingProblem) -> Result<Self> {
        let q = self.num_qubits;
        if problem.num_qubits() != q {
            return Err(Error::LayoutMismatch {
                expected: problem.num_qubits(),
                found: q,
            });
        }
        if x.len() != problem.num_nodes() {
            return Err(precondition!(
                "{} phases for {} nodes",
                x.len(),
                problem.num_nodes()
            ));
        }
        let n = problem.sensors_per_node();
        let phase = |basis: usize| -> f64 {
            (0..q)
                .map(|qubit| {
                    let z = if (basis >> shift(q, qubit)) & 1 == 0 { 0.5 } else { -0.5 };
                    x[qubit / n] * z
                })
                .sum()
        };
        let phases: Vec<f64> = (0..self.dim()).map(phase).collect();
        let data = Matrix::from_fn(self.dim(), self.dim(), |i, j| {
            let angle = -(phases[i] - phases[j]);
            self.data[(i, j)] * Complex64::new(math::cos(angle), math::sin(angle))
        });
        Ok(Self::from_raw(q, data))
    }

    /// `<O(alpha)^(x)q>` with `O(alpha) = e^(i alpha)|1><0| + e^(-i alpha)|0><1|`.
    pub fn azimuthal_observable_expectation(&self, alpha: f64) -> f64 {
        let q = self.num_qubits;
        let dim = self.dim();
        (0..dim)
            .map(|b| {
                let ones = b.count_ones() as f64;
                let angle = alpha * (q as f64 - 2.0 * ones);
                let phase = Complex64::new(math::cos(angle), math::sin(angle));
                (self.data[(b, dim - 1 - b)] * phase).re
            })
            .sum()
    }

    /// Projects onto the GHZ-basis diagonal.
    pub fn ghz_twirl(&self) -> Result<GhzDiagonalState> {
        let dim = self.dim();
        let mut eigenvalues = Vec::with_capacity(dim);
        for b in 0..dim / 2 {
            let flipped = dim - 1 - b;
            let pop = self.data[(b, b)].re + self.data[(flipped, flipped)].re;
            let coherence = self.data[(b, flipped)].re + self.data[(flipped, b)].re;
            eigenvalues.push(((pop + coherence) / 2.0).max(0.0));
            eigenvalues.push(((pop - coherence) / 2.0).max(0.0));
        }
        let total: f64 = eigenvalues.iter().sum();
        eigenvalues.iter_mut().for_each(|l| *l /= total);
        GhzDiagonalState::from_dense(self.num_qubits as u32, &eigenvalues)
    }

    /// `<GHZ| rho |GHZ>`.
    pub fn fidelity_to_ghz(&self) -> f64 {
        let last = self.dim() - 1;
        (self.data[(0, 0)].re + self.data[(last, last)].re + 2.0 * self.data[(0, last)].re) / 2.0
    }

    /// Bell-basis diagonal of a two-qubit state.
    pub fn bell_diagonal(&self) -> Result<BellDiagonalState> {
        if self.num_qubits != 2 {
            return Err(Error::LayoutMismatch {
                expected: 2,
                found: self.num_qubits,
            });
        }
        let d = &self.data;
        let phi = |sign: f64| (d[(0, 0)].re + d[(3, 3)].re + sign * 2.0 * d[(0, 3)].re) / 2.0;
        let psi = |sign: f64| (d[(1, 1)].re + d[(2, 2)].re + sign * 2.0 * d[(1, 2)].re) / 2.0;
        let lambdas = [phi(1.0), phi(-1.0), psi(1.0), psi(-1.0)].map(|l| l.max(0.0));
        let total: f64 = lambdas.iter().sum();
        BellDiagonalState::new(lambdas.map(|l| l / total))
    }

    fn weighted_sum<'a, I>(num_qubits: usize, parts: I) -> Self
    where
        I: IntoIterator<Item = (f64, &'a DensityMatrix)>,
    {
        let dim = 1 << num_qubits;
        let data = parts
            .into_iter()
            .fold(Matrix::zeros(dim, dim), |acc, (w, rho)| acc + &rho.data * c(w));
        Self::from_raw(num_qubits, data)
    }

    /// Probability-weighted average of branch states.
    pub fn mix(branches: &[MeasurementBranch]) -> Result<Self> {
        let first = branches
            .iter()
            .find_map(|b| b.state.as_ref())
            .ok_or(Error::EmptyInput)?;
        let q = first.num_qubits;
        Ok(Self::weighted_sum(
            q,
            branches
                .iter()
                .filter_map(|b| b.state.as_ref().map(|s| (b.probability, s))),
        ))
    }

    /// Outcome-resolved GHZ merge of `GHZ_N (x) GHZ_M`, where the first
    /// `first_len = N` qubits form one block. CNOT from qubit `N-1` onto
    /// qubit `N`, noisy measurement of qubit `N`, and on outcome 1 an `X` on
    /// the smaller of the two sides (`min(N, M-1)` flips). The measured qubit
    /// is removed.
    pub fn ghz_merge_branches(
        &self,
        first_len: usize,
        noise: &NoisySpec,
    ) -> Result<[MeasurementBranch; 2]> {
        let q = self.num_qubits;
        if first_len == 0 || first_len >= q {
            return Err(precondition!("merge split {first_len} invalid for {q} qubits"));
        }
        let second_len = q - first_len;
        let entangled = self.noisy_cnot(first_len - 1, first_len, noise.cnot_fidelity)?;
        let branches = entangled.noisy_measure_branches(
            first_len,
            MeasurementBasis::Computational,
            noise.measurement_fidelity,
        )?;
        let flips: Vec<usize> = if first_len <= second_len - 1 {
            (0..first_len).collect()
        } else {
            (first_len + 1..q).collect()
        };
        let mut out = Vec::with_capacity(2);
        for branch in branches {
            let state = match branch.state {
                Some(mut state) => {
                    if branch.outcome == 1 {
                        for &k in &flips {
                            state = state.apply_unitary(&pauli_x(), &[k])?;
                        }
                    }
                    Some(state.partial_trace(&[first_len])?)
                }
                None => None,
            };
            out.push(MeasurementBranch {
                outcome: branch.outcome,
                probability: branch.probability,
                state,
            });
        }
        let [b0, b1]: [MeasurementBranch; 2] = out.try_into().expect("two branches");
        Ok([b0, b1])
    }

    /// Branch-averaged GHZ merge, see [`Self::ghz_merge_branches`].
    pub fn ghz_merge(&self, first_len: usize, noise: &NoisySpec) -> Result<Self> {
        Self::mix(&self.ghz_merge_branches(first_len, noise)?)
    }

    /// Outcome-resolved teleported CNOT from `control` onto `target` using the
    /// Bell pair `(bell_control, bell_target)`, where `bell_control` sits with
    /// `control` and `bell_target` with `target`:
    ///
    /// 1. CNOT `control -> bell_control`, measure `bell_control` (Z);
    ///    outcome 1 applies `X` to `bell_target`.
    /// 2. CNOT `bell_target -> target`, measure `bell_target` (X);
    ///    outcome 1 applies `Z` to `control`.
    ///
    /// Both Bell qubits are traced out. Branch outcomes are `2 m1 + m2`.
    pub fn cnot_teleport_branches(
        &self,
        control: usize,
        bell_control: usize,
        bell_target: usize,
        target: usize,
        noise: &NoisySpec,
    ) -> Result<Vec<MeasurementBranch>> {
        self.check_qubits(&[control, bell_control, bell_target, target])?;
        let eta = noise.measurement_fidelity;
        let step1 = self.noisy_cnot(control, bell_control, noise.cnot_fidelity)?;
        let mut out = Vec::with_capacity(4);
        for first in step1.noisy_measure_branches(bell_control, MeasurementBasis::Computational, eta)? {
            let Some(mut state) = first.state else {
                out.push(MeasurementBranch { outcome: 2 * first.outcome, probability: 0.0, state: None });
                out.push(MeasurementBranch { outcome: 2 * first.outcome + 1, probability: 0.0, state: None });
                continue;
            };
            if first.outcome == 1 {
                state = state.apply_unitary(&pauli_x(), &[bell_target])?;
            }
            let step2 = state.noisy_cnot(bell_target, target, noise.cnot_fidelity)?;
            for second in step2.noisy_measure_branches(bell_target, MeasurementBasis::X, eta)? {
                let outcome = 2 * first.outcome + second.outcome;
                let probability = first.probability * second.probability;
                let state = match second.state {
                    Some(mut s) => {
                        if second.outcome == 1 {
                            s = s.apply_unitary(&pauli_z(), &[control])?;
                        }
                        Some(s.partial_trace(&[bell_control, bell_target])?)
                    }
                    None => None,
                };
                out.push(MeasurementBranch { outcome, probability, state });
            }
        }
        Ok(out)
    }

    /// Branch-averaged teleported CNOT, see [`Self::cnot_teleport_branches`].
    pub fn cnot_teleport(
        &self,
        control: usize,
        bell_control: usize,
        bell_target: usize,
        target: usize,
        noise: &NoisySpec,
    ) -> Result<Self> {
        Self::mix(&self.cnot_teleport_branches(control, bell_control, bell_target, target, noise)?)
    }
}

/// Circuit-level evaluation of a noisy entanglement swap on qubits
/// `[A, B1, B2, C]`: noisy CNOT `B1 -> B2`, Hadamard on `B1`, noisy
/// measurements of both, Pauli correction on `C` (`01 -> X`, `10 -> Z`,
/// `11 -> Y`), summed over all outcomes.
pub fn swap_oracle(
    left: &BellDiagonalState,
    right: &BellDiagonalState,
    gate_fidelity: f64,
    eta1: f64,
    eta2: f64,
) -> Result<BellDiagonalState> {
    let rho = DensityMatrix::from_bell_diagonal(left).tensor(&DensityMatrix::from_bell_diagonal(right))?;
    let rho = rho
        .noisy_cnot(1, 2, gate_fidelity)?
        .apply_unitary(&hadamard(), &[1])?;
    let mut total = Matrix::zeros(4, 4);
    for b1 in rho.noisy_measure_branches(1, MeasurementBasis::Computational, eta1)? {
        let Some(after1) = b1.state else { continue };
        for b2 in after1.noisy_measure_branches(2, MeasurementBasis::Computational, eta2)? {
            let Some(mut state) = b2.state else { continue };
            let correction = match (b1.outcome, b2.outcome) {
                (0, 0) => None,
                (0, 1) => Some(pauli_x()),
                (1, 0) => Some(pauli_z()),
                _ => Some(pauli_y()),
            };
            if let Some(pauli) = correction {
                state = state.apply_unitary(&pauli, &[3])?;
            }
            let reduced = state.partial_trace(&[1, 2])?;
            total += reduced.data * c(b1.probability * b2.probability);
        }
    }
    DensityMatrix::from_raw(2, total).bell_diagonal()
}

/// Circuit-level evaluation of bilocal-CNOT purification on qubits
/// `[A1, B1, A2, B2]` with `(A1, B1)` kept: noisy CNOTs `A1 -> A2` and
/// `B1 -> B2`, noisy measurements of `A2` and `B2`, postselection on equal
/// outcomes. Returns the conditional kept state and the success probability.
pub fn purify_oracle(
    kept: &BellDiagonalState,
    measured: &BellDiagonalState,
    gates: (f64, f64),
    meas: (f64, f64),
) -> Result<(BellDiagonalState, f64)> {
    // build in pair order [A1, B1, A2, B2]
    let rho = DensityMatrix::from_bell_diagonal(kept).tensor(&DensityMatrix::from_bell_diagonal(measured))?;
    let rho = rho.noisy_cnot(0, 2, gates.0)?.noisy_cnot(1, 3, gates.1)?;
    let mut total = Matrix::zeros(4, 4);
    let mut success = 0.0;
    for ba in rho.noisy_measure_branches(2, MeasurementBasis::Computational, meas.0)? {
        let Some(after_a) = ba.state else { continue };
        for bb in after_a.noisy_measure_branches(3, MeasurementBasis::Computational, meas.1)? {
            if ba.outcome != bb.outcome {
                continue;
            }
            let Some(state) = bb.state else { continue };
            let weight = ba.probability * bb.probability;
            success += weight;
            total += state.partial_trace(&[2, 3])?.data * c(weight);
        }
    }
    if success <= 0.0 {
        return Err(invalid_state!("purification never succeeds"));
    }
    let out = DensityMatrix::from_raw(2, total * c(1.0 / success)).bell_diagonal()?;
    Ok((out, success))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AssemblyMethod {
    /// Teleported CNOTs from a central data qubit.
    Teleportation,
    /// Successive GHZ merges of Bell pairs.
    Merging,
}

/// Resources needed to build an `N`-qubit GHZ state from Bell pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResourceCount {
    pub qubits: usize,
    pub single_qubit_measurements: usize,
    pub two_qubit_gates: usize,
    /// Expected number of feed-forward single-qubit gates.
    pub avg_single_qubit_gates: f64,
}

pub fn resource_estimate(method: AssemblyMethod, num_qubits: usize) -> Result<ResourceCount> {
    if num_qubits < 2 {
        return Err(precondition!("GHZ assembly needs N >= 2, got {num_qubits}"));
    }
    let n = num_qubits;
    Ok(match method {
        AssemblyMethod::Teleportation => ResourceCount {
            qubits: 3 * n - 2,
            single_qubit_measurements: 2 * n - 2,
            two_qubit_gates: 2 * n - 2,
            avg_single_qubit_gates: (n - 1) as f64,
        },
        AssemblyMethod::Merging => ResourceCount {
            qubits: 2 * n - 2,
            single_qubit_measurements: n - 1,
            two_qubit_gates: n - 1,
            avg_single_qubit_gates: (n - 1) as f64 / 2.0,
        },
    })
}
