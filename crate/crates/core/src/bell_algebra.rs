//! Closed-form maps on Bell-diagonal states.
//!
//! A [`BellDiagonalState`] is a probability vector over
//! `(Phi+, Phi-, Psi+, Psi-)`. With that ordering a Pauli acting on either
//! qubit permutes the vector by XOR on the index: `X -> ^2`, `Z -> ^1`,
//! `Y -> ^3`.
//!
//! Noise models: a noisy two-qubit gate is applied perfectly with probability
//! `p` and otherwise fully depolarizes the pair it acts on; a noisy single-qubit
//! measurement reports the correct outcome with probability `eta`.

use crate::error::{invalid_state, precondition};
use crate::math;
use crate::Result;

const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// Bell-diagonal two-qubit state together with the simulation time at which
/// it was last brought up to date.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellDiagonalState {
    lambdas: [f64; 4],
    pub last_update_time: f64,
}

impl BellDiagonalState {
    pub fn new(lambdas: [f64; 4]) -> Result<Self> {
        Self::at_time(lambdas, 0.0)
    }

    pub fn at_time(lambdas: [f64; 4], time: f64) -> Result<Self> {
        let mut total = 0.0;
        for (i, &l) in lambdas.iter().enumerate() {
            if !l.is_finite() || l < -SIMPLEX_TOLERANCE {
                return Err(invalid_state!("Bell-diagonal component {i} is {l}"));
            }
            total += l;
        }
        if math::abs(total - 1.0) > SIMPLEX_TOLERANCE {
            return Err(invalid_state!("Bell-diagonal components sum to {total}"));
        }
        Ok(Self {
            lambdas: lambdas.map(|l| l.max(0.0)),
            last_update_time: time,
        })
    }

    /// Trusted constructor for outputs of maps that preserve the simplex.
    pub(crate) fn from_raw(lambdas: [f64; 4], time: f64) -> Self {
        Self {
            lambdas: lambdas.map(|l| l.max(0.0)),
            last_update_time: time,
        }
    }

    /// `F Phi+ + (1-F)/3 (Phi- + Psi+ + Psi-)`.
    pub fn werner(fidelity: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fidelity) {
            return Err(precondition!("fidelity {fidelity} outside [0, 1]"));
        }
        let rest = (1.0 - fidelity) / 3.0;
        Self::new([fidelity, rest, rest, rest])
    }

    pub fn perfect() -> Self {
        Self::from_raw([1.0, 0.0, 0.0, 0.0], 0.0)
    }

    pub fn maximally_mixed() -> Self {
        Self::from_raw([0.25; 4], 0.0)
    }

    pub fn lambdas(&self) -> [f64; 4] {
        self.lambdas
    }

    /// Overlap with `Phi+`.
    pub fn fidelity(&self) -> f64 {
        self.lambdas[0]
    }

    pub fn is_entangled(&self) -> bool {
        self.lambdas.iter().any(|&l| l > 0.5)
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.last_update_time = time;
        self
    }

    /// Effect of the bilateral `Rx(pi/2)` / `Rx(-pi/2)` rotation that precedes
    /// each DEJMPS round: `Phi-` and `Psi-` swap places.
    pub fn dejmps_rotated(&self) -> Self {
        let [a, b, c, d] = self.lambdas;
        Self::from_raw([a, d, c, b], self.last_update_time)
    }
}

/// Idle-memory noise: a continuous-time Pauli channel on one qubit.
///
/// The pattern `(w_x, w_y, w_z)` sets the relative Pauli rates
/// `gamma_i = 3 w_i / (4 tau)`. For the uniform pattern this is depolarizing
/// noise with error probability `3/4 (1 - exp(-t/tau))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryErrorModel {
    coherence_time: f64,
    pattern: [f64; 3],
}

impl MemoryErrorModel {
    pub fn new(coherence_time: f64, pattern: [f64; 3]) -> Result<Self> {
        if !(coherence_time > 0.0) {
            return Err(precondition!("coherence time {coherence_time} must be positive"));
        }
        if pattern.iter().any(|&w| !(w >= 0.0)) {
            return Err(precondition!("memory error pattern {pattern:?} has negative weight"));
        }
        let total: f64 = pattern.iter().sum();
        if math::abs(total - 1.0) > SIMPLEX_TOLERANCE {
            return Err(precondition!("memory error pattern sums to {total}"));
        }
        Ok(Self {
            coherence_time,
            pattern,
        })
    }

    pub fn depolarizing(coherence_time: f64) -> Result<Self> {
        Self::new(coherence_time, [1.0 / 3.0; 3])
    }

    /// A memory that never decoheres.
    pub fn ideal() -> Self {
        Self {
            coherence_time: f64::INFINITY,
            pattern: [1.0 / 3.0; 3],
        }
    }

    pub fn coherence_time(&self) -> f64 {
        self.coherence_time
    }

    pub fn pattern(&self) -> [f64; 3] {
        self.pattern
    }

    /// Probabilities of `(I, X, Y, Z)` after idling for `dt`.
    pub fn pauli_probabilities(&self, dt: f64) -> [f64; 4] {
        if dt == 0.0 || self.coherence_time.is_infinite() {
            return [1.0, 0.0, 0.0, 0.0];
        }
        let scale = 3.0 * dt / (4.0 * self.coherence_time);
        let [wx, wy, wz] = self.pattern;
        // Pauli-transfer eigenvalues: each axis decays under the other two rates
        let lx = math::exp(-2.0 * scale * (wy + wz));
        let ly = math::exp(-2.0 * scale * (wx + wz));
        let lz = math::exp(-2.0 * scale * (wx + wy));
        [
            (1.0 + lx + ly + lz) / 4.0,
            (1.0 + lx - ly - lz) / 4.0,
            (1.0 - lx + ly - lz) / 4.0,
            (1.0 - lx - ly + lz) / 4.0,
        ]
    }

    /// Total error probability `1 - p_I` after idling for `dt`.
    pub fn error_probability(&self, dt: f64) -> f64 {
        1.0 - self.pauli_probabilities(dt)[0]
    }
}

impl Default for MemoryErrorModel {
    fn default() -> Self {
        Self::ideal()
    }
}

/// Gate and measurement quality at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperationErrorModel {
    pub gate_fidelity: f64,
    pub measurement_fidelity: f64,
}

impl OperationErrorModel {
    pub fn new(gate_fidelity: f64, measurement_fidelity: f64) -> Result<Self> {
        for (value, what) in [
            (gate_fidelity, "gate fidelity"),
            (measurement_fidelity, "measurement fidelity"),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(precondition!("{what} {value} outside [0, 1]"));
            }
        }
        Ok(Self {
            gate_fidelity,
            measurement_fidelity,
        })
    }

    pub fn perfect() -> Self {
        Self {
            gate_fidelity: 1.0,
            measurement_fidelity: 1.0,
        }
    }
}

impl Default for OperationErrorModel {
    fn default() -> Self {
        Self::perfect()
    }
}

// index of (I, X, Y, Z) as an XOR mask on the Bell index
const PAULI_MASK: [usize; 4] = [0, 2, 3, 1];

fn apply_pauli_channel(lambdas: [f64; 4], probs: [f64; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (pauli, &prob) in probs.iter().enumerate() {
        for (index, &l) in lambdas.iter().enumerate() {
            out[index ^ PAULI_MASK[pauli]] += prob * l;
        }
    }
    out
}

/// Idles qubit `a` for `dt_a` and qubit `b` for `dt_b` in their memories.
/// The returned state keeps the input's `last_update_time`.
pub fn decohere(
    state: &BellDiagonalState,
    dt_a: f64,
    dt_b: f64,
    mem_a: &MemoryErrorModel,
    mem_b: &MemoryErrorModel,
) -> Result<BellDiagonalState> {
    if !(dt_a >= 0.0) || !(dt_b >= 0.0) {
        return Err(precondition!("negative idle time ({dt_a}, {dt_b})"));
    }
    let after_a = apply_pauli_channel(state.lambdas, mem_a.pauli_probabilities(dt_a));
    let after_b = apply_pauli_channel(after_a, mem_b.pauli_probabilities(dt_b));
    Ok(BellDiagonalState::from_raw(after_b, state.last_update_time))
}

/// Brings a state forward to `now`, both qubits having idled since its last update.
pub fn decohere_to(
    state: &BellDiagonalState,
    now: f64,
    mem_a: &MemoryErrorModel,
    mem_b: &MemoryErrorModel,
) -> Result<BellDiagonalState> {
    let dt = now - state.last_update_time;
    Ok(decohere(state, dt, dt, mem_a, mem_b)?.with_time(now))
}

fn check_unit(value: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(precondition!("{what} {value} outside [0, 1]"));
    }
    Ok(())
}

/// Noisy entanglement swap of `left = (A, B1)` and `right = (B2, C)` at the
/// middle node, with Pauli feed-forward to `Phi+`.
///
/// `gate_fidelity` is the CNOT quality at the middle node; `eta1` and `eta2`
/// are the fidelities of the measurements on `B1` (after the Hadamard) and `B2`.
pub fn swap(
    left: &BellDiagonalState,
    right: &BellDiagonalState,
    gate_fidelity: f64,
    eta1: f64,
    eta2: f64,
) -> Result<BellDiagonalState> {
    check_unit(gate_fidelity, "gate fidelity")?;
    check_unit(eta1, "measurement fidelity")?;
    check_unit(eta2, "measurement fidelity")?;
    let [l1, l2, l3, l4] = left.lambdas;
    let [r1, r2, r3, r4] = right.lambdas;
    let c_i = l1 * r1 + l2 * r2 + l3 * r3 + l4 * r4;
    let c_x = l1 * r2 + l2 * r1 + l3 * r4 + l4 * r3;
    let c_y = l1 * r4 + l4 * r1 + l2 * r3 + l3 * r2;
    let c_z = l1 * r3 + l3 * r1 + l2 * r4 + l4 * r2;
    let (a, b) = (eta1, 1.0 - eta1);
    let (c, d) = (eta2, 1.0 - eta2);
    let p = gate_fidelity;
    let noise = (1.0 - p) / 4.0;
    let out = [
        p * (a * c * c_i + b * c * c_x + a * d * c_z + b * d * c_y) + noise,
        p * (b * c * c_i + a * c * c_x + b * d * c_z + a * d * c_y) + noise,
        p * (a * d * c_i + b * d * c_x + a * c * c_z + b * c * c_y) + noise,
        p * (b * d * c_i + a * d * c_x + b * c * c_z + a * c * c_y) + noise,
    ];
    let time = left.last_update_time.max(right.last_update_time);
    Ok(BellDiagonalState::from_raw(out, time))
}

/// Result of one recurrence-purification round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurifyOutcome {
    /// Kept pair conditioned on success.
    pub state: BellDiagonalState,
    pub success_prob: f64,
    /// `Phi+` component of `state`.
    pub fidelity: f64,
}

/// Bilocal-CNOT recurrence purification: CNOT from each `kept` qubit onto the
/// local `measured` qubit, computational-basis measurement of the latter, and
/// success when both outcomes agree.
pub fn purify(
    kept: &BellDiagonalState,
    measured: &BellDiagonalState,
    gates: (f64, f64),
    meas: (f64, f64),
) -> Result<PurifyOutcome> {
    let (p_a, p_b) = gates;
    let (eta_a, eta_b) = meas;
    check_unit(p_a, "gate fidelity")?;
    check_unit(p_b, "gate fidelity")?;
    check_unit(eta_a, "measurement fidelity")?;
    check_unit(eta_b, "measurement fidelity")?;
    let [l1, l2, l3, l4] = kept.lambdas;
    let [m1, m2, m3, m4] = measured.lambdas;
    let agree = eta_a * eta_b + (1.0 - eta_a) * (1.0 - eta_b);
    let flip = eta_a + eta_b - 2.0 * eta_a * eta_b;
    let pp = p_a * p_b;
    let noise = (1.0 - pp) / 8.0;
    let unnormalized = [
        pp * (agree * (l1 * m1 + l2 * m2) + flip * (l1 * m3 + l2 * m4)) + noise,
        pp * (agree * (l1 * m2 + l2 * m1) + flip * (l1 * m4 + l2 * m3)) + noise,
        pp * (agree * (l3 * m3 + l4 * m4) + flip * (l3 * m1 + l4 * m2)) + noise,
        pp * (agree * (l3 * m4 + l4 * m3) + flip * (l3 * m2 + l4 * m1)) + noise,
    ];
    let success_prob: f64 = unnormalized.iter().sum();
    let state = BellDiagonalState::from_raw(
        unnormalized.map(|x| x / success_prob),
        kept.last_update_time.max(measured.last_update_time),
    );
    Ok(PurifyOutcome {
        state,
        success_prob,
        fidelity: state.fidelity(),
    })
}
