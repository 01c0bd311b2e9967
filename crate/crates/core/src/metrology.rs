//! Closed-form metrology for GHZ-diagonal probes.
//!
//! An `m = n*d` qubit probe is spread over `d` sensor nodes with `n` qubits
//! each. Parameters `x_i` are imprinted by `exp(-i sum_i x_i H_i)` with
//! `H_i = 1/2 sum_k Z_(i,k)`, and the quantity of interest is the normalized
//! average `theta_1 = v_1 . x` with `v_1 = (1, ..., 1)/sqrt(d)`.
//!
//! For every GHZ-diagonal probe the QFI matrix of `x` is `(1 - C) n^2` times
//! the all-ones matrix, where the probe-quality coefficient `C` only depends
//! on eigenvalue pairs that share a computational-basis support and differ by
//! their relative phase. Everything else in this module follows from that.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;

use crate::densmat::DensityMatrix;
use crate::error::{invalid_state, precondition};
use crate::math;
use crate::Result;

/// Eigenvalues below this are treated as exactly zero in `C` and QFIM sums.
pub const EIGENVALUE_CUTOFF: f64 = 1e-12;

/// Tolerance on the normalization of a [`GhzDiagonalState`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Largest register for which dense GHZ-diagonal constructors are offered.
pub const MAX_DENSE_QUBITS: u32 = 24;

/// Index of a GHZ basis state of an `m`-qubit register.
///
/// Value `2b` is `(|b> + |~b>)/sqrt 2` and `2b + 1` is `(|b> - |~b>)/sqrt 2`,
/// where `b < 2^(m-1)` and `~b = 2^m - 1 - b` is its bitwise complement.
/// Index 0 is the standard GHZ state and index 1 is `Z|GHZ>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GhzBasisIndex(u64);

impl GhzBasisIndex {
    pub fn new(value: u64, num_qubits: u32) -> Result<Self> {
        check_register(num_qubits)?;
        if value >> num_qubits != 0 {
            return Err(precondition!(
                "GHZ index {value} out of range for {num_qubits} qubits"
            ));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> u64 {
        self.0
    }

    /// The state with the same support and opposite relative phase.
    pub fn partner(self) -> Self {
        Self(self.0 ^ 1)
    }

    /// The smaller of the two computational basis labels in the support.
    pub fn bitstring(self) -> u64 {
        self.0 >> 1
    }

    pub fn is_plus(self) -> bool {
        self.0 & 1 == 0
    }
}

fn check_register(num_qubits: u32) -> Result<()> {
    if num_qubits == 0 || num_qubits > 63 {
        return Err(precondition!(
            "register size {num_qubits} outside supported range 1..=63"
        ));
    }
    Ok(())
}

/// A mixed state diagonal in the GHZ basis, stored sparsely.
#[derive(Debug, Clone, PartialEq)]
pub struct GhzDiagonalState {
    num_qubits: u32,
    eigenvalues: BTreeMap<GhzBasisIndex, f64>,
}

impl GhzDiagonalState {
    /// Builds a state from `(index, eigenvalue)` entries; absent indices are zero.
    pub fn new<I>(num_qubits: u32, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, f64)>,
    {
        check_register(num_qubits)?;
        let mut eigenvalues = BTreeMap::new();
        let mut total = 0.0;
        for (value, lambda) in entries {
            let index = GhzBasisIndex::new(value, num_qubits)?;
            if !lambda.is_finite() || lambda < 0.0 {
                return Err(invalid_state!("eigenvalue {lambda} at index {value} is negative"));
            }
            if eigenvalues.insert(index, lambda).is_some() {
                return Err(invalid_state!("duplicate GHZ index {value}"));
            }
            total += lambda;
        }
        if math::abs(total - 1.0) > NORMALIZATION_TOLERANCE {
            return Err(invalid_state!("eigenvalues sum to {total}, expected 1"));
        }
        eigenvalues.retain(|_, lambda| *lambda > 0.0);
        Ok(Self {
            num_qubits,
            eigenvalues,
        })
    }

    /// Builds a state from a dense eigenvalue vector of length `2^m`.
    pub fn from_dense(num_qubits: u32, eigenvalues: &[f64]) -> Result<Self> {
        check_dense(num_qubits)?;
        if eigenvalues.len() != 1usize << num_qubits {
            return Err(invalid_state!(
                "expected {} eigenvalues, found {}",
                1usize << num_qubits,
                eigenvalues.len()
            ));
        }
        Self::new(
            num_qubits,
            eigenvalues.iter().enumerate().map(|(i, &l)| (i as u64, l)),
        )
    }

    /// The pure GHZ state.
    pub fn pure(num_qubits: u32) -> Result<Self> {
        Self::new(num_qubits, [(0, 1.0)])
    }

    pub fn maximally_mixed(num_qubits: u32) -> Result<Self> {
        check_dense(num_qubits)?;
        let dim = 1u64 << num_qubits;
        let lambda = 1.0 / dim as f64;
        Self::new(num_qubits, (0..dim).map(|i| (i, lambda)))
    }

    /// Mixture of the GHZ state with white noise, parameterized by fidelity.
    pub fn depolarized(num_qubits: u32, fidelity: f64) -> Result<Self> {
        check_dense(num_qubits)?;
        check_probability(fidelity, "fidelity")?;
        let dim = 1u64 << num_qubits;
        let rest = (1.0 - fidelity) / (dim - 1) as f64;
        Self::new(
            num_qubits,
            (0..dim).map(|i| (i, if i == 0 { fidelity } else { rest })),
        )
    }

    /// `F |GHZ><GHZ| + (1-F) Z|GHZ><GHZ|Z`, the lowest-QFI state at fidelity `F`.
    pub fn rank2_dephased(num_qubits: u32, fidelity: f64) -> Result<Self> {
        check_probability(fidelity, "fidelity")?;
        Self::new(num_qubits, [(0, fidelity), (1, 1.0 - fidelity)])
    }

    pub fn num_qubits(&self) -> u32 {
        self.num_qubits
    }

    pub fn eigenvalue(&self, index: GhzBasisIndex) -> f64 {
        self.eigenvalues.get(&index).copied().unwrap_or(0.0)
    }

    /// Overlap with the standard GHZ state.
    pub fn fidelity(&self) -> f64 {
        self.eigenvalue(GhzBasisIndex(0))
    }

    /// Nonzero eigenvalues in index order.
    pub fn iter(&self) -> impl Iterator<Item = (GhzBasisIndex, f64)> + '_ {
        self.eigenvalues.iter().map(|(&i, &l)| (i, l))
    }

    /// Dense eigenvalue vector (only for small registers).
    pub fn to_dense(&self) -> Result<Vec<f64>> {
        check_dense(self.num_qubits)?;
        let mut dense = alloc::vec![0.0; 1usize << self.num_qubits];
        for (index, lambda) in self.iter() {
            dense[index.value() as usize] = lambda;
        }
        Ok(dense)
    }
}

fn check_dense(num_qubits: u32) -> Result<()> {
    check_register(num_qubits)?;
    if num_qubits > MAX_DENSE_QUBITS {
        return Err(precondition!(
            "dense GHZ-diagonal construction limited to {MAX_DENSE_QUBITS} qubits"
        ));
    }
    Ok(())
}

fn check_probability(value: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(precondition!("{what} {value} outside [0, 1]"));
    }
    Ok(())
}

/// Probe-quality coefficient `C` of a GHZ-diagonal state.
///
/// `C = sum over ordered partner pairs (a, b) of 2 l_a l_b / (l_a + l_b)`; each
/// unordered pair is visited once and doubled. Lies in `[0, 1]`, and equals 1
/// iff every partner pair carries equal weight.
pub fn c_coefficient(state: &GhzDiagonalState) -> f64 {
    let mut sum = 0.0;
    for (index, lambda_a) in state.iter() {
        let partner = index.partner();
        let lambda_b = state.eigenvalue(partner);
        // visit each unordered pair once: from its even member, or from the
        // odd member when the even one is absent (then the term is zero anyway)
        if !index.is_plus() && lambda_b > 0.0 {
            continue;
        }
        if lambda_a < EIGENVALUE_CUTOFF || lambda_b < EIGENVALUE_CUTOFF {
            continue;
        }
        sum += 2.0 * lambda_a * lambda_b / (lambda_a + lambda_b);
    }
    2.0 * sum
}

/// Layout of the sensing task: `d` nodes with `n` qubit sensors each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SensingProblem {
    num_nodes: usize,
    sensors_per_node: usize,
}

impl SensingProblem {
    pub fn new(num_nodes: usize, sensors_per_node: usize) -> Result<Self> {
        if num_nodes == 0 || sensors_per_node == 0 {
            return Err(precondition!(
                "sensing problem needs d >= 1 and n >= 1, got d={num_nodes}, n={sensors_per_node}"
            ));
        }
        Ok(Self {
            num_nodes,
            sensors_per_node,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn sensors_per_node(&self) -> usize {
        self.sensors_per_node
    }

    pub fn num_qubits(&self) -> usize {
        self.num_nodes * self.sensors_per_node
    }

    /// `v_1 = (1, ..., 1)/sqrt(d)`.
    pub fn direction_vector(&self) -> Vec<f64> {
        let entry = 1.0 / math::sqrt(self.num_nodes as f64);
        alloc::vec![entry; self.num_nodes]
    }
}

fn check_c(c: f64) -> Result<()> {
    if !(-1e-12..=1.0 + 1e-12).contains(&c) {
        return Err(precondition!("C = {c} outside [0, 1]"));
    }
    Ok(())
}

/// QFI for the average parameter: `d (1 - C) n^2`.
pub fn qfi_average(c: f64, problem: &SensingProblem) -> Result<f64> {
    check_c(c)?;
    let n = problem.sensors_per_node() as f64;
    Ok(problem.num_nodes() as f64 * (1.0 - c) * n * n)
}

/// Full `d x d` QFI matrix of the local parameters, `(1 - C) n^2` times ones.
pub fn qfim_local(c: f64, problem: &SensingProblem) -> Result<DMatrix<f64>> {
    check_c(c)?;
    let n = problem.sensors_per_node() as f64;
    let d = problem.num_nodes();
    Ok(DMatrix::from_element(d, d, (1.0 - c) * n * n))
}

/// `1 - C` for an `m`-qubit depolarized GHZ state of fidelity `fidelity`.
///
/// Uses `1 - C = (F - 2^-m)^2 / ([(1 - 2^(1-m)) F + 2^-m] (1 - 2^-m))`, which
/// stays finite for registers far beyond `f64` range of `4^m`.
pub fn depolarized_one_minus_c(fidelity: f64, num_qubits: u32) -> f64 {
    let u = math::inv_pow2(num_qubits);
    let gap = fidelity - u;
    gap * gap / (((1.0 - 2.0 * u) * fidelity + u) * (1.0 - u))
}

/// `C` for an `m`-qubit depolarized GHZ state,
/// `(1-F)(4^m F + 2^m - 2) / ([(2^m - 2) F + 1](2^m - 1))`.
pub fn depolarized_c(fidelity: f64, num_qubits: u32) -> f64 {
    1.0 - depolarized_one_minus_c(fidelity, num_qubits)
}

/// Depolarized `nd`-qubit probe whose fidelity decays as `k^(n-1) F` when
/// local sensors are entangled with imperfect gates of quality `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepolarizedGhzModel {
    fidelity: f64,
    num_nodes: usize,
    sensors_per_node: usize,
    local_gen_quality: f64,
}

impl DepolarizedGhzModel {
    pub fn new(
        fidelity: f64,
        num_nodes: usize,
        sensors_per_node: usize,
        local_gen_quality: f64,
    ) -> Result<Self> {
        if !(fidelity > 0.0 && fidelity <= 1.0) {
            return Err(precondition!("fidelity {fidelity} outside (0, 1]"));
        }
        if num_nodes < 2 {
            return Err(precondition!("need at least 2 sensor nodes, got {num_nodes}"));
        }
        if sensors_per_node == 0 {
            return Err(precondition!("need at least one sensor per node"));
        }
        if !(local_gen_quality > 0.0 && local_gen_quality <= 1.0) {
            return Err(precondition!(
                "local generation quality {local_gen_quality} outside (0, 1]"
            ));
        }
        Ok(Self {
            fidelity,
            num_nodes,
            sensors_per_node,
            local_gen_quality,
        })
    }

    /// Noiseless local entanglement generation (`k = 1`).
    pub fn noiseless(fidelity: f64, num_nodes: usize, sensors_per_node: usize) -> Result<Self> {
        Self::new(fidelity, num_nodes, sensors_per_node, 1.0)
    }

    pub fn fidelity(&self) -> f64 {
        self.fidelity
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn sensors_per_node(&self) -> usize {
        self.sensors_per_node
    }

    pub fn local_gen_quality(&self) -> f64 {
        self.local_gen_quality
    }

    pub fn num_qubits(&self) -> u32 {
        (self.num_nodes * self.sensors_per_node) as u32
    }

    /// Fidelity of the extended `nd`-qubit probe, `k^(n-1) F`.
    pub fn effective_fidelity(&self) -> f64 {
        let exponent = (self.sensors_per_node - 1) as f64;
        math::powf(self.local_gen_quality, exponent) * self.fidelity
    }

    pub fn c_coefficient(&self) -> f64 {
        depolarized_c(self.effective_fidelity(), self.num_qubits())
    }

    pub fn one_minus_c(&self) -> f64 {
        depolarized_one_minus_c(self.effective_fidelity(), self.num_qubits())
    }

    /// Relative advantage `d (1 - C)` over the optimal local strategy.
    pub fn eta(&self) -> f64 {
        self.num_nodes as f64 * self.one_minus_c()
    }

    /// QFI for the average, `d (1 - C) n^2`.
    pub fn qfi_average(&self) -> f64 {
        let n = self.sensors_per_node as f64;
        self.eta() * n * n
    }
}

/// `eta = d (1 - C_dp(F, d, n, k))`; values above 1 mean quantum advantage.
pub fn eta_depolarized(model: &DepolarizedGhzModel) -> f64 {
    model.eta()
}

fn check_nodes(num_nodes: usize) -> Result<()> {
    if num_nodes < 2 {
        return Err(precondition!(
            "distributed sensing requires d >= 2, got {num_nodes}"
        ));
    }
    Ok(())
}

/// Fidelity below which a depolarized `nd`-qubit GHZ probe has `eta <= 1`.
pub fn threshold_dp(num_nodes: usize, sensors_per_node: usize) -> Result<f64> {
    check_nodes(num_nodes)?;
    if sensors_per_node == 0 {
        return Err(precondition!("need at least one sensor per node"));
    }
    let d = num_nodes as f64;
    let r = math::inv_pow2((num_nodes * sensors_per_node) as u32);
    let shifted = 1.0 - 2.0 * r;
    let root = math::sqrt(shifted * shifted + 8.0 * d * r);
    Ok(r + (1.0 - r) * (shifted + root) / (2.0 * d))
}

/// Threshold for the rank-2 dephased probe, `(1 + sqrt d) / (2 sqrt d)`.
pub fn threshold_rank2(num_nodes: usize) -> Result<f64> {
    check_nodes(num_nodes)?;
    let root = math::sqrt(num_nodes as f64);
    Ok((1.0 + root) / (2.0 * root))
}

/// Smallest QFI of any `d`-qubit GHZ-diagonal state with fidelity `F`:
/// `d (2F - 1)^2`.
pub fn qfi_lower_bound(fidelity: f64, num_nodes: usize) -> Result<f64> {
    check_nodes(num_nodes)?;
    if !(fidelity > 0.0 && fidelity <= 1.0) {
        return Err(precondition!("fidelity {fidelity} outside (0, 1]"));
    }
    let excess = 2.0 * fidelity - 1.0;
    Ok(num_nodes as f64 * excess * excess)
}

/// Estimate of the largest useful number of sensors per node and its
/// sensitivities to `F` and `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmaxEstimate {
    /// `-ln(dF) / ln k`.
    pub n_max: f64,
    /// `d n_max / dF = -1 / (F ln k)`.
    pub sensitivity_fidelity: f64,
    /// `d n_max / dk = ln(dF) / (k ln^2 k)`.
    pub sensitivity_quality: f64,
}

impl NmaxEstimate {
    /// `S_k / S_F = -F ln(dF) / (k ln k)`.
    pub fn sensitivity_ratio(&self) -> f64 {
        self.sensitivity_quality / self.sensitivity_fidelity
    }
}

pub fn n_max_estimate(num_nodes: usize, fidelity: f64, quality: f64) -> Result<NmaxEstimate> {
    check_nodes(num_nodes)?;
    if !(quality > 0.0 && quality < 1.0) {
        return Err(precondition!("local generation quality {quality} outside (0, 1)"));
    }
    let product = num_nodes as f64 * fidelity;
    if product <= 1.0 {
        return Err(crate::Error::NoAdvantagePossible(product));
    }
    let ln_k = math::ln(quality);
    let ln_df = math::ln(product);
    Ok(NmaxEstimate {
        n_max: -ln_df / ln_k,
        sensitivity_fidelity: -1.0 / (fidelity * ln_k),
        sensitivity_quality: ln_df / (quality * ln_k * ln_k),
    })
}

/// Largest `n <= n_limit` with `eta_dp(F, d, n, k) > 1`, scanning every `n`.
pub fn advantage_crossing(
    fidelity: f64,
    num_nodes: usize,
    quality: f64,
    n_limit: usize,
) -> Result<Option<usize>> {
    let mut last = None;
    for n in 1..=n_limit {
        let model = DepolarizedGhzModel::new(fidelity, num_nodes, n, quality)?;
        if model.eta() > 1.0 {
            last = Some(n);
        }
    }
    Ok(last)
}

/// Relative performance `1 - C_local` of the local strategy in which every node
/// probes its own parameter with an `n`-qubit depolarized GHZ state of
/// fidelity `k^((n-1)/d)`.
pub fn eta_local_imperfect(num_nodes: usize, sensors_per_node: usize, quality: f64) -> Result<f64> {
    check_nodes(num_nodes)?;
    if sensors_per_node == 0 {
        return Err(precondition!("need at least one sensor per node"));
    }
    if !(quality > 0.0 && quality <= 1.0) {
        return Err(precondition!("local generation quality {quality} outside (0, 1]"));
    }
    let exponent = (sensors_per_node - 1) as f64 / num_nodes as f64;
    let local_fidelity = math::powf(quality, exponent);
    Ok(depolarized_one_minus_c(local_fidelity, sensors_per_node as u32))
}

/// `eta_global / eta_local` for the imperfect-local-generation comparison.
pub fn global_local_ratio(model: &DepolarizedGhzModel) -> Result<f64> {
    let local = eta_local_imperfect(
        model.num_nodes(),
        model.sensors_per_node(),
        model.local_gen_quality(),
    )?;
    Ok(model.eta() / local)
}

/// Per-shot variance from error propagation, or a divergence marker where the
/// slope of the signal vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AzimuthalVariance {
    Finite(f64),
    Divergent,
}

impl AzimuthalVariance {
    pub fn value(self) -> Option<f64> {
        match self {
            Self::Finite(v) => Some(v),
            Self::Divergent => None,
        }
    }

    pub fn is_divergent(self) -> bool {
        matches!(self, Self::Divergent)
    }
}

// sin^2 below this is a zero slope; covers sin(k*pi) round-off.
const SLOPE_FLOOR: f64 = f64::EPSILON * f64::EPSILON;

/// Signal contrast `A = F - (1-F)/(2^m - 1)` of a depolarized `m`-qubit probe
/// under the product observable `O(alpha)^m`.
pub fn azimuthal_contrast(fidelity: f64, num_qubits: u32) -> f64 {
    let r = math::inv_pow2(num_qubits);
    fidelity - (1.0 - fidelity) * r / (1.0 - r)
}

/// Error-propagation variance of `theta_1` for a depolarized probe measured
/// with `O(alpha)` on every qubit:
/// `[1 - A^2 cos^2 phi] / [d n^2 A^2 sin^2 phi]`, `phi = n sqrt(d) (theta_1 + sqrt(d) alpha)`.
pub fn azimuthal_variance(
    fidelity: f64,
    num_nodes: usize,
    sensors_per_node: usize,
    alpha: f64,
    theta1: f64,
) -> Result<AzimuthalVariance> {
    check_nodes(num_nodes)?;
    if sensors_per_node == 0 {
        return Err(precondition!("need at least one sensor per node"));
    }
    if !(fidelity > 0.0 && fidelity <= 1.0) {
        return Err(precondition!("fidelity {fidelity} outside (0, 1]"));
    }
    let d = num_nodes as f64;
    let n = sensors_per_node as f64;
    let root_d = math::sqrt(d);
    let contrast = azimuthal_contrast(fidelity, (num_nodes * sensors_per_node) as u32);
    let phase = n * root_d * (theta1 + root_d * alpha);
    let (sin, cos) = (math::sin(phase), math::cos(phase));
    let slope = d * n * n * contrast * contrast * sin * sin;
    if sin * sin <= SLOPE_FLOOR || slope == 0.0 {
        return Ok(AzimuthalVariance::Divergent);
    }
    let noise = 1.0 - contrast * contrast * cos * cos;
    Ok(AzimuthalVariance::Finite(noise / slope))
}

/// Small-signal variance for the `d`-qubit rank-2 dephased probe:
/// `[1 - (2F-1)^2 cos^2(d alpha)] / [d (2F-1)^2 sin^2(d alpha)]`.
pub fn rank2_azimuthal_variance(
    fidelity: f64,
    num_nodes: usize,
    alpha: f64,
) -> Result<AzimuthalVariance> {
    check_nodes(num_nodes)?;
    check_probability(fidelity, "fidelity")?;
    let d = num_nodes as f64;
    let contrast = 2.0 * fidelity - 1.0;
    let (sin, cos) = (math::sin(d * alpha), math::cos(d * alpha));
    let slope = d * contrast * contrast * sin * sin;
    if sin * sin <= SLOPE_FLOOR || slope == 0.0 {
        return Ok(AzimuthalVariance::Divergent);
    }
    Ok(AzimuthalVariance::Finite(
        (1.0 - contrast * contrast * cos * cos) / slope,
    ))
}

/// Optimized azimuthal measurement for a given layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AzimuthalOptimum {
    pub num_nodes: usize,
    pub sensors_per_node: usize,
    /// `pi / (2 n d)`; every odd multiple of it is equally optimal.
    pub alpha_opt: f64,
    /// `(2^(nd) + sqrt(d) - 1) / (2^(nd) sqrt(d))`.
    pub fidelity_threshold: f64,
}

impl AzimuthalOptimum {
    /// Minimal variance at `theta_1 = 0`, `1 / (d A^2 n^2)`.
    pub fn min_variance(&self, fidelity: f64) -> f64 {
        let contrast = azimuthal_contrast(
            fidelity,
            (self.num_nodes * self.sensors_per_node) as u32,
        );
        let n = self.sensors_per_node as f64;
        1.0 / (self.num_nodes as f64 * contrast * contrast * n * n)
    }

    /// `eta` reached by the optimized local measurement, `d A^2`.
    pub fn eta(&self, fidelity: f64) -> f64 {
        let contrast = azimuthal_contrast(
            fidelity,
            (self.num_nodes * self.sensors_per_node) as u32,
        );
        self.num_nodes as f64 * contrast * contrast
    }

    /// Whether `alpha` is an optimal angle, i.e. `n d alpha` is an odd multiple of `pi/2`.
    pub fn is_optimal(&self, alpha: f64, tolerance: f64) -> bool {
        let period = PI / (self.num_nodes * self.sensors_per_node) as f64;
        let offset = (alpha - self.alpha_opt).rem_euclid(period);
        offset < tolerance || period - offset < tolerance
    }
}

pub fn optimal_azimuthal(sensors_per_node: usize, num_nodes: usize) -> Result<AzimuthalOptimum> {
    check_nodes(num_nodes)?;
    if sensors_per_node == 0 {
        return Err(precondition!("need at least one sensor per node"));
    }
    let m = num_nodes * sensors_per_node;
    let root_d = math::sqrt(num_nodes as f64);
    let r = math::inv_pow2(m as u32);
    Ok(AzimuthalOptimum {
        num_nodes,
        sensors_per_node,
        alpha_opt: PI / (2.0 * m as f64),
        fidelity_threshold: (1.0 + (root_d - 1.0) * r) / root_d,
    })
}

/// Readout assumed when converting a GHZ threshold into a Bell-pair threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measurement {
    /// QCRB-saturating measurement.
    Optimal,
    /// Optimized product azimuthal measurement.
    Azimuthal,
}

/// Bell-pair fidelity needed when `d-1` pairs are fused into a `d`-qubit GHZ
/// probe whose fidelity is approximated by the product of pair fidelities.
pub fn bell_pair_threshold(num_nodes: usize, measurement: Measurement) -> Result<f64> {
    let ghz = match measurement {
        Measurement::Optimal => threshold_dp(num_nodes, 1)?,
        Measurement::Azimuthal => optimal_azimuthal(1, num_nodes)?.fidelity_threshold,
    };
    Ok(math::powf(ghz, 1.0 / (num_nodes - 1) as f64))
}

/// `d x d` orthonormal matrix whose first row is `v_1`; rows are the derived
/// parameter directions. Built by Gram-Schmidt on `v_1, e_0, e_1, ...`.
pub fn orthonormal_extension(num_nodes: usize) -> Result<DMatrix<f64>> {
    check_nodes(num_nodes)?;
    let d = num_nodes;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(d);
    rows.push(alloc::vec![1.0 / math::sqrt(d as f64); d]);
    for axis in 0..d {
        if rows.len() == d {
            break;
        }
        let mut candidate = alloc::vec![0.0; d];
        candidate[axis] = 1.0;
        // two projection passes keep the rows orthogonal to ~1e-16
        for _ in 0..2 {
            for row in &rows {
                let overlap: f64 = row.iter().zip(&candidate).map(|(a, b)| a * b).sum();
                for (c, r) in candidate.iter_mut().zip(row) {
                    *c -= overlap * r;
                }
            }
        }
        let norm = math::sqrt(candidate.iter().map(|c| c * c).sum());
        if norm < 1e-8 {
            continue;
        }
        candidate.iter_mut().for_each(|c| *c /= norm);
        rows.push(candidate);
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

/// QFI matrix of the local parameters computed from the spectral decomposition
/// of `rho` with generators `H_i = 1/2 sum_k Z_(i,k)`.
///
/// `F_ij = 2 sum_(a,b) (l_a - l_b)^2 / (l_a + l_b) Re(<a|H_i|b><b|H_j|a>)`,
/// restricted to pairs with `l_a + l_b` above [`EIGENVALUE_CUTOFF`]; eigenvalues
/// below the cutoff count as zero.
pub fn qfim_numeric(rho: &DensityMatrix, problem: &SensingProblem) -> Result<DMatrix<f64>> {
    let q = rho.num_qubits();
    if q != problem.num_qubits() {
        return Err(crate::Error::LayoutMismatch {
            expected: problem.num_qubits(),
            found: q,
        });
    }
    rho.validate()?;
    let (values, vectors) = rho.eigh();
    let dim = values.len();
    let lambdas: Vec<f64> = values
        .iter()
        .map(|&l| if l < EIGENVALUE_CUTOFF { 0.0 } else { l })
        .collect();
    let n = problem.sensors_per_node();
    let d = problem.num_nodes();

    // generator matrices in the eigenbasis: V^dagger H_i V (H_i is diagonal)
    let mut generators = Vec::with_capacity(d);
    for node in 0..d {
        let diag: Vec<f64> = (0..dim)
            .map(|basis| {
                (0..n)
                    .map(|k| {
                        let qubit = node * n + k;
                        if (basis >> (q - 1 - qubit)) & 1 == 0 {
                            0.5
                        } else {
                            -0.5
                        }
                    })
                    .sum()
            })
            .collect();
        let weighted = DMatrix::from_fn(dim, dim, |row, col| vectors[(row, col)] * diag[row]);
        generators.push(vectors.adjoint() * weighted);
    }

    let mut qfim = DMatrix::zeros(d, d);
    for a in 0..dim {
        for b in 0..dim {
            let sum = lambdas[a] + lambdas[b];
            if sum < EIGENVALUE_CUTOFF {
                continue;
            }
            let diff = lambdas[a] - lambdas[b];
            let weight = 2.0 * diff * diff / sum;
            if weight == 0.0 {
                continue;
            }
            for i in 0..d {
                for j in i..d {
                    let term = (generators[i][(a, b)] * generators[j][(b, a)]).re;
                    qfim[(i, j)] += weight * term;
                }
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            qfim[(i, j)] = qfim[(j, i)];
        }
    }
    Ok(qfim)
}
