//! Combining estimators when entanglement distribution is probabilistic.
//!
//! In a given round some nodes may end up without a share of the probe. The
//! set of such isolated nodes is a [`Configuration`]. Isolated nodes estimate
//! their own parameter locally, the rest share an entangled probe, and the
//! per-configuration estimates of `theta_1` are combined with inverse-variance
//! weights. All estimators are assumed uncorrelated.

use alloc::vec::Vec;

use crate::error::precondition;
use crate::math;
use crate::{Error, Result};

/// Set of isolated nodes out of `d`, with the number of rounds it occurred in.
///
/// A set of size `d - 1` leaves a single node "entangled" with nobody, so it is
/// stored as the all-isolated configuration.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Configuration {
    num_nodes: usize,
    isolated: Vec<usize>,
    pub sample_count: u64,
}

impl Configuration {
    pub fn new<I>(num_nodes: usize, isolated: I, sample_count: u64) -> Result<Self>
    where
        I: IntoIterator<Item = usize>,
    {
        if num_nodes < 2 {
            return Err(precondition!("configurations need d >= 2, got {num_nodes}"));
        }
        let mut isolated: Vec<usize> = isolated.into_iter().collect();
        if let Some(&index) = isolated.iter().find(|&&i| i >= num_nodes) {
            return Err(Error::IndexOutOfRange { index, num_nodes });
        }
        isolated.sort_unstable();
        isolated.dedup();
        if isolated.len() == num_nodes - 1 {
            isolated = (0..num_nodes).collect();
        }
        Ok(Self {
            num_nodes,
            isolated,
            sample_count,
        })
    }

    pub fn fully_entangled(num_nodes: usize, sample_count: u64) -> Result<Self> {
        Self::new(num_nodes, [], sample_count)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Sorted isolated node indices.
    pub fn isolated(&self) -> &[usize] {
        &self.isolated
    }

    pub fn num_isolated(&self) -> usize {
        self.isolated.len()
    }

    pub fn num_entangled(&self) -> usize {
        self.num_nodes - self.isolated.len()
    }
}

/// All distinct configurations of `d` nodes (there are `2^d - d`), each with
/// a zero sample count.
pub fn enumerate_configurations(num_nodes: usize) -> Result<Vec<Configuration>> {
    if !(2..=20).contains(&num_nodes) {
        return Err(precondition!("enumeration supports 2 <= d <= 20, got {num_nodes}"));
    }
    let mut out = Vec::new();
    for mask in 0u32..(1 << num_nodes) {
        let size = mask.count_ones() as usize;
        if size == num_nodes - 1 {
            continue;
        }
        let isolated = (0..num_nodes).filter(|&i| mask >> i & 1 == 1);
        out.push(Configuration::new(num_nodes, isolated, 0)?);
    }
    Ok(out)
}

fn check_variance(v: f64) -> Result<()> {
    if !(v > 0.0) || v.is_nan() {
        return Err(precondition!("variance {v} must be positive"));
    }
    Ok(())
}

/// Variance of the hybrid estimate of `theta_1`:
/// `(1/d) sum_(i in C) Var(x_i) + (|N \ C| / d) Var(theta'_1)`.
///
/// `local_vars[i]` is the variance of node `i`'s local estimate; only the
/// isolated nodes' entries are read. `entangled_var` is the variance of the
/// normalized-average estimate over the entangled nodes and is ignored when
/// every node is isolated.
pub fn hybrid_variance(config: &Configuration, local_vars: &[f64], entangled_var: f64) -> Result<f64> {
    let d = config.num_nodes() as f64;
    let mut total = 0.0;
    for &i in config.isolated() {
        let v = *local_vars.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            num_nodes: local_vars.len(),
        })?;
        check_variance(v)?;
        total += v;
    }
    let entangled = config.num_entangled();
    if entangled > 0 {
        check_variance(entangled_var)?;
        total += entangled as f64 * entangled_var;
    }
    Ok(total / d)
}

/// Variance of one configuration's estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorVariance {
    pub variance: f64,
    pub configuration: Option<Configuration>,
}

impl EstimatorVariance {
    pub fn new(variance: f64) -> Result<Self> {
        check_variance(variance)?;
        if !variance.is_finite() {
            return Err(precondition!("variance must be finite"));
        }
        Ok(Self {
            variance,
            configuration: None,
        })
    }

    pub fn for_configuration(variance: f64, configuration: Configuration) -> Result<Self> {
        let mut v = Self::new(variance)?;
        v.configuration = Some(configuration);
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedEstimate {
    /// Weights proportional to `1 / Var`, summing to one.
    pub weights: Vec<f64>,
    /// `(sum 1/Var)^-1`.
    pub variance: f64,
}

pub fn combine_inverse_variance(entries: &[EstimatorVariance]) -> Result<CombinedEstimate> {
    if entries.is_empty() {
        return Err(Error::EmptyInput);
    }
    for e in entries {
        check_variance(e.variance)?;
    }
    // scale by the smallest variance so huge spreads do not underflow
    let floor = entries.iter().map(|e| e.variance).fold(f64::INFINITY, f64::min);
    let scaled: Vec<f64> = entries.iter().map(|e| floor / e.variance).collect();
    let total: f64 = scaled.iter().sum();
    Ok(CombinedEstimate {
        weights: scaled.iter().map(|s| s / total).collect(),
        variance: floor / total,
    })
}

/// Configurations with the same number of isolated nodes `m`, summarized by
/// a shared variance coefficient `F_m` (variance per round) and their total
/// round count `N_m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceGroup {
    pub num_isolated: usize,
    pub coefficient: f64,
    pub count: u64,
}

/// `[sum_m N_m / F_m]^-1`.
pub fn coarse_grain(groups: &[VarianceGroup]) -> Result<f64> {
    if groups.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut information = 0.0;
    for g in groups {
        check_variance(g.coefficient)?;
        information += g.count as f64 / g.coefficient;
    }
    if groups.iter().all(|g| g.count == 0) {
        return Err(precondition!("every group has a zero sample count"));
    }
    Ok(1.0 / information)
}

/// Groups per-configuration coefficients by isolated-node count, using the
/// sample-weighted mean coefficient of each group.
pub fn group_configurations(entries: &[(Configuration, f64)]) -> Result<Vec<VarianceGroup>> {
    if entries.is_empty() {
        return Err(Error::EmptyInput);
    }
    let d = entries[0].0.num_nodes();
    let mut sums = alloc::vec![(0.0, 0u64); d + 1];
    for (config, coefficient) in entries {
        check_variance(*coefficient)?;
        let slot = &mut sums[config.num_isolated()];
        slot.0 += *coefficient * config.sample_count as f64;
        slot.1 += config.sample_count;
    }
    Ok(sums
        .iter()
        .enumerate()
        .filter(|(_, (_, n))| *n > 0)
        .map(|(m, &(weighted, n))| VarianceGroup {
            num_isolated: m,
            coefficient: weighted / n as f64,
            count: n,
        })
        .collect())
}

/// Variance `1/(eta n^2 N)` of a QCRB-saturating entangled probe with
/// relative advantage `eta`, `n` sensors per node and `N` repetitions.
pub fn global_variance(eta: f64, sensors_per_node: usize, repetitions: u64) -> Result<f64> {
    if !(eta > 0.0) || sensors_per_node == 0 || repetitions == 0 {
        return Err(precondition!(
            "need eta > 0, n >= 1 and N >= 1 (got {eta}, {sensors_per_node}, {repetitions})"
        ));
    }
    let n = sensors_per_node as f64;
    Ok(1.0 / (eta * n * n * repetitions as f64))
}

/// Relative gap `|a - b| / |b|`.
pub fn relative_gap(a: f64, b: f64) -> f64 {
    math::abs(a - b) / math::abs(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn normalizes_d_minus_one() {
        let c = Configuration::new(3, [0, 2], 5).unwrap();
        assert_eq!(c.isolated(), &[0, 1, 2]);
        assert_eq!(c.num_entangled(), 0);
        assert!(matches!(
            Configuration::new(3, [3], 0),
            Err(Error::IndexOutOfRange { index: 3, num_nodes: 3 })
        ));
    }

    #[test]
    fn configuration_count() {
        for d in 2..=10 {
            let all = enumerate_configurations(d).unwrap();
            assert_eq!(all.len(), (1 << d) - d);
            let mut sorted = all.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), all.len());
        }
    }

    #[test]
    fn hybrid_examples() {
        let d = 3;
        let none = Configuration::fully_entangled(d, 1).unwrap();
        assert_abs_diff_eq!(hybrid_variance(&none, &[9.0; 3], 0.4).unwrap(), 0.4);
        let all = Configuration::new(d, 0..d, 1).unwrap();
        assert_abs_diff_eq!(hybrid_variance(&all, &[0.7; 3], 123.0).unwrap(), 0.7, epsilon = 1e-15);
        let (n, big_n, eta) = (2.0, 100.0, 1.8);
        let one = Configuration::new(d, [0], 1).unwrap();
        let local = 1.0 / (n * n * big_n);
        let ent = 1.0 / (eta * n * n * big_n);
        let got = hybrid_variance(&one, &[local, 1.0, 1.0], ent).unwrap();
        assert_abs_diff_eq!(got, local / 3.0 + 2.0 * ent / 3.0, epsilon = 1e-15);
        assert!(hybrid_variance(&one, &[], ent).is_err());
        let full = hybrid_variance(&none, &[], global_variance(eta, 2, 100).unwrap()).unwrap();
        assert_abs_diff_eq!(full, ent, epsilon = 1e-18);
    }

    #[test]
    fn combining_examples() {
        let v = |x| EstimatorVariance::new(x).unwrap();
        let two = combine_inverse_variance(&[v(2.0), v(2.0)]).unwrap();
        assert_eq!(two.weights, [0.5, 0.5]);
        assert_abs_diff_eq!(two.variance, 1.0);
        let dominated = combine_inverse_variance(&[v(0.3), v(1e30)]).unwrap();
        assert_abs_diff_eq!(dominated.weights[0], 1.0, epsilon = 1e-20);
        assert_abs_diff_eq!(dominated.variance, 0.3, epsilon = 1e-20);
        let three = combine_inverse_variance(&[v(1.0), v(2.0), v(4.0)]).unwrap();
        for (w, want) in three.weights.iter().zip([4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0]) {
            assert_abs_diff_eq!(*w, want, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(three.variance, 4.0 / 7.0, epsilon = 1e-15);
        assert_eq!(combine_inverse_variance(&[]), Err(Error::EmptyInput));
    }

    #[test]
    fn coarse_grain_single_group() {
        let g = VarianceGroup { num_isolated: 0, coefficient: 2.5, count: 10 };
        assert_abs_diff_eq!(coarse_grain(&[g]).unwrap(), 0.25, epsilon = 1e-16);
        let empty = VarianceGroup { count: 0, ..g };
        assert!(coarse_grain(&[empty]).is_err());
    }
}
