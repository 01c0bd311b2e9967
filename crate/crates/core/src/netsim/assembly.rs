//! Fusing one Bell pair per arm into a GHZ probe with the density-matrix kernel.
//!
//! Output qubit order is `[center, end_0, end_1, ...]`. Every pair is given
//! as `(center side, end side)`.

use alloc::vec::Vec;

use rand::Rng;

use crate::bell_algebra::BellDiagonalState;
use crate::densmat::{AssemblyMethod, DensityMatrix, MeasurementBranch, NoisySpec, MAX_QUBITS};
use crate::netsim::AssemblyMode;
use crate::{Error, Result};

/// Branch selector: averages or samples measurement outcomes.
fn resolve<R: Rng + ?Sized>(
    branches: &[MeasurementBranch],
    mode: AssemblyMode,
    rng: &mut R,
) -> Result<DensityMatrix> {
    match mode {
        AssemblyMode::Averaged => DensityMatrix::mix(branches),
        AssemblyMode::Sampled => {
            let draw: f64 = rng.gen();
            let mut acc = 0.0;
            let mut last = None;
            for branch in branches {
                if let Some(state) = &branch.state {
                    acc += branch.probability;
                    last = Some(state);
                    if draw < acc {
                        return Ok(state.clone());
                    }
                }
            }
            last.cloned().ok_or(Error::EmptyInput)
        }
    }
}

/// Assembles a `(pairs.len() + 1)`-qubit GHZ probe.
pub fn assemble<R: Rng + ?Sized>(
    pairs: &[BellDiagonalState],
    method: AssemblyMethod,
    noise: &NoisySpec,
    mode: AssemblyMode,
    rng: &mut R,
) -> Result<DensityMatrix> {
    let Some(first) = pairs.first() else {
        return Err(Error::EmptyInput);
    };
    let peak = match method {
        AssemblyMethod::Merging => pairs.len() + 2,
        AssemblyMethod::Teleportation => pairs.len() + 3,
    };
    if peak > MAX_QUBITS {
        return Err(Error::UnsupportedScale {
            qubits: peak,
            cap: MAX_QUBITS,
        });
    }
    match method {
        AssemblyMethod::Merging => {
            let mut probe = DensityMatrix::from_bell_diagonal(first);
            for pair in &pairs[1..] {
                // [c, e_0, ..] -> [e_0, .., c] so the center qubit closes the first block
                let k = probe.num_qubits();
                let mut to_back: Vec<usize> = (1..k).collect();
                to_back.push(0);
                let joint = probe
                    .permute(&to_back)?
                    .tensor(&DensityMatrix::from_bell_diagonal(pair))?;
                let branches = joint.ghz_merge_branches(k, noise)?;
                let merged = resolve(&branches, mode, rng)?;
                // [e_0, .., c, e_new] -> [c, e_0, .., e_new]
                let mut to_front = Vec::with_capacity(k + 1);
                to_front.push(k - 1);
                to_front.extend(0..k - 1);
                to_front.push(k);
                probe = merged.permute(&to_front)?;
            }
            Ok(probe)
        }
        AssemblyMethod::Teleportation => {
            let s = num_complex::Complex64::new(1.0 / crate::math::sqrt(2.0), 0.0);
            let mut probe = DensityMatrix::from_pure(&[s, s])?;
            let zero = DensityMatrix::basis_state(1, 0)?;
            for pair in pairs {
                let k = probe.num_qubits();
                let joint = probe
                    .tensor(&DensityMatrix::from_bell_diagonal(pair))?
                    .tensor(&zero)?;
                let branches = joint.cnot_teleport_branches(0, k, k + 1, k + 2, noise)?;
                probe = resolve(&branches, mode, rng)?;
            }
            Ok(probe)
        }
    }
}
