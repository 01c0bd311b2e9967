use alloc::string::String;

use crate::bell_algebra::{BellDiagonalState, MemoryErrorModel, OperationErrorModel};
use crate::densmat::{AssemblyMethod, NoisySpec, MAX_QUBITS};
use crate::error::precondition;
use crate::math;
use crate::{Error, Result};

/// How measurement outcomes are handled while assembling the GHZ probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AssemblyMode {
    /// Average over all outcome branches (deterministic given the pairs).
    #[default]
    Averaged,
    /// Draw one outcome trajectory per trial.
    Sampled,
}

/// Full configuration of one simulation campaign.
///
/// The network is a star of `num_end_nodes` arms around a center node. Each
/// arm is a chain of `hops_per_arm` elementary links joined by repeaters, and
/// every elementary link has a photonic Bell-state-measurement station at its
/// midpoint. The probe has one sensor qubit per node, so `d = num_end_nodes + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkScenario {
    pub name: String,
    pub num_end_nodes: usize,
    pub hops_per_arm: usize,
    pub link_length_km: f64,
    pub attenuation_db_per_km: f64,
    pub signal_speed_m_per_s: f64,
    pub classical_comm_time_s: f64,
    pub memories_per_end_node: usize,
    /// Shared evenly between the arms.
    pub memories_center: usize,
    /// Split evenly between the two sides of a repeater.
    pub memories_per_repeater: usize,
    pub memory: MemoryErrorModel,
    pub memory_frequency_hz: f64,
    pub memory_efficiency: f64,
    pub cutoff_ratio: f64,
    pub raw_fidelity: f64,
    /// Relative weights of `(X, Y, Z)` errors in the raw pair.
    pub raw_pattern: [f64; 3],
    pub bsm_success: f64,
    pub swap_success: f64,
    pub op_errors: OperationErrorModel,
    pub distribution_window_s: f64,
    pub assembly_method: AssemblyMethod,
    pub assembly_mode: AssemblyMode,
}

impl NetworkScenario {
    /// Shared defaults; the three presets differ only in memory coherence
    /// time, memory efficiency and raw pair fidelity.
    pub fn base(name: &str) -> Self {
        let link_length_km = 10.0;
        let signal_speed_m_per_s = 2e8;
        Self {
            name: name.into(),
            num_end_nodes: 2,
            hops_per_arm: 1,
            link_length_km,
            attenuation_db_per_km: 0.2,
            signal_speed_m_per_s,
            classical_comm_time_s: link_length_km * 1e3 / signal_speed_m_per_s + 1e-3,
            memories_per_end_node: 10,
            memories_center: 20,
            memories_per_repeater: 20,
            memory: MemoryErrorModel::depolarizing(1.0).expect("positive coherence time"),
            memory_frequency_hz: 2e3,
            memory_efficiency: 0.5,
            cutoff_ratio: 0.5,
            raw_fidelity: 0.9,
            raw_pattern: [1.0 / 3.0; 3],
            bsm_success: 0.5,
            swap_success: 1.0,
            op_errors: OperationErrorModel {
                gate_fidelity: 0.99,
                measurement_fidelity: 0.99,
            },
            distribution_window_s: 1.0,
            assembly_method: AssemblyMethod::Merging,
            assembly_mode: AssemblyMode::Averaged,
        }
    }

    /// Scenarios 1 to 3: coherence time `{0.01, 0.1, 1}` s, memory efficiency
    /// `{0.05, 0.1, 0.5}` and raw fidelity `{0.8, 0.85, 0.9}`.
    pub fn preset(index: u8) -> Result<Self> {
        let (tau, efficiency, fidelity) = match index {
            1 => (0.01, 0.05, 0.8),
            2 => (0.1, 0.1, 0.85),
            3 => (1.0, 0.5, 0.9),
            _ => return Err(precondition!("unknown preset {index}, expected 1, 2 or 3")),
        };
        let mut s = Self::base(&alloc::format!("scenario{index}"));
        s.memory = MemoryErrorModel::depolarizing(tau)?;
        s.memory_efficiency = efficiency;
        s.raw_fidelity = fidelity;
        Ok(s)
    }

    /// Number of sensor nodes `d`.
    pub fn num_nodes(&self) -> usize {
        self.num_end_nodes + 1
    }

    /// Photon survival probability over half an elementary link.
    pub fn half_link_transmission(&self) -> f64 {
        math::powf(10.0, -self.attenuation_db_per_km * self.link_length_km / 2.0 / 10.0)
    }

    /// Success probability of a single generation attempt,
    /// `eta_m^2 p_t^2 p_m`.
    pub fn attempt_success_prob(&self) -> f64 {
        let eta = self.memory_efficiency;
        let pt = self.half_link_transmission();
        eta * eta * pt * pt * self.bsm_success
    }

    /// Photon travel to the midpoint plus the herald's return, `L / c`.
    pub fn herald_latency_s(&self) -> f64 {
        self.link_length_km * 1e3 / self.signal_speed_m_per_s
    }

    /// `max(1/f_m, L/c)`.
    pub fn attempt_period_s(&self) -> f64 {
        (1.0 / self.memory_frequency_hz).max(self.herald_latency_s())
    }

    pub fn cutoff_time_s(&self) -> f64 {
        self.cutoff_ratio * self.memory.coherence_time()
    }

    /// Pair produced by a successful heralded attempt, before idling noise:
    /// `(F, (1-F) w_z, (1-F) w_x, (1-F) w_y)`.
    pub fn raw_bell(&self) -> Result<BellDiagonalState> {
        let f = self.raw_fidelity;
        let [wx, wy, wz] = self.raw_pattern;
        BellDiagonalState::new([f, (1.0 - f) * wz, (1.0 - f) * wx, (1.0 - f) * wy])
    }

    pub fn noisy_spec(&self) -> NoisySpec {
        NoisySpec {
            cnot_fidelity: self.op_errors.gate_fidelity,
            measurement_fidelity: self.op_errors.measurement_fidelity,
        }
    }

    /// Largest register touched while assembling the probe.
    pub fn assembly_qubits(&self) -> usize {
        let d = self.num_nodes();
        match self.assembly_method {
            AssemblyMethod::Merging => d + 1,
            AssemblyMethod::Teleportation => d + 2,
        }
    }

    pub fn center_memories_per_arm(&self) -> usize {
        self.memories_center / self.num_end_nodes.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_end_nodes == 0 {
            return Err(precondition!("need at least one end node"));
        }
        if self.hops_per_arm == 0 {
            return Err(precondition!("each arm needs at least one link"));
        }
        let positive = [
            (self.link_length_km, "link length"),
            (self.signal_speed_m_per_s, "signal speed"),
            (self.classical_comm_time_s, "classical communication time"),
            (self.memory_frequency_hz, "memory frequency"),
            (self.cutoff_ratio, "cutoff ratio"),
            (self.distribution_window_s, "distribution window"),
        ];
        for (value, what) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(precondition!("{what} must be positive and finite, got {value}"));
            }
        }
        if !(self.attenuation_db_per_km >= 0.0) {
            return Err(precondition!("attenuation must be nonnegative"));
        }
        let unit = [
            (self.memory_efficiency, "memory efficiency"),
            (self.raw_fidelity, "raw fidelity"),
            (self.bsm_success, "BSM success probability"),
            (self.swap_success, "swap success probability"),
            (self.op_errors.gate_fidelity, "gate fidelity"),
            (self.op_errors.measurement_fidelity, "measurement fidelity"),
        ];
        for (value, what) in unit {
            if !(0.0..=1.0).contains(&value) {
                return Err(precondition!("{what} {value} outside [0, 1]"));
            }
        }
        if self.bsm_success > 0.5 {
            return Err(precondition!(
                "linear-optics BSM success {} exceeds 1/2",
                self.bsm_success
            ));
        }
        if self.raw_pattern.iter().any(|&w| !(w >= 0.0))
            || math::abs(self.raw_pattern.iter().sum::<f64>() - 1.0) > 1e-12
        {
            return Err(precondition!("raw pair pattern {:?} is not normalized", self.raw_pattern));
        }
        if self.memories_per_end_node == 0 || self.center_memories_per_arm() == 0 {
            return Err(precondition!("every link end needs at least one memory"));
        }
        if self.hops_per_arm > 1 && self.memories_per_repeater < 2 {
            return Err(precondition!("repeaters need at least one memory per side"));
        }
        let qubits = self.assembly_qubits();
        if qubits > MAX_QUBITS {
            return Err(Error::UnsupportedScale {
                qubits,
                cap: MAX_QUBITS,
            });
        }
        Ok(())
    }
}
