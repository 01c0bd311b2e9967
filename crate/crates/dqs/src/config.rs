//! Scenario files.
//!
//! A scenario is a TOML document mirroring [`NetworkScenario`]. Every key is
//! optional and falls back to the shared defaults, so a file only needs the
//! values it changes:
//!
//! ```toml
//! name = "long-lived"
//!
//! [memory]
//! coherence_time_s = 1.0
//! efficiency = 0.5
//!
//! [link]
//! raw_fidelity = 0.9
//! ```
//!
//! Error patterns are `(x, y, z)` weights summing to one. An omitted
//! `link.classical_comm_time_s` is derived from the link length as
//! `L / c + 1 ms`.

use std::fs;
use std::path::Path;

use dqs_core::bell_algebra::{MemoryErrorModel, OperationErrorModel};
use dqs_core::densmat::AssemblyMethod;
use dqs_core::netsim::{AssemblyMode, NetworkScenario};
use serde::{Deserialize, Serialize};

use crate::{io_err, CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub topology: Topology,
    pub link: Link,
    pub memory: Memory,
    pub operations: Operations,
    pub protocol: Protocol,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Topology {
    /// Arms of the star; the probe spans `end_nodes + 1` nodes.
    pub end_nodes: usize,
    pub hops_per_arm: usize,
    pub memories_per_end_node: usize,
    pub memories_center: usize,
    pub memories_per_repeater: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Link {
    pub length_km: f64,
    pub attenuation_db_per_km: f64,
    pub signal_speed_m_per_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classical_comm_time_s: Option<f64>,
    pub bsm_success: f64,
    pub raw_fidelity: f64,
    pub raw_error_pattern_xyz: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Memory {
    /// `inf` gives a memory that never decoheres.
    pub coherence_time_s: f64,
    pub error_pattern_xyz: [f64; 3],
    pub frequency_hz: f64,
    pub efficiency: f64,
    /// Reset a pair once its oldest memory has idled `cutoff_ratio * coherence_time_s`.
    pub cutoff_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Operations {
    pub gate_fidelity: f64,
    pub measurement_fidelity: f64,
    pub swap_success: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Assembly {
    Merging,
    Teleportation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcomes {
    Averaged,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Protocol {
    pub distribution_window_s: f64,
    pub assembly_method: Assembly,
    /// `averaged` sums over measurement branches, `sampled` draws one.
    pub assembly_outcomes: Outcomes,
}

impl ScenarioFile {
    pub fn from_scenario(s: &NetworkScenario) -> Self {
        Self {
            name: s.name.clone(),
            topology: Topology {
                end_nodes: s.num_end_nodes,
                hops_per_arm: s.hops_per_arm,
                memories_per_end_node: s.memories_per_end_node,
                memories_center: s.memories_center,
                memories_per_repeater: s.memories_per_repeater,
            },
            link: Link {
                length_km: s.link_length_km,
                attenuation_db_per_km: s.attenuation_db_per_km,
                signal_speed_m_per_s: s.signal_speed_m_per_s,
                classical_comm_time_s: Some(s.classical_comm_time_s),
                bsm_success: s.bsm_success,
                raw_fidelity: s.raw_fidelity,
                raw_error_pattern_xyz: s.raw_pattern,
            },
            memory: Memory {
                coherence_time_s: s.memory.coherence_time(),
                error_pattern_xyz: s.memory.pattern(),
                frequency_hz: s.memory_frequency_hz,
                efficiency: s.memory_efficiency,
                cutoff_ratio: s.cutoff_ratio,
            },
            operations: Operations {
                gate_fidelity: s.op_errors.gate_fidelity,
                measurement_fidelity: s.op_errors.measurement_fidelity,
                swap_success: s.swap_success,
            },
            protocol: Protocol {
                distribution_window_s: s.distribution_window_s,
                assembly_method: match s.assembly_method {
                    AssemblyMethod::Merging => Assembly::Merging,
                    AssemblyMethod::Teleportation => Assembly::Teleportation,
                },
                assembly_outcomes: match s.assembly_mode {
                    AssemblyMode::Averaged => Outcomes::Averaged,
                    AssemblyMode::Sampled => Outcomes::Sampled,
                },
            },
        }
    }

    /// Builds and validates the scenario.
    pub fn to_scenario(&self) -> Result<NetworkScenario> {
        let memory = if self.memory.coherence_time_s.is_infinite() {
            MemoryErrorModel::ideal()
        } else {
            MemoryErrorModel::new(self.memory.coherence_time_s, self.memory.error_pattern_xyz)?
        };
        let link = &self.link;
        let s = NetworkScenario {
            name: self.name.clone(),
            num_end_nodes: self.topology.end_nodes,
            hops_per_arm: self.topology.hops_per_arm,
            link_length_km: link.length_km,
            attenuation_db_per_km: link.attenuation_db_per_km,
            signal_speed_m_per_s: link.signal_speed_m_per_s,
            classical_comm_time_s: link
                .classical_comm_time_s
                .unwrap_or(link.length_km * 1e3 / link.signal_speed_m_per_s + 1e-3),
            memories_per_end_node: self.topology.memories_per_end_node,
            memories_center: self.topology.memories_center,
            memories_per_repeater: self.topology.memories_per_repeater,
            memory,
            memory_frequency_hz: self.memory.frequency_hz,
            memory_efficiency: self.memory.efficiency,
            cutoff_ratio: self.memory.cutoff_ratio,
            raw_fidelity: link.raw_fidelity,
            raw_pattern: link.raw_error_pattern_xyz,
            bsm_success: link.bsm_success,
            swap_success: self.operations.swap_success,
            op_errors: OperationErrorModel::new(
                self.operations.gate_fidelity,
                self.operations.measurement_fidelity,
            )?,
            distribution_window_s: self.protocol.distribution_window_s,
            assembly_method: match self.protocol.assembly_method {
                Assembly::Merging => AssemblyMethod::Merging,
                Assembly::Teleportation => AssemblyMethod::Teleportation,
            },
            assembly_mode: match self.protocol.assembly_outcomes {
                Outcomes::Averaged => AssemblyMode::Averaged,
                Outcomes::Sampled => AssemblyMode::Sampled,
            },
        };
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        toml::from_str(&text).map_err(|source| CliError::Config {
            path: path.into(),
            source,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario files always serialize")
    }

    /// Returns a copy with the dotted `key` (e.g. `memory.efficiency`) set to
    /// `value`, which is parsed as a TOML value.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self> {
        let bad = |msg: String| CliError::Sweep(msg);
        let toml::Value::Table(mut tree) = toml::Value::try_from(self).map_err(|e| bad(e.to_string()))? else {
            unreachable!("a struct serializes to a table")
        };
        let parsed: toml::Table =
            toml::from_str(&format!("v = {value}")).map_err(|e| bad(format!("value {value:?}: {e}")))?;
        let parsed = parsed["v"].clone();
        let mut parts: Vec<&str> = key.split('.').collect();
        let leaf = parts.pop().filter(|k| !k.is_empty()).ok_or_else(|| bad(format!("empty key {key:?}")))?;
        let mut table = &mut tree;
        for part in parts {
            table = table
                .get_mut(part)
                .and_then(toml::Value::as_table_mut)
                .ok_or_else(|| bad(format!("no section {part:?} in {key:?}")))?;
        }
        table.insert(leaf.into(), parsed);
        toml::Value::Table(tree)
            .try_into()
            .map_err(|e: toml::de::Error| bad(format!("{key} = {value}: {}", e.message())))
    }
}

impl Default for ScenarioFile {
    fn default() -> Self {
        let mut file = Self::from_scenario(&NetworkScenario::base("custom"));
        file.link.classical_comm_time_s = None;
        file
    }
}

macro_rules! section_default {
    ($($ty:ident => $field:ident),*) => {$(
        impl Default for $ty {
            fn default() -> Self {
                ScenarioFile::default().$field
            }
        }
    )*};
}

section_default!(Topology => topology, Link => link, Memory => memory, Operations => operations, Protocol => protocol);

/// Preset `index` as a scenario file.
pub fn preset(index: u8) -> Result<ScenarioFile> {
    Ok(ScenarioFile::from_scenario(&NetworkScenario::preset(index)?))
}
