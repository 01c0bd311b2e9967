//! Seeded discrete-event simulation of GHZ-probe distribution over a
//! repeater network.
//!
//! Each trial is one distribution window of length `T_pc`:
//!
//! * every elementary link runs multiplexed heralded generation rounds on
//!   all free memory pairs, paced at `max(1/f_m, L/c)`;
//! * as soon as a node pair shares two usable pairs they are purified with
//!   DEJMPS (the two oldest, keeping the one whose memories reset later), and
//!   repeaters swap as soon as they hold a pair on each side;
//! * a purified pair is usable again once the outcome has been exchanged,
//!   and its idle clock restarts at that moment;
//! * pairs are reset when their oldest memory reaches `r_m * tau`;
//! * at the window end, pairs whose successful outcome is still in flight
//!   are kept, each arm purifies its two lowest-fidelity pairs until one is
//!   left, and the surviving pairs are fused into a GHZ state.
//!
//! Idle decoherence is applied lazily whenever a pair is touched.
//! Trials draw from independent ChaCha8 streams keyed by `(seed, trial)`, so
//! a campaign is reproducible and trials may run in any order.

mod assembly;
mod engine;
mod scenario;
mod trial;

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::densmat::DensityMatrix;
use crate::error::precondition;
use crate::metrology::{c_coefficient, qfim_numeric, SensingProblem};
use crate::Result;

pub use assembly::assemble;
pub use engine::{EventClass, EventQueue};
pub use scenario::{AssemblyMode, NetworkScenario};
pub use trial::{LogRecord, TrialOutcome, TrialStats};

/// Runs trial `index` of the campaign seeded with `seed`.
pub fn run_trial(scenario: &NetworkScenario, seed: u64, index: u64, logging: bool) -> Result<TrialOutcome> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut outcome = trial::run_trial_with_rng(scenario, &mut rng, logging)?;
    outcome.index = index;
    Ok(outcome)
}

/// Short per-trial record kept in a [`SimResult`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSummary {
    pub index: u64,
    pub success: bool,
    pub fidelity: Option<f64>,
    pub stats: TrialStats,
}

/// Figures of merit of a campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub scenario: alloc::string::String,
    pub trials: u64,
    pub seed: u64,
    pub successes: u64,
    /// Fraction of trials that produced a probe.
    pub success_prob: f64,
    /// Mean probe over successful trials.
    pub avg_state: Option<DensityMatrix>,
    /// GHZ fidelity of `avg_state`.
    pub fidelity: Option<f64>,
    /// `d (1 - C)` of the GHZ-twirled `avg_state`.
    pub eta: Option<f64>,
    /// `p * eta`.
    pub eta_tilde: Option<f64>,
    /// `v_1^T F v_1` from the numeric QFI matrix of the untwirled `avg_state`.
    pub eta_qfim: Option<f64>,
    pub trial_summaries: Vec<TrialSummary>,
}

impl SimResult {
    /// Reduces trial outcomes in the given order.
    pub fn from_trials(
        scenario: &NetworkScenario,
        seed: u64,
        outcomes: &[TrialOutcome],
    ) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(precondition!("a campaign needs at least one trial"));
        }
        let d = scenario.num_nodes();
        let dim = 1usize << d;
        let mut sum = DMatrix::<Complex64>::zeros(dim, dim);
        let mut successes = 0u64;
        let mut summaries = Vec::with_capacity(outcomes.len());
        for outcome in outcomes {
            if let Some(probe) = &outcome.probe {
                sum += probe.matrix();
                successes += 1;
            }
            summaries.push(TrialSummary {
                index: outcome.index,
                success: outcome.succeeded(),
                fidelity: outcome.fidelity(),
                stats: outcome.stats,
            });
        }
        let trials = outcomes.len() as u64;
        let success_prob = successes as f64 / trials as f64;
        let mut result = Self {
            scenario: scenario.name.clone(),
            trials,
            seed,
            successes,
            success_prob,
            avg_state: None,
            fidelity: None,
            eta: None,
            eta_tilde: None,
            eta_qfim: None,
            trial_summaries: summaries,
        };
        if successes == 0 {
            return Ok(result);
        }
        let avg = DensityMatrix::new(d, sum / Complex64::new(successes as f64, 0.0))?;
        let c = c_coefficient(&avg.ghz_twirl()?);
        let eta = d as f64 * (1.0 - c);
        let problem = SensingProblem::new(d, 1)?;
        let qfim = qfim_numeric(&avg, &problem)?;
        let v = nalgebra::DVector::from_vec(problem.direction_vector());
        result.fidelity = Some(avg.fidelity_to_ghz());
        result.eta = Some(eta);
        result.eta_tilde = Some(success_prob * eta);
        result.eta_qfim = Some((v.transpose() * qfim * &v)[(0, 0)]);
        result.avg_state = Some(avg);
        Ok(result)
    }
}

/// Runs `trials` independent windows sequentially and reduces them.
pub fn run_campaign(scenario: &NetworkScenario, trials: u64, seed: u64) -> Result<SimResult> {
    if trials == 0 {
        return Err(precondition!("a campaign needs at least one trial"));
    }
    scenario.validate()?;
    let outcomes = (0..trials)
        .map(|index| run_trial(scenario, seed, index, false))
        .collect::<Result<Vec<_>>>()?;
    SimResult::from_trials(scenario, seed, &outcomes)
}
