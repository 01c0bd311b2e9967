//! Batch jobs. Each one writes into a [`Staging`] directory and only
//! publishes its files once everything succeeded.

use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use dqs_core::metrology::{
    advantage_crossing, bell_pair_threshold, n_max_estimate, optimal_azimuthal, threshold_dp,
    threshold_rank2, DepolarizedGhzModel, Measurement,
};
use dqs_core::netsim::{run_trial, NetworkScenario, SimResult, TrialOutcome};

use crate::config::ScenarioFile;
use crate::output::{self, fmt_float, Staging};
use crate::{CliError, Result};

pub const THRESHOLD_HEADER: [&str; 9] = [
    "d",
    "n",
    "F_th_dp",
    "F_th_azimuthal",
    "F_th_rank2",
    "F_bell_opt",
    "F_bell_azimuthal",
    "gme_bound",
    "sep_bound",
];

/// Fidelity thresholds over a `(d, n)` grid, written to `thresholds.csv`.
///
/// `F_th_rank2` and the Bell-pair columns do not depend on `n`.
/// `sep_bound` is `3 / (2^d + 2)`.
pub fn thresholds(out: &Path, d_range: RangeInclusive<usize>, n_range: RangeInclusive<usize>) -> Result<Vec<PathBuf>> {
    if d_range.is_empty() || n_range.is_empty() {
        return Err(dqs_core::Error::EmptyInput.into());
    }
    let mut rows = Vec::new();
    for d in d_range {
        let rank2 = threshold_rank2(d)?;
        let bell_opt = bell_pair_threshold(d, Measurement::Optimal)?;
        let bell_az = bell_pair_threshold(d, Measurement::Azimuthal)?;
        let sep = 3.0 / (2f64.powi(d as i32) + 2.0);
        for n in n_range.clone() {
            rows.push(vec![
                d.to_string(),
                n.to_string(),
                fmt_float(threshold_dp(d, n)?),
                fmt_float(optimal_azimuthal(n, d)?.fidelity_threshold),
                fmt_float(rank2),
                fmt_float(bell_opt),
                fmt_float(bell_az),
                fmt_float(0.5),
                fmt_float(sep),
            ]);
        }
    }
    let mut stage = Staging::new(out)?;
    output::write_table(&stage.file("thresholds.csv")?, &THRESHOLD_HEADER, rows)?;
    stage.commit()
}

pub const CURVE_FIDELITIES: [f64; 3] = [0.8, 0.9, 0.99];
pub const CURVE_QUALITIES: [f64; 3] = [0.9999, 0.999, 0.99];

/// Every `n` up to 100, then 50 points per decade up to `n_limit`.
pub fn curve_points(n_limit: usize) -> Vec<usize> {
    let mut ns: Vec<usize> = (1..=n_limit.min(100)).collect();
    let mut i = 1;
    loop {
        let n = (100.0 * 10f64.powf(i as f64 / 50.0)).round() as usize;
        if n > n_limit {
            break;
        }
        if ns.last() != Some(&n) {
            ns.push(n);
        }
        i += 1;
    }
    ns
}

/// `eta_dp` against `n` for the standard `(F, k)` grid (`eta_curves.csv`),
/// and the last `n` with `eta > 1` next to its closed-form estimate
/// (`crossings.csv`).
pub fn analyze(out: &Path, d: usize, n_limit: usize) -> Result<Vec<PathBuf>> {
    if n_limit == 0 {
        return Err(dqs_core::Error::EmptyInput.into());
    }
    let ns = curve_points(n_limit);
    let mut curves = Vec::new();
    let mut crossings = Vec::new();
    for f in CURVE_FIDELITIES {
        for k in CURVE_QUALITIES {
            for &n in &ns {
                let eta = DepolarizedGhzModel::new(f, d, n, k)?.eta();
                curves.push(vec![fmt_float(f), fmt_float(k), d.to_string(), n.to_string(), fmt_float(eta)]);
            }
            let crossing = advantage_crossing(f, d, k, n_limit)?;
            let estimate = n_max_estimate(d, f, k).ok();
            crossings.push(vec![
                fmt_float(f),
                fmt_float(k),
                d.to_string(),
                crossing.map(|n| n.to_string()).unwrap_or_default(),
                estimate.map(|e| fmt_float(e.n_max)).unwrap_or_default(),
                estimate.map(|e| fmt_float(e.sensitivity_fidelity)).unwrap_or_default(),
                estimate.map(|e| fmt_float(e.sensitivity_quality)).unwrap_or_default(),
            ]);
        }
    }
    let mut stage = Staging::new(out)?;
    output::write_table(&stage.file("eta_curves.csv")?, &["F", "k", "d", "n", "eta"], curves)?;
    output::write_table(
        &stage.file("crossings.csv")?,
        &["F", "k", "d", "n_cross", "n_max_estimate", "dn_max_dF", "dn_max_dk"],
        crossings,
    )?;
    stage.commit()
}

/// Runs trials `0..trials`, keeping event logs for the first `log_trials`.
/// The reduction always follows trial order.
pub fn run_campaign_logged(
    scenario: &NetworkScenario,
    trials: u64,
    seed: u64,
    log_trials: u64,
) -> Result<(SimResult, Vec<TrialOutcome>)> {
    if trials == 0 {
        return Err(dqs_core::Error::Precondition("a campaign needs at least one trial".into()).into());
    }
    scenario.validate()?;
    let one = |i: u64| run_trial(scenario, seed, i, i < log_trials);
    #[cfg(feature = "parallel")]
    let mut outcomes: Vec<TrialOutcome> = {
        use rayon::prelude::*;
        (0..trials).into_par_iter().map(one).collect::<std::result::Result<_, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let mut outcomes: Vec<TrialOutcome> = (0..trials).map(one).collect::<std::result::Result<_, _>>()?;
    let result = SimResult::from_trials(scenario, seed, &outcomes)?;
    outcomes.retain(|o| o.index < log_trials);
    Ok((result, outcomes))
}

/// Writes `results.csv`, `trials.csv` and `logs/trial_XXXX.tsv`.
pub fn simulate(
    out: &Path,
    scenario: &NetworkScenario,
    trials: u64,
    seed: u64,
    log_trials: u64,
) -> Result<(SimResult, Vec<PathBuf>)> {
    let (result, logged) = run_campaign_logged(scenario, trials, seed, log_trials)?;
    let mut stage = Staging::new(out)?;
    output::write_results(&stage.file("results.csv")?, std::slice::from_ref(&result))?;
    output::write_trials(&stage.file("trials.csv")?, &result.trial_summaries)?;
    for outcome in &logged {
        let path = stage.file(format!("logs/trial_{:04}.tsv", outcome.index))?;
        output::write_log(&path, &outcome.log)?;
    }
    let files = stage.commit()?;
    Ok((result, files))
}

/// Re-runs the campaign once per value of the dotted key `parameter` and
/// writes `sweep.csv`: the results columns prefixed by `parameter,value`.
pub fn sweep(
    out: &Path,
    base: &ScenarioFile,
    parameter: &str,
    values: &[String],
    trials: u64,
    seed: u64,
) -> Result<(Vec<SimResult>, Vec<PathBuf>)> {
    if values.is_empty() {
        return Err(CliError::Sweep("no values given".into()));
    }
    let mut results = Vec::with_capacity(values.len());
    let mut rows = Vec::with_capacity(values.len());
    for value in values {
        let scenario = base.with_override(parameter, value)?.to_scenario()?;
        let (result, _) = run_campaign_logged(&scenario, trials, seed, 0)?;
        let mut row = vec![parameter.to_string(), value.clone()];
        row.extend(output::result_row(&result));
        rows.push(row);
        results.push(result);
    }
    let mut header = vec!["parameter", "value"];
    header.extend(output::RESULT_HEADER);
    let mut stage = Staging::new(out)?;
    output::write_table(&stage.file("sweep.csv")?, &header, rows)?;
    Ok((results, stage.commit()?))
}
