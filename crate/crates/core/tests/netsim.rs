use approx::assert_abs_diff_eq;
use dqs_core::bell_algebra::{BellDiagonalState, MemoryErrorModel, OperationErrorModel};
use dqs_core::densmat::{AssemblyMethod, NoisySpec};
use dqs_core::netsim::*;
use dqs_core::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn short(preset: u8) -> NetworkScenario {
    let mut s = NetworkScenario::preset(preset).unwrap();
    s.distribution_window_s = 0.1;
    s
}

fn ideal() -> NetworkScenario {
    let mut s = NetworkScenario::base("ideal");
    s.memory = MemoryErrorModel::ideal();
    s.memory_efficiency = 1.0;
    s.raw_fidelity = 1.0;
    s.op_errors = OperationErrorModel::perfect();
    s.distribution_window_s = 0.05;
    s
}

#[test]
fn campaigns_are_reproducible() {
    let s = short(3);
    let a = run_campaign(&s, 20, 99).unwrap();
    let b = run_campaign(&s, 20, 99).unwrap();
    assert_eq!(a, b);
    let c = run_campaign(&s, 20, 100).unwrap();
    assert_ne!(a.trial_summaries, c.trial_summaries);
    // trials draw from their own streams, so they can run in any order
    let late = run_trial(&s, 99, 7, false).unwrap();
    assert_eq!(Some(late.fidelity()), a.trial_summaries.get(7).map(|t| t.fidelity));
}

#[test]
fn figures_of_merit_are_consistent() {
    let s = short(3);
    let outcomes: Vec<_> = (0..40).map(|i| run_trial(&s, 5, i, false).unwrap()).collect();
    let r = SimResult::from_trials(&s, 5, &outcomes).unwrap();
    assert!(r.successes > 0);
    assert_eq!(r.eta_tilde.unwrap(), r.success_prob * r.eta.unwrap());
    assert!(r.eta_tilde.unwrap() <= r.eta.unwrap());
    let fids: Vec<f64> = outcomes.iter().filter_map(TrialOutcome::fidelity).collect();
    let mean = fids.iter().sum::<f64>() / fids.len() as f64;
    assert_abs_diff_eq!(r.fidelity.unwrap(), mean, epsilon = 1e-12);
    assert_abs_diff_eq!(r.eta_qfim.unwrap(), r.eta.unwrap(), epsilon = 0.05);
}

#[test]
fn noiseless_network_gives_perfect_probes() {
    let s = ideal();
    let r = run_campaign(&s, 20, 1).unwrap();
    assert_eq!(r.success_prob, 1.0);
    assert!(r.fidelity.unwrap() >= 1.0 - 1e-9);
    assert_abs_diff_eq!(r.eta.unwrap(), 3.0, epsilon = 1e-9);
    let mut t = s.clone();
    t.assembly_method = AssemblyMethod::Teleportation;
    let r = run_campaign(&t, 5, 1).unwrap();
    assert!(r.fidelity.unwrap() >= 1.0 - 1e-9);
}

#[test]
fn repeater_chains_swap() {
    let mut s = ideal();
    s.hops_per_arm = 2;
    let o = run_trial(&s, 3, 0, true).unwrap();
    assert!(o.stats.swaps > 0);
    assert!(o.succeeded());
    assert!(o.fidelity().unwrap() >= 1.0 - 1e-9);
    assert!(o.log.iter().any(|r| r.event == "swap" && r.link == "arm0:0-2"));
}

#[test]
fn without_purification_pairs_only_degrade() {
    let mut s = short(2);
    s.memories_per_end_node = 1;
    s.memory_efficiency = 0.5;
    for i in 0..100 {
        let o = run_trial(&s, 8, i, false).unwrap();
        assert_eq!(o.stats.purifications, 0);
        for pair in &o.link_pairs {
            assert!(pair.fidelity() <= s.raw_fidelity + 1e-12);
        }
    }
}

fn success_rate(s: &NetworkScenario, trials: u64) -> (f64, f64) {
    let r = run_campaign(s, trials, 17).unwrap();
    let p = r.success_prob;
    (p, (p * (1.0 - p) / trials as f64).sqrt())
}

#[test]
fn better_hardware_does_not_hurt() {
    let base = short(2);
    let mut efficient = base.clone();
    efficient.memory_efficiency = 0.3;
    let (p0, s0) = success_rate(&base, 300);
    let (p1, s1) = success_rate(&efficient, 300);
    assert!(p1 >= p0 - 2.0 * (s0 * s0 + s1 * s1).sqrt(), "{p1} < {p0}");

    let mut s = short(3);
    s.raw_fidelity = 0.8;
    let low = run_campaign(&s, 200, 17).unwrap();
    s.raw_fidelity = 0.95;
    let high = run_campaign(&s, 200, 17).unwrap();
    let spread = |r: &SimResult| {
        let f: Vec<f64> = r.trial_summaries.iter().filter_map(|t| t.fidelity).collect();
        let m = f.iter().sum::<f64>() / f.len() as f64;
        (f.iter().map(|x| (x - m).powi(2)).sum::<f64>() / f.len() as f64 / f.len() as f64).sqrt()
    };
    let noise = (spread(&low).powi(2) + spread(&high).powi(2)).sqrt();
    assert!(high.fidelity.unwrap() >= low.fidelity.unwrap() - 2.0 * noise);
}

#[test]
fn purification_runs_before_anything_else_at_the_same_instant() {
    let s = short(3);
    let o = run_trial(&s, 4, 0, true).unwrap();
    let mut checked = 0;
    for pair in o.log.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let successes: usize = a.outcome.split('/').next().unwrap_or("0").parse().unwrap_or(0);
        if a.event == "herald" && successes >= 2 {
            assert_eq!(b.event, "purify", "{a:?} then {b:?}");
            assert_eq!(b.time_s, a.time_s);
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn cutoffs_reset_stale_pairs() {
    let s = short(1);
    let total: u64 = (0..50).map(|i| run_trial(&s, 2, i, false).unwrap().stats.cutoffs).sum();
    assert!(total > 0);
    let mut lenient = s.clone();
    lenient.cutoff_ratio = 1e6;
    let total: u64 = (0..20).map(|i| run_trial(&lenient, 2, i, false).unwrap().stats.cutoffs).sum();
    assert_eq!(total, 0);
}

#[test]
fn sampled_assembly_agrees_with_branch_average() {
    let pairs = [BellDiagonalState::werner(0.9).unwrap(); 2];
    let noise = NoisySpec::new(0.99, 0.97).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for method in [AssemblyMethod::Merging, AssemblyMethod::Teleportation] {
        let averaged = assemble(&pairs, method, &noise, AssemblyMode::Averaged, &mut rng)
            .unwrap()
            .fidelity_to_ghz();
        let samples: Vec<f64> = (0..10_000)
            .map(|_| {
                assemble(&pairs, method, &noise, AssemblyMode::Sampled, &mut rng)
                    .unwrap()
                    .fidelity_to_ghz()
            })
            .collect();
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let sigma = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        assert!((mean - averaged).abs() <= 3.0 * sigma + 1e-12, "{method:?}: {mean} vs {averaged}");
    }
}

#[test]
fn scenarios_are_validated() {
    let mut s = NetworkScenario::base("big");
    s.num_end_nodes = 5;
    assert!(matches!(run_campaign(&s, 1, 0), Err(Error::UnsupportedScale { .. })));
    assert!(run_campaign(&ideal(), 0, 0).is_err());
    let mut s = ideal();
    s.memory_efficiency = 0.0;
    let r = run_campaign(&s, 3, 0).unwrap();
    assert_eq!(r.success_prob, 0.0);
    assert!(r.eta.is_none() && r.fidelity.is_none());
}
