//! One probe-distribution window: generation, purification, swapping,
//! cutoffs, final purification and assembly.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::bell_algebra::{self, BellDiagonalState, MemoryErrorModel};
use crate::densmat::DensityMatrix;
use crate::netsim::assembly::assemble;
use crate::netsim::engine::{EventClass, EventQueue};
use crate::netsim::NetworkScenario;
use crate::Result;

/// One line of a per-trial event log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub time_s: f64,
    pub event: &'static str,
    pub link: String,
    pub outcome: String,
}

/// Counters collected during one trial.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrialStats {
    pub attempts: u64,
    pub pairs_generated: u64,
    pub purifications: u64,
    pub purification_failures: u64,
    pub swaps: u64,
    pub swap_failures: u64,
    pub cutoffs: u64,
    pub discarded_at_window_end: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub index: u64,
    /// Assembled probe, absent when some arm had no pair at the window end.
    pub probe: Option<DensityMatrix>,
    /// Final pair per arm that entered assembly.
    pub link_pairs: Vec<BellDiagonalState>,
    pub stats: TrialStats,
    pub log: Vec<LogRecord>,
}

impl TrialOutcome {
    pub fn succeeded(&self) -> bool {
        self.probe.is_some()
    }

    pub fn fidelity(&self) -> Option<f64> {
        self.probe.as_ref().map(DensityMatrix::fidelity_to_ghz)
    }
}

// a position on an arm: 0 is the center, `hops_per_arm` the end node
type Pos = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    // faces the center
    Inner = 0,
    // faces the end node
    Outer = 1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Available,
    // waiting for a purification or swap outcome that is already decided
    Pending { success: bool },
}

#[derive(Debug, Clone)]
struct Pair {
    arm: usize,
    inner: Pos,
    outer: Pos,
    state: BellDiagonalState,
    init_time: f64,
    deadline: f64,
    status: Status,
}

#[derive(Debug, Clone)]
enum Event {
    Generation { arm: usize, link: Pos },
    Herald { arm: usize, link: Pos, reserved: usize, successes: usize, emitted: f64 },
    Purify { arm: usize, inner: Pos, outer: Pos },
    Swap { arm: usize, node: Pos },
    Delivery { pair: u64, success: bool, swap: bool },
    Cutoff { pair: u64 },
    WindowEnd,
}

struct Trial<'a> {
    scenario: &'a NetworkScenario,
    rng: &'a mut ChaCha8Rng,
    queue: EventQueue<Event>,
    pairs: BTreeMap<u64, Pair>,
    next_id: u64,
    // free[arm][pos][side]
    free: Vec<Vec<[usize; 2]>>,
    raw: BellDiagonalState,
    memory: MemoryErrorModel,
    stats: TrialStats,
    log: Option<Vec<LogRecord>>,
}

fn span_label(arm: usize, inner: Pos, outer: Pos) -> String {
    format!("arm{arm}:{inner}-{outer}")
}

impl<'a> Trial<'a> {
    fn new(scenario: &'a NetworkScenario, rng: &'a mut ChaCha8Rng, logging: bool) -> Result<Self> {
        let h = scenario.hops_per_arm;
        let mut template = alloc::vec![[0usize; 2]; h + 1];
        template[0][Side::Outer as usize] = scenario.center_memories_per_arm();
        template[h][Side::Inner as usize] = scenario.memories_per_end_node;
        for slot in template.iter_mut().take(h).skip(1) {
            *slot = [scenario.memories_per_repeater / 2; 2];
        }
        Ok(Self {
            scenario,
            rng,
            queue: EventQueue::new(),
            pairs: BTreeMap::new(),
            next_id: 0,
            free: alloc::vec![template; scenario.num_end_nodes],
            raw: scenario.raw_bell()?,
            memory: scenario.memory,
            stats: TrialStats::default(),
            log: logging.then(Vec::new),
        })
    }

    fn record(&mut self, event: &'static str, link: String, outcome: String) {
        if let Some(log) = &mut self.log {
            log.push(LogRecord {
                time_s: self.queue.now(),
                event,
                link,
                outcome,
            });
        }
    }

    fn release(&mut self, pair: &Pair) {
        self.free[pair.arm][pair.inner][Side::Outer as usize] += 1;
        self.free[pair.arm][pair.outer][Side::Inner as usize] += 1;
    }

    fn insert(&mut self, pair: Pair) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        if pair.deadline.is_finite() {
            self.queue.schedule(pair.deadline, EventClass::Cutoff, Event::Cutoff { pair: id });
        }
        self.pairs.insert(id, pair);
        id
    }

    fn is_repeater(&self, pos: Pos) -> bool {
        pos > 0 && pos < self.scenario.hops_per_arm
    }

    /// Queues the protocol checks triggered by a pair becoming available.
    fn on_available(&mut self, arm: usize, inner: Pos, outer: Pos) {
        let now = self.queue.now();
        self.queue.schedule(now, EventClass::Purification, Event::Purify { arm, inner, outer });
        for node in [inner, outer] {
            if self.is_repeater(node) {
                self.queue.schedule(now, EventClass::Swap, Event::Swap { arm, node });
            }
        }
    }

    fn decohere_now(&self, state: &BellDiagonalState) -> Result<BellDiagonalState> {
        bell_algebra::decohere_to(state, self.queue.now(), &self.memory, &self.memory)
    }

    fn available_on(&self, arm: usize, inner: Pos, outer: Pos) -> Vec<u64> {
        let mut ids: Vec<(f64, u64)> = self
            .pairs
            .iter()
            .filter(|(_, p)| {
                p.arm == arm && p.inner == inner && p.outer == outer && p.status == Status::Available
            })
            .map(|(&id, p)| (p.init_time, id))
            .collect();
        ids.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        ids.into_iter().map(|(_, id)| id).collect()
    }

    fn run(mut self) -> Result<TrialOutcome> {
        let s = self.scenario;
        for arm in 0..s.num_end_nodes {
            for link in 0..s.hops_per_arm {
                self.queue.schedule(0.0, EventClass::Generation, Event::Generation { arm, link });
            }
        }
        self.queue.schedule(s.distribution_window_s, EventClass::WindowEnd, Event::WindowEnd);
        while let Some((_, _, event)) = self.queue.pop() {
            match event {
                Event::Generation { arm, link } => self.generation(arm, link),
                Event::Herald { arm, link, reserved, successes, emitted } => {
                    self.herald(arm, link, reserved, successes, emitted)?
                }
                Event::Purify { arm, inner, outer } => self.purify(arm, inner, outer)?,
                Event::Swap { arm, node } => self.swap(arm, node)?,
                Event::Delivery { pair, success, swap } => self.delivery(pair, success, swap)?,
                Event::Cutoff { pair } => self.cutoff(pair),
                Event::WindowEnd => {
                    self.queue.clear();
                    return self.window_end();
                }
            }
        }
        unreachable!("the window end is always queued")
    }

    fn generation(&mut self, arm: usize, link: Pos) {
        let s = self.scenario;
        let now = self.queue.now();
        let left = self.free[arm][link][Side::Outer as usize];
        let right = self.free[arm][link + 1][Side::Inner as usize];
        let reserved = left.min(right);
        if reserved > 0 {
            self.free[arm][link][Side::Outer as usize] -= reserved;
            self.free[arm][link + 1][Side::Inner as usize] -= reserved;
            let q = s.attempt_success_prob();
            let successes = (0..reserved).filter(|_| self.rng.gen::<f64>() < q).count();
            self.stats.attempts += reserved as u64;
            self.queue.schedule(
                now + s.herald_latency_s(),
                EventClass::Herald,
                Event::Herald { arm, link, reserved, successes, emitted: now },
            );
        }
        self.queue.schedule(
            now + s.attempt_period_s(),
            EventClass::Generation,
            Event::Generation { arm, link },
        );
    }

    fn herald(&mut self, arm: usize, link: Pos, reserved: usize, successes: usize, emitted: f64) -> Result<()> {
        let s = self.scenario;
        let now = self.queue.now();
        let failed = reserved - successes;
        self.free[arm][link][Side::Outer as usize] += failed;
        self.free[arm][link + 1][Side::Inner as usize] += failed;
        if successes > 0 {
            self.record("herald", span_label(arm, link, link + 1), format!("{successes}/{reserved}"));
        }
        let idle = now - emitted;
        let state = bell_algebra::decohere(&self.raw, idle, idle, &self.memory, &self.memory)?.with_time(now);
        for _ in 0..successes {
            let pair = Pair {
                arm,
                inner: link,
                outer: link + 1,
                state,
                init_time: emitted,
                deadline: emitted + s.cutoff_time_s(),
                status: Status::Available,
            };
            self.stats.pairs_generated += 1;
            if pair.deadline <= now {
                self.stats.cutoffs += 1;
                self.release(&pair);
                continue;
            }
            self.insert(pair);
        }
        if successes > 0 {
            self.on_available(arm, link, link + 1);
        }
        Ok(())
    }

    fn purify(&mut self, arm: usize, inner: Pos, outer: Pos) -> Result<()> {
        let s = self.scenario;
        let now = self.queue.now();
        loop {
            let ids = self.available_on(arm, inner, outer);
            if ids.len() < 2 {
                return Ok(());
            }
            let (a, b) = (ids[0], ids[1]);
            // keep the pair whose memories reset later
            let (kept_id, measured_id) = if self.pairs[&b].deadline >= self.pairs[&a].deadline {
                (b, a)
            } else {
                (a, b)
            };
            let measured = self.pairs.remove(&measured_id).expect("listed pair");
            self.release(&measured);
            let kept_state = self.decohere_now(&self.pairs[&kept_id].state)?;
            let measured_state = self.decohere_now(&measured.state)?;
            let p = s.op_errors.gate_fidelity;
            let eta = s.op_errors.measurement_fidelity;
            let outcome = bell_algebra::purify(
                &kept_state.dejmps_rotated(),
                &measured_state.dejmps_rotated(),
                (p, p),
                (eta, eta),
            )?;
            let success = self.rng.gen::<f64>() < outcome.success_prob;
            self.stats.purifications += 1;
            let kept = self.pairs.get_mut(&kept_id).expect("listed pair");
            kept.status = Status::Pending { success };
            // the kept pair's clock restarts once both sides know the outcome
            kept.state = if success { outcome.state } else { kept_state }.with_time(now + s.classical_comm_time_s);
            self.queue.schedule(
                now + s.classical_comm_time_s,
                EventClass::Delivery,
                Event::Delivery { pair: kept_id, success, swap: false },
            );
            self.record(
                "purify",
                span_label(arm, inner, outer),
                format!("{} F={:.6}", if success { "success" } else { "failure" }, outcome.fidelity),
            );
        }
    }

    fn swap(&mut self, arm: usize, node: Pos) -> Result<()> {
        let s = self.scenario;
        let now = self.queue.now();
        loop {
            let oldest = |inner_end: bool| -> Option<u64> {
                self.pairs
                    .iter()
                    .filter(|(_, p)| {
                        p.arm == arm
                            && p.status == Status::Available
                            && if inner_end { p.outer == node } else { p.inner == node }
                    })
                    .min_by(|x, y| x.1.init_time.total_cmp(&y.1.init_time).then(x.0.cmp(y.0)))
                    .map(|(&id, _)| id)
            };
            let (Some(left_id), Some(right_id)) = (oldest(true), oldest(false)) else {
                return Ok(());
            };
            let left = self.pairs.remove(&left_id).expect("listed pair");
            let right = self.pairs.remove(&right_id).expect("listed pair");
            // the repeater's two memories are freed by the measurement
            self.free[arm][node][Side::Inner as usize] += 1;
            self.free[arm][node][Side::Outer as usize] += 1;
            let p = s.op_errors.gate_fidelity;
            let eta = s.op_errors.measurement_fidelity;
            let joined = bell_algebra::swap(
                &self.decohere_now(&left.state)?,
                &self.decohere_now(&right.state)?,
                p,
                eta,
                eta,
            )?;
            let success = self.rng.gen::<f64>() < s.swap_success;
            self.stats.swaps += 1;
            let pair = Pair {
                arm,
                inner: left.inner,
                outer: right.outer,
                state: joined.with_time(now),
                init_time: left.init_time.min(right.init_time),
                deadline: left.deadline.min(right.deadline),
                status: Status::Pending { success },
            };
            let label = span_label(arm, pair.inner, pair.outer);
            let id = self.insert(pair);
            self.queue.schedule(
                now + s.classical_comm_time_s,
                EventClass::Delivery,
                Event::Delivery { pair: id, success, swap: true },
            );
            self.record("swap", label, String::from(if success { "success" } else { "failure" }));
        }
    }

    fn delivery(&mut self, id: u64, success: bool, swap: bool) -> Result<()> {
        let Some(pair) = self.pairs.get(&id) else {
            // cut off while the outcome was in flight
            return Ok(());
        };
        let label = span_label(pair.arm, pair.inner, pair.outer);
        if !success {
            let pair = self.pairs.remove(&id).expect("present");
            self.release(&pair);
            if swap {
                self.stats.swap_failures += 1;
            } else {
                self.stats.purification_failures += 1;
            }
            self.record("discard", label, String::from("failed outcome"));
            return Ok(());
        }
        let state = self.decohere_now(&pair.state)?;
        let pair = self.pairs.get_mut(&id).expect("present");
        pair.state = state;
        pair.status = Status::Available;
        let (arm, inner, outer) = (pair.arm, pair.inner, pair.outer);
        self.record("delivery", label, format!("F={:.6}", state.fidelity()));
        self.on_available(arm, inner, outer);
        Ok(())
    }

    fn cutoff(&mut self, id: u64) {
        if let Some(pair) = self.pairs.remove(&id) {
            self.release(&pair);
            self.stats.cutoffs += 1;
            self.record("cutoff", span_label(pair.arm, pair.inner, pair.outer), String::from("reset"));
        }
    }

    fn window_end(mut self) -> Result<TrialOutcome> {
        let s = self.scenario;
        let h = s.hops_per_arm;
        let p = s.op_errors.gate_fidelity;
        let eta = s.op_errors.measurement_fidelity;
        let mut finals = Vec::with_capacity(s.num_end_nodes);
        let pairs = core::mem::take(&mut self.pairs);
        let mut per_arm: Vec<Vec<BellDiagonalState>> = alloc::vec![Vec::new(); s.num_end_nodes];
        for pair in pairs.into_values() {
            // outcomes still in flight are known to the simulation; successful
            // ones are used once their messages arrive
            let usable = matches!(pair.status, Status::Available | Status::Pending { success: true });
            if usable && pair.inner == 0 && pair.outer == h {
                let at = self.queue.now().max(pair.state.last_update_time);
                per_arm[pair.arm].push(bell_algebra::decohere_to(&pair.state, at, &self.memory, &self.memory)?);
            } else {
                self.stats.discarded_at_window_end += 1;
            }
        }
        for (arm, mut held) in per_arm.into_iter().enumerate() {
            // purify the two lowest-fidelity pairs until at most one is left
            while held.len() >= 2 {
                held.sort_by(|a, b| b.fidelity().total_cmp(&a.fidelity()));
                let low = held.pop().expect("two pairs");
                let high = held.pop().expect("two pairs");
                let outcome =
                    bell_algebra::purify(&high.dejmps_rotated(), &low.dejmps_rotated(), (p, p), (eta, eta))?;
                self.stats.purifications += 1;
                let success = self.rng.gen::<f64>() < outcome.success_prob;
                self.record(
                    "final_purify",
                    span_label(arm, 0, h),
                    format!("{} F={:.6}", if success { "success" } else { "failure" }, outcome.fidelity),
                );
                if success {
                    held.push(outcome.state);
                } else {
                    self.stats.purification_failures += 1;
                }
            }
            finals.push(held.pop());
        }
        let link_pairs: Vec<BellDiagonalState> = finals.iter().flatten().copied().collect();
        let probe = if link_pairs.len() == s.num_end_nodes {
            let probe = assemble(&link_pairs, s.assembly_method, &s.noisy_spec(), s.assembly_mode, self.rng)?;
            self.record(
                "assembly",
                String::from("all"),
                format!("success F={:.6}", probe.fidelity_to_ghz()),
            );
            Some(probe)
        } else {
            self.record(
                "assembly",
                String::from("all"),
                format!("failure links={}/{}", link_pairs.len(), s.num_end_nodes),
            );
            None
        };
        Ok(TrialOutcome {
            index: 0,
            probe,
            link_pairs,
            stats: self.stats,
            log: self.log.unwrap_or_default(),
        })
    }
}

/// Runs one trial with its own random stream.
pub fn run_trial_with_rng(
    scenario: &NetworkScenario,
    rng: &mut ChaCha8Rng,
    logging: bool,
) -> Result<TrialOutcome> {
    Trial::new(scenario, rng, logging)?.run()
}
