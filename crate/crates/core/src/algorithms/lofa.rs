//! Lazy online forward selection.
//!
//! Greedy forward selection driven by bandit estimates, with CELF++-style
//! laziness: every arm sits in a max-heap keyed by its last estimated gain,
//! and only the top of the heap is re-estimated. Each entry also caches its
//! gain with respect to `S ∪ {prev_best}`, which becomes exact-for-free when
//! `prev_best` is the node that gets committed.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::cascade::CascadeEnvironment;
use crate::error::{Error, Result};
use crate::graph::NodeId;

use super::{check_budget, exploit, gain_key, Algorithm, Commit, MgSemantics, PlayCounts, RunRecord};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LofaEntry {
    pub node: NodeId,
    /// Estimated gain with respect to the committed set.
    pub mg1: f64,
    /// Estimated gain with respect to the committed set plus `prev_best`.
    pub mg2: f64,
    pub prev_best: Option<NodeId>,
    /// Phase (committed-set size) in which `mg1` was last refreshed.
    pub flag: usize,
}

/// Heap key: larger gain first, then smaller node id.
#[derive(Debug, Clone, Copy)]
struct Key {
    gain: i64,
    node: NodeId,
}

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .cmp(&other.gain)
            .then_with(|| other.node.cmp(&self.node))
    }
}

enum Kind {
    Init,
    Explore,
}

/// Signals that the horizon cannot pay for the next estimate.
struct OutOfRounds;

/// One LOFA run in progress. `run` drives it end to end; `initialize` and
/// `select_phase` are exposed for step-wise inspection.
pub struct Lofa<'e, 'g> {
    env: &'e mut CascadeEnvironment<'g>,
    k: usize,
    m: u64,
    semantics: MgSemantics,
    entries: Vec<Option<LofaEntry>>,
    heap: BinaryHeap<Key>,
    committed: Vec<NodeId>,
    commits: Vec<Commit>,
    /// Running estimate of f(S).
    set_value: f64,
    last_seed: Option<NodeId>,
    curr_best: Option<NodeId>,
    plays: PlayCounts,
    truncated: bool,
    scratch: Vec<NodeId>,
}

impl<'e, 'g> Lofa<'e, 'g> {
    pub fn new(env: &'e mut CascadeEnvironment<'g>, k: usize, semantics: MgSemantics) -> Result<Self> {
        let m = check_budget(env, k)?;
        Ok(Self::with_m(env, k, m, semantics))
    }

    /// Like [`Lofa::new`] with an explicit per-estimate play count.
    pub fn with_m(env: &'e mut CascadeEnvironment<'g>, k: usize, m: u64, semantics: MgSemantics) -> Self {
        let n = env.arm_count();
        Lofa {
            env,
            k,
            m: m.max(1),
            semantics,
            entries: vec![None; n],
            heap: BinaryHeap::with_capacity(n),
            committed: Vec::with_capacity(k),
            commits: Vec::with_capacity(k),
            set_value: 0.0,
            last_seed: None,
            curr_best: None,
            plays: PlayCounts::default(),
            truncated: false,
            scratch: Vec::with_capacity(k + 2),
        }
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn phase(&self) -> usize {
        self.committed.len()
    }

    pub fn committed(&self) -> &[NodeId] {
        &self.committed
    }

    pub fn entry(&self, node: NodeId) -> Option<&LofaEntry> {
        self.entries[node].as_ref()
    }

    pub fn curr_best(&self) -> Option<NodeId> {
        self.curr_best
    }

    pub fn last_seed(&self) -> Option<NodeId> {
        self.last_seed
    }

    pub fn set_value(&self) -> f64 {
        self.set_value
    }

    pub fn plays(&self) -> PlayCounts {
        self.plays
    }

    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    /// Node at the top of the heap, if any.
    pub fn peek(&self) -> Option<NodeId> {
        self.heap.peek().map(|key| key.node)
    }

    /// Mean reward of `committed ∪ extra` over `m` plays, or `OutOfRounds`.
    fn estimate(&mut self, extra: &[NodeId], kind: Kind) -> Result<Result<f64, OutOfRounds>> {
        if self.env.remaining() < self.m {
            return Ok(Err(OutOfRounds));
        }
        self.scratch.clear();
        self.scratch.extend_from_slice(&self.committed);
        self.scratch.extend_from_slice(extra);
        let mean = self.env.mean_of_plays(&self.scratch, self.m)?;
        match kind {
            Kind::Init => self.plays.init += self.m,
            Kind::Explore => self.plays.explore += self.m,
        }
        Ok(Ok(mean))
    }

    /// The value subtracted from a set estimate to turn it into a gain.
    fn baseline(&self) -> f64 {
        match self.semantics {
            MgSemantics::Diff => self.set_value,
            MgSemantics::Value => 0.0,
        }
    }

    fn mg1_of(&self, node: NodeId) -> f64 {
        self.entries[node].as_ref().map_or(f64::NEG_INFINITY, |e| e.mg1)
    }

    /// Gain of `u` given `S ∪ {best}`, from an estimate of `f(S ∪ {best, u})`.
    fn second_gain(&self, mean: f64, best: NodeId) -> f64 {
        match self.semantics {
            MgSemantics::Diff => mean - (self.set_value + self.mg1_of(best)),
            MgSemantics::Value => mean,
        }
    }

    fn update_curr_best(&mut self, node: NodeId) {
        let better = match self.curr_best {
            None => true,
            Some(best) => {
                let (a, b) = (gain_key(self.mg1_of(node)), gain_key(self.mg1_of(best)));
                a > b || (a == b && node < best)
            }
        };
        if better {
            self.curr_best = Some(node);
        }
    }

    fn push(&mut self, entry: LofaEntry) {
        self.heap.push(Key {
            gain: gain_key(entry.mg1),
            node: entry.node,
        });
        self.entries[entry.node] = Some(entry);
    }

    fn commit(&mut self, node: NodeId) {
        let mg1 = self.mg1_of(node);
        self.set_value = match self.semantics {
            MgSemantics::Diff => self.set_value + mg1,
            MgSemantics::Value => mg1,
        };
        self.committed.push(node);
        self.commits.push(Commit {
            node,
            round: self.env.rounds_used(),
        });
        self.last_seed = Some(node);
        self.curr_best = None;
    }

    /// Estimates every singleton (and its pair with the running best) in
    /// ascending node order and fills the heap. Stops early, committing from
    /// what is known, if the horizon runs out.
    pub fn initialize(&mut self) -> Result<()> {
        for u in 0..self.env.arm_count() {
            let mg1 = match self.estimate(&[u], Kind::Init)? {
                Ok(mean) => mean - self.baseline(),
                Err(OutOfRounds) => return self.truncate(),
            };
            let prev_best = self.curr_best;
            let mg2 = match prev_best {
                None => mg1,
                Some(best) => match self.estimate(&[u, best], Kind::Init)? {
                    Ok(mean) => self.second_gain(mean, best),
                    Err(OutOfRounds) => {
                        self.push(LofaEntry { node: u, mg1, mg2: mg1, prev_best: None, flag: 0 });
                        return self.truncate();
                    }
                },
            };
            self.push(LofaEntry {
                node: u,
                mg1,
                mg2,
                prev_best,
                flag: 0,
            });
            self.update_curr_best(u);
        }
        Ok(())
    }

    /// Pops lazily until the top entry is fresh for this phase, then commits it.
    pub fn select_phase(&mut self) -> Result<()> {
        if self.truncated || self.committed.len() >= self.k {
            return Ok(());
        }
        loop {
            let phase = self.committed.len();
            let Some(Key { node: u, .. }) = self.heap.pop() else {
                return Err(Error::Budget {
                    k: self.k,
                    n: self.env.arm_count(),
                });
            };
            let mut entry = self.entries[u].expect("heap nodes have entries");
            if entry.flag == phase {
                self.commit(u);
                return Ok(());
            }
            if entry.prev_best.is_some() && entry.prev_best == self.last_seed && entry.flag + 1 == phase {
                // mg2 was measured against S ∪ {last_seed}, which is now S.
                entry.mg1 = entry.mg2;
                self.plays.shortcuts += 1;
            } else {
                entry.mg1 = match self.estimate(&[u], Kind::Explore)? {
                    Ok(mean) => mean - self.baseline(),
                    Err(OutOfRounds) => {
                        self.push(entry);
                        return self.truncate();
                    }
                };
                entry.mg2 = match self.curr_best {
                    None => entry.mg1,
                    Some(best) => match self.estimate(&[best, u], Kind::Explore)? {
                        Ok(mean) => self.second_gain(mean, best),
                        Err(OutOfRounds) => {
                            entry.flag = phase;
                            entry.prev_best = None;
                            self.push(entry);
                            return self.truncate();
                        }
                    },
                };
                entry.prev_best = self.curr_best;
            }
            entry.flag = phase;
            self.push(entry);
            self.update_curr_best(u);
        }
    }

    /// Out of exploration budget: fill the remaining slots from the heap
    /// order (current estimates, no more plays), then never-estimated nodes
    /// by ascending id.
    fn truncate(&mut self) -> Result<()> {
        self.truncated = true;
        while self.committed.len() < self.k {
            let Some(Key { node, .. }) = self.heap.pop() else { break };
            self.commit(node);
        }
        let mut next = 0;
        while self.committed.len() < self.k {
            if self.entries[next].is_none() && !self.committed.contains(&next) {
                self.committed.push(next);
                self.commits.push(Commit {
                    node: next,
                    round: self.env.rounds_used(),
                });
            }
            next += 1;
        }
        Ok(())
    }

    /// Initialization, `k` lazy phases, then exploitation to the horizon.
    pub fn run(mut self) -> Result<RunRecord> {
        self.initialize()?;
        while !self.truncated && self.committed.len() < self.k {
            self.select_phase()?;
        }
        let exploration_end = self.env.rounds_used();
        let rounds = self.env.remaining();
        exploit(self.env, &self.committed, rounds)?;
        self.plays.exploit += rounds;
        Ok(RunRecord::from_env(
            Algorithm::Lofa,
            self.k,
            self.m,
            self.env,
            self.commits,
            self.plays,
            exploration_end,
            self.truncated,
        ))
    }
}

/// Runs LOFA for the environment's whole horizon with budget `k`.
pub fn lofa_run(env: &mut CascadeEnvironment<'_>, k: usize, semantics: MgSemantics) -> Result<RunRecord> {
    Lofa::new(env, k, semantics)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::seeded_rng;
    use crate::graph::{line_graph, Graph};

    fn isolated(n: usize) -> Graph {
        Graph::from_edges(n, std::iter::empty()).unwrap()
    }

    #[test]
    fn init_on_constant_function() {
        let g = isolated(3);
        let mut env = CascadeEnvironment::new(&g, 1000, seeded_rng(1, 0));
        let mut lofa = Lofa::with_m(&mut env, 2, 4, MgSemantics::Diff);
        lofa.initialize().unwrap();
        for u in 0..3 {
            assert_eq!(lofa.entry(u).unwrap().mg1, 1.0 / 3.0);
        }
        assert_eq!(lofa.peek(), Some(0));
        let first = lofa.entry(0).unwrap();
        assert_eq!(first.prev_best, None);
        assert_eq!(first.mg2, first.mg1);
        // Node 0 needs m plays, the others 2m each.
        assert_eq!(lofa.plays().init, 4 + 2 * 8);
    }

    #[test]
    fn init_on_deterministic_chain() {
        let g = line_graph(3, 1.0).unwrap();
        let mut env = CascadeEnvironment::new(&g, 1000, seeded_rng(1, 0));
        let mut lofa = Lofa::with_m(&mut env, 1, 5, MgSemantics::Diff);
        lofa.initialize().unwrap();
        assert_eq!(lofa.entry(0).unwrap().mg1, 1.0);
        assert_eq!(lofa.entry(1).unwrap().mg1, 2.0 / 3.0);
        assert_eq!(lofa.entry(2).unwrap().mg1, 1.0 / 3.0);
        assert_eq!(lofa.curr_best(), Some(0));
        // Node 1 adds nothing once node 0 is in.
        assert_eq!(lofa.entry(1).unwrap().mg2, 0.0);
    }

    #[test]
    fn first_phase_commits_without_plays() {
        let g = line_graph(3, 1.0).unwrap();
        let mut env = CascadeEnvironment::new(&g, 1000, seeded_rng(1, 0));
        let mut lofa = Lofa::with_m(&mut env, 2, 5, MgSemantics::Diff);
        lofa.initialize().unwrap();
        let before = lofa.plays();
        lofa.select_phase().unwrap();
        assert_eq!(lofa.committed(), [0]);
        assert_eq!(lofa.plays(), before);
        assert_eq!(lofa.set_value(), 1.0);
        assert_eq!(lofa.curr_best(), None);
    }

    #[test]
    fn zero_gains_commit_by_tie_break() {
        let g = isolated(5);
        let mut env = CascadeEnvironment::new(&g, 10_000, seeded_rng(1, 0));
        let mut lofa = Lofa::with_m(&mut env, 3, 3, MgSemantics::Diff);
        lofa.initialize().unwrap();
        for _ in 0..3 {
            lofa.select_phase().unwrap();
        }
        assert_eq!(lofa.committed(), [0, 1, 2]);
    }

    #[test]
    fn shortcut_spends_no_rounds() {
        let g = isolated(4);
        let mut env = CascadeEnvironment::new(&g, 10_000, seeded_rng(1, 0));
        let mut lofa = Lofa::with_m(&mut env, 2, 3, MgSemantics::Diff);
        lofa.initialize().unwrap();
        lofa.select_phase().unwrap();
        let used = lofa.env.rounds_used();
        // Node 1 was estimated against node 0, which was just committed.
        assert_eq!(lofa.entry(1).unwrap().prev_best, Some(0));
        lofa.select_phase().unwrap();
        assert_eq!(lofa.plays().shortcuts, 1);
        assert_eq!(lofa.env.rounds_used(), used);
        assert_eq!(lofa.committed(), [0, 1]);
    }

    #[test]
    fn closed_form_reward_on_constant_function() {
        // n = 4, k = 2, T = 1000, m = 16. Init: {0} m times, then {u} and
        // {u, 0} m times each for u = 1..3. Phase 0 commits 0 outright,
        // phase 1 shortcuts node 1 and commits it. Exploit {0, 1}.
        let g = isolated(4);
        let mut env = CascadeEnvironment::new(&g, 1000, seeded_rng(3, 0));
        let rec = lofa_run(&mut env, 2, MgSemantics::Diff).unwrap();
        assert_eq!(rec.m, 16);
        assert_eq!(rec.seeds(), [0, 1]);
        assert_eq!(rec.exploration_end, 7 * 16);
        let expected = 16.0 * 0.25 + 3.0 * 16.0 * (0.25 + 0.5) + (1000.0 - 7.0 * 16.0) * 0.5;
        assert_eq!(expected, 484.0);
        assert!((rec.cumulative_reward() - expected).abs() < 1e-9);
        assert_eq!(rec.plays.total(), 1000);
        assert_eq!(rec.rewards.len(), 1000);
    }

    #[test]
    fn k_one_picks_best_singleton() {
        // Chain 0 -> 1 -> 2 plus an isolated pair 3 -> 4.
        let g = Graph::from_edges(5, [(0, 1, 1.0), (1, 2, 1.0), (3, 4, 1.0)]).unwrap();
        let mut env = CascadeEnvironment::new(&g, 500, seeded_rng(3, 0));
        let rec = lofa_run(&mut env, 1, MgSemantics::Diff).unwrap();
        assert_eq!(rec.seeds(), [0]);
    }

    #[test]
    fn tiny_horizon_truncates_but_fills_budget() {
        let g = line_graph(6, 0.5).unwrap();
        for horizon in [2u64, 3, 5, 9, 17] {
            let mut env = CascadeEnvironment::new(&g, horizon, seeded_rng(3, horizon));
            let rec = Lofa::with_m(&mut env, 3, 4, MgSemantics::Diff).run().unwrap();
            assert!(rec.truncated);
            assert_eq!(rec.rewards.len() as u64, horizon);
            assert_eq!(rec.plays.total(), horizon);
            let mut seeds = rec.seeds();
            seeds.sort_unstable();
            seeds.dedup();
            assert_eq!(seeds.len(), 3);
        }
    }

    #[test]
    fn value_semantics_also_runs_to_horizon() {
        let g = line_graph(6, 1.0).unwrap();
        let mut env = CascadeEnvironment::new(&g, 2000, seeded_rng(3, 0));
        let rec = lofa_run(&mut env, 2, MgSemantics::Value).unwrap();
        assert_eq!(rec.rewards.len(), 2000);
        assert_eq!(rec.seeds()[0], 0);
    }

    #[test]
    fn rejects_bad_budget() {
        let g = isolated(3);
        let mut env = CascadeEnvironment::new(&g, 100, seeded_rng(0, 0));
        assert!(matches!(lofa_run(&mut env, 4, MgSemantics::Diff), Err(Error::Budget { k: 4, n: 3 })));
        assert!(matches!(lofa_run(&mut env, 0, MgSemantics::Diff), Err(Error::Budget { .. })));
    }
}
