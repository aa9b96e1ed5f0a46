//! Independent-cascade simulation and the full-bandit environment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

/// Builds the generator used by every environment: ChaCha8 keyed by `seed`,
/// on stream `stream`. ChaCha output is specified independently of platform,
/// so reward logs are bitwise reproducible.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Reusable scratch space for cascades on one graph.
///
/// Activation marks are epoch-stamped so a cascade costs time proportional
/// to the edges it touches, not to the size of the graph.
#[derive(Debug, Clone)]
pub struct Simulator {
    stamp: Vec<u32>,
    epoch: u32,
    frontier: Vec<NodeId>,
    next: Vec<NodeId>,
    active: Vec<NodeId>,
}

impl Simulator {
    pub fn new(node_count: usize) -> Self {
        Simulator {
            stamp: vec![0; node_count],
            epoch: 0,
            frontier: Vec::new(),
            next: Vec::new(),
            active: Vec::new(),
        }
    }

    fn next_epoch(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
    }

    /// Runs one progressive cascade and returns the active set in activation
    /// order. Each step's frontier is processed in ascending node id, and each
    /// node's out-edges in stored order, so the coin sequence is pinned.
    pub fn run<R: Rng + ?Sized>(
        &mut self,
        graph: &Graph,
        seeds: &[NodeId],
        rng: &mut R,
    ) -> Result<&[NodeId]> {
        let n = graph.node_count();
        if self.stamp.len() != n {
            *self = Simulator::new(n);
        }
        if let Some(&bad) = seeds.iter().find(|&&s| s >= n) {
            return Err(Error::NodeOutOfRange {
                id: bad,
                node_count: n,
            });
        }
        self.next_epoch();
        let epoch = self.epoch;
        self.active.clear();
        self.frontier.clear();
        for &s in seeds {
            if self.stamp[s] != epoch {
                self.stamp[s] = epoch;
                self.frontier.push(s);
            }
        }
        self.frontier.sort_unstable();
        self.active.extend_from_slice(&self.frontier);

        while !self.frontier.is_empty() {
            self.next.clear();
            for &u in &self.frontier {
                for e in graph.out_edges(u) {
                    if self.stamp[e.target] != epoch && rng.gen::<f64>() < e.prob {
                        self.stamp[e.target] = epoch;
                        self.next.push(e.target);
                    }
                }
            }
            self.next.sort_unstable();
            self.active.extend_from_slice(&self.next);
            std::mem::swap(&mut self.frontier, &mut self.next);
        }
        Ok(&self.active)
    }
}

/// One cascade from `seeds`; returns the final active set in ascending order.
pub fn simulate_cascade<R: Rng + ?Sized>(
    graph: &Graph,
    seeds: &[NodeId],
    rng: &mut R,
) -> Result<Vec<NodeId>> {
    let mut sim = Simulator::new(graph.node_count());
    let mut active = sim.run(graph, seeds, rng)?.to_vec();
    active.sort_unstable();
    Ok(active)
}

/// Feedback from one play. Policies only ever look at `reward`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlayResult {
    pub activated_count: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlayRecord {
    /// Zero-based round index.
    pub round: u64,
    pub seed_count: usize,
    pub reward: f64,
    pub activated: usize,
}

/// Full-bandit environment: each play runs one cascade, reveals only the
/// normalized spread and consumes one round of the horizon.
#[derive(Debug)]
pub struct CascadeEnvironment<'g> {
    graph: &'g Graph,
    rng: ChaCha8Rng,
    sim: Simulator,
    horizon: u64,
    rounds_used: u64,
    log: Vec<PlayRecord>,
}

impl<'g> CascadeEnvironment<'g> {
    pub fn new(graph: &'g Graph, horizon: u64, rng: ChaCha8Rng) -> Self {
        CascadeEnvironment {
            graph,
            rng,
            sim: Simulator::new(graph.node_count()),
            horizon,
            rounds_used: 0,
            log: Vec::with_capacity(horizon.min(1 << 20) as usize),
        }
    }

    /// Number of base arms (nodes). The graph itself stays hidden from policies.
    pub fn arm_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn rounds_used(&self) -> u64 {
        self.rounds_used
    }

    pub fn remaining(&self) -> u64 {
        self.horizon - self.rounds_used
    }

    pub fn log(&self) -> &[PlayRecord] {
        &self.log
    }

    pub fn into_log(self) -> Vec<PlayRecord> {
        self.log
    }

    pub fn play(&mut self, seeds: &[NodeId]) -> Result<PlayResult> {
        if self.rounds_used >= self.horizon {
            return Err(Error::HorizonExhausted {
                horizon: self.horizon,
            });
        }
        let activated_count = self.sim.run(self.graph, seeds, &mut self.rng)?.len();
        let n = self.graph.node_count();
        let reward = if n == 0 {
            0.0
        } else {
            activated_count as f64 / n as f64
        };
        self.log.push(PlayRecord {
            round: self.rounds_used,
            seed_count: seeds.len(),
            reward,
            activated: activated_count,
        });
        self.rounds_used += 1;
        Ok(PlayResult {
            activated_count,
            reward,
        })
    }

    /// Plays `seeds` exactly `m` times and returns the mean reward.
    ///
    /// The mean is computed from the integer activation total, so identical
    /// outcomes always give bit-identical estimates.
    pub fn mean_of_plays(&mut self, seeds: &[NodeId], m: u64) -> Result<f64> {
        if m == 0 {
            return Err(Error::Config("mean_of_plays needs m >= 1".into()));
        }
        if self.remaining() < m {
            return Err(Error::InsufficientRounds {
                needed: m,
                remaining: self.remaining(),
            });
        }
        let mut total: u64 = 0;
        for _ in 0..m {
            total += self.play(seeds)?.activated_count as u64;
        }
        let n = self.graph.node_count();
        if n == 0 {
            return Ok(0.0);
        }
        Ok(total as f64 / (m as f64 * n as f64))
    }
}
