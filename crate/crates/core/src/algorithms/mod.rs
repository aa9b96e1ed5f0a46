//! Online policies over the full-bandit environment.
//!
//! Every policy consumes exactly `horizon` rounds of a fresh
//! [`CascadeEnvironment`] and returns a [`RunRecord`] with the per-round
//! trace, the order in which seeds were committed, and play accounting.

use std::fmt;
use std::str::FromStr;

use crate::cascade::CascadeEnvironment;
use crate::error::{Error, Result};
use crate::graph::NodeId;

mod etcg;
mod lofa;

pub use etcg::etcg_run;
pub use lofa::{lofa_run, Lofa, LofaEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Lofa,
    Etcg,
    /// Plays a fixed, externally supplied seed set every round.
    GreedyFixed,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Lofa => "lofa",
            Algorithm::Etcg => "etcg",
            Algorithm::GreedyFixed => "greedy-fixed",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lofa" => Ok(Algorithm::Lofa),
            "etcg" => Ok(Algorithm::Etcg),
            "greedy-fixed" => Ok(Algorithm::GreedyFixed),
            _ => Err(Error::Config(format!(
                "unknown algorithm {s:?} (expected lofa, etcg or greedy-fixed)"
            ))),
        }
    }
}

/// What LOFA's heap keys hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MgSemantics {
    /// Estimated marginal gain: `f̄(S ∪ {u}) - f̄(S)`.
    #[default]
    Diff,
    /// Estimated set value `f̄(S ∪ {u})`.
    Value,
}

impl fmt::Display for MgSemantics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MgSemantics::Diff => "diff",
            MgSemantics::Value => "value",
        })
    }
}

impl FromStr for MgSemantics {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diff" => Ok(MgSemantics::Diff),
            "value" => Ok(MgSemantics::Value),
            _ => Err(Error::Config(format!("unknown mg semantics {s:?} (expected diff or value)"))),
        }
    }
}

/// Rounds spent, by purpose. `shortcuts` counts re-flags that reused a
/// cached estimate and therefore spent nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PlayCounts {
    pub init: u64,
    pub explore: u64,
    pub exploit: u64,
    pub shortcuts: u64,
}

impl PlayCounts {
    pub fn total(&self) -> u64 {
        self.init + self.explore + self.exploit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Commit {
    pub node: NodeId,
    /// Rounds consumed when the node was committed.
    pub round: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub k: usize,
    pub horizon: u64,
    /// Plays per estimate (0 for policies that never estimate).
    pub m: u64,
    pub rewards: Vec<f64>,
    pub activated: Vec<usize>,
    pub commits: Vec<Commit>,
    pub plays: PlayCounts,
    /// First round of the exploitation phase.
    pub exploration_end: u64,
    /// Set when the horizon ran out before exploration finished.
    pub truncated: bool,
}

impl RunRecord {
    pub fn seeds(&self) -> Vec<NodeId> {
        self.commits.iter().map(|c| c.node).collect()
    }

    pub fn cumulative_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    #[allow(clippy::too_many_arguments)]
    fn from_env(
        algorithm: Algorithm,
        k: usize,
        m: u64,
        env: &CascadeEnvironment<'_>,
        commits: Vec<Commit>,
        plays: PlayCounts,
        exploration_end: u64,
        truncated: bool,
    ) -> Self {
        let log = env.log();
        RunRecord {
            algorithm,
            k,
            horizon: env.horizon(),
            m,
            rewards: log.iter().map(|r| r.reward).collect(),
            activated: log.iter().map(|r| r.activated).collect(),
            commits,
            plays,
            exploration_end,
            truncated,
        }
    }
}

/// Maps a gain onto a 2^-40 grid so that gains which agree up to float
/// rounding (for example `a/n - b/n` vs `c/n - d/n` with `a - b == c - d`)
/// compare equal and fall through to the id tie-break.
pub(crate) fn gain_key(gain: f64) -> i64 {
    (gain * (1u64 << 40) as f64).round() as i64
}

/// `m = ⌈(T √(2 ln T) / (n + 2nk √(2 ln T)))^(2/3)⌉`, at least 1.
pub fn compute_m(horizon: u64, n: usize, k: usize) -> Result<u64> {
    if horizon < 2 {
        return Err(Error::Horizon(horizon));
    }
    if n == 0 || k == 0 {
        return Err(Error::Budget { k, n });
    }
    let t = horizon as f64;
    let (n, k) = (n as f64, k as f64);
    let root = (2.0 * t.ln()).sqrt();
    let ratio = t * root / (n + 2.0 * n * k * root);
    Ok((ratio.powf(2.0 / 3.0).ceil() as u64).max(1))
}

/// Plays `seeds` for `rounds` rounds.
pub fn exploit(env: &mut CascadeEnvironment<'_>, seeds: &[NodeId], rounds: u64) -> Result<()> {
    for _ in 0..rounds {
        env.play(seeds)?;
    }
    Ok(())
}

/// Plays a fixed seed set for the whole horizon (the offline-greedy reference trace).
pub fn fixed_run(env: &mut CascadeEnvironment<'_>, seeds: &[NodeId]) -> Result<RunRecord> {
    check_fresh(env)?;
    let rounds = env.remaining();
    exploit(env, seeds, rounds)?;
    let commits = seeds.iter().map(|&node| Commit { node, round: 0 }).collect();
    let plays = PlayCounts {
        exploit: rounds,
        ..PlayCounts::default()
    };
    Ok(RunRecord::from_env(
        Algorithm::GreedyFixed,
        seeds.len(),
        0,
        env,
        commits,
        plays,
        0,
        false,
    ))
}

fn check_fresh(env: &CascadeEnvironment<'_>) -> Result<()> {
    if env.rounds_used() != 0 {
        return Err(Error::Config(format!(
            "policy needs a fresh environment ({} rounds already used)",
            env.rounds_used()
        )));
    }
    Ok(())
}

fn check_budget(env: &CascadeEnvironment<'_>, k: usize) -> Result<u64> {
    check_fresh(env)?;
    let n = env.arm_count();
    if k == 0 || k > n {
        return Err(Error::Budget { k, n });
    }
    compute_m(env.horizon(), n, k)
}
