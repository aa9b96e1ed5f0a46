//! Explore-then-commit greedy: every phase estimates each remaining arm
//! added to the committed set, `m` plays apiece, and commits the best.

use crate::cascade::CascadeEnvironment;
use crate::error::Result;
use crate::graph::NodeId;

use super::{check_budget, exploit, Algorithm, Commit, PlayCounts, RunRecord};

pub fn etcg_run(env: &mut CascadeEnvironment<'_>, k: usize) -> Result<RunRecord> {
    let m = check_budget(env, k)?;
    etcg_run_with_m(env, k, m)
}

pub(crate) fn etcg_run_with_m(env: &mut CascadeEnvironment<'_>, k: usize, m: u64) -> Result<RunRecord> {
    let n = env.arm_count();
    let mut committed: Vec<NodeId> = Vec::with_capacity(k);
    let mut in_set = vec![false; n];
    let mut commits = Vec::with_capacity(k);
    // Most recent estimate of f(S ∪ {a}) per arm.
    let mut last_value: Vec<Option<f64>> = vec![None; n];
    let mut plays = PlayCounts::default();
    let mut truncated = false;
    let mut action = Vec::with_capacity(k);

    'phases: while committed.len() < k {
        let mut best: Option<(f64, NodeId)> = None;
        for a in (0..n).filter(|&a| !in_set[a]) {
            if env.remaining() < m {
                truncated = true;
                break 'phases;
            }
            action.clear();
            action.extend_from_slice(&committed);
            action.push(a);
            let value = env.mean_of_plays(&action, m)?;
            plays.explore += m;
            last_value[a] = Some(value);
            // Ascending scan, so strict improvement keeps the smallest id on ties.
            if best.is_none_or(|(v, _)| value > v) {
                best = Some((value, a));
            }
        }
        let (_, node) = best.expect("k <= n leaves a candidate");
        in_set[node] = true;
        committed.push(node);
        commits.push(Commit {
            node,
            round: env.rounds_used(),
        });
    }

    if truncated {
        // Best-known extension: latest estimates first, never-estimated arms last.
        let mut rest: Vec<NodeId> = (0..n).filter(|&a| !in_set[a]).collect();
        rest.sort_by(|&a, &b| match (last_value[a], last_value[b]) {
            (Some(x), Some(y)) => y.total_cmp(&x).then(a.cmp(&b)),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => a.cmp(&b),
        });
        for node in rest.into_iter().take(k - committed.len()) {
            committed.push(node);
            commits.push(Commit {
                node,
                round: env.rounds_used(),
            });
        }
    }

    let exploration_end = env.rounds_used();
    let rounds = env.remaining();
    exploit(env, &committed, rounds)?;
    plays.exploit += rounds;
    Ok(RunRecord::from_env(
        Algorithm::Etcg,
        k,
        m,
        env,
        commits,
        plays,
        exploration_end,
        truncated,
    ))
}
