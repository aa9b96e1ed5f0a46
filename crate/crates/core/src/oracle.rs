//! Offline ground truth: exact expected spread on small graphs, exhaustive
//! best-set search, and greedy / lazy-greedy maximization used as the regret
//! benchmark.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::algorithms::gain_key;
use crate::cascade::{seeded_rng, Simulator};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId, ProbabilityMode};
use crate::numfmt::sig9;

/// Largest number of uncertain edges (0 < p < 1) `exact_spread` will enumerate.
pub const EXACT_EDGE_LIMIT: usize = 20;

/// Largest number of candidate sets `brute_force_best` will evaluate.
pub const BRUTE_FORCE_LIMIT: u128 = 100_000;

/// Default Monte Carlo batch for benchmark values.
pub const DEFAULT_EVAL_SAMPLES: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Samples {
    Exact,
    MonteCarlo(u64),
}

impl fmt::Display for Samples {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Samples::Exact => f.write_str("exact"),
            Samples::MonteCarlo(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Seeds in selection order.
    pub seed_set: Vec<NodeId>,
    pub estimated_value: f64,
    pub per_step_gains: Vec<f64>,
    pub samples_used: Samples,
}

fn check_seeds(graph: &Graph, seeds: &[NodeId]) -> Result<()> {
    match seeds.iter().find(|&&s| s >= graph.node_count()) {
        Some(&id) => Err(Error::NodeOutOfRange {
            id,
            node_count: graph.node_count(),
        }),
        None => Ok(()),
    }
}

/// Expected normalized spread computed by enumerating live-edge realizations.
///
/// Edges with probability 0 or 1 are fixed, so only edges with `0 < p < 1`
/// count toward [`EXACT_EDGE_LIMIT`].
pub fn exact_spread(graph: &Graph, seeds: &[NodeId]) -> Result<f64> {
    check_seeds(graph, seeds)?;
    let n = graph.node_count();
    if n == 0 {
        return Ok(0.0);
    }
    let mut fixed: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    let mut uncertain: Vec<(NodeId, NodeId, f64)> = Vec::new();
    for (s, d, p) in graph.edges() {
        if p == 1.0 {
            fixed[s].push(d);
        } else if p > 0.0 {
            uncertain.push((s, d, p));
        }
    }
    if uncertain.len() > EXACT_EDGE_LIMIT {
        return Err(Error::TooLarge {
            what: "uncertain edge count",
            value: uncertain.len() as u128,
            limit: EXACT_EDGE_LIMIT as u128,
        });
    }

    let mut live: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    let mut seen = vec![false; n];
    let mut stack = Vec::with_capacity(n);
    let mut expected = 0.0;
    for mask in 0u32..(1u32 << uncertain.len()) {
        let mut weight = 1.0;
        for adj in live.iter_mut() {
            adj.clear();
        }
        for (bit, &(s, d, p)) in uncertain.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                weight *= p;
                live[s].push(d);
            } else {
                weight *= 1.0 - p;
            }
        }
        seen.iter_mut().for_each(|v| *v = false);
        stack.clear();
        let mut reached = 0usize;
        for &s in seeds {
            if !seen[s] {
                seen[s] = true;
                reached += 1;
                stack.push(s);
            }
        }
        while let Some(u) = stack.pop() {
            for &v in fixed[u].iter().chain(&live[u]) {
                if !seen[v] {
                    seen[v] = true;
                    reached += 1;
                    stack.push(v);
                }
            }
        }
        expected += weight * reached as f64;
    }
    Ok(expected / n as f64)
}

/// Monte Carlo estimate of the normalized spread from `samples` cascades on
/// stream `stream` of `seed`.
pub fn monte_carlo_spread(graph: &Graph, seeds: &[NodeId], samples: u64, seed: u64, stream: u64) -> Result<f64> {
    check_seeds(graph, seeds)?;
    let n = graph.node_count();
    if n == 0 || samples == 0 {
        return Ok(0.0);
    }
    let mut rng = seeded_rng(seed, stream);
    let mut sim = Simulator::new(n);
    let mut total = 0u64;
    for _ in 0..samples {
        total += sim.run(graph, seeds, &mut rng)?.len() as u64;
    }
    Ok(total as f64 / (samples as f64 * n as f64))
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Exhaustive search over all sets of size at most `k`, evaluated exactly.
/// Ties go to the lexicographically smallest set.
pub fn brute_force_best(graph: &Graph, k: usize) -> Result<OracleResult> {
    let n = graph.node_count();
    if k > n {
        return Err(Error::Budget { k, n });
    }
    let candidates: u128 = (0..=k).map(|i| binomial(n, i)).sum();
    if candidates > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            what: "candidate set count",
            value: candidates,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    // Fails fast if the graph is too large to evaluate exactly.
    exact_spread(graph, &[])?;

    fn visit(
        graph: &Graph,
        k: usize,
        start: NodeId,
        current: &mut Vec<NodeId>,
        best: &mut (f64, Vec<NodeId>),
    ) -> Result<()> {
        for u in start..graph.node_count() {
            current.push(u);
            let value = exact_spread(graph, current)?;
            if value > best.0 {
                *best = (value, current.clone());
            }
            if current.len() < k {
                visit(graph, k, u + 1, current, best)?;
            }
            current.pop();
        }
        Ok(())
    }

    let mut best = (exact_spread(graph, &[])?, Vec::new());
    if k > 0 {
        visit(graph, k, 0, &mut Vec::with_capacity(k), &mut best)?;
    }
    let (value, seed_set) = best;
    let mut gains = Vec::with_capacity(seed_set.len());
    let mut prev = 0.0;
    for i in 1..=seed_set.len() {
        let v = exact_spread(graph, &seed_set[..i])?;
        gains.push(v - prev);
        prev = v;
    }
    Ok(OracleResult {
        seed_set,
        estimated_value: value,
        per_step_gains: gains,
        samples_used: Samples::Exact,
    })
}

/// Plain greedy: each step evaluates every remaining element and takes the
/// largest gain, smallest id on ties.
pub fn naive_greedy<F>(n: usize, k: usize, mut value: F) -> Result<OracleResult>
where
    F: FnMut(&[NodeId]) -> Result<f64>,
{
    if k > n {
        return Err(Error::Budget { k, n });
    }
    let mut set: Vec<NodeId> = Vec::with_capacity(k);
    let mut gains = Vec::with_capacity(k);
    let mut current = value(&set)?;
    let mut trial = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<(f64, NodeId)> = None;
        for u in (0..n).filter(|u| !set.contains(u)) {
            trial.clear();
            trial.extend_from_slice(&set);
            trial.push(u);
            let gain = value(&trial)? - current;
            if best.is_none_or(|(g, _)| gain_key(gain) > gain_key(g)) {
                best = Some((gain, u));
            }
        }
        let (gain, u) = best.expect("k <= n");
        set.push(u);
        gains.push(gain);
        current = value(&set)?;
    }
    Ok(OracleResult {
        seed_set: set,
        estimated_value: current,
        per_step_gains: gains,
        samples_used: Samples::Exact,
    })
}

#[derive(Debug, Clone, Copy)]
struct Stale {
    gain: i64,
    raw: f64,
    node: NodeId,
    round: usize,
}

impl PartialEq for Stale {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Stale {}

impl PartialOrd for Stale {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Stale {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .cmp(&other.gain)
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// CELF lazy greedy. `singletons[u]` holds `value({u})`; `value` evaluates
/// any other set. Stale gains stay in the heap as upper bounds and only the
/// top is re-evaluated.
pub fn lazy_greedy<F>(n: usize, k: usize, singletons: &[f64], mut value: F) -> Result<OracleResult>
where
    F: FnMut(&[NodeId]) -> Result<f64>,
{
    if k > n {
        return Err(Error::Budget { k, n });
    }
    assert_eq!(singletons.len(), n, "one singleton value per element");
    let empty = value(&[])?;
    let mut heap: BinaryHeap<Stale> = singletons
        .iter()
        .enumerate()
        .map(|(node, &v)| Stale {
            gain: gain_key(v - empty),
            raw: v - empty,
            node,
            round: 0,
        })
        .collect();
    let mut set = Vec::with_capacity(k);
    let mut gains = Vec::with_capacity(k);
    let mut current = empty;
    let mut trial = Vec::with_capacity(k);
    while set.len() < k {
        let mut top = heap.pop().expect("k <= n");
        if top.round == set.len() {
            set.push(top.node);
            gains.push(top.raw);
            if set.len() < k {
                current = value(&set)?;
            }
            continue;
        }
        trial.clear();
        trial.extend_from_slice(&set);
        trial.push(top.node);
        top.raw = value(&trial)? - current;
        top.gain = gain_key(top.raw);
        top.round = set.len();
        heap.push(top);
    }
    let estimated_value = value(&set)?;
    Ok(OracleResult {
        seed_set: set,
        estimated_value,
        per_step_gains: gains,
        samples_used: Samples::Exact,
    })
}

/// Offline CELF greedy with Monte Carlo gains; the returned value comes from
/// a final independent batch of `eval_samples` cascades.
pub fn offline_greedy(graph: &Graph, k: usize, eval_samples: u64, seed: u64) -> Result<OracleResult> {
    let n = graph.node_count();
    if k > n {
        return Err(Error::Budget { k, n });
    }
    if eval_samples == 0 {
        return Err(Error::Config("eval_samples must be at least 1".into()));
    }
    // Stream 0 is the final evaluation, 1..=n the singletons, then one
    // stream per sequential evaluation.
    let singletons: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|u| monte_carlo_spread(graph, &[u], eval_samples, seed, 1 + u as u64))
        .collect::<Result<_>>()?;
    let mut stream = 1 + n as u64;
    let mut result = lazy_greedy(n, k, &singletons, |set| {
        if set.is_empty() {
            return Ok(0.0);
        }
        stream += 1;
        monte_carlo_spread(graph, set, eval_samples, seed, stream)
    })?;
    result.estimated_value = monte_carlo_spread(graph, &result.seed_set, eval_samples, seed, 0)?;
    result.samples_used = Samples::MonteCarlo(eval_samples);
    Ok(result)
}

/// Which offline value the regret is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BenchmarkKind {
    /// `f(S_grd)` from offline lazy greedy.
    #[default]
    Greedy,
    /// `(1 - 1/e) f(S*)` from exhaustive search (small graphs only).
    Optimal,
}

impl fmt::Display for BenchmarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchmarkKind::Greedy => "greedy",
            BenchmarkKind::Optimal => "optimal",
        })
    }
}

impl FromStr for BenchmarkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(BenchmarkKind::Greedy),
            "optimal" => Ok(BenchmarkKind::Optimal),
            _ => Err(Error::Config(format!("unknown benchmark {s:?} (expected greedy or optimal)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub value: f64,
    pub seeds: Vec<NodeId>,
}

pub fn compute_benchmark(
    graph: &Graph,
    k: usize,
    kind: BenchmarkKind,
    eval_samples: u64,
    seed: u64,
) -> Result<Benchmark> {
    match kind {
        BenchmarkKind::Greedy => {
            let r = offline_greedy(graph, k, eval_samples, seed)?;
            Ok(Benchmark {
                value: r.estimated_value,
                seeds: r.seed_set,
            })
        }
        BenchmarkKind::Optimal => {
            let r = brute_force_best(graph, k)?;
            Ok(Benchmark {
                value: (1.0 - (-1.0f64).exp()) * r.estimated_value,
                seeds: r.seed_set,
            })
        }
    }
}

/// Benchmark cache stored beside a graph file: one `k mode value ids...`
/// record per line, later lines winning.
#[derive(Debug, Clone)]
pub struct BenchmarkCache {
    path: PathBuf,
}

impl BenchmarkCache {
    pub fn beside(graph_path: &Path) -> Self {
        let mut name = graph_path.as_os_str().to_owned();
        name.push(".bench");
        BenchmarkCache { path: name.into() }
    }

    pub fn at(path: impl Into<PathBuf>) -> Self {
        BenchmarkCache { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn lookup(&self, k: usize, mode: &str) -> Result<Option<Benchmark>> {
        let text = match fs::read_to_string(&self.path) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(&self.path, e)),
        };
        let mut found = None;
        for (idx, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::Parse {
                path: self.path.clone(),
                line: idx + 1,
                msg: msg.to_string(),
            };
            if fields.len() < 3 {
                return Err(bad("expected `k mode value node_ids...`"));
            }
            let rk: usize = fields[0].parse().map_err(|_| bad("bad k"))?;
            if rk != k || fields[1] != mode {
                continue;
            }
            let value: f64 = fields[2].parse().map_err(|_| bad("bad value"))?;
            let seeds = fields[3..]
                .iter()
                .map(|s| s.parse::<NodeId>().map_err(|_| bad("bad node id")))
                .collect::<Result<Vec<_>>>()?;
            found = Some(Benchmark { value, seeds });
        }
        Ok(found)
    }

    pub fn append(&self, k: usize, mode: &str, bench: &Benchmark) -> Result<()> {
        let mut line = format!("{k} {mode} {}", sig9(bench.value));
        for s in &bench.seeds {
            line.push_str(&format!(" {s}"));
        }
        line.push('\n');
        let mut f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        f.write_all(line.as_bytes()).map_err(|e| Error::io(&self.path, e))
    }
}

/// Cache key for a benchmark: probability mode plus benchmark kind.
pub fn cache_mode(mode: ProbabilityMode, kind: BenchmarkKind) -> String {
    match kind {
        BenchmarkKind::Greedy => mode.to_string(),
        BenchmarkKind::Optimal => format!("{mode}/optimal"),
    }
}
