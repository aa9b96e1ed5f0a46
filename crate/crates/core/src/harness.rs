//! Experiment orchestration: horizon sweeps over repetitions, regret
//! metrics and CSV output.
//!
//! Output files (all UTF-8, LF, floats at 9 significant digits):
//!
//! * `rounds_<algo>_T<T>.csv`: `run_id,algorithm,k,T,rep,t,reward,activated`
//! * `ma_<algo>_T<T>.csv`: `t,ma_mean,ma_std`, the trailing moving average
//!   of reward averaged over repetitions
//! * `summary.csv`: `run_id,algorithm,k,T,rep,cumulative_reward,regret,benchmark_value,seconds,seeds`
//! * `aggregate.csv`: `algorithm,k,T,regret_mean,regret_std,reps`
//! * `manifest.txt`: resolved configuration as `key=value` lines

use std::collections::BTreeMap;
use std::fs;
use std::hash::Hasher;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fnv::FnvHasher;
use rayon::prelude::*;

use crate::algorithms::{compute_m, etcg_run, fixed_run, lofa_run, Algorithm, MgSemantics, RunRecord};
use crate::cascade::{seeded_rng, CascadeEnvironment};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId, ProbabilityMode};
use crate::numfmt::sig9;
use crate::oracle::{cache_mode, compute_benchmark, Benchmark, BenchmarkCache, BenchmarkKind, DEFAULT_EVAL_SAMPLES};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub graph: PathBuf,
    pub prob_mode: ProbabilityMode,
    pub k: usize,
    pub horizons: Vec<u64>,
    pub algorithms: Vec<Algorithm>,
    pub repetitions: usize,
    pub base_seed: u64,
    pub window: usize,
    pub out_dir: PathBuf,
    pub eval_samples: u64,
    pub benchmark: BenchmarkKind,
    pub mg_semantics: MgSemantics,
    /// Worker threads; 0 uses all cores. Outputs do not depend on it.
    pub jobs: usize,
    /// Keep every `stride`-th row of the per-round CSV.
    pub stride: u64,
    /// Measure wall-clock seconds per run. Off by default because timings
    /// make the summary non-reproducible.
    pub timing: bool,
    /// Read/append the benchmark cache beside the graph file.
    pub use_cache: bool,
}

impl ExperimentConfig {
    pub fn new(graph: impl Into<PathBuf>, k: usize) -> Self {
        ExperimentConfig {
            graph: graph.into(),
            prob_mode: ProbabilityMode::File,
            k,
            horizons: vec![20_000, 40_000, 60_000, 80_000, 100_000],
            algorithms: vec![Algorithm::Lofa, Algorithm::Etcg],
            repetitions: 10,
            base_seed: 0,
            window: 100,
            out_dir: PathBuf::from("results"),
            eval_samples: DEFAULT_EVAL_SAMPLES,
            benchmark: BenchmarkKind::Greedy,
            mg_semantics: MgSemantics::Diff,
            jobs: 0,
            stride: 1,
            timing: false,
            use_cache: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.k == 0 {
            return fail("k must be at least 1".into());
        }
        if self.repetitions == 0 {
            return fail("repetitions must be at least 1".into());
        }
        if self.window == 0 {
            return fail("window must be at least 1".into());
        }
        if self.stride == 0 {
            return fail("stride must be at least 1".into());
        }
        if self.eval_samples == 0 {
            return fail("eval samples must be at least 1".into());
        }
        if self.horizons.is_empty() {
            return fail("at least one horizon is required".into());
        }
        if let Some(&t) = self.horizons.iter().find(|&&t| t < 2) {
            return Err(Error::Horizon(t));
        }
        if self.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return fail("horizons must be strictly increasing".into());
        }
        if self.algorithms.is_empty() {
            return fail("at least one algorithm is required".into());
        }
        Ok(())
    }

    /// `key=value` pairs that fully determine the outputs.
    pub fn manifest_entries(&self) -> Vec<(&'static str, String)> {
        let join = |items: Vec<String>| items.join(",");
        vec![
            ("graph", self.graph.display().to_string()),
            ("prob_mode", self.prob_mode.to_string()),
            ("k", self.k.to_string()),
            ("horizons", join(self.horizons.iter().map(u64::to_string).collect())),
            ("algos", join(self.algorithms.iter().map(|a| a.name().to_string()).collect())),
            ("reps", self.repetitions.to_string()),
            ("seed", self.base_seed.to_string()),
            ("window", self.window.to_string()),
            ("samples", self.eval_samples.to_string()),
            ("benchmark", self.benchmark.to_string()),
            ("mg_semantics", self.mg_semantics.to_string()),
            ("jobs", self.jobs.to_string()),
            ("stride", self.stride.to_string()),
            ("timing", self.timing.to_string()),
            ("cache", self.use_cache.to_string()),
            ("out", self.out_dir.display().to_string()),
        ]
    }

    /// Rebuilds a configuration from manifest text. Keys starting with
    /// `derived.` are informational and ignored.
    pub fn from_manifest(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("manifest line {line:?} is not key=value")))?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        let get = |key: &str| {
            map.get(key)
                .cloned()
                .ok_or_else(|| Error::Config(format!("manifest is missing {key:?}")))
        };
        fn num<T: std::str::FromStr>(key: &str, v: String) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("manifest value {key}={v} is invalid")))
        }
        let list = |v: String| -> Vec<String> { v.split(',').map(|s| s.trim().to_string()).collect() };

        let mut cfg = ExperimentConfig::new(get("graph")?, num("k", get("k")?)?);
        cfg.prob_mode = get("prob_mode")?.parse()?;
        cfg.horizons = list(get("horizons")?)
            .into_iter()
            .map(|h| num("horizons", h))
            .collect::<Result<_>>()?;
        cfg.algorithms = list(get("algos")?)
            .iter()
            .map(|a| a.parse())
            .collect::<Result<_>>()?;
        cfg.repetitions = num("reps", get("reps")?)?;
        cfg.base_seed = num("seed", get("seed")?)?;
        cfg.window = num("window", get("window")?)?;
        cfg.eval_samples = num("samples", get("samples")?)?;
        cfg.benchmark = get("benchmark")?.parse()?;
        cfg.mg_semantics = get("mg_semantics")?.parse()?;
        cfg.jobs = num("jobs", get("jobs")?)?;
        cfg.stride = num("stride", get("stride")?)?;
        cfg.timing = num("timing", get("timing")?)?;
        cfg.use_cache = num("cache", get("cache")?)?;
        cfg.out_dir = get("out")?.into();
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub run_id: String,
    pub algorithm: Algorithm,
    pub k: usize,
    pub horizon: u64,
    pub rep: usize,
    pub cumulative_reward: f64,
    pub regret: f64,
    pub benchmark_value: f64,
    pub seconds: f64,
    pub seeds: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub algorithm: Algorithm,
    pub k: usize,
    pub horizon: u64,
    pub regret_mean: f64,
    pub regret_std: f64,
    pub reps: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub benchmark: Benchmark,
    pub summaries: Vec<RunSummary>,
    pub aggregates: Vec<AggregateRow>,
    pub files: Vec<PathBuf>,
}

/// One finished (algorithm, T, repetition) cell.
#[derive(Debug, Clone)]
pub struct Cell {
    pub summary: RunSummary,
    pub record: RunRecord,
}

/// `r[t] = (t + 1) b - Σ_{s <= t} rewards[s]`.
pub fn cumulative_regret(rewards: &[f64], benchmark_value: f64) -> Vec<f64> {
    let mut total = 0.0;
    rewards
        .iter()
        .enumerate()
        .map(|(t, &r)| {
            total += r;
            (t + 1) as f64 * benchmark_value - total
        })
        .collect()
}

/// Mean computed as `x[0] + Σ (x[i] - x[0]) / len`, summed left to right.
/// Exact for constant input.
fn shifted_mean(values: &[f64]) -> f64 {
    let first = values[0];
    first + values.iter().map(|v| v - first).sum::<f64>() / values.len() as f64
}

/// Trailing moving average; the first `window - 1` points average over the
/// prefix available so far. Every point is recomputed from its window, so
/// there is no running-sum drift.
pub fn moving_average(series: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    (0..series.len())
        .map(|t| shifted_mean(&series[(t + 1).saturating_sub(window)..=t]))
        .collect()
}

/// Mean and sample standard deviation (divisor `len - 1`, 0 for one value).
/// Values are sorted first so the result does not depend on input order.
pub fn mean_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Config("cannot aggregate an empty group".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = shifted_mean(&sorted);
    if sorted.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

/// Mean and standard deviation of regret per (algorithm, T).
pub fn aggregate(summaries: &[RunSummary]) -> Result<Vec<AggregateRow>> {
    let mut groups: BTreeMap<(Algorithm, u64), (usize, Vec<f64>)> = BTreeMap::new();
    for s in summaries {
        groups
            .entry((s.algorithm, s.horizon))
            .or_insert_with(|| (s.k, Vec::new()))
            .1
            .push(s.regret);
    }
    groups
        .into_iter()
        .map(|((algorithm, horizon), (k, regrets))| {
            let (regret_mean, regret_std) = mean_std(&regrets)?;
            Ok(AggregateRow {
                algorithm,
                k,
                horizon,
                regret_mean,
                regret_std,
                reps: regrets.len(),
            })
        })
        .collect()
}

/// Generator stream for a cell: a stable hash of (algorithm, T, repetition),
/// so adding or removing algorithms never changes other cells' randomness.
pub fn cell_stream(algorithm: Algorithm, horizon: u64, rep: usize) -> u64 {
    let mut h = FnvHasher::default();
    h.write(algorithm.name().as_bytes());
    h.write_u8(0);
    h.write_u64(horizon);
    h.write_u64(rep as u64);
    h.finish()
}

pub fn run_id(algorithm: Algorithm, k: usize, horizon: u64, rep: usize) -> String {
    format!("{}-k{k}-T{horizon}-r{rep}", algorithm.name())
}

/// Loads the benchmark from the cache or computes (and caches) it.
///
/// Values are always rounded to the 9 digits the cache stores, so a cached
/// and a fresh benchmark give identical downstream numbers.
pub fn resolve_benchmark(config: &ExperimentConfig, graph: &Graph) -> Result<Benchmark> {
    let cache = BenchmarkCache::beside(&config.graph);
    let mode = cache_mode(config.prob_mode, config.benchmark);
    if config.use_cache {
        if let Some(b) = cache.lookup(config.k, &mode)? {
            return Ok(b);
        }
    }
    let mut b = compute_benchmark(graph, config.k, config.benchmark, config.eval_samples, config.base_seed)?;
    b.value = sig9(b.value).parse().expect("formatted float parses");
    if config.use_cache {
        cache.append(config.k, &mode, &b)?;
    }
    Ok(b)
}

/// Runs one cell on a fresh environment.
pub fn run_cell(
    graph: &Graph,
    config: &ExperimentConfig,
    benchmark: &Benchmark,
    algorithm: Algorithm,
    horizon: u64,
    rep: usize,
) -> Result<Cell> {
    let rng = seeded_rng(config.base_seed, cell_stream(algorithm, horizon, rep));
    let mut env = CascadeEnvironment::new(graph, horizon, rng);
    let start = Instant::now();
    let record = match algorithm {
        Algorithm::Lofa => lofa_run(&mut env, config.k, config.mg_semantics)?,
        Algorithm::Etcg => etcg_run(&mut env, config.k)?,
        Algorithm::GreedyFixed => fixed_run(&mut env, &benchmark.seeds)?,
    };
    let seconds = if config.timing {
        start.elapsed().as_secs_f64()
    } else {
        0.0
    };
    let cumulative_reward = record.cumulative_reward();
    let summary = RunSummary {
        run_id: run_id(algorithm, config.k, horizon, rep),
        algorithm,
        k: config.k,
        horizon,
        rep,
        cumulative_reward,
        regret: horizon as f64 * benchmark.value - cumulative_reward,
        benchmark_value: benchmark.value,
        seconds,
        seeds: record.seeds(),
    };
    Ok(Cell { summary, record })
}

/// Runs every repetition of one (algorithm, T) group, in parallel, returned
/// in repetition order.
pub fn run_group(
    graph: &Graph,
    config: &ExperimentConfig,
    benchmark: &Benchmark,
    algorithm: Algorithm,
    horizon: u64,
) -> Result<Vec<Cell>> {
    (0..config.repetitions)
        .into_par_iter()
        .map(|rep| run_cell(graph, config, benchmark, algorithm, horizon, rep))
        .collect()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn join_ids(ids: &[NodeId]) -> String {
    ids.iter().map(NodeId::to_string).collect::<Vec<_>>().join(" ")
}

fn write_rounds(path: &Path, cells: &[Cell], stride: u64) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["run_id", "algorithm", "k", "T", "rep", "t", "reward", "activated"])?;
    for cell in cells {
        let s = &cell.summary;
        let (k, horizon, rep) = (s.k.to_string(), s.horizon.to_string(), s.rep.to_string());
        for (t, (&reward, &activated)) in cell.record.rewards.iter().zip(&cell.record.activated).enumerate() {
            if !(t as u64).is_multiple_of(stride) {
                continue;
            }
            w.write_record([
                s.run_id.as_str(),
                s.algorithm.name(),
                &k,
                &horizon,
                &rep,
                &t.to_string(),
                &sig9(reward),
                &activated.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_moving_average(path: &Path, cells: &[Cell], window: usize, stride: u64) -> Result<()> {
    let traces: Vec<Vec<f64>> = cells
        .iter()
        .map(|c| moving_average(&c.record.rewards, window))
        .collect();
    let mut w = csv_writer(path)?;
    w.write_record(["t", "ma_mean", "ma_std"])?;
    let len = traces.first().map_or(0, Vec::len);
    let mut column = Vec::with_capacity(traces.len());
    for t in (0..len).step_by(stride as usize) {
        column.clear();
        column.extend(traces.iter().map(|tr| tr[t]));
        let (mean, std) = mean_std(&column)?;
        w.write_record([t.to_string(), sig9(mean), sig9(std)])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_summary(path: &Path, summaries: &[RunSummary]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "run_id",
        "algorithm",
        "k",
        "T",
        "rep",
        "cumulative_reward",
        "regret",
        "benchmark_value",
        "seconds",
        "seeds",
    ])?;
    for s in summaries {
        w.write_record([
            s.run_id.clone(),
            s.algorithm.name().to_string(),
            s.k.to_string(),
            s.horizon.to_string(),
            s.rep.to_string(),
            sig9(s.cumulative_reward),
            sig9(s.regret),
            sig9(s.benchmark_value),
            sig9(s.seconds),
            join_ids(&s.seeds),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["algorithm", "k", "T", "regret_mean", "regret_std", "reps"])?;
    for r in rows {
        w.write_record([
            r.algorithm.name().to_string(),
            r.k.to_string(),
            r.horizon.to_string(),
            sig9(r.regret_mean),
            sig9(r.regret_std),
            r.reps.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_manifest(config: &ExperimentConfig, graph: &Graph, benchmark: &Benchmark) -> Result<PathBuf> {
    let mut text = String::new();
    for (key, value) in config.manifest_entries() {
        text.push_str(&format!("{key}={value}\n"));
    }
    text.push_str(&format!("derived.nodes={}\n", graph.node_count()));
    text.push_str(&format!("derived.edges={}\n", graph.edge_count()));
    for &t in &config.horizons {
        text.push_str(&format!("derived.m.T{t}={}\n", compute_m(t, graph.node_count(), config.k)?));
    }
    text.push_str(&format!("derived.benchmark_value={}\n", sig9(benchmark.value)));
    text.push_str(&format!("derived.benchmark_seeds={}\n", join_ids(&benchmark.seeds)));
    let path = config.out_dir.join("manifest.txt");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Runs the full sweep described by `config` and writes all output files.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let graph = config.prob_mode.load(&config.graph)?;
    if config.k > graph.node_count() {
        return Err(Error::Budget {
            k: config.k,
            n: graph.node_count(),
        });
    }
    fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    pool.install(|| {
        let benchmark = resolve_benchmark(config, &graph)?;
        let mut files = vec![write_manifest(config, &graph, &benchmark)?];
        let mut summaries = Vec::new();
        for &algorithm in &config.algorithms {
            for &horizon in &config.horizons {
                let cells = run_group(&graph, config, &benchmark, algorithm, horizon)?;
                let rounds = config.out_dir.join(format!("rounds_{}_T{horizon}.csv", algorithm.name()));
                write_rounds(&rounds, &cells, config.stride)?;
                let ma = config.out_dir.join(format!("ma_{}_T{horizon}.csv", algorithm.name()));
                write_moving_average(&ma, &cells, config.window, config.stride)?;
                files.extend([rounds, ma]);
                summaries.extend(cells.into_iter().map(|c| c.summary));
            }
        }
        let aggregates = aggregate(&summaries)?;
        let summary_path = config.out_dir.join("summary.csv");
        write_summary(&summary_path, &summaries)?;
        let aggregate_path = config.out_dir.join("aggregate.csv");
        write_aggregate(&aggregate_path, &aggregates)?;
        files.extend([summary_path, aggregate_path]);
        Ok(ExperimentOutput {
            benchmark,
            summaries,
            aggregates,
            files,
        })
    })
}
