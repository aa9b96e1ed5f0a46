use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use rand::Rng;

use lofa_core::graph::{line_graph, random_graph, scale_free, star_graph};
use lofa_core::oracle::{cache_mode, BenchmarkCache, BenchmarkKind, DEFAULT_EVAL_SAMPLES};
use lofa_core::{
    brute_force_best, offline_greedy, run_experiment, seeded_rng, sig9, simulate_cascade, Algorithm,
    Benchmark, Error, ExperimentConfig, Graph, MgSemantics, NodeId, ProbabilityMode,
};

/// Online influence maximization with full-bandit feedback.
#[derive(Debug, Parser)]
#[command(name = "lofa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a horizon sweep and write CSVs plus a manifest.
    Run(RunArgs),
    /// Compute and cache the offline benchmark for a graph.
    Oracle(OracleArgs),
    /// Print raw cascades from a fixed seed set.
    Simulate(SimulateArgs),
    /// Print a generated graph as an edge list.
    #[command(subcommand)]
    GenGraph(GenGraph),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Edge list file.
    #[arg(long, required_unless_present = "from_manifest")]
    graph: Option<PathBuf>,
    /// Seed-set budget.
    #[arg(long, required_unless_present = "from_manifest")]
    k: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "20000,40000,60000,80000,100000")]
    horizons: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "lofa,etcg")]
    algos: Vec<Algorithm>,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// file, const:<p> or wc.
    #[arg(long, default_value = "file")]
    prob_mode: ProbabilityMode,
    #[arg(long, default_value_t = 100)]
    window: usize,
    /// greedy or optimal.
    #[arg(long, default_value = "greedy")]
    benchmark: BenchmarkKind,
    /// diff or value.
    #[arg(long, default_value = "diff")]
    mg_semantics: MgSemantics,
    /// Worker threads, 0 for all cores. Does not affect outputs.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Keep every n-th row of the per-round CSVs.
    #[arg(long, default_value_t = 1)]
    stride: u64,
    /// Cascades used to evaluate the benchmark set.
    #[arg(long, default_value_t = DEFAULT_EVAL_SAMPLES)]
    samples: u64,
    /// Record wall-clock seconds per run (makes summary.csv non-reproducible).
    #[arg(long)]
    timing: bool,
    /// Ignore and do not update the benchmark cache.
    #[arg(long)]
    no_cache: bool,
    /// Rerun the configuration in a manifest. Only --out and --jobs may override it.
    #[arg(long, conflicts_with_all = ["graph", "k"])]
    from_manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value = "file")]
    prob_mode: ProbabilityMode,
    #[arg(long, default_value_t = DEFAULT_EVAL_SAMPLES)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Comma-separated node ids.
    #[arg(long, value_delimiter = ',', required = true)]
    seeds: Vec<NodeId>,
    /// Number of cascades.
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long, default_value = "file")]
    prob_mode: ProbabilityMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Subcommand)]
enum GenGraph {
    /// Directed path 0 -> 1 -> ... -> n-1.
    Line {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: f64,
    },
    /// Hub 0 with edges to every leaf.
    Star {
        #[arg(long)]
        leaves: usize,
        #[arg(long)]
        p: f64,
    },
    /// Each ordered pair is an edge with probability `density`.
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        density: f64,
        /// Constant edge probability; uniform on [0, 1) when omitted.
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Preferential attachment; every edge has p = 1 (load with --prob-mode wc).
    ScaleFree {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        attach: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let matches = Cli::command().get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Run(args) => run(args, matches.subcommand_matches("run").expect("run matched")),
        Command::Oracle(args) => oracle(args),
        Command::Simulate(args) => simulate(args),
        Command::GenGraph(kind) => gen_graph(kind),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}

fn explicit(matches: &ArgMatches, id: &str) -> bool {
    matches.value_source(id) == Some(ValueSource::CommandLine)
}

fn run(args: RunArgs, matches: &ArgMatches) -> Result<(), Error> {
    let config = match &args.from_manifest {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let mut config = ExperimentConfig::from_manifest(&text)?;
            if explicit(matches, "out") {
                config.out_dir = args.out;
            }
            if explicit(matches, "jobs") {
                config.jobs = args.jobs;
            }
            config
        }
        None => {
            let mut config = ExperimentConfig::new(args.graph.expect("required by clap"), args.k.expect("required by clap"));
            config.horizons = args.horizons;
            config.algorithms = args.algos;
            config.repetitions = args.reps;
            config.base_seed = args.seed;
            config.out_dir = args.out;
            config.prob_mode = args.prob_mode;
            config.window = args.window;
            config.benchmark = args.benchmark;
            config.mg_semantics = args.mg_semantics;
            config.jobs = args.jobs;
            config.stride = args.stride;
            config.eval_samples = args.samples;
            config.timing = args.timing;
            config.use_cache = !args.no_cache;
            config
        }
    };
    let output = run_experiment(&config)?;
    println!(
        "benchmark {} seeds {:?}; {} runs written to {}",
        sig9(output.benchmark.value),
        output.benchmark.seeds,
        output.summaries.len(),
        config.out_dir.display()
    );
    for row in &output.aggregates {
        println!(
            "{} T={} regret {} +/- {}",
            row.algorithm,
            row.horizon,
            sig9(row.regret_mean),
            sig9(row.regret_std)
        );
    }
    Ok(())
}

fn oracle(args: OracleArgs) -> Result<(), Error> {
    let graph = args.prob_mode.load(&args.graph)?;
    let n = graph.node_count();
    if args.k > n {
        return Err(Error::Budget { k: args.k, n });
    }
    let cache = BenchmarkCache::beside(&args.graph);
    let mut manifest = vec![
        ("graph".to_string(), args.graph.display().to_string()),
        ("prob_mode".to_string(), args.prob_mode.to_string()),
        ("k".to_string(), args.k.to_string()),
        ("samples".to_string(), args.samples.to_string()),
        ("seed".to_string(), args.seed.to_string()),
        ("derived.nodes".to_string(), n.to_string()),
        ("derived.edges".to_string(), graph.edge_count().to_string()),
    ];

    let greedy = offline_greedy(&graph, args.k, args.samples, args.seed)?;
    let bench = Benchmark {
        value: sig9(greedy.estimated_value).parse().expect("formatted float parses"),
        seeds: greedy.seed_set,
    };
    cache.append(args.k, &cache_mode(args.prob_mode, BenchmarkKind::Greedy), &bench)?;
    println!("greedy {} {}", sig9(bench.value), join(&bench.seeds));
    manifest.push(("derived.greedy_value".into(), sig9(bench.value)));
    manifest.push(("derived.greedy_seeds".into(), join(&bench.seeds)));

    match brute_force_best(&graph, args.k) {
        Ok(best) => {
            let scaled = Benchmark {
                value: sig9((1.0 - (-1.0f64).exp()) * best.estimated_value)
                    .parse()
                    .expect("formatted float parses"),
                seeds: best.seed_set,
            };
            cache.append(args.k, &cache_mode(args.prob_mode, BenchmarkKind::Optimal), &scaled)?;
            println!(
                "optimal {} {} (benchmark {})",
                sig9(best.estimated_value),
                join(&scaled.seeds),
                sig9(scaled.value)
            );
            manifest.push(("derived.optimal_value".into(), sig9(best.estimated_value)));
            manifest.push(("derived.optimal_seeds".into(), join(&scaled.seeds)));
        }
        Err(Error::TooLarge { what, value, limit }) => {
            println!("optimal skipped: {what} {value} exceeds {limit}");
        }
        Err(e) => return Err(e),
    }

    let mut text = String::new();
    for (key, value) in manifest {
        text.push_str(&format!("{key}={value}\n"));
    }
    let mut path = cache.path().as_os_str().to_owned();
    path.push(".manifest");
    let path = PathBuf::from(path);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), Error> {
    let graph = args.prob_mode.load(&args.graph)?;
    let mut rng = seeded_rng(args.seed, 0);
    let mut out = io::stdout().lock();
    let header = [
        ("graph", args.graph.display().to_string()),
        ("prob_mode", args.prob_mode.to_string()),
        ("seeds", join(&args.seeds)),
        ("count", args.count.to_string()),
        ("seed", args.seed.to_string()),
    ];
    let mut text = String::new();
    for (key, value) in header {
        text.push_str(&format!("# {key}={value}\n"));
    }
    for _ in 0..args.count {
        let active = simulate_cascade(&graph, &args.seeds, &mut rng)?;
        text.push_str(&format!("{} {}\n", active.len(), join_with(&active, " ")));
    }
    write_stdout(&mut out, &text)
}

fn gen_graph(kind: GenGraph) -> Result<(), Error> {
    let (header, graph): (Vec<(&str, String)>, Graph) = match kind {
        GenGraph::Line { n, p } => (
            vec![("kind", "line".into()), ("n", n.to_string()), ("p", p.to_string())],
            line_graph(n, p)?,
        ),
        GenGraph::Star { leaves, p } => (
            vec![("kind", "star".into()), ("leaves", leaves.to_string()), ("p", p.to_string())],
            star_graph(leaves, p)?,
        ),
        GenGraph::Random { n, density, p, seed } => {
            let mut rng = seeded_rng(seed, 0);
            let graph = match p {
                Some(p) => random_graph(n, density, &mut rng, |_| p)?,
                None => random_graph(n, density, &mut rng, |r| r.gen::<f64>())?,
            };
            let p = p.map_or_else(|| "uniform".to_string(), |p| p.to_string());
            (
                vec![
                    ("kind", "random".into()),
                    ("n", n.to_string()),
                    ("density", density.to_string()),
                    ("p", p),
                    ("seed", seed.to_string()),
                ],
                graph,
            )
        }
        GenGraph::ScaleFree { n, attach, seed } => {
            let mut rng = seeded_rng(seed, 0);
            (
                vec![
                    ("kind", "scale-free".into()),
                    ("n", n.to_string()),
                    ("attach", attach.to_string()),
                    ("seed", seed.to_string()),
                ],
                scale_free(n, attach, &mut rng)?,
            )
        }
    };
    let mut text = String::new();
    for (key, value) in header {
        text.push_str(&format!("# {key}={value}\n"));
    }
    text.push_str(&graph.to_edge_list());
    write_stdout(&mut io::stdout().lock(), &text)
}

fn join(ids: &[NodeId]) -> String {
    join_with(ids, ",")
}

fn join_with(ids: &[NodeId], sep: &str) -> String {
    ids.iter().map(NodeId::to_string).collect::<Vec<_>>().join(sep)
}

fn write_stdout(out: &mut impl Write, text: &str) -> Result<(), Error> {
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Ok(()) => Ok(()),
        // A closed pipe (e.g. `| head`) is not an error for a printing command.
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(Error::io("<stdout>", e)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn run_defaults_match_the_library_defaults() {
        let cli = Cli::try_parse_from(["lofa", "run", "--graph", "g.txt", "--k", "4"]).unwrap();
        let Command::Run(args) = cli.command else { panic!("expected run") };
        let lib = ExperimentConfig::new("g.txt", 4);
        assert_eq!(args.horizons, lib.horizons);
        assert_eq!(args.algos, lib.algorithms);
        assert_eq!(args.reps, lib.repetitions);
        assert_eq!(args.window, lib.window);
        assert_eq!(args.samples, lib.eval_samples);
        assert_eq!(args.benchmark, lib.benchmark);
        assert_eq!(args.mg_semantics, lib.mg_semantics);
        assert_eq!(args.prob_mode, lib.prob_mode);
        assert_eq!(args.out, lib.out_dir);
        assert_eq!(args.stride, lib.stride);
        assert_eq!(!args.no_cache, lib.use_cache);
    }
}
