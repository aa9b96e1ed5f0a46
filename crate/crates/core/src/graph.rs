//! Directed graphs with per-edge activation probabilities.
//!
//! Graphs are built once (from an edge-list file or a generator) and are
//! immutable afterwards, so a single instance can back any number of
//! environments running side by side.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use fnv::FnvHashSet;
use rand::Rng;

use crate::error::{Error, Result};

/// Dense node index in `[0, node_count)`.
pub type NodeId = usize;

/// Comment directive that pins the label order of a written edge list, so
/// isolated nodes and the id assignment survive a round trip.
const LABELS_DIRECTIVE: &str = "# labels:";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub target: NodeId,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: Vec<Vec<Edge>>,
    edge_count: usize,
    /// Original label of every dense id (the loader's remap table).
    labels: Vec<String>,
}

fn check_prob(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Probability(p))
    }
}

impl Graph {
    /// Builds a graph over `node_count` nodes labelled `0..node_count`.
    pub fn from_edges<I>(node_count: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId, f64)>,
    {
        let labels = (0..node_count).map(|i| i.to_string()).collect();
        Self::from_labelled_edges(labels, edges)
    }

    fn from_labelled_edges<I>(labels: Vec<String>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId, f64)>,
    {
        let node_count = labels.len();
        let mut adjacency = vec![Vec::new(); node_count];
        let mut seen = FnvHashSet::default();
        let mut edge_count = 0;
        for (src, dst, prob) in edges {
            for id in [src, dst] {
                if id >= node_count {
                    return Err(Error::NodeOutOfRange { id, node_count });
                }
            }
            check_prob(prob)?;
            if src == dst {
                return Err(Error::SelfLoop(labels[src].clone()));
            }
            if !seen.insert((src, dst)) {
                return Err(Error::DuplicateEdge {
                    src: labels[src].clone(),
                    dst: labels[dst].clone(),
                });
            }
            adjacency[src].push(Edge { target: dst, prob });
            edge_count += 1;
        }
        Ok(Graph {
            adjacency,
            edge_count,
            labels,
        })
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    #[inline]
    pub fn out_edges(&self, node: NodeId) -> &[Edge] {
        &self.adjacency[node]
    }

    /// All edges as `(src, dst, prob)` in source order, then insertion order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(src, out)| out.iter().map(move |e| (src, e.target, e.prob)))
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, node: NodeId) -> &str {
        &self.labels[node]
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.node_count()];
        for out in &self.adjacency {
            for e in out {
                deg[e.target] += 1;
            }
        }
        deg
    }

    /// Returns a copy of the graph with every probability replaced by
    /// `prob(src, dst)`.
    pub fn map_probabilities<F>(&self, mut prob: F) -> Result<Graph>
    where
        F: FnMut(NodeId, NodeId) -> f64,
    {
        let mut adjacency = self.adjacency.clone();
        for (src, out) in adjacency.iter_mut().enumerate() {
            for e in out.iter_mut() {
                e.prob = prob(src, e.target);
                check_prob(e.prob)?;
            }
        }
        Ok(Graph {
            adjacency,
            edge_count: self.edge_count,
            labels: self.labels.clone(),
        })
    }

    /// Weighted-cascade probabilities: `p(u, v) = 1 / in_degree(v)`.
    pub fn weighted_cascade(&self) -> Graph {
        let deg = self.in_degrees();
        self.map_probabilities(|_, dst| 1.0 / deg[dst] as f64)
            .expect("1/in-degree is a probability")
    }

    pub fn with_constant_probability(&self, p: f64) -> Result<Graph> {
        check_prob(p)?;
        self.map_probabilities(|_, _| p)
    }

    /// True when every cascade on this graph is a deterministic function of
    /// the seed set.
    pub fn is_deterministic(&self) -> bool {
        self.edges().all(|(_, _, p)| p == 0.0 || p == 1.0)
    }

    /// Serializes to the edge-list text format accepted by [`parse_edge_list`].
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        out.push_str(LABELS_DIRECTIVE);
        for label in &self.labels {
            out.push(' ');
            out.push_str(label);
        }
        out.push('\n');
        for (src, dst, p) in self.edges() {
            // `{}` on f64 prints the shortest string that parses back exactly.
            out.push_str(&format!("{} {} {}\n", self.labels[src], self.labels[dst], p));
        }
        out
    }
}

/// Parses edge-list text: one `src dst [prob]` per line, `#` comments.
///
/// Labels are remapped to dense ids in order of first appearance. A leading
/// `# labels: a b c` comment (as written by [`Graph::to_edge_list`]) registers
/// labels before any edge is read.
pub fn parse_edge_list(text: &str, default_prob: Option<f64>, source: &Path) -> Result<Graph> {
    if let Some(p) = default_prob {
        check_prob(p)?;
    }
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: source.to_path_buf(),
        line,
        msg,
    };

    let mut ids: HashMap<String, NodeId> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut intern = |label: &str, labels: &mut Vec<String>| -> NodeId {
        *ids.entry(label.to_string()).or_insert_with(|| {
            labels.push(label.to_string());
            labels.len() - 1
        })
    };

    let mut edges = Vec::new();
    let mut seen_data = false;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim_end_matches('\r').trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix(LABELS_DIRECTIVE) {
            if !seen_data {
                for label in rest.split_whitespace() {
                    intern(label, &mut labels);
                }
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        seen_data = true;
        let fields: Vec<&str> = line.split_whitespace().collect();
        let prob = match fields.len() {
            2 => default_prob.ok_or(Error::MissingProbability)?,
            3 => {
                let p: f64 = fields[2]
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("non-numeric probability {:?}", fields[2])))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(parse_err(lineno, format!("probability {p} is outside [0, 1]")));
                }
                p
            }
            n => return Err(parse_err(lineno, format!("expected 2 or 3 fields, found {n}"))),
        };
        let src = intern(fields[0], &mut labels);
        let dst = intern(fields[1], &mut labels);
        edges.push((src, dst, prob));
    }
    Graph::from_labelled_edges(labels, edges)
}

pub fn load_edge_list(path: impl AsRef<Path>, default_prob: Option<f64>) -> Result<Graph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(&text, default_prob, path)
}

pub fn write_edge_list(graph: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, graph.to_edge_list()).map_err(|e| Error::io(path, e))
}

/// How edge probabilities are assigned when a graph is loaded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProbabilityMode {
    /// Use the probability column of the file.
    File,
    /// Every edge gets the same probability.
    Constant(f64),
    /// `p(u, v) = 1 / in_degree(v)`.
    WeightedCascade,
}

impl ProbabilityMode {
    pub fn load(self, path: impl AsRef<Path>) -> Result<Graph> {
        match self {
            ProbabilityMode::File => load_edge_list(path, None),
            ProbabilityMode::Constant(p) => load_edge_list(path, Some(p))?.with_constant_probability(p),
            ProbabilityMode::WeightedCascade => Ok(load_edge_list(path, Some(1.0))?.weighted_cascade()),
        }
    }
}

impl fmt::Display for ProbabilityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProbabilityMode::File => f.write_str("file"),
            ProbabilityMode::Constant(p) => write!(f, "const:{p}"),
            ProbabilityMode::WeightedCascade => f.write_str("wc"),
        }
    }
}

impl FromStr for ProbabilityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "file" => Ok(ProbabilityMode::File),
            "wc" => Ok(ProbabilityMode::WeightedCascade),
            _ => {
                let p = s
                    .strip_prefix("const:")
                    .and_then(|p| p.parse::<f64>().ok())
                    .ok_or_else(|| {
                        Error::Config(format!("probability mode {s:?} is not one of file, const:<p>, wc"))
                    })?;
                check_prob(p)?;
                Ok(ProbabilityMode::Constant(p))
            }
        }
    }
}

/// Directed chain `0 -> 1 -> ... -> n-1`.
pub fn line_graph(n: usize, p: f64) -> Result<Graph> {
    check_prob(p)?;
    if n == 0 {
        return Err(Error::Config("a line graph needs at least one node".into()));
    }
    Graph::from_edges(n, (1..n).map(|i| (i - 1, i, p)))
}

/// Node 0 points at each of `leaves` leaves.
pub fn star_graph(leaves: usize, p: f64) -> Result<Graph> {
    check_prob(p)?;
    Graph::from_edges(leaves + 1, (1..=leaves).map(|i| (0, i, p)))
}

/// Directed G(n, density): every ordered pair is an edge independently with
/// probability `density`, and its activation probability is drawn by `prob`.
pub fn random_graph<R, F>(n: usize, density: f64, rng: &mut R, mut prob: F) -> Result<Graph>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> f64,
{
    check_prob(density)?;
    let mut edges = Vec::new();
    for src in 0..n {
        for dst in 0..n {
            if src != dst && rng.gen::<f64>() < density {
                let p = prob(rng);
                edges.push((src, dst, p));
            }
        }
    }
    Graph::from_edges(n, edges)
}

/// Barabási–Albert preferential attachment. Each undirected link is stored as
/// two directed edges with probability 1; assign real probabilities with
/// [`Graph::weighted_cascade`] or [`Graph::with_constant_probability`].
pub fn scale_free<R: Rng + ?Sized>(n: usize, attach: usize, rng: &mut R) -> Result<Graph> {
    if attach == 0 || n <= attach {
        return Err(Error::Config(format!(
            "scale-free graph needs n > attach >= 1 (n = {n}, attach = {attach})"
        )));
    }
    let mut links: Vec<(NodeId, NodeId)> = Vec::new();
    // Degree-weighted urn: every endpoint of every link appears once.
    let mut urn: Vec<NodeId> = Vec::new();
    // Seed clique on the first `attach + 1` nodes.
    for u in 0..=attach {
        for v in 0..u {
            links.push((v, u));
            urn.extend([u, v]);
        }
    }
    for u in attach + 1..n {
        let mut targets: Vec<NodeId> = Vec::with_capacity(attach);
        while targets.len() < attach {
            let t = urn[rng.gen_range(0..urn.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        targets.sort_unstable();
        for t in targets {
            links.push((t, u));
            urn.extend([u, t]);
        }
    }
    Graph::from_edges(
        n,
        links.into_iter().flat_map(|(a, b)| [(a, b, 1.0), (b, a, 1.0)]),
    )
}
