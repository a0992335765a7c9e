//! Directed interaction graphs.
//!
//! An edge `(i, j)` means a bad event that starts at `i` can be transferred
//! to `j`. Parents of a node are its risk sources, children are the nodes it
//! can put at risk.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Node count above which [`graph_stats`] skips the all-pairs BFS diameter.
pub const DEFAULT_DIAMETER_THRESHOLD: usize = 5_000;

/// Immutable directed graph without self-loops or parallel edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
    edge_count: usize,
}

impl DirectedGraph {
    /// Builds a graph from an explicit edge list, rejecting self-loops,
    /// duplicates and out-of-range endpoints.
    pub fn from_edges(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut seen = HashSet::with_capacity(edges.len());
        for &(src, dst) in edges {
            for index in [src, dst] {
                if index >= node_count {
                    return Err(Error::NodeOutOfRange {
                        index,
                        nodes: node_count,
                    });
                }
            }
            if src == dst {
                return Err(Error::SelfLoop(src));
            }
            if !seen.insert((src, dst)) {
                return Err(Error::DuplicateEdge(src, dst));
            }
        }
        Ok(Self::from_unique_edges(node_count, edges.iter().copied()))
    }

    /// Caller guarantees the edges are valid and unique.
    pub(crate) fn from_unique_edges(
        node_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Self {
        let mut out_adj = vec![Vec::new(); node_count];
        let mut in_adj = vec![Vec::new(); node_count];
        let mut edge_count = 0;
        for (src, dst) in edges {
            out_adj[src].push(dst);
            in_adj[dst].push(src);
            edge_count += 1;
        }
        for list in out_adj.iter_mut().chain(in_adj.iter_mut()) {
            list.sort_unstable();
        }
        DirectedGraph {
            out_adj,
            in_adj,
            edge_count,
        }
    }

    pub fn empty(node_count: usize) -> Self {
        Self::from_unique_edges(node_count, std::iter::empty())
    }

    pub fn node_count(&self) -> usize {
        self.out_adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Out-neighbors, sorted ascending.
    pub fn children(&self, i: usize) -> &[usize] {
        &self.out_adj[i]
    }

    /// In-neighbors, sorted ascending.
    pub fn parents(&self, i: usize) -> &[usize] {
        &self.in_adj[i]
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.out_adj[i].len()
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.in_adj[i].len()
    }

    pub fn total_degree(&self, i: usize) -> usize {
        self.out_degree(i) + self.in_degree(i)
    }

    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        src < self.node_count() && self.out_adj[src].binary_search(&dst).is_ok()
    }

    /// All edges in (src, dst) lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.out_adj
            .iter()
            .enumerate()
            .flat_map(|(src, dsts)| dsts.iter().map(move |&dst| (src, dst)))
    }

    pub fn neighborhoods(&self, i: usize) -> Result<Neighborhoods> {
        if i >= self.node_count() {
            return Err(Error::NodeOutOfRange {
                index: i,
                nodes: self.node_count(),
            });
        }
        let parents = self.in_adj[i].clone();
        let children = self.out_adj[i].clone();
        let mut parent_family = parents.clone();
        insert_sorted(&mut parent_family, i);
        let mut child_family = children.clone();
        insert_sorted(&mut child_family, i);
        let k = parent_family.len();
        Ok(Neighborhoods {
            parents,
            children,
            parent_family,
            child_family,
            k,
        })
    }

    /// 64-bit FNV-1a over node count and sorted edge list.
    pub fn fingerprint(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut hash = OFFSET;
        let mut feed = |value: u64| {
            for byte in value.to_le_bytes() {
                hash ^= u64::from(byte);
                hash = hash.wrapping_mul(PRIME);
            }
        };
        feed(self.node_count() as u64);
        for (src, dst) in self.edges() {
            feed(src as u64);
            feed(dst as u64);
        }
        hash
    }
}

fn insert_sorted(list: &mut Vec<usize>, value: usize) {
    if let Err(pos) = list.binary_search(&value) {
        list.insert(pos, value);
    }
}

/// Neighborhood sets of a single node. All sets are sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhoods {
    pub parents: Vec<usize>,
    pub children: Vec<usize>,
    /// Parents together with the node itself.
    pub parent_family: Vec<usize>,
    /// Children together with the node itself.
    pub child_family: Vec<usize>,
    /// Size of the parent family.
    pub k: usize,
}

/// Counts of lines dropped while reading an edge list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub lines: usize,
    pub duplicate_edges: usize,
    pub self_loops: usize,
}

/// A graph read from text, with the identifier-to-index mapping.
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: DirectedGraph,
    /// `labels[i]` is the identifier that was interned to index `i`.
    pub labels: Vec<String>,
    pub report: IngestReport,
}

impl LoadedGraph {
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Parses a whitespace-separated edge list. Identifiers are interned in
/// first-appearance order; `#` starts a comment line; blank lines are
/// skipped. Self-loops and repeated edges are dropped and counted.
pub fn load_edge_list<'a>(text: &'a str) -> Result<LoadedGraph> {
    let mut index: HashMap<&'a str, usize> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut edges = Vec::new();
    let mut report = IngestReport::default();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        report.lines += 1;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(Error::Parse {
                line: lineno + 1,
                found: tokens.len(),
            });
        }
        let mut intern = |token: &'a str| -> usize {
            *index.entry(token).or_insert_with(|| {
                labels.push(token.to_string());
                labels.len() - 1
            })
        };
        let src = intern(tokens[0]);
        let dst = intern(tokens[1]);
        if src == dst {
            report.self_loops += 1;
            continue;
        }
        if !seen.insert((src, dst)) {
            report.duplicate_edges += 1;
            continue;
        }
        edges.push((src, dst));
    }

    let graph = DirectedGraph::from_unique_edges(labels.len(), edges);
    Ok(LoadedGraph {
        graph,
        labels,
        report,
    })
}

/// Renders a graph in the edge-list format accepted by [`load_edge_list`].
///
/// Isolated nodes cannot be expressed in a plain edge list, so they are
/// lost on a round trip; connected structure and label order of connected
/// nodes are preserved.
pub fn to_edge_list(graph: &DirectedGraph, labels: Option<&[String]>) -> String {
    let mut out = String::new();
    let name = |i: usize| match labels {
        Some(l) => l[i].clone(),
        None => i.to_string(),
    };
    for (src, dst) in graph.edges() {
        let _ = writeln!(out, "{} {}", name(src), name(dst));
    }
    out
}

/// Summary statistics. Ratios are `None` when undefined (empty graph).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub isolated_nodes: usize,
    /// edges / (nodes * (nodes - 1))
    pub density: Option<f64>,
    /// Longest finite shortest path; `None` when skipped or undefined.
    pub diameter: Option<usize>,
    /// edges / nodes
    pub avg_total_degree: Option<f64>,
    pub frac_zero_indegree: Option<f64>,
    pub frac_zero_outdegree: Option<f64>,
}

pub fn graph_stats(graph: &DirectedGraph, diameter_threshold: usize) -> GraphStats {
    let n = graph.node_count();
    let m = graph.edge_count();
    let isolated_nodes = (0..n).filter(|&i| graph.total_degree(i) == 0).count();
    let zero_in = (0..n).filter(|&i| graph.in_degree(i) == 0).count();
    let zero_out = (0..n).filter(|&i| graph.out_degree(i) == 0).count();
    let ratio = |num: usize| (n > 0).then(|| num as f64 / n as f64);
    let density = (n > 1).then(|| m as f64 / (n as f64 * (n as f64 - 1.0)));
    let diameter = if n > 0 && n <= diameter_threshold {
        Some(diameter(graph))
    } else {
        None
    };
    GraphStats {
        nodes: n,
        edges: m,
        isolated_nodes,
        density,
        diameter,
        avg_total_degree: ratio(m),
        frac_zero_indegree: ratio(zero_in),
        frac_zero_outdegree: ratio(zero_out),
    }
}

/// BFS from every node; the longest finite directed shortest path.
fn diameter(graph: &DirectedGraph) -> usize {
    let n = graph.node_count();
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    let mut best = 0;
    for source in 0..n {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[source] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            for &v in graph.children(u) {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    best = best.max(dist[v]);
                    queue.push_back(v);
                }
            }
        }
    }
    best
}
