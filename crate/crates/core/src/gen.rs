//! Random instances: per-node parameters over a given graph, and synthetic
//! graphs standing in for the AS topology.
//!
//! All randomness comes from `ChaCha20Rng::seed_from_u64`, whose stream is
//! fixed across platforms, so a `(graph, spec)` pair always reproduces the
//! same game.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::graph::DirectedGraph;
use crate::model::{validate, DefenseGame, NodeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DrawMode {
    /// Every uniform draw replaced by 0.5.
    #[default]
    Fixed,
    /// One independent uniform draw per node per parameter.
    Random,
}

/// Constants of the Internet-game parameterization. Each parameter is
/// `base + span * U`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Table {
    pub alpha_span: f64,
    pub loss_base: f64,
    pub loss_span: f64,
    pub cost_base: f64,
    pub cost_span: f64,
    /// Total raw transfer weight of a node.
    pub z_base: f64,
    pub z_span: f64,
    /// Raw direct weight of a node.
    pub p_base: f64,
    pub p_span: f64,
    /// Target value of `p_hat_i + sum_j q_hat_ij`.
    pub risk_budget: f64,
    pub attack_cost: f64,
}

impl Default for Table {
    fn default() -> Self {
        Table {
            alpha_span: 1.0 / 20.0,
            loss_base: 1e8,
            loss_span: 1e9,
            cost_base: 1e5,
            cost_span: 1e6,
            z_base: 0.2,
            z_span: 1.0 / 5.0,
            p_base: 0.8,
            p_span: 1.0 / 10.0,
            risk_budget: 0.9,
            attack_cost: 1e6,
        }
    }
}

impl Table {
    pub fn alpha(&self, u: f64) -> f64 {
        u * self.alpha_span
    }

    pub fn loss(&self, u: f64) -> f64 {
        self.loss_base + self.loss_span * u
    }

    pub fn invest_cost(&self, u: f64) -> f64 {
        self.cost_base + self.cost_span * u
    }

    pub fn z(&self, u: f64) -> f64 {
        self.z_base + u * self.z_span
    }

    pub fn p_tilde(&self, u: f64) -> f64 {
        self.p_base + u * self.p_span
    }
}

/// Identical parameters on every node, and the same transfer probability
/// on every edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Homogeneous {
    pub invest_cost: f64,
    pub loss: f64,
    pub direct_success: f64,
    pub attack_cost: f64,
    #[serde(default = "one")]
    pub alpha: f64,
    /// Transfer probability on every edge.
    pub delta: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(default)]
    pub mode: DrawMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub table: Table,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub homogeneous: Option<Homogeneous>,
}

/// Uniform draws of one node, in generation order.
struct Draws {
    alpha: f64,
    loss: f64,
    cost: f64,
    z: f64,
    p: f64,
}

impl Draws {
    fn next(mode: DrawMode, rng: &mut ChaCha20Rng) -> Self {
        let mut u = || match mode {
            DrawMode::Fixed => 0.5,
            DrawMode::Random => rng.random::<f64>(),
        };
        Draws {
            alpha: u(),
            loss: u(),
            cost: u(),
            z: u(),
            p: u(),
        }
    }
}

/// Builds a game over `graph`. The result is checked with
/// [`validate`]; any violation is returned as an error.
pub fn generate(graph: &DirectedGraph, spec: &GeneratorSpec) -> Result<DefenseGame> {
    let n = graph.node_count();
    let ids: Vec<String> = (0..n).map(|i| i.to_string()).collect();
    let game = match &spec.homogeneous {
        Some(h) => {
            let node = NodeParams {
                invest_cost: h.invest_cost,
                loss: h.loss,
                direct_success: h.direct_success,
                unblocked_transfer: h.alpha,
                attack_cost: h.attack_cost,
            };
            DefenseGame::from_graph(graph.clone(), ids, vec![node; n], |_, _| h.delta)?
        }
        None => table_game(graph, ids, spec)?,
    };

    let provenance = json!({
        "spec": spec,
        "seed": spec.seed,
        "draws": "independent uniform per node per parameter",
        "graph": {
            "nodes": n,
            "edges": graph.edge_count(),
            "fingerprint": format!("{:016x}", graph.fingerprint()),
        },
    });
    let game = game.with_provenance(provenance);
    let report = validate(&game);
    if !report.is_valid() {
        return Err(Error::AssumptionViolated(report));
    }
    Ok(game)
}

fn table_game(graph: &DirectedGraph, ids: Vec<String>, spec: &GeneratorSpec) -> Result<DefenseGame> {
    let n = graph.node_count();
    let t = &spec.table;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let mut nodes = Vec::with_capacity(n);
    let mut out_q: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let d = Draws::next(spec.mode, &mut rng);
        let children = graph.children(i);
        let z = t.z(d.z);
        let p_tilde = t.p_tilde(d.p);
        let weights: Vec<f64> = children
            .iter()
            .map(|&j| graph.total_degree(j) as f64)
            .collect();
        let total: f64 = weights.iter().sum();
        // Each child has the edge from i, so total >= |children|.
        assert!(children.is_empty() || total >= children.len() as f64);
        let q_tilde: Vec<f64> = weights.iter().map(|w| z * w / total).collect();
        let raw_sum: f64 = q_tilde.iter().sum();
        let (p_hat, q_hat) = if children.is_empty() {
            (t.risk_budget, Vec::new())
        } else {
            let denom = p_tilde + raw_sum;
            (
                t.risk_budget * p_tilde / denom,
                q_tilde.iter().map(|q| t.risk_budget * q / denom).collect(),
            )
        };
        nodes.push(NodeParams {
            invest_cost: t.invest_cost(d.cost),
            loss: t.loss(d.loss),
            direct_success: p_hat,
            unblocked_transfer: t.alpha(d.alpha),
            attack_cost: t.attack_cost,
        });
        out_q.push(q_hat);
    }
    DefenseGame::from_graph(graph.clone(), ids, nodes, |src, dst| {
        let pos = graph
            .children(src)
            .binary_search(&dst)
            .expect("edge endpoints come from the graph");
        out_q[src][pos]
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphKind {
    /// Every ordered pair is an edge independently with probability `p`.
    ErdosRenyiDirected { n: usize, p: f64 },
    /// Nodes arrive one at a time and point to `m` distinct earlier nodes
    /// picked with probability proportional to total degree plus one.
    PreferentialAttachment { n: usize, m: usize },
}

pub fn synth_graph(kind: GraphKind, seed: u64) -> Result<DirectedGraph> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    match kind {
        GraphKind::ErdosRenyiDirected { n, p } => {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("edge probability {p}")));
            }
            let mut edges = Vec::new();
            for src in 0..n {
                for dst in 0..n {
                    if src != dst && rng.random::<f64>() < p {
                        edges.push((src, dst));
                    }
                }
            }
            Ok(DirectedGraph::from_unique_edges(n, edges))
        }
        GraphKind::PreferentialAttachment { n, m } => {
            if m == 0 {
                return Err(Error::InvalidParameter("out-degree budget m = 0".to_string()));
            }
            // One entry per node plus one per edge endpoint.
            let mut pool: Vec<usize> = Vec::with_capacity(n * (2 * m + 1));
            let mut edges = Vec::with_capacity(n * m);
            let mut picked = Vec::with_capacity(m);
            for v in 0..n {
                picked.clear();
                if v <= m {
                    picked.extend(0..v);
                } else {
                    while picked.len() < m {
                        let candidate = pool[rng.random_range(0..pool.len())];
                        if !picked.contains(&candidate) {
                            picked.push(candidate);
                        }
                    }
                }
                for &u in &picked {
                    edges.push((v, u));
                    pool.push(v);
                    pool.push(u);
                }
                pool.push(v);
            }
            Ok(DirectedGraph::from_unique_edges(n, edges))
        }
    }
}
