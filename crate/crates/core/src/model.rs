//! The defense game record, assumption checks and derived per-node
//! quantities.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DirectedGraph;

/// Slack allowed above 1 in the per-node risk budget, for generator round-off.
pub const RISK_BUDGET_SLACK: f64 = 1e-12;

/// Economic parameters of one defender.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeParams {
    /// Cost of investing in protection.
    pub invest_cost: f64,
    /// Loss suffered when a bad event hits the node.
    pub loss: f64,
    /// Probability a direct attack succeeds on an unprotected node.
    pub direct_success: f64,
    /// Probability a transferred event is not blocked by the node's own protection.
    pub unblocked_transfer: f64,
    /// Attacker's cost of targeting this node.
    pub attack_cost: f64,
}

/// A defense game: the interaction graph, per-node parameters and per-edge
/// transfer probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct DefenseGame {
    graph: DirectedGraph,
    ids: Vec<String>,
    nodes: Vec<NodeParams>,
    /// Transfer probability of each out-edge, aligned with `graph.children(i)`.
    out_q: Vec<Vec<f64>>,
    /// Transfer probability of each in-edge, aligned with `graph.parents(i)`.
    in_q: Vec<Vec<f64>>,
    provenance: Option<serde_json::Value>,
}

impl DefenseGame {
    /// Builds a game from node parameters and `(src, dst, q_hat)` edges.
    /// Node ids default to decimal indices.
    pub fn new(nodes: Vec<NodeParams>, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let ids = (0..nodes.len()).map(|i| i.to_string()).collect();
        Self::with_ids(ids, nodes, edges)
    }

    pub fn with_ids(
        ids: Vec<String>,
        nodes: Vec<NodeParams>,
        edges: &[(usize, usize, f64)],
    ) -> Result<Self> {
        if ids.len() != nodes.len() {
            return Err(Error::Shape {
                expected: nodes.len(),
                actual: ids.len(),
            });
        }
        let pairs: Vec<(usize, usize)> = edges.iter().map(|&(s, d, _)| (s, d)).collect();
        let graph = DirectedGraph::from_edges(nodes.len(), &pairs)?;
        let q: HashMap<(usize, usize), f64> = edges.iter().map(|&(s, d, q)| ((s, d), q)).collect();
        Ok(Self::assemble(graph, ids, nodes, |s, d| q[&(s, d)]))
    }

    /// Builds a game over an existing graph; `transfer(src, dst)` is called once per edge.
    pub fn from_graph(
        graph: DirectedGraph,
        ids: Vec<String>,
        nodes: Vec<NodeParams>,
        transfer: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        if ids.len() != graph.node_count() || nodes.len() != graph.node_count() {
            return Err(Error::Shape {
                expected: graph.node_count(),
                actual: nodes.len().min(ids.len()),
            });
        }
        Ok(Self::assemble(graph, ids, nodes, transfer))
    }

    fn assemble(
        graph: DirectedGraph,
        ids: Vec<String>,
        nodes: Vec<NodeParams>,
        mut transfer: impl FnMut(usize, usize) -> f64,
    ) -> Self {
        let n = graph.node_count();
        let out_q: Vec<Vec<f64>> = (0..n)
            .map(|i| graph.children(i).iter().map(|&j| transfer(i, j)).collect())
            .collect();
        let mut in_q: Vec<Vec<f64>> = (0..n).map(|i| Vec::with_capacity(graph.in_degree(i))).collect();
        // Parents are sorted ascending, and sources are visited ascending, so
        // pushing in source order keeps in_q aligned with graph.parents(j).
        for i in 0..n {
            for (&j, &q) in graph.children(i).iter().zip(&out_q[i]) {
                in_q[j].push(q);
            }
        }
        DefenseGame {
            graph,
            ids,
            nodes,
            out_q,
            in_q,
            provenance: None,
        }
    }

    pub fn with_provenance(mut self, provenance: serde_json::Value) -> Self {
        self.provenance = Some(provenance);
        self
    }

    /// Replaces the node ids.
    pub fn relabel(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.nodes.len() {
            return Err(Error::Shape {
                expected: self.nodes.len(),
                actual: ids.len(),
            });
        }
        self.ids = ids;
        Ok(self)
    }

    pub fn provenance(&self) -> Option<&serde_json::Value> {
        self.provenance.as_ref()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn graph(&self) -> &DirectedGraph {
        &self.graph
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn node(&self, i: usize) -> &NodeParams {
        &self.nodes[i]
    }

    pub fn nodes(&self) -> &[NodeParams] {
        &self.nodes
    }

    /// `(child, q_hat)` pairs of node `i`.
    pub fn out_transfers(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.graph
            .children(i)
            .iter()
            .copied()
            .zip(self.out_q[i].iter().copied())
    }

    /// `(parent, q_hat)` pairs into node `i`.
    pub fn in_transfers(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.graph
            .parents(i)
            .iter()
            .copied()
            .zip(self.in_q[i].iter().copied())
    }

    /// `q_hat` on edge `src -> dst`, or 0 when there is no edge.
    pub fn transfer(&self, src: usize, dst: usize) -> f64 {
        match self.graph.children(src).binary_search(&dst) {
            Ok(pos) => self.out_q[src][pos],
            Err(_) => 0.0,
        }
    }

    /// Returns a copy with every node's parameters rewritten by `f`.
    pub fn map_nodes(&self, mut f: impl FnMut(usize, NodeParams) -> NodeParams) -> Self {
        let mut game = self.clone();
        for (i, node) in game.nodes.iter_mut().enumerate() {
            *node = f(i, *node);
        }
        game
    }

    /// Returns a copy with every edge's transfer probability rewritten by `f(src, dst, q)`.
    pub fn map_transfers(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let ids = self.ids.clone();
        let nodes = self.nodes.clone();
        let graph = self.graph.clone();
        let mut game = Self::assemble(graph, ids, nodes, |s, d| f(s, d, self.transfer(s, d)));
        game.provenance = self.provenance.clone();
        game
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    /// Investment cheaper than the conditional direct loss.
    A2,
    /// Attack cost below the attacker's reachable loss.
    A3,
    /// Direct plus outgoing transfer probabilities at most 1.
    #[serde(rename = "risk-budget")]
    RiskBudget,
    #[serde(rename = "range")]
    Range,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::A2 => "A2",
            Rule::A3 => "A3",
            Rule::RiskBudget => "risk-budget",
            Rule::Range => "range",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subject {
    Node(usize),
    Edge(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub subject: Subject,
    pub rule: Rule,
    /// Name of the checked quantity.
    pub quantity: String,
    pub observed: f64,
    pub bound: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.subject {
            Subject::Node(i) => write!(f, "node {i}")?,
            Subject::Edge(s, d) => write!(f, "edge {s} -> {d}")?,
        }
        write!(
            f,
            ": {} {} = {} against bound {}",
            self.rule, self.quantity, self.observed, self.bound
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Nodes whose risk budget exceeded 1 by no more than [`RISK_BUDGET_SLACK`].
    pub slack_used: Vec<usize>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks ranges, the risk budget, and the investment-cost and attack-cost
/// assumptions on every node and edge.
pub fn validate(game: &DefenseGame) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut push = |subject, rule, quantity: &str, observed, bound| {
        report.violations.push(Violation {
            subject,
            rule,
            quantity: quantity.to_string(),
            observed,
            bound,
        })
    };

    for (i, node) in game.nodes().iter().enumerate() {
        let s = Subject::Node(i);
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(node.invest_cost) {
            push(s, Rule::Range, "C", node.invest_cost, 0.0);
        }
        if !positive(node.loss) {
            push(s, Rule::Range, "L", node.loss, 0.0);
        }
        if !positive(node.attack_cost) {
            push(s, Rule::Range, "C0", node.attack_cost, 0.0);
        }
        if !(node.direct_success > 0.0 && node.direct_success <= 1.0) {
            push(s, Rule::Range, "p_hat", node.direct_success, 1.0);
        }
        if !(0.0..=1.0).contains(&node.unblocked_transfer) {
            push(s, Rule::Range, "alpha", node.unblocked_transfer, 1.0);
        }

        let direct_loss = node.direct_success * node.loss;
        if !(node.invest_cost > 0.0 && node.invest_cost < direct_loss) {
            push(s, Rule::A2, "C", node.invest_cost, direct_loss);
        }

        let mut budget = node.direct_success;
        let mut reachable = direct_loss;
        for (j, q) in game.out_transfers(i) {
            if !(q > 0.0 && q <= 1.0) {
                push(Subject::Edge(i, j), Rule::Range, "q_hat", q, 1.0);
            }
            budget += q;
            let child = game.node(j);
            reachable += q * child.unblocked_transfer * child.loss;
        }
        if !(node.attack_cost > 0.0 && node.attack_cost < reachable) {
            push(s, Rule::A3, "C0", node.attack_cost, reachable);
        }
        if budget > 1.0 + RISK_BUDGET_SLACK || budget.is_nan() {
            push(s, Rule::RiskBudget, "p_hat + sum q_hat", budget, 1.0);
        } else if budget > 1.0 {
            report.slack_used.push(i);
        }
    }
    report
}

/// Per-node quantities derived from the game parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedQuantities {
    /// Cost-to-loss ratio C / L.
    pub cost_loss_ratio: Vec<f64>,
    /// Investment threshold C / (L p_hat).
    pub threshold: Vec<f64>,
    /// Attacker's gross gain from hitting an unprotected node:
    /// p_hat L + sum over children of q_hat L_child.
    pub loss_intercept: Vec<f64>,
    /// `loss_intercept - C0`.
    pub attack_margin: Vec<f64>,
    /// `C0 / loss_intercept`.
    pub attack_cost_ratio: Vec<f64>,
    pub threshold_sum: f64,
}

pub fn derived(game: &DefenseGame) -> DerivedQuantities {
    let n = game.len();
    let mut d = DerivedQuantities {
        cost_loss_ratio: Vec::with_capacity(n),
        threshold: Vec::with_capacity(n),
        loss_intercept: Vec::with_capacity(n),
        attack_margin: Vec::with_capacity(n),
        attack_cost_ratio: Vec::with_capacity(n),
        threshold_sum: 0.0,
    };
    for (i, node) in game.nodes().iter().enumerate() {
        let rho = node.invest_cost / node.loss;
        let delta = node.invest_cost / (node.loss * node.direct_success);
        let intercept = loss_intercept(game, i);
        d.cost_loss_ratio.push(rho);
        d.threshold.push(delta);
        d.loss_intercept.push(intercept);
        d.attack_margin.push(intercept - node.attack_cost);
        d.attack_cost_ratio.push(node.attack_cost / intercept);
        d.threshold_sum += delta;
    }
    d
}

pub(crate) fn loss_intercept(game: &DefenseGame, i: usize) -> f64 {
    let node = game.node(i);
    game.out_transfers(i)
        .fold(node.direct_success * node.loss, |acc, (j, q)| {
            acc + q * game.node(j).loss
        })
}

/// True iff every node's protection leaves transfers fully unblocked.
pub fn is_transfer_vulnerable(game: &DefenseGame) -> bool {
    game.nodes().iter().all(|n| n.unblocked_transfer == 1.0)
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: String,
    #[serde(rename = "C")]
    pub invest_cost: f64,
    #[serde(rename = "L")]
    pub loss: f64,
    pub p_hat: f64,
    pub alpha: f64,
    #[serde(rename = "C0")]
    pub attack_cost: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub src: String,
    pub dst: String,
    pub q_hat: f64,
}

/// On-disk game layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameFile {
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

impl From<&DefenseGame> for GameFile {
    fn from(game: &DefenseGame) -> Self {
        let nodes = game
            .nodes()
            .iter()
            .zip(game.ids())
            .map(|(n, id)| NodeRecord {
                id: id.clone(),
                invest_cost: n.invest_cost,
                loss: n.loss,
                p_hat: n.direct_success,
                alpha: n.unblocked_transfer,
                attack_cost: n.attack_cost,
            })
            .collect();
        let edges = (0..game.len())
            .flat_map(|i| {
                game.out_transfers(i).map(move |(j, q)| EdgeRecord {
                    src: game.ids()[i].clone(),
                    dst: game.ids()[j].clone(),
                    q_hat: q,
                })
            })
            .collect();
        GameFile {
            nodes,
            edges,
            provenance: game.provenance().cloned(),
        }
    }
}

impl TryFrom<GameFile> for DefenseGame {
    type Error = Error;

    fn try_from(file: GameFile) -> Result<Self> {
        let mut index = HashMap::with_capacity(file.nodes.len());
        for (i, n) in file.nodes.iter().enumerate() {
            if index.insert(n.id.clone(), i).is_some() {
                return Err(Error::InvalidGame(format!("duplicate node id {:?}", n.id)));
            }
        }
        let lookup = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::InvalidGame(format!("edge references unknown node {id:?}")))
        };
        let mut edges = Vec::with_capacity(file.edges.len());
        for e in &file.edges {
            edges.push((lookup(&e.src)?, lookup(&e.dst)?, e.q_hat));
        }
        let (ids, nodes) = file
            .nodes
            .into_iter()
            .map(|n| {
                (
                    n.id,
                    NodeParams {
                        invest_cost: n.invest_cost,
                        loss: n.loss,
                        direct_success: n.p_hat,
                        unblocked_transfer: n.alpha,
                        attack_cost: n.attack_cost,
                    },
                )
            })
            .unzip();
        let game = DefenseGame::with_ids(ids, nodes, &edges)?;
        Ok(match file.provenance {
            Some(p) => game.with_provenance(p),
            None => game,
        })
    }
}

impl DefenseGame {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&GameFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GameFile = serde_json::from_str(text)?;
        file.try_into()
    }
}
