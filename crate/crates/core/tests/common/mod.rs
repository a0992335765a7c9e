#![allow(dead_code)]

use idd_core::{validate, DefenseGame, NodeParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Below,
    Equal,
    Above,
}

/// Random digraph on `n` nodes, each ordered pair an edge with probability `p`.
pub fn random_edges(rng: &mut ChaCha20Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for s in 0..n {
        for d in 0..n {
            if s != d && rng.random::<f64>() < p {
                edges.push((s, d));
            }
        }
    }
    edges
}

/// Transfer probabilities filling a random share of each node's remaining risk budget.
fn transfers(
    rng: &mut ChaCha20Rng,
    n: usize,
    edges: &[(usize, usize)],
    p_hat: &[f64],
) -> Vec<(usize, usize, f64)> {
    let mut out_deg = vec![0usize; n];
    for &(s, _) in edges {
        out_deg[s] += 1;
    }
    edges
        .iter()
        .map(|&(s, d)| {
            let share = (1.0 - p_hat[s]) * rng.random_range(0.05..0.95) / out_deg[s] as f64;
            (s, d, share)
        })
        .collect()
}

fn loss_intercept(nodes: &[NodeParams], edges: &[(usize, usize, f64)], i: usize) -> f64 {
    nodes[i].direct_success * nodes[i].loss
        + edges
            .iter()
            .filter(|e| e.0 == i)
            .map(|&(_, d, q)| q * nodes[d].loss)
            .sum::<f64>()
}

fn reachable(nodes: &[NodeParams], edges: &[(usize, usize, f64)], i: usize) -> f64 {
    nodes[i].direct_success * nodes[i].loss
        + edges
            .iter()
            .filter(|e| e.0 == i)
            .map(|&(_, d, q)| q * nodes[d].unblocked_transfer * nodes[d].loss)
            .sum::<f64>()
}

/// Valid game with `alpha` drawn from {0, 1, uniform}.
pub fn mixed_alpha_game(rng: &mut ChaCha20Rng, n: usize) -> DefenseGame {
    let edges = random_edges(rng, n, 0.4);
    let p_hat: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..0.8)).collect();
    let q = transfers(rng, n, &edges, &p_hat);
    let mut nodes: Vec<NodeParams> = (0..n)
        .map(|i| {
            let loss = rng.random_range(1.0..100.0);
            let alpha = match rng.random_range(0..3) {
                0 => 0.0,
                1 => 1.0,
                _ => rng.random::<f64>(),
            };
            NodeParams {
                invest_cost: p_hat[i] * loss * rng.random_range(0.02..0.98),
                loss,
                direct_success: p_hat[i],
                unblocked_transfer: alpha,
                attack_cost: 0.0,
            }
        })
        .collect();
    for i in 0..n {
        nodes[i].attack_cost = reachable(&nodes, &q, i) * rng.random_range(0.02..0.98);
    }
    let game = DefenseGame::new(nodes, &q).unwrap();
    assert!(validate(&game).is_valid());
    game
}

/// Valid transfer-vulnerable game whose threshold sum falls in the
/// requested regime. `Equal` uses thresholds that are multiples of 1/64.
pub fn vulnerable_game(rng: &mut ChaCha20Rng, n: usize, target: Target) -> DefenseGame {
    assert!(n >= 1 && (target == Target::Below || n >= 2));
    let thresholds = loop {
        let t = match target {
            Target::Equal => dyadic_split(rng, n, 64),
            Target::Below | Target::Above => {
                let total = match target {
                    Target::Below => rng.random_range(0.2..0.95),
                    _ => rng.random_range(1.05..(0.9 * n as f64).max(1.1)),
                };
                let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
                let s: f64 = w.iter().sum();
                w.iter().map(|v| total * v / s).collect()
            }
        };
        if t.iter().all(|&v| v > 0.0 && v < 0.99) {
            break t;
        }
    };
    let edges = random_edges(rng, n, 0.4);
    let p_hat: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..0.8)).collect();
    let q = transfers(rng, n, &edges, &p_hat);
    let mut nodes: Vec<NodeParams> = (0..n)
        .map(|i| {
            let loss = rng.random_range(1.0..100.0);
            NodeParams {
                invest_cost: thresholds[i] * (loss * p_hat[i]),
                loss,
                direct_success: p_hat[i],
                unblocked_transfer: 1.0,
                attack_cost: 0.0,
            }
        })
        .collect();
    for i in 0..n {
        nodes[i].attack_cost = loss_intercept(&nodes, &q, i) * rng.random_range(0.05..0.95);
    }
    let game = DefenseGame::new(nodes, &q).unwrap();
    assert!(validate(&game).is_valid());
    game
}

/// `n` positive multiples of `1 / denom` summing to one.
fn dyadic_split(rng: &mut ChaCha20Rng, n: usize, denom: usize) -> Vec<f64> {
    let mut cuts: Vec<usize> = Vec::new();
    while cuts.len() < n - 1 {
        let c = rng.random_range(1..denom);
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.sort_unstable();
    let mut prev = 0;
    let mut out = Vec::with_capacity(n);
    for c in cuts.into_iter().chain(std::iter::once(denom)) {
        out.push((c - prev) as f64 / denom as f64);
        prev = c;
    }
    out
}

/// Uniform point of the cube and of the (n + 1)-simplex.
pub fn random_profile(rng: &mut ChaCha20Rng, n: usize) -> (Vec<f64>, Vec<f64>) {
    let x = (0..n).map(|_| rng.random::<f64>()).collect();
    let e: Vec<f64> = (0..=n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = e.iter().sum();
    let y = e[1..].iter().map(|v| v / s).collect();
    (x, y)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
