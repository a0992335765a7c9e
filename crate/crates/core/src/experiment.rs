//! Experiment harness: iteration-count sweeps over tolerance, power-law
//! fits, and summaries of a computed equilibrium. Everything here produces
//! plain data (CSV or JSON) for external plotting.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brgd::{self, BrgdConfig};
use crate::error::{Error, Result};
use crate::gen::{generate, GeneratorSpec};
use crate::graph::DirectedGraph;
use crate::model::DefenseGame;
use crate::payoff::{check_strategies, no_attack_mass};

pub const DEFAULT_ATTACK_THRESHOLD: f64 = 1e-6;

/// Coefficients of `n = a * eps^b`, fitted in log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub a: f64,
    pub b: f64,
    pub r_squared: f64,
}

/// Least squares on `(ln x, ln y)`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLaw> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "power-law fit needs at least 2 points, got {}",
            points.len()
        )));
    }
    if let Some(&(x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "nonpositive coordinate in ({x}, {y})"
        )));
    }
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter(
            "power-law fit needs at least 2 distinct x values".into(),
        ));
    }
    let b = sxy / sxx;
    let intercept = my - b * mx;
    let ss_tot: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - b * x).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(PowerLaw {
        a: intercept.exp(),
        b,
        r_squared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub seed: u64,
    pub converged: bool,
    pub iterations: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Sorted by epsilon, then seed.
    pub rows: Vec<SweepRow>,
    /// Fit of iterations against epsilon over converged rows, present
    /// only when at least three distinct epsilon values converged.
    pub fit: Option<PowerLaw>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epsilon,seed,converged,iterations,wall_ms\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:.3}\n",
                r.epsilon, r.seed, r.converged, r.iterations, r.wall_ms
            ));
        }
        out
    }

    /// Median iteration count of converged runs at each epsilon, ascending
    /// in epsilon. Epsilons with no converged run are omitted.
    pub fn medians(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < self.rows.len() {
            let eps = self.rows[i].epsilon;
            let mut its: Vec<usize> = Vec::new();
            while i < self.rows.len() && self.rows[i].epsilon == eps {
                if self.rows[i].converged {
                    its.push(self.rows[i].iterations);
                }
                i += 1;
            }
            if !its.is_empty() {
                its.sort_unstable();
                let m = its.len();
                let med = if m % 2 == 1 {
                    its[m / 2] as f64
                } else {
                    (its[m / 2 - 1] + its[m / 2]) as f64 / 2.0
                };
                out.push((eps, med));
            }
        }
        out
    }
}

/// Runs the dynamics once per `(epsilon, seed)` pair.
///
/// The game for the `k`-th epsilon is generated over `graph` with generator
/// seed `spec.seed + k`, so a random-mode spec yields a fresh instance per
/// epsilon while a fixed-mode spec yields the same game throughout. Each run
/// uses `config` with its epsilon and seed overridden. Runs converging at
/// step 0 have no logarithm and are left out of the fit.
pub fn sweep(
    graph: &DirectedGraph,
    spec: &GeneratorSpec,
    epsilons: &[f64],
    seeds: &[u64],
    config: &BrgdConfig,
) -> Result<SweepResult> {
    let games = epsilons
        .iter()
        .enumerate()
        .map(|(k, _)| {
            let mut s = spec.clone();
            s.seed = spec.seed.wrapping_add(k as u64);
            generate(graph, &s)
        })
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u64)> = (0..epsilons.len())
        .flat_map(|k| seeds.iter().map(move |&s| (k, s)))
        .collect();
    let mut rows = jobs
        .par_iter()
        .map(|&(k, seed)| run_one(&games[k], epsilons[k], seed, config))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon).then(a.seed.cmp(&b.seed)));
    Ok(finish(rows))
}

/// Like [`sweep`] but on one prebuilt game for every epsilon.
pub fn sweep_game(
    game: &DefenseGame,
    epsilons: &[f64],
    seeds: &[u64],
    config: &BrgdConfig,
) -> Result<SweepResult> {
    let jobs: Vec<(f64, u64)> = epsilons
        .iter()
        .flat_map(|&e| seeds.iter().map(move |&s| (e, s)))
        .collect();
    let mut rows = jobs
        .par_iter()
        .map(|&(eps, seed)| run_one(game, eps, seed, config))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon).then(a.seed.cmp(&b.seed)));
    Ok(finish(rows))
}

fn run_one(game: &DefenseGame, epsilon: f64, seed: u64, config: &BrgdConfig) -> Result<SweepRow> {
    let cfg = BrgdConfig {
        epsilon,
        seed,
        snapshot_every: 0,
        ..config.clone()
    };
    let start = Instant::now();
    let res = brgd::run(game, &cfg)?;
    Ok(SweepRow {
        epsilon,
        seed,
        converged: res.converged,
        iterations: res.iterations,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

fn finish(rows: Vec<SweepRow>) -> SweepResult {
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.converged && r.iterations > 0)
        .map(|r| (r.epsilon, r.iterations as f64))
        .collect();
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let fit = if distinct.len() >= 3 {
        fit_power_law(&points).ok()
    } else {
        None
    };
    SweepResult { rows, fit }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackEntry {
    pub rank: usize,
    pub node: usize,
    pub node_id: String,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    /// Nodes with `y_i > 0`, largest first; ties keep index order.
    pub attack: Vec<AttackEntry>,
    /// Counts over `[0, 0.1], (0.1, 0.2], ..., (0.9, 1]`.
    pub histogram: [usize; 10],
    pub threshold: f64,
    /// Number of nodes with `y_i > threshold`.
    pub support_size: usize,
    pub avg_in_degree: f64,
    pub avg_out_degree: f64,
    pub no_attack: f64,
}

impl EquilibriumReport {
    pub fn attack_csv(&self) -> String {
        let mut out = String::from("rank,node_id,y\n");
        for e in &self.attack {
            out.push_str(&format!("{},{},{}\n", e.rank, e.node_id, e.y));
        }
        out
    }

    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("bin_low,bin_high,count\n");
        for (k, c) in self.histogram.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", k as f64 / 10.0, (k + 1) as f64 / 10.0, c));
        }
        out
    }

    pub fn degree_csv(&self) -> String {
        format!(
            "threshold,n_attacked,avg_indeg,avg_outdeg\n{},{},{},{}\n",
            self.threshold, self.support_size, self.avg_in_degree, self.avg_out_degree
        )
    }
}

/// Histogram bin of an investment level in `[0, 1]`.
pub fn investment_bin(x: f64) -> usize {
    (0..9).find(|&k| x <= (k + 1) as f64 / 10.0).unwrap_or(9)
}

pub fn report_equilibrium(
    game: &DefenseGame,
    x: &[f64],
    y: &[f64],
    threshold: f64,
) -> Result<EquilibriumReport> {
    check_strategies(game.len(), x, y)?;
    let graph = game.graph();

    let mut order: Vec<usize> = (0..y.len()).filter(|&i| y[i] > 0.0).collect();
    order.sort_by(|&a, &b| y[b].total_cmp(&y[a]).then(a.cmp(&b)));
    let attack = order
        .iter()
        .enumerate()
        .map(|(r, &i)| AttackEntry {
            rank: r + 1,
            node: i,
            node_id: game.ids()[i].clone(),
            y: y[i],
        })
        .collect();

    let mut histogram = [0; 10];
    for &xi in x {
        histogram[investment_bin(xi)] += 1;
    }

    let attacked: Vec<usize> = (0..y.len()).filter(|&i| y[i] > threshold).collect();
    let avg = |f: &dyn Fn(usize) -> usize| {
        if attacked.is_empty() {
            0.0
        } else {
            attacked.iter().map(|&i| f(i)).sum::<usize>() as f64 / attacked.len() as f64
        }
    };
    Ok(EquilibriumReport {
        attack,
        histogram,
        threshold,
        support_size: attacked.len(),
        avg_in_degree: avg(&|i| graph.in_degree(i)),
        avg_out_degree: avg(&|i| graph.out_degree(i)),
        no_attack: no_attack_mass(y),
    })
}
