//! Brute-force ground truth for small games.
//!
//! Everything here is computed from the pure-strategy cost and utility by
//! explicit enumeration over attacker targets and parent investment
//! outcomes, never from the closed forms in [`crate::payoff`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DefenseGame;
use crate::payoff::{
    attacker_scale, check_strategies, no_attack_mass, pure_attacker_utility_unchecked,
    pure_cost_unchecked, Attack, SIMPLEX_TOL,
};

/// Largest parent set enumerated by [`expected_cost_enum`].
pub const MAX_ENUM_PARENTS: usize = 20;
/// Largest game scanned by [`psne_search`].
pub const MAX_PSNE_NODES: usize = 20;
/// Default tolerance of [`verify_msne`].
pub const DEFAULT_VERIFY_TOL: f64 = 1e-9;

fn parent_cap(game: &DefenseGame, i: usize) -> Result<()> {
    let k = game.graph().in_degree(i);
    if k > MAX_ENUM_PARENTS {
        return Err(Error::SizeCap {
            what: "parents",
            size: k,
            cap: MAX_ENUM_PARENTS,
        });
    }
    Ok(())
}

/// Expected cost of `i` under a fixed attack, with `i` investing with
/// probability `xi` and parents randomizing independently according to `x`.
fn cost_given_attack(game: &DefenseGame, x: &[f64], xi: f64, b: Attack, i: usize) -> f64 {
    let parents = game.graph().parents(i);
    let mut a = vec![false; game.len()];
    let mut total = 0.0;
    for mask in 0u32..(1u32 << parents.len()) {
        let mut weight = 1.0;
        for (bit, &j) in parents.iter().enumerate() {
            let invest = mask >> bit & 1 == 1;
            a[j] = invest;
            weight *= if invest { x[j] } else { 1.0 - x[j] };
        }
        if weight == 0.0 {
            continue;
        }
        for (invest, w) in [(true, xi), (false, 1.0 - xi)] {
            if w == 0.0 {
                continue;
            }
            a[i] = invest;
            total += weight * w * pure_cost_unchecked(game, &a, b, i);
        }
    }
    total
}

fn attack_weights(y: &[f64]) -> impl Iterator<Item = (Attack, f64)> + '_ {
    std::iter::once((Attack::None, no_attack_mass(y).max(0.0)))
        .chain(y.iter().enumerate().map(|(t, &w)| (Attack::Target(t), w)))
}

fn check_index(game: &DefenseGame, i: usize) -> Result<()> {
    if i >= game.len() {
        return Err(Error::NodeOutOfRange {
            index: i,
            nodes: game.len(),
        });
    }
    Ok(())
}

/// Expected cost of defender `i`, enumerating every pure attack and every
/// investment outcome of `i` and its parents.
pub fn expected_cost_enum(game: &DefenseGame, x: &[f64], y: &[f64], i: usize) -> Result<f64> {
    check_strategies(game.len(), x, y)?;
    check_index(game, i)?;
    parent_cap(game, i)?;
    Ok(expected_cost_with(game, x, x[i], y, i))
}

fn expected_cost_with(game: &DefenseGame, x: &[f64], xi: f64, y: &[f64], i: usize) -> f64 {
    attack_weights(y)
        .filter(|(_, w)| *w > 0.0)
        .map(|(b, w)| w * cost_given_attack(game, x, xi, b, i))
        .sum()
}

/// Expected attacker utility by enumeration.
pub fn attacker_utility_enum(game: &DefenseGame, x: &[f64], y: &[f64]) -> Result<f64> {
    check_strategies(game.len(), x, y)?;
    for i in 0..game.len() {
        parent_cap(game, i)?;
    }
    Ok(attack_weights(y)
        .filter(|(_, w)| *w > 0.0)
        .map(|(b, w)| w * utility_given_attack(game, x, b))
        .sum())
}

fn utility_given_attack(game: &DefenseGame, x: &[f64], b: Attack) -> f64 {
    let defenders: f64 = (0..game.len())
        .map(|i| cost_given_attack(game, x, x[i], b, i) - x[i] * game.node(i).invest_cost)
        .sum();
    let attack = match b {
        Attack::None => 0.0,
        Attack::Target(t) => game.node(t).attack_cost,
    };
    defenders - attack
}

/// Gain of each pure target over no-attack, by enumeration.
pub fn attack_gains_enum(game: &DefenseGame, x: &[f64]) -> Result<Vec<f64>> {
    for i in 0..game.len() {
        parent_cap(game, i)?;
    }
    let base = utility_given_attack(game, x, Attack::None);
    Ok((0..game.len())
        .map(|t| utility_given_attack(game, x, Attack::Target(t)) - base)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Player {
    Defender(usize),
    Attacker,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MsneRule {
    /// Interior investment without indifference.
    Indifference,
    /// Full investment while abstaining is strictly better.
    InvestDominated,
    /// No investment while investing is strictly better.
    AbstainDominated,
    /// Attack mass on a target below the best gain.
    SuboptimalTarget,
    /// No-attack mass while some target has positive gain.
    SuboptimalNoAttack,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsneViolation {
    pub player: Player,
    /// For attacker target violations, the offending target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<usize>,
    pub rule: MsneRule,
    /// Normalized gap that exceeded the tolerance.
    pub observed: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsneReport {
    pub ok: bool,
    pub violations: Vec<MsneViolation>,
}

/// Checks both equilibrium conditions from enumerated expected values.
///
/// Defender gaps are in threshold units, `(M_i(0) - M_i(1)) / (p_hat_i L_i)`,
/// which equals the exposure minus the threshold. Attacker gaps are divided
/// by the largest loss intercept.
pub fn verify_msne(game: &DefenseGame, x: &[f64], y: &[f64], tol: f64) -> Result<MsneReport> {
    check_strategies(game.len(), x, y)?;
    for i in 0..game.len() {
        parent_cap(game, i)?;
    }
    let mut violations = Vec::new();

    for i in 0..game.len() {
        let node = game.node(i);
        let invest = expected_cost_with(game, x, 1.0, y, i);
        let abstain = expected_cost_with(game, x, 0.0, y, i);
        let gap = (abstain - invest) / (node.direct_success * node.loss);
        let xi = x[i];
        let rule = if xi > 0.0 && xi < 1.0 && gap.abs() > tol {
            Some(MsneRule::Indifference)
        } else if xi == 1.0 && gap < -tol {
            Some(MsneRule::InvestDominated)
        } else if xi == 0.0 && gap > tol {
            Some(MsneRule::AbstainDominated)
        } else {
            None
        };
        if let Some(rule) = rule {
            violations.push(MsneViolation {
                player: Player::Defender(i),
                target: None,
                rule,
                observed: gap,
                bound: tol,
            });
        }
    }

    let gains = attack_gains_enum(game, x)?;
    let best = gains.iter().copied().fold(0.0_f64, f64::max);
    let scale = attacker_scale(game).max(f64::MIN_POSITIVE);
    for (t, (&yt, &g)) in y.iter().zip(&gains).enumerate() {
        let gap = (best - g) / scale;
        if yt > 0.0 && gap > tol {
            violations.push(MsneViolation {
                player: Player::Attacker,
                target: Some(t),
                rule: MsneRule::SuboptimalTarget,
                observed: gap,
                bound: tol,
            });
        }
    }
    if no_attack_mass(y) > SIMPLEX_TOL && best / scale > tol {
        violations.push(MsneViolation {
            player: Player::Attacker,
            target: None,
            rule: MsneRule::SuboptimalNoAttack,
            observed: best / scale,
            bound: tol,
        });
    }

    Ok(MsneReport {
        ok: violations.is_empty(),
        violations,
    })
}

fn bits(mask: u64, n: usize) -> Vec<bool> {
    (0..n).map(|i| mask >> i & 1 == 1).collect()
}

fn close(a: f64, b: f64) -> f64 {
    1e-12 * (a.abs() + b.abs() + 1.0)
}

/// Largest strict gain any single player gets by deviating from `(a, b)`.
pub fn pure_regret(game: &DefenseGame, a: &[bool], b: Attack) -> f64 {
    let mut worst = 0.0_f64;
    let mut flipped = a.to_vec();
    for i in 0..game.len() {
        let here = pure_cost_unchecked(game, a, b, i);
        flipped[i] = !a[i];
        let there = pure_cost_unchecked(game, &flipped, b, i);
        flipped[i] = a[i];
        worst = worst.max(here - there);
    }
    let here = pure_attacker_utility_unchecked(game, a, b);
    for other in Attack::all(game.len()) {
        worst = worst.max(pure_attacker_utility_unchecked(game, a, other) - here);
    }
    worst
}

/// Exhaustive search for a pure-strategy equilibrium.
pub fn psne_search(game: &DefenseGame) -> Result<Option<(Vec<bool>, Attack)>> {
    let n = game.len();
    if n > MAX_PSNE_NODES {
        return Err(Error::SizeCap {
            what: "nodes",
            size: n,
            cap: MAX_PSNE_NODES,
        });
    }
    let found = (0..1u64 << n).into_par_iter().find_map_first(|mask| {
        let a = bits(mask, n);
        let utilities: Vec<(Attack, f64)> = Attack::all(n)
            .map(|b| (b, pure_attacker_utility_unchecked(game, &a, b)))
            .collect();
        let best = utilities.iter().map(|(_, u)| *u).fold(f64::NEG_INFINITY, f64::max);
        let mut flipped = a.clone();
        for &(b, u) in &utilities {
            if best - u > close(best, u) {
                continue;
            }
            let stable = (0..n).all(|i| {
                let here = pure_cost_unchecked(game, &a, b, i);
                flipped[i] = !a[i];
                let there = pure_cost_unchecked(game, &flipped, b, i);
                flipped[i] = a[i];
                here - there <= close(here, there)
            });
            if stable {
                return Some((a.clone(), b));
            }
        }
        None
    });
    Ok(found)
}

/// Monte Carlo estimate of defender `i`'s cost under pure play, by
/// simulating the attack and the single transfer it may cause.
/// Returns `(mean, standard error)`.
pub fn simulate_pure_cost(
    game: &DefenseGame,
    a: &[bool],
    b: Attack,
    i: usize,
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let node = game.node(i);
    let base = if a[i] { node.invest_cost } else { 0.0 };
    let mut hits = 0usize;
    if let Attack::Target(t) = b {
        if !a[t] {
            let direct = game.node(t).direct_success;
            let transfers: Vec<(usize, f64)> = game.out_transfers(t).collect();
            for _ in 0..samples {
                let u: f64 = rng.random();
                let struck = if u < direct {
                    Some(t)
                } else {
                    let mut acc = direct;
                    transfers.iter().find_map(|&(j, q)| {
                        acc += q;
                        (u < acc).then_some(j)
                    })
                };
                if struck != Some(i) {
                    continue;
                }
                let blocked = if i != t && a[i] {
                    rng.random::<f64>() >= node.unblocked_transfer
                } else {
                    false
                };
                if !blocked {
                    hits += 1;
                }
            }
        }
    }
    let p = hits as f64 / samples as f64;
    let mean = base + p * node.loss;
    let se = node.loss * (p * (1.0 - p) / samples as f64).sqrt();
    (mean, se)
}
