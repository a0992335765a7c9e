//! Costs, attacker utility, best responses and regret.
//!
//! The attacker hits at most one node, so a mixed attacker strategy is the
//! vector of marginal target probabilities `y` with the no-attack mass
//! `y0 = 1 - sum(y)` implicit. Under that restriction the expected transfer
//! risk into node `i` is linear in `y`:
//!
//! ```text
//! rbar_i = sum_{j in Pa(i)} y_j (1 - x_j) q_ji
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DefenseGame;

/// Tolerance on the simplex constraint of attacker strategies.
pub const SIMPLEX_TOL: f64 = 1e-12;
/// Relative indifference tolerance of the best-response correspondences.
pub const INDIFFERENCE_TOL: f64 = 1e-9;

/// Attacker pure strategy: no attack or a single target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attack {
    None,
    Target(usize),
}

impl Attack {
    pub fn hits(self, i: usize) -> bool {
        self == Attack::Target(i)
    }

    /// The `n + 1` pure attacker strategies, no-attack first.
    pub fn all(n: usize) -> impl Iterator<Item = Attack> {
        std::iter::once(Attack::None).chain((0..n).map(Attack::Target))
    }
}

/// A joint mixed profile: investment probabilities `x` and attack
/// marginals `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Profile {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        Profile { x, y }
    }

    pub fn no_attack(&self) -> f64 {
        no_attack_mass(&self.y)
    }

    pub fn check(&self, n: usize) -> Result<()> {
        check_strategies(n, &self.x, &self.y)
    }
}

pub fn no_attack_mass(y: &[f64]) -> f64 {
    1.0 - y.iter().sum::<f64>()
}

/// Shape and feasibility check of a mixed profile.
pub fn check_strategies(n: usize, x: &[f64], y: &[f64]) -> Result<()> {
    for len in [x.len(), y.len()] {
        if len != n {
            return Err(Error::Shape {
                expected: n,
                actual: len,
            });
        }
    }
    if let Some((i, v)) = x.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidStrategy(format!("x[{i}] = {v} outside [0, 1]")));
    }
    if let Some((i, v)) = y.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::InvalidStrategy(format!("y[{i}] = {v} is negative")));
    }
    let y0 = no_attack_mass(y);
    if y0 < -SIMPLEX_TOL {
        return Err(Error::InvalidStrategy(format!("attack mass exceeds 1 by {}", -y0)));
    }
    Ok(())
}

fn check_pure(game: &DefenseGame, a: &[bool], b: Attack) -> Result<()> {
    if a.len() != game.len() {
        return Err(Error::Shape {
            expected: game.len(),
            actual: a.len(),
        });
    }
    if let Attack::Target(t) = b {
        if t >= game.len() {
            return Err(Error::NodeOutOfRange {
                index: t,
                nodes: game.len(),
            });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Pure strategies
// ---------------------------------------------------------------------------

/// Transfer risk into `i` under pure play: one minus the product of
/// per-parent safety factors.
fn pure_transfer_risk(game: &DefenseGame, a: &[bool], b: Attack, i: usize) -> f64 {
    let safety: f64 = game
        .in_transfers(i)
        .map(|(j, q)| {
            let exposed = b.hits(j) && !a[j];
            if exposed {
                1.0 - q
            } else {
                1.0
            }
        })
        .product();
    1.0 - safety
}

pub(crate) fn pure_cost_unchecked(game: &DefenseGame, a: &[bool], b: Attack, i: usize) -> f64 {
    let node = game.node(i);
    let r = pure_transfer_risk(game, a, b, i);
    if a[i] {
        node.invest_cost + node.unblocked_transfer * r * node.loss
    } else {
        let p = if b.hits(i) { node.direct_success } else { 0.0 };
        (p + (1.0 - p) * r) * node.loss
    }
}

/// Cost of defender `i` under the pure profile `(a, b)`.
pub fn pure_cost(game: &DefenseGame, a: &[bool], b: Attack, i: usize) -> Result<f64> {
    check_pure(game, a, b)?;
    if i >= game.len() {
        return Err(Error::NodeOutOfRange {
            index: i,
            nodes: game.len(),
        });
    }
    Ok(pure_cost_unchecked(game, a, b, i))
}

pub(crate) fn pure_attacker_utility_unchecked(game: &DefenseGame, a: &[bool], b: Attack) -> f64 {
    (0..game.len())
        .map(|i| {
            let node = game.node(i);
            let invest = if a[i] { node.invest_cost } else { 0.0 };
            let attack = if b.hits(i) { node.attack_cost } else { 0.0 };
            pure_cost_unchecked(game, a, b, i) - invest - attack
        })
        .sum()
}

/// Attacker utility: total defender losses net of their investment, minus
/// the cost of the chosen attack.
pub fn pure_attacker_utility(game: &DefenseGame, a: &[bool], b: Attack) -> Result<f64> {
    check_pure(game, a, b)?;
    Ok(pure_attacker_utility_unchecked(game, a, b))
}

// ---------------------------------------------------------------------------
// Mixed strategies
// ---------------------------------------------------------------------------

/// Expected transfer risk into `i`.
pub fn transfer_risk(game: &DefenseGame, x: &[f64], y: &[f64], i: usize) -> f64 {
    game.in_transfers(i)
        .map(|(j, q)| y[j] * (1.0 - x[j]) * q)
        .sum()
}

/// Expected cost of defender `i` with its own investment probability set to `xi`.
fn cost_at(game: &DefenseGame, xi: f64, y: &[f64], risk: f64, i: usize) -> f64 {
    let node = game.node(i);
    xi * (node.invest_cost + node.unblocked_transfer * risk * node.loss)
        + (1.0 - xi) * (node.direct_success * y[i] + risk) * node.loss
}

/// Expected cost of defender `i` under `(x, y)`.
pub fn mixed_cost(game: &DefenseGame, x: &[f64], y: &[f64], i: usize) -> f64 {
    let risk = transfer_risk(game, x, y, i);
    cost_at(game, x[i], y, risk, i)
}

/// Change in attacker utility from shifting unit mass from no-attack to
/// target `i`, given defender profile `x`.
pub fn attack_gain(game: &DefenseGame, x: &[f64], i: usize) -> f64 {
    let node = game.node(i);
    let downstream: f64 = game
        .out_transfers(i)
        .map(|(j, q)| {
            let child = game.node(j);
            q * (child.unblocked_transfer * x[j] + 1.0 - x[j]) * child.loss
        })
        .sum();
    (1.0 - x[i]) * (node.direct_success * node.loss + downstream) - node.attack_cost
}

/// [`attack_gain`] for every node.
pub fn attack_gains(game: &DefenseGame, x: &[f64]) -> Vec<f64> {
    (0..game.len()).map(|i| attack_gain(game, x, i)).collect()
}

/// Expected attacker utility, `sum_i y_i gain_i(x)`.
pub fn mixed_attacker_utility(game: &DefenseGame, x: &[f64], y: &[f64]) -> f64 {
    (0..game.len()).map(|i| y[i] * attack_gain(game, x, i)).sum()
}

/// Effective attack exposure of defender `i`; investing is a best response
/// iff it exceeds the threshold `C / (L p_hat)`.
pub fn s_hat(game: &DefenseGame, x: &[f64], y: &[f64], i: usize) -> f64 {
    let node = game.node(i);
    let mut s = y[i];
    if node.unblocked_transfer != 1.0 {
        s += (1.0 - node.unblocked_transfer) / node.direct_success * transfer_risk(game, x, y, i);
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefenderResponse {
    Invest,
    Abstain,
    /// Every `x_i` in `[0, 1]` is a best response.
    Indifferent,
}

pub fn defender_best_response(
    game: &DefenseGame,
    x: &[f64],
    y: &[f64],
    i: usize,
) -> DefenderResponse {
    let node = game.node(i);
    let threshold = node.invest_cost / (node.loss * node.direct_success);
    classify_exposure(s_hat(game, x, y, i), threshold)
}

pub(crate) fn classify_exposure(s: f64, threshold: f64) -> DefenderResponse {
    let tol = INDIFFERENCE_TOL * threshold;
    if s > threshold + tol {
        DefenderResponse::Invest
    } else if s < threshold - tol {
        DefenderResponse::Abstain
    } else {
        DefenderResponse::Indifferent
    }
}

/// Pure attacker best responses: the targets whose gain reaches the best
/// achievable gain (no-attack counts as gain 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackerResponse {
    pub targets: Vec<usize>,
    pub no_attack: bool,
    /// `max(0, max_i gain_i)`.
    pub best_gain: f64,
}

impl AttackerResponse {
    /// Whether every pure strategy in the support of `y` is a best response.
    pub fn supports(&self, y: &[f64]) -> bool {
        let mut in_set = vec![false; y.len()];
        for &t in &self.targets {
            in_set[t] = true;
        }
        let y0 = no_attack_mass(y);
        y.iter().zip(&in_set).all(|(&v, &ok)| v <= 0.0 || ok)
            && (y0 <= SIMPLEX_TOL || self.no_attack)
    }

    pub fn len(&self) -> usize {
        self.targets.len() + usize::from(self.no_attack)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn attacker_best_response(game: &DefenseGame, x: &[f64]) -> AttackerResponse {
    best_response_from_gains(game, &attack_gains(game, x))
}

pub(crate) fn best_response_from_gains(game: &DefenseGame, gains: &[f64]) -> AttackerResponse {
    let best_gain = gains.iter().copied().fold(0.0_f64, f64::max);
    let max_attack_cost = game
        .nodes()
        .iter()
        .map(|n| n.attack_cost)
        .fold(0.0_f64, f64::max);
    let tol = INDIFFERENCE_TOL * (best_gain.abs() + max_attack_cost);
    let targets = gains
        .iter()
        .enumerate()
        .filter(|(_, &g)| g >= best_gain - tol)
        .map(|(i, _)| i)
        .collect();
    AttackerResponse {
        targets,
        no_attack: best_gain <= tol,
        best_gain,
    }
}

// ---------------------------------------------------------------------------
// Regret
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RegretMode {
    /// Defender regret divided by its loss, attacker regret by the largest
    /// loss intercept.
    #[default]
    #[serde(rename = "per-player-range")]
    PerPlayerRange,
    #[serde(rename = "absolute")]
    Absolute,
}

impl fmt::Display for RegretMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegretMode::PerPlayerRange => "per-player-range",
            RegretMode::Absolute => "absolute",
        })
    }
}

impl FromStr for RegretMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-player-range" => Ok(RegretMode::PerPlayerRange),
            "absolute" => Ok(RegretMode::Absolute),
            other => Err(Error::InvalidParameter(format!("unknown regret mode {other:?}"))),
        }
    }
}

/// Unilateral-deviation gains at a profile. `eps` is the largest entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub mode: RegretMode,
    pub eps: f64,
    pub defender: Vec<f64>,
    pub attacker: f64,
}

/// Scale used to normalize attacker regret in [`RegretMode::PerPlayerRange`].
pub fn attacker_scale(game: &DefenseGame) -> f64 {
    (0..game.len())
        .map(|i| crate::model::loss_intercept(game, i))
        .fold(0.0_f64, f64::max)
}

pub fn regret(game: &DefenseGame, x: &[f64], y: &[f64], mode: RegretMode) -> Result<RegretReport> {
    check_strategies(game.len(), x, y)?;
    Ok(regret_unchecked(game, x, y, mode, &attack_gains(game, x)))
}

pub(crate) fn regret_unchecked(
    game: &DefenseGame,
    x: &[f64],
    y: &[f64],
    mode: RegretMode,
    gains: &[f64],
) -> RegretReport {
    let defender: Vec<f64> = (0..game.len())
        .map(|i| {
            let risk = transfer_risk(game, x, y, i);
            let invest = cost_at(game, 1.0, y, risk, i);
            let abstain = cost_at(game, 0.0, y, risk, i);
            let diff = invest - abstain;
            let raw = if diff > 0.0 {
                x[i] * diff
            } else {
                (1.0 - x[i]) * -diff
            };
            match mode {
                RegretMode::PerPlayerRange => raw / game.node(i).loss,
                RegretMode::Absolute => raw,
            }
        })
        .collect();

    let best = gains.iter().copied().fold(0.0_f64, f64::max);
    let achieved: f64 = y.iter().zip(gains).map(|(yi, g)| yi * g).sum();
    let raw = (best - achieved).max(0.0);
    let attacker = match mode {
        RegretMode::PerPlayerRange => {
            let scale = attacker_scale(game);
            if scale > 0.0 {
                raw / scale
            } else {
                raw
            }
        }
        RegretMode::Absolute => raw,
    };
    let eps = defender.iter().copied().fold(attacker, f64::max);
    RegretReport {
        mode,
        eps,
        defender,
        attacker,
    }
}
