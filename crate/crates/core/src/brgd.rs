//! Best-response-gradient dynamics: every player repeatedly moves its mixed
//! strategy in the direction of its best response, simultaneously, until the
//! profile is an approximate equilibrium.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate, DefenseGame};
use crate::payoff::{
    attack_gains, attacker_scale, best_response_from_gains, classify_exposure, no_attack_mass,
    regret_unchecked, transfer_risk, DefenderResponse, Profile, RegretMode, RegretReport,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// `x` uniform on the cube, `y` uniform on the simplex (no-attack included).
    Random,
    Profile(Profile),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    /// Extragradient: each player takes a projected step of size `eta`
    /// along the gradient of its own normalized payoff, evaluated at the
    /// profile one such step ahead. Defenders use `p_hat (s_hat - threshold)`,
    /// the attacker uses `gain / max loss intercept` with no-attack at 0.
    #[default]
    Gradient,
    /// Convex step `eta` toward a pure best response. A defender keeps
    /// `x_i` when indifferent; the attacker keeps `y` when it is already a
    /// best response and otherwise heads for the uniform mixture over its
    /// best pure strategies.
    Smoothed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BrgdConfig {
    pub epsilon: f64,
    pub max_iterations: usize,
    pub step_size: f64,
    pub rule: UpdateRule,
    pub mode: RegretMode,
    pub seed: u64,
    /// Record the profile every this many iterations; 0 disables.
    pub snapshot_every: usize,
    pub init: Init,
}

impl Default for BrgdConfig {
    fn default() -> Self {
        BrgdConfig {
            epsilon: 1e-3,
            max_iterations: 2_000,
            step_size: 0.5,
            rule: UpdateRule::Gradient,
            mode: RegretMode::PerPlayerRange,
            seed: 0,
            snapshot_every: 0,
            init: Init::Random,
        }
    }
}

impl BrgdConfig {
    fn check(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "step size {} outside (0, 1]",
                self.step_size
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon {}", self.epsilon)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub iteration: usize,
    pub profile: Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrgdResult {
    pub config: BrgdConfig,
    pub converged: bool,
    /// Number of update steps taken.
    pub iterations: usize,
    pub profile: Profile,
    pub regret: RegretReport,
    pub trace: Vec<TracePoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshots: Vec<Snapshot>,
}

impl BrgdResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// The trace as `iteration,epsilon` lines with a header.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,epsilon\n");
        for p in &self.trace {
            out.push_str(&format!("{},{}\n", p.iteration, p.eps));
        }
        out
    }
}

/// Random starting profile drawn from `seed`.
pub fn init_random(n: usize, seed: u64) -> Profile {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let x = (0..n).map(|_| rng.random::<f64>()).collect();
    // Normalized exponentials are uniform on the simplex; entry 0 is no-attack.
    let e: Vec<f64> = (0..=n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = e.iter().sum();
    let y = e[1..].iter().map(|v| v / total).collect();
    Profile::new(x, y)
}

/// Euclidean projection onto the probability simplex.
pub(crate) fn project_simplex(v: &mut [f64]) {
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if u > t {
            shift = t;
        }
    }
    for value in v.iter_mut() {
        *value = (*value - shift).max(0.0);
    }
}

fn exposure(game: &DefenseGame, p: &Profile, i: usize) -> f64 {
    let node = game.node(i);
    let mut s = p.y[i];
    if node.unblocked_transfer != 1.0 {
        s += (1.0 - node.unblocked_transfer) / node.direct_success * transfer_risk(game, &p.x, &p.y, i);
    }
    s
}

fn threshold(game: &DefenseGame, i: usize) -> f64 {
    let node = game.node(i);
    node.invest_cost / (node.loss * node.direct_success)
}

/// Normalized payoff gradients: cost slope per defender (descend) and
/// attack gain per target (ascend).
struct Field {
    x: Vec<f64>,
    y: Vec<f64>,
}

fn field(game: &DefenseGame, p: &Profile, gains: &[f64], scale: f64) -> Field {
    let x = (0..game.len())
        .map(|i| game.node(i).direct_success * (threshold(game, i) - exposure(game, p, i)))
        .collect();
    let y = gains.iter().map(|g| g / scale).collect();
    Field { x, y }
}

fn gradient_move(base: &Profile, f: &Field, eta: f64) -> Profile {
    let x = base
        .x
        .iter()
        .zip(&f.x)
        .map(|(x, g)| (x - eta * g).clamp(0.0, 1.0))
        .collect();
    let mut full = Vec::with_capacity(base.y.len() + 1);
    full.push(no_attack_mass(&base.y));
    full.extend(base.y.iter().zip(&f.y).map(|(y, g)| y + eta * g));
    project_simplex(&mut full);
    full.remove(0);
    Profile::new(x, full)
}

fn gradient_step(game: &DefenseGame, p: &Profile, gains: &[f64], eta: f64) -> Profile {
    let scale = match attacker_scale(game) {
        s if s > 0.0 => s,
        _ => 1.0,
    };
    let ahead = gradient_move(p, &field(game, p, gains, scale), eta);
    let ahead_gains = attack_gains(game, &ahead.x);
    gradient_move(p, &field(game, &ahead, &ahead_gains, scale), eta)
}

fn smoothed_step(game: &DefenseGame, p: &Profile, gains: &[f64], eta: f64) -> Profile {
    let x = (0..game.len())
        .map(|i| {
            let target = match classify_exposure(exposure(game, p, i), threshold(game, i)) {
                DefenderResponse::Invest => 1.0,
                DefenderResponse::Abstain => 0.0,
                DefenderResponse::Indifferent => p.x[i],
            };
            (p.x[i] + eta * (target - p.x[i])).clamp(0.0, 1.0)
        })
        .collect();

    let response = best_response_from_gains(game, gains);
    let y = if response.supports(&p.y) {
        p.y.clone()
    } else {
        let weight = 1.0 / response.len() as f64;
        let mut target = vec![0.0; p.y.len()];
        for &t in &response.targets {
            target[t] = weight;
        }
        p.y.iter()
            .zip(&target)
            .map(|(v, t)| (v + eta * (t - v)).max(0.0))
            .collect()
    };
    Profile::new(x, y)
}

/// One synchronous update of every player.
pub fn step(game: &DefenseGame, profile: &Profile, eta: f64, rule: UpdateRule) -> Result<Profile> {
    profile.check(game.len())?;
    let gains = attack_gains(game, &profile.x);
    Ok(match rule {
        UpdateRule::Gradient => gradient_step(game, profile, &gains, eta),
        UpdateRule::Smoothed => smoothed_step(game, profile, &gains, eta),
    })
}

/// Runs the dynamics until the regret drops to `config.epsilon` or the
/// iteration budget is spent.
pub fn run(game: &DefenseGame, config: &BrgdConfig) -> Result<BrgdResult> {
    config.check()?;
    let report = validate(game);
    if !report.is_valid() {
        return Err(Error::AssumptionViolated(report));
    }
    let mut profile = match &config.init {
        Init::Random => init_random(game.len(), config.seed),
        Init::Profile(p) => {
            p.check(game.len())?;
            p.clone()
        }
    };

    let mut trace = Vec::new();
    let mut snapshots = Vec::new();
    let mut iteration = 0;
    loop {
        let gains = attack_gains(game, &profile.x);
        let regret = regret_unchecked(game, &profile.x, &profile.y, config.mode, &gains);
        trace.push(TracePoint {
            iteration,
            eps: regret.eps,
        });
        if config.snapshot_every > 0 && iteration % config.snapshot_every == 0 {
            snapshots.push(Snapshot {
                iteration,
                profile: profile.clone(),
            });
        }
        let converged = regret.eps <= config.epsilon;
        if converged || iteration >= config.max_iterations {
            return Ok(BrgdResult {
                config: config.clone(),
                converged,
                iterations: iteration,
                profile,
                regret,
                trace,
                snapshots,
            });
        }
        profile = match config.rule {
            UpdateRule::Gradient => gradient_step(game, &profile, &gains, config.step_size),
            UpdateRule::Smoothed => smoothed_step(game, &profile, &gains, config.step_size),
        };
        iteration += 1;
    }
}
