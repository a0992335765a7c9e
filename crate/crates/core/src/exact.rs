//! All mixed equilibria of single-attack, transfer-vulnerable games.
//!
//! With every `alpha_i = 1` a defender's best response depends only on its
//! own attack probability `y_i` (invest iff `y_i` exceeds the threshold
//! `t_i = C_i / (L_i p_hat_i)`), and the attacker's gain from node `i` is
//! `(1 - x_i) Lbar_i - C0_i`. The equilibrium set is determined by
//! `sum_i t_i`:
//!
//! * below one, the attacker leaves mass on no-attack and the unique
//!   equilibrium has `y_i = t_i`, `x_i = 1 - C0_i / Lbar_i`;
//! * equal to one, `y_i = t_i` and `x` ranges over a one-parameter family
//!   indexed by the attacker's common gain `v`;
//! * above one, nodes are ranked by their zero-investment margin
//!   `Mbar_i = Lbar_i - C0_i`. Walking down the ranking, the block of tied
//!   margins at which the cumulative threshold first reaches one is the
//!   attacker's indifferent fringe `J`. Nodes above `J` are attacked with
//!   `y_i = t_i` and invest just enough to bring their gain down to the
//!   margin of `J`; nodes in `J` do not invest and share the remaining
//!   attack mass within their thresholds; nodes below `J` are left alone.
//!
//! When the cumulative threshold hits one exactly at a block boundary, the
//! attacked prefix again forms a one-parameter family (the equal-to-one
//! case is the instance where the prefix is every node).

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{derived, is_transfer_vulnerable, validate, DefenseGame};
use crate::payoff::{check_strategies, Profile};

/// Half-width of the band around one treated as `sum t_i = 1`.
pub const EQUAL_ONE_TOL: f64 = 1e-12;
/// Relative tolerance for grouping tied margins.
pub const TIE_TOL: f64 = 1e-9;
/// Largest round-off absorbed when clamping `x` into `[0, 1]`.
pub const CLAMP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EquilibriumCase {
    #[serde(rename = "BELOW_ONE")]
    BelowOne,
    #[serde(rename = "EQUAL_ONE")]
    EqualOne,
    #[serde(rename = "ABOVE_ONE")]
    AboveOne,
}

/// Components pinned by the equilibrium set. `None` means the component
/// varies within the family or the attack simplex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedEntry {
    pub i: usize,
    pub x: Option<f64>,
    pub y: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyMember {
    pub i: usize,
    pub attack_cost: f64,
    pub loss_intercept: f64,
}

impl FamilyMember {
    /// Investment that leaves the attacker a gain of exactly `v`.
    pub fn x_at(&self, v: f64) -> f64 {
        1.0 - (v + self.attack_cost) / self.loss_intercept
    }
}

/// `x_i(v) = 1 - (v + C0_i) / Lbar_i` for every member, `v` in `[v_min, v_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub v_min: f64,
    pub v_max: f64,
    pub members: Vec<FamilyMember>,
}

/// `{ 0 <= y_i <= upper_i, sum_i y_i = sum }` over `indices`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSimplex {
    pub indices: Vec<usize>,
    pub upper_bounds: Vec<f64>,
    pub sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSet {
    pub case: EquilibriumCase,
    pub y0: f64,
    pub fixed: Vec<FixedEntry>,
    pub family: Option<Family>,
    pub simplex: Option<AttackSimplex>,
    /// Nodes that may be attacked.
    #[serde(default)]
    pub support: Vec<usize>,
    /// The tied minimal-margin block inside the support.
    #[serde(default)]
    pub tied: Vec<usize>,
    /// Attacker's common gain on the support, when pinned.
    #[serde(default)]
    pub value: Option<f64>,
    pub unique: bool,
}

impl EquilibriumSet {
    pub fn len(&self) -> usize {
        self.fixed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixed.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Computes the full equilibrium set.
pub fn solve_all(game: &DefenseGame) -> Result<EquilibriumSet> {
    if let Some((node, n)) = game
        .nodes()
        .iter()
        .enumerate()
        .find(|(_, n)| n.unblocked_transfer != 1.0)
    {
        return Err(Error::NotTransferVulnerable {
            node,
            alpha: n.unblocked_transfer,
        });
    }
    debug_assert!(is_transfer_vulnerable(game));
    let report = validate(game);
    if !report.is_valid() {
        return Err(Error::AssumptionViolated(report));
    }

    let n = game.len();
    let d = derived(game);
    let threshold = &d.threshold;
    let everyone = |i| FamilyMember {
        i,
        attack_cost: game.node(i).attack_cost,
        loss_intercept: d.loss_intercept[i],
    };

    if (d.threshold_sum - 1.0).abs() <= EQUAL_ONE_TOL {
        let v_max = d.attack_margin.iter().copied().fold(f64::INFINITY, f64::min);
        let family = Family {
            v_min: 0.0,
            v_max,
            members: (0..n).map(everyone).collect(),
        };
        let fixed = (0..n)
            .map(|i| FixedEntry {
                i,
                x: None,
                y: Some(threshold[i]),
            })
            .collect();
        return Ok(finish(EquilibriumSet {
            case: EquilibriumCase::EqualOne,
            y0: 0.0,
            fixed,
            family: Some(family),
            simplex: None,
            support: (0..n).collect(),
            tied: Vec::new(),
            value: None,
            unique: false,
        }));
    }

    if d.threshold_sum < 1.0 {
        let mut fixed = Vec::with_capacity(n);
        for i in 0..n {
            let x = clamp_unit(1.0 - d.attack_cost_ratio[i], i)?;
            fixed.push(FixedEntry {
                i,
                x: Some(x),
                y: Some(threshold[i]),
            });
        }
        return Ok(finish(EquilibriumSet {
            case: EquilibriumCase::BelowOne,
            y0: 1.0 - d.threshold_sum,
            fixed,
            family: None,
            simplex: None,
            support: (0..n).collect(),
            tied: Vec::new(),
            value: None,
            unique: true,
        }));
    }

    // Sum above one: descending margins, index breaks ties.
    let margin = &d.attack_margin;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| margin[b].total_cmp(&margin[a]).then(a.cmp(&b)));
    let blocks = tied_blocks(&order, margin);

    let mut before = 0.0;
    let mut crossing = None;
    for (b, block) in blocks.iter().enumerate() {
        let through = before + block.iter().map(|&i| threshold[i]).sum::<f64>();
        if through >= 1.0 - EQUAL_ONE_TOL {
            crossing = Some((b, before, through));
            break;
        }
        before = through;
    }
    let (b, before, through) = crossing.ok_or_else(|| {
        Error::Internal("cumulative threshold never reached one".to_string())
    })?;

    let block = &blocks[b];
    let prefix: Vec<usize> = blocks[..b].iter().flatten().copied().collect();
    let mut fixed: Vec<FixedEntry> = (0..n)
        .map(|i| FixedEntry {
            i,
            x: Some(0.0),
            y: Some(0.0),
        })
        .collect();

    if (through - 1.0).abs() <= EQUAL_ONE_TOL && b + 1 < blocks.len() {
        // Boundary: every node through this block is attacked at its threshold
        // and the common gain can sit anywhere between the next block's margin
        // and this block's.
        let members: Vec<usize> = prefix.iter().chain(block.iter()).copied().collect();
        let v_max = block.iter().map(|&i| margin[i]).fold(f64::INFINITY, f64::min);
        let v_min = blocks[b + 1]
            .iter()
            .map(|&i| margin[i])
            .fold(0.0_f64, f64::max)
            .min(v_max);
        for &i in &members {
            fixed[i] = FixedEntry {
                i,
                x: None,
                y: Some(threshold[i]),
            };
        }
        let mut support = members.clone();
        support.sort_unstable();
        return Ok(finish(EquilibriumSet {
            case: EquilibriumCase::AboveOne,
            y0: 0.0,
            fixed,
            family: Some(Family {
                v_min,
                v_max,
                members: members.into_iter().map(everyone).collect(),
            }),
            simplex: None,
            support,
            tied: Vec::new(),
            value: None,
            unique: false,
        }));
    }

    let value = block.iter().map(|&i| margin[i]).fold(f64::INFINITY, f64::min);
    for &i in &prefix {
        let x = 1.0 - (value + game.node(i).attack_cost) / d.loss_intercept[i];
        fixed[i] = FixedEntry {
            i,
            x: Some(clamp_unit(x, i)?),
            y: Some(threshold[i]),
        };
    }
    let mut tied = block.clone();
    tied.sort_unstable();
    for &i in &tied {
        fixed[i].y = None;
    }
    let simplex = AttackSimplex {
        upper_bounds: tied.iter().map(|&i| threshold[i]).collect(),
        indices: tied.clone(),
        sum: 1.0 - before,
    };
    let mut support: Vec<usize> = prefix.iter().chain(tied.iter()).copied().collect();
    support.sort_unstable();
    Ok(finish(EquilibriumSet {
        case: EquilibriumCase::AboveOne,
        y0: 0.0,
        fixed,
        family: None,
        simplex: Some(simplex),
        support,
        tied,
        value: Some(value),
        unique: false,
    }))
}

/// Groups positions of the descending order whose margins lie within the
/// tie tolerance of the block's leading margin.
fn tied_blocks(order: &[usize], margin: &[f64]) -> Vec<Vec<usize>> {
    let scale = margin.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = TIE_TOL * scale;
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut lead = f64::NAN;
    for &i in order {
        match blocks.last_mut() {
            Some(block) if lead - margin[i] <= tol => block.push(i),
            _ => {
                lead = margin[i];
                blocks.push(vec![i]);
            }
        }
    }
    blocks
}

fn clamp_unit(x: f64, i: usize) -> Result<f64> {
    if !(-CLAMP_TOL..=1.0 + CLAMP_TOL).contains(&x) {
        return Err(Error::Internal(format!(
            "equilibrium investment x[{i}] = {x} outside [0, 1]"
        )));
    }
    Ok(x.clamp(0.0, 1.0))
}

fn finish(mut set: EquilibriumSet) -> EquilibriumSet {
    set.unique = is_unique(&set);
    set
}

/// Whether the set is a single profile.
pub fn is_unique(set: &EquilibriumSet) -> bool {
    if let Some(f) = &set.family {
        if f.v_max - f.v_min > EQUAL_ONE_TOL * f.v_max.abs().max(1.0) {
            return false;
        }
    }
    if let Some(s) = &set.simplex {
        let cap: f64 = s.upper_bounds.iter().sum();
        let tol = EQUAL_ONE_TOL * cap.max(1.0);
        if s.indices.len() > 1 && s.sum < cap - tol && s.sum > tol {
            return false;
        }
    }
    true
}

/// Picks one profile out of an equilibrium set.
#[derive(Debug, Clone, PartialEq)]
pub enum Selector {
    /// Midpoint of the family range or the equal-share point of the simplex.
    Centroid,
    /// Family: 0 is `v_min`, 1 is `v_max`. Simplex: greedy fill starting at
    /// the `k`-th tied node and continuing cyclically.
    Vertex(usize),
    /// Family parameter value.
    Value(f64),
    /// Simplex point proportional to the weights, capped at the bounds.
    Weights(Vec<f64>),
    Random(u64),
}

pub fn sample(set: &EquilibriumSet, selector: &Selector) -> Result<Profile> {
    let n = set.len();
    let mut x: Vec<f64> = set.fixed.iter().map(|f| f.x.unwrap_or(0.0)).collect();
    let mut y: Vec<f64> = set.fixed.iter().map(|f| f.y.unwrap_or(0.0)).collect();

    if let Some(family) = &set.family {
        let v = match selector {
            Selector::Centroid => 0.5 * (family.v_min + family.v_max),
            Selector::Vertex(0) => family.v_min,
            Selector::Vertex(1) => family.v_max,
            Selector::Vertex(k) => {
                return Err(Error::Selector(format!("family has two endpoints, got {k}")))
            }
            Selector::Value(v) => {
                let slack = EQUAL_ONE_TOL * family.v_max.abs().max(1.0);
                if !(family.v_min - slack..=family.v_max + slack).contains(v) {
                    return Err(Error::Selector(format!(
                        "v = {v} outside [{}, {}]",
                        family.v_min, family.v_max
                    )));
                }
                v.clamp(family.v_min, family.v_max)
            }
            Selector::Random(seed) => {
                let mut rng = ChaCha20Rng::seed_from_u64(*seed);
                let u: f64 = rand::Rng::random(&mut rng);
                family.v_min + u * (family.v_max - family.v_min)
            }
            Selector::Weights(_) => {
                return Err(Error::Selector("weights apply to attack simplices".to_string()))
            }
        };
        for m in &family.members {
            x[m.i] = m.x_at(v).clamp(0.0, 1.0);
        }
    }

    if let Some(simplex) = &set.simplex {
        let k = simplex.indices.len();
        let values = match selector {
            Selector::Centroid => capped_fill(&simplex.upper_bounds, &vec![1.0; k], simplex.sum)?,
            Selector::Vertex(start) => {
                if *start >= k {
                    return Err(Error::Selector(format!("vertex {start} of {k} tied nodes")));
                }
                greedy_fill(&simplex.upper_bounds, *start, simplex.sum)
            }
            Selector::Weights(w) => {
                if w.len() != k {
                    return Err(Error::Selector(format!("{} weights for {k} tied nodes", w.len())));
                }
                capped_fill(&simplex.upper_bounds, w, simplex.sum)?
            }
            Selector::Random(seed) => {
                let mut rng = ChaCha20Rng::seed_from_u64(*seed);
                let w: Vec<f64> = (0..k).map(|_| Exp1.sample(&mut rng)).collect();
                capped_fill(&simplex.upper_bounds, &w, simplex.sum)?
            }
            Selector::Value(_) => {
                return Err(Error::Selector("a value applies to families".to_string()))
            }
        };
        for (&i, v) in simplex.indices.iter().zip(values) {
            y[i] = v;
        }
    }

    debug_assert_eq!(x.len(), n);
    Ok(Profile { x, y })
}

/// Fills caps in cyclic order from `start` until `total` is used up.
fn greedy_fill(caps: &[f64], start: usize, total: f64) -> Vec<f64> {
    let k = caps.len();
    let mut out = vec![0.0; k];
    let mut left = total;
    for step in 0..k {
        let i = (start + step) % k;
        let take = caps[i].min(left).max(0.0);
        out[i] = take;
        left -= take;
    }
    out
}

/// `y_i = min(cap_i, lambda w_i)` with `lambda` chosen so that the entries sum to `total`.
fn capped_fill(caps: &[f64], weights: &[f64], total: f64) -> Result<Vec<f64>> {
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::Selector("weights must be finite and non-negative".to_string()));
    }
    let reachable: f64 = caps
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(c, _)| c)
        .sum();
    if reachable < total * (1.0 - 1e-12) {
        return Err(Error::Selector(format!(
            "weighted nodes can hold {reachable}, need {total}"
        )));
    }
    let mut order: Vec<usize> = (0..caps.len()).filter(|&i| weights[i] > 0.0).collect();
    order.sort_by(|&a, &b| (caps[a] / weights[a]).total_cmp(&(caps[b] / weights[b])));
    let mut out = vec![0.0; caps.len()];
    let mut left = total;
    let mut weight_left: f64 = order.iter().map(|&i| weights[i]).sum();
    let mut pos = 0;
    while pos < order.len() {
        let i = order[pos];
        if left / weight_left >= caps[i] / weights[i] {
            out[i] = caps[i];
            left -= caps[i];
            weight_left -= weights[i];
            pos += 1;
        } else {
            break;
        }
    }
    if pos < order.len() {
        let lambda = left / weight_left;
        for &i in &order[pos..] {
            out[i] = (lambda * weights[i]).min(caps[i]);
        }
    }
    Ok(out)
}

/// L-infinity distance from `(x, y)` to the set.
pub fn distance(set: &EquilibriumSet, x: &[f64], y: &[f64]) -> f64 {
    let mut worst = 0.0_f64;
    for f in &set.fixed {
        if let Some(v) = f.x {
            worst = worst.max((x[f.i] - v).abs());
        }
        if let Some(v) = f.y {
            worst = worst.max((y[f.i] - v).abs());
        }
    }
    if let Some(family) = &set.family {
        worst = worst.max(family_distance(family, x));
    }
    if let Some(simplex) = &set.simplex {
        worst = worst.max(simplex_distance(simplex, y));
    }
    worst
}

fn family_distance(family: &Family, x: &[f64]) -> f64 {
    let gap = |v: f64| {
        family
            .members
            .iter()
            .map(|m| (x[m.i] - m.x_at(v).clamp(0.0, 1.0)).abs())
            .fold(0.0_f64, f64::max)
    };
    // The gap is a maximum of convex functions of v.
    let (mut lo, mut hi) = (family.v_min, family.v_max);
    for _ in 0..200 {
        let a = lo + (hi - lo) / 3.0;
        let b = hi - (hi - lo) / 3.0;
        if gap(a) <= gap(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    gap(0.5 * (lo + hi)).min(gap(family.v_min)).min(gap(family.v_max))
}

fn simplex_distance(simplex: &AttackSimplex, y: &[f64]) -> f64 {
    let point: Vec<f64> = simplex.indices.iter().map(|&i| y[i]).collect();
    let feasible = |d: f64| {
        let mut lo_sum = 0.0;
        let mut hi_sum = 0.0;
        for (p, &cap) in point.iter().zip(&simplex.upper_bounds) {
            let lo = (p - d).max(0.0);
            let hi = (p + d).min(cap);
            if lo > hi {
                return false;
            }
            lo_sum += lo;
            hi_sum += hi;
        }
        lo_sum <= simplex.sum && simplex.sum <= hi_sum
    };
    if feasible(0.0) {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = 1.0 + point.iter().fold(0.0_f64, |m, p| m.max(p.abs()));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Whether `(x, y)` is a feasible profile within `tol` of the set.
pub fn contains(set: &EquilibriumSet, x: &[f64], y: &[f64], tol: f64) -> bool {
    check_strategies(set.len(), x, y).is_ok() && distance(set, x, y) <= tol
}
