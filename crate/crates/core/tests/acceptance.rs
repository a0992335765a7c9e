//! Acceptance suite. Run with `cargo test -p idd-core --test acceptance`.
//! Prints one PASS/FAIL line per criterion and exits nonzero on any failure.
//! Criterion 10 needs an edge list at `$IDD_DIMES_EDGES` and is skipped
//! otherwise.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use idd_core::brgd::{self, BrgdConfig};
use idd_core::exact::{distance, is_unique, sample, solve_all, Selector};
use idd_core::experiment::{fit_power_law, sweep};
use idd_core::gen::{generate, synth_graph, DrawMode, GeneratorSpec, GraphKind, Homogeneous};
use idd_core::graph::{graph_stats, load_edge_list, DirectedGraph};
use idd_core::model::derived;
use idd_core::oracle::{
    attacker_utility_enum, expected_cost_enum, psne_search, verify_msne,
};
use idd_core::payoff::{mixed_attacker_utility, mixed_cost};
use idd_core::{
    regret, validate, DefenseGame, EquilibriumCase, NodeParams, Profile, RegretMode,
};
use rand::Rng;

use common::{mixed_alpha_game, random_profile, rel_close, rng, vulnerable_game, Target};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = fn() -> Outcome;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn within(start: Instant, budget: Duration) -> (bool, String) {
    let t = start.elapsed();
    (t <= budget, format!("{:.1}s of {}s", t.as_secs_f64(), budget.as_secs()))
}

fn c1_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0_f64;
    let mut bad = 0;
    for g in 0..200 {
        let mut r = rng(1_000 + g);
        let n = r.random_range(1..=6);
        let game = mixed_alpha_game(&mut r, n);
        for _ in 0..50 {
            let (x, y) = random_profile(&mut r, n);
            let mut pairs = vec![(
                mixed_attacker_utility(&game, &x, &y),
                attacker_utility_enum(&game, &x, &y).unwrap(),
            )];
            for i in 0..n {
                pairs.push((
                    mixed_cost(&game, &x, &y, i),
                    expected_cost_enum(&game, &x, &y, i).unwrap(),
                ));
            }
            for (a, b) in pairs {
                if !rel_close(a, b, 1e-10) {
                    bad += 1;
                }
                worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE));
            }
        }
    }
    let (fast, time) = within(start, Duration::from_secs(60));
    ensure(
        bad == 0 && fast,
        format!("200 games x 50 profiles, {bad} mismatches, worst rel {worst:.2e}, {time}"),
    )
}

fn selectors(set: &idd_core::EquilibriumSet, seed: u64) -> Vec<Selector> {
    let mut out = vec![Selector::Centroid, Selector::Random(seed)];
    if set.family.is_some() {
        out.push(Selector::Vertex(0));
        out.push(Selector::Vertex(1));
    }
    if let Some(s) = &set.simplex {
        out.extend((0..s.indices.len()).map(Selector::Vertex));
    }
    out
}

fn c2_exact_soundness() -> Outcome {
    let start = Instant::now();
    let mut cases = [0usize; 3];
    let mut families = 0;
    let mut points = 0;
    let mut failures = Vec::new();
    for g in 0..500u64 {
        let mut r = rng(2_000 + g);
        let target = match g % 3 {
            0 => Target::Below,
            1 => Target::Equal,
            _ => Target::Above,
        };
        let n = r.random_range(if target == Target::Below { 1 } else { 2 }..=8);
        let game = vulnerable_game(&mut r, n, target);
        let set = match solve_all(&game) {
            Ok(s) => s,
            Err(e) => {
                failures.push(format!("game {g}: {e}"));
                continue;
            }
        };
        cases[set.case as usize] += 1;
        families += set.family.is_some() as usize;
        for sel in selectors(&set, g) {
            let p = sample(&set, &sel).unwrap();
            points += 1;
            let report = verify_msne(&game, &p.x, &p.y, 1e-9).unwrap();
            if !report.ok {
                failures.push(format!("game {g} {sel:?}: {:?}", report.violations[0]));
            }
        }
    }
    let (fast, time) = within(start, Duration::from_secs(60));
    let spans = cases.iter().all(|&c| c > 0);
    ensure(
        failures.is_empty() && spans && fast,
        format!(
            "cases below/equal/above = {cases:?}, {families} families, {points} points, {} failures{}, {time}",
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    )
}

/// Grid-aligned below-one game: thresholds and equilibrium investments are
/// multiples of 0.01, so the exact point lies on the scan grid.
fn aligned_game(r: &mut rand_chacha::ChaCha20Rng, n: usize) -> DefenseGame {
    loop {
        let t: Vec<usize> = (0..n).map(|_| r.random_range(5..40)).collect();
        if t.iter().sum::<usize>() >= 95 {
            continue;
        }
        let base = vulnerable_game(r, n, Target::Below);
        let d = derived(&base);
        let ks: Vec<usize> = (0..n).map(|_| r.random_range(5..95)).collect();
        let nodes: Vec<NodeParams> = base
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, p)| NodeParams {
                invest_cost: t[i] as f64 / 100.0 * (p.loss * p.direct_success),
                attack_cost: (1.0 - ks[i] as f64 / 100.0) * d.loss_intercept[i],
                ..*p
            })
            .collect();
        let edges: Vec<(usize, usize, f64)> = (0..n)
            .flat_map(|i| base.out_transfers(i).map(move |(j, q)| (i, j, q)).collect::<Vec<_>>())
            .collect();
        let game = DefenseGame::new(nodes, &edges).unwrap();
        if validate(&game).is_valid() {
            return game;
        }
    }
}

fn grid_scan(game: &DefenseGame, set: &idd_core::EquilibriumSet) -> (usize, f64) {
    let n = game.len();
    let steps = 100usize;
    let grid: Vec<f64> = (0..=steps).map(|k| k as f64 / steps as f64).collect();
    let mut found = 0;
    let mut far = 0.0_f64;
    let mut k = vec![0usize; n];
    loop {
        if k.iter().sum::<usize>() <= steps {
            let y: Vec<f64> = k.iter().map(|&v| v as f64 / steps as f64).collect();
            // With full transfer vulnerability a defender's regret depends only
            // on its own investment and the attack profile.
            let admissible: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    grid.iter()
                        .copied()
                        .filter(|&xi| {
                            let mut x = vec![0.0; n];
                            x[i] = xi;
                            regret(game, &x, &y, RegretMode::PerPlayerRange).unwrap().defender[i]
                                <= 1e-6
                        })
                        .collect()
                })
                .collect();
            let mut idx = vec![0usize; n];
            if admissible.iter().all(|a| !a.is_empty()) {
                loop {
                    let x: Vec<f64> = (0..n).map(|i| admissible[i][idx[i]]).collect();
                    if regret(game, &x, &y, RegretMode::PerPlayerRange).unwrap().eps <= 1e-6 {
                        found += 1;
                        far = far.max(distance(set, &x, &y));
                    }
                    if !advance(&mut idx, &admissible.iter().map(Vec::len).collect::<Vec<_>>()) {
                        break;
                    }
                }
            }
        }
        if !advance(&mut k, &vec![steps + 1; n]) {
            break;
        }
    }
    (found, far)
}

fn advance(idx: &mut [usize], limits: &[usize]) -> bool {
    for (i, l) in idx.iter_mut().zip(limits) {
        *i += 1;
        if *i < *l {
            return true;
        }
        *i = 0;
    }
    false
}

fn c3_exact_completeness() -> Outcome {
    let start = Instant::now();
    let mut found = 0;
    let mut worst = 0.0_f64;
    let mut bad = 0;
    for g in 0..20u64 {
        let mut r = rng(3_000 + g);
        let n = 1 + (g as usize % 3);
        let game = match g % 4 {
            0 | 1 => aligned_game(&mut r, n),
            2 => vulnerable_game(&mut r, n, Target::Below),
            _ => vulnerable_game(&mut r, n.max(2), Target::Above),
        };
        let set = solve_all(&game).unwrap();
        let (f, far) = grid_scan(&game, &set);
        found += f;
        worst = worst.max(far);
        if far > 0.02 {
            bad += 1;
        }
    }
    let (fast, time) = within(start, Duration::from_secs(600));
    ensure(
        bad == 0 && found > 0 && fast,
        format!("20 games, {found} grid points with regret <= 1e-6, farthest {worst:.2e}, {bad} games off-set, {time}"),
    )
}

fn ring() -> DefenseGame {
    let node = |c0| NodeParams {
        invest_cost: 1.0,
        loss: 10.0,
        direct_success: 0.25,
        unblocked_transfer: 1.0,
        attack_cost: c0,
    };
    DefenseGame::new(
        vec![node(0.5), node(1.0), node(1.5)],
        &[(0, 1, 0.2), (1, 2, 0.2), (2, 0, 0.2)],
    )
    .unwrap()
}

fn c4_worked_example() -> Outcome {
    let game = ring();
    let set = solve_all(&game).unwrap();
    let p = sample(&set, &Selector::Centroid).unwrap();
    let want_x = [2.0 / 9.0, 1.0 / 9.0, 0.0];
    let want_y = [0.4, 0.4, 0.2];
    let dev = p
        .x
        .iter()
        .zip(want_x)
        .chain(p.y.iter().zip(want_y))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    let y0 = p.no_attack();
    let verified = verify_msne(&game, &p.x, &p.y, 1e-9).unwrap().ok;
    ensure(
        set.case == EquilibriumCase::AboveOne && set.unique && dev <= 1e-12 && y0.abs() <= 1e-12 && verified,
        format!("x = {:?}, y = {:?}, y0 = {y0:.1e}, unique = {}, max dev {dev:.1e}", p.x, p.y, set.unique),
    )
}

fn c5_no_pure_equilibria() -> Outcome {
    let start = Instant::now();
    let mut found = Vec::new();
    for g in 0..100u64 {
        let mut r = rng(5_000 + g);
        let n = r.random_range(1..=10);
        let game = mixed_alpha_game(&mut r, n);
        if psne_search(&game).unwrap().is_some() {
            found.push(g);
        }
    }
    // A node whose investment costs more than its direct loss never invests,
    // so attacking it is a pure equilibrium.
    let counter = DefenseGame::new(
        vec![NodeParams {
            invest_cost: 6.0,
            loss: 10.0,
            direct_success: 0.5,
            unblocked_transfer: 1.0,
            attack_cost: 1.0,
        }],
        &[],
    )
    .unwrap();
    let violates = !validate(&counter).is_valid();
    let psne = psne_search(&counter).unwrap();
    let (fast, time) = within(start, Duration::from_secs(300));
    ensure(
        found.is_empty() && violates && psne.is_some() && fast,
        format!(
            "PSNE in {} of 100 valid games, counterexample PSNE = {:?}, {time}",
            found.len(),
            psne
        ),
    )
}

/// Directed circulant: node i points to i+1, ..., i+d (mod n).
fn circulant(n: usize, d: usize) -> DirectedGraph {
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (1..=d).map(move |k| (i, (i + k) % n)))
        .collect();
    DirectedGraph::from_edges(n, &edges).unwrap()
}

fn homogeneous_spec(r: &mut rand_chacha::ChaCha20Rng, max_children: usize) -> GeneratorSpec {
    let direct_success = r.random_range(0.2..0.7);
    let delta = (1.0 - direct_success) / max_children.max(1) as f64 * r.random_range(0.1..0.9);
    let loss = r.random_range(1.0..100.0);
    GeneratorSpec {
        homogeneous: Some(Homogeneous {
            invest_cost: direct_success * loss * r.random_range(0.02..0.5),
            loss,
            direct_success,
            attack_cost: direct_success * loss * r.random_range(0.05..0.9),
            alpha: 1.0,
            delta,
        }),
        ..GeneratorSpec::default()
    }
}

fn c6_structure() -> Outcome {
    let mut equal_dev = 0.0_f64;
    for g in 0..50u64 {
        let mut r = rng(6_000 + g);
        let n = r.random_range(3..30);
        let d = r.random_range(1..=3.min(n - 1));
        let game = generate(&circulant(n, d), &homogeneous_spec(&mut r, d)).unwrap();
        let set = solve_all(&game).unwrap();
        let p = sample(&set, &Selector::Centroid).unwrap();
        let ys: Vec<f64> = set.support.iter().map(|&i| p.y[i]).collect();
        let (lo, hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        equal_dev = equal_dev.max(hi - lo);
    }

    let mut order_breaks = 0;
    for g in 0..50u64 {
        let mut r = rng(6_100 + g);
        let n = r.random_range(4..30);
        let mut edges = Vec::new();
        for i in 0..n {
            let k = r.random_range(0..n.min(6));
            let mut targets: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            for t in 0..k.min(targets.len()) {
                let pick = r.random_range(t..targets.len());
                targets.swap(t, pick);
                edges.push((i, targets[t]));
            }
        }
        let graph = DirectedGraph::from_edges(n, &edges).unwrap();
        let max_children = (0..n).map(|i| graph.out_degree(i)).max().unwrap_or(1);
        let game = generate(&graph, &homogeneous_spec(&mut r, max_children)).unwrap();
        let set = solve_all(&game).unwrap();
        let p = sample(&set, &Selector::Centroid).unwrap();
        let mut investing: Vec<(usize, f64)> = (0..n)
            .filter(|&i| p.x[i] > 0.0)
            .map(|i| (graph.out_degree(i), p.x[i]))
            .collect();
        investing.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        order_breaks += investing.windows(2).filter(|w| w[1].1 < w[0].1 - 1e-12).count();
    }

    let mut zero_count_bad = 0;
    let mut tried = 0;
    let mut g = 0u64;
    while tried < 100 {
        let mut r = rng(6_200 + g);
        g += 1;
        let n = r.random_range(2..=10);
        let game = vulnerable_game(&mut r, n, Target::Above);
        let mut m = derived(&game).attack_margin;
        m.sort_by(f64::total_cmp);
        if m.windows(2).any(|w| w[1] - w[0] <= 1e-9 * w[1].abs()) {
            continue;
        }
        tried += 1;
        let set = solve_all(&game).unwrap();
        let p = sample(&set, &Selector::Centroid).unwrap();
        let zeros = set.support.iter().filter(|&&i| p.x[i] == 0.0).count();
        if zeros != 1 {
            zero_count_bad += 1;
        }
    }
    ensure(
        equal_dev <= 1e-12 && order_breaks == 0 && zero_count_bad == 0,
        format!(
            "equal-degree y spread {equal_dev:.1e}, {order_breaks} order breaks in x by children count, {zero_count_bad}/100 distinct-margin games without exactly one uninvested support node"
        ),
    )
}

fn c7_generator() -> Outcome {
    let graph = synth_graph(GraphKind::PreferentialAttachment { n: 2_000, m: 2 }, 7).unwrap();
    let mut worst = 0.0_f64;
    let mut invalid = 0;
    let mut specs = vec![GeneratorSpec::default()];
    specs.extend((0..4).map(|s| GeneratorSpec {
        mode: DrawMode::Random,
        seed: s,
        ..GeneratorSpec::default()
    }));
    let mut fixed_ok = true;
    for spec in &specs {
        let game = match generate(&graph, spec) {
            Ok(g) => g,
            Err(_) => {
                invalid += 1;
                continue;
            }
        };
        if !validate(&game).is_valid() {
            invalid += 1;
        }
        for i in 0..game.len() {
            let budget = game.node(i).direct_success + game.out_transfers(i).map(|(_, q)| q).sum::<f64>();
            worst = worst.max((budget - 0.9).abs());
        }
        if spec.mode == DrawMode::Fixed {
            fixed_ok = game.nodes().iter().all(|p| {
                p.unblocked_transfer == 0.025
                    && p.loss == 6e8
                    && p.invest_cost == 6e5
                    && p.attack_cost == 1e6
            });
        }
    }
    ensure(
        worst <= 1e-12 && invalid == 0 && fixed_ok,
        format!("2000-node PA graph, 5 specs, max budget error {worst:.1e}, {invalid} invalid, fixed scalars exact = {fixed_ok}"),
    )
}

fn c8_brgd_scaling() -> Outcome {
    let start = Instant::now();
    let graph = synth_graph(GraphKind::PreferentialAttachment { n: 2_000, m: 2 }, 8).unwrap();
    let spec = GeneratorSpec {
        mode: DrawMode::Random,
        seed: 80,
        ..GeneratorSpec::default()
    };
    let eps: Vec<f64> = (2..=9).map(|k| k as f64 / 1000.0).collect();
    let seeds: Vec<u64> = (0..10).collect();
    let result = sweep(&graph, &spec, &eps, &seeds, &BrgdConfig::default()).unwrap();
    let converged: Vec<usize> = eps
        .iter()
        .map(|&e| result.rows.iter().filter(|r| r.epsilon == e && r.converged).count())
        .collect();
    let medians = result.medians();
    let monotone = medians.windows(2).all(|w| w[1].1 <= w[0].1);
    let b = result.fit.map(|f| f.b);
    let (fast, time) = within(start, Duration::from_secs(1_800));
    let med: Vec<String> = medians.iter().map(|(e, m)| format!("{e}:{m}")).collect();
    ensure(
        converged.iter().all(|&c| c >= 9) && medians.len() == eps.len() && monotone && b.is_some_and(|b| b < 0.0) && fast,
        format!(
            "converged per eps {converged:?}, medians [{}], fit {:?} (reference exponents -2.547, -1.589), {time}",
            med.join(" "),
            result.fit
        ),
    )
}

fn c9_brgd_vs_exact() -> Outcome {
    let mut close = 0;
    let mut converged = 0;
    let mut dists = Vec::new();
    let mut games = 0;
    let mut g = 0u64;
    while games < 30 {
        let mut r = rng(9_000 + g);
        g += 1;
        let n = r.random_range(2..=50);
        let target = if g % 2 == 0 { Target::Below } else { Target::Above };
        let game = vulnerable_game(&mut r, n, target);
        let set = solve_all(&game).unwrap();
        if !is_unique(&set) {
            continue;
        }
        games += 1;
        let config = BrgdConfig {
            epsilon: 1e-4,
            max_iterations: 20_000,
            seed: g,
            ..BrgdConfig::default()
        };
        let res = brgd::run(&game, &config).unwrap();
        if res.converged {
            converged += 1;
            let Profile { x, y } = &res.profile;
            let d = distance(&set, x, y);
            dists.push(d);
            if d <= 0.02 {
                close += 1;
            }
        }
    }
    dists.sort_by(f64::total_cmp);
    let share = close as f64 / converged.max(1) as f64;
    ensure(
        converged > 0 && share >= 0.8,
        format!(
            "{converged}/30 converged, {close} within 0.02 ({:.0}%), median distance {:.2e}, max {:.2e}",
            100.0 * share,
            dists.get(dists.len() / 2).copied().unwrap_or(f64::NAN),
            dists.last().copied().unwrap_or(f64::NAN)
        ),
    )
}

fn c10_dimes() -> Outcome {
    let Ok(path) = std::env::var("IDD_DIMES_EDGES") else {
        return Outcome::Skip("set IDD_DIMES_EDGES to an AS edge list to run".into());
    };
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => return Outcome::Fail(format!("{path}: {e}")),
    };
    let loaded = load_edge_list(&text).unwrap();
    let s = graph_stats(&loaded.graph, 0);
    let avg = s.avg_total_degree.unwrap_or(0.0);
    let zero_in = s.frac_zero_indegree.unwrap_or(0.0);
    let stats_ok = s.nodes == 27_106
        && s.isolated_nodes == 683
        && s.edges == 100_402
        && (avg - 3.70).abs() <= 0.01
        && (zero_in - 0.7693).abs() <= 0.001;
    let game = generate(&loaded.graph, &GeneratorSpec::default()).unwrap();
    let start = Instant::now();
    let res = brgd::run(
        &game,
        &BrgdConfig {
            epsilon: 0.005,
            ..BrgdConfig::default()
        },
    )
    .unwrap();
    let (fast, time) = within(start, Duration::from_secs(7_200));
    ensure(
        stats_ok && fast,
        format!(
            "{} nodes, {} isolated, {} edges, avg degree {avg:.3}, zero indegree {:.2}%, brgd {} iterations (converged = {}), {time}",
            s.nodes,
            s.isolated_nodes,
            s.edges,
            100.0 * zero_in,
            res.iterations,
            res.converged
        ),
    )
}

fn c11_power_law() -> Outcome {
    let pts: Vec<(f64, f64)> = (2..=9)
        .map(|k| {
            let e = k as f64 / 1000.0;
            (e, 3e-5 * e.powf(-2.547))
        })
        .collect();
    let f = fit_power_law(&pts).unwrap();
    let (da, db, dr) = ((f.a - 3e-5).abs(), (f.b + 2.547).abs(), (f.r_squared - 1.0).abs());
    ensure(
        da <= 1e-9 && db <= 1e-9 && dr <= 1e-9,
        format!("|da| = {da:.1e}, |db| = {db:.1e}, |1 - r2| = {dr:.1e}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 11] = [
        ("oracle equivalence", c1_oracle_equivalence),
        ("exact-solver soundness", c2_exact_soundness),
        ("exact-solver completeness", c3_exact_completeness),
        ("worked example", c4_worked_example),
        ("no pure equilibria", c5_no_pure_equilibria),
        ("structure properties", c6_structure),
        ("generator fidelity", c7_generator),
        ("brgd desk-scale convergence", c8_brgd_scaling),
        ("brgd vs exact", c9_brgd_vs_exact),
        ("conditional AS-graph check", c10_dimes),
        ("power-law fitter", c11_power_law),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Outcome::Fail(format!("panicked: {msg}"))
            });
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("{tag} criterion {:>2} {name}: {detail}", k + 1);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
