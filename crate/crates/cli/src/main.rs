use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use idd_core::brgd::{self, BrgdConfig, UpdateRule};
use idd_core::exact::{self, Selector};
use idd_core::experiment::{self, DEFAULT_ATTACK_THRESHOLD};
use idd_core::gen::{self, DrawMode, GeneratorSpec, GraphKind};
use idd_core::graph::{self, DEFAULT_DIAMETER_THRESHOLD};
use idd_core::oracle::{self, DEFAULT_VERIFY_TOL};
use idd_core::{regret, validate, DefenseGame, EquilibriumSet, Error, Profile, RegretMode};

#[derive(Parser)]
#[command(name = "idd", version, about = "Equilibria of interdependent defense games")]
struct Cli {
    /// Seed for every randomized step. Drawn from system entropy and logged
    /// to standard error when omitted.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Summary statistics of an edge list.
    Stats {
        graph: PathBuf,
        /// Skip the diameter above this many nodes.
        #[arg(long, default_value_t = DEFAULT_DIAMETER_THRESHOLD)]
        diameter_threshold: usize,
    },
    /// Writes a synthetic edge list.
    Synth {
        #[arg(value_enum)]
        kind: Kind,
        #[arg(long)]
        n: usize,
        /// Edges per arriving node (preferential attachment).
        #[arg(long, default_value_t = 2)]
        m: usize,
        /// Edge probability (Erdos-Renyi).
        #[arg(long, default_value_t = 0.01)]
        p: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Generates a game over an edge list.
    Gen {
        graph: PathBuf,
        /// Generator spec JSON; defaults to the fixed-mode table.
        spec: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Checks a game against the model assumptions.
    Validate { game: PathBuf },
    /// Computes the exact equilibrium set of a transfer-vulnerable game.
    Solve {
        game: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Picks one profile out of an equilibrium set.
    Sample {
        eqset: PathBuf,
        /// centroid, vertex:K, value:V or random.
        #[arg(long, default_value = "centroid")]
        select: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Runs best-response-gradient dynamics.
    Brgd {
        game: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        /// Also write the per-iteration regret trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        snapshot_every: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Checks whether strategies form an equilibrium. Exits 2 if not.
    Verify {
        game: PathBuf,
        /// Profile JSON, or a brgd result.
        strategies: PathBuf,
        #[arg(long, default_value_t = DEFAULT_VERIFY_TOL)]
        tol: f64,
    },
    /// Iteration counts over a tolerance grid, with a power-law fit.
    Sweep {
        graph: PathBuf,
        spec: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        /// Runs per epsilon, seeded consecutively from --seed.
        #[arg(long, default_value_t = 10)]
        runs: u64,
        /// CSV destination for the rows.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Attack profile, investment histogram and degree statistics as CSV.
    Report {
        game: PathBuf,
        strategies: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ATTACK_THRESHOLD)]
        threshold: f64,
        /// Directory for attack.csv, histogram.csv and degrees.csv.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Exhaustive search for a pure-strategy equilibrium.
    Psne { game: PathBuf },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long, default_value_t = 0.5)]
    eta: f64,
    #[arg(long, default_value_t = 2_000)]
    max_iter: usize,
    #[arg(long, value_enum, default_value_t = Rule::Gradient)]
    rule: Rule,
    #[arg(long, default_value = "per-player-range")]
    regret: RegretMode,
}

impl RunArgs {
    fn config(&self, epsilon: f64, seed: u64) -> BrgdConfig {
        BrgdConfig {
            epsilon,
            max_iterations: self.max_iter,
            step_size: self.eta,
            rule: match self.rule {
                Rule::Gradient => UpdateRule::Gradient,
                Rule::Smoothed => UpdateRule::Smoothed,
            },
            mode: self.regret,
            seed,
            ..BrgdConfig::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Pa,
    Er,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Fixed,
    Random,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Rule {
    Gradient,
    Smoothed,
}

enum Failure {
    Usage(String),
    Invalid(String),
    Cap(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Invalid(_) => 2,
            Failure::Cap(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Invalid(m) | Failure::Cap(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = match &e {
            Error::AssumptionViolated(report) => {
                let mut m = e.to_string();
                for v in &report.violations {
                    m.push_str(&format!("\n  {v}"));
                }
                m
            }
            _ => e.to_string(),
        };
        match e {
            Error::SizeCap { .. } => Failure::Cap(msg),
            Error::InvalidParameter(_) | Error::Selector(_) => Failure::Usage(msg),
            _ => Failure::Invalid(msg),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn seed_or_entropy(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("seed = {s}");
        s
    })
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn emit(output: Option<&Path>, text: &str) -> CliResult<()> {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn load_game(path: &Path) -> CliResult<DefenseGame> {
    Ok(DefenseGame::from_json(&read(path)?)?)
}

/// Accepts a bare profile or any document carrying one under `profile`.
fn load_profile(path: &Path) -> CliResult<Profile> {
    let v: Value = serde_json::from_str(&read(path)?).map_err(Error::from)?;
    let v = match v.get("profile") {
        Some(p) => p.clone(),
        None => v,
    };
    Ok(serde_json::from_value(v).map_err(Error::from)?)
}

fn load_spec(path: Option<&Path>, mode: Option<Mode>, seed: Option<u64>) -> CliResult<GeneratorSpec> {
    let mut spec = match path {
        Some(p) => serde_json::from_str(&read(p)?).map_err(Error::from)?,
        None => GeneratorSpec::default(),
    };
    if let Some(m) = mode {
        spec.mode = match m {
            Mode::Fixed => DrawMode::Fixed,
            Mode::Random => DrawMode::Random,
        };
    }
    if spec.mode == DrawMode::Random || seed.is_some() {
        spec.seed = match seed {
            Some(s) => s,
            None if path.is_some() => spec.seed,
            None => seed_or_entropy(None),
        };
    }
    Ok(spec)
}

fn parse_selector(text: &str, seed: Option<u64>) -> CliResult<Selector> {
    let bad = || Failure::Usage(format!("unknown selector {text:?}"));
    Ok(match text.split_once(':') {
        None if text == "centroid" => Selector::Centroid,
        None if text == "random" => Selector::Random(seed_or_entropy(seed)),
        Some(("vertex", k)) => Selector::Vertex(k.parse().map_err(|_| bad())?),
        Some(("value", v)) => Selector::Value(v.parse().map_err(|_| bad())?),
        _ => return Err(bad()),
    })
}

fn execute(cli: Cli) -> CliResult<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Stats {
            graph: path,
            diameter_threshold,
        } => {
            let loaded = graph::load_edge_list(&read(&path)?)?;
            let stats = graph::graph_stats(&loaded.graph, diameter_threshold);
            emit(None, &pretty(&json!({ "stats": stats, "ingest": loaded.report })))
        }
        Command::Synth {
            kind,
            n,
            m,
            p,
            output,
        } => {
            let kind = match kind {
                Kind::Pa => GraphKind::PreferentialAttachment { n, m },
                Kind::Er => GraphKind::ErdosRenyiDirected { n, p },
            };
            let g = gen::synth_graph(kind, seed_or_entropy(seed))?;
            emit(output.as_deref(), &graph::to_edge_list(&g, None))
        }
        Command::Gen {
            graph: path,
            spec,
            mode,
            output,
        } => {
            let loaded = graph::load_edge_list(&read(&path)?)?;
            let spec = load_spec(spec.as_deref(), mode, seed)?;
            let game = gen::generate(&loaded.graph, &spec)?.relabel(loaded.labels)?;
            emit(output.as_deref(), &game.to_json()?)
        }
        Command::Validate { game } => {
            let game = load_game(&game)?;
            let report = validate(&game);
            emit(None, &pretty(&serde_json::to_value(&report).map_err(Error::from)?))?;
            if report.is_valid() {
                Ok(())
            } else {
                Err(Error::AssumptionViolated(report).into())
            }
        }
        Command::Solve { game, output } => {
            let game = load_game(&game)?;
            let set = exact::solve_all(&game)?;
            emit(output.as_deref(), &set.to_json()?)
        }
        Command::Sample {
            eqset,
            select,
            output,
        } => {
            let set = EquilibriumSet::from_json(&read(&eqset)?)?;
            let profile = exact::sample(&set, &parse_selector(&select, seed)?)?;
            emit(output.as_deref(), &pretty(&json!(profile)))
        }
        Command::Brgd {
            game,
            run,
            eps,
            trace,
            snapshot_every,
            output,
        } => {
            let game = load_game(&game)?;
            let mut config = run.config(eps, seed_or_entropy(seed));
            config.snapshot_every = snapshot_every;
            let result = brgd::run(&game, &config)?;
            if let Some(t) = trace {
                emit(Some(&t), &result.trace_csv())?;
            }
            eprintln!(
                "converged = {}, iterations = {}, eps = {:e}",
                result.converged, result.iterations, result.regret.eps
            );
            emit(output.as_deref(), &result.to_json()?)
        }
        Command::Verify {
            game,
            strategies,
            tol,
        } => {
            let game = load_game(&game)?;
            let p = load_profile(&strategies)?;
            let report = oracle::verify_msne(&game, &p.x, &p.y, tol)?;
            let eps = regret(&game, &p.x, &p.y, RegretMode::PerPlayerRange)?.eps;
            emit(None, &pretty(&json!({ "msne": report, "eps": eps })))?;
            if report.ok {
                Ok(())
            } else {
                Err(Failure::Invalid(format!(
                    "not an equilibrium at tolerance {tol:e} ({} violations)",
                    report.violations.len()
                )))
            }
        }
        Command::Sweep {
            graph: path,
            spec,
            mode,
            run,
            eps,
            runs,
            output,
        } => {
            let loaded = graph::load_edge_list(&read(&path)?)?;
            let base = seed_or_entropy(seed);
            let spec = load_spec(spec.as_deref(), mode, Some(base))?;
            let seeds: Vec<u64> = (0..runs).map(|k| base.wrapping_add(k)).collect();
            let result =
                experiment::sweep(&loaded.graph, &spec, &eps, &seeds, &run.config(eps[0], base))?;
            match output {
                Some(p) => emit(Some(&p), &result.to_csv())?,
                None => eprint!("{}", result.to_csv()),
            }
            let medians: Vec<Value> = result
                .medians()
                .into_iter()
                .map(|(e, m)| json!({ "epsilon": e, "median_iterations": m }))
                .collect();
            emit(None, &pretty(&json!({ "fit": result.fit, "medians": medians })))
        }
        Command::Report {
            game,
            strategies,
            threshold,
            out_dir,
        } => {
            let game = load_game(&game)?;
            let p = load_profile(&strategies)?;
            let report = experiment::report_equilibrium(&game, &p.x, &p.y, threshold)?;
            if let Some(dir) = out_dir {
                fs::create_dir_all(&dir)
                    .map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
                emit(Some(&dir.join("attack.csv")), &report.attack_csv())?;
                emit(Some(&dir.join("histogram.csv")), &report.histogram_csv())?;
                emit(Some(&dir.join("degrees.csv")), &report.degree_csv())?;
            }
            emit(None, &pretty(&json!(report)))
        }
        Command::Psne { game } => {
            let game = load_game(&game)?;
            let found = oracle::psne_search(&game)?;
            let v = match found {
                Some((a, b)) => json!({ "found": true, "invest": a, "attack": b }),
                None => json!({ "found": false }),
            };
            emit(None, &pretty(&v))
        }
    }
}
