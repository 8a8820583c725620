use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand};
use olive_core::envs::GridSpec;
use olive_core::olive::{run_guess_m, run_olive, run_oliver, GuessMConfig, Mode, OliveConfig, OliveResult, Overrides};
use olive_core::seed::StreamSeed;
use olive_core::oracle::BellmanFactorization;
use olive_lab::analysis::{audit_with, error_matrices_csv, factorizations, geometry_grid, geometry_passed, rank_report, GeometryGrid};
use olive_lab::class::{ClassDoc, ClassSpec};
use olive_lab::env::{Environment, GeneratorSpec};
use olive_lab::experiment::{geometry_csv, run_batch, summarize, to_json, write_outputs, ExperimentConfig, RunSummary};
use olive_lab::lowerbound::{lowerbound_demo, LowerBoundSpec};
use olive_lab::plot::{emit_plot_data, Axes};
use olive_lab::with_class;

#[derive(Parser)]
#[command(name = "olive-lab", version, about = "Generate environments, run OLIVE and friends, and audit the results")]
struct Cli {
    /// Experiment config; runs it when no subcommand is given.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run seed. With `--config` it replaces the seed list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file, or output directory for experiment runs. Defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Write an environment or class document.
    #[command(subcommand)]
    Gen(Gen),
    /// Bellman-rank and factorization report.
    Rank {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, default_value_t = olive_core::oracle::DEFAULT_REL_TOL)]
        rel_tol: f64,
        #[arg(long, default_value_t = 1e-8)]
        factor_tol: f64,
        /// Also write every error matrix as long-format CSV.
        #[arg(long)]
        matrices: Option<PathBuf>,
        /// Also write the per-level factorizations as JSON.
        #[arg(long)]
        factorizations: Option<PathBuf>,
    },
    /// Run OLIVE on an environment and class.
    Olive(AlgoArgs),
    /// Run the robust variant with validity slack `theta`.
    Oliver(AlgoArgs),
    /// Run OLIVE with a doubling schedule over the rank input.
    Guessm {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long)]
        population: bool,
        #[arg(long)]
        max_exponent: Option<u32>,
        #[arg(long)]
        max_episodes: Option<u64>,
    },
    /// Volume-ratio grid as CSV.
    Geometry {
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,8,16,32,64")]
        dims: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1")]
        fractions: Vec<f64>,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
    },
    /// Replay a saved OLIVE result through the ellipsoid tracker, using
    /// factorizations from `rank --factorizations` or rebuilt from env and class.
    TraceAudit {
        #[arg(long, required_unless_present = "factorizations", requires = "class")]
        env: Option<PathBuf>,
        #[arg(long, requires = "env")]
        class: Option<PathBuf>,
        #[arg(long, conflicts_with_all = ["env", "class"])]
        factorizations: Option<PathBuf>,
        #[arg(long)]
        result: PathBuf,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        zeta: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
    },
    /// OLIVE against a uniform-exploration baseline on the tree and chain families.
    LowerboundDemo {
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 1000)]
        baseline_episodes: u64,
    },
    /// Long-format CSV from one or more `summary.json` files.
    PlotData {
        #[arg(long, required = true)]
        summary: Vec<PathBuf>,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
    },
    /// Same as the bare `--config` form.
    Run {
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Subcommand)]
enum Gen {
    /// Random tabular MDP.
    Mdp {
        #[arg(long)]
        states: usize,
        #[arg(long)]
        actions: usize,
        #[arg(long)]
        horizon: usize,
        #[arg(long)]
        bernoulli: bool,
    },
    /// Random MDP whose transitions factor through `rank` dimensions.
    Lowrank {
        #[arg(long)]
        states: usize,
        #[arg(long)]
        actions: usize,
        #[arg(long)]
        horizon: usize,
        #[arg(long)]
        rank: usize,
    },
    /// Random reactive POMDP.
    Pomdp {
        #[arg(long)]
        hidden: usize,
        #[arg(long)]
        observations: usize,
        #[arg(long)]
        actions: usize,
        #[arg(long)]
        horizon: usize,
    },
    /// Grid world whose observations identify the cell.
    Grid {
        #[arg(long)]
        width: usize,
        #[arg(long)]
        height: usize,
        #[arg(long, default_value_t = 1)]
        observations_per_cell: usize,
        #[arg(long)]
        horizon: usize,
        #[arg(long, default_value_t = 0.1)]
        slip: f64,
    },
    /// Complete `branching`-ary tree with one better leaf.
    Tree {
        #[arg(long)]
        branching: usize,
        #[arg(long)]
        horizon: usize,
        #[arg(long)]
        gap: f64,
        #[arg(long)]
        leaf: Option<usize>,
    },
    /// Chain of bandit states, each with one good action per level.
    Chain {
        #[arg(long)]
        states: usize,
        #[arg(long)]
        horizon: usize,
        #[arg(long)]
        actions: usize,
        #[arg(long)]
        tau: f64,
    },
    /// Class document for an environment file.
    Class {
        #[arg(long)]
        env: PathBuf,
        /// realizable, random or tree
        #[arg(long, default_value = "realizable")]
        kind: String,
        #[arg(long, default_value_t = 16)]
        size: usize,
        #[arg(long, default_value_t = 0.1)]
        scale: f64,
    },
}

#[derive(Args)]
struct Inputs {
    #[arg(long)]
    env: PathBuf,
    #[arg(long)]
    class: PathBuf,
}

#[derive(Args)]
struct AlgoArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Defaults to the environment's factorization dimension.
    #[arg(long)]
    m: Option<usize>,
    /// Defaults to `2 sqrt(M)`.
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    #[arg(long, default_value_t = 0.0)]
    theta_m: f64,
    /// Exact expectations instead of samples.
    #[arg(long)]
    population: bool,
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long)]
    n_est: Option<u64>,
    #[arg(long)]
    n_eval: Option<u64>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    max_episodes: Option<u64>,
}

impl AlgoArgs {
    fn config(&self, env: &Environment) -> OliveConfig {
        let m = self.m.unwrap_or_else(|| env.factor_dimension());
        let mut c = OliveConfig::new(self.epsilon, self.delta, m, self.zeta.unwrap_or(2.0 * (m as f64).sqrt()));
        c.theta = self.theta;
        c.theta_m = self.theta_m;
        if self.population {
            c.mode = Mode::Population;
        }
        c.overrides = Overrides { phi: self.phi, n_est: self.n_est, n_eval: self.n_eval, n: self.n };
        c.max_iterations = self.max_iterations;
        c.max_episodes = self.max_episodes;
        c
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_inputs(inputs: &Inputs) -> Result<(Environment, olive_lab::class::Class)> {
    let env = Environment::load(&inputs.env)?;
    let class = ClassDoc::load(&inputs.class)?;
    if class.shape() != env.exact().shape() {
        bail!("class and environment shapes differ");
    }
    Ok((env, class))
}

fn run_config(cli: &Cli, threads: Option<usize>) -> Result<ExitCode> {
    let path = cli.config.as_ref().context("--config is required")?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        config.seeds = vec![s];
    }
    if let Some(o) = &cli.out {
        config.output_dir = Some(o.clone());
    }
    let runs = run_batch(&config, threads)?;
    let summary = summarize(&config, &runs);
    match &config.output_dir {
        Some(dir) => write_outputs(dir, &runs, &summary)?,
        None => print!("{}", to_json(&summary)),
    }
    for s in &summary.seeds {
        if let Some(e) = &s.error {
            eprintln!("seed {}: {}", s.seed, e);
        }
    }
    eprintln!("{}/{} seeds succeeded", summary.aggregates.successes, summary.aggregates.seeds);
    Ok(ExitCode::from(summary.exit_code() as u8))
}

fn olive_exit(result: &OliveResult) -> ExitCode {
    if result.succeeded() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main(cli: &Cli) -> Result<ExitCode> {
    let seed = cli.seed.unwrap_or(0);
    let out = cli.out.as_deref();
    let Some(command) = &cli.command else {
        return run_config(cli, None);
    };
    match command {
        Command::Run { threads } => run_config(cli, *threads),
        Command::Gen(g) => {
            let spec = match g {
                Gen::Mdp { states, actions, horizon, bernoulli } => {
                    GeneratorSpec::Mdp { states: *states, actions: *actions, horizon: *horizon, bernoulli: *bernoulli, seed: None }
                }
                Gen::Lowrank { states, actions, horizon, rank } => {
                    GeneratorSpec::LowRank { states: *states, actions: *actions, horizon: *horizon, rank: *rank, seed: None }
                }
                Gen::Pomdp { hidden, observations, actions, horizon } => {
                    GeneratorSpec::Pomdp { hidden: *hidden, observations: *observations, actions: *actions, horizon: *horizon, seed: None }
                }
                Gen::Grid { width, height, observations_per_cell, horizon, slip } => GeneratorSpec::Grid {
                    spec: GridSpec { width: *width, height: *height, observations_per_cell: *observations_per_cell, horizon: *horizon, slip: *slip },
                    seed: None,
                },
                Gen::Tree { branching, horizon, gap, leaf } => {
                    GeneratorSpec::Tree { branching: *branching, horizon: *horizon, gap: *gap, leaf: *leaf, seed: None }
                }
                Gen::Chain { states, horizon, actions, tau } => {
                    GeneratorSpec::Chain { states: *states, horizon: *horizon, actions: *actions, tau: *tau, seed: None }
                }
                Gen::Class { env, kind, size, scale } => {
                    let env = Environment::load(env)?;
                    let spec = match kind.as_str() {
                        "realizable" => ClassSpec::Realizable { size: *size, scale: *scale, seed: None },
                        "random" => ClassSpec::Random { size: *size, seed: None },
                        "tree" => ClassSpec::TreeQstar,
                        other => bail!("unknown class kind {other:?}; expected realizable, random or tree"),
                    };
                    let class = spec.resolve(&env, seed)?;
                    emit(out, &class.to_doc().to_json())?;
                    return Ok(ExitCode::SUCCESS);
                }
            };
            emit(out, &spec.generate(seed)?.to_json())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Rank { inputs, rel_tol, factor_tol, matrices, factorizations: facts } => {
            let (env, class) = load_inputs(inputs)?;
            let report = with_class!(&class, c => rank_report(&env, c, *rel_tol, *factor_tol))?;
            if let Some(p) = matrices {
                emit(Some(p), &with_class!(&class, c => error_matrices_csv(&env, c))?)?;
            }
            if let Some(p) = facts {
                emit(Some(p), &to_json(&with_class!(&class, c => factorizations(&env, c))?))?;
            }
            emit(out, &to_json(&report))?;
            Ok(if report.factorization_ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Olive(args) | Command::Oliver(args) => {
            let (env, class) = load_inputs(&args.inputs)?;
            let config = args.config(&env);
            let robust = matches!(command, Command::Oliver(_));
            let result = with_class!(&class, c => if robust {
                run_oliver(&env, c, &config, StreamSeed::new(seed))
            } else {
                run_olive(&env, c, &config, StreamSeed::new(seed))
            })?;
            emit(out, &to_json(&result))?;
            Ok(olive_exit(&result))
        }
        Command::Guessm { inputs, epsilon, delta, population, max_exponent, max_episodes } => {
            let (env, class) = load_inputs(inputs)?;
            let mut config = GuessMConfig::new(*epsilon, *delta);
            if *population {
                config.mode = Mode::Population;
            }
            if let Some(e) = max_exponent {
                config.max_exponent = *e;
            }
            config.max_episodes = *max_episodes;
            let result = with_class!(&class, c => run_guess_m(&env, c, &config, StreamSeed::new(seed)))?;
            emit(out, &to_json(&result))?;
            Ok(olive_exit(result.final_result()))
        }
        Command::Geometry { dims, fractions, samples } => {
            let grid = GeometryGrid { dims: dims.clone(), fractions: fractions.clone(), samples: *samples, ..GeometryGrid::default() };
            let rows = geometry_grid(&grid, StreamSeed::new(seed))?;
            emit(out, &geometry_csv(&rows)?)?;
            Ok(if geometry_passed(&rows) { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::TraceAudit { env, class, factorizations: facts, result, m, zeta, theta } => {
            let facts: Vec<BellmanFactorization> = match (facts, env, class) {
                (Some(p), _, _) => {
                    let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
                }
                (None, Some(env), Some(class)) => {
                    let (env, class) = load_inputs(&Inputs { env: env.clone(), class: class.clone() })?;
                    with_class!(&class, c => factorizations(&env, c))?
                }
                _ => bail!("trace-audit needs --factorizations or both --env and --class"),
            };
            let text = fs::read_to_string(result).with_context(|| format!("reading {}", result.display()))?;
            let result: OliveResult = serde_json::from_str(&text).with_context(|| format!("parsing {}", result.display()))?;
            let zeta = zeta.unwrap_or(2.0 * (*m as f64).sqrt());
            let audit = audit_with(&facts, &result, *m, zeta, *theta)?;
            emit(out, &to_json(&audit))?;
            Ok(if audit.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::LowerboundDemo { epsilon, delta, baseline_episodes } => {
            let spec = LowerBoundSpec { baseline_episodes: *baseline_episodes, ..LowerBoundSpec::default() };
            let report = lowerbound_demo(&spec, *epsilon, *delta, seed)?;
            emit(out, &to_json(&report))?;
            Ok(if report.olive_succeeded() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::PlotData { summary, x, y } => {
            let summaries = summary
                .iter()
                .map(|p| -> Result<RunSummary> {
                    let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
                })
                .collect::<Result<Vec<_>>>()?;
            emit(out, &emit_plot_data(&summaries, &Axes::new(x, y))?)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
