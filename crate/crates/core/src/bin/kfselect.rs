use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use kfselect::certificates::{certify, PriorSchedule};
use kfselect::covariance::Kind;
use kfselect::error::{Error, Result};
use kfselect::experiments::{
    run_basin, run_bruteforce, run_select, run_sweep, summarize_bruteforce, summarize_sweep, sweep_trends,
    write_bruteforce_csv, write_csv, write_json, BasinConfig, BruteforceConfig, SweepConfig, SCHEMA_VERSION,
};
use kfselect::model::{basin_system, random_system, synth_river_tree, BasinParams, LinearSystem, OutputMode, RandomSystemSpec};
use kfselect::objective::{Scalarization, SelectionConfig, Weights};

#[derive(Parser)]
#[command(name = "kfselect", version, about = "Greedy sensor selection for Kalman filtering and smoothing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory (created if missing). Without it, results go to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_from_str::<Scalarization>)]
    scalarization: Option<Scalarization>,
    #[arg(long, global = true, value_parser = parse_from_str::<Kind>)]
    kind: Option<Kind>,
    /// Horizon N.
    #[arg(long, global = true)]
    horizon: Option<usize>,
    /// First step m.
    #[arg(long, global = true, default_value_t = 0)]
    start: usize,
    /// final | average | geometric:<rho>
    #[arg(long, global = true, value_parser = parse_from_str::<Weights>)]
    weights: Option<Weights>,
    /// Budget s.
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Greedy steps r (defaults to s).
    #[arg(long, global = true)]
    steps: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Greedy selection with certificates for a system file.
    Select(SystemArgs),
    /// Certificates only.
    Certify(SystemArgs),
    /// Certificates over a grid of noise ratios and state-matrix norms.
    Sweep(SweepArgs),
    /// Greedy against exhaustive search on random systems.
    Bruteforce(BruteforceArgs),
    /// River-basin monitoring demo.
    Basin(BasinArgs),
    /// Generate a system and write it as JSON.
    Gen(GenArgs),
}

#[derive(Args)]
struct SystemArgs {
    /// System JSON (as written by `gen`).
    #[arg(long)]
    system: PathBuf,
    /// Sensing schedule used for filtering certificates.
    #[arg(long, value_enum, default_value_t = ScheduleArg::Empty)]
    prior_schedule: ScheduleArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Empty,
    Full,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 30)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Comma-separated σ_v²/σ_w² grid.
    #[arg(long, value_delimiter = ',')]
    ratios: Option<Vec<f64>>,
    /// Comma-separated ‖F‖ grid.
    #[arg(long, value_delimiter = ',')]
    norms: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1e-2)]
    sigma_w2: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Trace,
    Specnorm,
}

#[derive(Args)]
struct BruteforceArgs {
    /// Preset: trace (n = p = 10, s = 4) or specnorm (n = 5, p = 10, s = 5, σ_w² = 1e-3).
    #[arg(long, value_enum, default_value_t = Family::Trace)]
    family: Family,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long)]
    sigma_w2: Option<f64>,
    /// Also compute exhaustive α / ε per trial.
    #[arg(long)]
    with_certificate: bool,
}

#[derive(Args)]
struct BasinArgs {
    #[arg(long, default_value_t = 5)]
    levels: usize,
    #[arg(long, default_value_t = 2)]
    branching: usize,
    #[arg(long, default_value_t = 7)]
    probes: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenFamily {
    Random,
    Basin,
    Scalar,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value_t = GenFamily::Random)]
    family: GenFamily,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    p: usize,
    #[arg(long, default_value_t = 0.9)]
    norm: f64,
    #[arg(long, default_value_t = 1e-2)]
    sigma_w2: f64,
    #[arg(long, default_value_t = 1e-2)]
    sigma_v2_min: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma_v2_max: f64,
    #[arg(long, default_value_t = 1e-2)]
    pi0_scale: f64,
    /// Canonical outputs e_uᵀ instead of Gaussian rows.
    #[arg(long)]
    canonical: bool,
    /// Tree levels for the basin family.
    #[arg(long, default_value_t = 5)]
    levels: usize,
}

fn parse_from_str<T: std::str::FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let c = &cli.common;
    if let Some(dir) = &c.out {
        std::fs::create_dir_all(dir)?;
    }
    match &cli.command {
        Command::Select(a) | Command::Certify(a) => {
            let sys = LinearSystem::from_json(&std::fs::read_to_string(&a.system)?)?;
            let cfg = selection_config(c, Weights::Final, 1, 1);
            let schedule = match a.prior_schedule {
                ScheduleArg::Empty => PriorSchedule::Empty,
                ScheduleArg::Full => PriorSchedule::Full,
            };
            if matches!(cli.command, Command::Select(_)) {
                let report = run_select(&sys, &cfg, &schedule)?;
                eprintln!(
                    "selected {:?}, f = {:.6e}, guarantee factor {:.4}",
                    report.chosen, report.value, report.certificates.guarantee_multiplicative
                );
                emit(c, "result.json", &report)
            } else {
                cfg.validate_for(sys.num_sensors())?;
                let report = certify(&sys, &cfg, &schedule)?;
                emit(c, "certificates.json", &Tagged::new(&report))
            }
        }
        Command::Sweep(a) => {
            let kind = c.kind.unwrap_or(Kind::Filtering);
            let base = SweepConfig::desk(kind);
            let cfg = SweepConfig {
                scalarization: c.scalarization.unwrap_or(Scalarization::Trace),
                n: a.n,
                p: a.n,
                ratios: a.ratios.clone().unwrap_or(base.ratios.clone()),
                f_norms: a.norms.clone().unwrap_or(base.f_norms.clone()),
                sigma_w2: a.sigma_w2,
                horizon: c.horizon.unwrap_or(base.horizon),
                weights: c.weights.clone().unwrap_or(base.weights.clone()),
                trials: a.trials,
                seed: c.seed,
                ..base
            };
            let rows = run_sweep(&cfg)?;
            let summary = summarize_sweep(&rows);
            let (alpha_up, eps_down) = sweep_trends(&summary);
            eprintln!("alpha non-decreasing: {alpha_up}, epsilon non-increasing: {eps_down}");
            #[derive(Serialize)]
            struct Out<'a> {
                config: &'a SweepConfig,
                summary: Vec<kfselect::experiments::SweepSummary>,
                alpha_non_decreasing: bool,
                epsilon_non_increasing: bool,
            }
            let out = Out {
                config: &cfg,
                summary,
                alpha_non_decreasing: alpha_up,
                epsilon_non_increasing: eps_down,
            };
            match &c.out {
                Some(dir) => {
                    write_csv(&dir.join("sweep.csv"), &rows)?;
                    write_json(&dir.join("sweep_summary.json"), &Tagged::new(&out))
                }
                None => print_json(&Tagged::new(&out)),
            }
        }
        Command::Bruteforce(a) => {
            let kind = c.kind.unwrap_or(Kind::Filtering);
            let mut cfg = match a.family {
                Family::Trace => BruteforceConfig::trace_family(kind),
                Family::Specnorm => BruteforceConfig::specnorm_family(kind),
            };
            cfg.n = a.n.unwrap_or(cfg.n);
            cfg.p = a.p.unwrap_or(cfg.p);
            cfg.s = c.budget.unwrap_or(cfg.s);
            cfg.trials = a.trials;
            cfg.sigma_w2 = a.sigma_w2.unwrap_or(cfg.sigma_w2);
            cfg.scalarization = c.scalarization.unwrap_or(cfg.scalarization);
            cfg.horizon = c.horizon.unwrap_or(cfg.horizon);
            cfg.weights = c.weights.clone().unwrap_or(cfg.weights);
            cfg.seed = c.seed;
            cfg.with_certificate = a.with_certificate;
            let rows = run_bruteforce(&cfg)?;
            let summary = summarize_bruteforce(&rows);
            eprintln!(
                "optimal in {:.1}% of {} trials, max nu* = {:.4}",
                100.0 * summary.optimal_fraction,
                summary.trials,
                summary.max_nu_star
            );
            #[derive(Serialize)]
            struct Out<'a> {
                config: &'a BruteforceConfig,
                summary: kfselect::experiments::BruteforceSummary,
            }
            let body = Out { config: &cfg, summary };
            let out = Tagged::new(&body);
            match &c.out {
                Some(dir) => {
                    write_bruteforce_csv(&dir.join("bruteforce.csv"), &rows)?;
                    write_json(&dir.join("bruteforce_summary.json"), &out)
                }
                None => print_json(&out),
            }
        }
        Command::Basin(a) => {
            let cfg = BasinConfig {
                levels: a.levels,
                branching: a.branching,
                budget: c.budget,
                horizon: c.horizon.unwrap_or(200),
                probes: a.probes,
                seed: c.seed,
                ..Default::default()
            };
            let (report, rows) = run_basin(&cfg)?;
            eprintln!(
                "average MSE: full {:.4}, greedy {:.4}, random {:.4}",
                report.full.mse, report.greedy.mse, report.random.mse
            );
            if let Some(dir) = &c.out {
                write_csv(&dir.join("basin_trajectories.csv"), &rows)?;
            }
            emit(c, "basin.json", &report)
        }
        Command::Gen(a) => {
            let sys = match a.family {
                GenFamily::Random => random_system(
                    &RandomSystemSpec {
                        n: a.n,
                        p: a.p,
                        target_norm: a.norm,
                        sigma_w2: a.sigma_w2,
                        sigma_v2_range: (a.sigma_v2_min, a.sigma_v2_max),
                        output_mode: if a.canonical { OutputMode::Canonical } else { OutputMode::Gaussian },
                        pi0_scale: a.pi0_scale,
                    },
                    c.seed,
                )?,
                GenFamily::Basin => {
                    let tree = synth_river_tree(a.levels, 2, c.seed)?;
                    basin_system(&tree, &BasinParams::default())?.0
                }
                GenFamily::Scalar => LinearSystem::scalar_demo(),
            };
            match &c.out {
                Some(dir) => write_text(&dir.join("system.json"), &sys.to_json()),
                None => {
                    println!("{}", sys.to_json());
                    Ok(())
                }
            }
        }
    }
}

fn selection_config(c: &Common, default_weights: Weights, default_horizon: usize, default_budget: usize) -> SelectionConfig {
    let horizon = c.horizon.unwrap_or(default_horizon);
    let budget = c.budget.unwrap_or(default_budget);
    let cfg = SelectionConfig::new(
        c.scalarization.unwrap_or(Scalarization::Trace),
        c.kind.unwrap_or(Kind::Filtering),
        c.start,
        horizon,
        c.weights.as_ref().unwrap_or(&default_weights),
        budget,
    );
    match c.steps {
        Some(r) => cfg.with_steps(r),
        None => cfg,
    }
}

#[derive(Serialize)]
struct Tagged<'a, T: Serialize> {
    schema: &'static str,
    #[serde(flatten)]
    inner: Wrapped<'a, T>,
}

#[derive(Serialize)]
#[serde(untagged)]
enum Wrapped<'a, T: Serialize> {
    Object(&'a T),
}

impl<'a, T: Serialize> Tagged<'a, T> {
    fn new(inner: &'a T) -> Self {
        Tagged {
            schema: SCHEMA_VERSION,
            inner: Wrapped::Object(inner),
        }
    }
}

fn emit<T: Serialize>(c: &Common, name: &str, value: &T) -> Result<()> {
    match &c.out {
        Some(dir) => write_json(&dir.join(name), value),
        None => print_json(value),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, format!("{text}\n"))?;
    Ok(())
}
