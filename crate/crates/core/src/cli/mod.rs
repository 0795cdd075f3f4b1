//! Experiment harness behind the `ggfilter` binary.
//!
//! ```text
//! ggfilter quadrature --moments m.txt --basis hermite --points 3
//! ggfilter fokker-planck --config ou.toml
//! ggfilter filter --config circular.toml [--seed 7 | --seeds 0..10]
//! ```
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure,
//! 3 I/O error.

mod config;
mod output;

pub use config::{ConfigError, EkfSection, ExperimentConfig, FdSection, GgaSection, Method};
pub use output::{
    method_csv, moments_csv, parse_moments, parse_scenario, scenario_csv, write_atomic, Num,
};

use crate::filter::{run_filter, ConditionalStats, FilterOptions};
use crate::propagation::{solve_fokker_planck_with, PropagationOptions, TimeGrid};
use crate::quadrature::{
    gauss_christoffel, gaussian_modified_moments, round_trip_error, MomentVector, RecurrenceBasis,
};
use crate::reference::{ekf, fd_zakai, kalman_on_grid};
use crate::simulation::Scenario;
use clap::{Parser, Subcommand, ValueEnum};
use std::fmt::Write as _;
use std::io::Write;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Parser)]
#[command(
    name = "ggfilter",
    version,
    about = "Gauss-Galerkin filtering experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BasisChoice {
    Hermite,
    #[value(alias = "monomial")]
    Raw,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gauss-Christoffel rule of a moment vector read from a file.
    Quadrature {
        #[arg(long)]
        moments: PathBuf,
        #[arg(long, value_enum, default_value = "hermite")]
        basis: BasisChoice,
        /// Number of points; defaults to half the number of moments.
        #[arg(long)]
        points: Option<usize>,
    },
    /// Propagate the initial law and write its raw moments.
    FokkerPlanck {
        #[arg(long)]
        config: PathBuf,
    },
    /// Simulate (or replay) a scenario and run the configured filters.
    Filter {
        #[arg(long)]
        config: PathBuf,
        /// Override the configured seed.
        #[arg(long, conflicts_with = "seeds")]
        seed: Option<u64>,
        /// Run every seed in `START..END`, each into `output_dir/seed-<s>`.
        #[arg(long, value_parser = parse_seed_range)]
        seeds: Option<Range<u64>>,
    },
}

fn parse_seed_range(s: &str) -> Result<Range<u64>, String> {
    let (a, b) = s.split_once("..").ok_or("expected START..END")?;
    let start: u64 = a.trim().parse().map_err(|_| format!("bad start '{a}'"))?;
    let end: u64 = b.trim().parse().map_err(|_| format!("bad end '{b}'"))?;
    if end <= start {
        return Err("empty seed range".into());
    }
    Ok(start..end)
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Numerical(e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    ExperimentConfig::from_toml(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Quadrature {
            moments,
            basis,
            points,
        } => run_quadrature(&moments, basis, points, out),
        Command::FokkerPlanck { config } => {
            let cfg = load_config(&config)?;
            let path = run_fokker_planck(&cfg)?;
            writeln!(out, "wrote {}", path.display()).map_err(|e| CliError::Io(e.to_string()))
        }
        Command::Filter {
            config,
            seed,
            seeds,
        } => {
            let mut cfg = load_config(&config)?;
            let report = match seeds {
                None => {
                    if let Some(s) = seed {
                        cfg.seed = s;
                    }
                    run_experiment(&cfg)?.render()
                }
                Some(range) => {
                    let base = cfg.output_dir.clone();
                    let mut text = String::new();
                    for s in range {
                        cfg.seed = s;
                        cfg.output_dir = base.join(format!("seed-{s}"));
                        let _ = writeln!(text, "seed {s}");
                        text.push_str(&run_experiment(&cfg)?.render());
                    }
                    text
                }
            };
            out.write_all(report.as_bytes())
                .map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

fn run_quadrature(
    path: &Path,
    choice: BasisChoice,
    points: Option<usize>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut values =
        parse_moments(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let n = match points {
        Some(0) => return Err(CliError::Config("--points must be at least 1".into())),
        Some(n) if values.len() < 2 * n => {
            return Err(CliError::Config(format!(
                "{} moments given, {n} points need {}",
                values.len(),
                2 * n
            )))
        }
        Some(n) => n,
        None if values.is_empty() || values.len() % 2 != 0 => {
            return Err(CliError::Config(format!(
                "need an even, non-zero number of moments, found {}",
                values.len()
            )))
        }
        None => values.len() / 2,
    };
    values.truncate(2 * n);
    let basis = match choice {
        BasisChoice::Hermite => RecurrenceBasis::hermite_for_points(n),
        BasisChoice::Raw => RecurrenceBasis::monomial_for_points(n),
    }?;
    let moments = MomentVector::new(values, basis.id())?;
    let rule = gauss_christoffel(&moments, &basis)?;
    let err = round_trip_error(&rule, &basis, &moments);
    let mut text = String::from("node,weight\n");
    for (x, w) in rule.iter() {
        let _ = writeln!(text, "{},{}", Num(x), Num(w));
    }
    let _ = writeln!(text, "round-trip error: {err:e}");
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Io(e.to_string()))
}

/// Runs the configured Fokker-Planck problem and writes
/// `output_dir/fokker_planck.csv`.
pub fn run_fokker_planck(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let grid = cfg.propagation_grid()?;
    let entry = cfg.model_entry()?;
    let n = cfg.gauss_points;
    let basis = RecurrenceBasis::hermite_for_points(n)?;
    let law = entry.initial_law;
    let initial = gaussian_modified_moments(law.mean, law.variance, &basis, 2 * n)?;
    let options = PropagationOptions {
        scheme: cfg.scheme,
        shrink_on_degeneracy: cfg.gga.shrink_on_degeneracy,
    };
    let run = solve_fokker_planck_with(&initial, &entry.diffusion, &basis, &grid, options)?;
    let orders = cfg.orders();
    let stats: Vec<ConditionalStats> = run
        .states
        .iter()
        .map(|s| ConditionalStats::from_measure(s.time, &s.measure, orders))
        .collect();
    let path = cfg.output_dir.join("fokker_planck.csv");
    write_atomic(&path, &moments_csv(&stats, orders)).map_err(io_err(&path))?;
    Ok(path)
}

/// Outcome of one method within an experiment.
#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub method: Method,
    pub result: Result<Vec<ConditionalStats>, String>,
    /// Gauss points actually used (GGA only; may shrink).
    pub gauss_points: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub scenario: Scenario,
    pub outcomes: Vec<MethodOutcome>,
    pub reference: Option<Method>,
    pub summary_csv: String,
    pub output_dir: PathBuf,
}

impl ExperimentReport {
    pub fn outcome(&self, method: Method) -> Option<&MethodOutcome> {
        self.outcomes.iter().find(|o| o.method == method)
    }

    pub fn render(&self) -> String {
        let mut s = format!("output: {}\n", self.output_dir.display());
        s.push_str(&self.summary_csv);
        s
    }
}

/// Root-mean-square of `a - b`.
pub fn rms_difference(a: impl IntoIterator<Item = f64>, b: impl IntoIterator<Item = f64>) -> f64 {
    let (mut acc, mut n) = (0.0, 0usize);
    for (x, y) in a.into_iter().zip(b) {
        acc += (x - y) * (x - y);
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        (acc / n as f64).sqrt()
    }
}

/// Mean of `|a - b|`.
pub fn mean_abs_difference(
    a: impl IntoIterator<Item = f64>,
    b: impl IntoIterator<Item = f64>,
) -> f64 {
    let (mut acc, mut n) = (0.0, 0usize);
    for (x, y) in a.into_iter().zip(b) {
        acc += (x - y).abs();
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        acc / n as f64
    }
}

fn load_scenario(
    cfg: &ExperimentConfig,
    grid: &TimeGrid,
    dim: usize,
) -> Result<Scenario, CliError> {
    match &cfg.replay {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(io_err(p))?;
            parse_scenario(&text, grid, dim, &cfg.model)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        }
        None => {
            let entry = cfg.model_entry()?;
            Ok(Scenario::generate(&entry, grid, cfg.seed)?)
        }
    }
}

fn run_method(cfg: &ExperimentConfig, method: Method, scenario: &Scenario) -> MethodOutcome {
    let grid = &scenario.grid;
    let ys = &scenario.observations;
    let orders = cfg.orders();
    let entry = match cfg.model_entry() {
        Ok(e) => e,
        Err(e) => {
            return MethodOutcome {
                method,
                result: Err(e.0),
                gauss_points: None,
            }
        }
    };
    let started = Instant::now();
    let mut gauss_points = None;
    let result = match method {
        Method::Gga => {
            let options = FilterOptions {
                scheme: cfg.scheme,
                requadrature: cfg.gga.requadrature,
                shrink_on_degeneracy: cfg.gga.shrink_on_degeneracy,
                moment_orders: orders,
            };
            run_filter(&entry, ys, grid, cfg.gauss_points, options).map(|run| {
                gauss_points = Some(run.gauss_points);
                run.stats
            })
        }
        Method::Fd => fd_zakai(&entry, ys, grid, &cfg.fd_options()).map(|run| run.stats),
        Method::Ekf => ekf(&entry, ys, grid, cfg.ekf.scheme.unwrap_or(cfg.scheme))
            .map(|b| beliefs_to_stats(&b, grid, orders)),
        Method::Kalman => match &entry.linear {
            Some(lin) => kalman_on_grid(lin, entry.initial_law, grid, ys)
                .map(|b| beliefs_to_stats(&b, grid, orders)),
            None => Err(crate::Error::InvalidArgument(format!(
                "model '{}' is not linear-Gaussian",
                entry.name
            ))),
        },
    };
    log::info!("{method}: {:.3}s", started.elapsed().as_secs_f64());
    MethodOutcome {
        method,
        result: result.map_err(|e| e.to_string()),
        gauss_points,
    }
}

fn beliefs_to_stats(
    beliefs: &[crate::reference::GaussianBelief],
    grid: &TimeGrid,
    orders: usize,
) -> Vec<ConditionalStats> {
    beliefs
        .iter()
        .enumerate()
        .map(|(l, b)| b.stats(grid.time(l), orders))
        .collect()
}

/// Simulates or replays the scenario, runs every configured method in
/// parallel, and writes `scenario.csv`, one CSV per successful method and
/// `summary.csv` into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, CliError> {
    let grid = cfg.filter_grid()?;
    let entry = cfg.model_entry()?;
    let dim = entry.observation.dim();
    let scenario = load_scenario(cfg, &grid, dim)?;
    let methods = cfg.methods();
    let orders = cfg.orders();

    let outcomes: Vec<MethodOutcome> = std::thread::scope(|s| {
        let handles: Vec<_> = methods
            .iter()
            .map(|&m| {
                let scenario = &scenario;
                s.spawn(move || run_method(cfg, m, scenario))
            })
            .collect();
        handles
            .into_iter()
            .zip(&methods)
            .map(|(h, &m)| {
                h.join().unwrap_or_else(|_| MethodOutcome {
                    method: m,
                    result: Err("method panicked".into()),
                    gauss_points: None,
                })
            })
            .collect()
    });

    let dir = &cfg.output_dir;
    let scenario_path = dir.join("scenario.csv");
    write_atomic(&scenario_path, &scenario_csv(&scenario, dim)).map_err(io_err(&scenario_path))?;
    for o in &outcomes {
        if let Ok(stats) = &o.result {
            let path = dir.join(format!("{}.csv", o.method));
            write_atomic(&path, &method_csv(stats, &scenario.path, orders))
                .map_err(io_err(&path))?;
        }
    }

    let ok = |m: Method| outcomes.iter().any(|o| o.method == m && o.result.is_ok());
    let reference = [Method::Fd, Method::Kalman].into_iter().find(|&m| ok(m));
    let summary_csv = summary(&outcomes, &scenario, reference, orders);
    let summary_path = dir.join("summary.csv");
    write_atomic(&summary_path, &summary_csv).map_err(io_err(&summary_path))?;

    if outcomes.iter().all(|o| o.result.is_err()) {
        let msgs: Vec<String> = outcomes
            .iter()
            .map(|o| format!("{}: {}", o.method, o.result.as_ref().err().unwrap()))
            .collect();
        return Err(CliError::Numerical(format!(
            "all methods failed ({})",
            msgs.join("; ")
        )));
    }
    Ok(ExperimentReport {
        scenario,
        outcomes,
        reference,
        summary_csv,
        output_dir: dir.clone(),
    })
}

fn summary(
    outcomes: &[MethodOutcome],
    scenario: &Scenario,
    reference: Option<Method>,
    orders: usize,
) -> String {
    let mut s = String::from(
        "method,status,gauss_points,rms_mean_vs_truth,reference,rms_mean_vs_reference,rms_variance_vs_reference,mean_abs_variance_vs_reference",
    );
    for p in 1..=orders {
        let _ = write!(s, ",rms_m_{p}_vs_reference");
    }
    s.push('\n');
    let ref_stats = reference
        .and_then(|r| outcomes.iter().find(|o| o.method == r))
        .and_then(|o| o.result.as_ref().ok());
    for o in outcomes {
        let np = o.gauss_points.map(|n| n.to_string()).unwrap_or_default();
        match &o.result {
            Err(msg) => {
                let _ = write!(
                    s,
                    "{},\"failed: {}\",{np},,,,,",
                    o.method,
                    msg.replace('"', "'")
                );
                s.push_str(&",".repeat(orders));
            }
            Ok(stats) => {
                let truth =
                    rms_difference(stats.iter().map(|r| r.mean), scenario.path.iter().copied());
                let _ = write!(s, "{},ok,{np},{}", o.method, Num(truth));
                match (reference, ref_stats) {
                    (Some(r), Some(rs)) if r != o.method => {
                        let dm =
                            rms_difference(stats.iter().map(|r| r.mean), rs.iter().map(|r| r.mean));
                        let dv = rms_difference(
                            stats.iter().map(|r| r.variance),
                            rs.iter().map(|r| r.variance),
                        );
                        let av = mean_abs_difference(
                            stats.iter().map(|r| r.variance),
                            rs.iter().map(|r| r.variance),
                        );
                        let _ = write!(s, ",{r},{},{},{}", Num(dm), Num(dv), Num(av));
                        for p in 0..orders {
                            let d = rms_difference(
                                stats.iter().map(|r| r.raw_moments[p]),
                                rs.iter().map(|r| r.raw_moments[p]),
                            );
                            let _ = write!(s, ",{}", Num(d));
                        }
                    }
                    _ => {
                        s.push_str(",,,,");
                        s.push_str(&",".repeat(orders));
                    }
                }
            }
        }
        s.push('\n');
    }
    s
}
