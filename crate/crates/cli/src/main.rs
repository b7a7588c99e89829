use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use oadlab::fod::{curvature_report, round_to_exact, solve_fod, table1, HessianMethod};
use oadlab::models::ModelSpec;
use oadlab::session::{fit_session, recommend, SessionFile, TestRequest};
use oadlab::sim::{power_curve, render_results, run_sim, OutputFormat, SimConfig};
use oadlab::{par, Criterion, Error, ErrorModel, FodOptions};

#[derive(Parser)]
#[command(name = "oadlab", version, about = "Optimal and observed-information adaptive designs for linear models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the optimal continuous design
    Fod {
        /// treatment:s, interaction:s, quadratic:s or a custom-model JSON file
        #[arg(long)]
        model: String,
        /// D, A or c:[v1,...,vp]
        #[arg(long, default_value = "D")]
        criterion: String,
        #[arg(long, default_value_t = 200_000)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        /// Also round the design to n observations
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Design curvature R* for the standard model families, as CSV
    Table1 {
        #[arg(long, default_value_t = 9)]
        max_s: usize,
        #[arg(long, default_value_t = 6)]
        quadratic_max_s: usize,
        /// Comma-separated criteria
        #[arg(long, default_value = "D,A")]
        criteria: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo comparison of the adaptive and fixed designs
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "OADLAB_WORKERS", default_value_t = 0)]
        workers: usize,
        /// Output format; inferred from the file extension when omitted
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Power of the χ² test for cᵀβ = C0 across the n grid
    Power {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "OADLAB_WORKERS", default_value_t = 0)]
        workers: usize,
    },
    /// Fit β from a session file
    Fit {
        #[arg(long)]
        session: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Comma-separated c-vector for a χ² test of cᵀβ = C0
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        c: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        c0: f64,
    },
    /// Next support point for a live experiment; the session file is not modified
    RoadNext {
        #[arg(long)]
        session: PathBuf,
    },
    /// H*, V*, R*, h and S* for an optimal design and error model
    Curvature {
        #[arg(long)]
        model: String,
        #[arg(long, default_value = "D")]
        criterion: String,
        /// normal, str:v or ghr:v
        #[arg(long)]
        error_model: String,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = Hessian::Auto)]
        hessian: Hessian,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Hessian {
    Fd,
    Analytic,
    Auto,
}

type CliResult<T> = Result<T, Error>;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { context: path.display().to_string(), source }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, body: &str) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(path, e))?;
    tmp.write_all(body.as_bytes()).map_err(|e| io_err(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

fn emit(out: Option<&Path>, body: &str) -> CliResult<()> {
    match out {
        Some(p) => write_atomic(p, body),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serialisable output");
    s.push('\n');
    s
}

/// `family:s` names are parsed directly; anything else is read as a custom-model file.
fn load_model(name: &str) -> CliResult<ModelSpec> {
    match ModelSpec::parse(name) {
        Ok(spec) => Ok(spec),
        Err(e) => {
            let path = Path::new(name);
            if path.exists() {
                ModelSpec::from_custom_json(&read(path)?)
            } else {
                Err(e)
            }
        }
    }
}

fn load_sim_config(path: &Path, replicates: Option<usize>, seed: Option<u64>) -> CliResult<SimConfig> {
    let mut cfg = SimConfig::from_json(&read(path)?)
        .map_err(|e| Error::Config(format!("{}: {}", path.display(), e.to_string().trim_start_matches("invalid configuration: "))))?;
    if let Some(r) = replicates {
        cfg.replicates = r;
    }
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    eprintln!("seed: {}", cfg.master_seed);
    Ok(cfg)
}

fn load_session(path: &Path) -> CliResult<SessionFile> {
    SessionFile::from_json(&read(path)?)
        .map_err(|e| Error::Config(format!("{}: {}", path.display(), e.to_string().trim_start_matches("invalid configuration: "))))
}

#[derive(Serialize)]
struct FodOutput<'a> {
    model: &'a str,
    criterion: String,
    p: usize,
    support: &'a [usize],
    weights: &'a [f64],
    points: Vec<Vec<f64>>,
    criterion_value: f64,
    iterations: usize,
    get_violation: f64,
    worst_point: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_counts: Option<Vec<usize>>,
}

#[derive(Serialize)]
struct Table1Csv<'a> {
    family: String,
    s: usize,
    p: usize,
    criterion: &'a str,
    #[serde(rename = "R_star")]
    r_star: Option<f64>,
    psi_star: Option<f64>,
    d: Option<usize>,
    error: Option<&'a str>,
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fod { model, criterion, max_iter, tol, n, out } => {
            let spec = load_model(&model)?;
            let crit = Criterion::parse(&criterion)?;
            let opts = FodOptions { max_iter, tol, ..Default::default() };
            let fod = solve_fod(&spec, &crit, None, &opts)?;
            let exact_counts = match n {
                Some(n) => Some(round_to_exact(&fod.design, n)?.counts),
                None => None,
            };
            let body = to_json(&FodOutput {
                model: spec.name(),
                criterion: crit.to_string(),
                p: spec.p(),
                support: &fod.design.support,
                weights: &fod.design.weights,
                points: fod.design.support.iter().map(|&i| spec.candidate(i).to_vec()).collect(),
                criterion_value: fod.criterion_value,
                iterations: fod.iterations,
                get_violation: fod.get_violation,
                worst_point: fod.worst_point,
                exact_counts,
            });
            emit(out.as_deref(), &body)
        }
        Command::Table1 { max_s, quadratic_max_s, criteria, out } => {
            let crits: Vec<Criterion> =
                criteria.split(',').filter(|c| !c.trim().is_empty()).map(Criterion::parse).collect::<Result<_, _>>()?;
            if crits.is_empty() || max_s == 0 {
                return Err(Error::Config("table1 needs --max-s ≥ 1 and at least one criterion".into()));
            }
            let rows = table1(max_s, quadratic_max_s, &crits);
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in &rows {
                w.serialize(Table1Csv {
                    family: r.family.to_string(),
                    s: r.s,
                    p: r.p,
                    criterion: &r.criterion,
                    r_star: r.r_star,
                    psi_star: r.psi_star,
                    d: r.d,
                    error: r.error.as_deref(),
                })
                .map_err(|e| Error::Config(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
            emit(out.as_deref(), &String::from_utf8(bytes).expect("csv output is utf-8"))?;
            if let Some(bad) = rows.iter().find(|r| r.error.is_some()) {
                return Err(Error::Curvature(format!(
                    "{} s={} {}: {}",
                    bad.family,
                    bad.s,
                    bad.criterion,
                    bad.error.as_deref().unwrap_or_default()
                )));
            }
            Ok(())
        }
        Command::Simulate { config, out, replicates, seed, workers, format } => {
            let cfg = load_sim_config(&config, replicates, seed)?;
            let start = Instant::now();
            let mut res = par::with_workers(workers, || run_sim(&cfg))?;
            res.wall_seconds = Some(start.elapsed().as_secs_f64());
            let fmt = match format {
                Some(Format::Csv) => OutputFormat::Csv,
                Some(Format::Json) => OutputFormat::Json,
                None => OutputFormat::from_path(&out),
            };
            write_atomic(&out, &render_results(&res, fmt)?)?;
            eprintln!("wrote {} ({:.1} s)", out.display(), res.wall_seconds.unwrap_or_default());
            Ok(())
        }
        Command::Power { config, out, replicates, seed, workers } => {
            let cfg = load_sim_config(&config, replicates, seed)?;
            let start = Instant::now();
            let mut curve = par::with_workers(workers, || power_curve(&cfg))?;
            curve.result.wall_seconds = Some(start.elapsed().as_secs_f64());
            #[derive(Serialize)]
            struct PowerOutput<'a> {
                seed: u64,
                replicates: usize,
                target: f64,
                points: &'a [oadlab::sim::PowerPoint],
                min_n: Vec<(&'static str, Option<f64>)>,
                wall_seconds: Option<f64>,
            }
            let body = to_json(&PowerOutput {
                seed: cfg.master_seed,
                replicates: cfg.replicates,
                target: curve.target,
                points: &curve.points,
                min_n: curve.min_n.iter().map(|(a, n)| (a.label(), *n)).collect(),
                wall_seconds: curve.result.wall_seconds,
            });
            emit(out.as_deref(), &body)
        }
        Command::Fit { session, alpha, c, c0 } => {
            let s = load_session(&session)?;
            let test = c.map(|c| TestRequest { c, c0, alpha });
            let fit = fit_session(&s, alpha, test.as_ref())?;
            emit(None, &to_json(&fit))
        }
        Command::RoadNext { session } => {
            let s = load_session(&session)?;
            emit(None, &to_json(&recommend(&s)?))
        }
        Command::Curvature { model, criterion, error_model, n, hessian } => {
            let spec = load_model(&model)?;
            let crit = Criterion::parse(&criterion)?;
            let err = ErrorModel::parse(&error_model)?;
            let fod = solve_fod(&spec, &crit, None, &FodOptions::default())?;
            let method = match hessian {
                Hessian::Fd => HessianMethod::FiniteDifference,
                Hessian::Analytic => HessianMethod::Analytic,
                Hessian::Auto => HessianMethod::Auto,
            };
            emit(None, &to_json(&curvature_report(&spec, &crit, &fod, &err, n, method)?))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 3 })
        }
    }
}
