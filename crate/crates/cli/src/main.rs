//! `curetest` command-line interface.

mod load;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use curetest::bootstrap::{EstimatorBandwidth, GridSpec, StatisticBandwidth};
use curetest::estimators::{cure_rate_at, km_censoring, km_survival, stratified_km, Conditioner, StepCurve};
use curetest::sim::{preset, run_monte_carlo, MonteCarloConfig, RejectionTable};
use curetest::{maller_zhou, run_test, Case, CovariateKind, Design, Error, TestConfig, TestResult};
use serde::Serialize;

use load::{declarations, load_csv, parse_kinds};

#[derive(Parser)]
#[command(
    name = "curetest",
    version,
    about = "Nonparametric covariate tests for the cure probability"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bootstrap test of a covariate effect on the cure probability.
    Test(TestArgs),
    /// Maller-Zhou test for sufficient follow-up.
    Followup(InputArgs),
    /// Export estimated curves as CSV.
    Curves(CurvesArgs),
    /// Monte Carlo rejection rates for a named scenario set.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct InputArgs {
    /// CSV file with `time`, `status` and covariate columns.
    #[arg(long)]
    input: PathBuf,
    /// Conditioning covariates (comma-separated).
    #[arg(long = "x-cols", value_delimiter = ',')]
    x_cols: Vec<String>,
    /// Tested covariates (comma-separated).
    #[arg(long = "z-cols", value_delimiter = ',')]
    z_cols: Vec<String>,
    /// Covariate kinds, e.g. `age=continuous,stage=discrete,site=nominal:colon|rectum`.
    #[arg(long, default_value = "")]
    kinds: String,
    /// Output file (or directory for `curves`); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    input: InputArgs,
    /// 1: constant cure rate in Z; 2: one conditioning covariate X; 3: continuous X block.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    case: u8,
    /// Bootstrap resamples.
    #[arg(long = "B", default_value_t = 500)]
    b: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Random seed; generated and printed when absent.
    #[arg(long)]
    seed: Option<u64>,
    /// Test-statistic bandwidths (comma-separated) for a continuous X block.
    #[arg(long = "h-grid", value_delimiter = ',')]
    h_grid: Vec<f64>,
    /// Fixed bandwidth for the conditional estimators instead of cross-validation.
    #[arg(long = "estimator-h")]
    estimator_h: Option<f64>,
    /// Cross-validation grid `d_min:d_max:count:rate`.
    #[arg(long = "cv-grid")]
    cv_grid: Option<String>,
    /// Disable the `1 − 1/n` cap on the censoring distribution at the cure threshold.
    #[arg(long)]
    no_cap: bool,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct CurvesArgs {
    #[command(flatten)]
    input: InputArgs,
    /// `km`, `censoring`, `cure:COLUMN` or `strata:COLUMN`; repeatable.
    #[arg(long = "curve", required = true)]
    curves: Vec<String>,
    /// Grid points for cure-rate curves over a continuous covariate.
    #[arg(long, default_value_t = 50)]
    points: usize,
    /// Smoothing bandwidth for cure-rate curves; cross-validated when absent.
    #[arg(long)]
    h: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario set: table1, table2, table3, table4-discrete or table5-continuous.
    #[arg(long)]
    scenario: String,
    /// Sample sizes (comma-separated).
    #[arg(long, value_delimiter = ',', default_value = "100")]
    n: Vec<usize>,
    /// Monte Carlo replications per cell.
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long = "B", default_value_t = 500)]
    b: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Output prefix; writes `<prefix>.csv` and `<prefix>.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(0);
        eprintln!("seed: {s}");
        s
    })
}

fn load_design(args: &InputArgs) -> Result<Design> {
    let kinds = parse_kinds(&args.kinds)?;
    let decls = declarations(&args.x_cols, &args.z_cols, &kinds)?;
    let sample = load_csv(&args.input, &decls)?;
    Ok(Design::from_sample(&sample)?)
}

fn emit(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, content).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn parse_cv_grid(s: &str) -> Result<GridSpec> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 4 {
        bail!("--cv-grid expects d_min:d_max:count:rate, got `{s}`");
    }
    let num = |i: usize| {
        parts[i]
            .parse::<f64>()
            .map_err(|_| anyhow!("--cv-grid: cannot parse `{}`", parts[i]))
    };
    Ok(GridSpec {
        d_min: num(0)?,
        d_max: num(1)?,
        count: parts[2]
            .parse()
            .map_err(|_| anyhow!("--cv-grid: cannot parse `{}`", parts[2]))?,
        rate: num(3)?,
    })
}

#[derive(Serialize)]
struct TestReport<'a> {
    command: &'static str,
    input: String,
    n: usize,
    case: Case,
    results: &'a [TestResult],
}

fn fmt_h(h: Option<f64>) -> String {
    h.map(|h| h.to_string()).unwrap_or_default()
}

fn cmd_test(args: TestArgs) -> Result<()> {
    let design = load_design(&args.input)?;
    let case = match args.case {
        1 => Case::One,
        2 => Case::Two,
        _ => Case::Three,
    };
    let mut cfg = TestConfig::new(case, args.b, args.alpha, resolve_seed(args.seed));
    if let Some(h) = args.estimator_h {
        cfg.estimator_bandwidth = EstimatorBandwidth::Fixed(h);
    } else if let Some(g) = &args.cv_grid {
        cfg.estimator_bandwidth = EstimatorBandwidth::Cv(parse_cv_grid(g)?);
    }
    if !args.h_grid.is_empty() {
        cfg.statistic_bandwidth = StatisticBandwidth::Values(args.h_grid.clone());
    }
    cfg.cap_saturation = !args.no_cap;
    cfg.threads = args.threads;

    let results = run_test(&design, &cfg)?;
    for r in &results {
        let h = r
            .bandwidths
            .statistic
            .map(|h| format!(" (h={h:.4})"))
            .unwrap_or_default();
        eprintln!(
            "CM = {:.6}, critical {:.6}, p_CM = {:.3}{}{h}",
            r.cm_obs,
            r.cm_crit,
            r.p_cm,
            if r.reject_cm { ", reject" } else { "" }
        );
        eprintln!(
            "K  = {:.6}, critical {:.6}, p_K = {:.3}{}{h}",
            r.k_obs,
            r.k_crit,
            r.p_k,
            if r.reject_k { ", reject" } else { "" }
        );
    }
    let content = match args.format {
        Format::Json => {
            let report = TestReport {
                command: "test",
                input: args.input.input.display().to_string(),
                n: design.len(),
                case,
                results: &results,
            };
            serde_json::to_string_pretty(&report)? + "\n"
        }
        Format::Csv => {
            let mut s = String::from("h,cm_obs,cm_crit,p_cm,reject_cm,k_obs,k_crit,p_k,reject_k,b_effective\n");
            for r in &results {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    fmt_h(r.bandwidths.statistic),
                    r.cm_obs,
                    r.cm_crit,
                    r.p_cm,
                    r.reject_cm,
                    r.k_obs,
                    r.k_crit,
                    r.p_k,
                    r.reject_k,
                    r.b_effective
                ));
            }
            s
        }
    };
    emit(args.input.out.as_deref(), &content)
}

fn cmd_followup(args: InputArgs) -> Result<()> {
    let design = load_design(&args)?;
    let r = maller_zhou(&design)?;
    emit(args.out.as_deref(), &(serde_json::to_string_pretty(&r)? + "\n"))
}

fn curve_csv(header: &str, c: &StepCurve) -> String {
    let mut s = format!("{header}\n");
    for (t, v) in c.jump_times().iter().zip(c.values()) {
        s.push_str(&format!("{t},{v}\n"));
    }
    s
}

fn column_of(design: &Design, name: &str) -> Result<usize> {
    design
        .spec()
        .position(name)
        .ok_or_else(|| anyhow!("curve column `{name}` is not a declared covariate"))
}

fn cure_curve(design: &Design, col: usize, points: usize, h: Option<f64>) -> Result<String> {
    let spec = design.spec();
    let name = &spec.entries()[col].name;
    let mut s = format!("{name},cure_rate\n");
    let mut query = vec![0.0; spec.len()];
    match spec.kind(col) {
        CovariateKind::Continuous => {
            let h = match h {
                Some(h) => h,
                None => {
                    let g = GridSpec::UNIVARIATE;
                    let grid = curetest::bandwidth::make_grid(g.d_min, g.d_max, g.count, g.rate, design.len())?;
                    curetest::bandwidth::cv_bandwidth(design, &[col], &grid, curetest::bandwidth::CvTarget::Survival)?
                }
            };
            let cond = Conditioner::for_columns(spec, &[col], Some(h))?;
            let values = design.column(col);
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for k in 0..points {
                let x = if points == 1 {
                    lo
                } else {
                    lo + (hi - lo) * k as f64 / (points - 1) as f64
                };
                query[col] = x;
                match cure_rate_at(design, &cond, &query) {
                    Ok(v) => s.push_str(&format!("{x},{v}\n")),
                    Err(e) => eprintln!("error: cure:{name} at {x}: {e}"),
                }
            }
        }
        kind => {
            let cond = Conditioner::for_columns(spec, &[col], None)?;
            for (code, label) in levels(design, col, kind) {
                query[col] = code;
                match cure_rate_at(design, &cond, &query) {
                    Ok(v) => s.push_str(&format!("{label},{v}\n")),
                    Err(Error::AllWeightsZero) => eprintln!(
                        "error: cure:{name} level {label}: {}",
                        Error::EmptyStratum(label.clone())
                    ),
                    Err(e) => eprintln!("error: cure:{name} level {label}: {e}"),
                }
            }
        }
    }
    Ok(s)
}

/// `(code, label)` of every level: declared levels for nominal covariates,
/// observed values otherwise.
fn levels(design: &Design, col: usize, kind: &CovariateKind) -> Vec<(f64, String)> {
    match kind {
        CovariateKind::Nominal(labels) => labels.iter().enumerate().map(|(i, l)| (i as f64, l.clone())).collect(),
        _ => {
            let mut v = design.column(col).to_vec();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v.into_iter().map(|x| (x, x.to_string())).collect()
        }
    }
}

fn strata_curves(design: &Design, col: usize) -> Result<String> {
    let spec = design.spec();
    let name = &spec.entries()[col].name;
    if spec.kind(col).is_continuous() {
        bail!("strata:{name} needs a discrete or nominal covariate");
    }
    let mut s = String::from("level,time,survival\n");
    for (code, label) in levels(design, col, spec.kind(col)) {
        match stratified_km(design, col, code) {
            Ok(c) => {
                for (t, v) in c.jump_times().iter().zip(c.values()) {
                    s.push_str(&format!("{label},{t},{v}\n"));
                }
            }
            Err(e) => eprintln!("error: strata:{name} level {label}: {e}"),
        }
    }
    Ok(s)
}

fn cmd_curves(args: CurvesArgs) -> Result<()> {
    let design = load_design(&args.input)?;
    if let Some(dir) = &args.input.out {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let mut failed = 0;
    for spec in &args.curves {
        let (file, content) = match spec.split_once(':') {
            None if spec == "km" => (
                "km.csv".to_string(),
                Ok(curve_csv("time,survival", &km_survival(&design))),
            ),
            None if spec == "censoring" => (
                "censoring.csv".to_string(),
                Ok(curve_csv("time,censoring_survival", &km_censoring(&design))),
            ),
            Some(("cure", col)) => (
                format!("cure_{col}.csv"),
                column_of(&design, col).and_then(|c| cure_curve(&design, c, args.points, args.h)),
            ),
            Some(("strata", col)) => (
                format!("strata_{col}.csv"),
                column_of(&design, col).and_then(|c| strata_curves(&design, c)),
            ),
            _ => (String::new(), Err(anyhow!("unknown curve `{spec}`"))),
        };
        match content {
            Ok(content) => match &args.input.out {
                Some(dir) => emit(Some(&dir.join(&file)), &content)?,
                None => print!("# {spec}\n{content}"),
            },
            Err(e) => {
                eprintln!("error: {spec}: {e}");
                failed += 1;
            }
        }
    }
    if failed == args.curves.len() {
        bail!("no curve could be computed");
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulationReport<'a> {
    scenario: &'a str,
    sample_sizes: &'a [usize],
    runtime_seconds: f64,
    table: &'a RejectionTable,
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let scenarios = preset(&args.scenario)?;
    let mut cfg = MonteCarloConfig::new(scenarios, args.n.clone(), args.reps, args.b, resolve_seed(args.seed));
    cfg.alpha = args.alpha;
    cfg.threads = args.threads;
    let start = Instant::now();
    let table = run_monte_carlo(&cfg)?;
    let report = SimulationReport {
        scenario: &args.scenario,
        sample_sizes: &args.n,
        runtime_seconds: start.elapsed().as_secs_f64(),
        table: &table,
    };
    let json = serde_json::to_string_pretty(&report)? + "\n";
    for f in &table.failures {
        eprintln!("warning: {f}");
    }
    match &args.out {
        Some(prefix) => {
            emit(Some(&prefix.with_extension("csv")), &table.to_csv())?;
            emit(Some(&prefix.with_extension("json")), &json)
        }
        None => match args.format {
            Format::Csv => emit(None, &table.to_csv()),
            Format::Json => emit(None, &json),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Followup(a) => cmd_followup(a),
        Command::Curves(a) => cmd_curves(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if matches!(e.downcast_ref::<Error>(), Some(Error::NoEvents)) {
                ExitCode::from(3)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
