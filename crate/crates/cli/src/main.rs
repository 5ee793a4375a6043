//! `parconf` command-line interface: fit a model to CSV data, compute
//! prediction regions for its rows, or run a simulation study.
//!
//! Exit status is 0 on success, 1 for invalid input or configuration and 2
//! for numerical failures.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use parconf::baseline::KernelConfig;
use parconf::conformal::ConformalConfig;
use parconf::glm::{fit_mle, Family, Link, ModelSpec};
use parconf::io::{format_value, load_csv, write_regions, write_study_report, RegionRecord};
use parconf::methods::{compute_regions, Method, RegionSettings};
use parconf::partition::{default_bins_per_dim, BinPartition};
use parconf::sim::{run_study, Evaluation, SettingId, SimSetting, StudyConfig};
use parconf::Error;

#[derive(Parser, Debug)]
#[command(
    name = "parconf",
    version,
    about = "Parametric conformal prediction regions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a GLM by maximum likelihood and print its parameters.
    Fit(FitArgs),
    /// Compute prediction regions at every data row (or at query points).
    Predict(PredictArgs),
    /// Run a Monte Carlo study for a simulation setting.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// CSV file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Response column.
    #[arg(long)]
    response: String,
    /// Comma-separated predictor columns.
    #[arg(long, value_delimiter = ',', required = true)]
    predictors: Vec<String>,
    #[arg(long, default_value = "gaussian")]
    family: String,
    /// Defaults to identity for gaussian and inverse for gamma.
    #[arg(long)]
    link: Option<String>,
    /// Polynomial degree of each main effect.
    #[arg(long, default_value_t = 1)]
    degree: usize,
}

impl ModelArgs {
    fn spec(&self) -> parconf::Result<ModelSpec> {
        let family: Family = self.family.parse()?;
        let link = match &self.link {
            Some(l) => l.parse()?,
            None => match family {
                Family::Gaussian => Link::Identity,
                Family::Gamma => Link::Inverse,
            },
        };
        ModelSpec::new(family, link, self.degree)
    }
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    method: String,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Boundary resolution of the line search.
    #[arg(long, default_value_t = 0.005)]
    precision: f64,
    /// Bins per predictor (default: 2 below 250 rows, else 3).
    #[arg(long)]
    bins: Option<usize>,
    /// Candidate grid size for the ls and lslw methods.
    #[arg(long, default_value_t = 100)]
    grid_points: usize,
    /// Bin only along this (binary) predictor column.
    #[arg(long)]
    partition_by: Option<String>,
    /// Fixed kernel bandwidth (default: Silverman's rule per bin).
    #[arg(long)]
    bandwidth: Option<f64>,
    /// CSV of predictor values to predict at, instead of the data rows.
    #[arg(long)]
    query: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    setting: String,
    #[arg(long, default_value_t = 150)]
    n: usize,
    #[arg(long, default_value_t = 250)]
    reps: usize,
    /// Gamma shape for settings A and B.
    #[arg(long)]
    shape: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated methods (default: all six).
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long, default_value_t = 0.005)]
    precision: f64,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long, default_value_t = 100)]
    grid_points: usize,
    /// Evaluate on this many fresh points per replication instead of the training sample.
    #[arg(long)]
    held_out: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Fit(args) => fit(args),
        Command::Predict(args) => predict(args),
        Command::Simulate(args) => simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn check_alpha(alpha: f64) -> parconf::Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("alpha {alpha} outside (0, 1)")))
    }
}

fn create(path: &PathBuf) -> parconf::Result<BufWriter<File>> {
    if path.as_os_str().is_empty() {
        return Err(Error::Config("output path is empty".into()));
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn fit(args: FitArgs) -> parconf::Result<()> {
    let spec = args.model.spec()?;
    let loaded = load_csv(
        &args.model.data,
        &args.model.response,
        &args.model.predictors,
    )?;
    if loaded.dropped > 0 {
        eprintln!("dropped {} incomplete rows", loaded.dropped);
    }
    let design = loaded.dataset.design(&spec)?;
    let model = fit_mle(&spec, &design, loaded.dataset.response(), None)?;
    let mut names = vec!["(intercept)".to_string()];
    for p in &loaded.predictors {
        for k in 1..=spec.degree() {
            names.push(if k == 1 {
                p.clone()
            } else {
                format!("{p}^{k}")
            });
        }
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "model,{spec}")?;
    writeln!(out, "rows,{}", loaded.dataset.n())?;
    for (name, b) in names.iter().zip(model.beta()) {
        writeln!(out, "beta[{name}],{}", format_value(*b))?;
    }
    let dispersion = match spec.family() {
        Family::Gaussian => "variance",
        Family::Gamma => "shape",
    };
    writeln!(out, "{dispersion},{}", format_value(model.dispersion()))?;
    writeln!(
        out,
        "log_likelihood,{}",
        format_value(model.log_likelihood())
    )?;
    writeln!(out, "iterations,{}", model.iterations())?;
    writeln!(out, "converged,{}", model.converged())?;
    writeln!(out, "note,predictors are min-max scaled to [0, 1]")?;
    Ok(())
}

fn predict(args: PredictArgs) -> parconf::Result<()> {
    let method: Method = args.method.parse()?;
    check_alpha(args.alpha)?;
    let spec = args.model.spec()?;
    let loaded = load_csv(
        &args.model.data,
        &args.model.response,
        &args.model.predictors,
    )?;
    if loaded.dropped > 0 {
        eprintln!("dropped {} incomplete rows", loaded.dropped);
    }
    let data = &loaded.dataset;
    let d = data.d();

    let partition = match &args.partition_by {
        Some(col) => {
            let axis = loaded.predictor_index(col).ok_or_else(|| {
                Error::Config(format!("--partition-by column '{col}' is not a predictor"))
            })?;
            BinPartition::along(d, axis, args.bins.unwrap_or(2))?
        }
        None => BinPartition::uniform(
            d,
            args.bins.unwrap_or_else(|| default_bins_per_dim(data.n())),
        )?,
    };

    let points: Vec<Vec<f64>> = match &args.query {
        None => (0..data.n()).map(|i| data.x(i).to_vec()).collect(),
        Some(path) => {
            let file = File::open(path)
                .map_err(|e| Error::InvalidInput(format!("cannot open {}: {e}", path.display())))?;
            loaded.read_points(file)?
        }
    };

    let settings = RegionSettings {
        conformal: ConformalConfig {
            alpha: args.alpha,
            precision: args.precision,
            ..ConformalConfig::default()
        },
        grid_points: args.grid_points,
        kernel: match args.bandwidth {
            Some(h) => KernelConfig::fixed(h),
            None => KernelConfig::default(),
        },
    };
    let method_spec = match method {
        Method::Ls | Method::Lslw => Some(ModelSpec::gaussian(spec.degree())?),
        _ => Some(spec),
    };
    let (regions, rejected) =
        compute_regions(method, method_spec, data, &points, &partition, &settings)?;
    if rejected > 0 {
        eprintln!("{rejected} candidate tests failed and were treated as rejections");
    }
    let empty = regions.iter().filter(|r| r.is_empty()).count();
    if empty > 0 {
        eprintln!("{empty} query points have an empty region");
    }
    let records: Vec<RegionRecord> = regions
        .into_iter()
        .zip(&points)
        .enumerate()
        .map(|(i, (region, x))| RegionRecord {
            row_id: i,
            predictors: loaded.unscale(x),
            region,
        })
        .collect();
    let mut out = create(&args.out)?;
    write_regions(&mut out, &loaded.predictors, &records)?;
    out.flush()?;
    Ok(())
}

fn simulate(args: SimulateArgs) -> parconf::Result<()> {
    let id: SettingId = args.setting.parse()?;
    check_alpha(args.alpha)?;
    if args.reps == 0 {
        return Err(Error::Config("--reps must be at least 1".into()));
    }
    let setting = SimSetting::new(id, args.n, args.shape)?;
    let methods: Vec<Method> = if args.methods.is_empty() {
        Method::ALL.to_vec()
    } else {
        args.methods
            .iter()
            .map(|m| m.parse())
            .collect::<parconf::Result<_>>()?
    };
    let config = StudyConfig {
        conformal: ConformalConfig {
            alpha: args.alpha,
            precision: args.precision,
            ..ConformalConfig::default()
        },
        grid_points: args.grid_points,
        bins: args.bins,
        evaluation: args
            .held_out
            .map_or(Evaluation::Training, Evaluation::HeldOut),
        ..StudyConfig::default()
    };
    config.validate()?;
    let mut out = create(&args.out)?;
    let report = run_study(&setting, &methods, args.reps, &config, args.seed)?;
    for s in report.methods.values() {
        if s.skipped > 0 {
            eprintln!(
                "{}: skipped {} replications (first error: {})",
                s.method,
                s.skipped,
                s.first_error.as_deref().unwrap_or("unknown")
            );
        }
    }
    write_study_report(&mut out, &report)?;
    out.flush()?;
    Ok(())
}
