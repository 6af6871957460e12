//! `pathloss`: simulate, fit and compare censored pathloss measurements.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use censored_pathloss::avar::estimate_standard_errors;
use censored_pathloss::io::{
    emit_plot_data, file_digest, parse_float, read_dataset, read_experiment_spec, read_result,
    write_dataset, write_json, write_result, write_svg, Curve, DatasetSummary, FitReport,
    InputInfo, OlsSection, Overrides, TobitSection,
};
use censored_pathloss::model::{
    fspl_reference, generate_synthetic, spaced_distances, Dataset, PathlossParams, Spacing,
};
use censored_pathloss::montecarlo::run_experiment;
use censored_pathloss::ols::{ols_fit, CensoredHandling};
use censored_pathloss::tobit::{tobit_fit, FitOptions};
use censored_pathloss::Error;

/// Seed used when `--seed` is not given.
const DEFAULT_SEED: u64 = 1;

const EXIT_FAILURE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "pathloss",
    version,
    about = "Pathloss model estimation from noise-floor censored measurements"
)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate censored synthetic measurements.
    Simulate(SimulateArgs),
    /// Fit OLS and/or Tobit models to a measurement file.
    Fit(FitArgs),
    /// Run a Monte-Carlo study described by a TOML spec.
    Experiment(ExperimentArgs),
    /// Draw a measurement file with the fits stored in a result file.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SpacingArg {
    Log,
    Linear,
}

#[derive(Args)]
struct SimulateArgs {
    /// Pathloss exponent n (dimensionless).
    #[arg(long)]
    n: f64,
    /// Shadowing standard deviation σ, dB.
    #[arg(long)]
    sigma: f64,
    /// Pathloss at the reference distance, dB. Defaults to free-space loss at --frequency-hz.
    #[arg(long, allow_hyphen_values = true)]
    pl_d0: Option<f64>,
    /// Carrier frequency, Hz. Written to the file header.
    #[arg(long)]
    frequency_hz: Option<f64>,
    /// Reference distance d0, meters.
    #[arg(long, default_value_t = 1.0)]
    d0: f64,
    /// Smallest distance, meters (at least d0).
    #[arg(long)]
    dmin: f64,
    /// Largest distance, meters.
    #[arg(long)]
    dmax: f64,
    /// Number of samples.
    #[arg(long)]
    count: usize,
    /// Distance spacing between dmin and dmax.
    #[arg(long, value_enum, default_value = "log")]
    spacing: SpacingArg,
    /// Censoring level, dB; values at or above it are recorded as censored. `inf` disables censoring.
    #[arg(long, value_parser = level)]
    c: f64,
    /// Random seed.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output measurement file (CSV).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EstimatorArg {
    Ols,
    Tobit,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum CensoredModeArg {
    /// Censored rows enter OLS at the censoring level.
    Substitute,
    /// Censored rows are left out of OLS.
    Drop,
}

#[derive(Clone, Copy, Debug)]
enum FixPl {
    Fspl,
    Value(f64),
}

fn fix_pl(s: &str) -> Result<FixPl, String> {
    if s.eq_ignore_ascii_case("fspl") {
        return Ok(FixPl::Fspl);
    }
    match parse_float(s) {
        Some(v) if v.is_finite() => Ok(FixPl::Value(v)),
        _ => Err(format!("expected `fspl` or a finite dB value, got {s:?}")),
    }
}

fn level(s: &str) -> Result<f64, String> {
    parse_float(s).ok_or_else(|| format!("expected a number or `inf`, got {s:?}"))
}

#[derive(Args)]
struct FitArgs {
    /// Measurement file (CSV).
    #[arg(long)]
    input: PathBuf,
    /// Result file (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Estimators to run.
    #[arg(long, value_enum, default_value = "both")]
    estimator: EstimatorArg,
    /// How OLS treats censored rows.
    #[arg(long, value_enum, default_value = "substitute")]
    censored_mode: CensoredModeArg,
    /// Reference distance d0, meters; overrides the file header.
    #[arg(long)]
    d0: Option<f64>,
    /// Censoring level, dB; overrides the file header. `inf` allowed.
    #[arg(long, value_parser = level)]
    c: Option<f64>,
    /// Carrier frequency, Hz; overrides the file header.
    #[arg(long)]
    frequency_hz: Option<f64>,
    /// Hold PL(d0) fixed in the Tobit fit: `fspl` (free-space loss at the file's frequency_hz) or a value in dB.
    #[arg(long, value_parser = fix_pl, allow_hyphen_values = true)]
    fix_pl_d0: Option<FixPl>,
    /// Also write long-format plot data (CSV).
    #[arg(long)]
    plot_data: Option<PathBuf>,
    /// Also write an SVG plot.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Simplex iteration cap per Tobit search.
    #[arg(long, default_value_t = 2000)]
    max_iter: usize,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment spec (TOML).
    #[arg(long)]
    spec: PathBuf,
    /// Report file (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("output").required(true).multiple(true).args(["svg", "plot_data"]))]
struct PlotArgs {
    /// Measurement file (CSV).
    #[arg(long)]
    input: PathBuf,
    /// Result file written by `pathloss fit` (JSON).
    #[arg(long)]
    result: PathBuf,
    /// Reference distance d0, meters; overrides the file header.
    #[arg(long)]
    d0: Option<f64>,
    /// Censoring level, dB; overrides the file header.
    #[arg(long, value_parser = level)]
    c: Option<f64>,
    /// SVG output.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Long-format plot data output (CSV).
    #[arg(long)]
    plot_data: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Write { .. } => EXIT_FAILURE,
            _ => EXIT_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: message.into(),
    }
}

fn simulate(args: &SimulateArgs) -> Result<u8, Failure> {
    let pl_d0 = match (args.pl_d0, args.frequency_hz) {
        (Some(pl), _) => pl,
        (None, Some(f)) => fspl_reference(f, args.d0)?,
        (None, None) => return Err(input_error("give --pl-d0 or --frequency-hz")),
    };
    let params = PathlossParams::new(pl_d0, args.n, args.sigma)?;
    let spacing = match args.spacing {
        SpacingArg::Log => Spacing::Log,
        SpacingArg::Linear => Spacing::Linear,
    };
    let distances = spaced_distances(spacing, args.dmin, args.dmax, args.count)?;
    let raw = generate_synthetic(&params, &distances, args.d0, args.seed)?;
    let dataset = Dataset::from_raw(&raw, args.d0, args.c)?.with_frequency(args.frequency_hz)?;
    write_dataset(&args.out, &dataset)?;
    println!(
        "censored fraction: {:.4} ({} of {})",
        dataset.censored_fraction(),
        dataset.n_censored(),
        dataset.len()
    );
    Ok(0)
}

fn fit(args: &FitArgs) -> Result<u8, Failure> {
    if args.fix_pl_d0.is_some() && args.estimator == EstimatorArg::Ols {
        return Err(input_error(
            "--fix-pl-d0 applies to the Tobit fit; it cannot be used with --estimator ols",
        ));
    }
    let overrides = Overrides {
        d0: args.d0,
        c: args.c,
        frequency_hz: args.frequency_hz,
    };
    let dataset = read_dataset(&args.input, &overrides)?;
    let fixed = match args.fix_pl_d0 {
        None => None,
        Some(FixPl::Value(v)) => Some(v),
        Some(FixPl::Fspl) => {
            let f = dataset
                .frequency_hz()
                .ok_or(Error::MissingKey("frequency_hz"))?;
            Some(fspl_reference(f, dataset.d0())?)
        }
    };
    log::info!(
        "{} samples, {} censored at c = {} dB",
        dataset.len(),
        dataset.n_censored(),
        dataset.c()
    );

    let mut report = FitReport {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        input: InputInfo {
            path: args.input.clone(),
            sha256: file_digest(&args.input)?,
        },
        dataset: DatasetSummary::of(&dataset),
        ols: None,
        tobit: None,
    };
    let mut curves = Vec::new();
    let mut code = 0;

    if args.estimator != EstimatorArg::Tobit {
        let mode = match args.censored_mode {
            CensoredModeArg::Substitute => CensoredHandling::SubstituteC,
            CensoredModeArg::Drop => CensoredHandling::DropCensored,
        };
        let ols = ols_fit(&dataset, mode)?;
        println!(
            "ols   PL(d0) = {:.4} dB (se {:.4})  n = {:.4} (se {:.4})  sigma = {:.4} dB",
            ols.params.pl_d0, ols.se_pl_d0, ols.params.n, ols.se_n, ols.params.sigma
        );
        let label = match mode {
            CensoredHandling::SubstituteC => "ols_substitute_c",
            CensoredHandling::DropCensored => "ols_drop",
        };
        curves.push(Curve {
            label,
            params: ols.params,
        });
        report.ols = Some(OlsSection::from(&ols));
    }

    if args.estimator != EstimatorArg::Ols {
        let mut options = FitOptions {
            fixed_pl_d0: fixed,
            ..FitOptions::default()
        };
        options.simplex.max_iter = args.max_iter;
        let tobit = tobit_fit(&dataset, &options)?;
        let se = estimate_standard_errors(&tobit, &dataset);
        let section = TobitSection::new(&tobit, &se);
        let fmt_se = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        println!(
            "tobit PL(d0) = {:.4} dB (se {})  n = {:.4} (se {})  sigma = {:.4} dB (se of sigma^2 {})",
            tobit.params.pl_d0,
            fmt_se(section.se_pl_d0),
            tobit.params.n,
            fmt_se(section.se_n),
            tobit.params.sigma,
            fmt_se(section.se_sigma_sq)
        );
        if let Err(e) = &se {
            log::warn!("standard errors unavailable: {e}");
        }
        if !tobit.converged {
            eprintln!(
                "tobit fit did not converge after {} iterations",
                tobit.iterations
            );
            code = EXIT_NOT_CONVERGED;
        }
        curves.push(Curve {
            label: "tobit",
            params: tobit.params,
        });
        report.tobit = Some(section);
    }

    write_result(&args.out, &report)?;
    if let Some(path) = &args.plot_data {
        emit_plot_data(path, &dataset, &curves)?;
    }
    if let Some(path) = &args.svg {
        write_svg(path, &dataset, &curves)?;
    }
    Ok(code)
}

fn experiment(args: &ExperimentArgs) -> Result<u8, Failure> {
    let spec = read_experiment_spec(&args.spec)?;
    let report = run_experiment(&spec)?;
    write_json(&args.out, &report)?;
    println!(
        "c = {} dB, mean censored fraction {:.4}",
        report.c, report.mean_censored_fraction
    );
    for s in &report.summaries {
        let calibration = s.calibration.map_or_else(String::new, |c| {
            format!("  se calibration n {:.3} PL(d0) {:.3}", c.n, c.pl_d0)
        });
        println!(
            "{:<16} n bias {:+.4} (se {:.4})  sigma bias {:+.4} (se {:.4})  failures {}{}",
            s.estimator.name(),
            s.bias.n,
            s.se_of_mean.n,
            s.bias.sigma,
            s.se_of_mean.sigma,
            s.failures,
            calibration
        );
    }
    Ok(0)
}

fn plot(args: &PlotArgs) -> Result<u8, Failure> {
    let overrides = Overrides {
        d0: args.d0,
        c: args.c,
        frequency_hz: None,
    };
    let dataset = read_dataset(&args.input, &overrides)?;
    let result = read_result(&args.result)?;
    let mut curves = Vec::new();
    if let Some(ols) = &result.ols {
        let label = match ols.mode {
            CensoredHandling::SubstituteC => "ols_substitute_c",
            CensoredHandling::DropCensored => "ols_drop",
        };
        curves.push(Curve {
            label,
            params: PathlossParams {
                pl_d0: ols.pl_d0,
                n: ols.n,
                sigma: ols.sigma,
            },
        });
    }
    if let Some(t) = &result.tobit {
        curves.push(Curve {
            label: "tobit",
            params: PathlossParams {
                pl_d0: t.pl_d0,
                n: t.n,
                sigma: t.sigma,
            },
        });
    }
    if let Some(path) = &args.plot_data {
        emit_plot_data(path, &dataset, &curves)?;
    }
    if let Some(path) = &args.svg {
        write_svg(path, &dataset, &curves)?;
    }
    Ok(0)
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_target(false)
        .init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    let outcome = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Experiment(a) => experiment(a),
        Command::Plot(a) => plot(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
