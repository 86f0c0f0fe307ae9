use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use helmsweep_cli::config::{ExperimentConfig, Method, Overrides};
use helmsweep_cli::error::CliError;
use helmsweep_cli::output::OutputSet;
use helmsweep_cli::validate::{
    analytic_points, error_table, load_surrogate, summary_table, validate_surrogate, Reference,
};
use helmsweep_cli::run_experiment;

#[derive(Parser)]
#[command(name = "helmsweep", version, about = "Adaptive FEM frequency sweeps and rational surrogates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep, build surrogates and write CSV reports.
    Run(RunArgs),
    /// Compare a saved surrogate with a reference.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// Comma-separated subset of sri, vsri, mri.
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<String>>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    zmin: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    zmax: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    tolh: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Surrogate JSON written by `run`.
    #[arg(long)]
    surrogate: PathBuf,
    #[arg(long)]
    preset: String,
    /// Directory of validation snapshots; the analytic series is used when absent.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Number of uniform analytic comparison points.
    #[arg(long, default_value_t = 500)]
    points: usize,
    #[arg(long, allow_negative_numbers = true)]
    zmin: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    zmax: Option<f64>,
    /// Compare at the training samples instead of a uniform grid.
    #[arg(long)]
    at_samples: bool,
    /// Output directory for validation.csv and validation_summary.csv.
    #[arg(long, default_value = "validation")]
    out: PathBuf,
}

fn run(args: RunArgs) -> Result<(), CliError> {
    let methods = args
        .method
        .map(|m| m.iter().map(|s| Method::parse(s)).collect::<Result<Vec<_>, _>>())
        .transpose()?;
    let overrides = Overrides {
        preset: args.preset,
        methods,
        samples: args.samples,
        degree: args.degree,
        z_min: args.zmin,
        z_max: args.zmax,
        theta: args.theta,
        tol_h: args.tolh,
        out_dir: args.out,
        seed: args.seed,
    };
    let config = match &args.config {
        Some(path) => {
            let mut c = ExperimentConfig::from_file(path)?;
            c.apply(&overrides);
            c
        }
        None => ExperimentConfig::from_overrides(&overrides)?,
    };
    let results = run_experiment(&config)?;
    let usable = results.snapshots.iter().filter(|s| s.is_usable()).count();
    println!("{usable} of {} snapshots usable", results.snapshots.len());
    for m in &results.methods {
        let errs: Vec<f64> = m.rows.iter().filter_map(|r| r.relative_error()).collect();
        let max = errs.iter().copied().fold(f64::NAN, f64::max);
        println!(
            "{}: type [{}], {} poles, max relative error {}",
            m.method.name(),
            m.degree,
            m.poles.len(),
            if errs.is_empty() { "n/a".to_string() } else { format!("{max:.3e}") }
        );
    }
    println!("reports in {}", config.out_dir.display());
    Ok(())
}

fn validate(args: ValidateArgs) -> Result<(), CliError> {
    let problem = helmsweep::fem::preset(&args.preset)
        .ok_or_else(|| CliError::Config(format!("unknown preset {:?}", args.preset)))?;
    let reference = match &args.reference {
        Some(dir) => Reference::Snapshots(dir),
        None => {
            let s = load_surrogate(&args.surrogate)?;
            Reference::Analytic(analytic_points(&s, args.at_samples, args.points, (args.zmin, args.zmax))?)
        }
    };
    let (rows, summary) = validate_surrogate(&args.surrogate, &problem, &reference)?;
    let mut out = OutputSet::default();
    let written = (|| {
        out.create_dir(&args.out)?;
        out.write(&args.out.join("validation.csv"), &error_table(&rows).render())?;
        out.write(&args.out.join("validation_summary.csv"), &summary_table(&summary).render())
    })();
    if written.is_err() {
        out.rollback();
    }
    written?;
    println!(
        "{} points: median relative error {:.3e}, 90% quantile {:.3e}, max {:.3e}",
        summary.count, summary.median, summary.q90, summary.max
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
