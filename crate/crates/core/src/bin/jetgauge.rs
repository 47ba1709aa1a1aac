use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use jetgauge::dynamics::swell::{export_swell_csv, render_svg, SwellParams};
use jetgauge::suite::{run_suite, Fixture, SuiteConfig, SUITES};
use jetgauge::Result;

/// Run jet-calculus verification suites and print a JSON report.
#[derive(Parser, Debug)]
#[command(name = "jetgauge", version)]
struct Cli {
    /// One of group, pseudogroup, dynamics, swell, elasticity, all.
    #[arg(long, default_value = "all")]
    suite: String,
    /// Extra group, Lie equation system or motion family (JSON).
    #[arg(long)]
    fixture: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Low-discrepancy sample points per box.
    #[arg(long, default_value_t = 64)]
    samples: usize,
    /// Multiplies every check tolerance.
    #[arg(long, default_value_t = 1.0)]
    tol_scale: f64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Export swell trajectories as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Render swell trajectories and a surface streamline as SVG.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Omit per-check runtimes so reports are byte-reproducible.
    #[arg(long)]
    no_timestamp: bool,
    #[arg(long, default_value_t = 1.0)]
    swell_r0: f64,
    #[arg(long, default_value_t = 0.1)]
    swell_k: f64,
    #[arg(long, default_value_t = 1.0)]
    swell_omega: f64,
    #[arg(long, default_value_t = 0.0)]
    swell_c: f64,
}

fn run(cli: Cli) -> Result<bool> {
    if !SUITES.contains(&cli.suite.as_str()) {
        return Err(jetgauge::Error::UnknownSuite(cli.suite));
    }
    let swell = SwellParams {
        r0: cli.swell_r0,
        k: cli.swell_k,
        omega: cli.swell_omega,
        c: cli.swell_c,
        k_r: None,
    };
    swell.validate()?;
    let cfg = SuiteConfig {
        seed: cli.seed,
        samples: cli.samples.max(1),
        tol_scale: cli.tol_scale,
        timestamps: !cli.no_timestamp,
        fixture: cli.fixture.as_deref().map(Fixture::load).transpose()?,
        swell,
    };
    let report = run_suite(&cli.suite, &cfg)?;
    match &cli.out {
        Some(path) => std::fs::write(path, report.to_json())?,
        None => print!("{}", report.to_json()),
    }
    if let Some(path) = &cli.csv {
        export_swell_csv(&swell, path)?;
    }
    if let Some(path) = &cli.svg {
        std::fs::write(path, render_svg(&swell)?)?;
    }
    for c in report.failures() {
        eprintln!("FAIL {} (residual {:?}, tolerance {:e})", c.id, c.max_residual, c.tolerance);
    }
    Ok(report.passed)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
